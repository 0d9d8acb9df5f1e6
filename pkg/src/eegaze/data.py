"""Synthetic EEG gaze datasets and the bit-exact container format.

Real recordings are out of reach here, so a small physiologically
motivated forward model stands in: each electrode picks up horizontal and
vertical eye-offset waveforms with gains set by its scalp position
(lateral electrodes see horizontal offset, frontal electrodes see more of
everything), plus Gaussian sensor noise and a per-subject gain. That is
enough structure for a model to learn gaze from, for subject splits to
matter, and for injected high-amplitude artifacts to be detectable.

Every sample draws from its own counter-based RNG stream keyed by
(seed, subject, sample index), so generation order and parallelism can
never change the output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import binio

DATASET_MAGIC = b"EEGS"
DATASET_VERSION = 1
TASK_CODES = {"position": 0, "direction": 1}
CODE_TASKS = {code: task for task, code in TASK_CODES.items()}

DEFAULT_SCREEN = (800, 600)
DEFAULT_SAMPLE_RATE_HZ = 500

# Forward-model constants: microvolts of electrode signal per pixel of gaze
# offset, and the per-subject lognormal gain spread.
AMPLITUDE_UV_PER_PX = 0.02
SUBJECT_GAIN_SIGMA = 0.2

# Spawn-key tags keeping the injection streams disjoint from generation.
_INJECT_TAG = 0x1BAD


@dataclass
class ElectrodeLayout:
    """Electrode names and (x, y) scalp positions in the unit disk, nose at +y."""

    names: list[str]
    xy: np.ndarray  # [J, 2] float64

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64)
        if self.xy.ndim != 2 or self.xy.shape[1] != 2:
            raise ValueError(f"layout coordinates must be [J, 2], got {self.xy.shape}")
        if len(self.names) != self.xy.shape[0]:
            raise ValueError("layout names and coordinates disagree in length")
        norms = np.sqrt((self.xy**2).sum(axis=1))
        if (norms > 1.0 + 1e-9).any():
            raise ValueError("layout positions must lie in the unit disk")

    @property
    def n_electrodes(self) -> int:
        return self.xy.shape[0]


def default_layout(n_electrodes: int) -> ElectrodeLayout:
    """Concentric rings, mirror-symmetric about the y axis, denser in front.

    Ring sizes grow with radius; angular spacing is compressed toward +y so
    most electrodes sit on the frontal half, where the forward model's
    gains live.
    """
    if n_electrodes < 1:
        raise ValueError("default_layout: need at least one electrode")
    n_rings = int(np.ceil(np.sqrt(n_electrodes / 3.0)))
    radii = [0.95 * (i + 1) / n_rings for i in range(n_rings)]
    counts = _largest_remainder(n_electrodes, radii)
    while 0 in counts:  # tiny J can starve inner rings
        counts[counts.index(0)] += 1
        counts[int(np.argmax(counts))] -= 1
    xy = np.zeros((n_electrodes, 2))
    e = 0
    for r, m in zip(radii, counts):
        for j in range(m):
            s = (2 * j + 1 - m) / m  # signed fraction, mirror-paired
            ang = np.sign(s) * np.pi * abs(s) ** 1.4  # compress toward the nose
            xy[e] = (r * np.sin(ang), r * np.cos(ang))
            e += 1
    names = [f"E{i + 1}" for i in range(n_electrodes)]
    return ElectrodeLayout(names, xy)


def save_layout(layout: ElectrodeLayout, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["index", "name", "x", "y"])
        for i, name in enumerate(layout.names):
            w.writerow([i, name, repr(float(layout.xy[i, 0])), repr(float(layout.xy[i, 1]))])


def load_layout(path) -> ElectrodeLayout:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ValueError(f"layout file {path} has no electrode rows")
    seen = {}
    for row in rows:
        idx = int(row["index"])
        if idx in seen:
            raise ValueError(f"duplicate electrode index {idx} in layout")
        seen[idx] = (row["name"], float(row["x"]), float(row["y"]))
    if set(seen) != set(range(len(seen))):
        raise ValueError("layout indices must cover 0..J-1 exactly")
    names = [seen[i][0] for i in range(len(seen))]
    xy = np.array([[seen[i][1], seen[i][2]] for i in range(len(seen))])
    return ElectrodeLayout(names, xy)


@dataclass
class EegSample:
    subject_id: int
    signal: np.ndarray  # [J, T] float32 microvolts
    label: np.ndarray  # [2] float32: (x, y) px or (amplitude px, angle rad)
    noisy_electrodes: frozenset = frozenset()


@dataclass
class EegDataset:
    task: str
    samples: list[EegSample]
    n_electrodes: int
    n_timepoints: int
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ
    screen: tuple[int, int] = DEFAULT_SCREEN
    layout: ElectrodeLayout | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.task not in TASK_CODES:
            raise ValueError(f"task must be one of {sorted(TASK_CODES)}, got {self.task!r}")
        for s in self.samples:
            if s.signal.shape != (self.n_electrodes, self.n_timepoints):
                raise ValueError(
                    f"sample signal {s.signal.shape} does not match header "
                    f"({self.n_electrodes}, {self.n_timepoints})"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def signals_array(self) -> np.ndarray:
        return np.stack([s.signal for s in self.samples]) if self.samples else np.zeros(
            (0, self.n_electrodes, self.n_timepoints), dtype=np.float32
        )

    def labels_array(self) -> np.ndarray:
        return np.stack([s.label for s in self.samples]) if self.samples else np.zeros(
            (0, 2), dtype=np.float32
        )

    def subject_ids(self) -> np.ndarray:
        return np.array([s.subject_id for s in self.samples], dtype=np.uint32)


def _largest_remainder(total: int, weights) -> list[int]:
    """Integer allocation of `total` proportional to `weights`."""
    weights = np.asarray(weights, dtype=np.float64)
    quotas = total * weights / weights.sum()
    counts = np.floor(quotas).astype(int)
    for i in np.argsort(-(quotas - counts))[: total - counts.sum()]:
        counts[i] += 1
    return counts.tolist()


def _sample_rng(seed: int, subject: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(subject, index)))


def _subject_gain(seed: int, subject: int) -> float:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(subject,)))
    return float(np.exp(rng.normal(0.0, SUBJECT_GAIN_SIGMA)))


def electrode_gains(layout: ElectrodeLayout) -> tuple[np.ndarray, np.ndarray]:
    """Per-electrode horizontal/vertical pickup in microvolts per pixel.

    Frontality max(0, y) + 0.1 keeps a floor of sensitivity everywhere
    while concentrating signal near the eyes.
    """
    x, y = layout.xy[:, 0], layout.xy[:, 1]
    frontality = np.maximum(0.0, y) + 0.1
    g_h = AMPLITUDE_UV_PER_PX * x * frontality
    g_v = AMPLITUDE_UV_PER_PX * y * frontality
    return g_h, g_v


def synth_generate(
    task: str,
    n_subjects: int,
    n_samples_per_subject: int,
    n_electrodes: int,
    n_timepoints: int,
    noise_std: float = 10.0,
    seed: int = 0,
    screen: tuple[int, int] = DEFAULT_SCREEN,
    sample_rate_hz: int = DEFAULT_SAMPLE_RATE_HZ,
    layout: ElectrodeLayout | None = None,
) -> EegDataset:
    """Generate a synthetic dataset; deterministic in all arguments.

    Position task: the label is a fixation point uniform over the screen
    and the offset waveforms are constant. Direction task: the label is
    (amplitude, angle) of a saccade (uniform [10, 600] px, [-pi, pi]) and
    the offsets step from zero at a uniform-random time.
    """
    if task not in TASK_CODES:
        raise ValueError(f"task must be one of {sorted(TASK_CODES)}, got {task!r}")
    if n_electrodes < 4 or n_timepoints < 16:
        raise ValueError("need n_electrodes >= 4 and n_timepoints >= 16")
    if n_subjects < 1 or n_samples_per_subject < 1:
        raise ValueError("need at least one subject and one sample per subject")
    if noise_std < 0:
        raise ValueError("noise_std must be nonnegative")
    if layout is None:
        layout = default_layout(n_electrodes)
    elif layout.n_electrodes != n_electrodes:
        raise ValueError("layout electrode count does not match n_electrodes")

    g_h, g_v = electrode_gains(layout)
    w, h = screen
    samples = []
    for subject in range(n_subjects):
        gain = _subject_gain(seed, subject)
        for index in range(n_samples_per_subject):
            rng = _sample_rng(seed, subject, index)
            if task == "position":
                label = np.array([rng.uniform(0, w), rng.uniform(0, h)])
                dx = np.full(n_timepoints, label[0] - w / 2.0)
                dy = np.full(n_timepoints, label[1] - h / 2.0)
            else:
                amp = rng.uniform(10.0, 600.0)
                ang = rng.uniform(-np.pi, np.pi)
                label = np.array([amp, ang])
                t0 = int(rng.integers(1, n_timepoints))
                step = (np.arange(n_timepoints) >= t0).astype(np.float64)
                dx = amp * np.cos(ang) * step
                dy = amp * np.sin(ang) * step
            clean = gain * (np.outer(g_h, dx) + np.outer(g_v, dy))
            noise = rng.normal(0.0, noise_std, size=(n_electrodes, n_timepoints))
            samples.append(
                EegSample(
                    subject_id=subject,
                    signal=(clean + noise).astype(np.float32),
                    label=label.astype(np.float32),
                )
            )
    return EegDataset(
        task=task,
        samples=samples,
        n_electrodes=n_electrodes,
        n_timepoints=n_timepoints,
        sample_rate_hz=sample_rate_hz,
        screen=screen,
        layout=layout,
    )


def inject_noisy_electrodes(
    ds: EegDataset, fraction_samples: float, n_bad_per_sample: int, seed: int = 0
) -> EegDataset:
    """Overwrite random electrodes on a fraction of samples with artifacts.

    Artifacts are random walks rescaled to a peak absolute amplitude above
    100 microvolts, far outside the clean-signal envelope. Returns a new
    dataset with the noisy_electrodes annotations set; the input is not
    modified.
    """
    if not 0.0 <= fraction_samples <= 1.0:
        raise ValueError("fraction_samples must be within [0, 1]")
    if not 0 <= n_bad_per_sample < ds.n_electrodes:
        raise ValueError("n_bad_per_sample must be < n_electrodes")
    n_pick = round(fraction_samples * len(ds.samples))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_INJECT_TAG,)))
    picked = set(rng.choice(len(ds.samples), size=n_pick, replace=False).tolist()) if n_pick else set()

    out = []
    for i, s in enumerate(ds.samples):
        if i not in picked or n_bad_per_sample == 0:
            out.append(EegSample(s.subject_id, s.signal, s.label, s.noisy_electrodes))
            continue
        srng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(_INJECT_TAG, i)))
        bad = srng.choice(ds.n_electrodes, size=n_bad_per_sample, replace=False)
        signal = s.signal.copy()
        for e in bad:
            walk = np.cumsum(srng.normal(0.0, 1.0, size=ds.n_timepoints))
            peak = srng.uniform(110.0, 160.0)
            denom = max(np.abs(walk).max(), 1e-12)
            signal[e] = (walk * (peak / denom)).astype(np.float32)
        out.append(EegSample(s.subject_id, signal, s.label, frozenset(int(e) for e in bad)))
    return EegDataset(
        task=ds.task,
        samples=out,
        n_electrodes=ds.n_electrodes,
        n_timepoints=ds.n_timepoints,
        sample_rate_hz=ds.sample_rate_hz,
        screen=ds.screen,
        layout=ds.layout,
    )


def split_by_subject(
    ds: EegDataset, fractions: tuple[float, float, float] = (0.70, 0.15, 0.15), seed: int = 0
) -> tuple[EegDataset, EegDataset, EegDataset]:
    """Partition subjects (never samples) into train/val/test datasets.

    Subjects are shuffled by seed and allocated by largest-remainder
    rounding; every partition receives at least one subject.
    """
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be three nonnegative values summing to 1")
    subjects = sorted({s.subject_id for s in ds.samples})
    if len(subjects) < 3:
        raise ValueError(f"need at least 3 subjects to split, have {len(subjects)}")
    order = np.random.default_rng(seed).permutation(len(subjects))
    shuffled = [subjects[i] for i in order]
    counts = _largest_remainder(len(subjects), fractions)
    while 0 in counts:  # every partition must be usable
        counts[counts.index(0)] += 1
        counts[int(np.argmax(counts))] -= 1
    groups = []
    start = 0
    for c in counts:
        groups.append(set(shuffled[start : start + c]))
        start += c

    def subset(keep: set) -> EegDataset:
        return EegDataset(
            task=ds.task,
            samples=[s for s in ds.samples if s.subject_id in keep],
            n_electrodes=ds.n_electrodes,
            n_timepoints=ds.n_timepoints,
            sample_rate_hz=ds.sample_rate_hz,
            screen=ds.screen,
            layout=ds.layout,
        )

    return subset(groups[0]), subset(groups[1]), subset(groups[2])


def save_dataset(ds: EegDataset, path):
    with open(path, "wb") as f:
        w = binio.Writer(f)
        w.raw(DATASET_MAGIC)
        w.u16(DATASET_VERSION)
        w.u8(TASK_CODES[ds.task])
        w.u32(len(ds.samples))
        w.u16(ds.n_electrodes)
        w.u32(ds.n_timepoints)
        w.u32(ds.sample_rate_hz)
        w.u16(ds.screen[0])
        w.u16(ds.screen[1])
        for s in ds.samples:
            w.u32(s.subject_id)
            w.f32_array(np.asarray(s.label, dtype=np.float32))
            noisy = sorted(s.noisy_electrodes)
            w.u16(len(noisy))
            for e in noisy:
                w.u16(e)
            w.f32_array(np.ascontiguousarray(s.signal, dtype=np.float32).reshape(-1))


def load_dataset(path) -> EegDataset:
    with open(path, "rb") as f:
        r = binio.Reader(f)
        r.expect_magic(DATASET_MAGIC)
        version = r.u16()
        if version != DATASET_VERSION:
            raise binio.VersionError(f"unsupported dataset version {version}")
        code = r.u8()
        if code not in CODE_TASKS:
            raise binio.FormatError(f"unknown task code {code}")
        n_samples = r.u32()
        n_electrodes = r.u16()
        n_timepoints = r.u32()
        sample_rate = r.u32()
        screen = (r.u16(), r.u16())
        samples = []
        for _ in range(n_samples):
            subject = r.u32()
            label = r.f32_array(2)
            n_noisy = r.u16()
            noisy = frozenset(r.u16() for _ in range(n_noisy))
            signal = r.f32_array(n_electrodes * n_timepoints).reshape(n_electrodes, n_timepoints)
            samples.append(EegSample(subject, signal, label, noisy))
        if not r.at_eof():
            raise binio.FormatError("trailing bytes after final sample")
    return EegDataset(
        task=CODE_TASKS[code],
        samples=samples,
        n_electrodes=n_electrodes,
        n_timepoints=n_timepoints,
        sample_rate_hz=sample_rate,
        screen=screen,
    )
