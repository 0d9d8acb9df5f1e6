"""Static SVG scalp topomaps: a head disk, colored electrodes, highlights.

The background is cosmetic inverse-distance-weighted interpolation (power
2, 4 nearest electrodes), not a spherical spline; it conveys the field's
sign structure, nothing more. Output bytes are a pure function of the
spec, so identical specs render identical files.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ElectrodeLayout

# Diverging anchors: saturated blue for -1, near-white neutral, saturated
# red for +1. The scale is symmetric about zero by construction.
_NEG_RGB = (33, 102, 172)
_MID_RGB = (247, 247, 247)
_POS_RGB = (178, 24, 43)

_SVG_SIZE = 420
_HEAD_CX = 210.0
_HEAD_CY = 218.0
_HEAD_R = 180.0
_GRID_N = 40  # background cells per axis across the head disk
_IDW_POWER = 2
_IDW_NEIGHBORS = 4


@dataclass
class TopomapSpec:
    """One scalp map: where the electrodes sit, what value each carries."""

    layout: ElectrodeLayout
    field: np.ndarray  # [J] scalar per electrode
    highlights: frozenset = frozenset()
    title: str = ""

    def __post_init__(self):
        self.field = np.asarray(self.field, dtype=np.float64)
        if self.field.ndim != 1 or self.field.shape[0] != self.layout.n_electrodes:
            raise ValueError(
                f"field must have one value per electrode "
                f"({self.layout.n_electrodes}), got shape {self.field.shape}"
            )
        self.highlights = frozenset(int(h) for h in self.highlights)
        bad = [h for h in self.highlights if not 0 <= h < self.layout.n_electrodes]
        if bad:
            raise ValueError(f"highlights must be electrode indices, got {sorted(bad)}")


def diverging_color(value: float, vmax: float) -> str:
    """Hex color on the blue/white/red scale; vmax = 0 maps everything neutral."""
    if vmax <= 0:
        t = 0.0
    else:
        t = float(np.clip(value / vmax, -1.0, 1.0))
    anchor = _POS_RGB if t >= 0 else _NEG_RGB
    a = abs(t)
    rgb = tuple(round(m + (c - m) * a) for m, c in zip(_MID_RGB, anchor))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _fmt(v: float) -> str:
    """Fixed-precision coordinate formatting keeps the bytes deterministic."""
    return f"{v:.2f}"


def _to_svg_xy(xy: np.ndarray) -> np.ndarray:
    """Unit-disk layout coordinates (nose at +y) to SVG pixels (y grows down)."""
    out = np.empty_like(xy)
    out[:, 0] = _HEAD_CX + xy[:, 0] * _HEAD_R
    out[:, 1] = _HEAD_CY - xy[:, 1] * _HEAD_R
    return out


def _idw_value(px: float, py: float, xy: np.ndarray, values: np.ndarray) -> float:
    d2 = (xy[:, 0] - px) ** 2 + (xy[:, 1] - py) ** 2
    k = min(_IDW_NEIGHBORS, xy.shape[0])
    nearest = np.argsort(d2, kind="stable")[:k]
    dn = d2[nearest]
    if dn[0] < 1e-18:
        return float(values[nearest[0]])
    w = 1.0 / dn ** (_IDW_POWER / 2)  # d2 is squared distance
    return float((w * values[nearest]).sum() / w.sum())


def _xml_escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")
    )


def render_topomap(spec: TopomapSpec) -> str:
    """Render one spec to a standalone SVG 1.1 document string."""
    xy = spec.layout.xy
    values = spec.field
    vmax = float(np.abs(values).max()) if values.size else 0.0
    svg_xy = _to_svg_xy(xy)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_SVG_SIZE}" height="{_SVG_SIZE}" '
        f'viewBox="0 0 {_SVG_SIZE} {_SVG_SIZE}">\n',
        f'<rect width="{_SVG_SIZE}" height="{_SVG_SIZE}" fill="#ffffff"/>\n',
    ]
    if spec.title:
        parts.append(
            f'<text x="{_fmt(_HEAD_CX)}" y="22" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{_xml_escape(spec.title)}</text>\n'
        )

    # Background: IDW field sampled on a square grid, clipped to the head.
    parts.append(f'<clipPath id="head"><circle cx="{_fmt(_HEAD_CX)}" cy="{_fmt(_HEAD_CY)}" r="{_fmt(_HEAD_R)}"/></clipPath>\n')
    parts.append('<g clip-path="url(#head)">\n')
    cell = 2.0 * _HEAD_R / _GRID_N
    for iy in range(_GRID_N):
        for ix in range(_GRID_N):
            cx = -1.0 + (ix + 0.5) * 2.0 / _GRID_N
            cy = 1.0 - (iy + 0.5) * 2.0 / _GRID_N
            if cx * cx + cy * cy > 1.04:  # just outside the disk; the clip hides the rest
                continue
            v = _idw_value(cx, cy, xy, values)
            color = diverging_color(v, vmax)
            x0 = _HEAD_CX - _HEAD_R + ix * cell
            y0 = _HEAD_CY - _HEAD_R + iy * cell
            parts.append(
                f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(cell)}" '
                f'height="{_fmt(cell)}" fill="{color}"/>\n'
            )
    parts.append("</g>\n")

    # Head outline and nose marker (layout +y faces the nose).
    nose_y = _HEAD_CY - _HEAD_R
    parts.append(
        f'<circle cx="{_fmt(_HEAD_CX)}" cy="{_fmt(_HEAD_CY)}" r="{_fmt(_HEAD_R)}" '
        f'fill="none" stroke="#000000" stroke-width="2"/>\n'
    )
    parts.append(
        f'<path d="M {_fmt(_HEAD_CX - 14)} {_fmt(nose_y + 4)} '
        f'L {_fmt(_HEAD_CX)} {_fmt(nose_y - 16)} '
        f'L {_fmt(_HEAD_CX + 14)} {_fmt(nose_y + 4)}" '
        f'fill="none" stroke="#000000" stroke-width="2"/>\n'
    )

    # Electrodes, highlight rings drawn on top.
    for j in range(spec.layout.n_electrodes):
        ex, ey = svg_xy[j]
        color = diverging_color(float(values[j]), vmax)
        parts.append(
            f'<circle cx="{_fmt(ex)}" cy="{_fmt(ey)}" r="7" fill="{color}" '
            f'stroke="#000000" stroke-width="1">'
            f"<title>{_xml_escape(spec.layout.names[j])}</title></circle>\n"
        )
    for j in sorted(spec.highlights):
        ex, ey = svg_xy[j]
        parts.append(
            f'<circle cx="{_fmt(ex)}" cy="{_fmt(ey)}" r="11" fill="none" '
            f'stroke="#ffd700" stroke-width="3"/>\n'
        )

    parts.append("</svg>\n")
    return "".join(parts)


def save_topomap(spec: TopomapSpec, path) -> None:
    with open(path, "wb") as f:
        f.write(render_topomap(spec).encode("utf-8"))
