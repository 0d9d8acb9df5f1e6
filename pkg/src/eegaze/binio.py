"""Little-endian binary container helpers shared by the dataset and checkpoint formats."""

from __future__ import annotations

import struct
from typing import BinaryIO

import numpy as np


class FormatError(ValueError):
    """Base class for container-format violations."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class VersionError(FormatError):
    """Recognized container but unsupported format version."""


class TruncatedFileError(FormatError):
    """File ended before the declared payload was complete."""


class Reader:
    def __init__(self, f: BinaryIO):
        self.f = f

    def read_exact(self, n: int) -> bytes:
        buf = self.f.read(n)
        if len(buf) != n:
            raise TruncatedFileError(f"expected {n} bytes, got {len(buf)}")
        return buf

    def expect_magic(self, magic: bytes):
        got = self.f.read(len(magic))
        if got != magic:
            raise BadMagicError(f"bad magic: expected {magic!r}, got {got!r}")

    def u8(self) -> int:
        return self.read_exact(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.read_exact(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.read_exact(4))[0]

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.read_exact(4 * count), dtype="<f4").copy()

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.read_exact(8 * count), dtype="<f8").copy()

    def at_eof(self) -> bool:
        pos = self.f.tell()
        if self.f.read(1) == b"":
            return True
        self.f.seek(pos)
        return False


class Writer:
    def __init__(self, f: BinaryIO):
        self.f = f

    def raw(self, data: bytes):
        self.f.write(data)

    def u8(self, v: int):
        self.f.write(struct.pack("<B", v))

    def u16(self, v: int):
        self.f.write(struct.pack("<H", v))

    def u32(self, v: int):
        self.f.write(struct.pack("<I", v))

    def f32_array(self, arr: np.ndarray):
        self.f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    def f64_array(self, arr: np.ndarray):
        self.f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
