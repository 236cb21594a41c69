"""Dense (frames, channels, height, width) float32 tensors and their file formats.

Tensors are immutable-by-convention wrappers around contiguous row-major
numpy arrays.  All public operations validate finiteness so that NaN/Inf
never propagates silently through the pipeline.  On-disk formats are
little-endian regardless of host so fixtures are bit-exact everywhere.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"TNSR"
VERSION = 1
DTYPE_REAL32 = 0
HEADER = struct.Struct("<4sHBB4I")  # magic, version, dtype, ndim, shape -> 24 bytes


class TensorError(Exception):
    """Base class for tensor construction and I/O failures."""


class TensorFormatError(TensorError):
    """Malformed TNSR file (bad magic, version, dtype, truncation, non-finite payload)."""


class TensorShapeError(TensorError):
    """Shape or index constraint violated."""


@dataclass(frozen=True)
class Tensor4:
    """A (B, C, H, W) float32 array, contiguous and row-major.

    Index (b, c, y, x) maps to flat offset ((b*C + c)*H + y)*W + x.
    Values are finite after every public operation.
    """

    data: np.ndarray

    def __post_init__(self):
        a = self.data
        if not isinstance(a, np.ndarray) or a.ndim != 4:
            raise TensorShapeError(f"expected a 4-d array, got {getattr(a, 'shape', None)}")
        if any(s < 1 for s in a.shape):
            raise TensorShapeError(f"all dims must be >= 1, got {a.shape}")
        if a.dtype != np.float32 or not a.flags.c_contiguous:
            a = np.ascontiguousarray(a, dtype=np.float32)
            object.__setattr__(self, "data", a)
        if not np.isfinite(a).all():
            raise TensorError("tensor contains non-finite values")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.data.shape)

    @staticmethod
    def zeros(shape: tuple[int, int, int, int]) -> "Tensor4":
        return Tensor4(np.zeros(shape, dtype=np.float32))

    @staticmethod
    def full(shape: tuple[int, int, int, int], value: float) -> "Tensor4":
        return Tensor4(np.full(shape, value, dtype=np.float32))

    def get(self, b: int, c: int, y: int, x: int) -> float:
        return float(self.data[b, c, y, x])

    def set(self, b: int, c: int, y: int, x: int, value: float) -> "Tensor4":
        """Return a copy with one element replaced (tensors are immutable)."""
        out = self.data.copy()
        out[b, c, y, x] = value
        return Tensor4(out)

    def add(self, other: "Tensor4") -> "Tensor4":
        if self.shape != other.shape:
            raise TensorShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return Tensor4(self.data + other.data)

    def sub(self, other: "Tensor4") -> "Tensor4":
        if self.shape != other.shape:
            raise TensorShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return Tensor4(self.data - other.data)

    def scale(self, s: float) -> "Tensor4":
        return Tensor4(self.data * np.float32(s))

    def l2_norm(self) -> float:
        # accumulate in float64 to keep norms stable on large tensors
        return float(np.sqrt(np.sum(self.data.astype(np.float64) ** 2)))

    def max_abs_diff(self, other: "Tensor4") -> float:
        if self.shape != other.shape:
            raise TensorShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return float(np.max(np.abs(self.data - other.data)))

    def copy(self) -> "Tensor4":
        return Tensor4(self.data.copy())


def write_tensor(path: str | Path, t: Tensor4) -> None:
    """Serialize to the TNSR format: 24-byte header + little-endian float32 payload."""
    b, c, h, w = t.shape
    header = HEADER.pack(MAGIC, VERSION, DTYPE_REAL32, 4, b, c, h, w)
    payload = t.data.astype("<f4", copy=False).tobytes()
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(payload)
    except OSError as e:
        raise TensorError(f"failed to write tensor to {path}: {e}") from e


def read_tensor(path: str | Path) -> Tensor4:
    """Parse a TNSR file, reproducing shape and values bit-exactly."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise TensorError(f"failed to read tensor from {path}: {e}") from e
    if len(raw) < HEADER.size:
        raise TensorFormatError(f"{path}: file shorter than the 24-byte header")
    magic, version, dtype, ndim, b, c, h, w = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    if dtype != DTYPE_REAL32:
        raise TensorFormatError(f"{path}: unsupported dtype code {dtype}, expected {DTYPE_REAL32}")
    if ndim != 4:
        raise TensorFormatError(f"{path}: ndim {ndim} != 4")
    n = b * c * h * w
    payload = raw[HEADER.size:]
    if len(payload) < 4 * n:
        raise TensorFormatError(
            f"{path}: truncated payload, expected {4 * n} bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload[: 4 * n], dtype="<f4").reshape(b, c, h, w)
    if not np.isfinite(values).all():
        raise TensorFormatError(f"{path}: payload contains non-finite values")
    return Tensor4(values.astype(np.float32, copy=True))


def write_frame_pgm(path: str | Path, t: Tensor4, frame: int, channel: int) -> None:
    """Dump one (frame, channel) slice as a binary PGM ("P5").

    Values are mapped linearly from the slice's [min, max] to [0, 255];
    a constant slice maps to 128 everywhere.
    """
    b_n, c_n, h, w = t.shape
    if not (0 <= frame < b_n) or not (0 <= channel < c_n):
        raise TensorShapeError(
            f"frame/channel ({frame},{channel}) out of range for shape {t.shape}"
        )
    sl = t.data[frame, channel].astype(np.float64)
    lo, hi = float(sl.min()), float(sl.max())
    if hi > lo:
        pix = np.rint((sl - lo) * (255.0 / (hi - lo))).astype(np.uint8)
    else:
        pix = np.full((h, w), 128, dtype=np.uint8)
    try:
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(pix.tobytes())
    except OSError as e:
        raise TensorError(f"failed to write PGM to {path}: {e}") from e
