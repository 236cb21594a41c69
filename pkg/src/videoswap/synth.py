"""Deterministic synthetic video fixtures with exact ground-truth flow.

Every frame samples one fixed base pattern at coordinates translated by a
constant per-frame velocity, with border clamping.  For integer velocities
this makes consecutive frames exact border-clamped shifts of each other,
so warping frame i by the declared constant flow reproduces frame i+1
exactly (borders included) and the ground-truth flow is exact by
construction.  Independent per-frame Gaussian noise is added on top.

The target condition is the clean base pattern; the source condition is a
distinct pattern with different low-frequency content, standing in for the
identity to be swapped in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from videoswap.flow import FlowField
from videoswap.tensor_core import Tensor4
from videoswap.toy_denoiser import Condition


class SynthError(ValueError):
    """Invalid synthetic-video specification."""


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = "translating_texture"  # or "moving_disk"
    frames: int = 12
    channels: int = 8
    height: int = 32
    width: int = 32
    velocity: tuple[float, float] = (1.0, 0.0)  # (vx, vy) pixels per frame
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("translating_texture", "moving_disk"):
            raise SynthError(f"unknown kind {self.kind!r}")
        if self.frames < 1 or self.channels < 1 or self.height < 1 or self.width < 1:
            raise SynthError("frames/channels/height/width must all be >= 1")
        if abs(self.velocity[0]) >= self.width or abs(self.velocity[1]) >= self.height:
            raise SynthError("per-frame velocity must be smaller than the frame")
        if self.noise_std < 0.0:
            raise SynthError("noise_std must be >= 0")


def _texture(rng, c: int, h: int, w: int, components: int = 4,
             shell: int = 5) -> np.ndarray:
    """Random texture on one frequency shell: cosines with |fx| + |fy| = shell.

    Confining each pattern to a single shell gives it a clean, narrow
    spectral signature, so target and source appearances built on different
    shells are cleanly separable in the frequency domain.
    """
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    out = np.zeros((c, h, w), dtype=np.float64)
    for ch in range(c):
        for _ in range(components):
            fx = int(rng.integers(0, shell + 1))
            fy = shell - fx
            phase = rng.uniform(0.0, 2.0 * np.pi)
            amp = rng.uniform(0.3, 0.7)
            out[ch] += amp * np.cos(2.0 * np.pi * (fx * xs / w + fy * ys / h) + phase)
    return out.astype(np.float32)


def _disk(rng, c: int, h: int, w: int) -> np.ndarray:
    """Soft-edged disk off-center, over a faint texture so flow has support."""
    ys, xs = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    cy, cx = h * 0.45, w * 0.35
    r = 0.22 * min(h, w)
    bump = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * r * r))
    base = 0.15 * _texture(rng, c, h, w, components=2)
    gains = rng.uniform(0.6, 1.2, size=c)
    return (base + gains[:, None, None] * bump[None]).astype(np.float32)


def _sample_translated(pattern: np.ndarray, shift_x: float, shift_y: float) -> np.ndarray:
    """Sample the pattern at (y - shift_y, x - shift_x) with border clamping."""
    c, h, w = pattern.shape
    if float(shift_x).is_integer() and float(shift_y).is_integer():
        ys = np.clip(np.arange(h) - int(shift_y), 0, h - 1)
        xs = np.clip(np.arange(w) - int(shift_x), 0, w - 1)
        return pattern[:, ys[:, None], xs[None, :]]
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    sx = np.clip(xs - shift_x, 0.0, w - 1.0)
    sy = np.clip(ys - shift_y, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (sx - x0).astype(np.float32)
    wy = (sy - y0).astype(np.float32)
    top = pattern[:, y0, x0] * (1 - wx) + pattern[:, y0, x1] * wx
    bot = pattern[:, y1, x0] * (1 - wx) + pattern[:, y1, x1] * wx
    return (top * (1 - wy) + bot * wy).astype(np.float32)


def synth_video(spec: SyntheticSpec):
    """Build (video, ground-truth flow, target condition, source condition).

    Deterministic in the seed.  The flow is None for single-frame videos.
    """
    rng = np.random.default_rng(spec.seed)
    c, h, w = spec.channels, spec.height, spec.width
    if spec.kind == "translating_texture":
        pattern = _texture(rng, c, h, w)
    else:
        pattern = _disk(rng, c, h, w)

    vx, vy = spec.velocity
    frames = np.stack(
        [_sample_translated(pattern, i * vx, i * vy) for i in range(spec.frames)]
    )
    if spec.noise_std > 0.0:
        frames = frames + rng.normal(0.0, spec.noise_std, size=frames.shape).astype(
            np.float32
        )
    video = Tensor4(frames.astype(np.float32))

    gt_flow = None
    if spec.frames > 1:
        f = np.zeros((spec.frames - 1, 2, h, w), dtype=np.float32)
        f[:, 0] = vx
        f[:, 1] = vy
        gt_flow = FlowField(Tensor4(f))

    # distinct source pattern: a lower frequency shell than the target's
    src_rng = np.random.default_rng(spec.seed ^ 0x5EED5EED)
    if spec.kind == "translating_texture":
        src_pattern = _texture(src_rng, c, h, w, components=3, shell=2)
    else:
        src_pattern = _disk(src_rng, c, h, w) + np.float32(0.5)
    cond_tar = Condition(id="target", mu=Tensor4(pattern[None].copy()))
    cond_src = Condition(id="source", mu=Tensor4(src_pattern[None].astype(np.float32)))
    return video, gt_flow, cond_tar, cond_src
