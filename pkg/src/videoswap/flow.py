"""Optical-flow warping and flow-guided temporal smoothing of feature maps.

Warping is backward sampling: output pixel (y, x) reads the input at
(x - dx, y - dy) with bilinear interpolation and border clamping, using the
forward flow between consecutive frames evaluated at the destination pixel.
Smoothing convex-blends each frame with the warped previous frame, chained
left-to-right across the frame axis.  A brute-force block-matching
estimator stands in for a learned flow network at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from videoswap.tensor_core import Tensor4, TensorShapeError


class FlowError(ValueError):
    """Invalid flow shapes or parameters."""


@dataclass(frozen=True)
class FlowField:
    """Per-frame-pair pixel displacements, shape (B-1, 2, H, W).

    Channel 0 is the horizontal displacement dx, channel 1 the vertical dy.
    """

    flows: Tensor4

    def __post_init__(self):
        b, c, h, w = self.flows.shape
        if c != 2:
            raise FlowError(f"flow field needs 2 channels (dx, dy), got {c}")
        bound = float(max(h, w))
        if float(np.max(np.abs(self.flows.data))) > bound:
            raise FlowError(f"flow magnitudes exceed the sanity bound {bound}")

    @property
    def pairs(self) -> int:
        return self.flows.shape[0]

    def pair(self, i: int) -> np.ndarray:
        return self.flows.data[i]


@dataclass(frozen=True)
class TemporalSmoothConfig:
    alpha: float = 0.8       # blend weight of the frame's own features
    t1: int = 10             # number of leading denoising steps to smooth
    border: str = "clamp"
    chain: str = "recursive"  # blend against already-aligned ("recursive") or raw frames

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise FlowError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.t1 < 0:
            raise FlowError(f"t1 must be >= 0, got {self.t1}")
        if self.border != "clamp":
            raise FlowError(f"only 'clamp' border sampling is supported, got {self.border!r}")
        if self.chain not in ("recursive", "original"):
            raise FlowError(f"chain must be 'recursive' or 'original', got {self.chain!r}")


def bilinear_warp(x: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Warp a (C, H, W) slice by a (2, H, W) flow with clamped bilinear sampling."""
    x = np.asarray(x, dtype=np.float32)
    f = np.asarray(f, dtype=np.float32)
    if x.ndim != 3 or f.shape != (2,) + x.shape[1:]:
        raise FlowError(f"inconsistent shapes: features {x.shape}, flow {f.shape}")
    if not np.isfinite(f).all():
        raise FlowError("flow contains non-finite values")
    _, h, w = x.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float32), np.arange(w, dtype=np.float32),
                         indexing="ij")
    sx = np.clip(xs - f[0], 0.0, w - 1.0)
    sy = np.clip(ys - f[1], 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (sx - x0).astype(np.float32)
    wy = (sy - y0).astype(np.float32)
    p00 = x[:, y0, x0]
    p01 = x[:, y0, x1]
    p10 = x[:, y1, x0]
    p11 = x[:, y1, x1]
    top = p00 * (1.0 - wx) + p01 * wx
    bot = p10 * (1.0 - wx) + p11 * wx
    return (top * (1.0 - wy) + bot * wy).astype(np.float32)


def warp_blend(x_next: np.ndarray, x_prev: np.ndarray, f: np.ndarray, alpha: float) -> np.ndarray:
    """alpha * x_next + (1 - alpha) * warp(x_prev, f); alpha == 1 is the exact identity."""
    if x_next.shape != x_prev.shape:
        raise FlowError(f"shape mismatch {x_next.shape} vs {x_prev.shape}")
    if alpha == 1.0:
        return np.array(x_next, dtype=np.float32, copy=True)
    a = np.float32(alpha)
    warped = bilinear_warp(x_prev, f)
    # written as w + a*(x - w) so equal operands are a bit-exact fixed point
    return warped + a * (np.asarray(x_next, dtype=np.float32) - warped)


def smooth_sequence(batch: np.ndarray, flows: np.ndarray, cfg: TemporalSmoothConfig) -> np.ndarray:
    """Chain warp_blend across the frame axis of a (B, C, H, W) feature batch.

    Frame 0 passes through unchanged.  With the recursive chain, frame i+1
    blends against the already-aligned frame i; with the original chain,
    against the raw input frame i.  Strictly sequential over frames.
    """
    batch = np.asarray(batch, dtype=np.float32)
    if batch.ndim != 4:
        raise FlowError(f"expected a (B, C, H, W) batch, got shape {batch.shape}")
    b = batch.shape[0]
    flows = np.asarray(flows, dtype=np.float32)
    if b > 1 and flows.shape != (b - 1, 2) + batch.shape[2:]:
        raise FlowError(
            f"expected {b - 1} flow pairs of shape (2, H, W), got {flows.shape}"
        )
    if b == 1 or cfg.alpha == 1.0:
        return batch.copy()
    out = batch.copy()
    for i in range(b - 1):
        prev = out[i] if cfg.chain == "recursive" else batch[i]
        out[i + 1] = warp_blend(batch[i + 1], prev, flows[i], cfg.alpha)
    return out


def _gather_shifted(a: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """a sampled at (y - dy, x - dx) with clamped integer indexing."""
    _, h, w = a.shape
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    return a[:, ys[:, None], xs[None, :]]


def _box_sum(img: np.ndarray, radius: int) -> np.ndarray:
    """Sum over (2r+1)^2 windows with edge-replicated borders.

    Summed directly per window (not via integral images) so that windows
    holding identical values produce bitwise-identical sums; exact cost
    ties must stay exact for the displacement tie-breaking to be stable.
    """
    if radius == 0:
        return img
    p = np.pad(img, radius, mode="edge")
    k = 2 * radius + 1
    windows = np.lib.stride_tricks.sliding_window_view(p, (k, k))
    return windows.sum(axis=(-2, -1))


def block_matching_flow(a: np.ndarray, b: np.ndarray, radius: int, block: int) -> np.ndarray:
    """Exhaustive integer-displacement flow from frame a to frame b.

    Per pixel of b, searches displacements in [-radius, radius]^2 minimizing
    the sum of squared differences over a centered block (border-clamped).
    Ties break toward smaller |dx|+|dy|, then smaller dy, then smaller dx.
    Returns a (2, H, W) float32 field (dx, dy).
    """
    a = np.asarray(a, dtype=np.float32)
    b = np.asarray(b, dtype=np.float32)
    if a.ndim != 3 or a.shape != b.shape:
        raise FlowError(f"frames must share a (C, H, W) shape, got {a.shape} vs {b.shape}")
    if radius < 0:
        raise FlowError(f"radius must be >= 0, got {radius}")
    if block < 1 or block % 2 == 0:
        raise FlowError(f"block must be a positive odd size, got {block}")
    _, h, w = a.shape
    if radius == 0:
        return np.zeros((2, h, w), dtype=np.float32)
    br = block // 2
    candidates = sorted(
        ((dx, dy) for dy in range(-radius, radius + 1) for dx in range(-radius, radius + 1)),
        key=lambda d: (abs(d[0]) + abs(d[1]), d[1], d[0]),
    )
    best_cost = np.full((h, w), np.inf, dtype=np.float64)
    best_dx = np.zeros((h, w), dtype=np.float32)
    best_dy = np.zeros((h, w), dtype=np.float32)
    for dx, dy in candidates:
        shifted = _gather_shifted(a, dy, dx)
        diff = np.sum((b.astype(np.float64) - shifted.astype(np.float64)) ** 2, axis=0)
        cost = _box_sum(diff, br)
        better = cost < best_cost  # strict: earlier (preferred) candidates win ties
        best_cost[better] = cost[better]
        best_dx[better] = dx
        best_dy[better] = dy
    return np.stack([best_dx, best_dy]).astype(np.float32)


def flow_field_from_video(video: Tensor4, radius: int, block: int) -> FlowField:
    """Estimate consecutive-frame flows for a (B, C, H, W) video via block matching."""
    b = video.shape[0]
    if b < 2:
        raise TensorShapeError("need at least 2 frames to estimate flow")
    pairs = [
        block_matching_flow(video.data[i], video.data[i + 1], radius, block)
        for i in range(b - 1)
    ]
    return FlowField(Tensor4(np.stack(pairs)))
