"""Desk-scale proxy metrics for swap quality and temporal stability.

flicker_index: mean squared difference between each frame and the
flow-warped previous frame; zero for a video that moves exactly along the
supplied flow.  psnr: standard peak signal-to-noise ratio capped at 99 dB.
low_band_similarity: cosine similarity between the low-frequency spectrum
magnitudes of the output frames and a reference pattern, measuring how
much coarse appearance was transferred.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from videoswap.flow import FlowField, bilinear_warp
from videoswap.spectral import low_bin_count
from videoswap.tensor_core import Tensor4, TensorShapeError

PSNR_CAP = 99.0


@dataclass(frozen=True)
class MetricsReport:
    flicker_index: float
    psnr_to_target: float
    low_band_similarity: float

    def to_dict(self) -> dict:
        return asdict(self)


def flicker_index(video: Tensor4, flow: FlowField) -> float:
    """Mean over frame pairs, channels and pixels of (v[i+1] - warp(v[i], f[i]))^2."""
    b = video.shape[0]
    if b < 2:
        return 0.0
    if flow.pairs != b - 1:
        raise TensorShapeError(f"need {b - 1} flow pairs, got {flow.pairs}")
    total = 0.0
    for i in range(b - 1):
        warped = bilinear_warp(video.data[i], flow.pair(i))
        d = video.data[i + 1].astype(np.float64) - warped.astype(np.float64)
        total += float(np.mean(d * d))
    return total / (b - 1)


def psnr(a: Tensor4, b: Tensor4, peak: float) -> float:
    """10 log10(peak^2 / MSE), capped at 99 dB."""
    if a.shape != b.shape:
        raise TensorShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    if peak <= 0.0:
        raise ValueError(f"peak must be positive, got {peak}")
    d = a.data.astype(np.float64) - b.data.astype(np.float64)
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * math.log10(peak * peak / mse), PSNR_CAP)


def _low_band_magnitudes(frame: np.ndarray, rho: float) -> np.ndarray:
    """Channel-averaged low-band rdft magnitudes of one (C, H, W) frame."""
    c = frame.shape[0]
    flat = frame.reshape(c, -1).astype(np.float64)
    spec = np.fft.rfft(flat, axis=1)
    n_low = low_bin_count(rho, spec.shape[1])
    return np.abs(spec[:, :n_low]).mean(axis=0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def low_band_similarity(video: Tensor4, src_pattern: Tensor4, rho: float) -> float:
    """Mean over frames of the low-band spectral cosine against the source pattern."""
    if video.shape[1:] != src_pattern.shape[1:]:
        raise TensorShapeError(
            f"spatial shapes differ: {video.shape} vs {src_pattern.shape}"
        )
    ref = _low_band_magnitudes(src_pattern.data[0], rho)
    sims = [
        _cosine(_low_band_magnitudes(video.data[i], rho), ref)
        for i in range(video.shape[0])
    ]
    return float(np.mean(sims))


def build_report(
    output: Tensor4, target: Tensor4, src_pattern: Tensor4, flow: FlowField | None,
    rho: float,
) -> MetricsReport:
    """Assemble the standard report; peak is the target's dynamic range."""
    peak = float(target.data.max() - target.data.min())
    if peak == 0.0:
        peak = 1.0
    fi = flicker_index(output, flow) if flow is not None else 0.0
    return MetricsReport(
        flicker_index=fi,
        psnr_to_target=psnr(output, target, peak),
        low_band_similarity=low_band_similarity(output, src_pattern, rho),
    )
