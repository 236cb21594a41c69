"""Frequency-domain blending of attention features.

A feature matrix is split into 1-D lanes (per token along the channel axis,
or per channel along the token axis), each lane is transformed with a
real-input half-spectrum DFT, and a hybrid spectrum is assembled: the low
bins (counted from DC) come from the source-guided generation branch, the
remaining high bins from the reconstruction branch.  The inverse transform
returns the blended lane.

Conventions: unnormalized forward transform, 1/L-normalized inverse
(numpy's rfft/irfft).  The low band holds ceil(rho * M) of the M = L//2+1
half-spectrum bins, so rho=1 is exactly all-source, rho=0 all-target, and
any rho > 0 keeps the DC bin from the source side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from videoswap.attention_types import AttentionFeatures


class SpectralError(ValueError):
    """Shape/config violation in a spectral operation."""


@dataclass(frozen=True)
class SpectralBlendConfig:
    rho: float = 0.8          # low-band fraction taken from the source branch
    axis: str = "channel"     # lane direction: "channel" or "token"

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise SpectralError(f"rho must lie in [0, 1], got {self.rho}")
        if self.axis not in ("channel", "token"):
            raise SpectralError(f"axis must be 'channel' or 'token', got {self.axis!r}")


def rdft(signal: np.ndarray) -> np.ndarray:
    """Forward DFT of a real vector, non-redundant half spectrum (L//2+1 bins)."""
    v = np.asarray(signal, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise SpectralError(f"expected a non-empty 1-d signal, got shape {v.shape}")
    return np.fft.rfft(v)


def irdft(spec: np.ndarray, length: int) -> np.ndarray:
    """Inverse of :func:`rdft` for a signal of the given length."""
    s = np.asarray(spec, dtype=np.complex128)
    if s.ndim != 1 or s.size != length // 2 + 1:
        raise SpectralError(
            f"half spectrum of length {s.size} does not match signal length {length}"
        )
    return np.fft.irfft(s, n=length)


def low_bin_count(rho: float, bins: int) -> int:
    """Number of low-band bins: ceil(rho * M), guarded against float fuzz."""
    n = math.ceil(rho * bins - 1e-9)
    return min(max(n, 0), bins)


def spectral_blend(a_src: np.ndarray, a_tar: np.ndarray, cfg: SpectralBlendConfig) -> np.ndarray:
    """Blend two equally shaped real arrays lane-by-lane in the frequency domain.

    Low bins come from ``a_src``, high bins from ``a_tar``.  Lanes run along
    the last axis for cfg.axis == "channel" and along the first axis for
    "token"; inputs may be 1-d or 2-d.
    """
    src = np.asarray(a_src)
    tar = np.asarray(a_tar)
    if src.shape != tar.shape:
        raise SpectralError(f"shape mismatch {src.shape} vs {tar.shape}")
    one_d = src.ndim == 1
    if one_d:
        src = src[None, :]
        tar = tar[None, :]
    if src.ndim != 2:
        raise SpectralError(f"expected 1-d or 2-d input, got shape {a_src.shape}")

    lanes_last = cfg.axis == "channel"
    if not lanes_last:
        src, tar = src.T, tar.T
    L = src.shape[-1]
    M = L // 2 + 1
    n_low = low_bin_count(cfg.rho, M)
    if n_low == M:
        out = src.astype(np.float32, copy=True)
    elif n_low == 0:
        out = tar.astype(np.float32, copy=True)
    else:
        spec = np.fft.rfft(tar.astype(np.float64), axis=-1)
        spec[..., :n_low] = np.fft.rfft(src.astype(np.float64), axis=-1)[..., :n_low]
        out = np.fft.irfft(spec, n=L, axis=-1).astype(np.float32)
    if not lanes_last:
        out = np.ascontiguousarray(out.T)
    return out[0] if one_d else out


def blend_features_qk(
    gen: AttentionFeatures, cached: AttentionFeatures, cfg: SpectralBlendConfig
) -> AttentionFeatures:
    """Blend q and k of the generation branch against cached features; v is kept."""
    if gen.q.shape != cached.q.shape:
        raise SpectralError(f"feature shape mismatch {gen.q.shape} vs {cached.q.shape}")
    return AttentionFeatures(
        q=spectral_blend(gen.q, cached.q, cfg),
        k=spectral_blend(gen.k, cached.k, cfg),
        v=gen.v,
    )
