"""Attention feature containers shared by the recording and injection machinery.

Features are per-frame, per-layer, per-timestep (tokens, dim) matrices.  The
cache maps (layer, timestep, frame) keys to features recorded by the
reconstruction branch; entries are written once and treated as immutable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CacheKey = tuple[int, int, int]  # (layer, timestep, frame)


class InjectionError(KeyError):
    """A required cache entry is missing or would be written twice."""


@dataclass(frozen=True)
class AttentionFeatures:
    q: np.ndarray  # (N, D) float32
    k: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("q", "k", "v"):
            a = getattr(self, name)
            if a.ndim != 2:
                raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
            if a.shape != self.q.shape:
                raise ValueError(f"q/k/v shapes differ: {a.shape} vs {self.q.shape}")
            if a.dtype != np.float32:
                object.__setattr__(self, name, a.astype(np.float32))
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} contains non-finite values")

    @property
    def tokens(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]


class FeatureCache:
    """Write-once store of attention features keyed by (layer, timestep, frame)."""

    def __init__(self):
        self._entries: dict[CacheKey, AttentionFeatures] = {}

    def record(self, key: CacheKey, feats: AttentionFeatures) -> None:
        if key in self._entries:
            raise InjectionError(
                f"duplicate cache entry for (layer={key[0]}, t={key[1]}, frame={key[2]})"
            )
        self._entries[key] = feats

    def get(self, key: CacheKey) -> AttentionFeatures:
        try:
            return self._entries[key]
        except KeyError:
            raise InjectionError(
                f"missing cache entry for (layer={key[0]}, t={key[1]}, frame={key[2]})"
            ) from None

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def keys(self):
        return self._entries.keys()
