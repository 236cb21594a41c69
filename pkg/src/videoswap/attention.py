"""Single-head spatial attention over latent tokens, with recording and injection.

A (C, H, W) latent slice is flattened to N = H*W tokens of C channels and
projected to q/k/v with seeded weights.  The reconstruction branch records
q/k/v per (layer, timestep, frame); the generation branch replaces or
blends its q/k with the cached ones.  Values (v) are never replaced.

Hook processing happens batch-wise per timestep so that cross-frame
policies (flow-guided smoothing) can see the whole frame window at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from videoswap.attention_types import AttentionFeatures, CacheKey, FeatureCache, InjectionError
from videoswap.flow import TemporalSmoothConfig, smooth_sequence
from videoswap.spectral import SpectralBlendConfig, blend_features_qk

MASK = 0xFFFFFFFFFFFFFFFF


def splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """Deterministic 64-bit stream (SplitMix64), platform-independent."""
    out = np.empty(count, dtype=np.uint64)
    x = seed & MASK
    for i in range(count):
        x = (x + 0x9E3779B97F4A7C15) & MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out[i] = (z ^ (z >> 31)) & MASK
    return out


def seeded_uniform(seed: int, count: int, lo: float = -0.1, hi: float = 0.1) -> np.ndarray:
    """Map the SplitMix64 stream to float32 uniforms in [lo, hi)."""
    bits = splitmix64_stream(seed, count)
    u01 = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return (lo + (hi - lo) * u01).astype(np.float32)


@dataclass(frozen=True)
class ProjectionWeights:
    """q/k/v projection matrices, each (C_in, D)."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray

    @staticmethod
    def from_seed(seed: int, c_in: int, dim: int) -> "ProjectionWeights":
        flat = seeded_uniform(seed, 3 * c_in * dim)
        wq, wk, wv = flat.reshape(3, c_in, dim)
        return ProjectionWeights(wq=wq.copy(), wk=wk.copy(), wv=wv.copy())

    @staticmethod
    def identity(c_in: int) -> "ProjectionWeights":
        eye = np.eye(c_in, dtype=np.float32)
        return ProjectionWeights(wq=eye, wk=eye.copy(), wv=eye.copy())


def compute_qkv(z_slice: np.ndarray, weights: ProjectionWeights) -> AttentionFeatures:
    """Project a (C, H, W) slice to q/k/v over its N = H*W tokens."""
    z_slice = np.asarray(z_slice, dtype=np.float32)
    if z_slice.ndim != 3:
        raise ValueError(f"expected a (C, H, W) slice, got shape {z_slice.shape}")
    c = z_slice.shape[0]
    if weights.wq.shape[0] != c:
        raise ValueError(
            f"projection expects {weights.wq.shape[0]} input channels, slice has {c}"
        )
    tokens = z_slice.reshape(c, -1).T  # (N, C)
    return AttentionFeatures(q=tokens @ weights.wq, k=tokens @ weights.wk, v=tokens @ weights.wv)


def attend(f: AttentionFeatures, scale: float | None = None) -> np.ndarray:
    """Row-wise softmax(scale * q k^T) v.  Default scale is 1/sqrt(D)."""
    if scale is None:
        scale = 1.0 / np.sqrt(f.dim)
    logits = np.float32(scale) * (f.q @ f.k.T)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits, out=logits)
    p /= p.sum(axis=1, keepdims=True)
    return (p @ f.v).astype(np.float32)


def replace_qk(gen: AttentionFeatures, cache: FeatureCache, key: CacheKey) -> AttentionFeatures:
    """Take q and k verbatim from the cache; keep the generation branch's v."""
    cached = cache.get(key)
    if cached.dim != gen.dim:
        raise InjectionError(
            f"cached dim {cached.dim} does not match generation dim {gen.dim} at {key}"
        )
    return AttentionFeatures(q=cached.q, k=cached.k, v=gen.v)


# --- hook plumbing -----------------------------------------------------------

class InjectionPolicy:
    """Transforms a window of per-frame features at one (layer, timestep)."""

    def apply(self, layer, t, frames, feats, cache):
        raise NotImplementedError


@dataclass(frozen=True)
class ReplacePolicy(InjectionPolicy):
    """Full q/k replacement from the cache."""

    def apply(self, layer, t, frames, feats, cache):
        return [
            replace_qk(f, cache, (layer, t, frame)) for frame, f in zip(frames, feats)
        ]


@dataclass(frozen=True)
class SpectralPolicy(InjectionPolicy):
    """Frequency-domain q/k blending against the cache."""

    cfg: SpectralBlendConfig

    def apply(self, layer, t, frames, feats, cache):
        return [
            blend_features_qk(f, cache.get((layer, t, frame)), self.cfg)
            for frame, f in zip(frames, feats)
        ]


@dataclass
class SpectralFlowPolicy(InjectionPolicy):
    """Spectral q/k blending followed by cross-frame flow-guided smoothing.

    Smoothing runs only at timesteps in ``active_steps`` (the first T1
    denoising steps).  ``seed_in`` optionally provides the aligned (q, k) of
    the frame preceding the window (sliding-window overlap); the aligned
    (q, k) of the window's last frame is collected into ``seed_out`` so the
    next window can continue the chain.
    """

    cfg: SpectralBlendConfig
    smooth: TemporalSmoothConfig
    flows: np.ndarray            # (B-1, 2, H, W); ignored for single-frame windows
    spatial: tuple[int, int]     # (H, W) token layout
    active_steps: frozenset[int] = frozenset()
    seed_in: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    seed_out: dict[int, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def _to_maps(self, mats: list[np.ndarray]) -> np.ndarray:
        h, w = self.spatial
        d = mats[0].shape[1]
        return np.stack([m.T.reshape(d, h, w) for m in mats])

    def _to_mats(self, maps: np.ndarray) -> list[np.ndarray]:
        b, d, h, w = maps.shape
        return [maps[i].reshape(d, h * w).T.copy() for i in range(b)]

    def apply(self, layer, t, frames, feats, cache):
        blended = [
            blend_features_qk(f, cache.get((layer, t, frame)), self.cfg)
            for frame, f in zip(frames, feats)
        ]
        if t not in self.active_steps or self.smooth.alpha == 1.0:
            return blended
        h, w = self.spatial
        q_maps = self._to_maps([f.q for f in blended])
        k_maps = self._to_maps([f.k for f in blended])
        seed = self.seed_in.get(t)
        if seed is not None:
            q_maps[0] = seed[0].T.reshape(-1, h, w)
            k_maps[0] = seed[1].T.reshape(-1, h, w)
        if len(blended) > 1:
            q_maps = smooth_sequence(q_maps, self.flows, self.smooth)
            k_maps = smooth_sequence(k_maps, self.flows, self.smooth)
        q_out = self._to_mats(q_maps)
        k_out = self._to_mats(k_maps)
        self.seed_out[t] = (q_out[-1], k_out[-1])
        return [
            AttentionFeatures(q=qq, k=kk, v=f.v)
            for qq, kk, f in zip(q_out, k_out, blended)
        ]


@dataclass(frozen=True)
class AttentionHooks:
    """Observation/injection hooks threaded through a denoiser's attention layer.

    mode "none" leaves features untouched, "record" stores them in the cache
    (observation only), "inject" rewrites q/k per the policy.  ``frames``
    gives the global frame index of each batch entry.
    """

    mode: str = "none"
    cache: FeatureCache | None = None
    frames: tuple[int, ...] = ()
    policy: InjectionPolicy | None = None

    @staticmethod
    def none() -> "AttentionHooks":
        return AttentionHooks()

    @staticmethod
    def record(cache: FeatureCache, frames) -> "AttentionHooks":
        return AttentionHooks(mode="record", cache=cache, frames=tuple(frames))

    @staticmethod
    def inject(policy: InjectionPolicy, cache: FeatureCache, frames) -> "AttentionHooks":
        return AttentionHooks(mode="inject", cache=cache, frames=tuple(frames), policy=policy)

    def process(self, layer: int, t: int, feats: list[AttentionFeatures]) -> list[AttentionFeatures]:
        if self.mode == "none":
            return feats
        if len(self.frames) != len(feats):
            raise InjectionError(
                f"hooks carry {len(self.frames)} frame ids but got {len(feats)} feature sets"
            )
        if self.mode == "record":
            for frame, f in zip(self.frames, feats):
                self.cache.record((layer, t, frame), f)
            return feats
        if self.mode == "inject":
            return self.policy.apply(layer, t, self.frames, feats, self.cache)
        raise InjectionError(f"unknown hook mode {self.mode!r}")


NO_HOOKS = AttentionHooks.none()
