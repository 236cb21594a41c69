"""Analytically tractable noise predictors for verifying the sampling machinery.

The affine denoiser realizes the exact posterior noise for a point-mass
data distribution at a conditioned mean image mu:

    eps(z, t) = (z - sqrt(abar_t) * mu) / sqrt(1 - abar_t)

so the implied denoised prediction equals mu for every input, giving
closed-form oracles for DDIM sampling and inversion.  The attentive
denoiser adds a small single-head attention residual on the output side,

    eps = eps_affine + gamma * attention(z)

whose q/k features are what the recording and injection hooks observe and
rewrite.  Weights come from a seeded SplitMix64 stream so fixtures
reproduce everywhere without checkpoint files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from videoswap.attention import (
    NO_HOOKS,
    AttentionHooks,
    ProjectionWeights,
    attend,
    compute_qkv,
)
from videoswap.schedule import NoiseSchedule
from videoswap.tensor_core import Tensor4, TensorShapeError

ATTENTION_LAYER = 0  # single attention layer on the output side; kept in cache keys

# Softmax temperature of the toy's attention, as a multiple of the usual
# 1/sqrt(D).  The seeded projection weights are small (uniform in +-0.1), so
# at the plain scale every query attends almost uniformly and feature
# injection would be causally invisible; this sharpening makes the toy's
# attention selective at unit content scale while keeping it smooth.
ATTENTION_SHARPNESS = 48.0


class DenoiserError(ValueError):
    """Degenerate timestep or inconsistent shapes."""


@dataclass(frozen=True)
class Condition:
    """A conditioning label plus its mean image in latent space, shape (1, C, H, W)."""

    id: str
    mu: Tensor4

    def __post_init__(self):
        if self.mu.shape[0] != 1:
            raise TensorShapeError(f"condition mean must have B=1, got {self.mu.shape}")


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str = "attentive"   # "affine" or "attentive"
    gamma: float = 0.1        # attention-residual weight (attentive only)
    seed: int = 0             # weight-generation seed (attentive only)

    def __post_init__(self):
        if self.kind not in ("affine", "attentive"):
            raise DenoiserError(f"unknown denoiser kind {self.kind!r}")
        if self.gamma < 0.0:
            raise DenoiserError(f"gamma must be >= 0, got {self.gamma}")


def affine_eps(z: Tensor4, t: int, s: NoiseSchedule, cond: Condition) -> Tensor4:
    """Closed-form noise prediction pulling toward the conditioned mean."""
    abar = s.abar(t)
    if abar >= 1.0:
        raise DenoiserError(f"degenerate timestep {t}: alpha_bar is 1, eps undefined")
    mu = cond.mu.data
    if mu.shape[1:] != z.shape[1:]:
        raise TensorShapeError(f"condition shape {cond.mu.shape} does not match {z.shape}")
    c1 = np.float32(math.sqrt(abar))
    c2 = np.float32(1.0 / math.sqrt(1.0 - abar))
    return Tensor4((z.data - c1 * mu) * c2)


class AffineDenoiser:
    """Pure affine toy; ignores hooks (it has no attention layer)."""

    spec = DenoiserSpec(kind="affine")

    def epsilon(
        self, z: Tensor4, t: int, s: NoiseSchedule, cond: Condition,
        hooks: AttentionHooks = NO_HOOKS,
    ) -> Tensor4:
        return affine_eps(z, t, s, cond)


class AttentiveDenoiser:
    """Affine toy plus a seeded single-head attention residual.

    The residual is evaluated batch-wise so cross-frame hook policies see
    all frames of a window at one timestep.  Recording hooks never change
    the output; injection hooks rewrite q/k before attention.
    """

    def __init__(self, spec: DenoiserSpec):
        if spec.kind != "attentive":
            raise DenoiserError(f"AttentiveDenoiser needs kind 'attentive', got {spec.kind!r}")
        self.spec = spec
        self._weights: ProjectionWeights | None = None
        self._channels: int | None = None

    def weights_for(self, channels: int) -> ProjectionWeights:
        if self._weights is None:
            self._weights = ProjectionWeights.from_seed(self.spec.seed, channels, channels)
            self._channels = channels
        elif self._channels != channels:
            raise DenoiserError(
                f"denoiser was built for {self._channels} channels, got {channels}"
            )
        return self._weights

    def _features(self, z: Tensor4, t: int, hooks: AttentionHooks):
        b, c, _, _ = z.shape
        weights = self.weights_for(c)
        feats = [compute_qkv(z.data[i], weights) for i in range(b)]
        return hooks.process(ATTENTION_LAYER, t, feats)

    def attention_residual(
        self, z: Tensor4, t: int, hooks: AttentionHooks = NO_HOOKS
    ) -> Tensor4:
        _, c, h, w = z.shape
        scale = ATTENTION_SHARPNESS / math.sqrt(c)
        feats = self._features(z, t, hooks)
        maps = [attend(f, scale=scale).T.reshape(c, h, w) for f in feats]
        return Tensor4(np.stack(maps))

    def epsilon(
        self, z: Tensor4, t: int, s: NoiseSchedule, cond: Condition,
        hooks: AttentionHooks = NO_HOOKS,
    ) -> Tensor4:
        base = affine_eps(z, t, s, cond)
        if self.spec.gamma == 0.0:
            # residual off; still drive the hooks so recording stays consistent
            if hooks.mode != "none":
                self._features(z, t, hooks)
            return base
        residual = self.attention_residual(z, t, hooks)
        return Tensor4(base.data + np.float32(self.spec.gamma) * residual.data)


def make_denoiser(spec: DenoiserSpec):
    if spec.kind == "affine":
        return AffineDenoiser()
    return AttentiveDenoiser(spec)
