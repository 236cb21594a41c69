import math

import numpy as np
import pytest

from videoswap.attention import AttentionHooks, ReplacePolicy
from videoswap.attention_types import AttentionFeatures, FeatureCache
from videoswap.schedule import NoiseSchedule, make_linear_schedule
from videoswap.tensor_core import Tensor4
from videoswap.toy_denoiser import (
    AffineDenoiser,
    AttentiveDenoiser,
    Condition,
    DenoiserError,
    DenoiserSpec,
    affine_eps,
    make_denoiser,
)


def schedule_with_abar(values):
    values = np.asarray(values, dtype=np.float64)
    alpha = np.empty_like(values)
    alpha[0] = values[0]
    alpha[1:] = values[1:] / values[:-1]
    return NoiseSchedule(beta=1.0 - alpha, alpha=alpha, alpha_bar=values)


def rand_tensor(shape, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return Tensor4((scale * rng.standard_normal(shape)).astype(np.float32))


def cond_of(mu: Tensor4, label="c"):
    return Condition(id=label, mu=mu)


def test_on_manifold_point_gives_zero_eps():
    s = schedule_with_abar([0.5, 0.25])
    mu = rand_tensor((1, 3, 4, 4), seed=1)
    c1 = np.float32(math.sqrt(0.25))
    z = Tensor4(c1 * mu.data)
    eps = affine_eps(z, 2, s, cond_of(mu))
    assert not eps.data.any()


def test_zero_mean_scales_input():
    s = schedule_with_abar([0.5, 0.25])
    z = rand_tensor((2, 3, 4, 4), seed=2)
    mu = Tensor4.zeros((1, 3, 4, 4))
    eps = affine_eps(z, 2, s, cond_of(mu))
    assert eps.data == pytest.approx(z.data / math.sqrt(0.75), abs=1e-6)


def test_hand_computed_scalar_case():
    s = schedule_with_abar([0.5, 0.25])
    z = Tensor4.full((1, 2, 3, 3), 1.0)
    mu = Tensor4.full((1, 2, 3, 3), 1.0)
    eps = affine_eps(z, 2, s, cond_of(mu))
    assert eps.data == pytest.approx(0.57735, abs=1e-5)


def test_linearity_with_zero_mean():
    s = schedule_with_abar([0.5, 0.25])
    mu = Tensor4.zeros((1, 2, 4, 4))
    z = rand_tensor((1, 2, 4, 4), seed=3)
    a = 2.0  # power of two keeps the scaling exact in float32
    lhs = affine_eps(z.scale(a), 2, s, cond_of(mu))
    rhs = affine_eps(z, 2, s, cond_of(mu)).scale(a)
    assert np.array_equal(lhs.data, rhs.data)


def test_denoised_prediction_identity():
    s = make_linear_schedule(100, 1e-3, 0.05)
    mu = rand_tensor((1, 3, 5, 5), seed=4)
    c = cond_of(mu)
    for t in (1, 17, 50, 100):
        z = rand_tensor((2, 3, 5, 5), seed=t, scale=3.0)
        eps = affine_eps(z, t, s, c)
        abar = s.abar(t)
        z0_hat = (z.data - math.sqrt(1.0 - abar) * eps.data) / math.sqrt(abar)
        assert z0_hat == pytest.approx(np.broadcast_to(mu.data, z.shape), abs=1e-5)


def test_degenerate_timestep_rejected():
    s = make_linear_schedule(10, 0.01, 0.1)  # final_alpha_bar = 1.0
    z = rand_tensor((1, 2, 2, 2))
    with pytest.raises(DenoiserError, match="degenerate"):
        affine_eps(z, 0, s, cond_of(Tensor4.zeros((1, 2, 2, 2))))


def test_gamma_zero_matches_affine():
    s = make_linear_schedule(10, 0.01, 0.1)
    z = rand_tensor((2, 4, 4, 4), seed=5)
    c = cond_of(rand_tensor((1, 4, 4, 4), seed=6))
    att = AttentiveDenoiser(DenoiserSpec(kind="attentive", gamma=0.0, seed=9))
    aff = AffineDenoiser()
    assert np.array_equal(att.epsilon(z, 5, s, c).data, aff.epsilon(z, 5, s, c).data)


def test_attentive_deterministic():
    s = make_linear_schedule(10, 0.01, 0.1)
    z = rand_tensor((2, 4, 4, 4), seed=7)
    c = cond_of(rand_tensor((1, 4, 4, 4), seed=8))
    d1 = AttentiveDenoiser(DenoiserSpec(gamma=0.1, seed=11))
    d2 = AttentiveDenoiser(DenoiserSpec(gamma=0.1, seed=11))
    assert np.array_equal(d1.epsilon(z, 5, s, c).data, d2.epsilon(z, 5, s, c).data)


def test_recording_is_observation_only():
    s = make_linear_schedule(10, 0.01, 0.1)
    z = rand_tensor((3, 4, 4, 4), seed=9)
    c = cond_of(rand_tensor((1, 4, 4, 4), seed=10))
    d = AttentiveDenoiser(DenoiserSpec(gamma=0.1, seed=12))
    cache = FeatureCache()
    hooks = AttentionHooks.record(cache, frames=[0, 1, 2])
    with_hooks = d.epsilon(z, 5, s, c, hooks)
    without = d.epsilon(z, 5, s, c)
    assert np.array_equal(with_hooks.data, without.data)
    assert len(cache) == 3


def test_injection_changes_eps_when_features_differ():
    s = make_linear_schedule(10, 0.01, 0.1)
    z = rand_tensor((1, 4, 4, 4), seed=13)
    c = cond_of(rand_tensor((1, 4, 4, 4), seed=14))
    d = AttentiveDenoiser(DenoiserSpec(gamma=0.1, seed=15))
    no_hook = d.epsilon(z, 5, s, c)

    rng = np.random.default_rng(16)
    cache = FeatureCache()
    cache.record(
        (0, 5, 0),
        AttentionFeatures(
            q=rng.standard_normal((16, 4)).astype(np.float32),
            k=rng.standard_normal((16, 4)).astype(np.float32),
            v=rng.standard_normal((16, 4)).astype(np.float32),
        ),
    )
    hooks = AttentionHooks.inject(ReplacePolicy(), cache, frames=[0])
    injected = d.epsilon(z, 5, s, c, hooks)
    assert not np.array_equal(injected.data, no_hook.data)


def test_make_denoiser_and_spec_validation():
    assert isinstance(make_denoiser(DenoiserSpec(kind="affine")), AffineDenoiser)
    assert isinstance(make_denoiser(DenoiserSpec(kind="attentive")), AttentiveDenoiser)
    with pytest.raises(DenoiserError):
        DenoiserSpec(kind="unet")
    with pytest.raises(DenoiserError):
        DenoiserSpec(gamma=-0.5)
