import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from videoswap.schedule import (
    NoiseSchedule,
    ScheduleError,
    coeffs_between,
    ddim_coeffs,
    make_linear_schedule,
)


def test_single_step_schedule():
    s = make_linear_schedule(1, 0.1, 0.1)
    assert s.T == 1
    assert np.allclose(s.alpha_bar, [0.9])


def test_thousand_step_alpha_bar_matches_loop_oracle():
    T, b0, b1 = 1000, 1e-4, 0.02
    s = make_linear_schedule(T, b0, b1)
    # independent oracle: explicit python loop over the same betas
    acc = 1.0
    for i in range(T):
        acc *= 1.0 - (b0 + (b1 - b0) * i / (T - 1))
    assert abs(s.alpha_bar[-1] - acc) <= 1e-6 * acc
    assert acc == pytest.approx(4.04e-5, rel=0.01)


@settings(max_examples=50, deadline=None)
@given(
    T=st.integers(min_value=1, max_value=200),
    b0=st.floats(min_value=1e-5, max_value=0.3),
    spread=st.floats(min_value=0.0, max_value=0.5),
)
def test_alpha_bar_strictly_decreasing(T, b0, spread):
    b1 = min(b0 + spread, 0.9)
    s = make_linear_schedule(T, b0, b1)
    assert np.all(np.diff(s.alpha_bar) < 0.0)
    assert np.all((s.alpha_bar > 0.0) & (s.alpha_bar <= 1.0))


def test_parameter_range_violations():
    with pytest.raises(ScheduleError):
        make_linear_schedule(0, 0.1, 0.2)
    with pytest.raises(ScheduleError):
        make_linear_schedule(10, 0.0, 0.2)
    with pytest.raises(ScheduleError):
        make_linear_schedule(10, 0.3, 0.2)
    with pytest.raises(ScheduleError):
        make_linear_schedule(10, 0.1, 1.0)


def two_step_schedule(ab0, ab1):
    """Build a 2-step schedule with prescribed alpha_bar values (ab0 > ab1)."""
    a1, a2 = ab0, ab1 / ab0
    beta = np.array([1.0 - a1, 1.0 - a2])
    alpha = 1.0 - beta
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=np.array([ab0, ab1]))


def test_identity_like_step_coefficients():
    # abar_{t-1} == abar_t means alpha_t == 1; realize with alpha_t -> 1 limit
    s = two_step_schedule(0.5, 0.5 * (1.0 - 1e-12))
    m, n = ddim_coeffs(s, 2)
    assert m == pytest.approx(1.0, abs=1e-9)
    assert n == pytest.approx(0.0, abs=1e-6)


def test_hand_computed_coefficients():
    s = two_step_schedule(0.5, 0.25)
    m, n = ddim_coeffs(s, 2)
    assert m == pytest.approx(math.sqrt(2.0), abs=1e-6)
    assert n == pytest.approx(math.sqrt(0.5) - math.sqrt(0.75) / math.sqrt(0.5), abs=1e-6)
    assert n == pytest.approx(-0.517638, abs=1e-6)


def test_t1_uses_final_alpha_bar_convention():
    s = make_linear_schedule(10, 0.05, 0.2)
    m, n = ddim_coeffs(s, 1)
    a1 = s.alpha[0]
    assert m == pytest.approx(1.0 / math.sqrt(a1))
    assert n == pytest.approx(-math.sqrt(1.0 - s.alpha_bar[0]) / math.sqrt(a1))


def test_invertible_tail_makes_last_step_identity():
    s = make_linear_schedule(10, 0.05, 0.2)
    s2 = s.with_final_alpha_bar(s.abar(1))
    m, n = ddim_coeffs(s2, 1)
    assert m == pytest.approx(1.0)
    assert n == pytest.approx(0.0, abs=1e-15)


def test_consistency_m_times_sqrt_abar():
    s = make_linear_schedule(100, 1e-3, 0.1)
    for t in range(2, s.T + 1):
        m, _ = ddim_coeffs(s, t)
        lhs = m * math.sqrt(s.abar(t))
        rhs = math.sqrt(s.abar(t - 1))
        assert abs(lhs - rhs) <= 1e-6 * rhs


def test_coeffs_between_matches_consecutive():
    s = make_linear_schedule(20, 0.01, 0.1)
    assert coeffs_between(s, 5, 4) == ddim_coeffs(s, 5)


def test_timestep_out_of_range():
    s = make_linear_schedule(5, 0.1, 0.2)
    with pytest.raises(ScheduleError):
        ddim_coeffs(s, 0)
    with pytest.raises(ScheduleError):
        ddim_coeffs(s, 6)
    with pytest.raises(ScheduleError):
        coeffs_between(s, 3, 3)


def test_coeffs_are_pure():
    s = make_linear_schedule(50, 1e-4, 0.02)
    assert ddim_coeffs(s, 17) == ddim_coeffs(s, 17)
