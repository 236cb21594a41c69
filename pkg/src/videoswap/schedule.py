"""Noise schedules and the deterministic DDIM step coefficients.

A schedule holds the per-step beta/alpha/alpha-bar sequences (float64 for
cumulative-product accuracy).  The DDIM update from step t to t-1 is

    z_{t-1} = m_t * z_t + n_t * eps(z_t, t)

with m_t = 1/sqrt(alpha_t) and n_t = sqrt(1 - abar_{t-1}) - sqrt(1 - abar_t)/sqrt(alpha_t).

``final_alpha_bar`` is the alpha-bar value assigned to the virtual step 0.
The default 1.0 makes the last generative step emit the denoised
prediction with zero residual noise.  That step is then not invertible:
an exactly-conditioned denoiser collapses every trajectory to the same
endpoint, so inversion-based workflows must use a schedule whose step-0
value equals alpha-bar at the lowest visited step (see
``with_final_alpha_bar``), which turns the last step into the identity and
makes the whole chain exactly invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


class ScheduleError(ValueError):
    """Invalid schedule parameters or out-of-range timestep."""


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray        # (T,) float64, values in (0, 1)
    alpha: np.ndarray       # (T,) 1 - beta
    alpha_bar: np.ndarray   # (T,) cumulative product of alpha
    final_alpha_bar: float = 1.0  # alpha-bar convention for the virtual step 0

    def __post_init__(self):
        T = len(self.beta)
        if T < 1:
            raise ScheduleError("schedule needs at least one step")
        if not (np.all(self.beta > 0.0) and np.all(self.beta < 1.0)):
            raise ScheduleError("beta values must lie in (0, 1)")
        if np.any(np.diff(self.alpha_bar) >= 0.0):
            raise ScheduleError("alpha_bar must be strictly decreasing")
        if not (0.0 < self.final_alpha_bar <= 1.0):
            raise ScheduleError("final_alpha_bar must lie in (0, 1]")
        rel = np.abs(self.alpha_bar[1:] - self.alpha[1:] * self.alpha_bar[:-1])
        if np.any(rel > 1e-6 * np.abs(self.alpha_bar[1:])):
            raise ScheduleError("alpha_bar is not the cumulative product of alpha")

    @property
    def T(self) -> int:
        return len(self.beta)

    def abar(self, t: int) -> float:
        """alpha-bar at step t, with step 0 mapping to final_alpha_bar."""
        if t == 0:
            return self.final_alpha_bar
        if not 1 <= t <= self.T:
            raise ScheduleError(f"timestep {t} out of range 1..{self.T}")
        return float(self.alpha_bar[t - 1])

    def with_final_alpha_bar(self, value: float) -> "NoiseSchedule":
        return replace(self, final_alpha_bar=float(value))


def make_linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta schedule inclusive of both endpoints."""
    if T < 1:
        raise ScheduleError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})"
        )
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def coeffs_between(s: NoiseSchedule, t_hi: int, t_lo: int) -> tuple[float, float]:
    """DDIM (m, n) coefficients for the step from level t_hi down to t_lo.

    Levels are base-schedule timesteps; t_lo == 0 uses final_alpha_bar.
    This is the strided generalization of the consecutive-step pair.
    """
    if not 0 <= t_lo < t_hi <= s.T:
        raise ScheduleError(f"invalid level pair ({t_hi} -> {t_lo}) for T={s.T}")
    ab_hi = s.abar(t_hi)
    ab_lo = s.abar(t_lo)
    m = math.sqrt(ab_lo / ab_hi)
    n = math.sqrt(1.0 - ab_lo) - m * math.sqrt(1.0 - ab_hi)
    return m, n


def ddim_coeffs(s: NoiseSchedule, t: int) -> tuple[float, float]:
    """(m_t, n_t) for the consecutive step t -> t-1."""
    if not 1 <= t <= s.T:
        raise ScheduleError(f"timestep {t} out of range 1..{s.T}")
    return coeffs_between(s, t, t - 1)
