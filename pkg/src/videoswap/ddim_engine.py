"""Deterministic DDIM sampling and inversion.

Sampling walks a strictly decreasing list of visited base-schedule
timesteps and applies z <- m z + n eps between consecutive visited levels,
ending with a step to the virtual level 0 (whose alpha-bar is the
schedule's ``final_alpha_bar``).

Inversion runs the same pairs in reverse.  The approximate mode uses the
local-linearity substitution eps(z_t, t) ~= eps(z_{t-1}, t), which makes
the inverse update explicit.  The exact mode solves the implicit equation
z = (z_prev - n eps(z, t)) / m by fixed-point iteration from the
approximate initializer and verifies that re-applying the forward step
reproduces z_prev.  With final_alpha_bar = 1 the last generative step
discards all deviation from the denoised prediction, so that pair has no
exact inverse; inversion-based workflows use a schedule whose
final_alpha_bar equals alpha-bar at the lowest visited step, which turns
the pair into the identity (see schedule.with_final_alpha_bar).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from videoswap.attention import NO_HOOKS, AttentionHooks
from videoswap.schedule import NoiseSchedule, ScheduleError, coeffs_between
from videoswap.tensor_core import Tensor4, TensorShapeError
from videoswap.toy_denoiser import Condition


class EngineError(RuntimeError):
    """Denoiser failure wrapped with the offending timestep."""

    def __init__(self, message: str, timestep: int):
        super().__init__(message)
        self.timestep = timestep


class ConvergenceError(EngineError):
    """Exact inversion failed to converge; carries the last residual."""

    def __init__(self, message: str, timestep: int, residual: float):
        super().__init__(message, timestep)
        self.residual = residual


@dataclass(frozen=True)
class InversionMode:
    mode: str = "approx"   # "approx" (explicit update) or "exact" (fixed-point solve)
    tol: float = 1e-6      # exact only: max-norm gap between successive iterates
    max_iter: int = 50     # exact only

    def __post_init__(self):
        if self.mode not in ("approx", "exact"):
            raise ValueError(f"mode must be 'approx' or 'exact', got {self.mode!r}")
        if self.tol <= 0.0 or self.max_iter < 1:
            raise ValueError("tol and max_iter must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Latents at every visited level plus the terminal one.

    For sampling: latents[0] is z_T, latents[-1] is z_0, timesteps is the
    decreasing visited list.  For inversion: latents[0] is z_0, latents[-1]
    the inverted noise, timesteps increasing.
    """

    latents: tuple[Tensor4, ...]
    timesteps: tuple[int, ...]

    def __post_init__(self):
        if len(self.latents) != len(self.timesteps) + 1:
            raise ValueError("trajectory must hold one latent per visited step plus the endpoint")
        shapes = {t.shape for t in self.latents}
        if len(shapes) != 1:
            raise ValueError(f"trajectory latents must share one shape, got {shapes}")

    @property
    def initial(self) -> Tensor4:
        return self.latents[0]

    @property
    def final(self) -> Tensor4:
        return self.latents[-1]


def _check_steps(steps, T: int, decreasing: bool) -> list[int]:
    steps = [int(t) for t in steps]
    if not steps:
        raise ScheduleError("visited step list is empty")
    if any(not 1 <= t <= T for t in steps):
        raise ScheduleError(f"visited steps must lie in 1..{T}, got {steps}")
    diffs = np.diff(steps)
    if decreasing and not np.all(diffs < 0):
        raise ScheduleError("sampling steps must be strictly decreasing")
    if not decreasing and not np.all(diffs > 0):
        raise ScheduleError("inversion steps must be strictly increasing")
    return steps


def default_visited_steps(T: int, count: int) -> list[int]:
    """Uniformly spaced visited timesteps over 1..T, ascending, endpoints included."""
    if not 1 <= count <= T:
        raise ScheduleError(f"step count {count} out of range 1..{T}")
    raw = np.unique(np.rint(np.linspace(1, T, count)).astype(int))
    return [int(t) for t in raw]


def _eps(d, z: Tensor4, t: int, s, cond, hooks) -> Tensor4:
    try:
        return d.epsilon(z, t, s, cond, hooks)
    except Exception as e:
        raise EngineError(f"denoiser failed at timestep {t}: {e}", timestep=t) from e


def ddim_step_between(
    z: Tensor4, eps: Tensor4, s: NoiseSchedule, t_hi: int, t_lo: int
) -> Tensor4:
    if z.shape != eps.shape:
        raise TensorShapeError(f"latent/eps shape mismatch {z.shape} vs {eps.shape}")
    m, n = coeffs_between(s, t_hi, t_lo)
    return Tensor4(np.float32(m) * z.data + np.float32(n) * eps.data)


def ddim_step(z_t: Tensor4, eps: Tensor4, s: NoiseSchedule, t: int) -> Tensor4:
    """One generative step t -> t-1: m_t z_t + n_t eps."""
    return ddim_step_between(z_t, eps, s, t, t - 1)


def sample(
    d, z_T: Tensor4, cond: Condition, s: NoiseSchedule, steps,
    hooks: AttentionHooks = NO_HOOKS,
) -> Trajectory:
    """Denoise from z_T through the visited steps down to z_0."""
    steps = _check_steps(steps, s.T, decreasing=True)
    levels = steps + [0]
    z = z_T
    latents = [z]
    for hi, lo in zip(levels[:-1], levels[1:]):
        eps = _eps(d, z, hi, s, cond, hooks)
        z = ddim_step_between(z, eps, s, hi, lo)
        latents.append(z)
    return Trajectory(latents=tuple(latents), timesteps=tuple(steps))


def invert_step_between(
    z_prev: Tensor4, d, cond: Condition, s: NoiseSchedule,
    t_hi: int, t_lo: int, mode: InversionMode,
    hooks: AttentionHooks = NO_HOOKS,
) -> Tensor4:
    """Invert the generative pair t_hi -> t_lo, recovering z at level t_hi."""
    m, n = coeffs_between(s, t_hi, t_lo)
    mf, nf = np.float32(m), np.float32(n)

    z = Tensor4(
        (z_prev.data - nf * _eps(d, z_prev, t_hi, s, cond, hooks).data) / mf
    )  # local-linearity update: eps evaluated at z_prev
    if mode.mode == "approx":
        return z

    # fixed-point refinement; the iterate is carried in float64 so the
    # stopping tolerance is not limited by float32 spacing
    prev64 = z_prev.data.astype(np.float64)
    acc = z.data.astype(np.float64)
    gap = np.inf
    for _ in range(mode.max_iter):
        eps = _eps(d, Tensor4(acc.astype(np.float32)), t_hi, s, cond, hooks)
        nxt = (prev64 - n * eps.data.astype(np.float64)) / m
        gap = float(np.max(np.abs(nxt - acc)))
        acc = nxt
        if gap < mode.tol:
            break
    else:
        raise ConvergenceError(
            f"exact inversion did not converge at timestep {t_hi} "
            f"(last iterate gap {gap:.3e} > tol {mode.tol:.1e})",
            timestep=t_hi, residual=gap,
        )
    z = Tensor4(acc.astype(np.float32))
    # verify the forward re-application in float64 so the bound reflects the
    # quality of the solve rather than float32 rounding of the step itself
    eps = _eps(d, z, t_hi, s, cond, hooks)
    back = m * acc + n * eps.data.astype(np.float64)
    residual = float(np.max(np.abs(back - z_prev.data.astype(np.float64))))
    if residual > 10.0 * mode.tol:
        raise ConvergenceError(
            f"exact inversion at timestep {t_hi} fails forward re-application "
            f"(residual {residual:.3e} > {10.0 * mode.tol:.1e})",
            timestep=t_hi, residual=residual,
        )
    return z


def invert_step(
    z_prev: Tensor4, d, cond: Condition, s: NoiseSchedule, t: int, mode: InversionMode,
    hooks: AttentionHooks = NO_HOOKS,
) -> Tensor4:
    """Invert the consecutive generative step t -> t-1."""
    return invert_step_between(z_prev, d, cond, s, t, t - 1, mode, hooks)


def invert(
    d, z_0: Tensor4, cond: Condition, s: NoiseSchedule, steps,
    mode: InversionMode = InversionMode(),
    hooks: AttentionHooks = NO_HOOKS,
) -> Trajectory:
    """Run the visited steps in reverse, from z_0 up to the inverted noise."""
    steps = _check_steps(steps, s.T, decreasing=False)
    levels = [0] + steps
    z = z_0
    latents = [z]
    for lo, hi in zip(levels[:-1], levels[1:]):
        z = invert_step_between(z, d, cond, s, hi, lo, mode, hooks)
        latents.append(z)
    return Trajectory(latents=tuple(latents), timesteps=tuple(steps))
