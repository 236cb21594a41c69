"""Dual-branch swap orchestration over sliding frame windows.

Per window: the target frames are DDIM-inverted under the target
condition; a reconstruction pass re-denoises the inverted latents with
recording hooks, filling the feature cache; a generation pass denoises the
same inverted latents under the source condition with injection hooks that
blend its q/k against the cache in the frequency domain and, during the
first t1 steps, smooth the blended features along the estimated flow
across the frame axis.  Windows overlap by exactly one frame: the
overlapped frame's output belongs to the earlier window and its aligned
features seed the later window's smoothing chain.

The pipeline's schedule uses the invertible-tail convention (alpha-bar at
the virtual step 0 equals alpha-bar at the lowest visited step) so that
inversion followed by sampling is an exact round trip; with the default
convention the last generative step would discard everything but the
denoised prediction and reconstruction could not recover the targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from videoswap.attention import AttentionHooks, SpectralFlowPolicy
from videoswap.attention_types import FeatureCache
from videoswap.ddim_engine import (
    InversionMode,
    default_visited_steps,
    ddim_step_between,
    invert,
    sample,
)
from videoswap.flow import FlowField, TemporalSmoothConfig, block_matching_flow
from videoswap.metrics import MetricsReport, build_report
from videoswap.schedule import NoiseSchedule, make_linear_schedule
from videoswap.spectral import SpectralBlendConfig
from videoswap.tensor_core import Tensor4, TensorShapeError
from videoswap.toy_denoiser import Condition, DenoiserSpec, make_denoiser


class PipelineError(ValueError):
    """Invalid pipeline configuration or inputs."""


@dataclass(frozen=True)
class PipelineConfig:
    steps: int = 50          # number of visited DDIM timesteps
    rho: float = 0.8         # low-band fraction taken from the generation branch
    alpha: float = 0.8       # temporal blend weight (1 disables smoothing)
    t1: int = 10             # leading denoising steps that smooth across frames
    window: int = 6          # frames per sliding-window batch
    inversion: InversionMode = InversionMode(mode="approx")
    seed: int = 0
    fsai_axis: str = "channel"
    fats_chain: str = "recursive"
    # schedule and toy-denoiser knobs
    base_steps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    gamma: float = 0.1       # attention-residual weight
    flow_radius: int = 3
    flow_block: int = 5

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0 or not 0.0 <= self.alpha <= 1.0:
            raise PipelineError("rho and alpha must lie in [0, 1]")
        if self.steps < 1 or self.t1 < 0 or self.t1 > self.steps:
            raise PipelineError("need 1 <= steps and 0 <= t1 <= steps")
        if self.window < 1:
            raise PipelineError("window must be >= 1")

    def visited_steps(self) -> list[int]:
        """Ascending visited timesteps over the base schedule."""
        return default_visited_steps(self.base_steps, self.steps)

    def build_schedule(self) -> NoiseSchedule:
        base = make_linear_schedule(self.base_steps, self.beta_start, self.beta_end)
        return base.with_final_alpha_bar(base.abar(self.visited_steps()[0]))

    def smoothing_steps(self) -> frozenset[int]:
        """The first t1 visited timesteps counted from the start of denoising."""
        desc = list(reversed(self.visited_steps()))
        return frozenset(desc[: self.t1])

    def spectral_config(self) -> SpectralBlendConfig:
        return SpectralBlendConfig(rho=self.rho, axis=self.fsai_axis)

    def smooth_config(self) -> TemporalSmoothConfig:
        return TemporalSmoothConfig(alpha=self.alpha, t1=self.t1, chain=self.fats_chain)

    def denoiser_spec(self) -> DenoiserSpec:
        return DenoiserSpec(kind="attentive", gamma=self.gamma, seed=self.seed)

    def to_dict(self) -> dict:
        d = {
            "steps": self.steps, "rho": self.rho, "alpha": self.alpha, "t1": self.t1,
            "window": self.window, "seed": self.seed,
            "inversion": {"mode": self.inversion.mode, "tol": self.inversion.tol,
                          "max_iter": self.inversion.max_iter},
            "fsai_axis": self.fsai_axis, "fats_chain": self.fats_chain,
            "base_steps": self.base_steps, "beta_start": self.beta_start,
            "beta_end": self.beta_end, "gamma": self.gamma,
            "flow_radius": self.flow_radius, "flow_block": self.flow_block,
        }
        return d

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        d = dict(d)
        inv = d.pop("inversion", None)
        cfg = PipelineConfig(**d)
        if inv is not None:
            if isinstance(inv, str):
                inv = {"mode": inv}
            cfg = replace(cfg, inversion=InversionMode(**inv))
        return cfg


@dataclass(frozen=True)
class SwapResult:
    output: Tensor4
    metrics: MetricsReport
    diagnostics: dict = field(default_factory=dict)


def window_plan(n: int, window: int) -> list[tuple[int, int]]:
    """Half-open frame ranges; consecutive windows share exactly one frame."""
    if n < 1:
        raise PipelineError(f"need at least one frame, got {n}")
    if n <= window:
        return [(0, n)]
    if window < 2:
        raise PipelineError("window must be >= 2 when the video spans multiple windows")
    plan = [(0, window)]
    while plan[-1][1] < n:
        start = plan[-1][1] - 1
        plan.append((start, min(start + window, n)))
    return plan


def reconstruction_branch(d, inverted: Tensor4, cond_tar: Condition, s: NoiseSchedule,
                          steps_desc: list[int], frames) -> tuple[FeatureCache, Tensor4]:
    """Re-denoise the inverted latents, recording q/k/v at every step and frame."""
    cache = FeatureCache()
    hooks = AttentionHooks.record(cache, frames)
    traj = sample(d, inverted, cond_tar, s, steps_desc, hooks)
    return cache, traj.final


def generation_branch(d, inverted: Tensor4, cond_src: Condition, cache: FeatureCache,
                      flows_w: np.ndarray, s: NoiseSchedule, cfg: PipelineConfig,
                      steps_desc: list[int], frames,
                      seed_in: dict | None = None) -> tuple[Tensor4, dict]:
    """Denoise under the source condition with spectral blending and smoothing.

    Returns the generated window and the aligned last-frame features per
    smoothing step, for seeding the next window's chain.
    """
    h, w = inverted.shape[2], inverted.shape[3]
    policy = SpectralFlowPolicy(
        cfg=cfg.spectral_config(),
        smooth=cfg.smooth_config(),
        flows=flows_w,
        spatial=(h, w),
        active_steps=cfg.smoothing_steps(),
        seed_in=seed_in or {},
    )
    hooks = AttentionHooks.inject(policy, cache, frames)
    traj = sample(d, inverted, cond_src, s, steps_desc, hooks)
    return traj.final, policy.seed_out


def _window_flows(target: Tensor4, start: int, stop: int, cfg: PipelineConfig,
                  provided: FlowField | None) -> np.ndarray:
    if stop - start < 2:
        return np.zeros((0, 2, target.shape[2], target.shape[3]), dtype=np.float32)
    if provided is not None:
        return provided.flows.data[start:stop - 1]
    return np.stack([
        block_matching_flow(target.data[i], target.data[i + 1],
                            cfg.flow_radius, cfg.flow_block)
        for i in range(start, stop - 1)
    ])


def swap_video(target: Tensor4, cond_src: Condition, cond_tar: Condition,
               cfg: PipelineConfig = PipelineConfig(),
               flows: FlowField | None = None) -> SwapResult:
    """Swap the source appearance onto a target video, window by window."""
    n = target.shape[0]
    if cond_src.mu.shape[1:] != target.shape[1:] or cond_tar.mu.shape[1:] != target.shape[1:]:
        raise TensorShapeError("conditions must match the target's (C, H, W)")
    if flows is not None and flows.pairs != n - 1:
        raise PipelineError(f"flow field has {flows.pairs} pairs, need {n - 1}")

    s = cfg.build_schedule()
    visited = cfg.visited_steps()
    steps_desc = list(reversed(visited))
    d = make_denoiser(cfg.denoiser_spec())
    plan = window_plan(n, cfg.window)

    outputs = []
    window_diags = []
    flow_parts = []
    carry: dict = {}
    for start, stop in plan:
        frames = range(start, stop)
        wtarget = Tensor4(target.data[start:stop].copy())
        inv = invert(d, wtarget, cond_tar, s, visited, cfg.inversion)
        flows_w = _window_flows(target, start, stop, cfg, flows)
        cache, recon = reconstruction_branch(d, inv.final, cond_tar, s, steps_desc, frames)
        gen, carry = generation_branch(
            d, inv.final, cond_src, cache, flows_w, s, cfg, steps_desc, frames, carry
        )
        keep = gen.data if start == 0 else gen.data[1:]
        outputs.append(keep)
        flow_parts.append(flows_w)
        # diagnostics: re-apply the top inversion step and record its residual
        top, below = visited[-1], (visited[-2] if len(visited) > 1 else 0)
        eps_top = d.epsilon(inv.final, top, s, cond_tar)
        redone = ddim_step_between(inv.final, eps_top, s, top, below)
        prev_latent = inv.latents[-2]
        window_diags.append({
            "window": [start, stop],
            "inversion_residual": float(redone.max_abs_diff(prev_latent)),
            "recorded_features": len(cache),
            "recon_vs_target_max_err": float(recon.max_abs_diff(wtarget)),
            "smoothing_steps": sorted(cfg.smoothing_steps(), reverse=True),
        })

    output = Tensor4(np.concatenate(outputs, axis=0))
    assert output.shape[0] == n

    metric_flow = flows
    if metric_flow is None and n > 1:
        metric_flow = FlowField(Tensor4(np.concatenate(flow_parts, axis=0)))
    # the similarity band is a metric parameter, kept at the standard split
    # (not the run's rho) so reports from different rho runs are comparable
    metrics = build_report(output, target, cond_src.mu, metric_flow, rho=0.8)
    diagnostics = {"windows": window_diags, "config": cfg.to_dict()}
    return SwapResult(output=output, metrics=metrics, diagnostics=diagnostics)
