"""Command-line interface: synth, invert, swap, metrics, sweep.

Exit code 0 on success; on failure a machine-readable JSON error object is
printed to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from videoswap.ddim_engine import InversionMode, invert
from videoswap.flow import FlowField
from videoswap.metrics import build_report
from videoswap.pipeline import PipelineConfig, swap_video
from videoswap.sweep import run_sweep, to_csv
from videoswap.synth import SyntheticSpec, synth_video
from videoswap.tensor_core import Tensor4, read_tensor, write_frame_pgm, write_tensor
from videoswap.toy_denoiser import Condition, make_denoiser


def _add_synth_args(p: argparse.ArgumentParser, for_sweep: bool = False):
    p.add_argument("--kind", default="translating_texture",
                   choices=["translating_texture", "moving_disk"])
    p.add_argument("--frames", type=int, default=12)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--vx", type=float, default=1.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--noise-std", type=float, default=0.05)
    if not for_sweep:
        p.add_argument("--seed", type=int, default=0)


def _spec_from_args(args, seed) -> SyntheticSpec:
    return SyntheticSpec(
        kind=args.kind, frames=args.frames, channels=args.channels,
        height=args.height, width=args.width, velocity=(args.vx, args.vy),
        noise_std=args.noise_std, seed=seed,
    )


def _add_config_args(p: argparse.ArgumentParser):
    # defaults are None so explicit flags can override a --config file
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--t1", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fsai-axis", default=None, choices=["channel", "token"])
    p.add_argument("--fats-chain", default=None, choices=["recursive", "original"])
    p.add_argument("--inversion-mode", default=None, choices=["approx", "exact"])
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--base-steps", type=int, default=None)
    p.add_argument("--beta-start", type=float, default=None)
    p.add_argument("--beta-end", type=float, default=None)
    p.add_argument("--flow-radius", type=int, default=None)
    p.add_argument("--flow-block", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON file with PipelineConfig fields")


def _config_from_args(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        cfg = PipelineConfig.from_dict(json.loads(Path(args.config).read_text()))
    overrides = {}
    for flag, field in [
        ("rho", "rho"), ("alpha", "alpha"), ("t1", "t1"), ("steps", "steps"),
        ("window", "window"), ("seed", "seed"), ("fsai_axis", "fsai_axis"),
        ("fats_chain", "fats_chain"), ("gamma", "gamma"),
        ("base_steps", "base_steps"), ("beta_start", "beta_start"),
        ("beta_end", "beta_end"), ("flow_radius", "flow_radius"),
        ("flow_block", "flow_block"),
    ]:
        val = getattr(args, flag)
        if val is not None:
            overrides[field] = val
    if args.inversion_mode is not None:
        overrides["inversion"] = InversionMode(mode=args.inversion_mode)
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _load_flows(arg: str | None) -> FlowField | None:
    """--flow block (estimate) or file:<path> (read a (B-1,2,H,W) TNSR)."""
    if arg is None or arg == "block":
        return None
    if arg.startswith("file:"):
        return FlowField(read_tensor(arg[len("file:"):]))
    raise ValueError(f"--flow must be 'block' or 'file:<path>', got {arg!r}")


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = _spec_from_args(args, args.seed)
    video, flow, cond_tar, cond_src = synth_video(spec)
    write_tensor(out / "video.tnsr", video)
    if flow is not None:
        write_tensor(out / "flow.tnsr", flow.flows)
    write_tensor(out / "cond_tar.tnsr", cond_tar.mu)
    write_tensor(out / "cond_src.tnsr", cond_src.mu)
    for i in range(video.shape[0]):
        write_frame_pgm(out / f"frame_{i:03d}.pgm", video, i, 0)
    print(json.dumps({"written": str(out), "frames": video.shape[0],
                      "shape": list(video.shape)}))
    return 0


def cmd_invert(args) -> int:
    z0 = read_tensor(args.input)
    cond = Condition(id="cli", mu=read_tensor(args.cond))
    cfg = _config_from_args(args)
    mode = cfg.inversion
    if args.tol is not None or args.max_iter is not None:
        mode = InversionMode(
            mode=mode.mode,
            tol=args.tol if args.tol is not None else mode.tol,
            max_iter=args.max_iter if args.max_iter is not None else mode.max_iter,
        )
    s = cfg.build_schedule()
    d = make_denoiser(cfg.denoiser_spec())
    traj = invert(d, z0, cond, s, cfg.visited_steps(), mode)
    write_tensor(args.out, traj.final)
    print(json.dumps({"written": args.out, "mode": mode.mode,
                      "steps": cfg.steps}))
    return 0


def cmd_swap(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = read_tensor(args.target)
    cond_src = Condition(id="source", mu=read_tensor(args.source_cond))
    cond_tar = Condition(id="target", mu=read_tensor(args.target_cond))
    cfg = _config_from_args(args)
    flows = _load_flows(args.flow)
    result = swap_video(target, cond_src, cond_tar, cfg, flows=flows)
    write_tensor(out / "output.tnsr", result.output)
    for i in range(result.output.shape[0]):
        write_frame_pgm(out / f"swap_{i:03d}.pgm", result.output, i, 0)
    report = {
        "metrics": result.metrics.to_dict(),
        "config": cfg.to_dict(),
        "diagnostics": result.diagnostics["windows"],
    }
    (out / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps({"written": str(out), **result.metrics.to_dict()}))
    return 0


def cmd_metrics(args) -> int:
    video = read_tensor(args.video)
    target = read_tensor(args.target)
    src = read_tensor(args.source_cond)
    flow = FlowField(read_tensor(args.flow)) if args.flow else None
    rep = build_report(video, target, src, flow, rho=args.rho)
    text = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
    print(text)
    return 0


def _grid(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v != ""]


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    spec = _spec_from_args(args, args.fixture_seed)
    rows = run_sweep(
        _grid(args.rho_grid), _grid(args.alpha_grid),
        [int(v) for v in _grid(args.t1_grid)], cfg, spec,
    )
    csv_text = to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    sys.stdout.write(csv_text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="videoswap",
        description="Training-free video face swapping mechanisms on toy denoisers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic video fixture")
    p.add_argument("--out", required=True)
    _add_synth_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("invert", help="DDIM-invert a latent video to noise")
    p.add_argument("--input", required=True, help="TNSR with the frames to invert")
    p.add_argument("--cond", required=True, help="TNSR with the (1,C,H,W) condition mean")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", dest="inversion_mode", default=None,
                   choices=["approx", "exact"])
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    _add_config_args(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("swap", help="run the full dual-branch swap pipeline")
    p.add_argument("--target", required=True, help="TNSR with the target frames")
    p.add_argument("--source-cond", required=True)
    p.add_argument("--target-cond", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--flow", default=None,
                   help="'block' (estimate, default) or 'file:<path>'")
    _add_config_args(p)
    p.set_defaults(func=cmd_swap)

    p = sub.add_parser("metrics", help="compute the proxy metric report")
    p.add_argument("--video", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--source-cond", required=True)
    p.add_argument("--flow", default=None)
    p.add_argument("--rho", type=float, default=0.8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", help="grid-sweep rho/alpha/t1 and emit CSV")
    p.add_argument("--rho-grid", required=True)
    p.add_argument("--alpha-grid", required=True)
    p.add_argument("--t1-grid", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--fixture-seed", type=int, default=0)
    _add_synth_args(p, for_sweep=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
