"""Hyperparameter sweeps over the swap pipeline, reported as CSV.

One row per (rho, alpha, t1) combination, ordered rho-outer, alpha-middle,
t1-inner.  A failing cell is recorded with status "failed" and empty metric
fields; the sweep continues.  Cells are independent, so permuting the grids
permutes rows without changing any value.
"""

from __future__ import annotations

import io
from dataclasses import replace

from videoswap.pipeline import PipelineConfig, swap_video
from videoswap.synth import SyntheticSpec, synth_video

CSV_FIELDS = ["rho", "alpha", "t1", "status",
              "flicker_index", "psnr_to_target", "low_band_similarity"]


def run_sweep(rho_grid, alpha_grid, t1_grid, base_cfg: PipelineConfig,
              spec: SyntheticSpec) -> list[dict]:
    if not rho_grid or not alpha_grid or not t1_grid:
        raise ValueError("all three grids must be non-empty")
    video, gt_flow, cond_tar, cond_src = synth_video(spec)
    rows = []
    for rho in rho_grid:
        for alpha in alpha_grid:
            for t1 in t1_grid:
                row = {"rho": float(rho), "alpha": float(alpha), "t1": int(t1)}
                try:
                    cfg = replace(base_cfg, rho=float(rho), alpha=float(alpha), t1=int(t1))
                    result = swap_video(video, cond_src, cond_tar, cfg, flows=gt_flow)
                    row.update(status="ok", **result.metrics.to_dict())
                except Exception as e:  # record and continue
                    row.update(status=f"failed: {type(e).__name__}",
                               flicker_index=None, psnr_to_target=None,
                               low_band_similarity=None)
                    row["error"] = str(e)
                rows.append(row)
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".6g")
    return str(v)


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_FIELDS) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(f)) for f in CSV_FIELDS) + "\n")
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        row = {}
        for key, val in zip(header, parts):
            if key in ("rho", "alpha", "flicker_index", "psnr_to_target",
                       "low_band_similarity"):
                row[key] = float(val) if val else None
            elif key == "t1":
                row[key] = int(val)
            else:
                row[key] = val
        rows.append(row)
    return rows
