import numpy as np

from videoswap.metrics import flicker_index, low_band_similarity, psnr
from videoswap.pipeline import PipelineConfig, swap_video
from videoswap.sweep import parse_csv, run_sweep, to_csv
from videoswap.synth import SyntheticSpec, synth_video


def tiny_cfg():
    return PipelineConfig(steps=4, t1=2, window=4, base_steps=40,
                          beta_start=0.02, beta_end=0.2, gamma=0.1, seed=5,
                          flow_radius=1, flow_block=3)


def tiny_spec():
    return SyntheticSpec(frames=4, channels=4, height=8, width=8,
                         velocity=(1.0, 0.0), noise_std=0.02, seed=9)


def test_single_cell_matches_direct_run():
    cfg = tiny_cfg()
    spec = tiny_spec()
    rows = run_sweep([0.8], [0.8], [2], cfg, spec)
    assert len(rows) == 1
    row = rows[0]
    assert row["status"] == "ok"

    video, flow, tar, src = synth_video(spec)
    from dataclasses import replace
    direct = swap_video(video, src, tar, replace(cfg, rho=0.8, alpha=0.8, t1=2),
                        flows=flow)
    assert row["flicker_index"] == direct.metrics.flicker_index
    assert row["psnr_to_target"] == direct.metrics.psnr_to_target


def test_grid_cardinality_and_ordering():
    rows = run_sweep([0.0, 0.5, 1.0], [0.5, 1.0], [1, 2], tiny_cfg(), tiny_spec())
    assert len(rows) == 12
    # rho outer, alpha middle, t1 inner
    assert [r["rho"] for r in rows[:4]] == [0.0] * 4
    assert [r["alpha"] for r in rows[:4]] == [0.5, 0.5, 1.0, 1.0]
    assert [r["t1"] for r in rows[:4]] == [1, 2, 1, 2]


def test_failed_cell_recorded_and_sweep_continues():
    # t1 larger than the step count is rejected by config validation
    rows = run_sweep([0.5], [0.5], [2, 99], tiny_cfg(), tiny_spec())
    assert len(rows) == 2
    assert rows[0]["status"] == "ok"
    assert rows[1]["status"].startswith("failed")
    assert rows[1]["flicker_index"] is None


def test_csv_roundtrip():
    rows = run_sweep([0.0, 1.0], [1.0], [2], tiny_cfg(), tiny_spec())
    text = to_csv(rows)
    back = parse_csv(text)
    assert len(back) == len(rows)
    for a, b in zip(rows, back):
        assert b["rho"] == a["rho"]
        assert b["t1"] == a["t1"]
        assert b["status"] == a["status"]
        # values survive 6-significant-digit formatting
        assert abs(b["flicker_index"] - a["flicker_index"]) <= 1e-5 * max(
            1.0, abs(a["flicker_index"])
        )


def test_permuting_grids_permutes_rows_without_changing_values():
    rows_a = run_sweep([0.0, 1.0], [1.0], [2], tiny_cfg(), tiny_spec())
    rows_b = run_sweep([1.0, 0.0], [1.0], [2], tiny_cfg(), tiny_spec())
    by_rho_a = {r["rho"]: r for r in rows_a}
    by_rho_b = {r["rho"]: r for r in rows_b}
    for rho in (0.0, 1.0):
        assert by_rho_a[rho] == by_rho_b[rho]
