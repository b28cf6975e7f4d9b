import csv
import json

import numpy as np
import pytest

from rsma_krr import cli
from rsma_krr import evaluation as ev
from rsma_krr import ingest
from rsma_krr.config import load_config
from rsma_krr.estimators import PressureSnapshot
from rsma_krr.kernels import WaveContext
from rsma_krr.mdopt import read_md_kernel_csv
from rsma_krr.simulation import SourceScene, incident_truth, rigid_sphere_pressures

FAST = ["--methods", "swf,krr", "--frequency", "500"]


def run(*argv):
    return cli.main([str(a) for a in argv])


def body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def header(path):
    return [line[2:] for line in path.read_text().splitlines() if line.startswith("#")]


def test_simulate_is_byte_identical(tmp_path):
    assert run("simulate", "--out", tmp_path / "a", "--frequency", 250) == 0
    assert run("simulate", "--out", tmp_path / "b", "--frequency", 250) == 0
    for name in ("snapshot_250.csv", "truth_250.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rows = body(tmp_path / "a" / "snapshot_250.csv")
    assert rows[0] == "mic,x,y,z,re_s,im_s" and len(rows) == 61
    assert header(tmp_path / "a" / "snapshot_250.csv")[0] == "rsma-krr 0.1.0 simulate"
    run("simulate", "--out", tmp_path / "c", "--frequency", 250, "--seed", 9)
    assert (tmp_path / "a" / "snapshot_250.csv").read_bytes() != (tmp_path / "c" / "snapshot_250.csv").read_bytes()


def test_sweep_rows_and_resume(tmp_path, caplog):
    out = tmp_path / "s"
    assert run("sweep", "--out", out, "--methods", "swf,krr", "--config", write_cfg(tmp_path)) == 0
    rows = list(csv.DictReader(body(out / "sweep.csv")))
    assert [(r["frequency_hz"], r["method"]) for r in rows] == \
        [(f, m) for f in ("250.0", "500.0") for m in ("swf", "krr")]
    first = (out / "sweep.csv").read_bytes()
    assert len(list((out / cli.CACHE_DIR).glob("*.json"))) == 4
    cfg = load_config(tmp_path / "two.toml").select_methods(["swf", "krr"])
    _, computed, _ = cli.run_sweep(cfg, out)
    assert computed == 0 and (out / "sweep.csv").read_bytes() == first
    # a new method only computes its own cells
    _, computed, _ = cli.run_sweep(load_config(tmp_path / "two.toml").select_methods(["swf", "krr", "proposed"]), out)
    assert computed == 2


def write_cfg(tmp_path):
    p = tmp_path / "two.toml"
    p.write_text("[frequencies]\nvalues = [250.0, 500.0]\n")
    return p


def test_cell_key_ignores_roster_but_not_method():
    cfg = load_config()
    a = cli.cell_key(cfg, "swf", 500.0, "simulated")
    assert a == cli.cell_key(cfg.select_methods(["swf"]).with_overrides(frequency=500.0), "swf", 500.0, "simulated")
    assert a != cli.cell_key(cfg, "krr", 500.0, "simulated")
    assert a != cli.cell_key(cfg.with_overrides(seed=1), "swf", 500.0, "simulated")
    assert a != cli.cell_key(cfg, "swf", 500.0, ["x", "y"])


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = load_config(write_cfg(tmp_path)).select_methods(["swf", "krr"])
    cli.run_sweep(cfg, tmp_path / "serial")
    cli.run_sweep(cfg, tmp_path / "parallel", jobs=2)
    assert (tmp_path / "serial" / "sweep.csv").read_bytes() == (tmp_path / "parallel" / "sweep.csv").read_bytes()


def test_map_consistent_with_sweep(tmp_path):
    assert run("sweep", "--out", tmp_path, *FAST) == 0
    assert run("map", "--out", tmp_path, "--method", "krr", "--frequency", 500) == 0
    sweep = {r.method: r for r in ev.read_sweep_csv(tmp_path / "sweep.csv")}
    path = tmp_path / "map_krr_500.csv"
    meta = dict(kv.split("=", 1) for line in header(path)[3:] for kv in line.split(" "))
    assert float(meta["nmse_eval_db"]) == sweep["krr"].nmse_db
    assert float(meta["lambda1"]) == sweep["krr"].lambda1
    rows = list(csv.DictReader(body(path)))
    cfg = load_config()
    n = int(round(cfg.plane.extent / cfg.plane.spacing)) + 1
    # the disc inside the sphere, about pi (R / spacing)^2 grid points, is removed
    assert abs((n * n - len(rows)) - np.pi * (0.05 / cfg.plane.spacing) ** 2) < 20
    pts = np.array([[float(r[c]) for c in "xyz"] for r in rows])
    truth = np.array([float(r["re_truth"]) + 1j * float(r["im_truth"]) for r in rows])
    np.testing.assert_array_equal(truth, incident_truth(cfg.scene(), pts, cfg.ctx(500.0)))
    est = np.array([float(r["re_est"]) + 1j * float(r["im_est"]) for r in rows])
    assert ev.nmse(est, truth) == pytest.approx(float(meta["nmse_plane_db"]), abs=1e-9)


def test_optimize_md_outputs(tmp_path):
    (tmp_path / "md.toml").write_text("[mdopt]\niterations = 3\n")
    assert run("optimize-md", "--out", tmp_path, "--frequency", 1000, "--config", tmp_path / "md.toml") == 0
    trace = tmp_path / "md_trace_1000.csv"
    assert len(body(trace)) == 1 + 4
    assert "descent=ok" in header(trace) or "descent=warning" in header(trace)
    spec = read_md_kernel_csv(tmp_path / "md_kernel_1000.csv")
    assert spec.grid.count == 26 and np.all(spec.gamma >= 0)


@pytest.mark.parametrize("argv,code", [
    (["sweep", "--methods", "nope", "--frequency", "500"], 2),
    (["sweep", "--methods", ",", "--frequency", "500"], 2),
    (["sweep", "--jobs", "0"], 2),
    (["sweep", "--config", "missing.toml"], 4),
    (["map", "--frequency", "500"], 2),
    (["map", "--method", "swf"], 2),
    (["optimize-md", "--method", "swf", "--frequency", "500"], 2),
    (["ingest", "--frequency", "500"], 2),
])
def test_exit_codes(tmp_path, argv, code, capsys):
    assert run(*argv, "--out", tmp_path) == code
    assert capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("unknown_key = 1\n")
    assert run("sweep", "--config", p, "--out", tmp_path) == 2


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ArithmeticError("synthetic")

    monkeypatch.setattr(ev, "run_cell", boom)
    assert run("sweep", "--out", tmp_path, *FAST) == 3
    rows = ev.read_sweep_csv(tmp_path / "sweep.csv")
    assert len(rows) == 2 and all(np.isnan(r.nmse_db) for r in rows)
    assert not list((tmp_path / cli.CACHE_DIR).glob("*.json"))


# ------------------------------------------------------------------ ingest

FS, NS = 8000.0, 256  # 31.25 Hz bins; 500 Hz is bin 16


def synth_irs(values_fn, positions, ids):
    """Real impulse responses whose (conjugate-convention) spectrum is ``values_fn(f)``."""
    freqs = np.fft.rfftfreq(NS, 1 / FS)
    spec = np.zeros((len(positions), len(freqs)), complex)
    for i, f in enumerate(freqs[1:-1], start=1):
        spec[:, i] = values_fn(f)
    data = np.fft.irfft(spec.conj(), n=NS, axis=1)
    return ingest.ImpulseResponseSet(FS, ids, np.asarray(positions), data)


def test_ingest_reproduces_simulated_fit(tmp_path):
    cfg = load_config().select_methods(["swf", "krr"]).with_overrides(frequency=500.0)
    array = cfg.array.build()
    scene = SourceScene.single((3.0, 0, 0))
    pts = ev.eval_points(cfg)[:80]
    arr_irs = synth_irs(lambda f: rigid_sphere_pressures(scene, array, WaveContext(f)).s,
                        array.positions, tuple(f"m{i}" for i in range(60)))
    evl_irs = synth_irs(lambda f: incident_truth(scene, pts, WaveContext(f)),
                        pts, tuple(f"p{i}" for i in range(len(pts))))
    ingest.write_ir_csv(tmp_path / "array.csv", arr_irs)
    ingest.write_ir_csv(tmp_path / "eval.csv", evl_irs)
    (tmp_path / "exp.toml").write_text(
        '[frequencies]\nvalues = [500.0]\n[ingest]\narray_ir = "array.csv"\neval_ir = "eval.csv"\n')
    out = tmp_path / "out"
    assert run("ingest", "--config", tmp_path / "exp.toml", "--out", out, "--methods", "swf,krr") == 0
    got = {r.method: r for r in ev.read_sweep_csv(out / "sweep.csv")}
    assert header(out / "sweep.csv")[0] == "rsma-krr 0.1.0 ingest"
    ctx = WaveContext(500.0)
    snap = PressureSnapshot(ctx, array, rigid_sphere_pressures(scene, array, ctx).s)
    data = ev.CellData(snap, pts, incident_truth(scene, pts, ctx), 500.0)
    for mid in ("swf", "krr"):
        _, _, ref = ev.fit_method(cfg, cfg.method(mid), data)
        assert got[mid].nmse_db == pytest.approx(ref, abs=1e-6)
    # editing a data file invalidates the cached cells
    _, computed, _ = cli.run_sweep(load_config(tmp_path / "exp.toml").select_methods(["swf"]), out, mode="ingest")
    assert computed == 0
    ingest.write_ir_csv(tmp_path / "eval.csv", evl_irs.select(evl_irs.channel_ids[:40]))
    _, computed, _ = cli.run_sweep(load_config(tmp_path / "exp.toml").select_methods(["swf"]), out, mode="ingest")
    assert computed == 1


def test_ingest_rejects_frequency_above_nyquist(tmp_path):
    irs = ingest.ImpulseResponseSet(FS, ("a",), np.array([[0.05, 0, 0]]), np.zeros((1, 8)))
    ingest.write_ir_csv(tmp_path / "a.csv", irs)
    (tmp_path / "exp.toml").write_text(
        '[frequencies]\nvalues = [5000.0]\n[ingest]\narray_ir = "a.csv"\neval_ir = "a.csv"\n')
    assert run("ingest", "--config", tmp_path / "exp.toml", "--out", tmp_path) == 2
