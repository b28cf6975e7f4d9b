"""Command-line experiment driver.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
failure, 4 file I/O error.
"""
import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from rsma_krr import __version__
from rsma_krr import evaluation as ev
from rsma_krr import ingest
from rsma_krr.config import ConfigError, canonical_json, config_hash, load_config
from rsma_krr.estimators import SingularSystemError
from rsma_krr.geometry import exterior_points, grid_plane, lebedev_order7
from rsma_krr.mdopt import optimize_md, write_md_kernel_csv

log = logging.getLogger("rsma_krr")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
CACHE_DIR = ".cells"


class NumericFailure(RuntimeError):
    pass


def _ftag(f):
    return f"{f:g}"


def _header(cfg, command, *extra):
    return (f"rsma-krr {__version__} {command}", f"config_sha256={config_hash(cfg)}",
            f"seed={cfg.seed}", *extra)


# ------------------------------------------------------------ data sources

def _resolve(cfg, path):
    p = Path(path)
    if cfg.base_dir is not None and not p.is_absolute():
        p = cfg.base_dir / p
    return p


def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _ingest_sets(cfg):
    if cfg.ingest is None:
        raise ConfigError("the ingest command needs an [ingest] section")
    arr = ingest.load_ir_csv(_resolve(cfg, cfg.ingest.array_ir))
    if cfg.ingest.eval_ir is None:
        raise ConfigError("[ingest] eval_ir is required to score estimates")
    evl = ingest.load_ir_csv(_resolve(cfg, cfg.ingest.eval_ir))
    if arr.sample_rate != evl.sample_rate:
        raise ConfigError("array and evaluation responses use different sample rates")
    for f in cfg.frequencies.grid():
        if f > arr.nyquist:
            raise ConfigError(f"{f} Hz exceeds the Nyquist frequency {arr.nyquist} Hz")
    return arr, evl


def measured_cell(cfg, frequency):
    arr, evl = _ingest_sets(cfg)
    ic = cfg.ingest
    snap, choice = ingest.ir_to_snapshot(arr, frequency, cfg.ctx(frequency), ic.radius, ic.fade_len)
    truth, _ = ingest.ir_to_values(evl, frequency, ic.fade_len)
    if abs(choice.deviation) > 0:
        log.info("%g Hz analysed at bin %d (%g Hz)", frequency, choice.index, choice.frequency)
    return ev.CellData(snap, evl.positions, truth, choice.frequency)


def _data_fn(mode):
    return measured_cell if mode == "ingest" else ev.simulate_cell


def _data_fingerprint(cfg, mode):
    if mode != "ingest":
        return "simulated"
    return [_file_digest(_resolve(cfg, cfg.ingest.array_ir)),
            _file_digest(_resolve(cfg, cfg.ingest.eval_ir))]


# ------------------------------------------------------------------ sweep

def cell_key(cfg, method_id, frequency, fingerprint):
    """Hash of everything a single cell's result depends on."""
    dump = cfg.model_dump(mode="json", exclude={"methods", "frequencies", "plane"})
    payload = {"version": __version__, "config": dump, "method": cfg.method(method_id).model_dump(mode="json"),
               "frequency": float(frequency), "data": fingerprint}
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def _compute_cell(cfg, method_id, frequency, mode):
    data = _data_fn(mode)(cfg, frequency)
    try:
        return ev.run_cell(cfg, method_id, frequency, data), None
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return ev.NmseResult(float(frequency), method_id, float("nan")), str(exc)


def run_sweep(cfg, out, jobs=1, mode="simulate"):
    """Evaluate every cell, reusing cached cells; returns (results, computed, failures)."""
    out = Path(out)
    cache = out / CACHE_DIR
    cache.mkdir(parents=True, exist_ok=True)
    fingerprint = _data_fingerprint(cfg, mode)
    cells = [(f, m.id) for f in cfg.frequencies.grid() for m in cfg.methods]
    results, todo = {}, []
    for f, mid in cells:
        path = cache / f"{cell_key(cfg, mid, f, fingerprint)}.json"
        if path.exists():
            d = json.loads(path.read_text())
            results[(f, mid)] = ev.NmseResult(d["frequency"], d["method"], d["nmse_db"],
                                              d["lambda1"], d["lambda2"])
        else:
            todo.append((f, mid, path))

    failures = []

    def store(f, mid, path, res, err):
        results[(f, mid)] = res
        if err is not None:
            log.error("cell %s @ %g Hz failed: %s", mid, f, err)
            failures.append((f, mid, err))
            return
        log.info("cell %s @ %g Hz: %.3f dB", mid, f, res.nmse_db)
        path.write_text(json.dumps({"frequency": res.frequency, "method": res.method,
                                    "nmse_db": res.nmse_db, "lambda1": res.lambda1,
                                    "lambda2": res.lambda2}, allow_nan=True))

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(_compute_cell, cfg, mid, f, mode) for f, mid, _ in todo]
            for (f, mid, path), fut in zip(todo, futs):
                store(f, mid, path, *fut.result())
    else:
        for f, mid, path in todo:
            store(f, mid, path, *_compute_cell(cfg, mid, f, mode))

    ordered = [results[c] for c in cells]
    ev.write_sweep_csv(out / "sweep.csv", ordered, _header(cfg, "ingest" if mode == "ingest" else "sweep"))
    return ordered, len(todo), failures


# --------------------------------------------------------------- commands

def cmd_simulate(cfg, args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f in cfg.frequencies.grid():
        data = ev.simulate_cell(cfg, f)
        head = _header(cfg, "simulate", f"frequency_hz={ev.fmt(f)}",
                       f"snr_db={cfg.noise.snr_db}")
        with open(out / f"snapshot_{_ftag(f)}.csv", "w", newline="") as fh:
            for line in head:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mic", "x", "y", "z", "re_s", "im_s"])
            for m, (p, s) in enumerate(zip(data.snap.array.positions, data.snap.s)):
                w.writerow([m, ev.fmt(p[0]), ev.fmt(p[1]), ev.fmt(p[2]), ev.fmt(s.real), ev.fmt(s.imag)])
        with open(out / f"truth_{_ftag(f)}.csv", "w", newline="") as fh:
            for line in head:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "y", "z", "re_truth", "im_truth"])
            for p, u in zip(data.points, data.truth):
                w.writerow([ev.fmt(p[0]), ev.fmt(p[1]), ev.fmt(p[2]), ev.fmt(u.real), ev.fmt(u.imag)])
    return EXIT_OK


def _sweep_like(cfg, args, mode):
    results, computed, failures = run_sweep(cfg, args.out, args.jobs, mode)
    log.info("%d cells, %d computed, %d cached", len(results), computed, len(results) - computed)
    if failures:
        raise NumericFailure(f"{len(failures)} cell(s) failed numerically")
    return EXIT_OK


def cmd_sweep(cfg, args):
    return _sweep_like(cfg, args, "simulate")


def cmd_ingest(cfg, args):
    _ingest_sets(cfg)  # validate before any work
    return _sweep_like(cfg, args, "ingest")


def _single_frequency(cfg, args):
    if args.frequency is not None:
        return float(args.frequency)
    grid = cfg.frequencies.grid()
    if len(grid) != 1:
        raise ConfigError("pass --frequency (the config lists several frequencies)")
    return grid[0]


def plane_points(cfg):
    pc = cfg.plane
    pts = grid_plane(tuple(pc.axes), (pc.extent, pc.extent), pc.spacing, pc.fixed)
    kept, _ = exterior_points(pts, cfg.array.radius)
    return kept


def cmd_map(cfg, args):
    if args.method is None:
        raise ConfigError("map needs --method")
    f = _single_frequency(cfg, args)
    method = cfg.method(args.method)
    data = ev.simulate_cell(cfg, f)
    est, reg, err = ev.fit_method(cfg, method, data)
    fmap = ev.error_map(est, plane_points(cfg), cfg.scene(), cfg.ctx(f))
    l1, l2 = ev._reported_lambdas(method, reg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    head = _header(cfg, "map", f"method={method.id}", f"frequency_hz={ev.fmt(f)}",
                   f"plane={cfg.plane.axes} extent={ev.fmt(cfg.plane.extent)} "
                   f"spacing={ev.fmt(cfg.plane.spacing)} fixed={ev.fmt(cfg.plane.fixed)}",
                   f"lambda1={ev.fmt(l1)} lambda2={ev.fmt(l2)}",
                   f"nmse_eval_db={ev.fmt(err)}", f"nmse_plane_db={ev.fmt(fmap.nmse_db)}")
    ev.write_map_csv(out / f"map_{method.id}_{_ftag(f)}.csv", fmap, head)
    return EXIT_OK


def cmd_optimize_md(cfg, args):
    f = _single_frequency(cfg, args)
    method = next((m for m in cfg.methods if m.kind == "proposed_md"), None)
    if args.method is not None:
        method = cfg.method(args.method)
    if method is None or method.kind != "proposed_md":
        raise ConfigError("optimize-md needs a proposed_md method in the roster")
    data = ev.simulate_cell(cfg, f)
    sct = cfg.sct_spec(method)
    spec, trace = optimize_md(data.snap, lebedev_order7(), sct, cfg.mdopt.build())
    if trace.failed:
        raise NumericFailure("non-finite leave-one-out loss during optimisation")
    descent = "ok" if trace.descended else "warning"
    if descent == "warning":
        log.warning("final objective %.6g exceeds initial %.6g", trace.objective[-1], trace.objective[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    head = _header(cfg, "optimize-md", f"method={method.id}", f"frequency_hz={ev.fmt(f)}",
                   f"descent={descent}")
    write_md_kernel_csv(out / f"md_kernel_{_ftag(f)}.csv", spec, head)
    trace.to_csv(out / f"md_trace_{_ftag(f)}.csv", head)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "map": cmd_map,
    "optimize-md": cmd_optimize_md,
    "ingest": cmd_ingest,
}


def build_parser():
    p = argparse.ArgumentParser(prog="rsma-krr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML experiment file (bundled defaults if omitted)")
        s.add_argument("--out", default="out", help="output directory")
        s.add_argument("--seed", type=int, help="override the noise seed")
        s.add_argument("--methods", help="comma-separated subset of the method roster")
        s.add_argument("--frequency", type=float, help="run a single frequency (Hz)")
        s.add_argument("--jobs", type=int, default=1, help="worker processes for sweep cells")
        s.add_argument("-v", "--verbose", action="store_true")
        if name in ("map", "optimize-md"):
            s.add_argument("--method", help="roster id of the method")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, frequency=args.frequency)
        if args.methods:
            ids = [m.strip() for m in args.methods.split(",") if m.strip()]
            if not ids:
                raise ConfigError("--methods selects no method")
            cfg = cfg.select_methods(ids)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ingest.IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, SingularSystemError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
