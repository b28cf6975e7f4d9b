"""NMSE metric, frequency sweeps and planar error maps."""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from rsma_krr.estimators import (
    Regularization, boundary_operators, evaluate_field, krr_open_estimate, proposed_estimate,
    swf_estimate,
)
from rsma_krr.geometry import exterior_points, lebedev_order7
from rsma_krr.kernels import BesselKernel, SourceRegion
from rsma_krr.mdopt import optimize_md
from rsma_krr.simulation import add_noise, incident_truth, rigid_sphere_pressures

log = logging.getLogger(__name__)

NMSE_FLOOR_DB = -300.0


def nmse(estimated, truth):
    """Normalised mean squared error in dB, floored at -300 dB."""
    estimated = np.asarray(estimated)
    truth = np.asarray(truth)
    if estimated.shape != truth.shape or truth.size == 0:
        raise ValueError("estimated and truth must be equally sized and non-empty")
    denom = np.sum(np.abs(truth) ** 2)
    if denom == 0:
        raise ValueError("truth is identically zero")
    ratio = np.sum(np.abs(estimated - truth) ** 2) / denom
    if ratio == 0:
        return NMSE_FLOOR_DB
    return max(10 * np.log10(ratio), NMSE_FLOOR_DB)


@dataclass(frozen=True)
class NmseResult:
    frequency: float
    method: str
    nmse_db: float
    lambda1: float = float("nan")
    lambda2: float = float("nan")


@dataclass(frozen=True)
class FieldMap:
    points: np.ndarray = field(repr=False)
    estimated: np.ndarray = field(repr=False)
    truth: np.ndarray = field(repr=False)
    normalized_error: np.ndarray = field(repr=False)
    nmse_db: float = float("nan")


def error_map(estimate, points, scene, ctx):
    """Per-point error ``|u_est - u|^2 / mean(|u|^2)`` and the aggregate NMSE."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    est = evaluate_field(estimate, points, "incident")
    truth = incident_truth(scene, points, ctx)
    err = np.abs(est - truth) ** 2 / np.mean(np.abs(truth) ** 2)
    return FieldMap(points, est, truth, err, nmse(est, truth))


# ------------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class CellData:
    """Everything one (frequency, method) fit needs: data and ground truth."""

    snap: object
    points: np.ndarray = field(repr=False)
    truth: np.ndarray = field(repr=False)
    bin_frequency: float = float("nan")


def eval_points(cfg):
    pts, _ = exterior_points(cfg.eval.region().points(), cfg.array.radius)
    return pts


def simulate_cell(cfg, frequency):
    ctx = cfg.ctx(frequency)
    array = cfg.array.build(cfg.base_dir)
    scene = cfg.scene()
    snap = rigid_sphere_pressures(scene, array, ctx, cfg.sim_order)
    snap = add_noise(snap, cfg.noise_spec(frequency))
    pts = eval_points(cfg)
    return CellData(snap, pts, incident_truth(scene, pts, ctx), float(frequency))


def _reg_candidates(method, grid):
    if method.lambda_search == "fixed":
        lam = method.lambda_fixed
        return [Regularization(lam, lam, lam)]
    if method.lambda_search == "shared":
        return [Regularization.shared(lam) for lam in grid]
    return [Regularization(l1, l2, l1) for l1 in grid for l2 in grid]


def _reg_key(reg):
    # ties go to the larger value (lambda1 first)
    return (reg.lambda1, reg.lambda2, reg.lam)


def fit_method(cfg, method, data, md_spec=None):
    """Fit one roster entry, tuning its regularization against the ground truth.

    Returns ``(estimate, regularization, nmse_db)``. ``proposed_md`` first
    adapts the multidirectional kernel unless ``md_spec`` is supplied.
    """
    snap = data.snap
    ctx = snap.ctx
    grid = cfg.lambda_grid.values()
    if method.kind == "swf":
        def fit(reg):
            return swf_estimate(snap, method.order, reg)
    elif method.kind == "krr":
        def fit(reg):
            return krr_open_estimate(snap, BesselKernel(), method.order, reg, method.w_mode)
    else:
        sct = SourceRegion(snap.array.radius, method.n_ext, method.weight_mode)
        if method.kind == "proposed_md":
            if md_spec is None:
                md_spec, _ = optimize_md(snap, lebedev_order7(), sct, cfg.mdopt.build())
            spec_inc = md_spec
        else:
            spec_inc = BesselKernel()
        ops = boundary_operators(snap.array, ctx, spec_inc, sct)

        def fit(reg):
            return proposed_estimate(snap, spec_inc, sct, reg, method.q_mode, ops=ops)

    best = None
    for reg in sorted(_reg_candidates(method, grid), key=_reg_key):
        est = fit(reg)
        err = nmse(evaluate_field(est, data.points, "incident"), data.truth)
        if best is None or err <= best[2]:
            best = (est, reg, err)
    return best


def _reported_lambdas(method, reg):
    if method.kind == "swf" or method.q_mode == "identity":
        return reg.lam, float("nan")
    return reg.lambda1, reg.lambda2


def run_cell(cfg, method_id, frequency, data=None):
    method = cfg.method(method_id)
    if data is None:
        data = simulate_cell(cfg, frequency)
    _, reg, err = fit_method(cfg, method, data)
    l1, l2 = _reported_lambdas(method, reg)
    return NmseResult(float(frequency), method.id, float(err), float(l1), float(l2))


def frequency_sweep(cfg, data_fn=None, on_result=None):
    """NMSE for every (frequency, method) cell of the config, in roster order.

    ``data_fn(cfg, frequency)`` supplies the data (simulation by default).
    A cell that fails numerically is logged and yields ``nmse_db = nan``;
    the sweep carries on.
    """
    data_fn = data_fn or simulate_cell
    results = []
    for f in cfg.frequencies.grid():
        data = data_fn(cfg, f)
        for m in cfg.methods:
            try:
                res = run_cell(cfg, m.id, f, data)
            except (ArithmeticError, np.linalg.LinAlgError) as exc:
                log.error("cell %s @ %g Hz failed: %s", m.id, f, exc)
                res = NmseResult(float(f), m.id, float("nan"))
            results.append(res)
            if on_result is not None:
                on_result(res)
    return results


# -------------------------------------------------------------------- output

SWEEP_COLUMNS = ("frequency_hz", "method", "nmse_db", "lambda1", "lambda2")
MAP_COLUMNS = ("x", "y", "z", "re_est", "im_est", "re_truth", "im_truth", "norm_err")


def fmt(x):
    """Shortest round-tripping text for a float (byte-stable across runs)."""
    return repr(float(x))


def write_sweep_csv(path, results, header_lines=()):
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in results:
            w.writerow([fmt(r.frequency), r.method, fmt(r.nmse_db), fmt(r.lambda1), fmt(r.lambda2)])


def read_sweep_csv(path):
    with open(path, newline="") as f:
        rows = [line for line in f if not line.startswith("#")]
    out = []
    for row in csv.DictReader(rows):
        out.append(NmseResult(float(row["frequency_hz"]), row["method"], float(row["nmse_db"]),
                              float(row["lambda1"]), float(row["lambda2"])))
    return out


def write_map_csv(path, fmap, header_lines=()):
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MAP_COLUMNS)
        for p, e, t, err in zip(fmap.points, fmap.estimated, fmap.truth, fmap.normalized_error):
            w.writerow([fmt(p[0]), fmt(p[1]), fmt(p[2]), fmt(e.real), fmt(e.imag),
                        fmt(t.real), fmt(t.imag), fmt(err)])
