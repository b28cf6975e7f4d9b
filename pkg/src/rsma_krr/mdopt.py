"""Adaptation of the multidirectional kernel by leave-one-out cross-validation.

The weights ``gamma`` take proximal-gradient steps with soft thresholding
(non-negative l1 penalty), the concentrations ``zeta`` plain gradient steps
projected onto ``[0, ZETA_MAX]``. Gradients are central finite differences
of the cross-validation loss, which keeps the loss the only definition.
"""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from rsma_krr.estimators import _herm, scattered_operators
from rsma_krr.kernels import MultiDirectional, md_components

log = logging.getLogger(__name__)

ZETA_MAX = 50.0
FD_STEP = 1e-5
# below this |1 - H_mm| the closed-form leave-one-out residual is replaced by a refit
HAT_TOL = 1e-8


@dataclass(frozen=True)
class MdOptConfig:
    tau: float = 1e-2
    eta_gamma: float = 1e-1
    eta_zeta: float = 1e2
    iterations: int = 400
    lambda_fixed: float = 1e-2
    gamma_init: float = None  # None -> 1/Q
    zeta_init: float = 20.0

    def __post_init__(self):
        if min(self.tau, self.eta_gamma, self.eta_zeta, self.lambda_fixed) <= 0:
            raise ValueError("tau, step sizes and lambda must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")


@dataclass
class MdOptTrace:
    """Per-iteration record; ``objective`` adds the l1 penalty ``tau * sum(gamma)``."""

    tau: float = 0.0
    loss: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    failed: bool = False

    def record(self, loss, gamma, zeta):
        self.loss.append(float(loss))
        self.gamma.append(np.array(gamma))
        self.zeta.append(np.array(zeta))

    @property
    def objective(self):
        return [l + self.tau * float(np.sum(g)) for l, g in zip(self.loss, self.gamma)]

    @property
    def descended(self):
        obj = self.objective
        return bool(obj) and obj[-1] <= obj[0]

    @property
    def nnz(self):
        return [int(np.count_nonzero(g)) for g in self.gamma]

    def __len__(self):
        return len(self.loss)

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as f:
            for line in header_lines:
                f.write(f"# {line}\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["iteration", "loss", "objective", "nnz_gamma", "zeta_min", "zeta_mean",
                        "zeta_max"])
            for i, (loss, obj, g, z) in enumerate(zip(self.loss, self.objective, self.gamma, self.zeta)):
                zs = z[g > 0] if np.any(g > 0) else z
                w.writerow([i, repr(loss), repr(obj), int(np.count_nonzero(g)),
                            repr(float(zs.min())), repr(float(zs.mean())), repr(float(zs.max()))])


def hat_matrix(A, lam):
    """``H = A (A^H A + lam I)^-1 A^H``, computed as ``I - lam (A A^H + lam I)^-1``."""
    m = A.shape[0]
    G = _herm(A @ A.conj().T)
    return np.eye(m) - lam * np.linalg.inv(G + lam * np.eye(m))


def loo_residuals(A, lam, s):
    """Leave-one-out residuals of ridge regression of ``s`` on the rows of ``A``.

    Holding out microphone ``m`` removes its row from the data term while
    the model matrix (kernel sections and boundary constraint at all known
    microphone positions) stays fixed, so the residual has the closed form
    ``(s - H s)_m / (1 - H_mm)``. Rows with ``|1 - H_mm| < HAT_TOL`` are
    refitted explicitly.
    """
    H = hat_matrix(A, lam)
    denom = 1 - np.real(np.diag(H))
    e = (s - H @ s) / np.where(np.abs(denom) < HAT_TOL, 1.0, denom)
    for m in np.flatnonzero(np.abs(denom) < HAT_TOL):
        log.warning("degenerate hat diagonal at microphone %d; refitting", m)
        e[m] = loo_residual_refit(A, lam, s, m)
    return e


def loo_residual_refit(A, lam, s, m):
    """Held-out residual at row ``m`` from an explicit ridge refit without it."""
    keep = np.arange(len(s)) != m
    Ak = A[keep]
    alpha = np.linalg.solve(Ak.conj().T @ Ak + lam * np.eye(A.shape[1]), Ak.conj().T @ s[keep])
    return s[m] - A[m] @ alpha


class LoocvObjective:
    """Leave-one-out loss of the boundary-constrained fit as a function of (gamma, zeta).

    The source-region operators do not depend on the incident kernel and are
    computed once; per-direction Gram blocks are cached and updated only for
    directions whose ``zeta`` changes.
    """

    def __init__(self, snap, grid, spec_sct, lambda_fixed):
        self.snap = snap
        self.grid = grid
        self.spec_sct = spec_sct
        self.lam = lambda_fixed
        K_sct, _, dK_pinv = scattered_operators(snap.array, snap.ctx, spec_sct)
        # A = K_inc - T dK_inc
        self._T = K_sct @ dK_pinv
        pos = snap.array.positions
        self._r = pos[:, None]
        self._rp = pos[None]
        self._n = (pos / np.linalg.norm(pos, axis=1, keepdims=True))[:, None]
        self._zeta = None

    def components(self, zeta):
        """Per-direction Gram and normal-derivative blocks, shape ``(Q, M, M)``."""
        K, dK = md_components(self._r, self._rp, self.snap.ctx, self.grid.directions,
                              zeta, normal=self._n)
        return np.moveaxis(K, -1, 0), np.moveaxis(dK, -1, 0)

    def _direction(self, q, zeta_q):
        K, dK = md_components(self._r, self._rp, self.snap.ctx, self.grid.directions[q:q + 1],
                              np.array([zeta_q]), normal=self._n)
        return K[..., 0], dK[..., 0]

    def set_zeta(self, zeta):
        zeta = np.array(zeta, dtype=float)
        if self._zeta is None:
            self._K, self._dK = self.components(zeta)
        else:
            for q in np.flatnonzero(zeta != self._zeta):
                self._K[q], self._dK[q] = self._direction(q, zeta[q])
        self._zeta = zeta

    def _loss_from(self, K, dK):
        A = K - self._T @ dK
        e = loo_residuals(A, self.lam, self.snap.s)
        return float(np.sum(np.abs(e) ** 2))

    def loss(self, gamma, zeta=None):
        if zeta is not None:
            self.set_zeta(zeta)
        gamma = np.asarray(gamma, dtype=float)
        return self._loss_from(np.tensordot(gamma, self._K, 1), np.tensordot(gamma, self._dK, 1))

    def grad_gamma(self, gamma, zeta, step=FD_STEP):
        self.set_zeta(zeta)
        gamma = np.asarray(gamma, dtype=float)
        K0 = np.tensordot(gamma, self._K, 1)
        dK0 = np.tensordot(gamma, self._dK, 1)
        g = np.zeros(len(gamma))
        for q in range(len(gamma)):
            h = step * max(abs(gamma[q]), 1.0)
            lp = self._loss_from(K0 + h * self._K[q], dK0 + h * self._dK[q])
            lm = self._loss_from(K0 - h * self._K[q], dK0 - h * self._dK[q])
            g[q] = (lp - lm) / (2 * h)
        return g

    def grad_zeta(self, gamma, zeta, step=FD_STEP, mask=None):
        self.set_zeta(zeta)
        gamma = np.asarray(gamma, dtype=float)
        K0 = np.tensordot(gamma, self._K, 1)
        dK0 = np.tensordot(gamma, self._dK, 1)
        g = np.zeros(len(gamma))
        for q in range(len(gamma)):
            if mask is not None and not mask[q]:
                continue
            h = step * max(abs(zeta[q]), 1.0)
            Kp, dKp = self._direction(q, zeta[q] + h)
            Km, dKm = self._direction(q, zeta[q] - h)
            lp = self._loss_from(K0 + gamma[q] * (Kp - self._K[q]), dK0 + gamma[q] * (dKp - self._dK[q]))
            lm = self._loss_from(K0 + gamma[q] * (Km - self._K[q]), dK0 + gamma[q] * (dKm - self._dK[q]))
            g[q] = (lp - lm) / (2 * h)
        return g


def loocv_loss(snap, spec_inc, spec_sct, lambda_fixed=1e-2):
    """Sum of squared leave-one-out residuals of the total field at the microphones."""
    if snap.array.num_mics < 2:
        raise ValueError("leave-one-out needs at least two microphones")
    obj = LoocvObjective(snap, spec_inc.grid, spec_sct, lambda_fixed)
    return obj.loss(spec_inc.gamma, spec_inc.zeta)


def loocv_loss_refit(snap, spec_inc, spec_sct, lambda_fixed=1e-2):
    """Reference implementation: ``M`` explicit refits with ``Q = lambda I``."""
    from rsma_krr.estimators import boundary_operators

    ops = boundary_operators(snap.array, snap.ctx, spec_inc, spec_sct)
    A = ops.A
    s = np.asarray(snap.s)
    return float(sum(abs(loo_residual_refit(A, lambda_fixed, s, m)) ** 2 for m in range(len(s))))


def grad_loss(snap, spec, spec_sct, lambda_fixed=1e-2, which="gamma"):
    obj = LoocvObjective(snap, spec.grid, spec_sct, lambda_fixed)
    if which == "gamma":
        return obj.grad_gamma(spec.gamma, spec.zeta)
    if which == "zeta":
        return obj.grad_zeta(spec.gamma, spec.zeta)
    raise ValueError(f"unknown parameter block {which!r}")


def prox_step_gamma(gamma, grad, eta_gamma, tau):
    """Gradient step followed by non-negative soft thresholding."""
    return np.maximum(0.0, np.asarray(gamma) - eta_gamma * np.asarray(grad) - eta_gamma * tau)


def optimize_md(snap, grid, spec_sct, cfg=MdOptConfig(), callback=None):
    """Run ``cfg.iterations`` joint updates of ``gamma`` and ``zeta``.

    Returns the adapted :class:`MultiDirectional` kernel and the trace, which
    holds the initial state plus one record per iteration. A non-finite loss
    stops the run early and flags the trace.
    """
    q = grid.count
    gamma = np.full(q, 1 / q if cfg.gamma_init is None else cfg.gamma_init, dtype=float)
    zeta = np.full(q, cfg.zeta_init, dtype=float)
    obj = LoocvObjective(snap, grid, spec_sct, cfg.lambda_fixed)
    trace = MdOptTrace(tau=cfg.tau)
    trace.record(obj.loss(gamma, zeta), gamma, zeta)
    for it in range(cfg.iterations):
        g_gamma = obj.grad_gamma(gamma, zeta)
        active = gamma > 0
        g_zeta = obj.grad_zeta(gamma, zeta, mask=active)
        gamma = prox_step_gamma(gamma, g_gamma, cfg.eta_gamma, cfg.tau)
        zeta = np.where(active, np.clip(zeta - cfg.eta_zeta * g_zeta, 0.0, ZETA_MAX), zeta)
        loss = obj.loss(gamma, zeta)
        if not np.isfinite(loss):
            log.error("non-finite loss at iteration %d", it + 1)
            trace.failed = True
            break
        trace.record(loss, gamma, zeta)
        if callback is not None:
            callback(it + 1, loss, gamma, zeta)
    return MultiDirectional(grid, gamma, zeta), trace


KERNEL_COLUMNS = ("q", "dx", "dy", "dz", "gamma", "zeta")


def write_md_kernel_csv(path, spec, header_lines=()):
    with open(path, "w", newline="") as f:
        for line in header_lines:
            f.write(f"# {line}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(KERNEL_COLUMNS)
        for q, (d, g, z) in enumerate(zip(spec.grid.directions, spec.gamma, spec.zeta)):
            w.writerow([q, repr(float(d[0])), repr(float(d[1])), repr(float(d[2])),
                        repr(float(g)), repr(float(z))])


def read_md_kernel_csv(path):
    """Inverse of :func:`write_md_kernel_csv`; validates through the constructors."""
    from rsma_krr.geometry import DirectionGrid

    with open(path, newline="") as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    if not rows:
        raise ValueError(f"{path}: no kernel rows")
    d = np.array([[float(r["dx"]), float(r["dy"]), float(r["dz"])] for r in rows])
    gamma = np.array([float(r["gamma"]) for r in rows])
    zeta = np.array([float(r["zeta"]) for r in rows])
    return MultiDirectional(DirectionGrid(d), gamma, zeta)
