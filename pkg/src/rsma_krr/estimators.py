"""Incident-field estimators for a rigid spherical microphone array.

Three fitting procedures are provided:

* :func:`swf_estimate` -- truncated spherical-wave expansion whose
  microphone model already includes the rigid-sphere response;
* :func:`krr_open_estimate` -- kernel ridge regression for the incident
  field plus an outgoing spherical-wave term for the scattered field;
* :func:`proposed_estimate` -- kernel ridge regression with a source-region
  kernel for the scattered field, tied to the incident field by the Neumann
  condition on the sphere imposed at the microphones.
"""
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from rsma_krr import special_fn as sf
from rsma_krr.geometry import MicArray
from rsma_krr.kernels import (
    SourceRegion, WaveContext, gram, kernel_matrix, radiating_basis,
    radiating_basis_radial_deriv, regular_basis, sr_mode_weights, sr_weight,
)


class SingularSystemError(ArithmeticError):
    """A normal matrix was singular and no regularization was applied."""

    def __init__(self, msg, condition=None):
        super().__init__(msg if condition is None else f"{msg} (condition ~ {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class PressureSnapshot:
    """Complex pressures measured at every microphone at one frequency."""

    ctx: WaveContext
    array: MicArray
    s: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex).ravel()
        if len(s) != self.array.num_mics:
            raise ValueError("one pressure value per microphone required")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    def subset(self, idx):
        idx = np.asarray(idx)
        return PressureSnapshot(self.ctx, self.array.subset(idx), self.s[idx])

    def with_pressures(self, s):
        return PressureSnapshot(self.ctx, self.array, s)


@dataclass(frozen=True)
class SwfCoefficients:
    """Expansion coefficients in flat ``n**2 + n + m`` order."""

    order: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if len(c) != sf.num_coeffs(self.order):
            raise ValueError("coefficient count must be (order+1)**2")
        object.__setattr__(self, "coeffs", c)

    def __add__(self, other):
        if other.order != self.order:
            raise ValueError("orders differ")
        return SwfCoefficients(self.order, self.coeffs + other.coeffs)


@dataclass(frozen=True)
class Regularization:
    lambda1: float = 0.0
    lambda2: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lam) < 0:
            raise ValueError("regularization parameters must be non-negative")

    @classmethod
    def shared(cls, lam):
        return cls(lam, lam, lam)


@dataclass(frozen=True)
class SwfEstimate:
    ctx: WaveContext
    coeffs: SwfCoefficients


@dataclass(frozen=True)
class KrrEstimate:
    """Kernel expansion of the incident field centred at the microphones.

    The scattered part is either an outgoing spherical-wave expansion
    (``scattered``) or a source-region kernel expansion (``spec_sct`` and
    ``beta``).
    """

    ctx: WaveContext
    array: MicArray
    spec_inc: object
    alpha: np.ndarray = field(repr=False)
    scattered: Optional[SwfCoefficients] = None
    spec_sct: Optional[SourceRegion] = None
    beta: Optional[np.ndarray] = field(default=None, repr=False)


Estimate = Union[SwfEstimate, KrrEstimate]


# ------------------------------------------------------------ linear algebra

def _herm(H):
    return (H + H.conj().T) / 2


def psd_ridge_solve(K, lam, b):
    """Solve ``(K + lam I) x = b`` for a Hermitian PSD ``K``.

    Round-off negative eigenvalues of ``K`` are clipped to zero.
    """
    w, V = np.linalg.eigh(_herm(K))
    w = np.clip(w, 0, None) + lam
    if w.min() <= np.finfo(float).eps * max(w.max(), 1e-300) * len(w):
        raise SingularSystemError("ridge system is singular; use a positive lambda",
                                  condition=np.inf if w.min() <= 0 else w.max() / w.min())
    return V @ ((V.conj().T @ b) / (w[:, None] if b.ndim == 2 else w))


def psd_factor(K):
    """Return ``F`` with ``F^H F = K`` for Hermitian PSD ``K``."""
    w, V = np.linalg.eigh(_herm(K))
    return np.sqrt(np.clip(w, 0, None))[:, None] * V.conj().T


# ------------------------------------------------------------------- SWF

def rigid_sphere_factor(nu, ctx, radius):
    """Radial factor ``i / ((kR)^2 h_nu'(kR))`` of the rigid-sphere response."""
    x = ctx.wavenumber * radius
    hp = sf.sph_hankel1_deriv(nu, x)
    if np.any(~np.isfinite(hp)) or np.any(hp == 0):
        raise OverflowError("h_nu'(kR) is not representable; lower the truncation order")
    return 1j / (x ** 2 * hp)


def rigid_sphere_response(nu, mu, mic, ctx, radius):
    """Pressure on the rigid sphere at ``mic`` due to a unit interior mode ``(nu, mu)``."""
    mic = np.asarray(mic, dtype=float)
    if abs(np.linalg.norm(mic) - radius) > 1e-9 * radius:
        raise ValueError("microphone must lie on the sphere surface")
    return rigid_sphere_factor(nu, ctx, radius) * sf.sph_harmonic(nu, mu, mic)


def rigid_sphere_matrix(array, ctx, order):
    """Matrix mapping interior expansion coefficients to pressures on the sphere."""
    n, _ = sf.order_index(order)
    radial = rigid_sphere_factor(n, ctx, array.radius)
    return sf.sph_harmonic_matrix(order, array.positions) * radial[None, :]


def swf_estimate(snap, order=5, reg=Regularization()):
    lam = reg.lam
    C = rigid_sphere_matrix(snap.array, snap.ctx, order)
    try:
        u = psd_ridge_solve(C.conj().T @ C, lam, C.conj().T @ snap.s)
    except SingularSystemError as err:
        raise SingularSystemError("SWF normal matrix is rank deficient", err.condition) from None
    return SwfEstimate(snap.ctx, SwfCoefficients(order, u))


# ---------------------------------------------------- KRR without boundary

def scattered_weights(order, ctx, radius, w_mode="identity"):
    """Diagonal of the smoothness weighting ``W`` for scattered coefficients."""
    n, _ = sf.order_index(order)
    if w_mode == "identity":
        return np.ones(len(n))
    if w_mode == "inverse_sr":
        return 1 / sr_weight(n, ctx, radius, "analytic")
    raise ValueError(f"unknown W mode {w_mode!r}")


def krr_open_estimate(snap, spec_inc, order=5, reg=Regularization(), w_mode="identity"):
    """Kernel ridge regression with a spherical-wave scattered term.

    Solves ``(K + l1 I + (l1/l2) Psi W^-1 Psi^H) alpha = s``. With at least
    as many microphones as modes the rank update goes through the Woodbury
    identity with column-normalised ``Psi``, since the outgoing basis spans
    many orders of magnitude at low ``kR``; otherwise the system is formed
    densely.
    ``lambda2 = inf`` drops the scattered term.
    """
    ctx, array, s = snap.ctx, snap.array, snap.s
    l1, l2 = reg.lambda1, reg.lambda2
    K = kernel_matrix(spec_inc, array.positions, array.positions, ctx)
    Psi = radiating_basis(array.positions, ctx, order)
    wdiag = scattered_weights(order, ctx, array.radius, w_mode)
    try:
        x = psd_ridge_solve(K, l1, s)
        if np.isinf(l2) or l1 == 0:
            alpha = x
        elif l2 == 0:
            raise SingularSystemError("lambda2 = 0 with lambda1 > 0 is unbounded")
        elif Psi.shape[1] > len(s):
            # more modes than microphones: Psi Psi^H has full rank and the
            # Woodbury capacitance matrix would be singular, so solve directly
            alpha = psd_ridge_solve(K + (l1 / l2) * (Psi / wdiag) @ Psi.conj().T, l1, s)
        else:
            scale = np.linalg.norm(Psi, axis=0)
            P = Psi / scale
            # (l1/l2) Psi W^-1 Psi^H = P V P^H with V diagonal
            v_inv = (l2 / l1) * wdiag / scale ** 2
            BP = psd_ridge_solve(K, l1, P)
            S = np.diag(v_inv) + P.conj().T @ BP
            alpha = x - BP @ np.linalg.solve(S, P.conj().T @ x)
    except SingularSystemError as err:
        raise SingularSystemError("KRR system is singular", err.condition) from None
    if np.isinf(l2):
        u = np.zeros(Psi.shape[1], dtype=complex)
    else:
        resid = s - K @ alpha
        u = np.linalg.solve(_herm(Psi.conj().T @ Psi + l2 * np.diag(wdiag)), Psi.conj().T @ resid) \
            if l2 > 0 else np.linalg.lstsq(Psi, resid, rcond=None)[0]
    return KrrEstimate(ctx, array, spec_inc, alpha, scattered=SwfCoefficients(order, u))


# ---------------------------------------------------------- proposed method

# singular values of the column-normalised factors below this fraction of the
# largest are treated as zero
SCT_FLOOR = 1e-12


def hermitian_pinv(M, floor=SCT_FLOOR):
    """Pseudo-inverse of a Hermitian PSD matrix, dropping eigenvalues below ``floor * max``."""
    w, V = np.linalg.eigh(_herm(M))
    keep = w > floor * w.max()
    return (V[:, keep] / w[keep]) @ V[:, keep].conj().T


@dataclass(frozen=True)
class BoundaryOperators:
    """Matrices of the boundary-constrained model for one array/frequency.

    ``dK_sct_pinv`` is the pseudo-inverse of the scattered normal-derivative
    Gram, so ``coupling = dK_sct^+ dK_inc`` equals ``M_sct^+ M_mix`` and the
    scattered coefficients that keep the total normal derivative at the
    microphones stationary are ``beta = -coupling @ alpha``.
    """

    K_inc: np.ndarray
    dK_inc: np.ndarray
    K_sct: np.ndarray
    dK_sct: np.ndarray
    dK_sct_pinv: np.ndarray

    @property
    def M_mix(self):
        return self.dK_sct.conj().T @ self.dK_inc

    @property
    def M_sct(self):
        return self.dK_sct.conj().T @ self.dK_sct

    @property
    def coupling(self):
        return self.dK_sct_pinv @ self.dK_inc

    @property
    def A(self):
        return self.K_inc - self.K_sct @ self.coupling


def _scaled_pinv(X, floor):
    """Pseudo-inverse of ``X`` computed after normalising its columns."""
    c = np.linalg.norm(X, axis=0)
    c = np.where(c > 0, c, 1.0)
    return np.linalg.pinv(X / c, rcond=floor) / c[:, None]


def sr_normal_pinv(array, ctx, spec_sct, floor=SCT_FLOOR):
    """Pseudo-inverse of the source-region normal-derivative Gram from its factors.

    ``dK_sct = Psi' Xi Psi^H`` with ``Psi'`` of full column rank and
    ``Xi Psi^H`` of full row rank when there are at least ``(n_ext+1)^2``
    microphones, so ``dK_sct^+ = (Psi^H)^+ Xi^-1 Psi'^+``. Each factor is
    well conditioned once its columns are normalised, whereas ``M_sct``
    squares the spread of the outgoing-wave magnitudes across orders.
    """
    pos = array.positions
    xi = sr_mode_weights(spec_sct, ctx)
    Psi = radiating_basis(pos, ctx, spec_sct.n_ext)
    dPsi = radiating_basis_radial_deriv(pos, ctx, spec_sct.n_ext)
    if len(pos) < Psi.shape[1]:
        # too few microphones for the factorisation; invert the product directly
        return np.linalg.pinv((dPsi * xi) @ Psi.conj().T, rcond=floor)
    return (_scaled_pinv(Psi, floor).conj().T / xi) @ _scaled_pinv(dPsi, floor)


def scattered_operators(array, ctx, spec_sct, floor=SCT_FLOOR):
    """``(K_sct, dK_sct, dK_sct^+)``; independent of the incident kernel."""
    K_sct, dK_sct = gram(spec_sct, array, ctx)
    return K_sct, dK_sct, sr_normal_pinv(array, ctx, spec_sct, floor)


def boundary_operators(array, ctx, spec_inc, spec_sct, floor=SCT_FLOOR, sct=None):
    K_inc, dK_inc = gram(spec_inc, array, ctx)
    if sct is None:
        sct = scattered_operators(array, ctx, spec_sct, floor)
    return BoundaryOperators(K_inc, dK_inc, *sct)


def penalty_factor(ops, reg, q_mode="kernel_norms", coupling=None):
    """Return ``L`` with ``L^H L`` equal to the alpha penalty matrix.

    ``q_mode="kernel_norms"`` penalises both kernel norms,
    ``lambda1 a^H K_inc a + lambda2 b^H K_sct b`` with ``b = -coupling a``;
    ``q_mode="identity"`` uses ``reg.lam * I``.
    """
    m = ops.K_inc.shape[0]
    if q_mode == "identity":
        return np.sqrt(reg.lam) * np.eye(m)
    if q_mode != "kernel_norms":
        raise ValueError(f"unknown Q mode {q_mode!r}")
    if coupling is None:
        coupling = ops.coupling
    blocks = [np.sqrt(reg.lambda1) * psd_factor(ops.K_inc),
              np.sqrt(reg.lambda2) * psd_factor(ops.K_sct) @ coupling]
    return np.vstack(blocks)


def penalty_matrix(ops, reg, q_mode="kernel_norms"):
    L = penalty_factor(ops, reg, q_mode)
    return L.conj().T @ L


def solve_alpha(A, L, s, regularized=True):
    """Minimise ``||s - A a||^2 + ||L a||^2`` by a stacked least-squares solve."""
    X = np.vstack([A, L])
    rhs = np.concatenate([s, np.zeros(L.shape[0], dtype=complex)])
    alpha, _, rank, sv = np.linalg.lstsq(X, rhs, rcond=None)
    if not regularized and rank < X.shape[1]:
        raise SingularSystemError("unregularised system is rank deficient",
                                  condition=sv[0] / sv[-1] if sv[-1] > 0 else np.inf)
    return alpha


def proposed_estimate(snap, spec_inc, spec_sct, reg=Regularization(), q_mode="kernel_norms",
                      floor=SCT_FLOOR, ops=None):
    """Boundary-constrained kernel ridge regression.

    ``beta`` is eliminated through the stationarity of the squared normal
    derivative at the microphones; ``alpha`` then minimises
    ``||s - A alpha||^2 + alpha^H Q alpha`` where ``Q`` follows ``q_mode``
    (see :func:`penalty_factor`). Precomputed ``ops`` may be passed to
    avoid rebuilding the Gram matrices across a regularization grid.
    """
    ctx, array = snap.ctx, snap.array
    if ops is None:
        ops = boundary_operators(array, ctx, spec_inc, spec_sct, floor)
    coupling = ops.coupling
    A = ops.K_inc - ops.K_sct @ coupling
    L = penalty_factor(ops, reg, q_mode, coupling)
    regularized = (reg.lam > 0) if q_mode == "identity" else (reg.lambda1 > 0 or reg.lambda2 > 0)
    alpha = solve_alpha(A, L, snap.s, regularized)
    beta = -coupling @ alpha
    return KrrEstimate(ctx, array, spec_inc, alpha, spec_sct=spec_sct, beta=beta)


def boundary_stationarity(est, ops):
    """``(||M_mix a + M_sct b||, ||M_mix a||)`` for a fitted proposed estimate."""
    mix = ops.M_mix @ est.alpha
    return np.linalg.norm(mix + ops.M_sct @ est.beta), np.linalg.norm(mix)


# --------------------------------------------------------------- evaluation

def evaluate_field(est, points, part="incident"):
    """Evaluate an estimate at ``points``; ``part`` is incident, scattered or total."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise ValueError("no evaluation points")
    if part not in ("incident", "scattered", "total"):
        raise ValueError(f"unknown field part {part!r}")
    if part == "total":
        return evaluate_field(est, points, "incident") + evaluate_field(est, points, "scattered")
    if isinstance(est, SwfEstimate):
        if part == "scattered":
            raise ValueError("SWF estimates carry no scattered field")
        return regular_basis(points, est.ctx, est.coeffs.order) @ est.coeffs.coeffs
    if part == "incident":
        return kernel_matrix(est.spec_inc, points, est.array.positions, est.ctx) @ est.alpha
    if est.spec_sct is not None:
        return kernel_matrix(est.spec_sct, points, est.array.positions, est.ctx) @ est.beta
    if est.scattered is not None:
        return radiating_basis(points, est.ctx, est.scattered.order) @ est.scattered.coeffs
    raise ValueError("estimate carries no scattered field")


def select_lambda(fit, snap, points, truth, grid):
    """Pick the grid value minimising NMSE against known ground truth.

    Parameters
    ----------
    fit : callable
        ``fit(snap, lam) -> Estimate``.
    grid : sequence of float
        Candidate values; ties resolve to the larger value.

    Returns
    -------
    lam, estimate, nmse_db : the chosen value, its estimate and its NMSE.
    """
    from rsma_krr.evaluation import nmse

    best = None
    for lam in sorted(grid):
        est = fit(snap, lam)
        err = nmse(evaluate_field(est, points, "incident"), truth)
        if best is None or err <= best[2]:
            best = (lam, est, err)
    return best
