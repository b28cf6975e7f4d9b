"""Kernel functions for the incident and scattered fields and their Gram matrices.

Incident-field kernels (Bessel, multidirectional) are functions of the
difference ``r - r'``; the source-region kernel models the field radiated by
sources uniformly distributed inside the rigid sphere. Normal derivatives are
taken with respect to the first argument along the outward radial direction.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from rsma_krr import special_fn as sf
from rsma_krr.geometry import DirectionGrid, MicArray

DEFAULT_SOUND_SPEED = 340.26


@dataclass(frozen=True)
class WaveContext:
    frequency: float
    sound_speed: float = DEFAULT_SOUND_SPEED

    def __post_init__(self):
        if self.frequency <= 0 or self.sound_speed <= 0:
            raise ValueError("frequency and sound speed must be positive")

    @property
    def wavenumber(self):
        return 2 * np.pi * self.frequency / self.sound_speed


@dataclass(frozen=True)
class BesselKernel:
    name = "bessel"


@dataclass(frozen=True)
class MultiDirectional:
    """Mixture of direction-biased sinc kernels over a fixed direction grid.

    Each term is ``j_0(sqrt(z^T z)) / C(zeta_q)`` with the unconjugated
    square of ``z = k (r - r') + i zeta_q d_q``. For large ``zeta_q`` the term
    tends to ``exp(-i k d_q . (r - r'))``, the correlation of a plane wave
    arriving from ``d_q`` under the ``exp(-i w t)`` convention, so the
    ``d_q`` are directions of arrival (pointing towards the sources).
    """

    grid: DirectionGrid
    gamma: np.ndarray = field(repr=False)
    zeta: np.ndarray = field(repr=False)
    name = "md"

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float).ravel()
        zeta = np.array(self.zeta, dtype=float).ravel()
        if gamma.shape != (self.grid.count,) or zeta.shape != (self.grid.count,):
            raise ValueError("gamma and zeta must have one entry per direction")
        if np.any(gamma < 0) or np.any(zeta < 0):
            raise ValueError("gamma and zeta must be non-negative")
        gamma.setflags(write=False)
        zeta.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "zeta", zeta)

    @classmethod
    def uniform(cls, grid, zeta=20.0):
        q = grid.count
        return cls(grid, np.full(q, 1 / q), np.full(q, float(zeta)))

    def with_params(self, gamma=None, zeta=None):
        return MultiDirectional(self.grid,
                                self.gamma if gamma is None else gamma,
                                self.zeta if zeta is None else zeta)


@dataclass(frozen=True)
class SourceRegion:
    """Correlation of point sources spread uniformly inside a sphere.

    ``weight_mode`` is ``"analytic"`` for the modal weights of a uniform
    source density, or ``"unit"`` for all weights equal to one (which makes
    the kernel span the truncated outgoing spherical-wave basis).
    """

    radius: float
    n_ext: int = 5
    weight_mode: str = "analytic"
    name = "sr"

    def __post_init__(self):
        if self.radius <= 0 or self.n_ext < 0:
            raise ValueError("need radius > 0 and n_ext >= 0")
        if self.weight_mode not in ("analytic", "unit"):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")


class GramPair(NamedTuple):
    K: np.ndarray
    dK_dn: np.ndarray


def _as_points(x):
    return np.asarray(x, dtype=float)


# ---------------------------------------------------------------- Bessel kernel

def bessel_kernel(r, rp, ctx):
    """``j_0(k |r - r'|)``; broadcasts over leading axes of ``r`` and ``rp``."""
    d = _as_points(r) - _as_points(rp)
    k = ctx.wavenumber
    return sf.sinc_of_square(k ** 2 * np.sum(d * d, axis=-1))


def _bessel_normal(r, rp, normal, ctx):
    d = _as_points(r) - _as_points(rp)
    k = ctx.wavenumber
    w = k ** 2 * np.sum(d * d, axis=-1)
    return sf.dsinc_of_square(w) * 2 * k ** 2 * np.sum(d * normal, axis=-1)


# --------------------------------------------------------- multidirectional

def md_normalizer(zeta):
    """``sinh(zeta)/zeta`` with the value 1 at ``zeta = 0``."""
    zeta = np.asarray(zeta, dtype=float)
    safe = np.where(zeta == 0, 1.0, zeta)
    return np.where(zeta == 0, 1.0, np.sinh(safe) / safe)


def _md_squares(d, ctx, directions, zeta):
    """Unconjugated ``z^T z`` with ``z = k d + i zeta_q d_q``, shape ``(..., Q)``."""
    k = ctx.wavenumber
    dist2 = k ** 2 * np.sum(d * d, axis=-1)[..., None]
    proj = k * d @ directions.T
    return dist2 + 2j * zeta * proj - zeta ** 2


# above this concentration the sinc/C(zeta) ratio is formed without overflow
_ZETA_SCALED = 30.0


def _md_ratio(w, zeta):
    """``j_0(sqrt w)/C(zeta)`` and ``(d/dw j_0(sqrt w))/C(zeta)`` for a column of zeta."""
    zeta = np.broadcast_to(zeta, w.shape)
    big = zeta > _ZETA_SCALED
    val = np.empty(w.shape, dtype=complex)
    dval = np.empty(w.shape, dtype=complex)
    norm = md_normalizer(zeta[~big])
    val[~big] = sf.sinc_of_square(w[~big]) / norm
    dval[~big] = sf.dsinc_of_square(w[~big]) / norm
    if np.any(big):
        s = np.sqrt(w[big])
        s = np.where(s.imag < 0, -s, s)  # even functions of s; take Im s >= 0
        z = zeta[big]
        E = np.exp(2j * s)
        F = np.exp(-1j * s - z) / -np.expm1(-2 * z)
        sin_c = 1j * (1 - E) * F * z  # sin(s) / C(zeta)
        cos_c = (1 + E) * F * z
        val[big] = sin_c / s
        dval[big] = -(sin_c - s * cos_c) / (2 * s ** 3)
    return val, dval


def md_components(r, rp, ctx, directions, zeta, normal=None):
    """Per-direction kernel terms ``j_0(sqrt(z_q^T z_q)) / C(zeta_q)``.

    Returns an array with a trailing axis of length ``Q``; if ``normal`` is
    given, also the normal derivative with respect to ``r`` of each term.
    """
    d = _as_points(r) - _as_points(rp)
    directions = np.asarray(directions, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    w = _md_squares(d, ctx, directions, zeta)
    vals, dvals = _md_ratio(w, zeta)
    if normal is None:
        return vals
    k = ctx.wavenumber
    # dw/dn = 2k z.n = 2k (k d.n + i zeta_q d_q.n)
    dn = np.sum(d * normal, axis=-1)[..., None]
    qn = np.asarray(normal, dtype=float) @ directions.T
    dw = 2 * k * (k * dn + 1j * zeta * qn)
    return vals, dvals * dw


def md_kernel(r, rp, ctx, params):
    comps = md_components(r, rp, ctx, params.grid.directions, params.zeta)
    return comps @ params.gamma


# ------------------------------------------------------------ source region

def sr_weight(nu, ctx, radius, mode="analytic"):
    """Modal weight of the source-region kernel.

    For a uniform source density in a ball of ``radius`` the weight is
    ``3k^2/(8 pi) [j_nu(kR)^2 - j_{nu-1}(kR) j_{nu+1}(kR)]`` with
    ``j_{-1}(x) = cos(x)/x``.
    """
    nu = np.asarray(nu)
    if mode == "unit":
        return np.ones(nu.shape)
    if mode != "analytic":
        raise ValueError(f"unknown weight mode {mode!r}")
    k = ctx.wavenumber
    x = k * radius
    jn = sf.sph_bessel_j(nu, x)
    jp = sf.sph_bessel_j(nu + 1, x)
    jm = np.where(nu == 0, np.cos(x) / x, sf.sph_bessel_j(np.maximum(nu - 1, 0), x))
    return 3 * k ** 2 / (8 * np.pi) * (jn ** 2 - jm * jp)


def sr_mode_weights(params, ctx):
    """Weights replicated per degree, in flat ``n**2 + n + m`` order."""
    n, _ = sf.order_index(params.n_ext)
    return sr_weight(n, ctx, params.radius, params.weight_mode)


def regular_basis(points, ctx, max_order):
    """Interior spherical wave functions ``j_n(k|r|) Y_nm(r/|r|)``."""
    points = np.atleast_2d(_as_points(points))
    n, _ = sf.order_index(max_order)
    r = np.linalg.norm(points, axis=1)
    radial = sf.sph_bessel_j(n[None, :], ctx.wavenumber * r[:, None])
    return radial * sf.sph_harmonic_matrix(max_order, points)


def _check_nonzero_radius(r):
    if np.any(r <= 0):
        raise ValueError("outgoing spherical waves are singular at the origin")


def radiating_basis(points, ctx, max_order):
    """Exterior spherical wave functions ``h_n(k|r|) Y_nm(r/|r|)``."""
    points = np.atleast_2d(_as_points(points))
    n, _ = sf.order_index(max_order)
    r = np.linalg.norm(points, axis=1)
    _check_nonzero_radius(r)
    radial = sf.sph_hankel1(n[None, :], ctx.wavenumber * r[:, None])
    return radial * sf.sph_harmonic_matrix(max_order, points)


def radiating_basis_radial_deriv(points, ctx, max_order):
    """Radial derivative ``k h_n'(k|r|) Y_nm(r/|r|)`` of :func:`radiating_basis`."""
    points = np.atleast_2d(_as_points(points))
    n, _ = sf.order_index(max_order)
    r = np.linalg.norm(points, axis=1)
    _check_nonzero_radius(r)
    k = ctx.wavenumber
    radial = k * sf.sph_hankel1_deriv(n[None, :], k * r[:, None])
    return radial * sf.sph_harmonic_matrix(max_order, points)


def sr_kernel(r, rp, ctx, params):
    """Source-region kernel between two single points (or matching point lists)."""
    r = np.atleast_2d(_as_points(r))
    rp = np.atleast_2d(_as_points(rp))
    xi = sr_mode_weights(params, ctx)
    a = radiating_basis(r, ctx, params.n_ext)
    b = radiating_basis(rp, ctx, params.n_ext)
    out = np.sum(a * xi * b.conj(), axis=-1)
    return out[0] if out.shape == (1,) else out


# ------------------------------------------------------------------ matrices

def kernel_matrix(spec, points, centers, ctx):
    """``[kappa(points_i, centers_m)]`` of shape ``(P, M)``."""
    points = np.atleast_2d(_as_points(points))
    centers = np.atleast_2d(_as_points(centers))
    if isinstance(spec, BesselKernel):
        return bessel_kernel(points[:, None], centers[None], ctx)
    if isinstance(spec, MultiDirectional):
        return md_kernel(points[:, None], centers[None], ctx, spec)
    if isinstance(spec, SourceRegion):
        xi = sr_mode_weights(spec, ctx)
        return (radiating_basis(points, ctx, spec.n_ext) * xi) @ \
            radiating_basis(centers, ctx, spec.n_ext).conj().T
    raise TypeError(f"unsupported kernel {spec!r}")


def kernel_normal_matrix(spec, points, centers, ctx):
    """Radial derivative of the kernel in its first argument at ``points``."""
    points = np.atleast_2d(_as_points(points))
    centers = np.atleast_2d(_as_points(centers))
    r = np.linalg.norm(points, axis=1)
    if np.any(r <= 0):
        raise ValueError("normal direction undefined at the origin")
    normals = points / r[:, None]
    if isinstance(spec, BesselKernel):
        return _bessel_normal(points[:, None], centers[None], normals[:, None], ctx)
    if isinstance(spec, MultiDirectional):
        _, dvals = md_components(points[:, None], centers[None], ctx,
                                 spec.grid.directions, spec.zeta, normal=normals[:, None])
        return dvals @ spec.gamma
    if isinstance(spec, SourceRegion):
        xi = sr_mode_weights(spec, ctx)
        return (radiating_basis_radial_deriv(points, ctx, spec.n_ext) * xi) @ \
            radiating_basis(centers, ctx, spec.n_ext).conj().T
    raise TypeError(f"unsupported kernel {spec!r}")


def gram(spec, array: MicArray, ctx) -> GramPair:
    """Gram matrix and its normal-derivative counterpart over the microphones."""
    pos = array.positions
    if np.any(np.linalg.norm(pos, axis=1) <= 0):
        raise ValueError("a microphone sits at the origin")
    return GramPair(kernel_matrix(spec, pos, pos, ctx),
                    kernel_normal_matrix(spec, pos, pos, ctx))
