"""Spherical special functions.

Conventions
-----------
* Time dependence ``exp(-i w t)``; outgoing waves use the spherical Hankel
  function of the first kind, ``h_n = j_n + i y_n``.
* Spherical harmonics are complex, orthonormal on the unit sphere and carry
  the Condon-Shortley phase, so that ``Y_{n,-m} = (-1)^m conj(Y_{n,m})``.
  This is the convention of :func:`scipy.special.sph_harm_y`. Every Gram
  matrix and every estimate in this package is invariant to the choice, as
  long as it is used consistently.

Coefficient vectors are ordered by the flat index ``n**2 + n + m``
(zero-based), see :func:`order_index`.

All functions broadcast over numpy arrays.
"""
import numpy as np
from scipy import special

MAX_ORDER = 64

# below this |x| the closed forms of j_0 and its derivative lose accuracy
SMALL_ARG = 1e-4


def order_index(max_order):
    """Return the ``(n, m)`` arrays of all modes up to ``max_order``.

    Parameters
    ----------
    max_order : int

    Returns
    -------
    n, m : ndarray of int, shape ((max_order+1)**2,)
        Mode ``k`` has order ``n[k]`` and degree ``m[k]`` with
        ``k = n**2 + n + m``.
    """
    n = np.concatenate([np.full(2 * nu + 1, nu) for nu in range(max_order + 1)])
    m = np.concatenate([np.arange(-nu, nu + 1) for nu in range(max_order + 1)])
    return n, m


def num_coeffs(max_order):
    return (max_order + 1) ** 2


def _check_order(nu):
    nu = np.asarray(nu)
    if np.any(nu < 0) or np.any(nu > MAX_ORDER):
        raise ValueError(f"order must lie in [0, {MAX_ORDER}]")
    return nu


def sph_bessel_j(nu, x):
    """Spherical Bessel function of the first kind ``j_nu(x)``."""
    nu = _check_order(nu)
    return special.spherical_jn(nu, x)


def sph_bessel_j_deriv(nu, x):
    """Derivative ``j_nu'(x)``; ``j_0'(0) = 0`` and ``j_1'(0) = 1/3``."""
    nu = _check_order(nu)
    return special.spherical_jn(nu, x, derivative=True)


def sph_bessel_y(nu, x):
    nu = _check_order(nu)
    return special.spherical_yn(nu, x)


def sph_bessel_y_deriv(nu, x):
    nu = _check_order(nu)
    return special.spherical_yn(nu, x, derivative=True)


def _check_positive(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("spherical Hankel functions are singular for x <= 0")
    return x


def sph_hankel1(nu, x):
    """Spherical Hankel function of the first kind ``h_nu(x)``, ``x > 0``."""
    nu = _check_order(nu)
    x = _check_positive(x)
    return special.spherical_jn(nu, x) + 1j * special.spherical_yn(nu, x)


def sph_hankel1_deriv(nu, x):
    """Derivative ``h_nu'(x)``, ``x > 0``."""
    nu = _check_order(nu)
    x = _check_positive(x)
    return (special.spherical_jn(nu, x, derivative=True)
            + 1j * special.spherical_yn(nu, x, derivative=True))


def _series(w, coeffs):
    """Evaluate ``sum_k coeffs[k] * w**k`` by Horner's rule."""
    out = np.zeros_like(w)
    for c in coeffs[::-1]:
        out = out * w + c
    return out


# Taylor coefficients in w = z**2 of sin(z)/z and of d/dw [sin(sqrt w)/sqrt w]
_NTERMS = 14
_J0_W = np.array([(-1) ** k / special.factorial(2 * k + 1, exact=True)
                  for k in range(_NTERMS)], dtype=float)
_DJ0_W = np.array([(-1) ** (k + 1) * (k + 1) / special.factorial(2 * k + 3, exact=True)
                   for k in range(_NTERMS)], dtype=float)

# |w| below which the power series is used; 14 terms reach ~1e-17 at |w| = 1
_SERIES_W = 0.25


def sinc_of_square(w):
    """Return ``j_0(sqrt(w)) = sin(sqrt(w))/sqrt(w)`` for complex ``w``.

    The function is entire in ``w``, so the branch of the square root is
    irrelevant; the principal branch is used.
    """
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < _SERIES_W
    out = np.empty_like(w)
    out[small] = _series(w[small], _J0_W)
    z = np.sqrt(w[~small])
    out[~small] = np.sin(z) / z
    return out


def dsinc_of_square(w):
    """Return the derivative of :func:`sinc_of_square` with respect to ``w``.

    Equals ``-j_1(z) / (2 z)`` with ``z = sqrt(w)``; finite at ``w = 0``
    where it takes the value ``-1/6``.
    """
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < _SERIES_W
    out = np.empty_like(w)
    out[small] = _series(w[small], _DJ0_W)
    z = np.sqrt(w[~small])
    out[~small] = -(np.sin(z) - z * np.cos(z)) / (2 * z ** 3)
    return out


def sinc_sph_complex(z):
    """``j_0(z) = sin(z)/z`` for complex ``z`` with the removable singularity filled."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < SMALL_ARG
    out = np.empty_like(z)
    zs = z[small]
    out[small] = 1 - zs ** 2 / 6 + zs ** 4 / 120
    zl = z[~small]
    out[~small] = np.sin(zl) / zl
    return out


def unit_directions(points):
    """Split points of shape ``(..., 3)`` into radii and polar/azimuth angles."""
    points = np.asarray(points, dtype=float)
    r = np.linalg.norm(points, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_theta = np.clip(points[..., 2] / r, -1.0, 1.0)
    cos_theta = np.where(r > 0, cos_theta, 1.0)
    theta = np.arccos(cos_theta)
    phi = np.arctan2(points[..., 1], points[..., 0])
    return r, theta, phi


def sph_harmonic(nu, mu, direction):
    """Complex orthonormal spherical harmonic ``Y_{nu,mu}`` at ``direction``.

    ``direction`` need not be normalised; only its orientation is used.
    ``nu``/``mu`` broadcast against the leading shape of ``direction``.
    """
    nu = _check_order(nu)
    mu = np.asarray(mu)
    if np.any(np.abs(mu) > nu):
        raise ValueError("degree must satisfy |mu| <= nu")
    _, theta, phi = unit_directions(direction)
    return special.sph_harm_y(nu, mu, theta, phi)


def sph_harmonic_matrix(max_order, points):
    """Matrix ``[Y_k(p_i)]`` of shape ``(len(points), (max_order+1)**2)``."""
    n, m = order_index(max_order)
    _, theta, phi = unit_directions(np.atleast_2d(points))
    return special.sph_harm_y(n[None, :], m[None, :], theta[:, None], phi[:, None])
