"""Reference implementations that share no code with the package.

Special functions come from mpmath at 40 significant digits; they are used
only as ground truth in tests.
"""
import mpmath as mp
import numpy as np

mp.mp.dps = 40


def sph_jn(n, x):
    x = mp.mpf(x)
    return mp.sqrt(mp.pi / (2 * x)) * mp.besselj(n + mp.mpf(1) / 2, x)


def sph_yn(n, x):
    x = mp.mpf(x)
    return mp.sqrt(mp.pi / (2 * x)) * mp.bessely(n + mp.mpf(1) / 2, x)


def sph_jn_deriv(n, x):
    return mp.diff(lambda t: sph_jn(n, t), mp.mpf(x))


def sph_hn(n, x):
    return sph_jn(n, x) + 1j * sph_yn(n, x)


def sph_hn_deriv(n, x):
    return mp.diff(lambda t: sph_jn(n, t), mp.mpf(x)) + 1j * mp.diff(lambda t: sph_yn(n, t), mp.mpf(x))


def ylm(n, m, theta, phi):
    """Orthonormal complex harmonic with Condon-Shortley phase, built from
    the associated Legendre function without the phase factor."""
    am = abs(m)
    x = mp.cos(mp.mpf(theta))
    # P_n^m(x) without (-1)^m: (1-x^2)^{m/2} d^m/dx^m P_n(x)
    p = (1 - x ** 2) ** (mp.mpf(am) / 2) * mp.diff(lambda t: mp.legendre(n, t), x, am)
    norm = mp.sqrt((2 * n + 1) / (4 * mp.pi) * mp.factorial(n - am) / mp.factorial(n + am))
    val = norm * p * mp.expj(am * mp.mpf(phi))
    if m >= 0:
        return complex((-1) ** am * val)
    return complex(mp.conj((-1) ** am * val) * (-1) ** am)


def green(r, rs, k):
    d = np.linalg.norm(np.asarray(r, float) - np.asarray(rs, float), axis=-1)
    return np.exp(1j * k * d) / (4 * np.pi * d)


def mp_solve(A, b, dps=40):
    """Linear solve carried out in extended precision on float64 inputs."""
    with mp.workdps(dps):
        Am = mp.matrix([[mp.mpc(complex(v)) for v in row] for row in np.asarray(A)])
        bm = mp.matrix([mp.mpc(complex(v)) for v in np.asarray(b)])
        x = mp.lu_solve(Am, bm)
        return np.array([complex(v) for v in x])


def _mp(X):
    X = np.atleast_2d(np.asarray(X))
    return mp.matrix([[mp.mpc(complex(v)) for v in row] for row in X])


def _H(X):
    return X.transpose_conj()


def _blocks(rows):
    """Assemble an mpmath block matrix from a nested list of mpmath matrices."""
    heights = [r[0].rows for r in rows]
    widths = [b.cols for b in rows[0]]
    out = mp.zeros(sum(heights), sum(widths))
    i0 = 0
    for r, h in zip(rows, heights):
        j0 = 0
        for b, w in zip(r, widths):
            for i in range(h):
                for j in range(w):
                    out[i0 + i, j0 + j] = b[i, j]
            j0 += w
        i0 += h
    return out


def _solve_head(M, rhs, count):
    x = mp.lu_solve(M, rhs)
    return np.array([complex(x[i]) for i in range(count)])


def joint_krr_alpha(K, Psi, W, s, lam1, lam2, dps=50):
    """Incident weights of ``min ||s - K a - Psi u||^2 + lam1 a^H K a + lam2 u^H W u``
    from the stacked normal equations in (a, u), formed and solved in extended precision."""
    with mp.workdps(dps):
        K, Psi, W, s = _mp(K), _mp(Psi), _mp(W), _mp(s).T
        M = _blocks([[_H(K) * K + lam1 * K, _H(K) * Psi],
                     [_H(Psi) * K, _H(Psi) * Psi + lam2 * W]])
        rhs = _blocks([[_H(K) * s], [_H(Psi) * s]])
        return _solve_head(M, rhs, K.cols)


def kkt_boundary_alpha(Ki, Ks, dKi, dKs, s, lam1, lam2, dps=50):
    """Incident weights of the constrained problem
    ``min ||s - Ki a - Ks b||^2 + lam1 a^H Ki a + lam2 b^H Ks b``
    subject to ``dKs^H (dKi a + dKs b) = 0``, by a dense KKT solve in
    extended precision."""
    with mp.workdps(dps):
        Ki, Ks, dKi, dKs, s = _mp(Ki), _mp(Ks), _mp(dKi), _mp(dKs), _mp(s).T
        Mmix, Msct = _H(dKs) * dKi, _H(dKs) * dKs
        n = Mmix.rows
        M = _blocks([[_H(Ki) * Ki + lam1 * Ki, _H(Ki) * Ks, _H(Mmix)],
                     [_H(Ks) * Ki, _H(Ks) * Ks + lam2 * Ks, _H(Msct)],
                     [Mmix, Msct, mp.zeros(n, n)]])
        rhs = _blocks([[_H(Ki) * s], [_H(Ks) * s], [mp.zeros(n, 1)]])
        return _solve_head(M, rhs, Ki.cols)


def farthest_point_subset(points, count):
    """Greedy farthest-point selection starting from the first point."""
    chosen = [0]
    d = np.linalg.norm(points - points[0], axis=1)
    while len(chosen) < count:
        i = int(np.argmax(d))
        chosen.append(i)
        d = np.minimum(d, np.linalg.norm(points - points[i], axis=1))
    return np.array(chosen)
