"""Forward model: point sources in free field observed by a rigid spherical array."""
from dataclasses import dataclass

import numpy as np

from rsma_krr import special_fn as sf
from rsma_krr.estimators import PressureSnapshot, SwfCoefficients, rigid_sphere_matrix


@dataclass(frozen=True)
class PointSource:
    position: tuple
    amplitude: complex = 1.0


@dataclass(frozen=True)
class SourceScene:
    sources: tuple

    @classmethod
    def single(cls, position=(3.0, 0.0, 0.0), amplitude=1.0):
        return cls((PointSource(tuple(position), amplitude),))

    def positions(self):
        return np.array([src.position for src in self.sources], dtype=float)


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: float = 20.0
    rng_seed: int = 0


def greens_function(r, rs, ctx):
    """Free-field Green's function ``exp(ik|r - rs|) / (4 pi |r - rs|)``."""
    dist = np.linalg.norm(np.asarray(r, float) - np.asarray(rs, float), axis=-1)
    if np.any(dist == 0):
        raise ValueError("field point coincides with the source")
    k = ctx.wavenumber
    return np.exp(1j * k * dist) / (4 * np.pi * dist)


def point_source_swf_coeffs(rs, ctx, order, amplitude=1.0):
    """Interior expansion of a unit point source at ``rs``.

    ``G(r|rs) = sum_nm i k h_n(k|rs|) conj(Y_nm(rs)) j_n(k|r|) Y_nm(r)``
    for ``|r| < |rs|``.
    """
    rs = np.asarray(rs, dtype=float)
    dist = np.linalg.norm(rs)
    if dist <= 0:
        raise ValueError("source must not sit at the expansion origin")
    n, _ = sf.order_index(order)
    k = ctx.wavenumber
    y = sf.sph_harmonic_matrix(order, rs[None])[0]
    return SwfCoefficients(order, amplitude * 1j * k * sf.sph_hankel1(n, k * dist) * y.conj())


def scene_swf_coeffs(scene, ctx, order):
    total = None
    for src in scene.sources:
        c = point_source_swf_coeffs(src.position, ctx, order, src.amplitude)
        total = c if total is None else total + c
    return total


def rigid_sphere_pressures(scene, array, ctx, order=50):
    """Total pressure on the rigid sphere produced by the scene's sources."""
    coeffs = scene_swf_coeffs(scene, ctx, order)
    C = rigid_sphere_matrix(array, ctx, order)
    return PressureSnapshot(ctx, array, C @ coeffs.coeffs)


def add_noise(snap, spec):
    """Add circular complex Gaussian noise at ``spec.snr_db`` (``inf`` disables it)."""
    if spec is None or np.isinf(spec.snr_db):
        return snap
    s = snap.s
    var = np.mean(np.abs(s) ** 2) * 10 ** (-spec.snr_db / 10)
    rng = np.random.Generator(np.random.PCG64(spec.rng_seed))
    noise = rng.standard_normal((len(s), 2)) @ np.array([1, 1j])
    return snap.with_pressures(s + np.sqrt(var / 2) * noise)


def incident_truth(scene, points, ctx):
    """Free-field pressure of the scene at ``points`` (the estimation target)."""
    points = np.atleast_2d(np.asarray(points, float))
    out = np.zeros(len(points), dtype=complex)
    for src in scene.sources:
        out += src.amplitude * greens_function(points, np.asarray(src.position, float), ctx)
    return out
