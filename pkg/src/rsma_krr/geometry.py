"""Point sets: microphone layouts, bias directions and evaluation regions."""
import csv
from dataclasses import dataclass, field

import numpy as np

from rsma_krr._tdesign_data import TDESIGN_60

_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class MicArray:
    """Microphones flush-mounted on a rigid sphere centred at the origin."""

    radius: float
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.radius <= 0:
            raise ValueError("array radius must be positive")
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 1:
            raise ValueError("positions must have shape (M, 3) with M >= 1")
        norms = np.linalg.norm(pos, axis=1)
        if np.any(np.abs(norms - self.radius) > 1e-9 * self.radius):
            raise ValueError("all microphones must lie on the sphere surface")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def num_mics(self):
        return len(self.positions)

    @property
    def normals(self):
        """Outward unit normals at the microphones."""
        return self.positions / self.radius

    def subset(self, idx):
        return MicArray(self.radius, self.positions[np.asarray(idx)])

    @classmethod
    def from_unit_vectors(cls, directions, radius):
        directions = np.asarray(directions, dtype=float)
        directions = directions / np.linalg.norm(directions, axis=1, keepdims=True)
        return cls(radius, radius * directions)


def tdesign_60():
    """60-node spherical 10-design on the unit sphere (scale with ``radius``)."""
    return MicArray(1.0, np.array(TDESIGN_60))


def default_array(radius=0.05):
    return MicArray.from_unit_vectors(np.array(TDESIGN_60), radius)


def load_array_csv(path, radius):
    """Read unit vectors from a CSV with header ``x,y,z`` and scale to ``radius``."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["x", "y", "z"]:
            raise ValueError(f"{path}: header must be 'x,y,z'")
        rows = [[float(r[c]) for c in reader.fieldnames] for r in reader]
    if not rows:
        raise ValueError(f"{path}: no microphone rows")
    return MicArray.from_unit_vectors(np.array(rows), radius)


@dataclass(frozen=True)
class DirectionGrid:
    directions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1) > 1e-12):
            raise ValueError("directions must be unit vectors")
        diff = np.linalg.norm(d[:, None] - d[None], axis=-1) + np.eye(len(d))
        if np.any(diff < 1e-9):
            raise ValueError("duplicate directions")
        d.setflags(write=False)
        object.__setattr__(self, "directions", d)

    @property
    def count(self):
        return len(self.directions)


def lebedev_order7():
    """26-node Lebedev grid, exact for polynomials of degree <= 7.

    Nodes are the 6 axis directions, the 12 edge midpoints and the 8 cube
    corners of the octahedral group; weights sum to one.
    """
    axes = [s * e for e in np.eye(3) for s in (1.0, -1.0)]
    a = 1 / np.sqrt(2)
    edges = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        for si in (1.0, -1.0):
            for sj in (1.0, -1.0):
                v = np.zeros(3)
                v[i], v[j] = si * a, sj * a
                edges.append(v)
    b = 1 / np.sqrt(3)
    corners = [np.array([sx, sy, sz]) * b
               for sx in (1.0, -1.0) for sy in (1.0, -1.0) for sz in (1.0, -1.0)]
    dirs = np.array(axes + edges + corners)
    weights = np.concatenate([np.full(6, 1 / 21), np.full(12, 4 / 105), np.full(8, 9 / 280)])
    return DirectionGrid(dirs, weights)


def sample_ball(radius, n_points, rng_seed):
    """Uniform samples in a ball centred at the origin.

    Radii follow ``radius * u**(1/3)``; directions are normalised Gaussian
    vectors. The generator is numpy's PCG64 seeded with ``rng_seed``.
    """
    if radius <= 0 or n_points < 1:
        raise ValueError("need radius > 0 and n_points >= 1")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    g = rng.standard_normal((n_points, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n_points) ** (1 / 3)
    return g * r[:, None]


def _axis_coords(extent, spacing, center):
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    n = int(np.floor(extent / spacing + 1e-9)) + 1
    return center + (np.arange(n) - (n - 1) / 2) * spacing


def grid_box(extents, spacing, center=(0.0, 0.0, 0.0)):
    """Regular lattice in a box, both end points included per axis."""
    axes = [_axis_coords(e, spacing, c) for e, c in zip(extents, center)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def grid_plane(axes=("x", "y"), extent=(0.5, 0.5), spacing=0.01, fixed=0.0, center=(0.0, 0.0)):
    """Regular lattice on a coordinate plane; the remaining coordinate is ``fixed``."""
    i, j = (_AXES[a] for a in axes)
    if i == j:
        raise ValueError("plane axes must differ")
    u = _axis_coords(extent[0], spacing, center[0])
    v = _axis_coords(extent[1], spacing, center[1])
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = np.full((uu.size, 3), float(fixed))
    pts[:, i] = uu.ravel()
    pts[:, j] = vv.ravel()
    return pts


def exterior_points(points, radius):
    """Drop points inside or on the scatterer; return ``(kept, n_removed)``."""
    points = np.asarray(points, dtype=float)
    keep = np.linalg.norm(points, axis=1) > radius
    return points[keep], int(np.count_nonzero(~keep))


@dataclass(frozen=True)
class Ball:
    radius: float = 0.175
    n_points: int = 1000
    rng_seed: int = 0

    def points(self):
        return sample_ball(self.radius, self.n_points, self.rng_seed)


@dataclass(frozen=True)
class BoxGrid:
    extents: tuple = (0.35, 0.35, 0.20)
    spacing: float = 0.05
    center: tuple = (0.0, 0.0, 0.0)

    def points(self):
        return grid_box(self.extents, self.spacing, self.center)


@dataclass(frozen=True)
class PlaneGrid:
    axes: tuple = ("x", "y")
    extent: tuple = (0.5, 0.5)
    spacing: float = 0.01
    fixed: float = 0.0

    def points(self):
        return grid_plane(self.axes, self.extent, self.spacing, self.fixed)
