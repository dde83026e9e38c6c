"""Collocation grids, quasi-random evaluation points and fill distance."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import ceil

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

# Grid endpoints are nudged inward by this relative amount so that the
# collocation set lies strictly inside the open box (-R, R)^d.
BOUNDARY_NUDGE = 1e-9

SOBOL_MAX_DIM = 8


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class CollocationSet:
    """Pairwise-distinct points inside (-R, R)^d with fill-distance metadata."""

    points: np.ndarray  # (N, d)
    dim: int
    box_radius: float
    fill_distance: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise GeometryError("points must be an (N, d) array")
        if pts.shape[0] == 0:
            raise GeometryError("empty collocation set")
        if np.any(np.abs(pts) >= self.box_radius):
            raise GeometryError("points must lie strictly inside [-R, R]^d")
        if pts.shape[0] > 1:
            tree = cKDTree(pts)
            dmin, _ = tree.query(pts, k=2)
            if np.min(dmin[:, 1]) <= 0.0:
                raise GeometryError("collocation points must be pairwise distinct")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_n = T."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if self.horizon <= 0 or self.n_steps < 1:
            raise GeometryError("need horizon > 0 and n_steps >= 1")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


def _per_axis_count(d: int, n_points: int) -> int:
    if d == 1:
        return n_points
    root = round(n_points ** (1.0 / d))
    # guard against float root-off-by-one
    for cand in (root - 1, root, root + 1):
        if cand > 0 and cand**d == n_points:
            return cand
    raise GeometryError(
        f"N={n_points} is not a perfect {d}-th power; tensor grids in d={d} "
        "need a per-axis count"
    )


def equispaced_grid(d: int, n_points: int, box_radius: float) -> CollocationSet:
    """Tensor grid of equispaced points on [-R, R]^d, nudged strictly inside.

    ``n_points`` is the total point count; in d > 1 it must be a perfect
    d-th power.
    """
    if d not in (1, 2, 3):
        raise GeometryError("equispaced grids support d in {1, 2, 3}")
    if n_points < 2:
        raise GeometryError("need at least 2 points")
    if box_radius <= 0:
        raise GeometryError("box radius must be positive")
    per_axis = _per_axis_count(d, n_points)
    inner = box_radius * (1.0 - BOUNDARY_NUDGE)
    axis = np.linspace(-inner, inner, per_axis)
    if d == 1:
        pts = axis[:, None]
    else:
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    return CollocationSet(
        points=pts,
        dim=d,
        box_radius=box_radius,
        fill_distance=fill_distance(pts, box_radius),
    )


def scaled_radius(d: int, n_points: int, tau: int) -> float:
    """Box radius R_d = gamma_d * N^(1/d - 1/(d + 2*tau - 3))."""
    gammas = {1: 0.25, 2: 0.2}
    if d not in gammas:
        raise GeometryError("scaled_radius is defined for d in {1, 2}")
    if n_points < 1 or tau < 2:
        raise GeometryError("need N >= 1 and tau >= 2")
    return gammas[d] * n_points ** (1.0 / d - 1.0 / (d + 2 * tau - 3))


def fill_distance(points, box_radius: float, probes_per_axis: int | None = None) -> float:
    """Largest distance from the box to its nearest collocation point.

    Estimated on a probe lattice over [-R, R]^d (at least 4x the per-axis
    collocation resolution).  This is a lower bound of the true supremum;
    the lattice is fine enough for the tolerances used in tests.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise GeometryError("empty point set")
    d = pts.shape[1]
    if probes_per_axis is None:
        per_axis = ceil(pts.shape[0] ** (1.0 / d))
        probes_per_axis = max(4 * per_axis + 1, 41)
    axis = np.linspace(-box_radius, box_radius, probes_per_axis)
    if d == 1:
        probes = axis[:, None]
    else:
        mesh = np.meshgrid(*([axis] * d), indexing="ij")
        probes = np.stack([m.ravel() for m in mesh], axis=1)
    dists, _ = cKDTree(pts).query(probes)
    return float(np.max(dists))


def sobol_points(d: int, count: int) -> np.ndarray:
    """First ``count`` points of the unscrambled Sobol sequence on [-1, 1]^d.

    The all-zeros initial point of the sequence is skipped, so the first
    point returned is the conventional (0.5, ..., 0.5) mapped to the origin.
    Deterministic across runs.
    """
    if d < 1 or d > SOBOL_MAX_DIM:
        raise GeometryError(f"sobol_points supports 1 <= d <= {SOBOL_MAX_DIM}")
    if count < 1:
        raise GeometryError("count must be positive")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        gen = qmc.Sobol(d=d, scramble=False)
        gen.fast_forward(1)
        unit = gen.random(count)
    return 2.0 * unit - 1.0
