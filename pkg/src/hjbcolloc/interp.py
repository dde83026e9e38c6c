"""Gram systems, kernel interpolants and the derivative operator matrices.

The derivative matrices let one read nodal derivatives of an interpolant
directly from matrix-vector products: with ``D_l = G_l A1 - A1 G_l`` the
vector ``D_l @ alpha`` holds the l-th partial derivative of the interpolant
at every collocation node, and the analogous second-order combinations of
``A2`` produce Hessian entries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .geometry import CollocationSet, equispaced_grid
from .kernels import WendlandKernel

# Escalating diagonal jitter tried when the Cholesky factorization fails.
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class FactorizationError(RuntimeError):
    """Cholesky failed even at the largest jitter; carries the last pivot info."""


@dataclass
class GramSystem:
    """Assembled kernel matrices for a collocation set.

    A   : Gram matrix {Phi(x_i - x_j)}, unit diagonal.
    A1  : {phi1(|x_i - x_j|)}; A2 : {phi2(|x_i - x_j|)}.
    G   : per-axis node coordinate vectors (diagonals of the G_l matrices).
    """

    kernel: WendlandKernel
    colloc: CollocationSet
    A: np.ndarray
    A1: np.ndarray
    A2: np.ndarray
    G: list
    jitter: float
    _factor: tuple = field(repr=False, default=None)
    _first_deriv: list = field(repr=False, default=None)
    _second_deriv: dict = field(repr=False, default=None)

    @property
    def n_points(self) -> int:
        return self.colloc.n_points

    @property
    def dim(self) -> int:
        return self.colloc.dim

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """A^{-1} rhs through the (possibly jittered) Cholesky factor."""
        return cho_solve(self._factor, np.asarray(rhs, dtype=float))

    # -- nodal derivative operators -----------------------------------------

    def first_derivative_matrix(self, axis: int) -> np.ndarray:
        """D_l with (D_l alpha)_i = d/dx_l of the expansion at node i."""
        if not 0 <= axis < self.dim:
            raise IndexError(f"axis {axis} out of range for d={self.dim}")
        if self._first_deriv[axis] is None:
            g = self.G[axis]
            self._first_deriv[axis] = self.A1 * (g[:, None] - g[None, :])
        return self._first_deriv[axis]

    def second_derivative_matrix(self, m: int, ell: int) -> np.ndarray:
        """S_ml with (S_ml alpha)_i = d^2/dx_m dx_l of the expansion at node i."""
        if not (0 <= m < self.dim and 0 <= ell < self.dim):
            raise IndexError(f"axes ({m},{ell}) out of range for d={self.dim}")
        key = (min(m, ell), max(m, ell))
        if key not in self._second_deriv:
            gm = self.G[key[0]]
            gl = self.G[key[1]]
            diff_m = gm[:, None] - gm[None, :]
            diff_l = gl[:, None] - gl[None, :]
            mat = self.A2 * diff_m * diff_l
            if key[0] == key[1]:
                mat = mat + self.A1
            self._second_deriv[key] = mat
        return self._second_deriv[key]


def assemble(kernel: WendlandKernel, colloc: CollocationSet) -> GramSystem:
    """Build A, A1, A2 and the Cholesky factorization of A.

    Jitter is added to the diagonal only if the clean factorization fails,
    with a warning; a FactorizationError is raised if even the largest
    jitter does not help.
    """
    if kernel.d != colloc.dim:
        raise ValueError(
            f"kernel dimension {kernel.d} != collocation dimension {colloc.dim}"
        )
    pts = colloc.points
    dist = cdist(pts, pts)
    A = kernel.phi(dist)
    A1 = kernel.phi1(dist)
    A2 = kernel.phi2(dist)
    gs = GramSystem(
        kernel=kernel,
        colloc=colloc,
        A=A,
        A1=A1,
        A2=A2,
        G=[pts[:, l].copy() for l in range(colloc.dim)],
        jitter=0.0,
        _first_deriv=[None] * colloc.dim,
        _second_deriv={},
    )
    last_err = None
    for jitter in JITTER_LADDER:
        try:
            gs._factor = cho_factor(A + jitter * np.eye(A.shape[0]), lower=True)
            gs.jitter = jitter
            if jitter > 0.0:
                warnings.warn(
                    f"Gram matrix needed diagonal jitter {jitter:g} to factorize",
                    RuntimeWarning,
                    stacklevel=2,
                )
            return gs
        except np.linalg.LinAlgError as err:  # pragma: no cover - rare path
            last_err = err
    raise FactorizationError(
        f"Cholesky failed for N={colloc.n_points} even with jitter "
        f"{JITTER_LADDER[-1]:g}: {last_err}"
    )


@dataclass
class Interpolant:
    """Kernel expansion sum_j alpha_j Phi(x - x_j) matching given nodal values."""

    gram: GramSystem
    alpha: np.ndarray

    def _prep(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.gram.dim:
            raise ValueError(f"points must have dimension {self.gram.dim}")
        return x, single

    def eval(self, x):
        x, single = self._prep(x)
        vals = self.gram.kernel.phi(cdist(x, self.gram.colloc.points)) @ self.alpha
        return float(vals[0]) if single else vals

    def eval_grad(self, x):
        x, single = self._prep(x)
        diff = x[:, None, :] - self.gram.colloc.points[None, :, :]  # (P, N, d)
        w = self.gram.kernel.phi1(np.linalg.norm(diff, axis=2)) * self.alpha
        grads = np.einsum("pn,pnd->pd", w, diff)
        return grads[0] if single else grads

    def eval_hess(self, x):
        x, single = self._prep(x)
        pts = self.gram.colloc.points
        d = self.gram.dim
        diff = x[:, None, :] - pts[None, :, :]
        r = np.linalg.norm(diff, axis=2)
        w1 = self.gram.kernel.phi1(r) * self.alpha
        w2 = self.gram.kernel.phi2(r) * self.alpha
        hess = np.einsum("pn,pnm,pnl->pml", w2, diff, diff)
        hess += np.einsum("pn,ml->pml", w1, np.eye(d))
        return hess[0] if single else hess


def interpolate(gs: GramSystem, values) -> Interpolant:
    """Interpolant of the given nodal values on the collocation set."""
    values = np.asarray(values, dtype=float)
    if values.shape != (gs.n_points,):
        raise ValueError(f"expected {gs.n_points} nodal values")
    return Interpolant(gram=gs, alpha=gs.solve(values))


def drift_matrix(gs: GramSystem, b_diag, axis: int) -> np.ndarray:
    """Q_l (G_l A1 - A1 G_l) with Q_l = diag(b values at the nodes)."""
    b_diag = np.asarray(b_diag, dtype=float)
    return b_diag[:, None] * gs.first_derivative_matrix(axis)


def diffusion_matrix(gs: GramSystem, a_diag, axes: tuple[int, int]) -> np.ndarray:
    """Q_ml times the second-order operator combination for the axis pair."""
    a_diag = np.asarray(a_diag, dtype=float)
    return a_diag[:, None] * gs.second_derivative_matrix(*axes)


def convergence_probe(kernel, box_radius, n_list, func, grad=None, hess=None,
                      probe_refine: int = 10):
    """Sup-norm interpolation errors for derivative orders 0..2 over a grid sweep.

    ``func`` maps (P, d) points to values; ``grad`` and ``hess`` are optional
    analytic derivatives with matching batch signatures.  Returns one dict per
    N with the sup errors over a probe lattice refined ``probe_refine``-fold
    per axis relative to the collocation grid.
    """
    rows = []
    for n_points in n_list:
        colloc = equispaced_grid(kernel.d, n_points, box_radius)
        gs = assemble(kernel, colloc)
        ip = interpolate(gs, func(colloc.points))
        per_axis = round(n_points ** (1.0 / kernel.d))
        axis = np.linspace(-box_radius * (1 - 1e-9), box_radius * (1 - 1e-9),
                           probe_refine * per_axis + 1)
        if kernel.d == 1:
            probes = axis[:, None]
        else:
            mesh = np.meshgrid(*([axis] * kernel.d), indexing="ij")
            probes = np.stack([m.ravel() for m in mesh], axis=1)
        row = {
            "N": n_points,
            "delta_x": colloc.fill_distance,
            "err0": float(np.max(np.abs(func(probes) - ip.eval(probes)))),
        }
        if grad is not None:
            row["err1"] = float(np.max(np.abs(grad(probes) - ip.eval_grad(probes))))
        if hess is not None:
            row["err2"] = float(np.max(np.abs(hess(probes) - ip.eval_hess(probes))))
        rows.append(row)
    return rows
