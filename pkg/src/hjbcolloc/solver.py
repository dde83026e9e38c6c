"""Backward explicit-Euler schemes for fully nonlinear terminal value problems.

Two schemes are provided for
    -dv/dt + F(t, x, v, Dv, D^2v) = 0,   v(T, .) = f:

* the interpolation scheme: nodal values are stepped backward and the
  nonlinearity is evaluated through the kernel interpolant of the current
  nodal vector (spatial derivatives through the Gram derivative operators or
  through direct kernel sums, depending on how F is encoded);
* the regression scheme: each step fits an l1-budgeted kernel expansion to
  the nonlinearity values at the nodes, and the value function is the
  terminal fit minus the telescoped sum of step fits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import l1regress
from .geometry import CollocationSet, TimeGrid
from .interp import GramSystem, Interpolant
from .kernels import WendlandKernel


class SchemeError(RuntimeError):
    pass


@dataclass
class GeneralF:
    """Nonlinearity given directly as F(t, x, z, p, X), vectorized over nodes.

    ``func(t, points (N,d), z (N,), p (N,d), X (N,d,d)) -> (N,)``.
    """

    func: Callable

    def evaluate(self, t, points, z, p, X):
        return np.asarray(self.func(t, points, z, p, X), dtype=float)


@dataclass
class ControlForm:
    """Nonlinearity sup_pi H(t, x, z, b(x,pi)^T p, tr(a(x,pi) X)).

    ``drift(points, pi) -> (N, d)`` and ``diffusion(points, pi) -> (N, d, d)``
    define the contraction for each control; ``hamiltonian`` maps
    (t, points, z, drift_term, diffusion_term) to (N,) values.  The supremum
    is an exhaustive maximum over ``controls`` when that is a finite list,
    or delegated to ``maximizer(t, points, z, p, X) -> (N,)`` when the
    optimization has a closed form.
    """

    hamiltonian: Callable = None
    drift: Callable = None
    diffusion: Callable = None
    controls: Sequence = None
    maximizer: Callable = None

    def __post_init__(self):
        if self.maximizer is None and (
            self.controls is None or self.hamiltonian is None
        ):
            raise ValueError("need either a maximizer or (controls, hamiltonian)")

    def evaluate(self, t, points, z, p, X):
        """sup over controls, from raw derivative values at the points."""
        if self.maximizer is not None:
            return np.asarray(self.maximizer(t, points, z, p, X), dtype=float)
        best = None
        for pi in self.controls:
            b = np.asarray(self.drift(points, pi), dtype=float)
            a = np.asarray(self.diffusion(points, pi), dtype=float)
            drift_term = np.einsum("nd,nd->n", b, p)
            diff_term = np.einsum("nab,nab->n", a, X)
            val = np.asarray(self.hamiltonian(t, points, z, drift_term, diff_term))
            best = val if best is None else np.maximum(best, val)
        return best


@dataclass
class HjbProblem:
    """Terminal value problem data: horizon, terminal function, nonlinearity."""

    dim: int
    horizon: float
    terminal: Callable  # (P, d) points -> (P,) values
    nonlinearity: GeneralF | ControlForm

    def ellipticity_spot_check(self, rng=None, samples: int = 20,
                               tol: float = 1e-9) -> bool:
        """Degenerate ellipticity: F must not increase when X grows in PSD order."""
        rng = rng or np.random.default_rng(0)
        d = self.dim
        for _ in range(samples):
            t = rng.uniform(0, self.horizon)
            x = rng.uniform(-1, 1, size=(1, d))
            z = np.array([rng.normal()])
            p = rng.normal(size=(1, d))
            base = rng.normal(size=(d, d))
            X = (base + base.T)[None]
            bump = rng.normal(size=(d, d))
            E = (bump @ bump.T)[None]
            f_lo = self.nonlinearity.evaluate(t, x, z, p, X + E)[0]
            f_hi = self.nonlinearity.evaluate(t, x, z, p, X)[0]
            if f_lo > f_hi + tol:
                return False
        return True


# -- interpolation scheme ----------------------------------------------------


@dataclass
class InterpHistory:
    """Nodal values of the interpolation scheme at every time grid point."""

    gram: GramSystem
    tgrid: TimeGrid
    values: np.ndarray  # (n+1, N), row k = nodal vector at t_k
    alphas: np.ndarray  # (n+1, N), row k = A^{-1} values[k]

    def interpolant(self, k: int) -> Interpolant:
        return Interpolant(gram=self.gram, alpha=self.alphas[k])

    def eval(self, k: int, x):
        return self.interpolant(k).eval(x)

    def eval_grad(self, k: int, x):
        return self.interpolant(k).eval_grad(x)

    def eval_hess(self, k: int, x):
        return self.interpolant(k).eval_hess(x)

    def eval_all_times(self, points) -> np.ndarray:
        """(n+1, P) table of scheme values at the given points."""
        basis = self.gram.kernel.phi(cdist(points, self.gram.colloc.points))
        return self.alphas @ basis.T


def _nodal_derivatives_matrix(gs: GramSystem, alpha: np.ndarray):
    """Gradient and Hessian of the interpolant at all nodes via the operators."""
    d = gs.dim
    n = gs.n_points
    grad = np.empty((n, d))
    hess = np.empty((n, d, d))
    for l in range(d):
        grad[:, l] = gs.first_derivative_matrix(l) @ alpha
    for m in range(d):
        for l in range(m, d):
            val = gs.second_derivative_matrix(m, l) @ alpha
            hess[:, m, l] = val
            hess[:, l, m] = val
    return grad, hess


def _nodal_derivatives_kernel(gs: GramSystem, alpha: np.ndarray):
    """Same quantities through direct kernel gradient/Hessian sums."""
    ip = Interpolant(gram=gs, alpha=alpha)
    pts = gs.colloc.points
    return ip.eval_grad(pts), ip.eval_hess(pts)


def hjb_step_operator(gs: GramSystem, problem: HjbProblem, control,
                      values: np.ndarray):
    """Drift and diffusion contraction vectors for one control.

    Returns (sum_l B_l(pi) A^{-1} v, sum_ml B_ml(pi) A^{-1} v) for the given
    nodal vector; the caller takes the sup over controls.
    """
    cf = problem.nonlinearity
    if not isinstance(cf, ControlForm):
        raise SchemeError("hjb_step_operator needs a ControlForm nonlinearity")
    alpha = gs.solve(np.asarray(values, dtype=float))
    grad, hess = _nodal_derivatives_matrix(gs, alpha)
    pts = gs.colloc.points
    b = np.asarray(cf.drift(pts, control), dtype=float)
    a = np.asarray(cf.diffusion(pts, control), dtype=float)
    return np.einsum("nd,nd->n", b, grad), np.einsum("nab,nab->n", a, hess)


def solve_interp(problem: HjbProblem, gs: GramSystem,
                 tgrid: TimeGrid) -> InterpHistory:
    """Backward explicit Euler with nonlinearity through the interpolant."""
    if problem.dim != gs.dim:
        raise SchemeError("problem/grid dimension mismatch")
    n = tgrid.n_steps
    dt = tgrid.dt
    times = tgrid.times
    pts = gs.colloc.points
    use_matrix_path = isinstance(problem.nonlinearity, ControlForm)

    values = np.empty((n + 1, gs.n_points))
    alphas = np.empty_like(values)
    values[n] = problem.terminal(pts)
    alphas[n] = gs.solve(values[n])
    for k in range(n - 1, -1, -1):
        v = values[k + 1]
        alpha = alphas[k + 1]
        if use_matrix_path:
            grad, hess = _nodal_derivatives_matrix(gs, alpha)
        else:
            grad, hess = _nodal_derivatives_kernel(gs, alpha)
        f_vec = problem.nonlinearity.evaluate(times[k + 1], pts, v, grad, hess)
        values[k] = v - dt * f_vec
        if not np.all(np.isfinite(values[k])):
            raise SchemeError(
                f"non-finite nodal values at step k={k}; the explicit step "
                "is likely unstable for this time grid"
            )
        alphas[k] = gs.solve(values[k])
    return InterpHistory(gram=gs, tgrid=tgrid, values=values, alphas=alphas)


# -- regression scheme -------------------------------------------------------


@dataclass
class RegressHistory:
    """Terminal fit plus the per-step fits of the regression scheme.

    The value function at t_k is
    terminal_model - dt * sum of step_models[j] for j > k, where
    step_models[j] was fit to the nonlinearity at t_j.
    """

    colloc: CollocationSet
    tgrid: TimeGrid
    terminal_model: l1regress.RegressionModel
    step_models: list  # index j-1 holds the fit at t_j, j = 1..n

    def eval(self, k: int, x):
        vals = np.atleast_1d(self.terminal_model.predict(x)).astype(float)
        dt = self.tgrid.dt
        for j in range(k + 1, self.tgrid.n_steps + 1):
            vals = vals - dt * np.atleast_1d(self.step_models[j - 1].predict(x))
        x_arr = np.asarray(x, dtype=float)
        return float(vals[0]) if x_arr.ndim == 1 else vals

    def eval_grad(self, k: int, x):
        out = np.asarray(self.terminal_model.predict_grad(x), dtype=float)
        dt = self.tgrid.dt
        for j in range(k + 1, self.tgrid.n_steps + 1):
            out = out - dt * self.step_models[j - 1].predict_grad(x)
        return out

    def eval_hess(self, k: int, x):
        out = np.asarray(self.terminal_model.predict_hess(x), dtype=float)
        dt = self.tgrid.dt
        for j in range(k + 1, self.tgrid.n_steps + 1):
            out = out - dt * self.step_models[j - 1].predict_hess(x)
        return out

    def eval_all_times(self, points) -> np.ndarray:
        """(n+1, P) table of scheme values at the given points, telescoped."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.tgrid.n_steps
        dt = self.tgrid.dt
        out = np.empty((n + 1, points.shape[0]))
        out[n] = self.terminal_model.predict(points)
        for k in range(n - 1, -1, -1):
            out[k] = out[k + 1] - dt * self.step_models[k].predict(points)
        return out


def _center_subset(points: np.ndarray, m: int) -> np.ndarray:
    if m >= points.shape[0]:
        return points
    idx = np.unique(np.linspace(0, points.shape[0] - 1, m).round().astype(int))
    return points[idx]


def solve_regress(problem: HjbProblem, colloc: CollocationSet, tgrid: TimeGrid,
                  schedule: l1regress.BudgetSchedule, m_centers: int,
                  h: float, kernel: WendlandKernel,
                  max_iter: int | None = None) -> RegressHistory:
    """Backward scheme with an l1-budgeted regression fit at every step.

    The fit tolerance is h (certified gap h^2) and the budget is the
    schedule evaluated at ``m_centers``.  Centers are a fixed, evenly
    spread subset of the collocation points; each fit is warm-started
    from the previous step's coefficients.
    """
    if problem.dim != colloc.dim:
        raise SchemeError("problem/grid dimension mismatch")
    pts = colloc.points
    n = tgrid.n_steps
    dt = tgrid.dt
    times = tgrid.times
    centers = _center_subset(pts, m_centers)
    budget = schedule(centers.shape[0])
    design = l1regress.design_matrix(kernel, pts, centers)

    # kernel tensors of the centers at the nodes: incremental accumulators
    # keep each step O(N * M) regardless of how many step models exist
    diff = pts[:, None, :] - centers[None, :, :]
    r = np.linalg.norm(diff, axis=2)
    k_val = kernel.phi(r)
    w1 = kernel.phi1(r)
    w2 = kernel.phi2(r)
    d = colloc.dim
    grad_basis = w1[:, :, None] * diff  # (N, M, d)
    hess_basis = w2[:, :, None, None] * diff[:, :, :, None] * diff[:, :, None, :]
    hess_basis += w1[:, :, None, None] * np.eye(d)[None, None]

    def model_at_nodes(model):
        vals = k_val @ model.gamma + model.intercept
        grads = np.einsum("nmd,m->nd", grad_basis, model.gamma)
        hesss = np.einsum("nmab,m->nab", hess_basis, model.gamma)
        return vals, grads, hesss

    # Warm starts: the min-norm least squares solution when it fits in the
    # budget (it then certifies immediately), else the previous step's fit.
    def warm_guess(target):
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        if np.sum(np.abs(coef)) <= budget:
            return coef
        return None

    try:
        terminal_model = l1regress.fit(
            problem.terminal(pts), centers, kernel, budget, h,
            design=design, max_iter=max_iter,
            warm_start=warm_guess(problem.terminal(pts)),
        )
    except l1regress.FitError as err:
        raise SchemeError(f"terminal fit failed: {err}") from err

    z, grad, hess = model_at_nodes(terminal_model)
    step_models: list = [None] * n
    warm = None
    for k in range(n - 1, -1, -1):
        target = problem.nonlinearity.evaluate(times[k + 1], pts, z, grad, hess)
        if not np.all(np.isfinite(target)):
            raise SchemeError(f"non-finite nonlinearity values at step k={k}")
        guess = warm_guess(target)
        if guess is None:
            guess = warm
        try:
            model = l1regress.fit(
                target, centers, kernel, budget, h,
                design=design, max_iter=max_iter, warm_start=guess,
            )
        except l1regress.FitError as err:
            raise SchemeError(f"regression failed at step k={k}: {err}") from err
        step_models[k] = model
        warm = model.theta
        dz, dgrad, dhess = model_at_nodes(model)
        z = z - dt * dz
        grad = grad - dt * dgrad
        hess = hess - dt * dhess
    return RegressHistory(
        colloc=colloc, tgrid=tgrid,
        terminal_model=terminal_model, step_models=step_models,
    )


def eval_solution(history, k: int, x, order: int = 0):
    """Value (order 0), gradient (1) or Hessian (2) of either scheme at t_k."""
    if order == 0:
        return history.eval(k, x)
    if order == 1:
        return history.eval_grad(k, x)
    if order == 2:
        return history.eval_hess(k, x)
    raise ValueError("order must be 0, 1 or 2")
