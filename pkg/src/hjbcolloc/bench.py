"""Benchmark harness: HJB test problem with known solution, error metrics,
finite-difference baseline and ratio tables.

The test equation is
    -dv/dt - (1/2) sup_{0<=sigma<=1/5} tr(sigma^2 D^2 v) + G(v, Dv) = 0
with G(z, p) = (1/d) sum_i p_i - (d/2) inf_{0<=sigma<=1/5} (sigma^2 z) and
terminal data sin(1 + sum_i x_i); the solution is v(t, x) = sin(t + sum x_i).
Both sup and inf have closed forms: sup(sigma^2 y) = max(y, 0) / 25 and
inf(sigma^2 y) = -max(-y, 0) / 25.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, asdict

import numpy as np

from . import solver
from .geometry import TimeGrid, equispaced_grid, scaled_radius, sobol_points
from .interp import assemble
from .kernels import build_kernel
from .l1regress import BudgetSchedule

SIGMA_MAX = 0.2  # control interval [0, 1/5]
DEFAULT_TAU = {1: 4, 2: 15}

CSV_HEADER = ["N", "R", "delta_x", "n", "max_error", "rms_error",
              "runtime_ms", "scheme"]
FLOAT_FORMAT = "%.10e"


@dataclass
class ErrorReport:
    N: int
    R: float
    delta_x: float
    n: int
    max_error: float
    rms_error: float
    runtime_ms: float
    scheme: str

    def __post_init__(self):
        if self.max_error < 0 or self.rms_error < 0:
            raise ValueError("errors must be non-negative")
        if self.rms_error > self.max_error * (1 + 1e-12):
            raise ValueError("rms error cannot exceed max error")


def exact_solution(t, points) -> np.ndarray:
    """v(t, x) = sin(t + sum_i x_i)."""
    return np.sin(t + np.sum(np.atleast_2d(points), axis=1))


def exact_time_derivative(t, points) -> np.ndarray:
    return np.cos(t + np.sum(np.atleast_2d(points), axis=1))


def exact_gradient(t, points) -> np.ndarray:
    points = np.atleast_2d(points)
    c = np.cos(t + np.sum(points, axis=1))
    return np.repeat(c[:, None], points.shape[1], axis=1)


def exact_hessian(t, points) -> np.ndarray:
    points = np.atleast_2d(points)
    d = points.shape[1]
    s = np.sin(t + np.sum(points, axis=1))
    return -s[:, None, None] * np.ones((d, d))[None]


def _benchmark_f(d: int, t, points, z, p, X):
    """Canonical-form F(t, x, z, p, X) of the benchmark equation."""
    z = np.asarray(z, dtype=float)
    trace = np.trace(np.asarray(X, dtype=float), axis1=1, axis2=2)
    sup_term = 0.5 * SIGMA_MAX**2 * np.maximum(trace, 0.0)
    g_term = np.sum(np.asarray(p, dtype=float), axis=1) / d \
        + 0.5 * d * SIGMA_MAX**2 * np.maximum(-z, 0.0)
    return -sup_term + g_term


def benchmark_problem(d: int, form: str = "control") -> solver.HjbProblem:
    """The benchmark problem in ControlForm or GeneralF encoding.

    Both encodings compute the same closed-form sup/inf over the control
    interval; they differ in how the scheme obtains nodal derivatives
    (matrix operators vs direct kernel sums), which is exactly the code
    path the cross-checks exercise.
    """
    if d not in (1, 2):
        raise ValueError("benchmark problem is defined for d in {1, 2}")

    def terminal(points):
        return exact_solution(1.0, points)

    if form == "general":
        nonlinearity = solver.GeneralF(
            func=lambda t, pts, z, p, X: _benchmark_f(d, t, pts, z, p, X)
        )
    elif form == "control":
        nonlinearity = solver.ControlForm(
            maximizer=lambda t, pts, z, p, X: _benchmark_f(d, t, pts, z, p, X),
            drift=lambda pts, pi: np.full((pts.shape[0], d), 1.0 / d),
            diffusion=lambda pts, pi: np.broadcast_to(
                pi**2 * np.eye(d), (pts.shape[0], d, d)),
        )
    else:
        raise ValueError("form must be 'control' or 'general'")
    return solver.HjbProblem(
        dim=d, horizon=1.0, terminal=terminal, nonlinearity=nonlinearity
    )


def residual_check(problem: solver.HjbProblem, sample_count: int = 1000,
                   seed: int = 7,
                   exact=exact_solution,
                   exact_dt=exact_time_derivative,
                   exact_grad=exact_gradient,
                   exact_hess=exact_hessian) -> float:
    """Max |−dv/dt + F(t, x; v)| of the exact solution at random samples.

    This gates every benchmark run: a nonzero residual means the coded
    nonlinearity (not the scheme) is wrong.
    """
    rng = np.random.default_rng(seed)
    d = problem.dim
    worst = 0.0
    ts = rng.uniform(0.0, problem.horizon, size=sample_count)
    xs = rng.uniform(-1.0, 1.0, size=(sample_count, d))
    for t, x in zip(ts, xs):
        pt = x[None]
        z = exact(t, pt)
        f_val = problem.nonlinearity.evaluate(
            t, pt, z, exact_grad(t, pt), exact_hess(t, pt))
        worst = max(worst, abs(float(-exact_dt(t, pt)[0] + f_val[0])))
    return worst


def _error_metrics(table: np.ndarray, times: np.ndarray,
                   eval_points: np.ndarray):
    """Max and RMS error over evaluation points and all time grid points."""
    exact = np.stack([exact_solution(t, eval_points) for t in times])
    err = np.abs(table - exact)
    return float(np.max(err)), float(np.sqrt(np.mean(err**2)))


def run_benchmark(d: int, n: int, n_list, scheme: str = "interp",
                  eval_count: int | None = None, tau: int | None = None,
                  regression: dict | None = None,
                  eval_points: str = "sobol") -> list[ErrorReport]:
    """Solve the benchmark for each N and report Max/RMS errors.

    ``eval_points`` is "sobol" (the default evaluation set on [-1,1]^d) or
    "gamma" (errors measured on the collocation set itself, the convention
    of the finite-difference comparison).  Per-run failures are recorded as
    NaN reports rather than aborting the sweep.
    """
    if tau is None:
        tau = DEFAULT_TAU[d]
    if eval_count is None:
        eval_count = 10**d
    kernel = build_kernel(d, tau)
    problem = benchmark_problem(d, form="control")
    gate = residual_check(problem, 200)
    if gate > 1e-10:
        raise RuntimeError(f"residual gate failed: {gate:g}")
    regression = regression or {}
    reports = []
    for n_points in n_list:
        radius = scaled_radius(d, n_points, tau)
        start = time.perf_counter()
        try:
            colloc = equispaced_grid(d, n_points, radius)
            tgrid = TimeGrid(horizon=1.0, n_steps=n)
            if scheme == "interp":
                gs = assemble(kernel, colloc)
                history = solver.solve_interp(problem, gs, tgrid)
            elif scheme == "regress":
                schedule = BudgetSchedule(beta0=regression.get("beta0", 10.0))
                history = solver.solve_regress(
                    problem, colloc, tgrid, schedule,
                    m_centers=regression.get("M", colloc.n_points),
                    h=regression.get("h", 1e-3), kernel=kernel,
                )
            else:
                raise ValueError(f"unknown scheme {scheme!r}")
            if eval_points == "gamma":
                pts = colloc.points
            else:
                pts = sobol_points(d, eval_count)
            table = history.eval_all_times(pts)
            max_err, rms_err = _error_metrics(table, tgrid.times, pts)
            elapsed = 1000.0 * (time.perf_counter() - start)
            reports.append(ErrorReport(
                N=colloc.n_points, R=radius, delta_x=colloc.fill_distance,
                n=n, max_error=max_err, rms_error=rms_err,
                runtime_ms=elapsed, scheme=scheme,
            ))
        except Exception as err:  # failed cells stay in the sweep record
            elapsed = 1000.0 * (time.perf_counter() - start)
            reports.append(ErrorReport(
                N=n_points, R=radius, delta_x=float("nan"), n=n,
                max_error=float("nan"), rms_error=float("nan"),
                runtime_ms=elapsed, scheme=f"{scheme}:failed:{err}",
            ))
    return reports


# -- finite difference baseline (d = 1) --------------------------------------


def fd_baseline(n: int, n_points: int, tau: int | None = None,
                problem: solver.HjbProblem | None = None) -> ErrorReport:
    """Explicit Euler finite differences on the same collocation points.

    Central first differences, standard second differences, and zero
    Dirichlet values outside the grid; errors are measured on the grid
    itself across all time steps.
    """
    if tau is None:
        tau = DEFAULT_TAU[1]
    if problem is None:
        problem = benchmark_problem(1, form="general")
    radius = scaled_radius(1, n_points, tau)
    colloc = equispaced_grid(1, n_points, radius)
    xs = colloc.points[:, 0]
    spacing = xs[1] - xs[0]
    tgrid = TimeGrid(horizon=1.0, n_steps=n)
    dt = tgrid.dt
    times = tgrid.times

    start = time.perf_counter()
    values = np.empty((n + 1, n_points))
    values[n] = problem.terminal(colloc.points)
    for k in range(n - 1, -1, -1):
        v = values[k + 1]
        vp = np.concatenate([v[1:], [0.0]])  # zero Dirichlet truncation
        vm = np.concatenate([[0.0], v[:-1]])
        grad = ((vp - vm) / (2.0 * spacing))[:, None]
        hess = ((vp - 2.0 * v + vm) / spacing**2)[:, None, None]
        f_vec = problem.nonlinearity.evaluate(times[k + 1], colloc.points,
                                              v, grad, hess)
        values[k] = v - dt * f_vec
        if not np.all(np.isfinite(values[k])):
            raise solver.SchemeError(f"finite difference blew up at step {k}")
    max_err, rms_err = _error_metrics(values, times, colloc.points)
    elapsed = 1000.0 * (time.perf_counter() - start)
    return ErrorReport(
        N=n_points, R=radius, delta_x=colloc.fill_distance, n=n,
        max_error=max_err, rms_error=rms_err, runtime_ms=elapsed, scheme="fd",
    )


# -- serialization -----------------------------------------------------------


def reports_to_csv(reports: list[ErrorReport]) -> str:
    """Deterministic CSV ('.' decimal, LF endings, fixed float format)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in reports:
        row = asdict(rep)
        writer.writerow([
            row["N"],
            FLOAT_FORMAT % row["R"],
            FLOAT_FORMAT % row["delta_x"],
            row["n"],
            FLOAT_FORMAT % row["max_error"],
            FLOAT_FORMAT % row["rms_error"],
            FLOAT_FORMAT % row["runtime_ms"],
            row["scheme"],
        ])
    return buf.getvalue()


def reports_from_csv(text: str) -> list[ErrorReport]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [
        ErrorReport(
            N=int(r["N"]), R=float(r["R"]), delta_x=float(r["delta_x"]),
            n=int(r["n"]), max_error=float(r["max_error"]),
            rms_error=float(r["rms_error"]), runtime_ms=float(r["runtime_ms"]),
            scheme=r["scheme"],
        )
        for r in rows
    ]


def ratio_table(rbf_reports: list[ErrorReport],
                fd_reports: list[ErrorReport]) -> str:
    """CSV of FD/RBF error ratios keyed on matching (N, n)."""
    rbf = {(r.N, r.n): r for r in rbf_reports}
    fd = {(r.N, r.n): r for r in fd_reports}
    if set(rbf) != set(fd):
        raise ValueError(
            f"report keys differ: rbf={sorted(rbf)} fd={sorted(fd)}"
        )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["N", "n", "max_ratio", "rms_ratio"])
    for key in sorted(rbf):
        writer.writerow([
            key[0], key[1],
            FLOAT_FORMAT % (fd[key].max_error / rbf[key].max_error),
            FLOAT_FORMAT % (fd[key].rms_error / rbf[key].rms_error),
        ])
    return buf.getvalue()
