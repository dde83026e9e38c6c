"""Command line interface: kernel inspection, PDE solves and benchmarks."""

from __future__ import annotations

import json
import time
from pathlib import Path

import click
import numpy as np

from . import bench, solver
from .geometry import TimeGrid, equispaced_grid, scaled_radius
from .interp import assemble
from .kernels import build_kernel
from .l1regress import BudgetSchedule


@click.group()
def main():
    """Wendland-kernel collocation schemes for nonlinear parabolic PDEs."""


@main.command()
@click.option("--d", "dim", type=int, required=True, help="spatial dimension")
@click.option("--tau", type=int, required=True, help="smoothness parameter")
@click.option("--eval", "eval_radii", default=None,
              help="comma-separated radii; prints a CSV r,phi,phi1,phi2")
def kernel(dim, tau, eval_radii):
    """Print Wendland kernel coefficients (exact rationals and doubles)."""
    k = build_kernel(dim, tau)
    click.echo(f"d={k.d} tau={k.tau} nu={k.nu} degree={k.degree} "
               f"normalizer={k.normalizer:g}")
    click.echo("coefficients (normalized so phi(0)=1):")
    for j, c in enumerate(k.normalized_rational_coeffs()):
        click.echo(f"  r^{j}: {c} = {float(c):.17g}")
    if eval_radii:
        radii = [float(tok) for tok in eval_radii.split(",")]
        click.echo("r,phi,phi1,phi2")
        for r in radii:
            phi1 = k.phi1(r) if k.p1_coeffs is not None else float("nan")
            phi2 = k.phi2(r) if k.p2_coeffs is not None else float("nan")
            click.echo(f"{r:.10e},{k.phi(r):.10e},{phi1:.10e},{phi2:.10e}")


def _load_problem(cfg: dict, dim: int) -> solver.HjbProblem:
    name = cfg if isinstance(cfg, str) else cfg.get("name", "")
    if name == "builtin:hjb":
        return bench.benchmark_problem(dim, form="control")
    raise click.ClickException(
        f"unknown problem {name!r}; only 'builtin:hjb' is built in"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              required=True, help="JSON solve configuration")
@click.option("--out", "out_dir", type=click.Path(), default=".",
              help="output directory for history.csv and meta.json")
def solve(config_path, out_dir):
    """Run one backward solve described by a JSON config file."""
    cfg = json.loads(Path(config_path).read_text())
    dim = int(cfg["dim"])
    scheme = cfg.get("scheme", "interp")
    kcfg = cfg.get("kernel", {})
    tau = int(kcfg.get("tau", bench.DEFAULT_TAU.get(dim, 4)))
    k = build_kernel(int(kcfg.get("d", dim)), tau,
                     support_scale=float(kcfg.get("support_scale", 1.0)))

    gcfg = cfg.get("grid", {})
    n_points = int(gcfg.get("N", gcfg.get("N_per_axis", 0) ** dim))
    radius_cfg = gcfg.get("R", "auto")
    radius = (scaled_radius(dim, n_points, tau)
              if radius_cfg == "auto" else float(radius_cfg))
    colloc = equispaced_grid(dim, n_points, radius)

    tcfg = cfg.get("time", {})
    tgrid = TimeGrid(horizon=float(tcfg.get("T", 1.0)),
                     n_steps=int(tcfg.get("n", 256)))
    problem = _load_problem(cfg.get("problem", "builtin:hjb"), dim)

    start = time.perf_counter()
    if scheme == "interp":
        gs = assemble(k, colloc)
        history = solver.solve_interp(problem, gs, tgrid)
        nodal = history.values
        jitter = gs.jitter
    elif scheme == "regress":
        rcfg = cfg.get("regression", {})
        history = solver.solve_regress(
            problem, colloc, tgrid,
            BudgetSchedule(beta0=float(rcfg.get("beta0", 10.0))),
            m_centers=int(rcfg.get("M", colloc.n_points)),
            h=float(rcfg.get("h", 1e-3)), kernel=k,
        )
        nodal = history.eval_all_times(colloc.points)
        jitter = 0.0
    else:
        raise click.ClickException(f"unknown scheme {scheme!r}")
    runtime_ms = 1000.0 * (time.perf_counter() - start)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    times = tgrid.times
    lines = ["k,t,node_index,value"]
    for ki in range(tgrid.n_steps + 1):
        for j in range(colloc.n_points):
            lines.append(f"{ki},{times[ki]:.10e},{j},{nodal[ki, j]:.10e}")
    (out / "history.csv").write_text("\n".join(lines) + "\n")
    meta = {
        "N": colloc.n_points,
        "R": radius,
        "delta_x": colloc.fill_distance,
        "delta_t": tgrid.dt,
        "runtime_ms": runtime_ms,
        "jitter_used": jitter,
        "scheme": scheme,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    click.echo(f"wrote {out / 'history.csv'} and {out / 'meta.json'}")


def _parse_n_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


@main.command("bench")
@click.option("--d", "dim", type=click.Choice(["1", "2"]), default="1")
@click.option("--n", "n_steps", type=int, default=256)
@click.option("--N-list", "n_list", required=True, help="e.g. 9,17,33,65")
@click.option("--scheme", type=click.Choice(["interp", "regress"]),
              default="interp")
@click.option("--eval-points", type=click.Choice(["sobol", "gamma"]),
              default="sobol")
@click.option("--out", "out_dir", type=click.Path(), default=".")
@click.option("--plot/--no-plot", default=False,
              help="also render the error curves as a PNG")
def bench_cmd(dim, n_steps, n_list, scheme, eval_points, out_dir, plot):
    """Error sweep of the built-in benchmark problem over N."""
    dim = int(dim)
    reports = bench.run_benchmark(
        dim, n_steps, _parse_n_list(n_list), scheme=scheme,
        eval_points=eval_points,
    )
    text = bench.reports_to_csv(reports)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"errors_d{dim}_n{n_steps}.csv"
    path.write_text(text)
    click.echo(f"wrote {path}")
    if plot:
        from .plots import plot_error_curves

        png = plot_error_curves(
            text, path.with_suffix(".png"),
            title=f"d={dim}, n={n_steps}, scheme={scheme}")
        click.echo(f"wrote {png}")


@main.command("bench-fd")
@click.option("--n", "n_steps", type=int, default=256)
@click.option("--N-list", "n_list", required=True)
@click.option("--out", "out_dir", type=click.Path(), default=".")
def bench_fd(n_steps, n_list, out_dir):
    """Finite-difference baseline sweep (d=1, errors on the grid itself)."""
    reports = [bench.fd_baseline(n_steps, n_pts)
               for n_pts in _parse_n_list(n_list)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"errors_fd_n{n_steps}.csv"
    path.write_text(bench.reports_to_csv(reports))
    click.echo(f"wrote {path}")


@main.command()
@click.option("--rbf", "rbf_path", type=click.Path(exists=True), required=True)
@click.option("--fd", "fd_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default="ratios.csv")
@click.option("--plot/--no-plot", default=False)
def ratios(rbf_path, fd_path, out_path, plot):
    """FD/RBF error ratio table from two benchmark CSVs."""
    rbf = bench.reports_from_csv(Path(rbf_path).read_text())
    fd = bench.reports_from_csv(Path(fd_path).read_text())
    text = bench.ratio_table(rbf, fd)
    Path(out_path).write_text(text)
    click.echo(f"wrote {out_path}")
    if plot:
        from .plots import plot_ratio_table

        png = plot_ratio_table(text, Path(out_path).with_suffix(".png"),
                               title="FD / RBF error ratios")
        click.echo(f"wrote {png}")


if __name__ == "__main__":
    main()
