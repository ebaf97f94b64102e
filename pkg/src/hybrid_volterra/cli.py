"""Command-line front end (installed as ``hv``).

Subcommands::

    hv solve PROBLEM               iterate to a solution, write CSV/report
    hv analyze PROBLEM             roots, separation, contraction analysis
    hv series-solve PROBLEM        solve a cube-integral series problem
    hv convergence-report PROBLEM  sup errors and ratios across resolutions
    hv roots PROBLEM               crossing times of the moving impulses
    hv check-matrix A11 .. A33     verdicts for an explicit 3x3 matrix

Exit codes: 0 success, 1 invalid input, 2 separation requirement failed,
3 iteration did not converge.  Output is deterministic for fixed inputs;
``HV_SEED`` seeds the Lipschitz estimator behind ``analyze --estimate``.
"""

from __future__ import annotations

import os
import sys

import click
import numpy as np

from .contraction import (
    LipschitzSet,
    NoContractiveWeight,
    char_invariants,
    contraction_bounds,
    criterion_quantities,
    find_mu,
    is_contractive_criterion,
    is_contractive_eigen,
    spectral_radius,
)
from .expressions import estimate_lipschitz
from .operator import HybridProblem, jump_at
from .problem_io import (
    LoadedProblem,
    ProblemFileError,
    dump_report,
    load_problem_file,
    write_report,
    write_solution_csv,
)
from .schedule import check_separation
from .series import series_contraction_coefficient, series_solve
from .solvers import convergence_table, picard_solve, segment_solve

_TIME_ARGS = frozenset(("t", "s", "s1", "tau", "taui", "tauj", "sig"))

# constant name -> (kernel attribute, argument the constant bounds)
_ESTIMATE_PLAN = (
    ("L1", "f1", "x"),
    ("L21", "f2", "x"),
    ("L22", "f2", "x1"),
    ("LG1", "G1", "eta"),
    ("LG21", "G2", "etai"),
    ("LG22", "G2", "etaj"),
    ("LG31", "G3", "eta"),
    ("LG32", "G3", "beta"),
    ("Lg1", "g", "x"),
    ("Lg2", "g", "beta"),
    ("Lg3", "g", "eta"),
)


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(path: str, want: str) -> LoadedProblem:
    try:
        loaded = load_problem_file(path)
    except ProblemFileError as exc:
        _fail(str(exc), 1)
    if loaded.kind != want:
        other = "series-solve" if loaded.kind == "series" else "solve"
        _fail(f"{path} is a {loaded.kind} problem; use `hv {other}`", 1)
    return loaded


def _seed() -> int:
    raw = os.environ.get("HV_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        _fail(f"HV_SEED must be an integer, got {raw!r}", 1)


def _separation_block(problem: HybridProblem) -> dict:
    rep = check_separation(problem.schedule)
    block = {"ok": bool(rep.ok)}
    if rep.ok:
        block["detail"] = "verified on grid (1024 points per check)"
    else:
        block["clause"] = rep.clause
        block["detail"] = rep.detail
    return block


def _conventions(problem: HybridProblem) -> list[str]:
    notes = [
        "impulse sums are strict: a term enters only for times strictly "
        "below the evaluation time, and values at breakpoints are left limits",
        f"the bound matrix uses global impulse counts ({problem.n_tau} fixed, "
        f"{problem.n_sigma} moving) rather than per-time counts",
        "moving-impulse columns of the bound matrix use the declared "
        "separation scale h for their geometric tails",
        "separation is checked on a finite grid, not proven",
    ]
    return notes


def _contraction_block(
    lip: LipschitzSet,
    horizon: float,
    h: float,
    n_tau: int,
    n_sigma: int,
    mu: float | None,
) -> dict:
    block = {"constants": {k: getattr(lip, k) for k, _, _ in _ESTIMATE_PLAN}}
    if mu is None:
        try:
            mu = find_mu(lip, horizon, h, n_tau, n_sigma)
            block["mu_star"] = float(mu)
        except NoContractiveWeight as exc:
            block["mu_star"] = None
            block["note"] = str(exc)
            return block
    else:
        block["mu"] = float(mu)
    matrix = contraction_bounds(lip, mu, horizon, h, n_tau, n_sigma)
    tr, s2, d = char_invariants(matrix)
    quantities = criterion_quantities(matrix)
    block.update(
        {
            "matrix": [[float(v) for v in row] for row in matrix.entries],
            "invariants": {"trace": tr, "pair_sum": s2, "det": d},
            "criterion_quantities": [float(q) for q in quantities],
            "contractive_criterion": bool(is_contractive_criterion(matrix)),
            "spectral_radius": float(spectral_radius(matrix)),
            "contractive_eigen": bool(is_contractive_eigen(matrix)),
        }
    )
    return block


def _estimated_constants(problem: HybridProblem, bound: float, seed: int) -> LipschitzSet:
    horizon = problem.grid.horizon
    values = {}
    for name, attr, wrt in _ESTIMATE_PLAN:
        expr = getattr(problem, attr)
        if expr.is_zero:
            values[name] = 0.0
            continue
        box = {
            arg: (0.0, horizon) if arg in _TIME_ARGS else (-bound, bound)
            for arg in expr.arity
        }
        values[name] = estimate_lipschitz(
            expr, wrt, box, samples=512, seed=seed, safety=1.1
        )
    return LipschitzSet(**values)


def _jump_rows(problem: HybridProblem, triple) -> list[dict]:
    rows = []
    for alpha in np.atleast_1d(problem.schedule.breakpoints):
        alpha = float(alpha)
        if not 0.0 < alpha < problem.grid.horizon:
            continue
        left = float(triple.xi.eval_left(alpha))
        right = float(triple.xi.eval_right(alpha))
        predicted = float(jump_at(problem, triple, alpha))
        rows.append(
            {
                "t": alpha,
                "predicted_jump": predicted,
                "realized_jump": right - left,
                "left": left,
                "right": right,
                "mismatch": abs(predicted - (right - left)),
            }
        )
    return rows


@click.group()
def cli() -> None:
    """Solvers and contraction analysis for integral equations with impulses."""


@cli.command()
@click.argument("problem_file", type=click.Path())
@click.option(
    "--method",
    type=click.Choice(["picard", "segment"]),
    default="picard",
    show_default=True,
    help="Global sweeps, or a left-to-right march over the partition.",
)
@click.option("--out", type=click.Path(), default=None, help="Solution CSV path.")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="Write a YAML run report here.")
@click.option("--mu", type=float, default=None, help="Weight of the iteration norm.")
@click.option("--tol", type=float, default=None, help="Convergence tolerance.")
@click.option("--kmax", type=int, default=None, help="Iteration cap.")
@click.option(
    "--require-separation",
    "--require-h7",
    "require_separation",
    is_flag=True,
    help="Exit 2 unless the impulse-separation rules hold on the check grid.",
)
def solve(problem_file, method, out, report_path, mu, tol, kmax, require_separation):
    """Solve the integral equation in PROBLEM_FILE."""
    loaded = _load(problem_file, "hybrid")
    problem = loaded.problem
    settings = loaded.settings
    tol = settings.tol if tol is None else tol
    kmax = settings.kmax if kmax is None else kmax
    if kmax < 1 or tol <= 0:
        _fail("tol must be positive and kmax at least 1", 1)

    sep = _separation_block(problem)
    if require_separation and not sep["ok"]:
        _fail(f"separation requirement failed: {sep['detail']}", 2)

    if method == "picard":
        mu = settings.mu if mu is None else mu
        triple, rep = picard_solve(problem, mu=mu, tol=tol, kmax=kmax)
    else:
        triple, rep = segment_solve(problem, tol=tol, kmax=kmax)

    report = {
        "problem": str(problem_file),
        "method": rep.method,
        "mu": float(rep.mu) if method == "picard" else None,
        "iterations": rep.iterations,
        "converged": bool(rep.converged),
        "final_residual": float(rep.final_residual),
        "tolerance": float(tol),
        "notes": list(rep.notes),
        "separation": sep,
        "jumps": _jump_rows(problem, triple),
        "conventions": _conventions(problem),
    }
    if problem.lipschitz is not None:
        report["contraction"] = _contraction_block(
            problem.lipschitz,
            problem.grid.horizon,
            problem.schedule.h,
            problem.n_tau,
            problem.n_sigma,
            report["mu"],
        )
    if out:
        write_solution_csv(out, triple.xi)
        report["solution_csv"] = str(out)
    if report_path:
        write_report(report_path, report)

    click.echo(f"method: {rep.method}")
    click.echo(f"iterations: {rep.iterations}")
    if method == "picard":
        click.echo(f"mu: {rep.mu!r}")
    click.echo(f"converged: {str(rep.converged).lower()}")
    click.echo(f"final residual: {rep.final_residual:.6e}")
    for note in rep.notes:
        click.echo(f"note: {note}")
    if out:
        click.echo(f"wrote solution: {out}")
    if report_path:
        click.echo(f"wrote report: {report_path}")
    if not rep.converged:
        _fail(f"did not converge within {kmax} iterations", 3)


@cli.command()
@click.argument("problem_file", type=click.Path())
@click.option("--mu", type=float, default=None,
              help="Evaluate the bound matrix at this weight instead of searching.")
@click.option("--estimate", is_flag=True,
              help="Estimate missing Lipschitz constants by sampling the kernels.")
@click.option("--state-bound", type=float, default=2.0, show_default=True,
              help="Half-width of the state box used by --estimate.")
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option(
    "--require-separation",
    "--require-h7",
    "require_separation",
    is_flag=True,
    help="Exit 2 if a separation rule fails on the check grid.",
)
def analyze(problem_file, mu, estimate, state_bound, report_path, require_separation):
    """Report breakpoints, separation, and contraction verdicts."""
    loaded = _load(problem_file, "hybrid")
    problem = loaded.problem
    schedule = problem.schedule

    report = {
        "problem": str(problem_file),
        "horizon": float(problem.grid.horizon),
        "h": float(schedule.h),
        "tau": [float(t) for t in schedule.tau],
        "sigma": [s.to_source() for s in schedule.sigma],
        "sigma_roots": [
            [float(r) for r in np.atleast_1d(roots)] for roots in schedule.roots
        ],
        "breakpoints": [float(b) for b in np.atleast_1d(schedule.breakpoints)],
        "partition": [float(p) for p in schedule.partition],
        "separation": _separation_block(problem),
    }

    lip = problem.lipschitz
    if estimate:
        if state_bound <= 0:
            _fail("--state-bound must be positive", 1)
        seed = _seed()
        lip = _estimated_constants(problem, state_bound, seed)
        report["lipschitz_source"] = (
            f"estimated by sampling (seed {seed}, safety factor 1.1, "
            f"state box [-{state_bound:g}, {state_bound:g}])"
        )
    elif lip is not None:
        report["lipschitz_source"] = "declared in problem file"

    if lip is not None:
        report["contraction"] = _contraction_block(
            lip,
            problem.grid.horizon,
            schedule.h,
            problem.n_tau,
            problem.n_sigma,
            mu,
        )
    else:
        report["contraction"] = None
        report["note"] = (
            "no Lipschitz constants; declare them in the file or pass --estimate"
        )
    report["conventions"] = _conventions(problem)

    click.echo(dump_report(report), nl=False)
    if report_path:
        write_report(report_path, report)
    if require_separation and not report["separation"]["ok"]:
        _fail(f"separation requirement failed: {report['separation']['detail']}", 2)


@cli.command("series-solve")
@click.argument("problem_file", type=click.Path())
@click.option("--out", type=click.Path(), default=None, help="Solution CSV path.")
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--mu", type=float, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--kmax", type=int, default=None)
def series_solve_cmd(problem_file, out, report_path, mu, tol, kmax):
    """Solve the cube-integral series problem in PROBLEM_FILE."""
    loaded = _load(problem_file, "series")
    problem = loaded.problem
    settings = loaded.settings
    tol = settings.tol if tol is None else tol
    kmax = settings.kmax if kmax is None else kmax
    mu = settings.mu if mu is None else mu
    if kmax < 1 or tol <= 0:
        _fail("tol must be positive and kmax at least 1", 1)

    y, rep = series_solve(problem, mu=mu, tol=tol, kmax=kmax)
    report = {
        "problem": str(problem_file),
        "method": rep.method,
        "order": problem.order,
        "mu": float(rep.mu),
        "iterations": rep.iterations,
        "converged": bool(rep.converged),
        "final_residual": float(rep.final_residual),
        "tolerance": float(tol),
        "notes": list(rep.notes),
    }
    if problem.lipschitz is not None:
        report["contraction_coefficient"] = series_contraction_coefficient(
            problem.lipschitz, problem.horizon, rep.mu
        )
    if out:
        write_solution_csv(out, y)
        report["solution_csv"] = str(out)
    if report_path:
        write_report(report_path, report)

    click.echo(f"order: {problem.order}")
    click.echo(f"iterations: {rep.iterations}")
    click.echo(f"mu: {rep.mu!r}")
    click.echo(f"converged: {str(rep.converged).lower()}")
    click.echo(f"final residual: {rep.final_residual:.6e}")
    if out:
        click.echo(f"wrote solution: {out}")
    if report_path:
        click.echo(f"wrote report: {report_path}")
    if not rep.converged:
        _fail(f"did not converge within {kmax} iterations", 3)


@cli.command("convergence-report")
@click.argument("problem_file", type=click.Path())
@click.option("--resolutions", default="16,32,64,128", show_default=True,
              help="Comma-separated nodes per segment; each must double the last.")
@click.option("--method", type=click.Choice(["picard", "segment"]), default="picard",
              show_default=True)
@click.option("--tol", type=float, default=1e-12, show_default=True)
@click.option("--kmax", type=int, default=200, show_default=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
def convergence_report(problem_file, resolutions, method, tol, kmax, report_path):
    """Errors against a Richardson reference across doubling resolutions."""
    loaded = _load(problem_file, "hybrid")
    try:
        res = tuple(int(part) for part in resolutions.split(","))
    except ValueError:
        _fail(f"--resolutions must be comma-separated integers, got {resolutions!r}", 1)
    try:
        table = convergence_table(
            loaded.problem, res, method=method, tol=tol, kmax=kmax
        )
    except ValueError as exc:
        _fail(str(exc), 1)
    except RuntimeError as exc:
        _fail(str(exc), 3)

    click.echo(f"{'panels':>8}  {'sup_error':>14}  {'ratio':>8}")
    for i, (r, err) in enumerate(zip(table.resolutions, table.errors)):
        ratio = f"{table.ratios[i - 1]:8.3f}" if i > 0 else f"{'-':>8}"
        click.echo(f"{r:>8}  {err:14.6e}  {ratio}")
    if len(res) == 2:
        click.echo("note: two resolutions make the ratio degenerate; use three or more")
    if report_path:
        write_report(
            report_path,
            {
                "problem": str(problem_file),
                "method": method,
                "rows": table.rows(),
            },
        )
        click.echo(f"wrote report: {report_path}")


@cli.command()
@click.argument("problem_file", type=click.Path())
def roots(problem_file):
    """Times at which each moving impulse crosses the current time."""
    loaded = _load(problem_file, "hybrid")
    schedule = loaded.problem.schedule
    for i, (sig, rts) in enumerate(zip(schedule.sigma, schedule.roots)):
        values = ", ".join(repr(float(r)) for r in np.atleast_1d(rts))
        click.echo(f"sigma[{i}] = {sig.to_source()}: roots [{values}]")
    if not schedule.sigma:
        click.echo("no moving impulses")
    bps = ", ".join(repr(float(b)) for b in np.atleast_1d(schedule.breakpoints))
    click.echo(f"breakpoints: [{bps}]")


@cli.command("check-matrix")
@click.argument("entries", nargs=9, type=float)
def check_matrix(entries):
    """Verdicts for the 3x3 matrix given row by row as nine numbers."""
    m = np.asarray(entries, dtype=float).reshape(3, 3)
    tr, s2, d = char_invariants(m)
    p0, p1, p3, q4 = criterion_quantities(m)
    click.echo(f"trace: {tr!r}")
    click.echo(f"pair_sum: {s2!r}")
    click.echo(f"det: {d!r}")
    click.echo(f"criterion quantities: {p0!r}, {p1!r}, {p3!r}, {q4!r}")
    click.echo(f"contractive by criterion: {str(is_contractive_criterion(m)).lower()}")
    click.echo(f"spectral radius: {spectral_radius(m)!r}")
    click.echo(f"contractive by eigenvalues: {str(is_contractive_eigen(m)).lower()}")


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="hv", standalone_mode=False)
    except click.exceptions.Abort:
        raise SystemExit(1)
    except click.ClickException as exc:
        exc.show()
        raise SystemExit(1)
    raise SystemExit(0)


if __name__ == "__main__":
    main()
