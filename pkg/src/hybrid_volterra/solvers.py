"""Fixed-point solvers for hybrid problems.

Two routes to the same discrete fixed point:

* :func:`picard_solve` - global successive approximation: all three
  components are re-evaluated over the whole horizon each sweep, and
  progress is measured in the exponentially weighted norms at weight mu.
* :func:`segment_solve` - marches segment by segment through the partition.
  Within a segment only the continuous nodes of that segment iterate; the
  impulse values eta and the consumed prefix of each moving trace beta are
  refreshed from the current continuous part after every sweep.  Because
  every membership test looks strictly into the past, values from segments
  not yet solved are masked out of every sum and integral, so the march is
  well posed.

Both return the solution triple plus a :class:`SolveReport` with per-sweep
component deltas (useful for checking contraction-rate predictions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contraction import NoContractiveWeight, find_mu
from .operator import (
    HybridProblem,
    SolutionTriple,
    _node_membership_times,
    _sc_eval,
    apply_operator,
    component_deltas,
    default_init,
    residual,
)
from .piecewise import PiecewiseFn


@dataclass
class SolveReport:
    """What a solver did: sweep count, per-sweep deltas, final residual."""

    method: str
    iterations: int
    mu: float
    converged: bool
    deltas: list[tuple[float, float, float]] = field(default_factory=list)
    final_residual: float = math.nan
    notes: tuple[str, ...] = ()

    @property
    def max_deltas(self) -> list[float]:
        return [max(d) for d in self.deltas]


def _default_mu(problem: HybridProblem) -> tuple[float, tuple[str, ...]]:
    """Weight for progress measurement: certified if constants allow."""
    if problem.lipschitz is not None:
        s = problem.schedule
        try:
            mu = find_mu(problem.lipschitz, s.horizon, s.h, s.n_tau, s.n_sigma)
            return mu, (f"mu={mu:.6g} from declared constants",)
        except NoContractiveWeight:
            return 1.0, ("declared constants admit no contractive weight; mu=1",)
    return 1.0, ()


def picard_solve(
    problem: HybridProblem,
    init: SolutionTriple | None = None,
    mu: float | None = None,
    tol: float = 1e-10,
    kmax: int = 200,
) -> tuple[SolutionTriple, SolveReport]:
    """Global successive approximation from ``init`` (default: forcing term).

    Stops when all three weighted component deltas fall to ``tol``.
    """
    notes: tuple[str, ...] = ()
    if mu is None:
        mu, notes = _default_mu(problem)
    cur = default_init(problem) if init is None else init
    report = SolveReport("picard", 0, float(mu), False, notes=notes)
    for _ in range(kmax):
        new = apply_operator(problem, cur)
        d = component_deltas(new, cur, problem, mu)
        report.deltas.append(d)
        report.iterations += 1
        cur = new
        if not all(map(math.isfinite, d)):
            report.notes += ("diverged: non-finite update",)
            break
        if max(d) <= tol:
            report.converged = True
            break
    report.final_residual = residual(problem, cur)
    return cur, report


def _compose_eta(problem: HybridProblem, xi: PiecewiseFn) -> np.ndarray:
    """Left limits of the continuous part at the fixed impulse times."""
    if not problem.n_tau:
        return np.zeros(0)
    return np.asarray(xi.eval(problem.tau), dtype=float)


def segment_solve(
    problem: HybridProblem,
    init: SolutionTriple | None = None,
    tol: float = 1e-10,
    kmax: int = 200,
) -> tuple[SolutionTriple, SolveReport]:
    """March the partition left to right with an inner sweep per segment.

    The first node of a segment carries the right limit at its breakpoint
    and is fully determined by earlier segments, so it is computed once;
    the remaining nodes iterate.  Deltas are plain suprema (no weight):
    each segment is short, so no damping is needed for a sound stop rule.
    """
    grid = problem.grid
    cur = default_init(problem) if init is None else init
    xi = cur.xi.values.copy()
    eta = cur.eta.copy()
    beta_rows = cur.beta_rows().copy()
    memb = _node_membership_times(grid)
    sigma_grid = problem.sigma_grid
    report = SolveReport("segment", 0, 0.0, True)

    def assemble() -> SolutionTriple:
        return SolutionTriple(
            PiecewiseFn(grid, xi.copy()),
            eta.copy(),
            tuple(PiecewiseFn(grid, row.copy()) for row in beta_rows),
        )

    for l in range(grid.num_segments):
        sl = grid.segment_slice(l)
        end = float(grid.partition[l + 1])
        # moving-trace entries consumed while solving this segment
        consumed = [
            np.flatnonzero(sigma_grid[p] <= end + 1e-12)
            for p in range(problem.n_sigma)
        ]
        for _ in range(kmax):
            triple = assemble()
            vals = _sc_eval(
                problem,
                triple,
                grid.times[sl],
                memb[sl],
                sigma_at_eval=sigma_grid[:, sl] if problem.n_sigma else None,
                beta_at_eval=beta_rows[:, sl] if problem.n_sigma else None,
            )
            d_xi = float(np.max(np.abs(vals - xi[sl]))) if vals.size else 0.0
            xi[sl] = vals
            new_eta = _compose_eta(problem, PiecewiseFn(grid, xi))
            d_eta = float(np.max(np.abs(new_eta - eta))) if eta.size else 0.0
            eta[:] = new_eta
            d_beta = 0.0
            if problem.n_sigma:
                triple = assemble()
                for p in range(problem.n_sigma):
                    idx = consumed[p]
                    if not idx.size:
                        continue
                    u = sigma_grid[p][idx]
                    new_vals = _sc_eval(problem, triple, u, u - 1e-10)
                    d_beta = max(
                        d_beta, float(np.max(np.abs(new_vals - beta_rows[p][idx])))
                    )
                    beta_rows[p][idx] = new_vals
            report.iterations += 1
            report.deltas.append((d_xi, d_eta, d_beta))
            if max(d_xi, d_eta, d_beta) <= tol:
                break
        else:
            report.converged = False
            report.notes += (f"segment {l} hit the sweep limit",)
    # now that every segment is solved, fill the unconsumed trace entries
    if problem.n_sigma:
        triple = assemble()
        for p in range(problem.n_sigma):
            u = sigma_grid[p]
            beta_rows[p] = _sc_eval(problem, triple, u, u - 1e-10)
    final = assemble()
    report.final_residual = residual(problem, final)
    return final, report


# ---------------------------------------------------------------------------
# Resolution study


@dataclass(frozen=True)
class ConvergenceReport:
    """Sup errors against a Richardson reference as resolution doubles."""

    resolutions: tuple[int, ...]
    errors: tuple[float, ...]
    ratios: tuple[float, ...]

    def rows(self) -> list[dict]:
        out = []
        for i, (res, err) in enumerate(zip(self.resolutions, self.errors)):
            row = {"panels": res, "sup_error": err}
            if i > 0:
                row["ratio"] = self.ratios[i - 1]
            out.append(row)
        return out


def at_resolution(problem: HybridProblem, panels: int) -> HybridProblem:
    """The same problem re-sampled with ``panels`` panels per segment."""
    return HybridProblem.build(
        schedule=problem.schedule,
        panels=panels,
        x0=problem.x0,
        f1=problem.f1,
        f2=problem.f2,
        G1=problem.G1,
        G2=problem.G2,
        G3=problem.G3,
        g=problem.g,
        lipschitz=problem.lipschitz,
    )


def convergence_table(
    problem: HybridProblem,
    resolutions: tuple[int, ...] = (16, 32, 64, 128),
    method: str = "picard",
    tol: float = 1e-12,
    kmax: int = 200,
) -> ConvergenceReport:
    """Solve at doubling resolutions and report sup errors and ratios.

    The reference is the Richardson extrapolant (4 x_fine - x_half) / 3 of
    the two finest runs; errors are suprema over the coarsest grid's nodes,
    which are exact nodes of every finer grid because resolutions double.
    A second-order scheme shows ratios near 4.
    """
    res = tuple(int(r) for r in resolutions)
    if len(res) < 2:
        raise ValueError("need at least two resolutions")
    for a, b in zip(res, res[1:]):
        if b != 2 * a:
            raise ValueError(f"resolutions must double: {a} -> {b}")

    def solve(panels: int) -> np.ndarray:
        p = at_resolution(problem, panels)
        if method == "picard":
            triple, rep = picard_solve(p, tol=tol, kmax=kmax)
        elif method == "segment":
            triple, rep = segment_solve(p, tol=tol, kmax=kmax)
        else:
            raise ValueError(f"unknown method {method!r}")
        if not rep.converged:
            raise RuntimeError(f"solver did not converge at {panels} panels")
        return triple.xi.values

    base = res[0]
    nseg = problem.grid.num_segments
    sols = []
    for r in res:
        v = solve(r)
        stride = r // base
        w = r + 1
        keep = np.concatenate(
            [l * w + stride * np.arange(base + 1) for l in range(nseg)]
        )
        sols.append(v[keep])
    ref = (4.0 * sols[-1] - sols[-2]) / 3.0
    errors = tuple(float(np.max(np.abs(s - ref))) for s in sols)
    ratios = tuple(
        errors[i] / errors[i + 1] if errors[i + 1] > 0 else math.inf
        for i in range(len(errors) - 1)
    )
    return ConvergenceReport(res, errors, ratios)
