"""The three-component solution operator for hybrid integral equations.

The state is a triple: a continuous part xi on the sample grid, one value
eta_i per fixed impulse time tau_i, and one trace beta_p per moving time
sigma_p (beta_p(t) plays the role of x(sigma_p(t))).  One application of
the operator evaluates, at a batch of times t with membership times m,

    x0(t)
    + integral_0^t f1(t, s, xi(s)) ds
    + integral_0^t integral_0^s f2(t, s, s1, xi(s), xi(s1)) ds1 ds
    + sum_{tau_i < m} G1(t, tau_i, eta_i)
    + sum_{tau_i < m} sum_{j < i} G2(t, tau_i, tau_j, eta_i, eta_j)
    + integral_0^t sum_{sigma_i(s) < m} sum_{tau_j < m}
          g(t, s, sigma_i(s), tau_j, xi(s), beta_i(s), eta_j) ds
    + sum_{sigma_i(t) < m} sum_{tau_j < m} G3(t, sigma_i(t), tau_j, beta_i(t), eta_j)

All membership tests are strict.  The membership time m is t nudged one
tick left or right: the continuous component uses the right limit at the
first node of every segment and the left limit everywhere else (so the two
stored values at a duplicated breakpoint node are the one-sided limits, and
the value *at* a breakpoint is the left one); the discrete component
evaluates at tau_l with m = tau_l - eps, which is exactly the left limit
there; the mixed component for impulse p evaluates at sigma_p(t) with the
left-limit membership.  Jumps are therefore never special-cased: they fall
out of re-evaluating the same formula with memberships taken one tick
earlier or later (:func:`jump_at`).

Quadrature nodes coincide with grid nodes, so xi and beta_i enter the
integrands by their stored node values; only x0, sigma_i and the t argument
see off-node times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expressions import KernelExpr, parse_kernel, zero_kernel
from .piecewise import (
    Grid,
    PiecewiseFn,
    norm_continuous,
    norm_discrete,
    norm_mixed,
)
from .quadrature import row_integrate_to, integrate_to, triangle_inner_nodes
from .schedule import MERGE_TOL, ImpulseSchedule
from .contraction import LipschitzSet

EPS = MERGE_TOL

ARITIES: dict[str, tuple[str, ...]] = {
    "x0": ("t",),
    "f1": ("t", "s", "x"),
    "f2": ("t", "s", "s1", "x", "x1"),
    "G1": ("t", "tau", "eta"),
    "G2": ("t", "taui", "tauj", "etai", "etaj"),
    "G3": ("t", "sig", "tau", "beta", "eta"),
    "g": ("t", "s", "sig", "tau", "x", "beta", "eta"),
}


def _coerce(name: str, value) -> KernelExpr:
    arity = ARITIES[name]
    if value is None:
        return zero_kernel(arity)
    if isinstance(value, str):
        return parse_kernel(value, arity)
    if isinstance(value, KernelExpr):
        if value.arity != arity:
            raise ValueError(
                f"kernel {name} must have arguments {arity}, got {value.arity}"
            )
        return value
    raise TypeError(f"kernel {name} must be a string or KernelExpr")


@dataclass(frozen=True)
class HybridProblem:
    """A full problem instance: kernels, impulse schedule, sample grid."""

    x0: KernelExpr
    f1: KernelExpr
    f2: KernelExpr
    G1: KernelExpr
    G2: KernelExpr
    G3: KernelExpr
    g: KernelExpr
    schedule: ImpulseSchedule
    grid: Grid
    lipschitz: LipschitzSet | None = None

    def __post_init__(self):
        for name in ARITIES:
            k = getattr(self, name)
            if not isinstance(k, KernelExpr) or k.arity != ARITIES[name]:
                raise ValueError(f"kernel {name} must have arguments {ARITIES[name]}")
        if not np.array_equal(self.grid.partition, self.schedule.partition):
            raise ValueError("grid partition must match the schedule partition")
        object.__setattr__(self, "tau", np.asarray(self.schedule.tau, dtype=float))
        object.__setattr__(
            self, "sigma_grid", self.schedule.sigma_values(self.grid.times)
        )

    @classmethod
    def build(
        cls,
        *,
        schedule: ImpulseSchedule,
        panels: int = 256,
        x0="0",
        f1=None,
        f2=None,
        G1=None,
        G2=None,
        G3=None,
        g=None,
        lipschitz: LipschitzSet | None = None,
    ) -> "HybridProblem":
        """Assemble a problem; kernels may be source strings, absent = zero."""
        grid = Grid(schedule.partition, panels)
        return cls(
            x0=_coerce("x0", x0),
            f1=_coerce("f1", f1),
            f2=_coerce("f2", f2),
            G1=_coerce("G1", G1),
            G2=_coerce("G2", G2),
            G3=_coerce("G3", G3),
            g=_coerce("g", g),
            schedule=schedule,
            grid=grid,
            lipschitz=lipschitz,
        )

    @property
    def n_tau(self) -> int:
        return self.schedule.n_tau

    @property
    def n_sigma(self) -> int:
        return self.schedule.n_sigma


@dataclass(frozen=True)
class SolutionTriple:
    """(continuous part, fixed-impulse values, moving-impulse traces)."""

    xi: PiecewiseFn
    eta: np.ndarray
    beta: tuple[PiecewiseFn, ...]

    def __post_init__(self):
        object.__setattr__(self, "eta", np.asarray(self.eta, dtype=float))
        object.__setattr__(self, "beta", tuple(self.beta))
        for b in self.beta:
            if b.grid is not self.xi.grid and not np.array_equal(
                b.grid.times, self.xi.grid.times
            ):
                raise ValueError("beta traces must live on the same grid as xi")

    def beta_rows(self) -> np.ndarray:
        g = self.xi.grid
        if not self.beta:
            return np.zeros((0, g.size))
        return np.vstack([b.values for b in self.beta])


def default_init(problem: HybridProblem) -> SolutionTriple:
    """Zeroth iterate: the forcing term in every component."""
    g = problem.grid
    xi = PiecewiseFn.from_expression(g, problem.x0)
    eta = (
        problem.x0.evaluate({"t": problem.tau})
        if problem.n_tau
        else np.zeros(0)
    )
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (problem.n_tau,)).copy()
    beta = []
    for p in range(problem.n_sigma):
        vals = problem.x0.evaluate({"t": problem.sigma_grid[p]})
        vals = np.broadcast_to(np.asarray(vals, dtype=float), g.times.shape).copy()
        beta.append(PiecewiseFn(g, vals))
    return SolutionTriple(xi, np.asarray(eta, dtype=float), tuple(beta))


# ---------------------------------------------------------------------------
# Core evaluation


def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i, j) with j < i, flattened."""
    ii, jj = np.tril_indices(n, k=-1)
    return ii, jj


def _sc_eval(
    problem: HybridProblem,
    triple: SolutionTriple,
    eval_times: np.ndarray,
    memb_times: np.ndarray,
    sigma_at_eval: np.ndarray | None = None,
    beta_at_eval: np.ndarray | None = None,
) -> np.ndarray:
    """The operator formula at ``eval_times`` with memberships ``memb_times``.

    ``sigma_at_eval`` / ``beta_at_eval`` carry sigma_i and beta_i already
    evaluated at the evaluation times (shape (n_sigma, E)); they exist so
    node-aligned callers can supply the stored one-sided values instead of
    interpolating.  When omitted they are computed here, with beta read by
    its left-limit convention.
    """
    grid = problem.grid
    te = np.asarray(eval_times, dtype=float)
    m = np.asarray(memb_times, dtype=float)
    E = te.size
    times = grid.times
    xi = triple.xi.values
    eta = triple.eta
    tau = problem.tau
    n_sigma = problem.n_sigma

    if n_sigma and sigma_at_eval is None:
        sigma_at_eval = np.vstack(
            [
                np.broadcast_to(
                    np.asarray(s.evaluate({"t": te}), dtype=float), te.shape
                )
                for s in problem.schedule.sigma
            ]
        )
    if n_sigma and beta_at_eval is None:
        beta_at_eval = np.vstack([b.eval(te) for b in triple.beta])

    out = np.broadcast_to(
        np.asarray(problem.x0.evaluate({"t": te}), dtype=float), te.shape
    ).astype(float, copy=True)

    if not problem.f1.is_zero:
        if problem.f1.references("t"):
            rows = problem.f1.evaluate(
                {"t": te[:, None], "s": times[None, :], "x": xi[None, :]}
            )
            rows = np.broadcast_to(rows, (E, times.size))
            out += row_integrate_to(grid, rows, te)
        else:
            w = problem.f1.evaluate({"s": times, "x": xi})
            w = np.broadcast_to(np.asarray(w, dtype=float), times.shape)
            out += integrate_to(grid, w, te)

    if not problem.f2.is_zero:
        if problem.f2.references("t"):
            inner = np.empty((E, times.size))
            for r in range(E):
                F = problem.f2.evaluate(
                    {
                        "t": te[r],
                        "s": times[:, None],
                        "s1": times[None, :],
                        "x": xi[:, None],
                        "x1": xi[None, :],
                    }
                )
                F = np.broadcast_to(F, (times.size, times.size))
                inner[r] = triangle_inner_nodes(grid, F)
            out += row_integrate_to(grid, inner, te)
        else:
            F = problem.f2.evaluate(
                {
                    "s": times[:, None],
                    "s1": times[None, :],
                    "x": xi[:, None],
                    "x1": xi[None, :],
                }
            )
            F = np.broadcast_to(F, (times.size, times.size))
            out += integrate_to(grid, triangle_inner_nodes(grid, F), te)

    if tau.size and not problem.G1.is_zero:
        vals = problem.G1.evaluate(
            {"t": te[:, None], "tau": tau[None, :], "eta": eta[None, :]}
        )
        vals = np.broadcast_to(vals, (E, tau.size))
        mask = tau[None, :] < m[:, None]
        out += np.sum(vals * mask, axis=1)

    if tau.size >= 2 and not problem.G2.is_zero:
        ii, jj = _pair_indices(tau.size)
        vals = problem.G2.evaluate(
            {
                "t": te[:, None],
                "taui": tau[ii][None, :],
                "tauj": tau[jj][None, :],
                "etai": eta[ii][None, :],
                "etaj": eta[jj][None, :],
            }
        )
        vals = np.broadcast_to(vals, (E, ii.size))
        mask = tau[ii][None, :] < m[:, None]
        out += np.sum(vals * mask, axis=1)

    if n_sigma and tau.size and not problem.g.is_zero:
        beta_rows = triple.beta_rows()
        for i in range(n_sigma):
            sig_s = problem.sigma_grid[i]
            for j in range(tau.size):
                rows = problem.g.evaluate(
                    {
                        "t": te[:, None],
                        "s": times[None, :],
                        "sig": sig_s[None, :],
                        "tau": tau[j],
                        "x": xi[None, :],
                        "beta": beta_rows[i][None, :],
                        "eta": eta[j],
                    }
                )
                rows = np.broadcast_to(rows, (E, times.size)).astype(float, copy=True)
                mask = (sig_s[None, :] < m[:, None]) & (tau[j] < m[:, None])
                rows *= mask
                out += row_integrate_to(grid, rows, te)

    if n_sigma and tau.size and not problem.G3.is_zero:
        for i in range(n_sigma):
            vals = problem.G3.evaluate(
                {
                    "t": te,
                    "sig": sigma_at_eval[i],
                    "tau": tau[:, None],
                    "beta": beta_at_eval[i],
                    "eta": eta[:, None],
                }
            )
            vals = np.broadcast_to(vals, (tau.size, E))
            mask = (sigma_at_eval[i][None, :] < m[None, :]) & (
                tau[:, None] < m[None, :]
            )
            out += np.sum(vals * mask, axis=0)

    return out


def _node_membership_times(grid: Grid) -> np.ndarray:
    """t - eps everywhere except the first node of each segment (t + eps)."""
    m = grid.times - EPS
    w = grid.panels + 1
    first = np.arange(grid.num_segments) * w
    m[first] = grid.times[first] + EPS
    return m


def apply_continuous(problem: HybridProblem, triple: SolutionTriple) -> PiecewiseFn:
    """New continuous part, one-sided values at duplicated breakpoint nodes."""
    grid = problem.grid
    vals = _sc_eval(
        problem,
        triple,
        grid.times,
        _node_membership_times(grid),
        sigma_at_eval=problem.sigma_grid if problem.n_sigma else None,
        beta_at_eval=triple.beta_rows() if problem.n_sigma else None,
    )
    return PiecewiseFn(grid, vals)


def apply_discrete(problem: HybridProblem, triple: SolutionTriple) -> np.ndarray:
    """New fixed-impulse values: the formula at tau_l with left memberships."""
    if not problem.n_tau:
        return np.zeros(0)
    return _sc_eval(problem, triple, problem.tau, problem.tau - EPS)


def apply_mixed(problem: HybridProblem, triple: SolutionTriple) -> tuple[PiecewiseFn, ...]:
    """New moving traces: component p is the formula at sigma_p(t)."""
    grid = problem.grid
    out = []
    for p in range(problem.n_sigma):
        u = problem.sigma_grid[p]
        vals = _sc_eval(problem, triple, u, u - EPS)
        out.append(PiecewiseFn(grid, vals))
    return tuple(out)


def apply_operator(problem: HybridProblem, triple: SolutionTriple) -> SolutionTriple:
    """One full sweep of all three components (simultaneous update)."""
    return SolutionTriple(
        apply_continuous(problem, triple),
        apply_discrete(problem, triple),
        apply_mixed(problem, triple),
    )


def jump_at(problem: HybridProblem, triple: SolutionTriple, alpha: float) -> float:
    """Predicted jump of the continuous part at breakpoint ``alpha``.

    Computed as the difference of the operator formula at alpha with
    memberships one tick right and one tick left; no displayed jump formula
    is involved, so it stays valid when the running integral itself jumps
    (for instance under a constant moving-time function).
    """
    bps = problem.schedule.breakpoints
    if not any(abs(alpha - b) <= MERGE_TOL for b in np.atleast_1d(bps)):
        raise ValueError(f"{alpha} is not a breakpoint of this problem")
    t = np.array([float(alpha)])
    right = _sc_eval(problem, triple, t, t + EPS)
    left = _sc_eval(problem, triple, t, t - EPS)
    return float(right[0] - left[0])


# ---------------------------------------------------------------------------
# Distances


def component_deltas(
    new: SolutionTriple,
    old: SolutionTriple,
    problem: HybridProblem,
    mu: float,
) -> tuple[float, float, float]:
    """Weighted distances between two triples, one per component."""
    d_xi = norm_continuous(new.xi - old.xi, mu)
    d_eta = norm_discrete(new.eta - old.eta, problem.tau, mu)
    diffs = [PiecewiseFn(problem.grid, nb.values - ob.values)
             for nb, ob in zip(new.beta, old.beta)]
    d_beta = norm_mixed(diffs, problem.sigma_grid, mu) if diffs else 0.0
    return d_xi, d_eta, d_beta


def residual(problem: HybridProblem, triple: SolutionTriple) -> float:
    """Unweighted sup distance between the triple and its image."""
    image = apply_operator(problem, triple)
    return max(component_deltas(image, triple, problem, mu=0.0))
