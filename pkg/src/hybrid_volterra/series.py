"""Multilinear series equations over the cube [0, t]^n.

Solves
    y(t) = y0(t) + sum_{n=1}^{N} (1/n!) integral_{[0,t]^n}
               f_n(t, s1..sn, y(s1)..y(sn)) ds1..dsn,

the symmetric-kernel normal form in which each order-n term integrates
over the full cube and carries a 1/n! factor.  For a symmetric kernel this
equals the nested (simplex) form without the factor;
:func:`nested_equals_cube` demonstrates the identity numerically, and
asymmetric kernels can be brought to this form with
:func:`~hybrid_volterra.expressions.symmetrize_second_order`.

Successive approximation contracts in the weighted sup norm once
    ((1 - e^{-mu T}) / mu) * sum_{m=0}^{N-1} (T^m / m!) L_{m+1} < 1,
where L_n is a Lipschitz constant of f_n in each state slot
(:func:`series_contraction_coefficient`).

Order n costs a size-G^n array per sweep, so orders above three are
refused unless explicitly allowed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expressions import KernelExpr, parse_kernel, zero_kernel
from .piecewise import Grid, PiecewiseFn, norm_continuous, uniform_grid
from .quadrature import (
    cube_diagonal,
    integrate_to,
    node_cumulative,
    row_integrate_to,
    triangle_inner_nodes,
)
from .solvers import SolveReport

MAX_ORDER = 3


def series_arity(n: int) -> tuple[str, ...]:
    """Argument names of the order-n kernel: t, s1..sn, x1..xn."""
    return ("t",) + tuple(f"s{i}" for i in range(1, n + 1)) + tuple(
        f"x{i}" for i in range(1, n + 1)
    )


@dataclass(frozen=True)
class SeriesProblem:
    """Forcing term, one kernel per order, and the sample grid."""

    y0: KernelExpr
    kernels: tuple[KernelExpr, ...]
    grid: Grid
    lipschitz: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.y0.arity != ("t",):
            raise ValueError("y0 must be an expression in t alone")
        for n, k in enumerate(self.kernels, start=1):
            if k.arity != series_arity(n):
                raise ValueError(
                    f"order-{n} kernel must have arguments {series_arity(n)}"
                )
        if self.lipschitz is not None:
            if len(self.lipschitz) != len(self.kernels):
                raise ValueError("need one Lipschitz constant per kernel order")
            if any(not (L >= 0) for L in self.lipschitz):
                raise ValueError("Lipschitz constants must be nonnegative")

    @classmethod
    def build(
        cls,
        *,
        horizon: float,
        y0="0",
        kernels=(),
        panels: int = 256,
        lipschitz=None,
        allow_high_order: bool = False,
    ) -> "SeriesProblem":
        """Assemble from kernel sources; order = position in ``kernels``."""
        ks = []
        for n, src in enumerate(kernels, start=1):
            arity = series_arity(n)
            if src is None:
                ks.append(zero_kernel(arity))
            elif isinstance(src, str):
                ks.append(parse_kernel(src, arity))
            else:
                ks.append(src)
        if len(ks) > MAX_ORDER and not allow_high_order:
            raise ValueError(
                f"order {len(ks)} builds arrays of size nodes^{len(ks)}; "
                "pass allow_high_order=True to proceed anyway"
            )
        grid = uniform_grid(float(horizon), panels)
        y0k = parse_kernel(y0, ("t",)) if isinstance(y0, str) else y0
        lip = None if lipschitz is None else tuple(float(L) for L in lipschitz)
        return cls(y0k, tuple(ks), grid, lip)

    @property
    def order(self) -> int:
        return len(self.kernels)

    @property
    def horizon(self) -> float:
        return self.grid.horizon


def _cube_bindings(times: np.ndarray, values: np.ndarray, n: int) -> dict:
    """s_i / x_i broadcast along axis i-1 of an n-dimensional cube."""
    out = {}
    for i in range(1, n + 1):
        shape = [1] * n
        shape[i - 1] = times.size
        out[f"s{i}"] = times.reshape(shape)
        out[f"x{i}"] = values.reshape(shape)
    return out


def apply_series_operator(problem: SeriesProblem, y: PiecewiseFn) -> PiecewiseFn:
    """One sweep: forcing term plus all cube integrals of the current y."""
    grid = problem.grid
    times = grid.times
    out = np.broadcast_to(
        np.asarray(problem.y0.evaluate({"t": times}), dtype=float), times.shape
    ).astype(float, copy=True)
    for n, kernel in enumerate(problem.kernels, start=1):
        if kernel.is_zero:
            continue
        factor = 1.0 / math.factorial(n)
        bindings = _cube_bindings(times, y.values, n)
        full = (times.size,) * n
        if not kernel.references("t"):
            F = np.broadcast_to(kernel.evaluate(bindings), full)
            out += factor * cube_diagonal(grid, F, n)
        else:
            for r in range(times.size):
                F = np.broadcast_to(
                    kernel.evaluate({"t": times[r], **bindings}), full
                )
                out[r] += factor * cube_diagonal(grid, F, n)[r]
    return PiecewiseFn(grid, out)


def series_contraction_coefficient(
    lipschitz, horizon: float, mu: float
) -> float:
    """((1-e^{-mu T})/mu) * sum_m (T^m/m!) L_{m+1} - contraction when < 1."""
    if not (mu > 0 and math.isfinite(mu)):
        raise ValueError(f"mu must be positive and finite, got {mu}")
    T = float(horizon)
    total = sum(
        (T ** m / math.factorial(m)) * float(L)
        for m, L in enumerate(lipschitz)
    )
    return -math.expm1(-mu * T) / mu * total


def _default_series_mu(problem: SeriesProblem) -> float:
    if problem.lipschitz is None:
        return 1.0
    mu = 1.0
    for _ in range(64):
        if series_contraction_coefficient(problem.lipschitz, problem.horizon, mu) <= 0.5:
            return mu
        mu *= 2.0
    return mu


def series_solve(
    problem: SeriesProblem,
    mu: float | None = None,
    tol: float = 1e-10,
    kmax: int = 200,
) -> tuple[PiecewiseFn, SolveReport]:
    """Successive approximation from the forcing term."""
    if mu is None:
        mu = _default_series_mu(problem)
    cur = PiecewiseFn.from_expression(problem.grid, problem.y0)
    report = SolveReport("series", 0, float(mu), False)
    for _ in range(kmax):
        new = apply_series_operator(problem, cur)
        d = norm_continuous(new - cur, mu)
        report.deltas.append((d, 0.0, 0.0))
        report.iterations += 1
        cur = new
        if not math.isfinite(d):
            report.notes += ("diverged: non-finite update",)
            break
        if d <= tol:
            report.converged = True
            break
    final = apply_series_operator(problem, cur)
    report.final_residual = float(np.max(np.abs(final.values - cur.values)))
    return cur, report


def nested_equals_cube(
    kernel, x: PiecewiseFn, upper: float | None = None
) -> tuple[float, float]:
    """(cube integral / 2!, nested integral) of a symmetric order-2 kernel.

    ``kernel`` is an expression in (t, s1, s2, x1, x2); the state slots are
    filled from ``x`` and both integrals run over [0, upper] (default: the
    grid horizon), the first over the square and the second over the
    triangle s1 <= s2.  The returns agree up to quadrature error precisely
    because the kernel is symmetric under the simultaneous swap
    (s1, x1) <-> (s2, x2); asymmetric input is rejected, since the
    identity is false for it.
    """
    if isinstance(kernel, str):
        kernel = parse_kernel(kernel, series_arity(2))
    if kernel.arity != series_arity(2):
        raise ValueError(f"kernel must have arguments {series_arity(2)}")
    grid = x.grid
    t = grid.horizon if upper is None else float(upper)
    if not 0.0 <= t <= grid.horizon + 1e-12:
        raise ValueError("upper limit must lie within the grid of x")
    times = grid.times
    xv = x.values
    binds = {
        "t": t,
        "s1": times[:, None],
        "s2": times[None, :],
        "x1": xv[:, None],
        "x2": xv[None, :],
    }
    F = np.broadcast_to(
        np.asarray(kernel.evaluate(binds), float), (times.size, times.size)
    ).copy()
    scale = max(1.0, float(np.max(np.abs(F))))
    if np.max(np.abs(F - F.T)) > 1e-9 * scale:
        raise ValueError("kernel is not symmetric under (s1, x1) <-> (s2, x2)")
    inner_rows = row_integrate_to(grid, F, np.full(times.size, t))
    cube = float(integrate_to(grid, inner_rows, t)[0])
    triangle = triangle_inner_nodes(grid, F.T)
    nested = float(integrate_to(grid, triangle, t)[0])
    return cube / 2.0, nested
