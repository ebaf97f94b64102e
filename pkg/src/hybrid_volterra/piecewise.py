"""Piecewise-continuous functions on a segmented grid, with weighted norms.

Solutions live in the space of functions on [0, T] that are continuous on
each open segment between breakpoints and have one-sided limits at the
breakpoints.  The value *at* a breakpoint is the left limit; the right
limit is stored separately.  A :class:`Grid` fixes the partition
``0 = a_0 < a_1 < ... < a_M = T`` and samples each segment uniformly with
``m`` panels (``m + 1`` nodes), so both one-sided values at an interior
breakpoint are represented: the last node of the segment ending there and
the first node of the segment starting there share the same time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expressions import KernelExpr, parse_kernel

_TIME_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Shared sample grid: a partition of [0, T] and per-segment nodes."""

    partition: np.ndarray
    panels: int
    times: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        part = np.asarray(self.partition, dtype=float)
        if part.ndim != 1 or part.size < 2:
            raise ValueError("partition must contain at least [0, T]")
        if not np.all(np.diff(part) > 0):
            raise ValueError("partition must be strictly increasing")
        if abs(part[0]) > _TIME_TOL:
            raise ValueError("partition must start at 0")
        if self.panels < 2:
            raise ValueError("need at least 2 panels per segment")
        object.__setattr__(self, "partition", part)
        unit = np.arange(self.panels + 1, dtype=float) / self.panels
        times = np.concatenate(
            [part[l] + unit * (part[l + 1] - part[l]) for l in range(part.size - 1)]
        )
        object.__setattr__(self, "times", times)

    @property
    def horizon(self) -> float:
        return float(self.partition[-1])

    @property
    def num_segments(self) -> int:
        return self.partition.size - 1

    @property
    def size(self) -> int:
        return self.num_segments * (self.panels + 1)

    def segment_slice(self, l: int) -> slice:
        w = self.panels + 1
        return slice(l * w, (l + 1) * w)

    def segment_of(self, t: np.ndarray, side: str = "left") -> np.ndarray:
        """Segment index containing each time; breakpoints resolve by ``side``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -_TIME_TOL) or np.any(t > self.horizon + _TIME_TOL):
            bad = t[(t < -_TIME_TOL) | (t > self.horizon + _TIME_TOL)]
            raise ValueError(f"time {float(np.ravel(bad)[0])} outside [0, {self.horizon}]")
        mode = "left" if side == "left" else "right"
        idx = np.searchsorted(self.partition[1:-1], t, side=mode)
        return np.clip(idx, 0, self.num_segments - 1)

    def locate(self, t, side: str = "left"):
        """Map times to (segment, node offset, fraction) for interpolation."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        seg = self.segment_of(t, side)
        a = self.partition[seg]
        b = self.partition[seg + 1]
        theta = np.clip((t - a) / (b - a) * self.panels, 0.0, self.panels)
        j = np.minimum(theta.astype(int), self.panels - 1)
        frac = theta - j
        return seg, j, frac


def uniform_grid(horizon: float, panels: int = 256, interior: Sequence[float] = ()) -> Grid:
    pts = [0.0] + sorted(float(p) for p in interior) + [float(horizon)]
    return Grid(np.asarray(pts), panels)


class PiecewiseFn:
    """Node samples of a piecewise-continuous function on a :class:`Grid`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} node values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("node values must be finite")
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "PiecewiseFn":
        try:
            vals = np.asarray(fn(grid.times), dtype=float)
            if vals.shape != grid.times.shape:
                raise TypeError
        except TypeError:
            vals = np.array([float(fn(t)) for t in grid.times])
        return cls(grid, vals)

    @classmethod
    def from_expression(cls, grid: Grid, expr, var: str = "t") -> "PiecewiseFn":
        if isinstance(expr, str):
            expr = parse_kernel(expr, (var,))
        vals = np.broadcast_to(np.asarray(expr.evaluate({var: grid.times}), dtype=float),
                               grid.times.shape).copy()
        return cls(grid, vals)

    def _eval(self, t, side: str):
        seg, j, frac = self.grid.locate(t, side)
        base = seg * (self.grid.panels + 1) + j
        v = self.values[base] + frac * (self.values[base + 1] - self.values[base])
        return v

    def eval(self, t):
        """Value at ``t``; at a breakpoint this is the left limit."""
        out = self._eval(t, "left")
        return float(out[0]) if np.ndim(t) == 0 else out

    def eval_left(self, t):
        return self.eval(t)

    def eval_right(self, t):
        """Right limit at ``t`` (equals eval away from breakpoints)."""
        out = self._eval(t, "right")
        return float(out[0]) if np.ndim(t) == 0 else out

    def jump_table(self) -> list[tuple[float, float]]:
        """(breakpoint, right limit - left limit) for interior breakpoints."""
        out = []
        w = self.grid.panels + 1
        for l in range(1, self.grid.num_segments):
            alpha = float(self.grid.partition[l])
            left = self.values[l * w - 1]
            right = self.values[l * w]
            out.append((alpha, float(right - left)))
        return out

    def __sub__(self, other: "PiecewiseFn") -> "PiecewiseFn":
        if other.grid is not self.grid and not np.array_equal(
            other.grid.times, self.grid.times
        ):
            raise ValueError("grids differ")
        return PiecewiseFn(self.grid, self.values - other.values)


# ---------------------------------------------------------------------------
# Weighted norms.  All three are exponentially weighted suprema, evaluated
# as maxima over stored nodes (both one-sided values at breakpoints are
# nodes, so they participate).


def norm_continuous(fn: PiecewiseFn, mu: float) -> float:
    """max over nodes of e^{-mu t} |f(t)|."""
    _check_mu(mu)
    return float(np.max(np.exp(-mu * fn.grid.times) * np.abs(fn.values)))


def norm_discrete(eta: np.ndarray, tau: np.ndarray, mu: float) -> float:
    """max over fixed impulse times of e^{-mu tau_i} |eta_i| (0 if empty)."""
    _check_mu(mu)
    eta = np.asarray(eta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if eta.shape != tau.shape:
        raise ValueError(f"eta has shape {eta.shape} but tau has shape {tau.shape}")
    if eta.size == 0:
        return 0.0
    return float(np.max(np.exp(-mu * tau) * np.abs(eta)))


def norm_mixed(betas: Sequence[PiecewiseFn], sigma_values: np.ndarray, mu: float) -> float:
    """max over i and nodes of e^{-mu sigma_i(t)} |beta_i(t)| (0 if empty).

    ``sigma_values`` holds sigma_i evaluated on the grid nodes, one row per
    moving impulse; the weight uses the *moving* time, not the node time.
    """
    _check_mu(mu)
    betas = list(betas)
    if not betas:
        return 0.0
    sigma_values = np.asarray(sigma_values, dtype=float)
    if sigma_values.shape != (len(betas), betas[0].grid.size):
        raise ValueError("sigma_values must be one row of node values per beta")
    best = 0.0
    for i, b in enumerate(betas):
        best = max(best, float(np.max(np.exp(-mu * sigma_values[i]) * np.abs(b.values))))
    return best


def _check_mu(mu: float) -> None:
    if not (mu >= 0) or not np.isfinite(mu):
        raise ValueError(f"weight mu must be finite and >= 0, got {mu}")
