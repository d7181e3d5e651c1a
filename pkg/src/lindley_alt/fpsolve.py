"""Successive approximation of F(x) = 1 - int_x^inf F(y - x) dF_X(y) on a grid.

The map T is a sup-norm contraction with factor P[X > 0].  Its discrete
version assigns each grid cell [y_j, y_j + h] the exact mass
tail(y_j) - tail(y_j + h) of X and evaluates F at the cell midpoint by
linear interpolation, which keeps the contraction factor at or below
P[X > 0].  The resulting discrete correlation is evaluated with FFTs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from . import dists
from .dists import DistSpec


class NonContractionError(ValueError):
    """P[X > 0] >= 1, so successive approximation is not guaranteed to converge."""


class GridMismatchError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_max > 0 or self.n_points < 2:
            raise ValueError("grid needs x_max > 0 and at least two points")

    @property
    def h(self) -> float:
        return self.x_max / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.x_max, self.n_points)

    @classmethod
    def with_spacing(cls, x_max: float, h: float) -> "Grid":
        n = int(math.ceil(x_max / h - 1e-9)) + 1
        return cls((n - 1) * h, n)


@dataclass(frozen=True)
class GridFun:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise GridMismatchError("values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridFun":
        return cls(grid, np.full(grid.n_points, float(c)))

    def __call__(self, x):
        # linear interpolation, constant beyond x_max
        return np.interp(x, self.grid.nodes, self.values)

    def sup_dist(self, other) -> float:
        if isinstance(other, GridFun):
            if other.grid != self.grid:
                raise GridMismatchError("grids differ")
            other = other.values
        return float(np.max(np.abs(self.values - np.asarray(other))))


@dataclass(frozen=True)
class XRep:
    """Tail of X = B - A at the grid nodes of [0, x_max]; rho = P[X > 0]."""

    grid: Grid
    tail: np.ndarray
    rho: float
    masses: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.asarray(self.tail, dtype=float)
        if t.shape != (self.grid.n_points,):
            raise GridMismatchError("tail does not match the grid")
        if np.any(np.diff(t) > 1e-12):
            raise ValueError("tail of X must be nonincreasing")
        t.setflags(write=False)
        object.__setattr__(self, "tail", t)
        object.__setattr__(self, "masses", t[:-1] - t[1:])

    @property
    def tail_end(self) -> float:
        return float(self.tail[-1])


def default_x_max(a_spec: DistSpec, b_spec: DistSpec, level: float = 1e-9) -> float:
    """Smallest x with P[X > x] < level, capped at 50 mean-of-B units."""
    cap = 50.0 * max(dists.mean(b_spec), 1e-12)
    if dists.x_tail(a_spec, b_spec, 0.0) < level:
        return min(1.0, cap)
    hi = 1.0
    while dists.x_tail(a_spec, b_spec, hi) >= level:
        hi *= 2.0
        if hi >= cap:
            return cap
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if dists.x_tail(a_spec, b_spec, mid) >= level:
            lo = mid
        else:
            hi = mid
    return min(hi, cap)


def build_x_rep(a_spec: DistSpec, b_spec: DistSpec, grid: Grid) -> XRep:
    t = np.asarray(dists.x_tail(a_spec, b_spec, grid.nodes), dtype=float)
    # rounding can leave tiny upward steps in a numerically integrated tail
    t = np.minimum.accumulate(np.clip(t, 0.0, 1.0))
    rho = dists.prob_x_positive(a_spec, b_spec)
    return XRep(grid, t, float(rho))


def upper_part(f: GridFun, x_rep: XRep) -> np.ndarray:
    """The integral int_x^inf F(y - x) dF_X(y) at every node, i.e. 1 - T F."""
    if f.grid != x_rep.grid:
        raise GridMismatchError("grid function and X representation use different grids")
    v = f.values
    mid = 0.5 * (v[:-1] + v[1:])
    m = x_rep.masses
    n = len(m)
    # out[i] = sum_k mid[k] * m[i + k] = (reversed m convolved with mid)[n - 1 - i]
    conv = fftconvolve(m[::-1], mid) if n > 64 else np.convolve(m[::-1], mid)
    out = np.empty(len(v))
    out[:-1] = conv[:n][::-1]
    out[-1] = 0.0
    # mass beyond x_max sees F at its last value
    out += x_rep.tail_end * v[-1]
    return out


def map_T(f: GridFun, x_rep: XRep) -> GridFun:
    return GridFun(f.grid, 1.0 - upper_part(f, x_rep))


@dataclass
class FixedPointResult:
    f: GridFun
    iterations: int
    error_bound: float
    last_step: float
    history: list

    @property
    def gap_bound(self) -> float:
        """A-posteriori bound on the distance to the discrete fixed point."""
        return self.history[-1]["gap_bound"] if self.history else 0.0


def solve(
    x_rep: XRep,
    f0: GridFun | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> FixedPointResult:
    """Iterate T until the contraction estimate puts the fixed point within tol."""
    rho = x_rep.rho
    if rho >= 1.0:
        raise NonContractionError(
            "P[X > 0] = 1: no contraction; use the simulation module for this regime"
        )
    if f0 is None:
        f0 = GridFun.constant(x_rep.grid, 1.0)
    threshold = tol * (1.0 - rho) / rho if rho > 0 else math.inf
    f = f0
    first_step = None
    history = []
    for k in range(1, max_iter + 1):
        nxt = map_T(f, x_rep)
        d = nxt.sup_dist(f)
        if first_step is None:
            first_step = d
        apriori = rho**k * first_step / (1.0 - rho)
        gap = rho * d / (1.0 - rho)
        history.append({"iteration": k, "step": d, "apriori_bound": apriori, "gap_bound": gap})
        f = nxt
        if d <= threshold or d == 0.0:
            return FixedPointResult(f, k, apriori, d, history)
    raise ConvergenceError(f"no convergence after {max_iter} iterations (last step {d:.3e})")


def contraction_check(f1: GridFun, f2: GridFun, x_rep: XRep) -> float:
    """||T f1 - T f2|| / ||f1 - f2|| in the sup norm."""
    den = f1.sup_dist(f2)
    if den == 0:
        raise ZeroDivisionError("f1 and f2 coincide")
    return map_T(f1, x_rep).sup_dist(map_T(f2, x_rep)) / den


def solve_specs(
    a_spec: DistSpec,
    b_spec: DistSpec,
    h: float = 1e-3,
    tol: float = 1e-8,
    x_max: float | None = None,
) -> tuple[FixedPointResult, XRep]:
    """Convenience pipeline: grid, X representation and fixed point."""
    if x_max is None:
        x_max = default_x_max(a_spec, b_spec)
    grid = Grid.with_spacing(x_max, h)
    x_rep = build_x_rep(a_spec, b_spec, grid)
    return solve(x_rep, tol=tol), x_rep
