"""Closed-form waiting-time distribution for exponential A and class-M B.

With A ~ Exp(mu) and a tail of B that splits as sum g_i(x) h_i(y), the
steady-state distribution is

    F_W(x) = 1 - int_0^inf e^{-mu u} (mu pi0 Bbar(x + u) + mu sum c_i g_i(x + u)) du

where (pi0, c_1..c_n) solve an (n+1)-dimensional linear system.  Every
coefficient of that system is an integral of exp-poly-trig functions and is
computed exactly in :mod:`lindley_alt.symfun`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dists
from .dists import DistSpec, HypothesisError, KernelDecomposition
from .symfun import (
    ExpPolyTrigFun,
    expand_sum_arg,
    integral_0_inf,
    laplace,
    multiply,
    tail_integral,
)

RANK_RTOL = 1e-10
VALIDATION_TOL = 1e-8


class ValidationError(RuntimeError):
    """The solved constants do not reproduce the steady-state equation."""


@dataclass(frozen=True)
class SystemSigma:
    """Unknown 0 is pi0, unknowns 1..n are c_1..c_n; row 0 normalizes."""

    matrix: np.ndarray
    rhs: np.ndarray
    mu: float
    dec: KernelDecomposition
    b_tail: ExpPolyTrigFun

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.matrix))


@dataclass(frozen=True)
class SigmaSolution:
    pi0: float
    c: np.ndarray
    rank: int
    residual_norm: float
    condition_number: float
    max_validation_residual: float

    def to_dict(self) -> dict:
        return {
            "pi0": self.pi0,
            "c": [float(v) for v in self.c],
            "rank": self.rank,
            "residual_norm": self.residual_norm,
            "condition_number": self.condition_number,
            "max_validation_residual": self.max_validation_residual,
        }


def _pair_integral(h: ExpPolyTrigFun, f: ExpPolyTrigFun, mu: float) -> float:
    # int_0^inf h(x) (f(x) - mu int_x^inf e^{-mu(s-x)} f(s) ds) dx
    inner = f - tail_integral(f, mu).scale(mu)
    return integral_0_inf(multiply(h, inner))


def build_sigma(mu: float, dec: KernelDecomposition, b_tail: ExpPolyTrigFun) -> SystemSigma:
    if mu <= 0:
        raise ValueError("mu must be positive")
    if b_tail.is_zero():
        raise HypothesisError("B is degenerate at 0; no continuous distribution to decompose")
    if dec.n == 0:
        raise HypothesisError("empty kernel decomposition")
    dec.check_hypotheses()
    n = dec.n
    M = np.zeros((n + 1, n + 1))
    rhs = np.zeros(n + 1)
    M[0, 0] = 1.0 + mu * laplace(b_tail, mu)
    for j, g in enumerate(dec.g, start=1):
        M[0, j] = mu * laplace(g, mu)
    rhs[0] = 1.0
    for i, h in enumerate(dec.h, start=1):
        M[i, 0] = -mu * _pair_integral(h, b_tail, mu)
        for j, g in enumerate(dec.g, start=1):
            M[i, j] = (1.0 if i == j else 0.0) - mu * _pair_integral(h, g, mu)
    if not np.all(np.isfinite(M)):
        raise HypothesisError("non-finite system coefficient")
    return SystemSigma(M, rhs, mu, dec, b_tail)


@dataclass(frozen=True)
class ClosedFormW:
    mu: float
    pi0: float
    c: np.ndarray
    b_tail: ExpPolyTrigFun
    g: tuple
    w_tail: ExpPolyTrigFun = field(init=False, repr=False)
    _source: ExpPolyTrigFun = field(init=False, repr=False)

    def __post_init__(self):
        src = self.b_tail.scale(self.mu * self.pi0)
        for ci, gi in zip(self.c, self.g):
            src = src + gi.scale(self.mu * float(ci))
        # P[W > x] as an algebra element
        object.__setattr__(self, "w_tail", tail_integral(src, self.mu))
        object.__setattr__(self, "_source", src)

    def cdf(self, x):
        """F_W(x) = 1 - P[W > x]; zero for x < 0."""
        xa = np.asarray(x, dtype=float)
        out = np.where(xa < 0, 0.0, 1.0 - self.w_tail(np.maximum(xa, 0.0)))
        return float(out) if np.ndim(x) == 0 else out

    def sf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.where(xa < 0, 1.0, self.w_tail(np.maximum(xa, 0.0)))
        return float(out) if np.ndim(x) == 0 else out

    def pdf(self, x):
        """Density on (0, inf) from the first-order equation
        f = mu F + mu pi0 Bbar + mu sum c_i g_i - mu."""
        xa = np.asarray(x, dtype=float)
        out = self.mu * self.cdf(xa) + self._source(xa) - self.mu
        out = np.where(xa > 0, out, 0.0)
        return float(out) if np.ndim(x) == 0 else out

    def density_fun(self) -> ExpPolyTrigFun:
        """The density on (0, inf) as an algebra element."""
        return -self.w_tail.derivative()

    def laplace_w(self, s: float) -> float:
        """E[exp(-s W)] = pi0 + int exp(-s y) f_W(y) dy."""
        return self.pi0 + laplace(self.density_fun(), s)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "pi0": self.pi0,
            "c": [float(v) for v in self.c],
            "w_tail": self.w_tail.to_records(),
        }


def integral_equation_residual(w: ClosedFormW, x) -> np.ndarray:
    """F_W(x) minus the right side of the steady-state equation

    F(x) = pi0 int P[B <= x + z] dF_A(z) + int_{0+} int P[B <= x + y + z] dF_A(z) dF_W(y),

    with every integral done in closed form.
    """
    mu, pi0 = w.mu, w.pi0
    tb = tail_integral(w.b_tail, mu)  # int_0^inf e^{-mu z} Bbar(x + z) dz
    dens = w.density_fun()
    second = 0.0
    for G, H in expand_sum_arg(tb):
        second = second + G(np.asarray(x, dtype=float)) * integral_0_inf(multiply(dens, H))
    mass_pos = 1.0 - pi0
    rhs = pi0 * (1.0 - mu * tb(np.asarray(x, dtype=float))) + mass_pos - mu * second
    return w.cdf(x) - rhs


def solve_sigma(sys: SystemSigma, validate: bool = True) -> tuple[SigmaSolution, ClosedFormW]:
    """Solve the system; minimum-norm least squares when it is rank deficient.

    The induced distribution is then checked against the original integral
    equation at 20 points.
    """
    M, rhs = sys.matrix, sys.rhs
    sv = np.linalg.svd(M, compute_uv=False)
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    if rank == M.shape[0]:
        sol = np.linalg.solve(M, rhs)
    else:
        sol = np.linalg.lstsq(M, rhs, rcond=RANK_RTOL)[0]
    residual = float(np.linalg.norm(M @ sol - rhs))
    pi0 = float(sol[0])
    if not -1e-10 <= pi0 <= 1.0 + 1e-10:
        raise ValidationError(f"pi0 = {pi0!r} is not a probability")
    if residual > 1e-9 * (1.0 + np.linalg.norm(rhs)):
        raise ValidationError(f"system residual {residual:.3e} too large")
    c = sol[1:].copy()
    w = ClosedFormW(sys.mu, pi0, c, sys.b_tail, tuple(sys.dec.g))
    max_res = 0.0
    if validate:
        xs = np.linspace(0.0, 10.0 / min(sys.mu, 1.0), 20)
        res = integral_equation_residual(w, xs)
        max_res = float(np.max(np.abs(res)))
        if max_res > VALIDATION_TOL:
            raise ValidationError(
                f"closed form violates the steady-state equation (max residual {max_res:.3e})"
            )
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    return SigmaSolution(pi0, c, rank, residual, cond, max_res), w


def closed_form(
    a_spec: DistSpec,
    b_spec: DistSpec,
    dec: KernelDecomposition | None = None,
) -> tuple[SigmaSolution, ClosedFormW]:
    """End-to-end solver for exponential A and a decomposable B."""
    if not isinstance(a_spec, dists.Exponential):
        raise HypothesisError("the closed form needs exponentially distributed A")
    b_tail = dists.tail_fun(b_spec)
    if b_tail is None or isinstance(b_spec, dists.Deterministic):
        raise HypothesisError(f"B of kind {b_spec.kind!r} is not in the supported class")
    if dec is None:
        dec = dists.decompose_kernel(b_spec)
    return solve_sigma(build_sigma(a_spec.mu, dec, b_tail))
