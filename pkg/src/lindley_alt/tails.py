"""Tail regimes of B and finite-x checks of the matching asymptotics for W.

Limits are not machine-checkable, so every check reports the ratio at a
sequence of probe points and passes when the deepest probe lies inside a
band around the limiting value.  The default band of +-5% is a convention
of this package; no convergence rate is known for these asymptotics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dists
from .dists import DistSpec
from .fpsolve import FixedPointResult, XRep, upper_part
from .sim import EmpiricalSummary
from .symfun import ExpPolyTrigFun, laplace
from .theorem import ClosedFormW

DEFAULT_BAND = 0.05
UNDERFLOW = 1e-300


class UnsupportedSpecError(ValueError):
    pass


class TailResolutionError(ValueError):
    """A tail probability is too small to resolve at a probe point."""


@dataclass(frozen=True)
class RegularlyVarying:
    kappa: float

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ValueError("kappa must be finite and nonnegative")


@dataclass(frozen=True)
class RapidlyVarying:
    pass


TailRegime = RegularlyVarying | RapidlyVarying


@dataclass
class TailReport:
    regime: str
    probes: np.ndarray
    ratios: np.ndarray
    target: float = 1.0
    band: float = DEFAULT_BAND
    passed: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.probes = np.asarray(self.probes, dtype=float)
        self.ratios = np.asarray(self.ratios, dtype=float)
        if np.any(np.diff(self.probes) <= 0):
            raise ValueError("probe points must be increasing")

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.ratios - self.target)

    @property
    def monotone(self) -> bool:
        # rounding slack: an exactly-attained limit gives deviations ~1e-16
        return bool(np.all(np.diff(self.deviations) <= 1e-12))

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "probes": self.probes.tolist(),
            "ratios": self.ratios.tolist(),
            "target": self.target,
            "band": self.band,
            "band_is_convention": True,
            "monotone_approach": self.monotone,
            "passed": self.passed,
            **self.extra,
        }


def classify(b_spec: DistSpec) -> TailRegime:
    """Regime of e^B from the dominant (least negative) surviving rate."""
    if isinstance(b_spec, dists.WeibullTail):
        return RapidlyVarying()
    t = dists.tail_fun(b_spec)
    if t is None:
        raise UnsupportedSpecError(f"cannot classify the tail of {b_spec.kind!r}")
    return RegularlyVarying(-max(t.rates))


def dominant_oscillates(b_spec: DistSpec) -> bool:
    """True when a sin/cos term sits at the dominant rate of the tail of B.

    Then P[B > x + y] / P[B > x] has no limit, so e^B is not regularly
    varying in the strict sense even though the exponential rate is sharp.
    """
    t = dists.tail_fun(b_spec)
    if t is None:
        return False
    top = max(t.rates)
    return any(term.rate == top and term.trig != "none" for term in t.terms)


def _w_sf(w, x: np.ndarray, x_rep: XRep | None = None) -> np.ndarray:
    if isinstance(w, ClosedFormW):
        return np.asarray(w.sf(x))
    if isinstance(w, EmpiricalSummary):
        out = 1.0 - np.asarray(w.ecdf(x))
        if np.any(out <= 0):
            raise TailResolutionError("the simulated tail has no mass at the deepest probes")
        return out
    if isinstance(w, FixedPointResult):
        if x_rep is None:
            raise ValueError("a fixed-point solution needs its X representation")
        if np.any(x > x_rep.grid.x_max):
            raise TailResolutionError("probe beyond the end of the fixed-point grid")
        # P[W > x] = int_x^inf F(y - x) dF_X(y): a sum of positive terms,
        # accurate in relative terms even far out in the tail
        return np.interp(x, x_rep.grid.nodes, upper_part(w.f, x_rep))
    raise TypeError(f"unsupported waiting-time object {type(w).__name__}")


def _pi0(w) -> float:
    if isinstance(w, ClosedFormW):
        return w.pi0
    if isinstance(w, EmpiricalSummary):
        return w.pi0_hat
    return float(w.f.values[0])


def _x_sf(a_spec, b_spec, probes) -> np.ndarray:
    if isinstance(a_spec, dists.Exponential) and isinstance(b_spec, dists.WeibullTail):
        logs = np.array([dists.log_weibull_x_tail(a_spec.mu, b_spec.p, float(x)) for x in probes])
        if np.any(logs < math.log(UNDERFLOW)):
            raise TailResolutionError("P[X > x] underflows at a probe point")
        return np.exp(logs)
    px = np.asarray(dists.x_tail(a_spec, b_spec, probes), dtype=float)
    if np.any(px <= UNDERFLOW):
        raise TailResolutionError("P[X > x] underflows at a probe point")
    return px


def _stieltjes_laplace(x: np.ndarray, f: np.ndarray, s: float) -> float:
    # E[exp(-s W)] for a CDF known at increasing nodes, atom at the first node
    mids = 0.5 * (x[1:] + x[:-1])
    return float(f[0] + np.sum(np.diff(f) * np.exp(-s * mids)))


def laplace_of_w(w, s: float) -> float:
    """E[exp(-s W)] from any of the three waiting-time representations."""
    if s == 0:
        return 1.0
    if isinstance(w, ClosedFormW):
        return w.laplace_w(s)
    if isinstance(w, EmpiricalSummary):
        return _stieltjes_laplace(w.ecdf_x, w.ecdf_f, s)
    if isinstance(w, FixedPointResult):
        return _stieltjes_laplace(w.f.grid.nodes, w.f.values, s)
    raise TypeError(f"unsupported waiting-time object {type(w).__name__}")


def regvar_check(
    w,
    a_spec: DistSpec,
    b_spec: DistSpec,
    kappa: float,
    probes,
    band: float = DEFAULT_BAND,
    x_rep: XRep | None = None,
) -> TailReport:
    """P[W > x] / (P[X > x] E[exp(-kappa W)]) at the probes."""
    RegularlyVarying(kappa)
    probes = np.asarray(probes, dtype=float)
    lt_w = laplace_of_w(w, kappa)
    ratios = _w_sf(w, probes, x_rep) / (_x_sf(a_spec, b_spec, probes) * lt_w)
    passed = bool(abs(ratios[-1] - 1.0) <= band)
    return TailReport(
        "regularly_varying",
        probes,
        ratios,
        band=band,
        passed=passed,
        extra={"kappa": kappa, "laplace_w": lt_w, "dominant_oscillates": dominant_oscillates(b_spec)},
    )


def breiman_factor(a_spec: DistSpec, kappa: float) -> float:
    """E[exp(-kappa A)]."""
    if isinstance(a_spec, dists.Exponential):
        return laplace(ExpPolyTrigFun.term(a_spec.mu, 0, -a_spec.mu), kappa)
    if isinstance(a_spec, dists.Deterministic):
        return math.exp(-kappa * a_spec.d)
    if isinstance(a_spec, dists.Uniform):
        lo, hi = a_spec.lo, a_spec.hi
        if kappa == 0:
            return 1.0
        return (math.exp(-kappa * lo) - math.exp(-kappa * hi)) / (kappa * (hi - lo))
    raise UnsupportedSpecError(f"no Laplace transform for {a_spec.kind!r}")


def breiman_check(a_spec: DistSpec, b_spec: DistSpec, kappa: float, probes, band: float = DEFAULT_BAND) -> TailReport:
    """P[X > x] / (P[B > x] E[exp(-kappa A)]) at the probes."""
    probes = np.asarray(probes, dtype=float)
    pb = np.asarray(dists.tail(b_spec, probes), dtype=float)
    if np.any(pb <= UNDERFLOW):
        raise TailResolutionError("P[B > x] underflows at a probe point")
    factor = breiman_factor(a_spec, kappa)
    ratios = _x_sf(a_spec, b_spec, probes) / (pb * factor)
    return TailReport(
        "regularly_varying",
        probes,
        ratios,
        band=band,
        passed=bool(abs(ratios[-1] - 1.0) <= band),
        extra={
            "kappa": kappa,
            "breiman_factor": factor,
            "dominant_oscillates": dominant_oscillates(b_spec),
        },
    )


def rapidvar_check(w, a_spec: DistSpec, b_spec: DistSpec, probes, band=DEFAULT_BAND, x_rep=None, shift: float = 1.0) -> TailReport:
    """P[W > x] / (P[X > x] pi0) at the probes, plus the shift-ratio check
    P[X > x + shift] / P[X > x] for rapid variation of e^X."""
    probes = np.asarray(probes, dtype=float)
    px = _x_sf(a_spec, b_spec, probes)
    pi0 = _pi0(w)
    pw = _w_sf(w, probes, x_rep)
    ratios = pw / (px * pi0)
    shifted = _x_sf(a_spec, b_spec, probes + shift)
    shift_ratio = shifted / px
    passed = bool(abs(ratios[-1] - 1.0) <= band)
    return TailReport(
        "rapidly_varying",
        probes,
        ratios,
        band=band,
        passed=passed,
        extra={
            "pi0": pi0,
            "shift": shift,
            "shift_ratios": shift_ratio.tolist(),
            "liminf_ok": bool(np.all(ratios >= 1.0 - band)),
        },
    )


def weibull_ratio(mu: float, p: int, x: float) -> float:
    """P[X > x] p x^(p-1) exp(x^p) / mu, computed in the log domain."""
    log_px = dists.log_weibull_x_tail(mu, p, x)
    return math.exp(log_px + x**p + math.log(p * x ** (p - 1) / mu))


def weibull_x_tail_check(mu: float, p: int, probes, band: float = 0.10) -> TailReport:
    if int(p) != p or p <= 1:
        raise ValueError("p must be an integer greater than 1")
    probes = np.asarray(probes, dtype=float)
    ratios = np.array([weibull_ratio(mu, p, float(x)) for x in probes])
    rep = TailReport("rapidly_varying", probes, ratios, band=band)
    rep.passed = bool(abs(ratios[0] - 1.0) <= band and rep.monotone)
    return rep


def default_probes(a_spec: DistSpec, b_spec: DistSpec, n: int = 8, lo: float = 1e-3, hi: float = 1e-12) -> np.ndarray:
    """Log-spaced tail levels in [hi, lo] mapped back to x by bisection."""
    levels = np.logspace(math.log10(lo), math.log10(hi), n)

    def sf(x):
        return float(_x_sf(a_spec, b_spec, np.array([x]))[0])

    out = []
    for lev in levels:
        a, b = 0.0, 1.0
        while sf(b) > lev:
            b *= 2.0
        for _ in range(60):
            m = 0.5 * (a + b)
            a, b = (m, b) if sf(m) > lev else (a, m)
        out.append(b)
    return np.array(out)
