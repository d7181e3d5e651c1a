"""Closed algebra of exponential-polynomial-trigonometric functions.

A function in this algebra is a finite sum of terms

    coeff * x**power * exp(rate * x) * trig(freq * x)

with ``trig`` one of ``"none"``, ``"sin"`` or ``"cos"``.  Products, Laplace
transforms, upper-tail integrals against ``exp(-mu (s - x))`` and the
splitting ``f(x + y) = sum_i g_i(x) h_i(y)`` all stay inside the algebra and
are computed exactly (up to floating point).

Internally a term is handled as ``Re(C * x**k * exp(z x))`` with complex
``z = rate + i freq``; this is never exposed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

TRIG_KINDS = ("none", "sin", "cos")

# Terms with |coeff| below this are dropped on canonicalization.
COEFF_EPS = 1e-14
# Rates and frequencies are snapped to this many decimals when merging terms.
_KEY_DECIMALS = 12


class DivergenceError(ValueError):
    """An integral over [0, inf) does not converge for the given function."""


@dataclass(frozen=True)
class Term:
    coeff: float
    power: int = 0
    rate: float = 0.0
    trig: str = "none"
    freq: float = 0.0

    def __post_init__(self):
        if self.trig not in TRIG_KINDS:
            raise ValueError(f"unknown trig kind {self.trig!r}")
        if self.power < 0 or int(self.power) != self.power:
            raise ValueError("power must be a nonnegative integer")
        if self.trig != "none" and self.freq == 0:
            raise ValueError("trig term needs a nonzero frequency")

    @property
    def key(self):
        return (self.power, self.rate, self.trig, self.freq)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.coeff * np.exp(self.rate * x)
        if self.power:
            out = out * x**self.power
        if self.trig == "sin":
            out = out * np.sin(self.freq * x)
        elif self.trig == "cos":
            out = out * np.cos(self.freq * x)
        return out

    def to_record(self) -> dict:
        return {
            "coeff": self.coeff,
            "power": self.power,
            "rate": self.rate,
            "trig": self.trig,
            "freq": self.freq,
        }


def _snap(v: float) -> float:
    v = round(float(v), _KEY_DECIMALS)
    return 0.0 if v == 0 else v


def _normalize(t: Term) -> Term | None:
    """Canonical form of a single term, or None when it vanishes."""
    coeff, freq, trig = float(t.coeff), _snap(t.freq), t.trig
    rate = _snap(t.rate)
    if trig == "none":
        freq = 0.0
    elif freq == 0.0:
        if trig == "sin":
            return None
        trig = "none"
    elif freq < 0:
        freq = -freq
        if trig == "sin":
            coeff = -coeff
    if abs(coeff) < COEFF_EPS:
        return None
    return Term(coeff, int(t.power), rate, trig, freq)


def _canonical(terms: Iterable[Term]) -> tuple[Term, ...]:
    acc: dict = {}
    for t in terms:
        n = _normalize(t)
        if n is None:
            continue
        acc[n.key] = acc.get(n.key, 0.0) + n.coeff
    out = [
        Term(c, *k)
        for k, c in acc.items()
        if abs(c) >= COEFF_EPS
    ]
    out.sort(key=lambda t: (-t.rate, t.power, TRIG_KINDS.index(t.trig), t.freq))
    return tuple(out)


class ExpPolyTrigFun:
    """Immutable finite sum of :class:`Term` objects, kept in canonical form."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Iterable[Term] = ()):
        object.__setattr__(self, "_terms", _canonical(terms))

    def __setattr__(self, name, value):
        raise AttributeError("ExpPolyTrigFun is immutable")

    @property
    def terms(self) -> tuple[Term, ...]:
        return self._terms

    @classmethod
    def zero(cls) -> "ExpPolyTrigFun":
        return cls(())

    @classmethod
    def const(cls, c: float) -> "ExpPolyTrigFun":
        return cls([Term(c)])

    @classmethod
    def term(cls, coeff, power=0, rate=0.0, trig="none", freq=0.0) -> "ExpPolyTrigFun":
        return cls([Term(coeff, power, rate, trig, freq)])

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "ExpPolyTrigFun":
        terms = []
        for r in records:
            terms.append(
                Term(
                    float(r["coeff"]),
                    int(r.get("power", 0)),
                    float(r.get("rate", 0.0)),
                    r.get("trig", "none"),
                    float(r.get("freq", 0.0)),
                )
            )
        return cls(terms)

    def to_records(self) -> list[dict]:
        return [t.to_record() for t in self._terms]

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def rates(self) -> list[float]:
        return [t.rate for t in self._terms]

    def __call__(self, x):
        return evaluate(self, x)

    def __eq__(self, other):
        return isinstance(other, ExpPolyTrigFun) and self._terms == other._terms

    def __hash__(self):
        return hash(self._terms)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = ExpPolyTrigFun.const(other)
        return ExpPolyTrigFun(self._terms + other._terms)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = ExpPolyTrigFun.const(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(other)
        return multiply(self, other)

    __rmul__ = __mul__

    def scale(self, c: float) -> "ExpPolyTrigFun":
        return ExpPolyTrigFun(
            Term(c * t.coeff, t.power, t.rate, t.trig, t.freq) for t in self._terms
        )

    def derivative(self) -> "ExpPolyTrigFun":
        return derivative(self)

    def __repr__(self):
        if not self._terms:
            return "ExpPolyTrigFun(0)"
        parts = []
        for t in self._terms:
            s = f"{t.coeff:.6g}"
            if t.power:
                s += f"*x^{t.power}"
            if t.rate:
                s += f"*exp({t.rate:g}x)"
            if t.trig != "none":
                s += f"*{t.trig}({t.freq:g}x)"
            parts.append(s)
        return "ExpPolyTrigFun(" + " + ".join(parts) + ")"


# -- complex helpers ---------------------------------------------------------

def _to_complex(t: Term) -> tuple[complex, int, complex]:
    # cos(bx) = Re(e^{ibx}), sin(bx) = Re(-i e^{ibx})
    phase = {"none": 1.0, "cos": 1.0, "sin": -1j}[t.trig]
    return t.coeff * phase, t.power, complex(t.rate, t.freq)


def _from_complex(w: complex, power: int, z: complex) -> list[Term]:
    """Real terms of ``Re(w * x**power * exp(z x))``."""
    a, b = z.real, z.imag
    if b == 0:
        return [Term(w.real, power, a)]
    return [Term(w.real, power, a, "cos", b), Term(-w.imag, power, a, "sin", b)]


# -- operations ----------------------------------------------------------------

def evaluate(f: ExpPolyTrigFun, x):
    """Sum of the term values at ``x`` (scalar or array)."""
    xa = np.asarray(x, dtype=float)
    out = np.zeros_like(xa)
    # share exponentials between terms with the same rate
    by_rate: dict[float, list[Term]] = {}
    for t in f.terms:
        by_rate.setdefault(t.rate, []).append(t)
    for rate, ts in by_rate.items():
        e = np.exp(rate * xa) if rate else 1.0
        inner = np.zeros_like(xa)
        for t in ts:
            v = t.coeff
            if t.power:
                v = v * xa**t.power
            if t.trig == "sin":
                v = v * np.sin(t.freq * xa)
            elif t.trig == "cos":
                v = v * np.cos(t.freq * xa)
            inner = inner + v
        out = out + e * inner
    if np.ndim(x) == 0:
        return float(out)
    return out


def _raw_term(c, k, a, trig, b):
    # like Term(...) but tolerates trig with zero frequency
    if trig != "none" and _snap(b) == 0.0:
        if trig == "sin":
            return None
        trig, b = "none", 0.0
    return Term(c, k, a, trig, b)


def _mul_terms(s: Term, t: Term) -> list[Term]:
    c = s.coeff * t.coeff
    k = s.power + t.power
    a = s.rate + t.rate
    if s.trig == "none":
        return [Term(c, k, a, t.trig, t.freq)]
    if t.trig == "none":
        return [Term(c, k, a, s.trig, s.freq)]
    b1, b2 = s.freq, t.freq
    half = 0.5 * c
    kinds = (s.trig, t.trig)
    if kinds == ("sin", "sin"):
        cand = [(half, "cos", b1 - b2), (-half, "cos", b1 + b2)]
    elif kinds == ("cos", "cos"):
        cand = [(half, "cos", b1 - b2), (half, "cos", b1 + b2)]
    else:
        if kinds == ("cos", "sin"):
            b1, b2 = b2, b1
        # sin(b1 x) cos(b2 x)
        cand = [(half, "sin", b1 + b2), (half, "sin", b1 - b2)]
    out = []
    for cc, trig, b in cand:
        r = _raw_term(cc, k, a, trig, b)
        if r is not None:
            out.append(r)
    return out


def multiply(f: ExpPolyTrigFun, g: ExpPolyTrigFun) -> ExpPolyTrigFun:
    """Exact product; trig products are reduced by product-to-sum identities."""
    return ExpPolyTrigFun(r for s in f.terms for t in g.terms for r in _mul_terms(s, t))


def derivative(f: ExpPolyTrigFun) -> ExpPolyTrigFun:
    out = []
    for t in f.terms:
        w, k, z = _to_complex(t)
        out += _from_complex(w * z, k, z)
        if k:
            out += _from_complex(w * k, k - 1, z)
    return ExpPolyTrigFun(out)


def laplace(f: ExpPolyTrigFun, s: float) -> float:
    """Exact value of the integral of exp(-s x) f(x) over [0, inf)."""
    total = 0.0
    for t in f.terms:
        if not s - t.rate > 0:
            raise DivergenceError(
                f"Laplace transform diverges at s={s}: term rate {t.rate}"
            )
        w, k, z = _to_complex(t)
        total += (w * math.factorial(k) / (s - z) ** (k + 1)).real
    return float(total)


def integral_0_inf(f: ExpPolyTrigFun) -> float:
    """Integral over [0, inf); every rate must be strictly negative."""
    for t in f.terms:
        if t.rate >= 0:
            raise DivergenceError(f"integral over [0, inf) diverges: rate {t.rate}")
    return laplace(f, 0.0)


def _upper_integral(f: ExpPolyTrigFun, mu: float) -> ExpPolyTrigFun:
    # x -> int_0^inf e^{-mu u} f(x+u) du; needs mu - rate > 0 for every term
    out = []
    for t in f.terms:
        if not mu - t.rate > 0:
            raise DivergenceError(f"tail integral diverges: rate {t.rate}, mu {mu}")
        w, k, z = _to_complex(t)
        p = mu - z
        # (x+u)^k = sum_j C(k,j) x^{k-j} u^j ; int u^j e^{-p u} = j!/p^{j+1}
        for j in range(k + 1):
            coef = w * math.comb(k, j) * math.factorial(j) / p ** (j + 1)
            out += _from_complex(coef, k - j, z)
    return ExpPolyTrigFun(out)


def tail_integral(f: ExpPolyTrigFun, mu: float) -> ExpPolyTrigFun:
    """The function x -> int_x^inf exp(-mu (s - x)) f(s) ds, in closed form.

    All rates of ``f`` must be negative and ``mu`` positive.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    for t in f.terms:
        if t.rate >= 0:
            raise DivergenceError(f"tail integral needs negative rates, got {t.rate}")
    return _upper_integral(f, mu)


def antiderivative_tail(f: ExpPolyTrigFun) -> ExpPolyTrigFun:
    """x -> int_x^inf f(s) ds for a function with negative rates."""
    for t in f.terms:
        if t.rate >= 0:
            raise DivergenceError(f"upper integral diverges: rate {t.rate}")
    return _upper_integral(f, 0.0)


def expand_sum_arg(f: ExpPolyTrigFun) -> list[tuple[ExpPolyTrigFun, ExpPolyTrigFun]]:
    """Pairs (g, h) with sum g(x) h(y) == f(x + y).

    Each ``h`` is a single monic term; pairs sharing the same ``h`` are merged
    so the coefficients live on the ``g`` side.
    """
    by_h: dict = {}
    for t in f.terms:
        c, k, a, b = t.coeff, t.power, t.rate, t.freq
        for j in range(k + 1):
            cj = c * math.comb(k, j)
            hk = k - j
            if t.trig == "none":
                pieces = [(Term(cj, j, a), Term(1.0, hk, a))]
            elif t.trig == "sin":
                # sin(bx+by) = sin bx cos by + cos bx sin by
                pieces = [
                    (Term(cj, j, a, "sin", b), Term(1.0, hk, a, "cos", b)),
                    (Term(cj, j, a, "cos", b), Term(1.0, hk, a, "sin", b)),
                ]
            else:
                # cos(bx+by) = cos bx cos by - sin bx sin by
                pieces = [
                    (Term(cj, j, a, "cos", b), Term(1.0, hk, a, "cos", b)),
                    (Term(-cj, j, a, "sin", b), Term(1.0, hk, a, "sin", b)),
                ]
            for g_t, h_t in pieces:
                by_h.setdefault(_normalize(h_t).key, []).append(g_t)
    pairs = []
    for hkey, gs in by_h.items():
        g = ExpPolyTrigFun(gs)
        if g.is_zero():
            continue
        pairs.append((g, ExpPolyTrigFun([Term(1.0, *hkey)])))
    return pairs
