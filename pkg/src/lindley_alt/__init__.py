"""Steady-state analysis of the alternating Lindley recursion

    W_{n+1} = max(0, B_{n+1} - A_n - W_n)

by simulation, fixed-point iteration and an exact closed form for
exponential A with exp-poly-trig tails of B.
"""
from .dists import (
    Deterministic,
    Exponential,
    ExpPolyTrigTail,
    RationalLT,
    Uniform,
    WeibullTail,
    spec_from_dict,
    spec_to_dict,
)
from .fpsolve import Grid, GridFun, solve, solve_specs
from .sim import SimConfig, simulate
from .symfun import ExpPolyTrigFun, Term
from .tails import RapidlyVarying, RegularlyVarying, classify
from .theorem import ClosedFormW, build_sigma, closed_form, solve_sigma

__version__ = "0.1.0"

__all__ = [
    "ClosedFormW",
    "Deterministic",
    "ExpPolyTrigFun",
    "ExpPolyTrigTail",
    "Exponential",
    "Grid",
    "GridFun",
    "RapidlyVarying",
    "RationalLT",
    "RegularlyVarying",
    "SimConfig",
    "Term",
    "Uniform",
    "WeibullTail",
    "build_sigma",
    "classify",
    "closed_form",
    "simulate",
    "solve",
    "solve_sigma",
    "solve_specs",
    "spec_from_dict",
    "spec_to_dict",
]
