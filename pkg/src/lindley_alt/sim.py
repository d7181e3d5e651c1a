"""Monte-Carlo simulation of W_{n+1} = max(0, B_{n+1} - A_n - W_n).

Replications draw from independent Philox streams spawned from one seed, so
results are reproducible and do not depend on execution order.  Visits to
zero are regeneration points; confidence intervals use the cycle structure.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dists
from .dists import DistSpec


class StabilityError(ValueError):
    """The recursion has no aperiodic steady state under the requested regime."""


class DegenerateXError(ValueError):
    pass


def step(w: float, b: float, a: float) -> float:
    d = b - a - w
    return d if d > 0 else 0.0


@dataclass(frozen=True)
class SimConfig:
    a_spec: DistSpec
    b_spec: DistSpec
    n_steps: int
    n_replications: int = 1
    w1: float = 0.0
    burn_in: int | None = None
    seed: int = 0
    # admit P[X < 0] = 0 (non-deterministic X only)
    allow_nonnegative_x: bool = False
    grid_points: int = 2001

    def __post_init__(self):
        if self.n_steps <= 0 or self.n_replications <= 0:
            raise ValueError("n_steps and n_replications must be positive")
        if self.w1 < 0:
            raise ValueError("w1 must be nonnegative")
        if self.effective_burn_in >= self.n_steps:
            raise ValueError("burn_in must be smaller than n_steps")

    @property
    def effective_burn_in(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return min(max(self.n_steps // 100, 1000), self.n_steps // 2)


@dataclass
class EmpiricalSummary:
    ecdf_x: np.ndarray
    ecdf_f: np.ndarray
    pi0_hat: float
    pi0_se: float
    mean_w: float
    mean_w_se: float
    cycle_lengths: np.ndarray
    n_samples: int
    n_replications: int
    seeds: list = field(default_factory=list)

    def ecdf(self, x):
        """Step-function interpolation of the stored ECDF grid."""
        idx = np.searchsorted(self.ecdf_x, np.asarray(x, dtype=float), side="right") - 1
        vals = np.where(idx < 0, 0.0, self.ecdf_f[np.clip(idx, 0, None)])
        return float(vals) if np.ndim(x) == 0 else vals

    def to_dict(self) -> dict:
        return {
            "pi0_hat": self.pi0_hat,
            "pi0_se": self.pi0_se,
            "mean_w": self.mean_w,
            "mean_w_se": self.mean_w_se,
            "n_samples": self.n_samples,
            "n_replications": self.n_replications,
            "n_cycles": int(len(self.cycle_lengths)),
            "mean_cycle_length": float(np.mean(self.cycle_lengths)) if len(self.cycle_lengths) else None,
            "seeds": self.seeds,
        }


def check_stability(a_spec: DistSpec, b_spec: DistSpec, allow_nonnegative_x: bool = False):
    """Refuse configurations without an aperiodic regeneration structure."""
    if dists.is_deterministic(a_spec) and dists.is_deterministic(b_spec):
        x = b_spec.d - a_spec.d
        if x > 0:
            raise StabilityError(
                f"X = B - A is the constant {x:g} > 0: the path alternates 0, {x:g}, 0, ... "
                "and never converges"
            )
        return
    p_neg = dists.prob_x_negative(a_spec, b_spec)
    if p_neg <= 0 and not allow_nonnegative_x:
        raise StabilityError(
            "P[X < 0] = 0; pass allow_nonnegative_x=True to simulate this regime"
        )


def _path(a_spec, b_spec, n_steps, w1, rng) -> np.ndarray:
    # W_1 = w1, W_{n+1} = max(0, B_{n+1} - A_n - W_n)
    a = dists.sample(a_spec, rng, n_steps - 1)
    b = dists.sample(b_spec, rng, n_steps - 1)
    x = (b - a).tolist()
    w = [0.0] * n_steps
    cur = float(w1)
    w[0] = cur
    for i, xi in enumerate(x, start=1):
        d = xi - cur
        cur = d if d > 0 else 0.0
        w[i] = cur
    return np.asarray(w)


def _run_replication(config: SimConfig, seed_seq: np.random.SeedSequence):
    rng = np.random.Generator(np.random.Philox(seed_seq))
    w = _path(config.a_spec, config.b_spec, config.n_steps, config.w1, rng)
    post = w[config.effective_burn_in:]
    zeros = np.flatnonzero(post == 0.0)
    return post, zeros


def simulate(config: SimConfig, max_workers: int | None = None) -> EmpiricalSummary:
    """Run the replications and summarize the post-burn-in samples."""
    check_stability(config.a_spec, config.b_spec, config.allow_nonnegative_x)
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(config.n_replications)
    if max_workers is None:
        max_workers = int(os.environ.get("LINDLEY_ALT_THREADS", "1") or 1)
    if max_workers > 1 and config.n_replications > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(lambda s: _run_replication(config, s), children))
    else:
        results = [_run_replication(config, s) for s in children]

    samples = np.concatenate([r[0] for r in results])
    cycles = np.concatenate([np.diff(r[1]) for r in results]).astype(int)

    # pool cycles across replications for the regenerative estimators
    pi_parts, mean_parts = [], []
    for post, zeros in results:
        pi_parts.append(_cycle_stats((post == 0.0).astype(float), zeros))
        mean_parts.append(_cycle_stats(post, zeros))
    pi0_hat = float(np.mean(samples == 0.0))
    mean_w = float(np.mean(samples))
    pi0_se = _pooled_se(pi_parts)
    mean_w_se = _pooled_se(mean_parts)

    srt = np.sort(samples)
    top = float(srt[-1]) if srt[-1] > 0 else 1.0
    grid = np.linspace(0.0, top, config.grid_points)
    ecdf = np.searchsorted(srt, grid, side="right") / len(srt)
    return EmpiricalSummary(
        ecdf_x=grid,
        ecdf_f=ecdf,
        pi0_hat=pi0_hat,
        pi0_se=pi0_se,
        mean_w=mean_w,
        mean_w_se=mean_w_se,
        cycle_lengths=cycles,
        n_samples=int(len(samples)),
        n_replications=config.n_replications,
        seeds=[int(c.generate_state(1)[0]) for c in children],
    )


def _cycle_stats(values, zeros):
    if len(zeros) < 2:
        return None
    sums = np.add.reduceat(values[zeros[0]: zeros[-1]], zeros[:-1] - zeros[0])
    tau = np.diff(zeros).astype(float)
    return sums, tau


def _pooled_se(parts) -> float:
    parts = [p for p in parts if p is not None]
    if not parts:
        return math.nan
    sums = np.concatenate([p[0] for p in parts])
    tau = np.concatenate([p[1] for p in parts])
    if len(tau) < 3:
        return math.nan
    est = sums.sum() / tau.sum()
    z = sums - est * tau
    return float(math.sqrt(np.var(z, ddof=1) / len(tau)) / tau.mean())


@dataclass
class CycleBoundReport:
    n: np.ndarray
    empirical: np.ndarray
    bound: np.ndarray
    slack: np.ndarray
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "n": self.n.tolist(),
            "empirical": self.empirical.tolist(),
            "bound": self.bound.tolist(),
            "slack": self.slack.tolist(),
            "violations": self.violations,
            "passed": self.passed,
        }


def cycle_bound_check(summary: EmpiricalSummary, p_x_pos: float, n_max: int = 10) -> CycleBoundReport:
    """Compare P[cycle > n] with P[X > 0]**n plus three binomial standard errors."""
    cyc = np.asarray(summary.cycle_lengths)
    if cyc.size == 0:
        raise ValueError("no complete regeneration cycles")
    ns = np.arange(1, n_max + 1)
    emp = np.array([np.mean(cyc > n) for n in ns])
    bound = p_x_pos ** ns.astype(float)
    slack = 3.0 * np.sqrt(emp * (1.0 - emp) / cyc.size)
    viol = [int(n) for n, e, b, s in zip(ns, emp, bound, slack) if e > b + s]
    return CycleBoundReport(ns, emp, bound, slack, viol)


@dataclass
class HittingProbeReport:
    epsilon: float
    n: int
    q: float
    q_hat: float
    k: np.ndarray
    tail_hat: np.ndarray
    bound: np.ndarray
    slack: np.ndarray
    occurrences: int
    pathwise_failures: int
    censored: int

    @property
    def violations(self) -> list:
        return [int(k) for k, t, b, s in zip(self.k, self.tail_hat, self.bound, self.slack) if t > b + s]

    @property
    def passed(self) -> bool:
        return not self.violations and self.pathwise_failures == 0

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "n": self.n,
            "q": self.q,
            "q_hat": self.q_hat,
            "k": self.k.tolist(),
            "tail_hat": self.tail_hat.tolist(),
            "bound": self.bound.tolist(),
            "occurrences": self.occurrences,
            "pathwise_failures": self.pathwise_failures,
            "censored": self.censored,
            "passed": self.passed,
        }


def hitting_probe(
    x_spec: DistSpec,
    epsilon: float,
    n: int,
    reps: int = 20000,
    seed: int = 0,
    k_max: int = 20,
    w1: float = 0.0,
) -> HittingProbeReport:
    """Hitting time of the pattern E_n for a nonnegative, non-deterministic X.

    E_{n,i}: X_i <= n eps, X_{i+1} >= (n+1) eps, ..., X_{i+2n} <= n eps,
    alternating.  On E_{n,i} the path must satisfy W_{i+2n} = 0 whatever
    W_{i-1} was; every occurrence is checked.
    """
    if dists.is_deterministic(x_spec):
        raise DegenerateXError("X is deterministic; the hitting-time bound needs a random X")
    if dists.cdf_left(x_spec, 0.0) > 0:
        raise ValueError("hitting probe requires P[X < 0] = 0")
    lo_thr, hi_thr = n * epsilon, (n + 1) * epsilon
    p_hi = 1.0 - dists.cdf_left(x_spec, hi_thr)
    p_lo = dists.cdf(x_spec, lo_thr)
    if p_hi <= 0 or p_lo <= 0:
        raise ValueError("need P[X >= (n+1) eps] > 0 and P[X <= n eps] > 0")
    q = p_hi**n * p_lo ** (n + 1)

    span = 2 * n + 1
    # columns are X_2, X_3, ...; tau counted from index 2
    horizon = span * k_max + span + 1
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    x = dists.sample(x_spec, rng, (reps, horizon))
    lo = x <= lo_thr
    hi = x >= hi_thr
    n_start = horizon - 2 * n
    hit = np.ones((reps, n_start), dtype=bool)
    for off in range(span):
        col = lo if off % 2 == 0 else hi
        hit &= col[:, off: off + n_start]

    first = np.where(hit.any(axis=1), hit.argmax(axis=1) + 2, np.iinfo(np.int64).max)
    censored = int(np.sum(~hit.any(axis=1)))
    ks = np.arange(0, k_max + 1)
    thresholds = span * ks
    tail_hat = np.array([np.mean(first >= t) for t in thresholds])
    bound = span * (1.0 - q) ** ks.astype(float)
    slack = 3.0 * np.sqrt(tail_hat * (1.0 - tail_hat) / reps)

    # pathwise check: W_1 = w1, W_l = max(0, X_l - W_{l-1}) for l >= 2
    w = np.empty((reps, horizon))
    prev = np.full(reps, float(w1))
    for j in range(horizon):
        prev = np.maximum(0.0, x[:, j] - prev)
        w[:, j] = prev
    rows, cols = np.nonzero(hit)
    ends = w[rows, cols + 2 * n]
    failures = int(np.sum(ends != 0.0))

    return HittingProbeReport(
        epsilon=epsilon,
        n=n,
        q=q,
        q_hat=float(hit.mean()),
        k=ks,
        tail_hat=tail_hat,
        bound=bound,
        slack=slack,
        occurrences=int(len(rows)),
        pathwise_failures=failures,
        censored=censored,
    )
