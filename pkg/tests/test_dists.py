import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import five_pair_decomposition, osc_tail
from lindley_alt import dists
from lindley_alt.dists import (
    Deterministic,
    Exponential,
    ExpPolyTrigTail,
    HypothesisError,
    KernelDecomposition,
    RationalLT,
    SpecError,
    Uniform,
    WeibullTail,
)
from lindley_alt.symfun import ExpPolyTrigFun

E = ExpPolyTrigFun.term

# transform of (2/3)(1 + sin x) e^{-x}
OSC_NUMER = (2 / 3, 2.0, 2.0)
OSC_DENOM = (1.0, 3.0, 4.0, 2.0)


def test_cdf_examples(b_osc):
    assert dists.cdf(Exponential(2.0), 0.0) == 0.0
    x = np.linspace(0, 8, 17)
    np.testing.assert_allclose(dists.cdf(b_osc, x), 1 - np.exp(-x) * (2 + np.sin(x) + np.cos(x)) / 3, atol=1e-15)
    assert dists.cdf(Deterministic(3.0), 2.9) == 0.0
    assert dists.cdf(Deterministic(3.0), 3.0) == 1.0
    assert dists.cdf(Uniform(0, 2), -1.0) == 0.0
    assert dists.cdf(WeibullTail(2), 1.0) == pytest.approx(1 - math.exp(-1))


@pytest.mark.parametrize(
    "spec",
    [Exponential(1.5), Deterministic(0.5), Uniform(0.2, 1.0), WeibullTail(3)],
)
def test_spec_round_trip(spec):
    assert dists.spec_from_dict(dists.spec_to_dict(spec)) == spec


def test_spec_round_trip_algebra(b_osc):
    back = dists.spec_from_dict(dists.spec_to_dict(b_osc))
    assert back.tail == b_osc.tail
    r = RationalLT(OSC_NUMER, OSC_DENOM)
    assert dists.spec_from_dict(dists.spec_to_dict(r)).tail == r.tail


@pytest.mark.parametrize(
    "bad",
    [
        lambda: Exponential(0.0),
        lambda: Deterministic(-1.0),
        lambda: Uniform(1.0, 1.0),
        lambda: WeibullTail(1),
        lambda: RationalLT((1.0, 0.0), (1.0, 1.0)),
        lambda: RationalLT((2.0,), (1.0, 1.0)),
        lambda: ExpPolyTrigTail(E(1.0, 0, 0.5)),
        lambda: ExpPolyTrigTail(E(0.5, 0, -1.0)),
        lambda: dists.spec_from_dict({"kind": "pareto"}),
    ],
)
def test_invalid_specs(bad):
    with pytest.raises(SpecError):
        bad()


def test_sample_deterministic_and_seeded(b_osc):
    rng = np.random.default_rng(0)
    assert dists.sample(Deterministic(3.0), rng) == 3.0
    a = dists.sample(b_osc, np.random.default_rng(5), 100)
    b = dists.sample(b_osc, np.random.default_rng(5), 100)
    np.testing.assert_array_equal(a, b)


def test_sample_ks_exponential():
    x = dists.sample(Exponential(2.0), np.random.default_rng(11), 100_000)
    res = stats.kstest(x, lambda t: dists.cdf(Exponential(2.0), t))
    assert res.statistic < 1.628 / math.sqrt(len(x))


def test_sample_ks_oscillating(b_osc):
    x = dists.sample(b_osc, np.random.default_rng(12), 100_000)
    res = stats.kstest(x, lambda t: dists.cdf(b_osc, t))
    assert res.statistic < 1.628 / math.sqrt(len(x))


def test_sample_mean_oscillating(b_osc):
    assert dists.mean(b_osc) == pytest.approx(1.0, rel=1e-14)
    x = dists.sample(b_osc, np.random.default_rng(13), 1_000_000)
    se = x.std() / math.sqrt(len(x))
    assert abs(x.mean() - 1.0) < 3 * se


def test_sample_weibull_ks():
    x = dists.sample(WeibullTail(2), np.random.default_rng(1), 50_000)
    assert stats.kstest(x, lambda t: dists.cdf(WeibullTail(2), t)).pvalue > 0.001


# -- residues ----------------------------------------------------------------------

def test_residues_simple_pole():
    exp = dists.residues([1.0], [1.0, 1.0])
    (p,) = exp.poles
    assert p.root == pytest.approx(-1.0) and p.multiplicity == 1
    assert p.residues[0] == pytest.approx(1.0)


def test_residues_two_poles():
    exp = dists.residues([1.0], [1.0, 3.0, 2.0])
    got = sorted((p.root.real, p.residues[0]) for p in exp.poles)
    assert got[0] == pytest.approx((-2.0, -1.0))
    assert got[1] == pytest.approx((-1.0, 1.0))


def test_residues_double_pole():
    exp = dists.residues([1.0], [1.0, 2.0, 1.0])
    (p,) = exp.poles
    assert p.multiplicity == 2
    assert p.residues == pytest.approx((0.0, 1.0), abs=1e-12)
    assert dists.density_from_lt(exp) == E(1.0, 1, -1.0)
    tail = dists.cdf_from_lt(exp)
    x = np.linspace(0, 10, 21)
    np.testing.assert_allclose(tail(x), (1 + x) * np.exp(-x), atol=1e-12)


def test_residues_triple_pole():
    # 1/(s+2)^3: x^2 e^{-2x}/2 has mass 1/8
    exp = dists.residues([8.0], [1.0, 6.0, 12.0, 8.0])
    (p,) = exp.poles
    assert p.multiplicity == 3
    dens = dists.density_from_lt(exp)
    x = np.linspace(0, 6, 13)
    np.testing.assert_allclose(dens(x), 4 * x**2 * np.exp(-2 * x), atol=1e-9)


def test_oscillating_transform():
    exp = dists.residues(OSC_NUMER, OSC_DENOM)
    roots = sorted((p.root for p in exp.poles), key=lambda r: r.imag)
    assert roots[0] == pytest.approx(-1.0)
    assert roots[1] == pytest.approx(-1 + 1j)
    assert exp.degree == 3
    s = np.random.default_rng(0).uniform(-0.5, 5, 20) + 1j * np.random.default_rng(1).uniform(-3, 3, 20)
    ratio = np.polyval(OSC_NUMER, s) / np.polyval(OSC_DENOM, s)
    np.testing.assert_allclose(exp(s), ratio, rtol=1e-9)
    dens = dists.density_from_lt(exp)
    x = np.linspace(0, 10, 41)
    np.testing.assert_allclose(dens(x), 2 / 3 * (1 + np.sin(x)) * np.exp(-x), atol=1e-12)
    np.testing.assert_allclose(dists.cdf_from_lt(exp)(x), osc_tail()(x), atol=1e-12)


def test_rational_spec_consistency():
    spec = RationalLT(OSC_NUMER, OSC_DENOM)
    exp = dists.residues(spec.numer, spec.denom)
    dens = dists.density_from_lt(exp)
    assert dists.integral_0_inf(dens) == pytest.approx(1.0, abs=1e-9)
    x = np.linspace(0.01, 10, 200)
    fd = -(spec.tail(x + 1e-6) - spec.tail(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(dens(x), fd, atol=1e-6)


def test_residues_degree_violation():
    with pytest.raises(SpecError):
        dists.residues([1.0, 0.0], [1.0, 1.0])


def test_negative_density_warns():
    # (s + 3) / ((s + 1)(s + 2)) - a sign-changing combination 2e^{-x} - e^{-2x}... scaled
    exp = dists.residues([-1.0, 0.0], [1.0, 3.0, 2.0])  # -s/((s+1)(s+2)) = e^{-x} - 2e^{-2x}
    with pytest.warns(UserWarning):
        dists.density_from_lt(exp)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 16), min_size=1, max_size=4, unique=True))
def test_residue_recomposition(steps):
    # roots at least 0.25 apart; nearly coincident simple roots are
    # ill-conditioned (huge cancelling residues) in any floating-point method
    roots = [-0.25 * k for k in steps]
    denom = np.poly(roots)
    numer = [float(np.prod([-r for r in roots]))]  # mass 1
    exp = dists.residues(numer, denom)
    s = np.linspace(0.1, 5, 20)
    ratio = np.polyval(numer, s) / np.polyval(denom, s)
    np.testing.assert_allclose(exp(s).real, ratio, rtol=1e-9)


# -- kernel decomposition -----------------------------------------------------------

def test_decompose_exponential():
    dec = dists.decompose_kernel(Exponential(1.5))
    assert dec.n == 1
    x, y = 0.7, 1.3
    assert dec.kernel(x, y) == pytest.approx(math.exp(-1.5 * (x + y)))


@pytest.mark.parametrize(
    "tail",
    [osc_tail(), E(1.0, 1, -1.0) + E(1.0, 0, -1.0)],
)
def test_decomposition_identity(tail):
    dec = dists.decompose_kernel(ExpPolyTrigTail(tail))
    xs, ys = np.meshgrid(np.linspace(0, 6, 20), np.linspace(0, 6, 20))
    np.testing.assert_allclose(dec.kernel(xs, ys), tail(xs + ys), atol=1e-10)


def test_five_pair_decomposition_identity():
    dec = five_pair_decomposition()
    dec.check_hypotheses()
    xs, ys = np.meshgrid(np.linspace(0, 6, 20), np.linspace(0, 6, 20))
    np.testing.assert_allclose(dec.kernel(xs, ys), osc_tail()(xs + ys), atol=1e-15)


def test_decompose_rejections():
    with pytest.raises(HypothesisError):
        dists.decompose_kernel(Deterministic(1.0))
    with pytest.raises(HypothesisError):
        dists.decompose_kernel(WeibullTail(2))
    with pytest.raises(HypothesisError):
        KernelDecomposition((E(1.0, 0, 0.0),), (E(1.0, 0, -1.0),)).check_hypotheses()
    with pytest.raises(HypothesisError):
        KernelDecomposition((E(1.0, 0, -1.0),), (E(1.0, 1, 0.0),)).check_hypotheses()
    # a constant h is bounded and allowed
    KernelDecomposition((E(1.0, 0, -1.0),), (E(1.0, 0, 0.0),)).check_hypotheses()


# -- X = B - A -------------------------------------------------------------------------

def test_x_tail_examples(b_osc):
    assert dists.x_tail(Exponential(2.0), b_osc, 0.0) == pytest.approx(32 / 45, rel=1e-14)
    assert dists.x_tail(Exponential(1.0), Deterministic(0.0), 0.0) == 0.0
    assert dists.x_tail(Uniform(0, 1), Deterministic(0.0), 0.0) == 0.0
    x = np.linspace(0, 10, 11)
    np.testing.assert_allclose(dists.x_tail(Exponential(1.0), Exponential(1.0), x), np.exp(-x) / 2, rtol=1e-14)


def test_x_tail_negative_side():
    # A = B = Exp(1): X is Laplace, P[X > x] = 1 - e^{x}/2 for x < 0
    x = np.linspace(-5, 0, 11)
    np.testing.assert_allclose(dists.x_tail(Exponential(1.0), Exponential(1.0), x), 1 - np.exp(x) / 2, rtol=1e-14)


def test_x_tail_exact_matches_quadrature(b_osc):
    a = Exponential(2.0)
    for x in (0.0, 0.5, 2.0, 7.0):
        ref = integrate.quad(lambda z: 2 * math.exp(-2 * z) * dists.tail(b_osc, x + z), 0, np.inf, epsabs=1e-14)[0]
        assert dists.x_tail(a, b_osc, x) == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize(
    "a,b",
    [
        (Uniform(0.0, 2.0), Exponential(1.0)),
        (Exponential(1.0), WeibullTail(2)),
        (Deterministic(0.5), Exponential(2.0)),
        (Exponential(1.0), Deterministic(1.0)),
    ],
)
def test_x_tail_monotone_in_unit_interval(a, b):
    x = np.linspace(0, 6, 31)
    t = dists.x_tail(a, b, x)
    assert np.all((t >= 0) & (t <= 1))
    assert np.all(np.diff(t) <= 1e-14)
    assert dists.x_tail(a, b, 0.0) < 1.0


def test_uniform_a_against_closed_form():
    # A ~ U(0, 2), B ~ Exp(1): P[X > x] = (1 - e^{-2}) e^{-x} / 2
    x = np.array([0.0, 1.0, 3.0])
    np.testing.assert_allclose(
        dists.x_tail(Uniform(0.0, 2.0), Exponential(1.0), x), (1 - math.exp(-2)) * np.exp(-x) / 2, rtol=1e-9
    )


def test_log_weibull_x_tail_matches_direct():
    for x in (0.5, 1.0, 3.0):
        ref = integrate.quad(lambda z: math.exp(-z) * math.exp(-((x + z) ** 2)), 0, np.inf, epsabs=0, epsrel=1e-12)[0]
        assert math.exp(dists.log_weibull_x_tail(1.0, 2, x)) == pytest.approx(ref, rel=1e-9)
    # deep in the tail the linear-domain value underflows, the log does not
    lg = dists.log_weibull_x_tail(1.0, 2, 40.0)
    assert math.isfinite(lg) and lg < math.log(1e-300)


def test_probabilities_of_sign(b_osc):
    a = Exponential(2.0)
    assert dists.prob_x_positive(a, b_osc) + dists.prob_x_negative(a, b_osc) == pytest.approx(1.0)
    assert dists.prob_x_negative(Deterministic(1.0), Uniform(0.0, 2.0)) == pytest.approx(0.5)
