import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gdpep._num import DomainError
from gdpep.scalar import (
    ProblemInstance,
    derive_params,
    eval_E,
    eval_F,
    eval_psi,
    eval_T,
    rate_bound,
)


def exact_E(x, k):
    x = Fraction(x)
    return sum(x ** (-j) for j in range(1, 2 * k + 1))


def exact_F(x, k):
    x = Fraction(x)
    return sum(x**j for j in range(1, k + 1))


# ---- examples


@pytest.mark.parametrize(
    "x, k, expected",
    [(-1, 1, 0), (1, 1, 2), (Fraction(1, 2), 2, 30), (-1.0, 1, 0.0), (1.0, 1, 2.0), (0.5, 2, 30.0)],
)
def test_eval_E_examples(x, k, expected):
    assert eval_E(x, k) == expected


@pytest.mark.parametrize("x, k, expected", [(1, 3, 3), (2, 2, 6), (0.3, 0, 0), (Fraction(7, 3), 0, 0)])
def test_eval_F_examples(x, k, expected):
    assert eval_F(x, k) == expected


def test_empty_sums():
    assert eval_E(0.3, 0) == 0
    assert eval_E(0.3, -2) == 0
    assert eval_F(0.3, -1) == 0
    assert eval_T(0.3, 0.7, 0) == 0


def test_eval_E_rejects_zero():
    with pytest.raises(DomainError):
        eval_E(0.0, 1)
    with pytest.raises(DomainError):
        eval_E(Fraction(0), 3)


def test_eval_T_examples():
    assert eval_T(0.37, 0.37, 4) == 0
    assert eval_T(Fraction(-1, 2), Fraction(1), 1) == 0
    assert eval_T(Fraction(-4, 5), Fraction(4), 1) == 0
    assert eval_E(Fraction(4), 1) == Fraction(5, 16)
    assert abs(eval_T(-0.8, 4.0, 1)) < 1e-15


def test_E_at_one_is_exact_in_float():
    for k in (1, 5, 30):
        assert eval_E(1.0, k) == 2 * k
        assert eval_F(1.0, k) == k
        assert math.isclose(eval_E(1 + 1e-9, k), 2 * k, rel_tol=1e-7)


def test_E_overflow_reports_inf():
    assert eval_E(1e-200, 5) == math.inf


@pytest.mark.parametrize(
    "gamma, mu, rho, eta, kappa",
    [
        (Fraction(1), Fraction(0), 0, 1, 0),
        (Fraction(3, 2), Fraction(0), Fraction(-1, 2), 1, 0),
        (Fraction(1, 2), Fraction(-1), Fraction(1, 2), Fraction(3, 2), -1),
    ],
)
def test_derive_params_exact(gamma, mu, rho, eta, kappa):
    p = derive_params(ProblemInstance(1, mu, Fraction(1), gamma))
    assert (p.rho, p.eta, p.kappa) == (rho, eta, kappa)
    assert isinstance(p.kappa, Fraction)


def test_derive_params_float():
    p = derive_params(ProblemInstance(1, -1.0, 1.0, 0.5))
    assert (p.rho, p.eta, p.kappa) == (0.5, 1.5, -1.0)


@pytest.mark.parametrize(
    "args",
    [(0, 0.0, 1.0, 1.0), (1, 0.0, 0.0, 1.0), (1, 1.0, 1.0, 1.0), (1, 0.0, 1.0, 2.0), (1, 0.0, 1.0, 0.0), (1.5, 0, 1, 1)],
)
def test_problem_instance_rejects(args):
    with pytest.raises(ValueError):
        ProblemInstance(*args)


def test_rate_bound_balanced_example():
    rb = rate_bound(ProblemInstance(1, 0.0, 1.0, 1.5))
    assert rb.branch_mu == pytest.approx(0.25, rel=1e-15)
    assert rb.branch_rho == 0.25
    assert rb.max_value == pytest.approx(0.25, rel=1e-15)
    assert rb.min_form == 2.0
    assert rb.regime == "balanced"


def test_rate_bound_mu_half():
    rb = rate_bound(ProblemInstance(1, 0.5, 1.0, 1.0))
    assert rb.branch_rho == 0
    assert rb.branch_mu == pytest.approx(1 / 7, rel=1e-15)
    assert rb.max_value == pytest.approx(1 / 7, rel=1e-15)
    assert rb.min_form == pytest.approx(6.0, rel=1e-15)
    assert rb.max_value * (1 + 1.0 * rb.min_form) == pytest.approx(1, rel=1e-15)
    assert rb.regime == "mu_dominated"


def test_rate_bound_at_rho_zero():
    rb = rate_bound(ProblemInstance(1, 0.0, 1.0, 1.0))
    assert rb.min_form == 2.0
    assert rb.regime == "mu_dominated"


def test_rate_bound_exact_in_rational_mode():
    rb = rate_bound(ProblemInstance(1, Fraction(1, 2), Fraction(1), Fraction(1)))
    assert rb.max_value == Fraction(1, 7)
    assert rb.min_form == 6


def test_rate_bound_gates_max_form_for_negative_mu():
    rb = rate_bound(ProblemInstance(3, -0.2, 1.0, 1.2))
    assert rb.branch_mu is None and rb.max_value is None
    assert rb.min_form > 0


@pytest.mark.parametrize("N", [1, 5, 10])
@pytest.mark.parametrize("gamma", [0.2, 0.6, 1.0, 1.4, 1.9])
def test_mu_limit_continuity(N, gamma):
    branch = rate_bound(ProblemInstance(N, 1e-7, 1.0, gamma)).branch_mu
    limit = 1 / (1 + 2 * N * gamma)
    assert abs(branch - limit) <= 1e-5 * limit
    assert rate_bound(ProblemInstance(N, 0.0, 1.0, gamma)).branch_mu == limit


def test_psi_examples():
    assert eval_psi(0.0, -0.3, 2.5, 3) == 0.0
    assert eval_psi(1.0, -0.8, 4.0, 1) == pytest.approx(math.log(1.5625), abs=1e-12)
    assert eval_psi(1.0, -0.8, 4.0, 1) == pytest.approx(-2 * math.log(0.8), abs=1e-12)
    assert eval_psi(0.5, -0.5, 1.0, 1) == pytest.approx(math.log(3.25 / 1.75), abs=1e-12)
    assert eval_psi(0.5, -0.5, 1.0, 1) == pytest.approx(0.619039, abs=1e-6)


def test_psi_branches_agree_near_eta_one():
    a = eval_psi(0.7, -0.5, 1.0, 2)
    b = eval_psi(0.7, -0.5, 1.0 + 1e-6, 2)
    assert a == pytest.approx(b, rel=1e-5)


def test_psi_domain_error():
    # eta < 1 and large t: numerator and denominator of opposite signs
    with pytest.raises(DomainError):
        eval_psi(-5.0, -0.9, 0.5, 1)


# ---- properties

nonsingular = st.floats(-3, 3).filter(lambda x: abs(x) > 0.05 and x != 1)


@settings(max_examples=300, deadline=None)
@given(nonsingular, st.integers(1, 30))
def test_E_matches_exact_sum(x, k):
    e = exact_E(x, k)
    assert abs(eval_E(x, k) - float(e)) <= 1e-12 * max(1, abs(float(e)))


@settings(max_examples=300, deadline=None)
@given(st.floats(-3, 3).filter(lambda x: x != 1), st.integers(1, 30))
def test_F_matches_exact_sum(x, k):
    f = exact_F(x, k)
    assert abs(eval_F(x, k) - float(f)) <= 1e-12 * max(1, abs(float(f)))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-4, 1e-2).flatmap(lambda d: st.sampled_from([1 + d, 1 - d, -1 + d, -1 - d])), st.integers(1, 30))
def test_E_accurate_near_unit_modulus(x, k):
    e = exact_E(x, k)
    assert abs(eval_E(x, k) - float(e)) <= 1e-12 * max(1, abs(float(e)))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 5), st.floats(0.05, 5), st.integers(1, 12))
def test_E_decreasing_on_positive_axis(a, b, k):
    assume(b - a > 1e-6 * b)
    assert eval_E(a, k) > eval_E(b, k)


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.99, -0.05), st.floats(-0.99, -0.05), st.integers(1, 12))
def test_E_increasing_on_negative_interval(a, b, k):
    assume(b - a > 1e-6)
    assert eval_E(a, k) < eval_E(b, k)


@pytest.mark.parametrize("k", [1, 2, 7, 30])
def test_E_vanishes_at_minus_one(k):
    assert eval_E(-1.0, k) == 0
    assert eval_E(Fraction(-1), k) == 0


@settings(max_examples=200, deadline=None)
# subnormal mu would lose relative precision in gamma * mu before any of our code runs
@given(st.integers(1, 12), st.just(0.0) | st.floats(1e-300, 0.95), st.floats(0.01, 1.99))
def test_composition_identity(N, kappa, gL):
    rb = rate_bound(ProblemInstance(N, kappa, 1.0, gL))
    if math.isinf(rb.min_form):
        return
    assert rb.max_value * (1 + gL * rb.min_form) == pytest.approx(1, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(-0.95, -0.05), st.floats(0.1, 5), st.integers(1, 8))
def test_psi_antisymmetric(t, rho, eta, N):
    t = t * N
    try:
        plus = eval_psi(t, rho, eta, N)
        minus = eval_psi(-t, rho, eta, N)
    except DomainError:
        return
    assert minus == pytest.approx(-plus, rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.integers(1, 8),
    st.fractions(Fraction(-1), Fraction(9, 10), max_denominator=50),
    st.fractions(Fraction(1, 50), Fraction(199, 100), max_denominator=100),
)
def test_rational_matches_float(N, mu, gamma):
    exact = rate_bound(ProblemInstance(N, mu, Fraction(1), gamma))
    approx = rate_bound(ProblemInstance(N, float(mu), 1.0, float(gamma)))
    for name in ("branch_rho", "min_form", "max_value", "branch_mu"):
        a, b = getattr(exact, name), getattr(approx, name)
        if a is None:
            assert b is None
            continue
        assert abs(float(a) - b) <= 1e-13 * max(abs(float(a)), 1e-300) or float(a) == b


def test_mp_inputs_stay_mp():
    with mpmath.workdps(40):
        e = eval_E(mpmath.mpf("0.5"), 2)
        assert isinstance(e, mpmath.mpf)
        assert e == 30
