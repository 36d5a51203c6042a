"""Scalar kernel: E_k, F_k, T_k, the derived parameters and both rate formulas.

Every function works on floats, Fractions and mpmath numbers alike; the
result type follows the inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from ._num import DomainError, arithmetic_of, convert, is_exact, log

# |x - 1| below which the closed forms of E and F switch to direct summation.
SUMMATION_SWITCH = 1e-8
# |eta - 1| below which psi uses its eta = 1 branch.
PSI_BRANCH_SWITCH = 1e-10
# relative gap between E_N(eta) and E_N(rho) treated as a tie
BALANCED_TOL = 1e-12

REGIMES = ("mu_dominated", "rho_dominated", "balanced")


@dataclass(frozen=True)
class ProblemInstance:
    """Gradient descent with stepsize ``gamma`` for ``N`` steps on F_{mu,L}."""

    N: int
    mu: object
    L: object
    gamma: object

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L!r}")
        if not self.mu < self.L:
            raise ValueError(f"mu must be below L, got mu={self.mu!r}, L={self.L!r}")
        if not 0 < self.gamma * self.L < 2:
            raise ValueError(f"gamma must lie in (0, 2/L), got gamma={self.gamma!r}, L={self.L!r}")

    def convert(self, arithmetic):
        """Same instance with mu, L, gamma in the given arithmetic."""
        return ProblemInstance(
            self.N,
            convert(self.mu, arithmetic),
            convert(self.L, arithmetic),
            convert(self.gamma, arithmetic),
        )


@dataclass(frozen=True)
class ScalarParams:
    rho: object
    eta: object
    kappa: object


@dataclass(frozen=True)
class RateBound:
    """Both forms of the worst-case rate.

    ``branch_mu`` and ``max_value`` are ``None`` when mu < 0: the max form
    needs f_N^+ >= f_*, which only follows from the class when mu >= 0.
    """

    branch_mu: object
    branch_rho: object
    max_value: object
    min_form: object
    regime: str


def eval_E(x, k):
    """Sum of x**(-j) for j = 1..2k; zero for k <= 0."""
    if k <= 0:
        return x * 0
    if x == 0:
        raise DomainError("E_k(0) is unbounded (+inf) for k >= 1")
    if isinstance(x, int):
        x = Fraction(x)
    if is_exact(x) or arithmetic_of(x) == "mp" or abs(x - 1) <= SUMMATION_SWITCH:
        return _sum_powers(1 / x, 2 * k)
    try:
        if abs(abs(x) - 1) >= 0.5:
            return (x ** (-2 * k) - 1) / (1 - x)
        # even power, so |x| suffices; log1p keeps |x|^(-2k) - 1 accurate near |x| = 1
        return math.expm1(-2 * k * math.log1p(abs(x) - 1)) / (1 - x)
    except OverflowError:
        # |x| so small that E_k exceeds binary64; it is positive either sign
        return math.inf


def eval_F(x, k):
    """Sum of x**j for j = 1..k; zero for k <= 0."""
    if k <= 0:
        return x * 0
    if is_exact(x) or arithmetic_of(x) == "mp" or abs(x - 1) <= SUMMATION_SWITCH:
        return _sum_powers(x, k)
    if x == 0:
        return 0.0
    if abs(abs(x) - 1) >= 0.5 or (x < 0 and k % 2):
        return x * (1 - x**k) / (1 - x)
    return -x * math.expm1(k * math.log1p(abs(x) - 1)) / (1 - x)


def _sum_powers(y, n):
    # Horner form of y + y^2 + ... + y^n
    total = y * 0
    for _ in range(n):
        total = (total + 1) * y
    return total


def _eta_pow_minus_one(gamma_mu, n):
    """|1 - gamma_mu|**n - 1, taking the log straight from gamma*mu so a rounded eta near 1 costs nothing."""
    if is_exact(gamma_mu):
        return abs(1 - gamma_mu) ** n - 1
    lib = mpmath if arithmetic_of(gamma_mu) == "mp" else math
    shift = -gamma_mu if gamma_mu < 1 else gamma_mu - 2
    try:
        return lib.expm1(n * lib.log1p(shift))
    except OverflowError:
        return math.inf


def eval_T(rho, eta, k):
    """T_k(rho, eta) = E_k(eta) - E_k(rho); zero for k <= 0."""
    if k <= 0:
        return (rho + eta) * 0
    return eval_E(eta, k) - eval_E(rho, k)


def _pow_minus_one(x, s):
    """x**s - 1 for x > 0 and real s, accurate for x near 1."""
    if arithmetic_of(x, s) == "mp":
        return mpmath.expm1(s * mpmath.log1p(x - 1))
    return math.expm1(s * math.log1p(float(x - 1)))


def eval_E_or_inf(x, k):
    """E_k with the x -> 0 limit reported as +inf."""
    if x == 0 and k >= 1:
        return math.inf
    return eval_E(x, k)


def derive_params(inst: ProblemInstance) -> ScalarParams:
    rho = 1 - inst.gamma * inst.L
    eta = 1 - inst.gamma * inst.mu
    if arithmetic_of(inst.mu, inst.L, inst.gamma) == "rational":
        kappa = Fraction(inst.mu) / Fraction(inst.L)
    else:
        kappa = inst.mu / inst.L
    return ScalarParams(rho=rho, eta=eta, kappa=kappa)


def classify_regime(e_eta, e_rho, tol=BALANCED_TOL):
    """Which branch sets the rate, from E_N(eta) and E_N(rho) (either may be +inf)."""
    if e_eta == e_rho:
        return "balanced"
    if math.isinf(e_eta) or math.isinf(e_rho):
        return "mu_dominated" if e_eta < e_rho else "rho_dominated"
    if abs(e_eta - e_rho) <= tol * max(abs(e_eta), abs(e_rho)):
        return "balanced"
    return "mu_dominated" if e_eta < e_rho else "rho_dominated"


def rate_bound(inst: ProblemInstance) -> RateBound:
    p = derive_params(inst)
    N = inst.N
    e_eta = eval_E_or_inf(p.eta, N)
    e_rho = eval_E_or_inf(p.rho, N)
    min_form = min(e_eta, e_rho)
    branch_rho = p.rho ** (2 * N)
    branch_mu = max_value = None
    if inst.mu >= 0:
        if inst.mu == 0:
            branch_mu = 1 / (1 + 2 * N * inst.gamma * inst.L)
        elif p.eta == 0:
            branch_mu = p.kappa * 0
        else:
            # kappa + (eta^(-2N) - 1): both terms positive, no cancellation as mu -> 0
            branch_mu = p.kappa / (p.kappa + _eta_pow_minus_one(inst.gamma * inst.mu, -2 * N))
        max_value = max(branch_mu, branch_rho)
    return RateBound(
        branch_mu=branch_mu,
        branch_rho=branch_rho,
        max_value=max_value,
        min_form=min_form,
        regime=classify_regime(e_eta, e_rho),
    )


def eval_psi(t, rho, eta, N):
    """Log-ratio function whose convexity on [0, N] drives the beta_k sign argument.

    Both branches (eta = 1 and eta != 1) are handled; raises DomainError when
    the log argument is not positive.
    """
    if abs(eta - 1) <= PSI_BRANCH_SWITCH:
        num = 1 + (1 - rho) * (N + t)
        den = 1 + (1 - rho) * (N - t)
    else:
        if not eta > 0:
            raise DomainError(f"psi needs eta > 0, got {eta}")
        # -(eta - rho) + (1 - rho) eta^s rewritten so that nothing cancels near eta = 1
        num = (1 - eta) + (1 - rho) * _pow_minus_one(eta, -t - N)
        den = (1 - eta) + (1 - rho) * _pow_minus_one(eta, t - N)
    if den == 0 or num / den <= 0:
        raise DomainError(f"psi undefined at t={t}: log argument {num}/{den} is not positive")
    return log(num / den)
