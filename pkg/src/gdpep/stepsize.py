"""Optimal stepsize and the surrogate class that makes a given stepsize optimal.

Everything here is bisection on E_N, which is monotone on each bracket used:
increasing on (-1, 0) and decreasing on (0, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath

from .scalar import ProblemInstance, derive_params, eval_E, eval_E_or_inf

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 200

SURROGATE_REGIMES = ("below_optimal", "above_optimal", "at_optimal")


class ConvergenceError(RuntimeError):
    """Bisection ran out of iterations, or its bracket did not straddle a root."""

    def __init__(self, message, bracket=None):
        super().__init__(message if bracket is None else f"{message} (bracket={bracket})")
        self.bracket = bracket


@dataclass(frozen=True)
class SurrogateClass:
    """(mu_eff, L_eff) for which the stepsize is optimal.

    ``rho_eff`` and ``eta_eff`` are the solver's own values of 1 - gamma*L_eff
    and 1 - gamma*mu_eff, kept so that downstream code does not re-round them.
    """

    mu_eff: object
    L_eff: object
    regime: str
    rho_eff: object
    eta_eff: object


def bisect(func, lo, hi, tol, max_iter=DEFAULT_MAX_ITER):
    """Root of an increasing-through-zero ``func`` on [lo, hi].

    ``func`` returns ``(residual, scale)``; iteration stops when
    ``|residual| <= tol * scale`` or when the bracket can no longer be split.
    """
    r_lo, _ = func(lo)
    r_hi, _ = func(hi)
    if not (r_lo < 0 < r_hi):
        raise ConvergenceError("no sign change on bracket", (lo, hi))
    for _ in range(max_iter):
        mid = (lo + hi) / 2
        if mid == lo or mid == hi:
            return lo if abs(r_lo) <= abs(r_hi) else hi
        r, scale = func(mid)
        if abs(r) <= tol * scale:
            return mid
        if r < 0:
            lo, r_lo = mid, r
        else:
            hi, r_hi = mid, r
    raise ConvergenceError(f"bisection did not converge in {max_iter} iterations", (lo, hi))


def _gap(N, eta, rho):
    """E_N(eta) - E_N(rho) and its magnitude, with E_N(0) = +inf."""
    a = eval_E_or_inf(eta, N)
    b = eval_E_or_inf(rho, N)
    if math.isinf(a) and math.isinf(b):
        return 0.0, 1.0
    if math.isinf(a):
        return math.inf, 1.0
    if math.isinf(b):
        return -math.inf, 1.0
    return a - b, max(abs(a), abs(b))


def optimal_stepsize(N, mu, L, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """gamma*(N, mu, L): the stepsize in (1/L, 2/L) where E_N(1 - gamma*mu) = E_N(1 - gamma*L)."""
    if not L > 0 or not mu < L:
        raise ValueError(f"need L > 0 and mu < L, got mu={mu!r}, L={L!r}")
    if int(N) != N or N < 1:
        raise ValueError(f"N must be an integer >= 1, got {N!r}")
    eps = 1e-12 / L

    def gap(gamma):
        return _gap(N, 1 - gamma * mu, 1 - gamma * L)

    return bisect(gap, 1 / L + eps, 2 / L - eps, tol, max_iter)


def _at_optimal(N, mu, L, gamma, tol):
    d, scale = _gap(N, 1 - gamma * mu, 1 - gamma * L)
    if abs(d) <= tol * scale:
        return True
    if isinstance(gamma, float):
        # gamma is the float nearest the root when the gap flips sign across it
        below, _ = _gap(N, 1 - math.nextafter(gamma, 0) * mu, 1 - math.nextafter(gamma, 0) * L)
        above, _ = _gap(N, 1 - math.nextafter(gamma, 3) * mu, 1 - math.nextafter(gamma, 3) * L)
        return below <= 0 <= above
    return False


def surrogate_class(inst: ProblemInstance, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> SurrogateClass:
    """Move L up (gamma < gamma*) or mu down (gamma > gamma*) until gamma is optimal."""
    N, gamma = inst.N, inst.gamma
    p = derive_params(inst)
    if _at_optimal(N, inst.mu, inst.L, gamma, tol):
        return SurrogateClass(inst.mu, inst.L, "at_optimal", p.rho, p.eta)

    d, _ = _gap(N, p.eta, p.rho)
    one = gamma * 0 + 1
    if d < 0:
        # E_N(eta) < E_N(rho): find rho' in (-1, 0) with E_N(rho') = E_N(eta)
        target = eval_E(p.eta, N)
        hi = -one / 2
        for _ in range(max_iter):
            if eval_E(hi, N) > target:
                break
            hi = hi / 2
        else:
            raise ConvergenceError("could not bracket rho' from above", (-one, hi))
        rho_eff = bisect(lambda r: (eval_E(r, N) - target, target), -one, hi, tol, max_iter)
        return SurrogateClass(inst.mu, (1 - rho_eff) / gamma, "below_optimal", rho_eff, p.eta)

    # E_N(eta) > E_N(rho), rho in (-1, 0): find eta' > -rho with E_N(eta') = E_N(rho)
    target = eval_E(p.rho, N)
    lo = max(-p.rho, 1e-8 * one)
    hi = 2 * one
    for _ in range(max_iter):
        if eval_E(hi, N) < target:
            break
        hi = 2 * hi
    else:
        raise ConvergenceError("bracket expansion for eta' failed", (lo, hi))
    # E is decreasing here, so bisect on target - E
    eta_eff = bisect(lambda e: (target - eval_E(e, N), target), lo, hi, tol, max_iter)
    return SurrogateClass((1 - eta_eff) / gamma, inst.L, "above_optimal", p.rho, eta_eff)


def working_tolerance(arithmetic, dps=None):
    """Bisection tolerance suited to the arithmetic: 1e-13 in binary64, ~10**-(dps-5) in mp."""
    if arithmetic == "mp":
        return mpmath.mpf(10) ** (-(dps or mpmath.mp.dps) + 5)
    return DEFAULT_TOL

