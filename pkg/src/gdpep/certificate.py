"""Closed-form dual multipliers (tau, lambda_{i,j}) for gradient descent.

The builder is total on its numeric domain: it never checks feasibility,
that is the verifier's job.  It may therefore be evaluated off the optimal
stepsize locus, where the result is generally not a valid certificate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ._num import DomainError
from .scalar import eval_E, eval_F, eval_T

STAR = "*"


def interpolation_index_set(N):
    """Ordered pairs (i, j) whose interpolation inequalities enter the weighted sum.

    The pair (N, "*") is last; (N, N-1) appears once even though it belongs
    to two families.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    pairs = []
    for k in range(N):
        pairs += [(k, k + 1), (k + 1, k), (N, k)]
    pairs = list(dict.fromkeys(pairs))
    return pairs + [(N, STAR)]


@dataclass(frozen=True)
class AlphaBeta:
    """alpha[k-1] and beta[k-1] hold alpha_k and beta_k for k = 1..N-1."""

    alpha: tuple
    beta: tuple


@dataclass(frozen=True)
class CertificateBundle:
    tau: object
    lam: dict
    rho: object
    eta: object
    L: object
    N: int
    alpha_beta: AlphaBeta = field(repr=False, default=None)

    def get(self, i, j):
        return self.lam.get((i, j), self.tau * 0)

    def min_lambda(self):
        return min(self.lam.values())

    def perturbed(self, key, factor):
        """Copy with one multiplier scaled by ``factor``; used for mutation checks."""
        lam = dict(self.lam)
        lam[key] = lam[key] * factor
        return CertificateBundle(self.tau, lam, self.rho, self.eta, self.L, self.N, self.alpha_beta)


def _ratio(num, den):
    if den == 0:
        raise DomainError("F_{N-k}(eta) vanishes; multipliers undefined")
    return num / den


def build_alpha_beta(N, rho, eta):
    if rho == 0 or eta == 0:
        raise DomainError("rho and eta must be non-zero")
    if eta == rho:
        raise DomainError("eta == rho (mu == L) is excluded")

    memo = {}

    def q(k):
        # T_k / F_{N-k}, with T_k = 0 for k <= 0
        if k <= 0:
            return rho * 0
        if k not in memo:
            memo[k] = _ratio(eval_T(rho, eta, k), eval_F(eta, N - k))
        return memo[k]

    alpha, beta = [], []
    for k in range(1, N):
        if k == 1:
            a = q(1)
        elif k == 2:
            a = -q(1) / rho + (q(2) - q(1))
        else:
            a = -(q(k - 1) - q(k - 2)) / rho + (q(k) - q(k - 1))
        alpha.append(a)
        beta.append((eta - rho) / eta * eval_E(rho, k) - q(k))
    return AlphaBeta(tuple(alpha), tuple(beta))


def build_certificate(N, rho, eta, L) -> CertificateBundle:
    """Multipliers from the optimal-stepsize construction.

    Feasible when (rho, eta) satisfy T_N(rho, eta) = 0 with rho in (-1, 0)
    and eta > -rho.
    """
    ab = build_alpha_beta(N, rho, eta)
    scale = -eta * rho / (eta - rho)
    lam = {}
    prefix = rho * 0
    for k in range(1, N):
        a, b = ab.alpha[k - 1], ab.beta[k - 1]
        prefix = prefix + a
        lam[(k, k - 1)] = scale * b
        lam[(N, k - 1)] = scale * a
        lam[(k - 1, k)] = 1 + scale * (prefix + b)

    def t_over_f(k, m):
        if k <= 0:
            return rho * 0
        return eval_T(rho, eta, k) / eval_F(eta, m)

    t1 = t_over_f(N - 1, 1)
    t2 = t_over_f(N - 2, 2)
    last = -rho * eval_E(rho, N) + scale * (-t1 - (t1 - t2) / rho)
    lam[(N, N - 1)] = last
    lam[(N - 1, N)] = last + 1 + scale * prefix

    lam = {key: lam[key] for key in sorted(lam)}
    return CertificateBundle(L * rho ** (2 * N), lam, rho, eta, L, N, ab)
