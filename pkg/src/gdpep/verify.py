"""Dual-feasibility checks and the end-to-end certification pipeline.

``certify`` runs, for one (N, mu, L, gamma):

1. the surrogate class making gamma optimal,
2. the closed-form multipliers at the surrogate pair (rho', eta'),
3. balance, sign, and PSD checks on the PEP matrix,
4. the rank-one decomposition residual and a randomized check of the
   weighted-sum identity against a direct expansion,
5. numeric audits of the scalar inequalities the proof relies on,

and composes the resulting guarantee back into the original variables.

By default the pipeline runs in mpmath with a precision chosen from the
instance: the multipliers contain rho'**(-2N), and at binary64 the balance
equations lose all significance once that exceeds ~1e16.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import gmpy2
import mpmath
import numpy as np

from ._num import DomainError, arithmetic_of, check_arithmetic, convert, extra_digits, zeros
from .certificate import CertificateBundle, build_certificate
from .pep import build_pep_matrices
from .scalar import ProblemInstance, derive_params, eval_E, eval_F, eval_psi, eval_T, rate_bound
from .stepsize import ConvergenceError, SurrogateClass, surrogate_class, working_tolerance

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"


# ---------------------------------------------------------------- balance


def check_balance(cert: CertificateBundle, N=None):
    """Per-node residual of inflow - outflow - rhs, rhs = -1 at node 0 and +1 at node N."""
    N = cert.N if N is None else N
    zero = cert.tau * 0
    inflow = [zero] * (N + 1)
    outflow = [zero] * (N + 1)
    for (i, j), value in cert.lam.items():
        outflow[i] = outflow[i] + value
        inflow[j] = inflow[j] + value
    residuals = []
    for k in range(N + 1):
        rhs = 1 if k == N else (-1 if k == 0 else 0)
        if N == 0:
            rhs = 0
        residuals.append(inflow[k] - outflow[k] - rhs)
    return residuals


# -------------------------------------------------------------------- PSD


def _max_abs(M):
    return max((abs(x) for x in np.asarray(M).flat), default=0)


def min_eigenvalue(S_sym):
    """Smallest eigenvalue; mpmath's symmetric solver for object arrays, LAPACK otherwise."""
    S_sym = np.asarray(S_sym)
    if S_sym.dtype != object:
        return float(np.linalg.eigvalsh(S_sym).min())
    n = S_sym.shape[0]
    M = mpmath.matrix(n, n)
    for i in range(n):
        for j in range(n):
            M[i, j] = convert(S_sym[i, j], "mp")
    evals = mpmath.eigsy(M, eigvals_only=True)
    return min(evals[i] for i in range(n))


def check_psd(S_sym, psd_tol=1e-8):
    """(min eigenvalue, pass) with pass iff min eig >= -psd_tol * max(1, max |entry|)."""
    lam_min = min_eigenvalue(S_sym)
    scale = max(1, _max_abs(S_sym))
    return lam_min, bool(lam_min >= -psd_tol * scale)


# ---------------------------------------------------------- decomposition


@dataclass(frozen=True)
class Decomposition:
    coef: object
    delta: tuple
    vectors: tuple

    def reconstruct(self):
        n = len(self.vectors[0])
        like = self.coef
        out = zeros(n, n, like)
        for d, v in zip(self.delta, self.vectors):
            out = out + np.outer(v, v) * d
        return out * self.coef


def closed_form_pep_matrix(N, rho, eta) -> Decomposition:
    """coef * sum_k delta_k v_k v_k^T, the closed form of the PEP matrix at an optimal pair."""
    coef = eta**2 * (1 - rho) / (2 * (eta - rho) ** 2)
    T = [eval_T(rho, eta, k) for k in range(N + 1)]
    F = [eval_F(eta, m) for m in range(N + 1)]
    delta = []
    vectors = []
    zero = rho * 0
    for k in range(1, N + 1):
        if k == 1:
            d = T[1]
        else:
            if F[N - k + 1] == 0:
                raise DomainError("F_{N-k+1}(eta) vanishes")
            d = T[k] - (F[N - k] / F[N - k + 1]) ** 2 * T[k - 1]
        delta.append(d)
        v = [zero] * (N + 1)
        v[k] = zero + 1
        if k < N:
            tail = -1 / F[N - k]
            for j in range(k + 1, N + 1):
                v[j] = tail
        vectors.append(np.array(v, dtype=float if isinstance(zero, float) else object))
    return Decomposition(coef, tuple(delta), tuple(vectors))


def decomposition_residual(S_sym, decomposition: Decomposition):
    """Max-abs entry of S_sym minus the reconstruction."""
    return _max_abs(np.asarray(S_sym) - decomposition.reconstruct())


# ----------------------------------------------------------------- oracle


@dataclass
class OracleResult:
    trials: int
    dim: int
    seed: int
    max_error: float
    rng: str = RNG_ALGORITHM


def _to_working(array, like):
    if isinstance(like, float):
        return np.asarray(array, dtype=float)
    if isinstance(like, gmpy2.mpfr):
        make = gmpy2.mpfr
    else:
        make = Fraction
    out = np.empty(np.shape(array), dtype=object)
    for idx, x in np.ndenumerate(np.asarray(array)):
        out[idx] = make(float(x))
    return out


def _mpfr(x):
    """Exact mpmath -> gmpy2 conversion (the gmpy2 context must carry enough bits)."""
    sign, man, exp, _ = mpmath.mpf(x)._mpf_
    value = gmpy2.mul_2exp(gmpy2.mpfr(int(man)), int(exp))
    return -value if sign else value


def _mpfr_array(a):
    out = np.empty(np.shape(a), dtype=object)
    for idx, x in np.ndenumerate(np.asarray(a, dtype=object)):
        out[idx] = _mpfr(x)
    return out


def _dot(a, b):
    return (a * b).sum(axis=-1)


def direct_weighted_sum(cert: CertificateBundle, mu, L, gamma, grads, plus_values):
    """f0+ - fN+ + |g0|^2/(2L) - |gN|^2/(2 tau) + sum lambda_ij Q_ij, expanded pointwise.

    ``grads`` has shape (..., N+1, d) and ``plus_values`` shape (..., N+1);
    leading axes are a batch.  Points come from the GD recursion started at
    0, with x_k^+ = x_k - g_k / L.  Returns the value(s) and the x basis,
    shape (..., N+1, d).
    """
    N = cert.N
    if grads.shape[-2] != N + 1 or plus_values.shape[-1] != N + 1 or grads.shape[:-1] != plus_values.shape:
        raise ValueError(f"expected {N + 1} gradients and values, got {grads.shape}, {plus_values.shape}")
    g = [grads[..., k, :] for k in range(N + 1)]
    f = [plus_values[..., k] for k in range(N + 1)]
    x = [g[0] * 0]
    for k in range(N):
        x.append(x[-1] - g[k] * gamma)
    xp = [x[k] - g[k] / L for k in range(N + 1)]
    c = mu * L / (2 * (L - mu))

    total = f[0] - f[N] + _dot(g[0], g[0]) / (2 * L) - _dot(g[N], g[N]) / (2 * cert.tau)
    for (i, j), value in cert.lam.items():
        diff = xp[i] - xp[j]
        q = f[j] - f[i] + _dot(g[j], diff) + _dot(diff, diff) * c
        total = total + q * value
    basis = np.stack([xp[0] - x[0]] + [xp[k] - xp[k - 1] for k in range(1, N + 1)], axis=-2)
    return total, basis


def oracle_quadratic_identity(inst_eff: ProblemInstance, cert: CertificateBundle, S_sym, trials=100, dim=3, seed=None):
    """Compare the direct expansion of the weighted sum with L * x^T S_sym x on random data.

    Random f^+ values are included on purpose: the linear terms cancel only
    when the balance equations hold.
    """
    if seed is None:
        raise ValueError("oracle needs an explicit seed")
    S_sym = np.asarray(S_sym)
    if S_sym.shape != (cert.N + 1, cert.N + 1):
        raise ValueError(f"S_sym shape {S_sym.shape} does not match N={cert.N}")
    if trials == 0:
        return OracleResult(trials=0, dim=dim, seed=seed, max_error=0.0)
    rng = np.random.default_rng(seed)
    # draw per trial so a prefix of trials is reproducible on its own
    raw_g, raw_f = [], []
    for _ in range(trials):
        raw_g.append(rng.standard_normal((cert.N + 1, dim)))
        raw_f.append(rng.standard_normal(cert.N + 1))
    mu, L, gamma = inst_eff.mu, inst_eff.L, inst_eff.gamma
    if isinstance(cert.tau, mpmath.mpf):
        # same precision, faster arithmetic: evaluate on gmpy2 mpfr
        with gmpy2.context(gmpy2.get_context(), precision=mpmath.mp.prec + 8):
            fast = CertificateBundle(
                _mpfr(cert.tau), {k: _mpfr(v) for k, v in cert.lam.items()}, cert.rho, cert.eta, cert.L, cert.N
            )
            return _oracle_run(fast, _mpfr(mu), _mpfr(L), _mpfr(gamma), _mpfr_array(S_sym), raw_g, raw_f, seed)
    return _oracle_run(cert, mu, L, gamma, S_sym, raw_g, raw_f, seed)


def _oracle_run(cert, mu, L, gamma, S_sym, raw_g, raw_f, seed):
    grads = _to_working(np.array(raw_g), cert.tau)
    fplus = _to_working(np.array(raw_f), cert.tau)
    direct, X = direct_weighted_sum(cert, mu, L, gamma, grads, fplus)
    gram = X @ np.swapaxes(X, -1, -2)
    quad = (gram * S_sym).sum(axis=(-1, -2)) * L
    worst = max(float(abs(d - q) / max(1, abs(d))) for d, q in zip(direct, quad))
    trials, dim = grads.shape[0], grads.shape[-1]
    return OracleResult(trials=trials, dim=dim, seed=seed, max_error=worst)


# ----------------------------------------------------------- propositions


@dataclass
class Audit:
    passed: bool
    worst_margin: float
    detail: str = ""


def _audit(margins, tol, detail=""):
    if not margins:
        return Audit(True, 0.0, f"{detail} (vacuous)" if detail else "vacuous")
    worst = min(margins)
    return Audit(bool(worst >= -tol), float(worst), detail)


def check_propositions(N, rho, eta, grid_size=256, tol=1e-10, psi_tol=1e-8):
    """Numeric audits of the scalar facts the feasibility proof relies on.

    Keys: ``optimal_pair`` (ranges and signs of T_k at an optimal pair), ``psi_endpoints``
    (convexity of psi by second differences, with its endpoint identities),
    ``chord`` (psi below its chord), ``ratio_monotone`` (monotone ratio T_k/F_{N-k}),
    ``beta_nonneg`` (non-negativity of beta_k).  Failures never raise.
    """
    audits = {}

    # ranges and signs
    margins = [float(rho + 1), float(-rho), float(eta + rho)]
    T = [eval_T(rho, eta, k) for k in range(0, N + 1)] if rho != 0 and eta != 0 else None
    if T is None:
        audits["optimal_pair"] = Audit(False, -math.inf, "rho or eta is zero")
    else:
        scale_N = max(1, abs(eval_E(rho, N)))
        margins += [float(T[k]) for k in range(1, N)]
        margins.append(float(tol * scale_N - abs(T[N])))
        audits["optimal_pair"] = _audit(margins, tol, "rho in (-1,0), eta > -rho, T_k >= 0, T_N = 0")

    in_domain = -1 < rho < 0 and eta > 0
    # psi is well conditioned (values of order N log(1/|rho|)), so binary64 suffices
    rho_f, eta_f = float(rho), float(eta)
    if not in_domain:
        for key in ("psi_endpoints", "chord"):
            audits[key] = Audit(False, -math.inf, "outside rho in (-1,0), eta > 0")
    else:
        try:
            ts = [N * i / (grid_size - 1) for i in range(grid_size)]
            psi = [eval_psi(t, rho_f, eta_f, N) for t in ts]
            scale = max(1, max(abs(p) for p in psi))
            second = [float(psi[i - 1] - 2 * psi[i] + psi[i + 1]) / float(scale) for i in range(1, grid_size - 1)]
            slope = -2 * math.log(-rho_f)
            end0 = -abs(float(psi[0]))
            endN = -abs(float(psi[-1] - slope * N))
            convex = _audit(second, psi_tol, "second differences of psi on [0, N]")
            ends_ok = end0 >= -tol and endN >= -tol
            audits["psi_endpoints"] = Audit(
                convex.passed and ends_ok,
                min(convex.worst_margin, end0, endN),
                f"psi(0)={float(psi[0]):.3g}, psi(N)-(-2N log(-rho))={float(psi[-1] - slope * N):.3g}",
            )
            audits["chord"] = _audit(
                [float(slope * t - p) for t, p in zip(ts, psi)], psi_tol, "psi(t) <= -2t log(-rho)"
            )
        except DomainError as exc:
            for key in ("psi_endpoints", "chord"):
                audits[key] = Audit(False, -math.inf, str(exc))

    try:
        q = {k: T[k] / eval_F(eta, N - k) for k in range(1, N)}
        audits["ratio_monotone"] = _audit([float(q[k + 1] - q[k]) for k in range(1, N - 1)], tol, "T_k/F_{N-k} non-decreasing")
        audits["beta_nonneg"] = _audit(
            [float((eta - rho) / eta * eval_E(rho, k) - q[k]) for k in range(1, N)], tol, "beta_k >= 0"
        )
    except (DomainError, ZeroDivisionError, TypeError) as exc:
        for key in ("ratio_monotone", "beta_nonneg"):
            audits[key] = Audit(False, -math.inf, str(exc))
    return audits


# ---------------------------------------------------------------- certify


@dataclass(frozen=True)
class CertifyConfig:
    arithmetic: str = "mp"
    dps: int = 30
    psd_tol: float = 1e-8
    balance_tol: float = 1e-10
    lambda_tol: float = 1e-10
    oracle_tol: float = 1e-8
    decomposition_tol: float = 1e-9
    oracle_trials: int = 100
    oracle_dim: int = 3
    seed: int = 0
    grid_size: int = 256
    tol: float | None = None


@dataclass
class VerificationReport:
    N: int
    mu: float
    L: float
    gamma: float
    gamma_L: float
    arithmetic: str
    dps: int | None
    surrogate: dict | None
    tau: float
    lambdas: list
    balance_residuals: list
    min_lambda: float
    min_eigenvalue: float
    psd_scale: float
    decomposition_residual: float
    delta: list
    proposition_audits: dict
    oracle_trials: int
    oracle_max_error: float
    oracle_seed: int
    rng: str
    certified: bool
    failed_stages: list
    bound_value: float | None
    bound_form: str | None
    reference_value: float | None
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _precision_for(inst: ProblemInstance, base_dps):
    """Working digits: the base plus what rho'**(-2N) and eta'**(-2N) would cancel."""
    try:
        sur = surrogate_class(inst.convert("float"))
        values = (sur.rho_eff, sur.eta_eff)
    except ConvergenceError:
        values = (1 - inst.gamma * inst.L,)
    return base_dps + extra_digits(*values, N=inst.N)


def certify(inst: ProblemInstance, config: CertifyConfig = CertifyConfig()) -> VerificationReport:
    check_arithmetic(config.arithmetic)
    if config.arithmetic == "mp":
        dps = _precision_for(inst, config.dps)
        with mpmath.workdps(dps):
            return _certify(inst, config, dps)
    return _certify(inst, config, None)


def _certify(inst, config, dps):
    arithmetic = config.arithmetic
    work = inst.convert(arithmetic)
    N = inst.N
    failed = []

    if config.tol is not None:
        tol = config.tol
    elif arithmetic == "rational":
        tol = 0
    else:
        tol = working_tolerance(arithmetic, dps)
    if arithmetic == "rational":
        p = derive_params(work)
        if p.rho == 0 or p.eta == 0 or eval_T(p.rho, p.eta, N) != 0:
            raise ValueError("rational arithmetic needs gamma to be exactly optimal for (mu, L); use 'mp'")
        sur = SurrogateClass(work.mu, work.L, "at_optimal", p.rho, p.eta)
    else:
        sur = surrogate_class(work, tol=tol, max_iter=200 + 4 * (dps or 0))
    rho, eta = sur.rho_eff, sur.eta_eff
    L_eff, mu_eff = sur.L_eff, sur.mu_eff
    kappa_eff = (1 - eta) / (1 - rho)

    cert = build_certificate(N, rho, eta, L_eff)
    mats = build_pep_matrices(cert, kappa_eff)

    residuals = check_balance(cert)
    if max(abs(r) for r in residuals) > config.balance_tol:
        failed.append("balance")
    min_lam = cert.min_lambda()
    if min_lam < -config.lambda_tol:
        failed.append("nonnegativity")
    if not cert.tau > 0:
        failed.append("tau")
    lam_min_eig, psd_ok = check_psd(mats.S_sym, config.psd_tol)
    if not psd_ok:
        failed.append("psd")

    scale = max(1, _max_abs(mats.S_sym))
    decomp = closed_form_pep_matrix(N, rho, eta)
    resid = decomposition_residual(mats.S_sym, decomp)
    delta_scale = max(1, max(abs(d) for d in decomp.delta))
    if resid > config.decomposition_tol * scale or min(decomp.delta) < -config.lambda_tol * delta_scale:
        failed.append("decomposition")

    inst_eff = ProblemInstance(N, mu_eff, L_eff, work.gamma) if _valid(N, mu_eff, L_eff, work.gamma) else None
    if inst_eff is None:
        failed.append("surrogate")
        oracle = OracleResult(0, config.oracle_dim, config.seed, math.inf)
    else:
        oracle = oracle_quadratic_identity(
            inst_eff, cert, mats.S_sym, config.oracle_trials, config.oracle_dim, config.seed
        )
    if not oracle.max_error <= config.oracle_tol:
        failed.append("oracle")

    audits = check_propositions(N, rho, eta, config.grid_size)
    failed += [f"audit:{name}" for name, a in audits.items() if not a.passed]

    # the certificate gives f0 - fN >= (L'/tau - 1)/(2L') |gN|^2 = gamma * c/2 * |gN|^2
    certified_min_form = (L_eff / cert.tau - 1) / (work.gamma * L_eff)
    ref = rate_bound(inst.convert("float"))
    if inst.mu >= 0:
        bound = 1 / (1 + work.gamma * work.L * certified_min_form)
        form, reference = "max_form", ref.max_value
    else:
        bound = certified_min_form
        form, reference = "min_form", ref.min_form
    if not math.isclose(float(bound), float(reference), rel_tol=1e-9):
        failed.append("bound_consistency")

    return VerificationReport(
        N=N,
        mu=float(inst.mu),
        L=float(inst.L),
        gamma=float(inst.gamma),
        gamma_L=float(inst.gamma * inst.L),
        arithmetic=arithmetic,
        dps=dps,
        surrogate={"mu_eff": float(mu_eff), "L_eff": float(L_eff), "regime": sur.regime},
        tau=float(cert.tau),
        lambdas=[[i, j, float(v)] for (i, j), v in cert.lam.items()],
        balance_residuals=[float(r) for r in residuals],
        min_lambda=float(min_lam),
        min_eigenvalue=float(lam_min_eig),
        psd_scale=float(scale),
        decomposition_residual=float(resid),
        delta=[float(d) for d in decomp.delta],
        proposition_audits={k: asdict(a) for k, a in audits.items()},
        oracle_trials=oracle.trials,
        oracle_max_error=float(oracle.max_error),
        oracle_seed=oracle.seed,
        rng=oracle.rng,
        certified=not failed,
        failed_stages=failed,
        bound_value=float(bound),
        bound_form=form,
        reference_value=None if reference is None else float(reference),
        config=asdict(config),
    )


def _valid(N, mu, L, gamma):
    try:
        ProblemInstance(N, mu, L, gamma)
    except ValueError:
        return False
    return True


def certificate_objects(inst: ProblemInstance, arithmetic="float"):
    """(surrogate, certificate, matrices, kappa_eff) in the requested arithmetic, for callers
    that want the raw objects rather than a report.  In mp mode call inside ``mpmath.workdps``."""
    work = inst.convert(arithmetic)
    tol = 0 if arithmetic == "rational" else working_tolerance(arithmetic)
    sur = surrogate_class(work, tol=tol, max_iter=400)
    cert = build_certificate(inst.N, sur.rho_eff, sur.eta_eff, sur.L_eff)
    kappa_eff = (1 - sur.eta_eff) / (1 - sur.rho_eff)
    return sur, cert, build_pep_matrices(cert, kappa_eff), kappa_eff


def mutation_detected(inst_eff, cert, kappa, key, factor, trials=20, dim=3, seed=0,
                      balance_tol=1e-10, oracle_tol=1e-8):
    """True when scaling lambda[key] by ``factor`` breaks balance or the quadratic identity."""
    bad = cert.perturbed(key, convert(factor, arithmetic_of(cert.tau)))
    res = check_balance(bad)
    if max(abs(r) for r in res) > balance_tol:
        return True
    mats = build_pep_matrices(bad, kappa)
    return oracle_quadratic_identity(inst_eff, bad, mats.S_sym, trials, dim, seed).max_error > oracle_tol
