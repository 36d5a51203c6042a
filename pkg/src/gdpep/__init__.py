"""Exact worst-case rate of gradient descent for |grad f(x_N)|^2 / (f(x_0) - f_*).

Computes the rate, builds the closed-form dual PEP certificate for any
stepsize in (0, 2/L), and verifies it.
"""

__version__ = "0.1.0"

from .certificate import CertificateBundle, build_alpha_beta, build_certificate, interpolation_index_set
from .lab import Huber, PiecewiseQuadratic, Quadratic, empirical_probe, performance_ratio, run_gd
from .pep import assemble_pep_matrix, build_ab, build_htilde, build_pep_matrices, gd_schedule
from .scalar import (
    ProblemInstance,
    RateBound,
    ScalarParams,
    derive_params,
    eval_E,
    eval_F,
    eval_psi,
    eval_T,
    rate_bound,
)
from .stepsize import SurrogateClass, optimal_stepsize, surrogate_class
from .verify import (
    CertifyConfig,
    VerificationReport,
    certify,
    check_balance,
    check_propositions,
    check_psd,
    closed_form_pep_matrix,
    oracle_quadratic_identity,
)

__all__ = [
    "CertificateBundle",
    "CertifyConfig",
    "Huber",
    "PiecewiseQuadratic",
    "ProblemInstance",
    "Quadratic",
    "RateBound",
    "ScalarParams",
    "SurrogateClass",
    "VerificationReport",
    "assemble_pep_matrix",
    "build_ab",
    "build_alpha_beta",
    "build_certificate",
    "build_htilde",
    "build_pep_matrices",
    "certify",
    "check_balance",
    "check_propositions",
    "check_psd",
    "closed_form_pep_matrix",
    "derive_params",
    "empirical_probe",
    "eval_E",
    "eval_F",
    "eval_T",
    "eval_psi",
    "gd_schedule",
    "interpolation_index_set",
    "optimal_stepsize",
    "oracle_quadratic_identity",
    "performance_ratio",
    "rate_bound",
    "run_gd",
    "surrogate_class",
]
