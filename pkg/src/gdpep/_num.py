"""Arithmetic back ends shared by every module.

Three modes are supported: ``"float"`` (binary64), ``"rational"``
(:class:`fractions.Fraction`, exact) and ``"mp"`` (mpmath multiprecision,
precision taken from the ambient ``mpmath.mp.dps``).  Kernel functions are
written against plain Python operators so the same code runs in all three.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

import mpmath
import numpy as np

ARITHMETICS = ("float", "rational", "mp")


class DomainError(ValueError):
    """Raised when a formula is evaluated outside its domain."""


def check_arithmetic(arithmetic):
    if arithmetic not in ARITHMETICS:
        raise ValueError(f"unknown arithmetic {arithmetic!r}; expected one of {ARITHMETICS}")


def convert(x, arithmetic):
    """Coerce ``x`` into the number type of ``arithmetic``.

    Strings are parsed natively in each mode, so ``"0.1"`` becomes exactly
    1/10 in rational mode.
    """
    check_arithmetic(arithmetic)
    if arithmetic == "float":
        return float(x)
    if arithmetic == "rational":
        if isinstance(x, Fraction):
            return x
        if isinstance(x, mpmath.mpf):
            sign, man, exp, _ = x._mpf_
            return (-1) ** sign * Fraction(int(man)) * Fraction(2) ** int(exp)
        return Fraction(x)
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def arithmetic_of(*values):
    """Infer the mode from the operands: any mpf wins, then all-rational, else float."""
    if any(isinstance(v, mpmath.mpf) for v in values):
        return "mp"
    if values and all(isinstance(v, Rational) for v in values):
        return "rational"
    return "float"


def is_exact(x):
    return isinstance(x, Rational)


def log(x):
    if isinstance(x, mpmath.mpf):
        return mpmath.log(x)
    return math.log(x)


def to_float(x):
    return float(x)


def zeros(n, m, like):
    """An ``n`` x ``m`` zero matrix whose entries share the type of ``like``."""
    if isinstance(like, float):
        return np.zeros((n, m))
    out = np.empty((n, m), dtype=object)
    out.fill(like * 0)
    return out


def identity(n, like):
    out = zeros(n, n, like)
    for i in range(n):
        out[i, i] = like * 0 + 1
    return out


def as_float_array(a):
    return np.asarray(a, dtype=object).astype(float) if np.asarray(a).dtype == object else np.asarray(a, dtype=float)


def extra_digits(*values, N=1):
    """Decimal digits lost to cancellation when forming x**(-2N) for the given values."""
    worst = 0.0
    for v in values:
        v = abs(float(v))
        if 0.0 < v < 1.0:
            worst = max(worst, -2 * N * math.log10(v))
    return int(math.ceil(worst))
