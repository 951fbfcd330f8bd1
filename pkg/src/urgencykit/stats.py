"""Paired significance testing on per-trial metric values.

The Student-t tail probability is computed from the regularized incomplete
beta function (continued-fraction evaluation, Lentz's method) so no
statistics package is needed at runtime.
"""

from __future__ import annotations

import math

_MAX_ITER = 300
_EPS = 3.0e-10
_FPMIN = 1.0e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and 0 <= x <= 1, accurate to ~1e-8."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError("shape parameters must be positive")
    if x < 0.0 or x > 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Continued fraction converges fastest below the mean of the distribution.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """One-sided upper tail P(T_df > t)."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    x = df / (df + t * t)
    tail_both = regularized_incomplete_beta(df / 2.0, 0.5, x)
    if t >= 0.0:
        return 0.5 * tail_both
    return 1.0 - 0.5 * tail_both


class DegenerateDifferencesError(ValueError):
    """Paired differences are constant and non-zero: no variance to test against."""


def paired_t_test(a: list[float], b: list[float]) -> tuple[float, float]:
    """One-sided paired Student's t-test for mean(a - b) > 0.

    Returns (t statistic, one-sided p-value). Identical inputs give
    (0, 0.5); constant non-zero differences raise
    :class:`DegenerateDifferencesError` rather than fabricating a p-value.
    """
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two pairs")
    diffs = [float(x) - float(y) for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        if mean == 0.0:
            return 0.0, 0.5
        raise DegenerateDifferencesError(
            "paired differences are constant and non-zero; t is undefined"
        )
    t_stat = mean / math.sqrt(var / n)
    return t_stat, student_t_sf(t_stat, n - 1)
