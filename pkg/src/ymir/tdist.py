"""Student-t distribution quantiles without external dependencies.

The generalized ESD critical values need upper-tail t quantiles at
arbitrary probabilities and degrees of freedom.  The CDF is evaluated
through the regularized incomplete beta function (continued fraction,
Lentz's algorithm) and inverted with a bracketed Newton iteration to
1e-8 absolute accuracy in the quantile.
"""

from __future__ import annotations

import math

from .errors import ParameterError

_MAX_CF_ITER = 300
_CF_EPS = 3e-16
_CF_FPMIN = 1e-300


def _beta_cf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_CF_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise ParameterError("betainc requires a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # The continued fraction converges fast only on one side of the mean.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_cdf(x: float, df: float) -> float:
    """P(T <= x) for T ~ Student-t with ``df`` degrees of freedom."""
    if df <= 0.0:
        raise ParameterError("degrees of freedom must be positive")
    if x == 0.0:
        return 0.5
    z = df / (df + x * x)
    tail = 0.5 * betainc(0.5 * df, 0.5, z)
    return 1.0 - tail if x > 0.0 else tail


def t_pdf(x: float, df: float) -> float:
    ln = (
        math.lgamma(0.5 * (df + 1.0))
        - math.lgamma(0.5 * df)
        - 0.5 * math.log(df * math.pi)
        - 0.5 * (df + 1.0) * math.log1p(x * x / df)
    )
    return math.exp(ln)


def t_ppf(p: float, df: float, tol: float = 1e-10) -> float:
    """Quantile of the Student-t distribution.

    Bracketed Newton iteration on the CDF; the bracket shrinks on every
    step, so convergence is guaranteed even where the density is tiny.
    """
    if df <= 0.0:
        raise ParameterError("degrees of freedom must be positive")
    if not 0.0 < p < 1.0:
        raise ParameterError("p must lie strictly between 0 and 1")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_ppf(1.0 - p, df, tol)

    lo, hi = 0.0, 1.0
    while t_cdf(hi, df) < p:
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            raise ParameterError("t quantile out of range")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        err = t_cdf(x, df) - p
        if err > 0.0:
            hi = x
        else:
            lo = x
        pdf = t_pdf(x, df)
        if pdf > 0.0:
            step = err / pdf
            x_new = x - step
            if not lo < x_new < hi:
                x_new = 0.5 * (lo + hi)
        else:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= tol:
            return x_new
        x = x_new
    return x
