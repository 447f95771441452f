"""Small-sample statistics for run comparisons, implemented from scratch.

Provides the Shapiro-Wilk normality test (AS R94 approximation, valid for
sample sizes 3..50) and the two-sided paired t-test. Support code: Acklam's
rational approximation to the normal quantile, the normal survival function
via erfc, and the regularized incomplete beta function by continued fraction.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

# -- normal distribution helpers ----------------------------------------------

_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def normal_ppf(p: float) -> float:
    """Inverse standard normal CDF (Acklam's approximation, |err| < 1.15e-9)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_ppf requires 0 < p < 1, got {p}")
    a, b, c, d = _PPF_A, _PPF_B, _PPF_C, _PPF_D
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > 1.0 - p_low:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
                ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def normal_sf(z: float) -> float:
    """Upper-tail probability of the standard normal."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


# -- regularized incomplete beta ----------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    max_iter = 300
    eps = 3e-14
    fpmin = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < fpmin:
            d = fpmin
        c = 1.0 + aa / c
        if abs(c) < fpmin:
            c = fpmin
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise RuntimeError("incomplete beta continued fraction failed to converge")


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: int) -> float:
    """Two-sided p-value for Student's t with df degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


# -- paired t-test -------------------------------------------------------------

class TTestResult(NamedTuple):
    t: float
    df: int
    p: float


def paired_t_test(a, b) -> TTestResult:
    """Two-sided paired t-test on matched samples a and b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired_t_test needs two 1-D samples of equal length")
    n = a.shape[0]
    if n < 2:
        raise ValueError("paired_t_test needs at least 2 pairs")
    d = a - b
    sd = d.std(ddof=1)
    df = n - 1
    if sd == 0.0:
        if d.mean() == 0.0:
            return TTestResult(0.0, df, 1.0)
        return TTestResult(math.inf if d.mean() > 0 else -math.inf, df, 0.0)
    t = d.mean() / (sd / math.sqrt(n))
    return TTestResult(float(t), df, t_sf_two_sided(float(t), df))


# -- Shapiro-Wilk (AS R94, complete samples, n in [3, 50]) ---------------------

_SW_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SW_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_SW_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_SW_C4 = (1.3822, -0.77857, 0.062767, -20.322e-4)
_SW_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_SW_C6 = (-0.4803, -0.082676, 0.0030302)


def _poly(coeffs, x: float) -> float:
    out = 0.0
    for c in reversed(coeffs):
        out = out * x + c
    return out


class SWResult(NamedTuple):
    w: float
    p: float


def shapiro_wilk(x) -> SWResult:
    """Shapiro-Wilk W and p for normality, sample size 3..50."""
    x = np.sort(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    if not 3 <= n <= 50:
        raise ValueError(f"shapiro_wilk supports n in [3, 50], got {n}")
    if x[-1] - x[0] == 0.0:
        raise ValueError("shapiro_wilk: sample has zero range")

    m = np.array([normal_ppf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    mm = float(m @ m)
    a = np.empty(n)
    if n == 3:
        a[0], a[1], a[2] = -math.sqrt(0.5), 0.0, math.sqrt(0.5)
    else:
        u = 1.0 / math.sqrt(n)
        cn = m[-1] / math.sqrt(mm)
        an = cn + _poly(_SW_C1, u)
        if n > 5:
            cn1 = m[-2] / math.sqrt(mm)
            an1 = cn1 + _poly(_SW_C2, u)
            phi = (mm - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (1.0 - 2.0 * an ** 2 - 2.0 * an1 ** 2)
            a[2:-2] = m[2:-2] / math.sqrt(phi)
            a[-2], a[1] = an1, -an1
        else:
            phi = (mm - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * an ** 2)
            a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[-1], a[0] = an, -an

    xc = x - x.mean()
    w = float((a @ x) ** 2 / (xc @ xc))
    w = min(w, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        p = min(max(p, 0.0), 1.0)
        return SWResult(w, p)
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        if gamma - math.log(1.0 - w) <= 0.0:
            return SWResult(w, 1e-99)
        y = -math.log(gamma - math.log(1.0 - w))
        mu = _poly(_SW_C3, float(n))
        sigma = math.exp(_poly(_SW_C4, float(n)))
    else:
        ln_n = math.log(n)
        y = math.log(1.0 - w)
        mu = _poly(_SW_C5, ln_n)
        sigma = math.exp(_poly(_SW_C6, ln_n))
    z = (y - mu) / sigma
    return SWResult(w, normal_sf(z))
