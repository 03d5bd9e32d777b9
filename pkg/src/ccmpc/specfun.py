"""Scalar special functions backing the probabilistic constraint reformulations.

Everything here is self-contained (no SciPy): the error function family is
evaluated with Cody-style rational minimax approximations, inverses by a
rational initial estimate refined with Newton steps, and the chi-square
quantile through the regularized lower incomplete gamma function.

All functions accept floats or numpy arrays and evaluate elementwise, except
the chi-square routines which are scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "Probability",
    "erf",
    "erfc",
    "erf_inv",
    "norm_inv",
    "gammainc_lower",
    "chi2_cdf",
    "chi2_inv",
]

_SQRT_PI = math.sqrt(math.pi)
_TAIL_CLIP = 1e-15  # quantile arguments are saturated this far from the endpoint


class DomainError(ValueError):
    """Argument outside the mathematical domain of the function."""


@dataclass(frozen=True)
class Probability:
    """A probability level constrained to the open interval (0, 1)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or not 0.0 < v < 1.0:
            raise DomainError(f"probability must lie in (0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __float__(self) -> float:
        return self.value


def _as_probability(p) -> float:
    if isinstance(p, Probability):
        return p.value
    return Probability(float(p)).value


# ---------------------------------------------------------------------------
# Error function family
# ---------------------------------------------------------------------------

# Rational minimax coefficients for erf/erfc (W. J. Cody, Math. Comp. 23, 1969).
_ERF_A = (3.16112374387056560e00, 1.13864154151050156e02,
          3.77485237685302021e02, 3.20937758913846947e03)
_ERF_A4 = 1.85777706184603153e-1
_ERF_B = (2.36012909523441209e01, 2.44024637934444173e02,
          1.28261652607737228e03, 2.84423683343917062e03)
_ERFC_C = (5.64188496988670089e-1, 8.88314979438837594e00,
           6.61191906371416295e01, 2.98635138197400131e02,
           8.81952221241769090e02, 1.71204761263407058e03,
           2.05107837782607147e03)
_ERFC_C7 = 1.23033935479799725e03
_ERFC_C8 = 2.15311535474403846e-8
_ERFC_D = (1.57449261107098347e01, 1.17693950891312499e02,
           5.37181101862009858e02, 1.62138957456669019e03,
           3.29079923573345963e03, 4.36261909014324716e03,
           3.43936767414372164e03)
_ERFC_D7 = 1.23033935480374942e03
_ERFC_P = (3.05326634961232344e-1, 3.60344899949804439e-1,
           1.25781726111229246e-1, 1.60837851487422766e-2)
_ERFC_P4 = 6.58749161529837803e-4
_ERFC_P5 = 1.63153871373020978e-2
_ERFC_Q = (2.56852019228982242e00, 1.87295284992346047e00,
           5.27905102951428412e-1, 6.05183413124413191e-2)
_ERFC_Q4 = 2.33520497626869185e-3

_ERF_THRESH = 0.46875
_ERFC_XBIG = 26.543  # erfc underflows to 0 beyond this


def _erf_small(y2):
    """erf(x)/x on x*x = y2 <= THRESH**2."""
    xnum = _ERF_A4 * y2
    xden = y2
    for a, b in zip(_ERF_A[:3], _ERF_B[:3]):
        xnum = (xnum + a) * y2
        xden = (xden + b) * y2
    return (xnum + _ERF_A[3]) / (xden + _ERF_B[3])


def _erfc_mid(y):
    """exp(x*x) * erfc(x) on THRESH < x <= 4."""
    xnum = _ERFC_C8 * y
    xden = y
    for c, d in zip(_ERFC_C, _ERFC_D):
        xnum = (xnum + c) * y
        xden = (xden + d) * y
    return (xnum + _ERFC_C7) / (xden + _ERFC_D7)


def _erfc_large(y):
    """exp(x*x) * erfc(x) on x > 4."""
    y2 = 1.0 / (y * y)
    xnum = _ERFC_P5 * y2
    xden = y2
    for p, q in zip(_ERFC_P, _ERFC_Q):
        xnum = (xnum + p) * y2
        xden = (xden + q) * y2
    res = y2 * (xnum + _ERFC_P4) / (xden + _ERFC_Q4)
    return (1.0 / _SQRT_PI - res) / y


def _exp_nxx(y):
    # exp(-y*y) evaluated as exp(-hi*hi)*exp(-del) with hi a short float,
    # which keeps the argument reduction exact (Cody's trick).
    hi = np.trunc(y * 16.0) / 16.0
    delta = (y - hi) * (y + hi)
    return np.exp(-hi * hi) * np.exp(-delta)


def _erfc_positive(y):
    """erfc on y >= 0, elementwise."""
    y = np.asarray(y, dtype=float)
    small = y <= _ERF_THRESH
    mid = (y > _ERF_THRESH) & (y <= 4.0)
    big = y > 4.0

    out = np.empty_like(y)
    if small.any():
        ys = y[small]
        out[small] = 1.0 - ys * _erf_small(ys * ys)
    if mid.any():
        ym = y[mid]
        out[mid] = _exp_nxx(ym) * _erfc_mid(ym)
    if big.any():
        yb = np.minimum(y[big], _ERFC_XBIG)
        out[big] = np.where(y[big] > _ERFC_XBIG, 0.0, _exp_nxx(yb) * _erfc_large(yb))
    return out


def _check_finite(x, name):
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} requires finite input")


def erf(x):
    """Error function (2/sqrt(pi)) * integral of exp(-u^2) from 0 to x.

    Absolute accuracy is a few ulps (well below 1e-14). Odd in x, with
    range (-1, 1).
    """
    arr = np.asarray(x, dtype=float)
    _check_finite(arr, "erf")
    y = np.abs(arr)
    small = y <= _ERF_THRESH
    out = np.empty_like(arr)
    if small.any():
        xs = arr[small]
        out[small] = xs * _erf_small(xs * xs)
    if (~small).any():
        out[~small] = np.sign(arr[~small]) * (1.0 - _erfc_positive(y[~small]))
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def erfc(x):
    """Complementary error function 1 - erf(x), accurate in the upper tail."""
    arr = np.asarray(x, dtype=float)
    _check_finite(arr, "erfc")
    neg = arr < 0
    out = _erfc_positive(np.abs(arr))
    out = np.where(neg, 2.0 - out, out)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


# Rational approximation of the standard normal quantile (P. Acklam, 2003);
# relative error below 1.2e-9, then polished by Newton on erf.
_NDTRI_A = (-3.969683028665376e+01, 2.209460984245205e+02,
            -2.759285104469687e+02, 1.383577518672690e+02,
            -3.066479806614716e+01, 2.506628277459239e+00)
_NDTRI_B = (-5.447609879822406e+01, 1.615858368580409e+02,
            -1.556989798598866e+02, 6.680131188771972e+01,
            -1.328068155288572e+01)
_NDTRI_C = (-7.784894002430293e-03, -3.223964580411365e-01,
            -2.400758277161838e+00, -2.549732539343734e+00,
            4.374664141464968e+00, 2.938163982698783e+00)
_NDTRI_D = (7.784695709041462e-03, 3.224671290700398e-01,
            2.445134137142996e+00, 3.754408661907416e+00)


def _ndtri_estimate(p):
    """Initial rational estimate of the standard normal quantile, elementwise."""
    p = np.asarray(p, dtype=float)
    x = np.empty_like(p)
    a, b, c, d = _NDTRI_A, _NDTRI_B, _NDTRI_C, _NDTRI_D

    lo = p < 0.02425
    hi = p > 1.0 - 0.02425
    mid = ~(lo | hi)
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = ((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]
        den = ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        x[mid] = num * q / den
    for mask, tail_p, sign in ((lo, p[lo], -1.0), (hi, 1.0 - p[hi], 1.0)):
        if mask.any():
            q = np.sqrt(-2.0 * np.log(tail_p))
            num = ((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]
            den = (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
            x[mask] = -sign * num / den
    return x


def erf_inv(p):
    """Inverse of erf on (-1, 1).

    Arguments closer to the endpoints than 1e-15 are saturated at
    +/-(1 - 1e-15); the corresponding quantile error is below 1e-7 in
    absolute terms there. Raises DomainError for |p| >= 1.
    """
    arr = np.asarray(p, dtype=float)
    _check_finite(arr, "erf_inv")
    if np.any(np.abs(arr) >= 1.0):
        raise DomainError("erf_inv requires |p| < 1")
    clipped = np.clip(arr, -(1.0 - _TAIL_CLIP), 1.0 - _TAIL_CLIP)

    x = _ndtri_estimate((clipped + 1.0) / 2.0) / math.sqrt(2.0)
    # Two Newton steps: quadratic convergence from ~1e-9 initial error.
    # Toward the endpoints the residual is formed against erfc, where
    # q = 1 - |p| is exact and erfc keeps full relative accuracy.
    tail = np.abs(clipped) > 0.5
    q = 1.0 - np.abs(clipped)
    for _ in range(2):
        residual = np.where(tail,
                            np.sign(clipped) * (q - _erfc_positive(np.abs(x))),
                            erf(x) - clipped)
        x = x - residual * (_SQRT_PI / 2.0) * np.exp(x * x)
    return float(x) if np.isscalar(p) or arr.ndim == 0 else x


def norm_inv(p):
    """Standard normal quantile, computed as sqrt(2) * erf_inv(2p - 1)."""
    arr = np.asarray(p, dtype=float)
    _check_finite(arr, "norm_inv")
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise DomainError("norm_inv requires p in (0, 1)")
    out = math.sqrt(2.0) * erf_inv(2.0 * arr - 1.0)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


# ---------------------------------------------------------------------------
# Regularized incomplete gamma and the chi-square quantile
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 600


def _gamma_series(a: float, x: float) -> float:
    """P(a, x) by power series; fast and relative-accurate for x < a + 1."""
    log_prefactor = a * math.log(x) - x - math.lgamma(a)
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return min(1.0, math.exp(log_prefactor) * total)


def _gamma_cont_fraction(a: float, x: float) -> float:
    """Q(a, x) by modified-Lentz continued fraction; for x >= a + 1."""
    log_prefactor = a * math.log(x) - x - math.lgamma(a)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(log_prefactor) * h


def _check_gamma_args(a: float, x: float) -> None:
    if a <= 0.0:
        raise DomainError("incomplete gamma requires a > 0")
    if x < 0.0:
        raise DomainError("incomplete gamma requires x >= 0")


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    _check_gamma_args(a, x)
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return max(0.0, 1.0 - _gamma_cont_fraction(a, x))


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).

    Relative-accurate for large x, where forming 1 - P would cancel.
    """
    _check_gamma_args(a, x)
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return _gamma_cont_fraction(a, x)


def chi2_cdf(x: float, k: int) -> float:
    """CDF of the chi-square distribution with k degrees of freedom."""
    if k < 1:
        raise DomainError("chi2_cdf requires k >= 1")
    if x <= 0.0:
        return 0.0
    return gammainc_lower(0.5 * k, 0.5 * x)


def _chi2_log_pdf(x: float, k: int) -> float:
    a = 0.5 * k
    return (a - 1.0) * math.log(x) - 0.5 * x - a * math.log(2.0) - math.lgamma(a)


def chi2_inv(p, k: int) -> float:
    """Chi-square quantile: the x with chi2_cdf(x, k) = p.

    Wilson-Hilferty initial guess, then a bracketed Newton iteration on the
    regularized incomplete gamma (analytic derivative = the chi-square pdf).
    Relative accuracy ~1e-12. Levels beyond 1 - 1e-15 are saturated there.
    """
    p = _as_probability(p)
    if int(k) != k or k < 1:
        raise DomainError("chi2_inv requires an integer k >= 1")
    k = int(k)
    p = min(p, 1.0 - _TAIL_CLIP)

    a = 0.5 * k
    z = norm_inv(p)
    c = 2.0 / (9.0 * k)
    x = k * (1.0 - c + z * math.sqrt(c)) ** 3
    if x <= 0.0:
        # Wilson-Hilferty goes nonpositive deep in the lower tail; use the
        # leading term of the CDF's small-x expansion instead.
        x = 2.0 * math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)
    # Below the median iterate on P - p; above it on q - Q with q = 1 - p
    # (exact for p >= 0.5), so the residual never cancels.
    q = 1.0 - p
    lo, hi = 0.0, math.inf
    for _ in range(200):
        if p <= 0.5:
            f = gammainc_lower(a, 0.5 * x) - p
        else:
            f = q - gammainc_upper(a, 0.5 * x)
        if f > 0.0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        x_new = x - f / max(math.exp(_chi2_log_pdf(x, k)), 1e-300)
        if math.isinf(hi) and x_new > 10.0 * x:
            x_new = 10.0 * x  # keep expansion geometric where the pdf underflows
        if not (math.isfinite(x_new) and lo < x_new < hi):
            x_new = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * x
        if abs(x_new - x) <= 1e-14 * x:
            x = x_new
            break
        x = x_new
    return x
