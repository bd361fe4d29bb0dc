"""Special functions used by the secondary-uncertainty pipeline.

Scalar kernels are compiled with numba so that the engine can call them from
its own nopython loops.  The public wrappers validate inputs and raise; the
underscore-prefixed kernels assume valid inputs and report failure through a
status flag instead.
"""

from dataclasses import dataclass
import math

import numba as nb

SQRT2 = 1.4142135623730950488
SQRT2PI = 2.5066282746310005024
LOG_TINY = -690.0  # quantiles below ~1e-300 are reported as zero

NORMAL_LIMIT = 1e-8  # beta sd relative to min(mean, 1 - mean)
STATUS_OK = 0
STATUS_ITERATION_LIMIT = 1


class IterationLimitError(ArithmeticError):
    """Root finder did not converge within the allowed number of iterations."""

    def __init__(self, message, last_iterate, iterations):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


@dataclass(frozen=True)
class Precision:
    """Convergence settings for the inverse beta CDF."""

    relative_tolerance: float = 1e-6
    max_iterations: int = 200

    def __post_init__(self):
        if not 0.0 < self.relative_tolerance < 1.0:
            raise ValueError(
                f"relative_tolerance must lie in (0, 1), got {self.relative_tolerance}"
            )
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")


# ---------------------------------------------------------------------------
# Normal distribution
# ---------------------------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _normal_cdf(x):
    return 0.5 * math.erfc(-x / SQRT2)


@nb.njit(cache=True, nogil=True)
def _normal_quantile(p):
    # Wichura (1988) AS241, PPND16, followed by one Halley refinement step.
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        x = q * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                      + 67265.770927008700853) * r + 45921.953931549871457) * r
                    + 13731.693765509461125) * r + 1971.5909503065514427) * r
                  + 133.14166789178437745) * r + 3.387132872796366608) / (
            ((((((5226.495278852854561 * r + 28729.085735721942674) * r
                 + 39307.89580009271061) * r + 21213.794301586595867) * r
               + 5394.1960214247511077) * r + 687.1870074920579083) * r
             + 42.313330701600911252) * r + 1.0)
    else:
        r = p if q < 0.0 else 1.0 - p
        r = math.sqrt(-math.log(r))
        if r <= 5.0:
            r -= 1.6
            x = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                      + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                    + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                  + 4.6303378461565452959) * r + 1.42343711074968357734) / (
                ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                     + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                   + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                 + 2.05319162663775882187) * r + 1.0)
        else:
            r -= 5.0
            x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                      + 1.2426609473880784386e-3) * r + 0.026532189526576123093) * r
                    + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                  + 5.4637849111641143699) * r + 6.6579046435011037772) / (
                ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                     + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                   + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                 + 0.59983220655588793769) * r + 1.0)
        if q < 0.0:
            x = -x
    # Halley step on Phi(x) - p; the tail residual uses the smaller tail mass.
    if x < 0.0:
        e = _normal_cdf(x) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / SQRT2)
        e = -e
    u = e * SQRT2PI * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def normal_cdf(x: float) -> float:
    """Standard normal CDF."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"normal_cdf requires a finite argument, got {x}")
    return _normal_cdf(x)


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` on the open unit interval."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p}")
    return _normal_quantile(p)


# ---------------------------------------------------------------------------
# Beta distribution
# ---------------------------------------------------------------------------


@nb.njit(cache=True, nogil=True)
def _log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


@nb.njit(cache=True, nogil=True)
def _beta_cf(x, a, b):
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    fpmin = 1e-300
    eps = 1e-16
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
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
            break
    return h


@nb.njit(cache=True, nogil=True)
def _beta_tails(x, a, b, lbeta):
    """``(I_x(a, b), 1 - I_x(a, b))``, the smaller of the two computed directly."""
    if x <= 0.0:
        return 0.0, 1.0
    if x >= 1.0:
        return 1.0, 0.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - lbeta)
    if x < (a + 1.0) / (a + b + 2.0):
        lower = front * _beta_cf(x, a, b) / a
        return lower, 1.0 - lower
    upper = front * _beta_cf(1.0 - x, b, a) / b
    return 1.0 - upper, upper


@nb.njit(cache=True, nogil=True)
def _betainc_lbeta(x, a, b, lbeta):
    return _beta_tails(x, a, b, lbeta)[0]


@nb.njit(cache=True, nogil=True)
def _betainc(x, a, b):
    return _betainc_lbeta(x, a, b, _log_beta(a, b))


@nb.njit(cache=True, nogil=True)
def _inverse_beta_guess(p, a, b, lbeta):
    if a >= 1.0 and b >= 1.0:
        pp = p if p < 0.5 else 1.0 - p
        t = math.sqrt(-2.0 * math.log(pp))
        x = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t
        if p < 0.5:
            x = -x
        al = (x * x - 3.0) / 6.0
        h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0))
        w = x * math.sqrt(al + h) / h - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (
            al + 5.0 / 6.0 - 2.0 / (3.0 * h)
        )
        return a / (a + b * math.exp(2.0 * w))
    # Tail power laws: I_x ~ x^a / (a B) near 0 and 1 - (1-x)^b / (b B) near 1.
    lna = math.log(a / (a + b))
    lnb = math.log(b / (a + b))
    t = math.exp(a * lna) / a
    u = math.exp(b * lnb) / b
    w = t + u
    if p < t / w:
        return math.exp((math.log(a * p) + lbeta) / a)
    return -math.expm1((math.log(b * (1.0 - p)) + lbeta) / b)


@nb.njit(cache=True, nogil=True)
def _solve_lower(p, q, a, b, tol, max_iter):
    # Assumes the root lies in (0, 1/2].  ``q = 1 - p``; the residual is
    # taken on whichever tail is smaller so it keeps its relative accuracy.
    use_upper = p > 0.5
    lbeta = _log_beta(a, b)
    # A quantile below exp(LOG_TINY) is reported as zero.
    if math.log(a * p) + lbeta < a * LOG_TINY:
        return 0.0, 0, STATUS_OK
    x = _inverse_beta_guess(p, a, b, lbeta)
    lo = 0.0
    hi = 1.0
    if not (0.0 < x < 1.0):
        x = 0.5
    a1 = a - 1.0
    b1 = b - 1.0
    for it in range(1, max_iter + 1):
        lower, upper = _beta_tails(x, a, b, lbeta)
        err = q - upper if use_upper else lower - p
        if err == 0.0:
            return x, it, STATUS_OK
        if err < 0.0:
            lo = x
        else:
            hi = x
        logpdf = a1 * math.log(x) + b1 * math.log1p(-x) - lbeta
        pdf = math.exp(logpdf) if logpdf < 700.0 else math.inf
        if pdf > 0.0 and math.isfinite(pdf):
            t = err / pdf
            # Halley correction, clamped so the step stays within a factor
            # of two of Newton's; far from the root it would otherwise crawl.
            corr = t * (a1 / x - b1 / (1.0 - x))
            corr = min(max(corr, -1.0), 1.0)
            xn = x - t / (1.0 - 0.5 * corr)
        else:
            xn = 0.5 * (lo + hi)
        if not (lo <= xn <= hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= tol * xn or (hi - lo) <= tol * lo:
            return xn, it, STATUS_OK
        x = xn
    return x, max_iter, STATUS_ITERATION_LIMIT


@nb.njit(cache=True, nogil=True)
def _inverse_beta_cdf(p, a, b, tol, max_iter):
    """Return ``(x, iterations, status)`` for the beta quantile at ``p``."""
    if p <= 0.0:
        return 0.0, 0, STATUS_OK
    if p >= 1.0:
        return 1.0, 0, STATUS_OK
    if a == 1.0 and b == 1.0:
        return p, 0, STATUS_OK
    if p == 0.5 and a == b:
        return 0.5, 0, STATUS_OK
    # Huge shapes: the beta is normal to O(sd^2), far below any useful
    # tolerance, and the continued fraction would need ~sqrt(a) terms.
    m = a / (a + b)
    sd = math.sqrt(m * (1.0 - m) / (a + b + 1.0))
    if sd <= NORMAL_LIMIT * min(m, 1.0 - m):
        x = m + sd * _normal_quantile(p)
        return min(max(x, 0.0), 1.0), 0, STATUS_OK
    # Solve on whichever side of 1/2 the root falls, so the relative
    # tolerance applies to the smaller of x and 1 - x.
    if p <= _betainc(0.5, a, b):
        return _solve_lower(p, 1.0 - p, a, b, tol, max_iter)
    y, it, status = _solve_lower(1.0 - p, p, b, a, tol, max_iter)
    return 1.0 - y, it, status


def _check_shape(alpha, beta):
    if not (alpha > 0.0 and beta > 0.0 and math.isfinite(alpha) and math.isfinite(beta)):
        raise ValueError(f"shape parameters must be positive and finite, got ({alpha}, {beta})")


def regularized_incomplete_beta(z: float, alpha: float, beta: float) -> float:
    """Regularized incomplete beta function ``I_z(alpha, beta)``."""
    z, alpha, beta = float(z), float(alpha), float(beta)
    _check_shape(alpha, beta)
    if not 0.0 <= z <= 1.0:
        raise ValueError(f"z must lie in [0, 1], got {z}")
    return _betainc(z, alpha, beta)


def inverse_beta_cdf(p: float, alpha: float, beta: float, prec: Precision = Precision()) -> float:
    """Quantile of the Beta(alpha, beta) distribution.

    Solved with a Halley/Newton iteration that falls back to bisection
    whenever a step leaves the current bracket.

    Raises
    ------
    IterationLimitError
        If the iteration does not settle within ``prec.max_iterations``.
        The exception carries the last iterate.
    """
    p, alpha, beta = float(p), float(alpha), float(beta)
    _check_shape(alpha, beta)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    x, iterations, status = _inverse_beta_cdf(
        p, alpha, beta, prec.relative_tolerance, prec.max_iterations
    )
    if status != STATUS_OK:
        raise IterationLimitError(
            f"inverse_beta_cdf({p}, {alpha}, {beta}) did not converge "
            f"in {iterations} iterations",
            last_iterate=x,
            iterations=iterations,
        )
    return x
