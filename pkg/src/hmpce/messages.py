"""Scalar message types and algebra shared by the estimators.

Complex-Gaussian messages are parameterized by (mean, variance) with the
circularly-symmetric convention, Gamma beliefs by (shape, rate) on a
precision, Beta beliefs by the usual pseudo-counts.  The digamma
approximation ln(x) - 1/(2x) is the default everywhere an expected
logarithm of a Gamma/Beta variable is needed; the exact digamma is
available behind a flag.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma as _digamma_exact


class NonInformativePosteriorError(ValueError):
    """Raised when an extrinsic division sees v_post >= v_pri."""


@dataclass(frozen=True)
class GaussianMsg:
    """Circular complex Gaussian message with scalar variance."""

    mean: complex
    variance: float

    def __post_init__(self):
        if not (self.variance > 0.0 and math.isfinite(self.variance)):
            raise ValueError(f"variance must be positive and finite, got {self.variance}")
        if not (math.isfinite(self.mean.real) and math.isfinite(self.mean.imag)):
            raise ValueError(f"mean must be finite, got {self.mean}")


@dataclass(frozen=True)
class GammaBelief:
    """Gamma belief Ga(shape, rate) over a precision."""

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0.0 and self.rate > 0.0):
            raise ValueError(f"shape and rate must be positive, got ({self.shape}, {self.rate})")

    def mean(self):
        return self.shape / self.rate


@dataclass(frozen=True)
class BetaBelief:
    """Beta belief with pseudo-counts (a, b) for (success, failure)."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError(f"pseudo-counts must be positive, got ({self.a}, {self.b})")


def digamma_approx(x):
    """ln(x) - 1/(2x), the asymptotic digamma approximation.

    Only defined for x > 0.  Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("digamma_approx requires x > 0")
    out = np.log(x) - 0.5 / x
    return out if out.ndim else float(out)


def digamma_exact(x):
    """Exact digamma, same domain contract as digamma_approx."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0):
        raise ValueError("digamma_exact requires x > 0")
    out = _digamma_exact(x)
    return out if np.ndim(out) else float(out)


def digamma_fn(exact=False):
    return digamma_exact if exact else digamma_approx


def gaussian_multiply(a, b):
    """Product of two Gaussian messages (precision-weighted combination)."""
    denom = a.variance + b.variance
    variance = a.variance * b.variance / denom
    mean = (a.mean * b.variance + b.mean * a.variance) / denom
    return GaussianMsg(mean, variance)


def gaussian_extrinsic(post, pri):
    """Extrinsic division: the message m with m * pri = post.

    Raises NonInformativePosteriorError when v_post >= v_pri, in which
    case there is no valid Gaussian quotient; callers that need to keep
    running clamp the variance instead (see gaussian_extrinsic_clamped).
    """
    if post.variance >= pri.variance:
        raise NonInformativePosteriorError(
            f"non-informative posterior: v_post={post.variance} >= v_pri={pri.variance}"
        )
    inv_v = 1.0 / post.variance - 1.0 / pri.variance
    variance = 1.0 / inv_v
    mean = variance * (post.mean / post.variance - pri.mean / pri.variance)
    return GaussianMsg(mean, variance)


def gaussian_extrinsic_clamped(post, pri, max_variance=1e8):
    """Extrinsic division with the variance clamped to (0, max_variance].

    Returns (message, clamped_flag).  Used inside the turbo loop where a
    barely-informative posterior must not inject an infinite variance.
    """
    inv_v = 1.0 / post.variance - 1.0 / pri.variance
    clamped = not (inv_v > 1.0 / max_variance)
    variance = 1.0 / inv_v if not clamped else max_variance
    mean = variance * (post.mean / post.variance - pri.mean / pri.variance)
    return GaussianMsg(mean, variance), clamped


def cgauss_logpdf(x, mean, variance):
    """Log density of CN(mean, variance) at x.  Vectorized."""
    x = np.asarray(x)
    v = np.asarray(variance, dtype=float)
    if np.any(v <= 0.0):
        raise ValueError("variance must be positive")
    out = -np.log(np.pi * v) - np.abs(x - mean) ** 2 / v
    return out if out.ndim else float(out)


def cgauss_pdf(x, mean, variance):
    """Density of CN(mean, variance) at x."""
    out = np.exp(cgauss_logpdf(x, mean, variance))
    return out if np.ndim(out) else float(out)


def beta_log_expectations(belief, exact=False):
    """(E[ln p], E[ln(1-p)]) under a Beta belief.

    Uses the ln(x) - 1/(2x) approximation by default, the exact digamma
    when exact=True.
    """
    psi = digamma_fn(exact)
    tot = psi(belief.a + belief.b)
    return psi(belief.a) - tot, psi(belief.b) - tot


def gamma_log_mean(belief, exact=False):
    """E[ln v] under Ga(shape, rate)."""
    psi = digamma_fn(exact)
    return psi(belief.shape) - math.log(belief.rate)
