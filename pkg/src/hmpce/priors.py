"""Scalar channel-gain priors shared by the generator, the oracle, and the runner.

The angular-domain gain of one (subcarrier, element) pair is modeled as a
two-component mixture: with probability `activation` the element is active
and draws from a zero-mean complex Gaussian whose variance is itself random
(log-uniform spread, normalized so active elements have the configured mean
power); otherwise it draws from a common near-zero variance component
(or is exactly zero for the Bernoulli-Gaussian variant).
"""

import math
from dataclasses import dataclass

import numpy as np

VARIANT_LVD = "tsgm-lvd"
VARIANT_TSGM = "tsgm"
VARIANT_BG = "bg"
VARIANTS = (VARIANT_LVD, VARIANT_TSGM, VARIANT_BG)


def loguniform_mean_inverse(lo, hi):
    """E[1/q] for q log-uniform on [lo, hi]."""
    if not (0.0 < lo <= hi):
        raise ValueError(f"invalid log-uniform range ({lo}, {hi})")
    if lo == hi:
        return 1.0 / lo
    return (1.0 / lo - 1.0 / hi) / math.log(hi / lo)


def sample_loguniform_precisions(rng, size, spread, mean_power=1.0):
    """Draw precisions log-uniformly over `spread`, rescaled so that the
    implied variances have expectation `mean_power` exactly."""
    lo, hi = spread
    raw = np.exp(rng.uniform(math.log(lo), math.log(hi), size=size))
    scale = loguniform_mean_inverse(lo, hi) / mean_power
    return raw * scale


@dataclass(frozen=True)
class ScalarPrior:
    """Per-element gain prior used for synthesis and for the MMSE oracle."""

    variant: str = VARIANT_LVD
    activation: float = 0.2
    large_power: float = 1.0
    small_variance: float = 0.01
    spread: tuple = (0.1, 10.0)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown prior variant {self.variant!r}")
        if not 0.0 <= self.activation <= 1.0:
            raise ValueError("activation must lie in [0, 1]")

    def mean_power(self):
        small = 0.0 if self.variant == VARIANT_BG else self.small_variance
        return self.activation * self.large_power + (1.0 - self.activation) * small

    def sample_large_variances(self, rng, size):
        """Variances of active elements (constant unless the spread is wide)."""
        if self.variant != VARIANT_LVD or self.spread[0] == self.spread[1]:
            return np.full(size, self.large_power)
        prec = sample_loguniform_precisions(rng, size, self.spread, self.large_power)
        return 1.0 / prec

    def sample(self, rng, size):
        """Draw gains; returns (gains, active_mask, large_variances)."""
        active = rng.random(size) < self.activation
        vlarge = self.sample_large_variances(rng, size)
        small = 0.0 if self.variant == VARIANT_BG else self.small_variance
        var = np.where(active, vlarge, small)
        gains = np.sqrt(var / 2.0) * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        return gains, active, vlarge


def posterior_moments_mixture(r, tau, lam, v_large, v_small):
    """Exact posterior mean/variance for h ~ lam CN(0, v_large) + (1-lam) CN(0, v_small)
    observed through r = h + CN(0, tau).  v_small = 0 gives the spike-and-slab case.
    Vectorized over r (and v_large).  Returns (mean, var, weight_large)."""
    r = np.asarray(r)
    v_large = np.asarray(v_large, dtype=float)
    s_large = v_large + tau
    s_small = v_small + tau
    if lam >= 1.0:
        w = np.ones(np.broadcast(r, v_large).shape)
    elif lam <= 0.0:
        w = np.zeros(np.broadcast(r, v_large).shape)
    else:
        # log-odds of the active component
        llr = (
            math.log(lam / (1.0 - lam))
            + np.log(s_small / s_large)
            + np.abs(r) ** 2 * (1.0 / s_small - 1.0 / s_large)
        )
        w = 1.0 / (1.0 + np.exp(-llr))
    m_large = (v_large / s_large) * r
    m_small = (v_small / s_small) * r
    v_l = v_large * tau / s_large
    v_s = v_small * tau / s_small
    mean = w * m_large + (1.0 - w) * m_small
    var = (
        w * (np.abs(m_large) ** 2 + v_l)
        + (1.0 - w) * (np.abs(m_small) ** 2 + v_s)
        - np.abs(mean) ** 2
    )
    return mean, var, w
