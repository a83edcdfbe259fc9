"""Linear MMSE estimation against a row-orthonormal pilot operator.

For A with A A^H = I_M and an i.i.d. prior CN(h_pri, v_pri I), the posterior
mean and average variance have the closed forms

    h_post = h_pri + v_pri / (v_pri + sigma2) * A^H (y - A h_pri)
    v_post = v_pri - (M / N) * v_pri^2 / (v_pri + sigma2)

which the FFT-based pilot structure evaluates in O(N log N).
"""

import numpy as np

_VAR_FLOOR = 1e-30


def lmmse_update(y, pilot, h_pri, v_pri, sigma2):
    """One matrix-free LMMSE update for a single subcarrier.

    Returns (h_post, v_post) with a scalar posterior variance.  sigma2 = 0
    with M = N pins the posterior variance to a tiny positive floor.
    """
    if v_pri <= 0.0:
        raise ValueError(f"prior variance must be positive, got {v_pri}")
    if sigma2 < 0.0:
        raise ValueError(f"noise variance must be non-negative, got {sigma2}")
    gain = v_pri / (v_pri + sigma2)
    residual = y - pilot.apply(h_pri)
    h_post = h_pri + gain * pilot.adjoint(residual)
    v_post = v_pri * (1.0 - gain * pilot.M / pilot.N)
    return h_post, max(v_post, _VAR_FLOOR)


def extrinsic_split(h_post, v_post, h_pri, v_pri, max_variance=1e8):
    """Vectorized extrinsic division for one subcarrier (scalar variances).

    Computes the Gaussian quotient post / pri; when the posterior is not
    informative enough (1/v_post - 1/v_pri <= 1/max_variance) the extrinsic
    variance is clamped to max_variance.  Returns (h_ext, v_ext, clamped).
    """
    inv = 1.0 / v_post - 1.0 / v_pri
    clamped = not (inv > 1.0 / max_variance)
    v_ext = max_variance if clamped else 1.0 / inv
    h_ext = v_ext * (h_post / v_post - h_pri / v_pri)
    return h_ext, v_ext, clamped


def dense_lmmse(y, A, h_pri, v_pri, sigma2):
    """Reference dense solve of the same posterior (for validation).

    Solves (A^H A / sigma2 + I / v_pri) h = A^H y / sigma2 + h_pri / v_pri
    and returns (h_post, v_post) with v_post the average of the posterior
    covariance diagonal.
    """
    N = A.shape[1]
    G = A.conj().T @ A / sigma2 + np.eye(N) / v_pri
    rhs = A.conj().T @ y / sigma2 + h_pri / v_pri
    cov = np.linalg.inv(G)
    h_post = cov @ rhs
    v_post = float(np.real(np.trace(cov))) / N
    return h_post, v_post
