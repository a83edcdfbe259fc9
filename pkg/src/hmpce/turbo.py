"""Turbo loop coupling the linear estimator with the structured denoiser,
plus the scalar state-evolution predictor.

Each iteration runs the per-subcarrier LMMSE stage, converts its posterior
to an extrinsic message, feeds the denoiser, and converts the denoiser
posterior back.  Extrinsic variances are clamped to a cap instead of ever
going non-positive or infinite; the round-trip identity
extrinsic * prior = posterior is monitored inline on the unclamped
subcarriers.

The state-evolution recursion tracks a single variance scalar through the
same two maps: the linear stage in closed form, the denoiser through a
Monte-Carlo estimate of the scalar MMSE under the gain prior (common random
numbers across eta evaluations, so the recursion is deterministic and
smooth for a fixed seed).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .denoiser import PriorConfig, denoise
from .lmmse import lmmse_update
from .priors import VARIANT_BG, ScalarPrior, posterior_moments_mixture


class SeUndefinedError(RuntimeError):
    """State-evolution map undefined (non-positive effective variance)."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


@dataclass
class AlgoConfig:
    """One turbo algorithm: the denoiser prior plus loop controls."""

    name: str
    prior: PriorConfig
    init_variance: float
    max_iters: int = 15
    early_stop: bool = True
    nmse_tol: float = 1e-6
    reset_beliefs: bool = False
    ext_var_cap: float = 1e8
    check_roundtrip: bool = True


@dataclass
class TurboTrace:
    nmse: list = field(default_factory=list)
    v_a_ext: list = field(default_factory=list)
    v_b_ext: list = field(default_factory=list)
    roundtrip_err: list = field(default_factory=list)
    clamped_a: list = field(default_factory=list)
    clamped_b: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.nmse)


def nmse(estimate, truth):
    """||estimate - truth||^2 / ||truth||^2 (Frobenius)."""
    den = float(np.sum(np.abs(truth) ** 2))
    if den == 0.0:
        raise ValueError("NMSE undefined for an all-zero truth")
    return float(np.sum(np.abs(estimate - truth) ** 2)) / den


def to_db(x):
    return 10.0 * math.log10(max(float(x), 1e-300))


def _extrinsic_columns(h_post, v_post, h_pri, v_pri, cap):
    """Column-wise extrinsic division with a variance cap.

    Means are (N, P), variances (P,).  Returns (h_ext, v_ext, clamped_mask).
    """
    inv = 1.0 / v_post - 1.0 / v_pri
    clamped = ~(inv > 1.0 / cap)
    v_ext = np.where(clamped, cap, 1.0 / np.where(clamped, 1.0, inv))
    h_ext = v_ext[None, :] * (h_post / v_post[None, :] - h_pri / v_pri[None, :])
    return h_ext, v_ext, clamped


def _roundtrip_error(h_ext, v_ext, h_pri, v_pri, h_post, v_post, clamped):
    """Worst norm-relative mismatch of extrinsic * prior vs posterior over
    the unclamped subcarriers."""
    keep = ~clamped
    if not np.any(keep):
        return 0.0
    v_rec = 1.0 / (1.0 / v_ext + 1.0 / v_pri)
    h_rec = v_rec[None, :] * (h_ext / v_ext[None, :] + h_pri / v_pri[None, :])
    err_v = np.abs(v_rec - v_post) / v_post
    scale = np.maximum(np.abs(h_post[:, keep]).max(), 1e-300)
    err_m = np.abs(h_rec[:, keep] - h_post[:, keep]).max() / scale
    return float(max(err_v[keep].max(), err_m))


def run_turbo(measurements, pilots, cfg, truth=None):
    """Run the turbo iterations; returns (final_estimate, trace).

    `truth` enables the NMSE trace (and the early-stop criterion, which
    compares consecutive NMSE values when available, otherwise consecutive
    estimates).
    """
    Y = measurements.Y
    sigma2 = measurements.noise_variance
    M, P = Y.shape
    N = pilots[0].N
    h_pri_a = np.zeros((N, P), dtype=np.complex128)
    v_pri_a = np.full(P, float(cfg.init_variance))
    state = None
    trace = TurboTrace()
    h_final = np.zeros((N, P), dtype=np.complex128)
    prev_metric = None
    for it in range(1, cfg.max_iters + 1):
        # linear stage, one subcarrier at a time (FFT-based)
        h_post_a = np.empty((N, P), dtype=np.complex128)
        v_post_a = np.empty(P)
        for p in range(P):
            h_post_a[:, p], v_post_a[p] = lmmse_update(
                Y[:, p], pilots[p], h_pri_a[:, p], v_pri_a[p], sigma2
            )
        h_pri_b, v_pri_b, clamped_a = _extrinsic_columns(
            h_post_a, v_post_a, h_pri_a, v_pri_a, cfg.ext_var_cap
        )
        rt_a = (
            _roundtrip_error(h_pri_b, v_pri_b, h_pri_a, v_pri_a, h_post_a, v_post_a, clamped_a)
            if cfg.check_roundtrip
            else 0.0
        )

        # denoiser stage
        h_post_b, v_post_b, new_state = denoise(
            h_pri_b, v_pri_b, cfg.prior, None if cfg.reset_beliefs else state
        )
        state = new_state
        h_pri_a, v_pri_a, clamped_b = _extrinsic_columns(
            h_post_b, v_post_b, h_pri_b, v_pri_b, cfg.ext_var_cap
        )
        rt_b = (
            _roundtrip_error(h_pri_a, v_pri_a, h_pri_b, v_pri_b, h_post_b, v_post_b, clamped_b)
            if cfg.check_roundtrip
            else 0.0
        )
        if not (np.isfinite(h_pri_a).all() and np.isfinite(v_pri_a).all()):
            raise RuntimeError(f"non-finite turbo state at iteration {it}")

        h_final = h_post_b
        trace.v_a_ext.append(v_pri_b.copy())
        trace.v_b_ext.append(v_pri_a.copy())
        trace.roundtrip_err.append(max(rt_a, rt_b))
        trace.clamped_a.append(int(clamped_a.sum()))
        trace.clamped_b.append(int(clamped_b.sum()))
        if truth is not None:
            metric = nmse(h_post_b, truth)
        else:
            metric = float(np.mean(np.abs(h_post_b) ** 2))
        trace.nmse.append(metric if truth is not None else float("nan"))
        if cfg.early_stop and prev_metric is not None and abs(metric - prev_metric) < cfg.nmse_tol:
            break
        prev_metric = metric
    return h_final, trace


# --------------------------------------------------------------------------
# state evolution
# --------------------------------------------------------------------------

class MmseSampler:
    """Monte-Carlo scalar MMSE of the gain prior observed in AWGN.

    A frozen sample bank is reused across eta evaluations (common random
    numbers), and the error is Rao-Blackwellized: the estimator averages the
    exact posterior variance given each noisy draw rather than a squared
    error, which removes most of the Monte-Carlo noise.
    """

    def __init__(self, prior: ScalarPrior, num_samples=200_000, seed=1234):
        rng = np.random.default_rng(seed)
        gains, active, vlarge = prior.sample(rng, num_samples)
        self.prior = prior
        self.gains = gains
        self.vlarge = vlarge
        self.noise = (
            rng.standard_normal(num_samples) + 1j * rng.standard_normal(num_samples)
        ) / math.sqrt(2.0)

    def __call__(self, eta):
        if eta <= 0.0:
            raise ValueError("eta must be positive")
        tau = 1.0 / eta
        r = self.gains + self.noise * math.sqrt(tau)
        small = 0.0 if self.prior.variant == VARIANT_BG else self.prior.small_variance
        _, var, _ = posterior_moments_mixture(
            r, tau, self.prior.activation, self.vlarge, small
        )
        est = float(var.mean())
        stderr = float(var.std(ddof=1) / math.sqrt(var.size))
        return est, stderr


def mmse_oracle(eta, prior, num_samples=200_000, seed=1234):
    """One-shot scalar MMSE estimate; returns (value, standard_error)."""
    return MmseSampler(prior, num_samples, seed)(eta)


def linear_stage_eta(v, sigma2, N, M):
    """Effective precision after the linear stage's extrinsic division."""
    denom = (N / M) * (v + sigma2) - v
    if denom <= 0.0:
        raise SeUndefinedError(
            f"SE map undefined at the linear stage: (N/M)(v+sigma2)-v = {denom} <= 0"
        )
    return 1.0 / denom


def se_step(v, sigma2, N, M, mmse_fn):
    """One state-evolution step; returns (eta, mmse_value, v_next)."""
    eta = linear_stage_eta(v, sigma2, N, M)
    m, _ = mmse_fn(eta)
    inv_next = 1.0 / m - eta
    if inv_next <= 0.0:
        raise SeUndefinedError(
            f"SE map undefined at the denoiser stage: 1/mmse - eta = {inv_next} <= 0"
        )
    return eta, m, 1.0 / inv_next


@dataclass
class SeTrace:
    rows: list = field(default_factory=list)  # (iter, v, eta, predicted_nmse)
    converged: bool = False

    @property
    def fixed_point_nmse(self):
        return self.rows[-1][3]


def run_state_evolution(prior, snr_db, N, M, max_iters=100, tol=1e-8,
                        num_samples=200_000, seed=1234, v_init=None):
    """Iterate the two-map recursion to a fixed point.

    The noise variance is derived from the ensemble mean power of the prior
    (per-sample signal power equals the prior mean power for the
    row-orthonormal pilot family).  Rows carry the post-iteration variance.
    """
    power = prior.mean_power()
    sigma2 = 0.0 if np.isinf(snr_db) else power / 10.0 ** (snr_db / 10.0)
    sampler = MmseSampler(prior, num_samples, seed)
    v = power if v_init is None else float(v_init)
    trace = SeTrace()
    for it in range(1, max_iters + 1):
        try:
            eta, m, v_next = se_step(v, sigma2, N, M, sampler)
        except SeUndefinedError as err:
            raise SeUndefinedError(str(err), iteration=it) from None
        trace.rows.append((it, v_next, eta, m / power))
        if abs(v_next - v) / max(v, 1e-300) < tol:
            trace.converged = True
            v = v_next
            break
        v = v_next
    return trace
