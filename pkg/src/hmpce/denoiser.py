"""Structured sparsity denoiser with hyperparameter learning.

Given per-subcarrier Gaussian pseudo-priors (h_pri, v_pri), this module runs
one full pass of the support-chain / precision-learning message schedule:

  1. per-(element, subcarrier) support likelihoods from the current
     Gamma beliefs over the active and near-zero precisions,
  2. a forward sweep along the support chain,
  3. a backward sweep,
  4. first/pair support beliefs and Beta belief updates for the chain
     transition probabilities (steps 2-4 execute a second time with the
     refreshed beliefs),
  5. leave-one-subcarrier-out extrinsic support messages, Gamma belief
     updates, and the posterior mixture moments.

Three prior variants share the schedule: per-element active-precision
learning ("tsgm-lvd"), subcarrier-pooled active-precision learning
("tsgm"), and a fixed-variance Bernoulli-Gaussian ("bg") whose near-zero
component is an exact spike at zero.

All probabilities are clamped to [floor, 1 - floor] and combined in the
log-odds domain.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .messages import cgauss_logpdf, digamma_fn
from .priors import VARIANT_BG, VARIANT_LVD, VARIANT_TSGM, VARIANTS


@dataclass
class PriorConfig:
    """Prior hyperparameters and algorithm switches for one denoiser."""

    variant: str = VARIANT_LVD
    large_shape: float = 1.0    # Gamma prior (shape, rate) on active precisions
    large_rate: float = 1.0
    small_shape: float = 1.0    # Gamma prior on the shared near-zero precision
    small_rate: float = 0.01
    p10_a: float = 1.0          # Beta priors on the chain transition probabilities
    p10_b: float = 1.0
    p01_a: float = 1.0
    p01_b: float = 1.0
    bg_variance: float = 1.0    # fixed active variance for the bg variant
    exact_digamma: bool = False
    std_gamma_weight: bool = False
    init_backward_filtered: bool = False
    prob_floor: float = 1e-12

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")


@dataclass
class DenoiserState:
    """Mutable belief state carried across turbo iterations (warm start)."""

    support_like: np.ndarray = None   # (N, P) per-subcarrier activity likelihood
    support_ext: np.ndarray = None    # (N, P) leave-one-out chain message
    support_post: np.ndarray = None   # (N, P) posterior activity weight
    fwd_pred: np.ndarray = None       # (N,) chain message into each element, forward
    fwd_filt: np.ndarray = None       # (N,) forward message combined with evidence
    bwd_pred: np.ndarray = None       # (N,) backward chain message
    bwd_filt: np.ndarray = None       # (N,) backward message combined with evidence
    large_shape: np.ndarray = None    # (N, P) Gamma belief on active precisions
    large_rate: np.ndarray = None
    small_shape: np.ndarray = None    # (P,) Gamma belief on near-zero precision
    small_rate: np.ndarray = None
    p10_a: float = 1.0
    p10_b: float = 1.0
    p01_a: float = 1.0
    p01_b: float = 1.0
    first_active_belief: float = 0.5
    pair_belief: np.ndarray = None    # (N-1, 4) columns (00, 01, 10, 11)


def init_state(N, P, cfg):
    state = DenoiserState()
    state.large_shape = np.full((N, P), cfg.large_shape)
    state.large_rate = np.full((N, P), cfg.large_rate)
    state.small_shape = np.full(P, cfg.small_shape)
    state.small_rate = np.full(P, cfg.small_rate)
    state.p10_a, state.p10_b = cfg.p10_a, cfg.p10_b
    state.p01_a, state.p01_b = cfg.p01_a, cfg.p01_b
    return state


def _clamp(p, floor):
    return np.clip(p, floor, 1.0 - floor)


def _logit(p):
    return np.log(p) - np.log1p(-p)


def transition_log_expectations(state, cfg):
    """Expected log transition weights under the current Beta beliefs.

    Returns (stay_active, turn_on, stay_quiet, turn_off) in the log domain:
    E[ln(1-p01)], E[ln p10], E[ln(1-p10)], E[ln p01].
    """
    psi = digamma_fn(cfg.exact_digamma)
    t10 = psi(state.p10_a + state.p10_b)
    t01 = psi(state.p01_a + state.p01_b)
    log_turn_on = psi(state.p10_a) - t10
    log_stay_quiet = psi(state.p10_b) - t10
    log_turn_off = psi(state.p01_a) - t01
    log_stay_active = psi(state.p01_b) - t01
    return log_stay_active, log_turn_on, log_stay_quiet, log_turn_off


def support_likelihood(h_pri, v_pri, state, cfg):
    """Per-(element, subcarrier) likelihood that the element is active.

    Weighs the active component CN(0, v_pri + rate/shape) against the
    near-zero component using the expected-log Gamma weights; the bg variant
    compares a fixed-variance active component against the spike at zero.
    """
    state.support_like = _activity_likelihood(
        h_pri, v_pri, state.large_shape, state.large_rate,
        state.small_shape, state.small_rate, cfg,
    )


def _activity_likelihood(h_pri, v_pri, large_shape, large_rate, small_shape, small_rate, cfg):
    v_pri = np.asarray(v_pri)[None, :]
    if cfg.variant == VARIANT_BG:
        log_odds = cgauss_logpdf(h_pri, 0.0, v_pri + cfg.bg_variance) - cgauss_logpdf(
            h_pri, 0.0, v_pri
        )
    else:
        psi = digamma_fn(cfg.exact_digamma)
        den_large = large_rate if cfg.std_gamma_weight else large_shape
        den_small = small_rate if cfg.std_gamma_weight else small_shape
        log_active = (
            psi(large_shape)
            - np.log(den_large)
            + cgauss_logpdf(h_pri, 0.0, v_pri + large_rate / large_shape)
        )
        log_quiet = (
            psi(small_shape)
            - np.log(den_small)
            + cgauss_logpdf(h_pri, 0.0, v_pri + small_rate / small_shape)
        )
        log_odds = log_active - log_quiet
    return _clamp(expit(log_odds), cfg.prob_floor)


def _chain_llr(state):
    """Per-element log-odds of activity pooled over subcarriers."""
    return _logit(state.support_like).sum(axis=1)


def forward_pass(state, cfg):
    """Forward sweep of the support chain (predict, then fold in evidence)."""
    stay_active, turn_on, stay_quiet, turn_off = (
        math.exp(v) for v in transition_log_expectations(state, cfg)
    )
    llr = _chain_llr(state)
    N = llr.shape[0]
    fwd_pred = np.empty(N)
    fwd_filt = np.empty(N)
    floor = cfg.prob_floor
    fwd_pred[0] = turn_on / (turn_on + stay_quiet)
    for n in range(N):
        if n > 0:
            a = fwd_filt[n - 1]
            num = a * stay_active + (1.0 - a) * turn_on
            den = num + a * turn_off + (1.0 - a) * stay_quiet
            fwd_pred[n] = min(max(num / den, floor), 1.0 - floor)
        fwd_filt[n] = min(max(expit(_logit(fwd_pred[n]) + llr[n]), floor), 1.0 - floor)
    state.fwd_pred, state.fwd_filt = fwd_pred, fwd_filt


def backward_pass(state, cfg):
    """Backward sweep; the terminal message is uninformative (1/2)."""
    stay_active, turn_on, stay_quiet, turn_off = (
        math.exp(v) for v in transition_log_expectations(state, cfg)
    )
    llr = _chain_llr(state)
    N = llr.shape[0]
    bwd_pred = np.empty(N)
    bwd_filt = np.empty(N)
    floor = cfg.prob_floor
    bwd_pred[N - 1] = 0.5
    if cfg.init_backward_filtered:
        bwd_filt[N - 1] = 0.5
    else:
        bwd_filt[N - 1] = min(max(expit(llr[N - 1]), floor), 1.0 - floor)
    for n in range(N - 2, -1, -1):
        b = bwd_filt[n + 1]
        num = b * stay_active + (1.0 - b) * turn_off
        den = num + b * turn_on + (1.0 - b) * stay_quiet
        bwd_pred[n] = min(max(num / den, floor), 1.0 - floor)
        bwd_filt[n] = min(max(expit(_logit(bwd_pred[n]) + llr[n]), floor), 1.0 - floor)
    state.bwd_pred, state.bwd_filt = bwd_pred, bwd_filt


def update_transition_beliefs(state, cfg):
    """First/pair support beliefs and the Beta pseudo-count refresh."""
    log_stay_active, log_turn_on, log_stay_quiet, log_turn_off = (
        transition_log_expectations(state, cfg)
    )
    llr = _chain_llr(state)
    floor = cfg.prob_floor
    state.first_active_belief = float(
        _clamp(expit(_logit(state.fwd_pred[0]) + _logit(state.bwd_pred[0]) + llr[0]), floor)
    )
    up = state.bwd_filt[1:]
    dn = state.fwd_filt[:-1]
    with np.errstate(divide="ignore"):
        logw = np.stack(
            [
                np.log((1.0 - up) * (1.0 - dn)) + log_stay_quiet,   # (0, 0)
                np.log((1.0 - up) * dn) + log_turn_off,             # prev 1 -> 0
                np.log(up * (1.0 - dn)) + log_turn_on,              # prev 0 -> 1
                np.log(up * dn) + log_stay_active,                  # (1, 1)
            ],
            axis=1,
        )
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    state.pair_belief = w / w.sum(axis=1, keepdims=True)
    b1 = state.first_active_belief
    state.p10_a = b1 + cfg.p10_a + float(state.pair_belief[:, 2].sum())
    state.p10_b = (1.0 - b1) + cfg.p10_b + float(state.pair_belief[:, 0].sum())
    state.p01_a = cfg.p01_a + float(state.pair_belief[:, 1].sum())
    state.p01_b = cfg.p01_b + float(state.pair_belief[:, 3].sum())


def support_extrinsic(state, cfg):
    """Chain-side activity message for each subcarrier, excluding its own
    likelihood (leave-one-out in the log-odds domain)."""
    llr = _chain_llr(state)
    loo = llr[:, None] - _logit(state.support_like)
    chain = _logit(state.fwd_pred) + _logit(state.bwd_pred)
    state.support_ext = _clamp(expit(chain[:, None] + loo), cfg.prob_floor)


def _mixture_moments(h_pri, v_pri, large_shape, large_rate, small_shape, small_rate, cfg):
    """Per-component posterior moments against the Gaussian pseudo-prior."""
    v_pri = np.asarray(v_pri)[None, :]
    var_large = 1.0 / (1.0 / v_pri + large_shape / large_rate)
    mean_large = var_large * h_pri / v_pri
    if cfg.variant == VARIANT_BG:
        var_small = np.zeros_like(v_pri)
        mean_small = np.zeros_like(h_pri)
    else:
        var_small = 1.0 / (1.0 / v_pri + small_shape / small_rate)
        mean_small = var_small * h_pri / v_pri
    return mean_large, var_large, mean_small, var_small


def update_precision_beliefs(h_pri, v_pri, state, cfg):
    """Gamma belief refresh from the current support posterior.

    Uses the beliefs that entered this pass for the component moments, then
    rewrites the Gamma parameters anchored at their priors.  The bg variant
    has no precision beliefs to learn.
    """
    state.support_post = _clamp(
        expit(_logit(state.support_like) + _logit(state.support_ext)), cfg.prob_floor
    )
    if cfg.variant == VARIANT_BG:
        return
    mean_large, var_large, mean_small, var_small = _mixture_moments(
        h_pri, v_pri, state.large_shape, state.large_rate,
        state.small_shape, state.small_rate, cfg,
    )
    w = state.support_post
    large_stat = w * (np.abs(mean_large) ** 2 + var_large)
    if cfg.variant == VARIANT_TSGM:
        state.large_shape = np.broadcast_to(
            cfg.large_shape + w.sum(axis=0, keepdims=True), w.shape
        ).copy()
        state.large_rate = np.broadcast_to(
            cfg.large_rate + large_stat.sum(axis=0, keepdims=True), w.shape
        ).copy()
    else:
        state.large_shape = cfg.large_shape + w
        state.large_rate = cfg.large_rate + large_stat
    quiet = 1.0 - w
    state.small_shape = cfg.small_shape + quiet.sum(axis=0)
    state.small_rate = cfg.small_rate + (
        quiet * (np.abs(mean_small) ** 2 + var_small)
    ).sum(axis=0)


def posterior_moments(h_pri, v_pri, state, cfg):
    """Posterior mean and per-subcarrier average variance of the gains.

    Recomputes the activity weight and component moments with the updated
    beliefs, then collapses the two-component mixture.
    """
    if cfg.variant == VARIANT_BG:
        weight = state.support_post
    else:
        like = _activity_likelihood(
            h_pri, v_pri, state.large_shape, state.large_rate,
            state.small_shape, state.small_rate, cfg,
        )
        weight = _clamp(expit(_logit(like) + _logit(state.support_ext)), cfg.prob_floor)
    state.support_post = weight
    mean_large, var_large, mean_small, var_small = _mixture_moments(
        h_pri, v_pri, state.large_shape, state.large_rate,
        state.small_shape, state.small_rate, cfg,
    )
    h_post = weight * mean_large + (1.0 - weight) * mean_small
    second = weight * (np.abs(mean_large) ** 2 + var_large) + (1.0 - weight) * (
        np.abs(mean_small) ** 2 + var_small
    )
    v_post = np.maximum((second - np.abs(h_post) ** 2).mean(axis=0), 1e-30)
    return h_post, v_post


def denoise(h_pri, v_pri, cfg, state=None):
    """One full denoiser pass; returns (h_post, v_post, state).

    Passing the returned state back in warm-starts the Gamma/Beta beliefs
    on the next turbo iteration; passing state=None resets them.
    """
    h_pri = np.asarray(h_pri, dtype=np.complex128)
    v_pri = np.asarray(v_pri, dtype=float)
    N, P = h_pri.shape
    if state is None:
        state = init_state(N, P, cfg)
    support_likelihood(h_pri, v_pri, state, cfg)
    for _ in range(2):
        forward_pass(state, cfg)
        backward_pass(state, cfg)
        update_transition_beliefs(state, cfg)
    support_extrinsic(state, cfg)
    update_precision_beliefs(h_pri, v_pri, state, cfg)
    h_post, v_post = posterior_moments(h_pri, v_pri, state, cfg)
    return h_post, v_post, state
