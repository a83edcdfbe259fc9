"""
Turbo channel estimation, iteration by iteration
================================================

One clustered channel at N=256, M=103 pilots, P=32 subcarriers, 30 dB
SNR, estimated with all three prior variants.  The table shows why the
per-element-variance prior is the interesting one: with a single slab
variance (bg) the denoiser becomes overconfident at high SNR and the
iteration oscillates instead of converging, while the learned
per-element variances keep improving until the fixed point.
"""

import numpy as np

from hmpce.channels import (
    make_pilot_set,
    sample_channel,
    sample_support,
    synthesize_measurements,
)
from hmpce.denoiser import PriorConfig
from hmpce.priors import VARIANT_BG, VARIANT_LVD, VARIANT_TSGM, ScalarPrior
from hmpce.turbo import AlgoConfig, run_turbo, to_db

N, M, P = 256, 103, 32
SNR_DB = 30.0
ITERS = 12

root = np.random.SeedSequence(2024)
s_support, s_gain, s_pilot, s_noise = root.spawn(4)
support = sample_support(N, 0.05, 0.20, rng_seed=s_support)
channel = sample_channel(support, P, vL_spread=(0.1, 10.0), vS=100.0,
                         rng_seed=s_gain)
pilots = make_pilot_set(N, M, P, rng_seed=s_pilot)
meas = synthesize_measurements(channel, pilots, SNR_DB, rng_seed=s_noise)

print(f"N={N}, M={M}, P={P}, SNR={SNR_DB:.0f} dB, "
      f"{int(support.sum())} active elements\n")

traces = {}
for variant in (VARIANT_LVD, VARIANT_TSGM, VARIANT_BG):
    cfg = AlgoConfig(
        name=variant,
        prior=PriorConfig(variant=variant),
        init_variance=ScalarPrior(variant=variant).mean_power(),
        max_iters=ITERS,
        early_stop=False,
    )
    _, traces[variant] = run_turbo(meas, pilots, cfg, truth=channel.gains)

print("NMSE in dB per turbo iteration:")
print(f"{'iter':>4}  {'tsgm-lvd':>9}  {'tsgm':>9}  {'bg':>9}")
for it in range(ITERS):
    row = [to_db(traces[v].nmse[it]) for v in (VARIANT_LVD, VARIANT_TSGM, VARIANT_BG)]
    print(f"{it + 1:>4}  {row[0]:>9.2f}  {row[1]:>9.2f}  {row[2]:>9.2f}")

worst_rt = max(max(tr.roundtrip_err) for tr in traces.values())
print(f"\nextrinsic round-trip identity, worst over all runs: {worst_rt:.1e}")
print("note the bg column: a single slab variance is a poor model once the "
      "noise is low,\nand the loop bounces between over- and under-shooting "
      "instead of settling")
