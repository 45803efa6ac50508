"""
Planning ion doses for an implantation run
==========================================

How many ions a focused-beam spot receives, and what the
equivalent numbers are for broad-beam exposure through mask
holes.
"""

import numpy as np

from emitterforge.implantation import (
    BeamConfig,
    ImplantSite,
    StraggleParams,
    build_pattern,
    dwell_time_for_ions,
    expected_ions_through_hole,
    ions_per_spot,
    sample_ion_counts,
    sample_ion_positions,
)

# A focused beam is characterized by its current and spot size.  At
# 0.4 pA even a microsecond of dwell delivers only a couple of ions.
beam = BeamConfig(current=0.4e-12, fwhm=30e-9)

for dwell in (1e-6, 5e-6, 10e-6):
    n = ions_per_spot(beam, dwell)
    print(f"dwell {dwell * 1e6:4.0f} us -> {n:6.2f} ions expected")

# Going the other way: how long to sit on a spot for a target dose.
target = 25.0
dwell = dwell_time_for_ions(beam, target)
print(f"\n{target:.0f} ions need a {dwell * 1e6:.2f} us dwell")

# Broad-beam exposure through a patterned mask instead: the expected
# dose per hole is fluence times hole area.
for diameter in (50e-9, 100e-9, 200e-9):
    n = expected_ions_through_hole(1e12, diameter)
    print(f"hole {diameter * 1e9:3.0f} nm at 1e12 ions/cm2 -> {n:6.2f} ions")

# Delivery is shot noise limited, so actual doses are Poisson draws
# around the expectation.
doses = sample_ion_counts(np.full(10_000, target), seed=1)
print(f"\nsampled doses: mean {doses.mean():.2f}, variance {doses.var():.2f}"
      f" (Poisson: equal)")

# Where the ions stop.  Mean depth and straggle widths come from
# stopping tables for the chosen species and energy; the lateral spread
# folds the beam profile together with lateral straggle.
straggle = StraggleParams(mean_depth=60e-9, sigma_depth=20e-9,
                          sigma_lateral=15e-9)
site = ImplantSite(label="A1", x=0.0, y=0.0, expected_ions=target)
pos = sample_ion_positions(site, 2500, beam.fwhm, straggle, seed=2)
print(f"\n{pos.shape[0]} ions: depth {pos[:, 2].mean() * 1e9:.1f}"
      f" +/- {pos[:, 2].std() * 1e9:.1f} nm,"
      f" lateral sigma {pos[:, 0].std() * 1e9:.1f} nm")

# A full write pattern: 15 dose rows by 16 repeat columns stepping the
# dose ladder down the rows.
pattern = build_pattern(kind="fib_grid", pitch=10e-6)
print(f"\nfib grid: {len(pattern.sites)} sites,"
      f" doses {pattern.expected_ions().min():.0f}"
      f" to {pattern.expected_ions().max():.0f} ions")
