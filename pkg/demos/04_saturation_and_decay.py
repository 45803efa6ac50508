"""
Saturation curves and excited-state lifetimes
=============================================

Two workhorse characterization fits: count rate versus excitation
power, and the fluorescence decay after pulsed excitation.
"""

import numpy as np

from emitterforge.analysis import fit_decay, fit_saturation, saturation_model
from emitterforge.photonsim import (
    BackgroundModel,
    EmitterModel,
    simulate_pulsed_decay,
    steady_state_rate,
)

# --- saturation ---------------------------------------------------------
# Emission rate follows R = R_sat / (1 + P0/P); on top of it a linear
# background from scattered pump light keeps growing past saturation.
emitter = EmitterModel(lifetime=50e-9, sat_power=110e-6, sat_rate=13e3)

power = np.linspace(5e-6, 900e-6, 18)
truth = saturation_model(power, emitter.sat_rate, emitter.sat_power, 4e6)

rng = np.random.default_rng(40)
dwell = 1.0
measured = rng.poisson(truth * dwell) / dwell

fit = fit_saturation(power, measured, dwell_time=dwell)
sig = fit.param_sigma()
print("saturation fit:")
print(f"  R_sat = {fit.sat_rate:8.0f} +/- {sig[0]:5.0f} cps  (true {emitter.sat_rate:.0f})")
print(f"  P0    = {fit.sat_power * 1e6:8.1f} +/- {sig[1] * 1e6:5.1f} uW   (true {emitter.sat_power * 1e6:.0f})")
print(f"  slope = {fit.bg_slope / 1e6:8.2f} +/- {sig[2] / 1e6:5.2f} cps/uW (true 4.00)")
print(f"  reduced chi2 = {fit.reduced_chi2:.2f}")

half = steady_state_rate(emitter, emitter.sat_power)
print(f"\nat P = P0 the emitter runs at {half:.0f} cps = R_sat/2")

# --- lifetime -----------------------------------------------------------
# Pulsed excitation.  The fast component is the emitter; background
# fluorescence decays several times slower and the fit separates them.
fast = EmitterModel(lifetime=12e-9, sat_power=150e-6, sat_rate=2e6)
slow_bg = BackgroundModel(rate=100.0, decay_time=80e-9)

hist = simulate_pulsed_decay(fast, slow_bg, bg_fraction=0.4,
                             pulse_period=2e-6, pulse_width=2e-9,
                             n_pulses=1_000_000, seed=41)
print(f"\ndecay histogram: {hist.counts.sum()} photons over "
      f"{hist.n_pulses} pulses")

decay = fit_decay(hist)
print(f"  tau_fast = {decay.tau_fast * 1e9:5.1f} ns (true 12), "
      f"amplitude {decay.amp_fast:.0f}")
print(f"  tau_slow = {decay.tau_slow * 1e9:5.1f} ns (true 80), "
      f"amplitude {decay.amp_slow:.0f}")
print(f"  reduced chi2 = {decay.reduced_chi2:.2f}")
