"""
Antibunching in a Hanbury Brown-Twiss measurement
=================================================

Simulate a single emitter on a beamsplitter, correlate the two
detector streams, and fit the dip.  Then drown the emitter in
uncorrelated background and recover the dip by correction.
"""

import numpy as np

from emitterforge.correlator import (
    background_correct,
    correlate,
    fit_g2,
    max_emitters_from_g2,
    rho_from_rates,
)
from emitterforge.photonsim import (
    DetectorModel,
    EmitterModel,
    run_detection,
    simulate_background_tags,
    simulate_emitter_tags,
)
from emitterforge.timetags import merge_streams

# A shelving emitter: 50 ns radiative lifetime plus a metastable state
# that produces bunching shoulders around the dip.
emitter = EmitterModel(lifetime=50e-9, sat_power=150e-6, sat_rate=2e6,
                       shelving_rate=2e6, deshelving_rate=1e6)
detector = DetectorModel(efficiency=0.8, jitter_sigma=50e-12)

stream = simulate_emitter_tags(emitter, 45e-6, 120.0, seed=30)
print(f"emitted-and-collected rate: {stream.n_tags / 120.0:.0f} cps")

arm_a, arm_b = run_detection(stream, 0.5, detector, detector, seed=31)
print(f"detected: A {arm_a.n_tags / 120.0:.0f} cps, "
      f"B {arm_b.n_tags / 120.0:.0f} cps")

hist = correlate(arm_a, arm_b, bin_width=4e-9, window=3e-6)
fit = fit_g2(hist)
print(f"\ng2(0) = {fit.g2_zero:.3f} +/- {fit.g2_zero_sigma:.3f}, "
      f"reduced chi2 = {fit.reduced_chi2:.2f}")
print(f"dip time {fit.tau1 * 1e9:.0f} ns, shelving time {fit.tau2 * 1e9:.0f} ns,"
      f" bunching amplitude {fit.a:.2f}")
print(f"at most {max_emitters_from_g2(fit.g2_zero)} emitter(s) in the spot")

# Now bury the same emitter under Poisson background light at half the
# signal rate.  The dip fills in to 1 - rho^2.
signal = simulate_emitter_tags(emitter, 45e-6, 120.0, seed=32)
bg = simulate_background_tags(signal.n_tags / 120.0 / 2.0, 120.0, seed=33)
rho = rho_from_rates((signal.n_tags + bg.n_tags) / 120.0, bg.n_tags / 120.0)
a2, b2 = run_detection(merge_streams(signal, bg), 0.5, detector, detector, seed=34)

noisy_hist = correlate(a2, b2, bin_width=4e-9, window=3e-6)
raw = fit_g2(noisy_hist)
corrected = fit_g2(background_correct(noisy_hist, rho))
print(f"\nwith background (rho = {rho:.3f}):")
print(f"  raw       g2(0) = {raw.g2_zero:.3f}  (1 - rho^2 = {1 - rho**2:.3f})")
print(f"  corrected g2(0) = {corrected.g2_zero:.3f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    print("\nmatplotlib not available, skipping the figure")
else:
    from emitterforge.correlator import g2_model

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(hist.tau * 1e9, hist.g2, ".", ms=3, color="0.6", label="histogram")
    tau = np.linspace(hist.tau[0], hist.tau[-1], 2000)
    ax.plot(tau * 1e9, g2_model(tau, fit.n_emitters, fit.a, fit.tau1, fit.tau2),
            "C3", label="fit")
    ax.axhline(0.5, color="k", lw=0.8, ls="--")
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("g2")
    ax.legend()
    fig.tight_layout()
    fig.savefig("antibunching.png", dpi=120)
    print("\nwrote antibunching.png")
