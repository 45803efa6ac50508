"""
Why defect counts are narrower than Poisson
===========================================

A composite defect consumes several successful implantation events,
so the center count per spot is floor(m / k) of a Poisson variable m.
That division squeezes the distribution below Poisson width.
"""

import numpy as np

from emitterforge.defectstats import (
    CreationModel,
    composite_defect_pmf,
    composite_moments,
    composite_pmf_array,
    fit_mu,
    occurrence_histogram,
    poisson_pmf,
    sample_defect_count,
    wilson_interval,
)
from emitterforge.implantation import sample_ion_counts

MU = 4.0   # mean number of successful events per spot
K = 3      # successes consumed per center

# Head-to-head: the composite distribution against a Poisson of the
# same mean center number.
mean, fano = composite_moments(MU, K)
print(f"composite mu={MU}, k={K}: mean {mean:.3f}, Fano factor {fano:.3f}")
print(f"{'N':>2} {'composite':>10} {'poisson':>10}")
for n in range(5):
    print(f"{n:2d} {composite_defect_pmf(MU, K, n):10.4f} "
          f"{poisson_pmf(mean, n):10.4f}")

# The single-center probability peaks where the budget just covers one
# center; the plain Poisson never beats 1/e ~ 36.8%.
best = composite_defect_pmf(MU, K, 1)
print(f"\nP(exactly one center) = {best:.3f} versus "
      f"Poisson ceiling {poisson_pmf(1.0, 1):.3f}")

# Monte Carlo cross-check through the full delivery model: Poisson ion
# doses, then a binomial success filter, then the k-fold division.
model = CreationModel(p_success=0.16, atoms_per_center=K)
doses = sample_ion_counts(np.full(200_000, MU / model.p_success), seed=10)
counts = sample_defect_count(doses, model, seed=11)
hist = occurrence_histogram(counts)
print("\nsampled occurrence fractions with 68% Wilson intervals:")
for n in range(4):
    hits = int((counts == n).sum())
    lo, hi = wilson_interval(hits, counts.size)
    print(f"  N={n}: {hits / counts.size:.4f}  [{lo:.4f}, {hi:.4f}]"
          f"  exact {composite_defect_pmf(MU, K, n):.4f}")

# And back again: the success mean is recoverable from an observed
# histogram by maximum likelihood.
fit = fit_mu(hist, K)
print(f"\nfitted mu = {fit.mu:.3f} (true {MU}), "
      f"log likelihood {fit.log_likelihood:.1f}")

# Tail check: the array form is normalized.
pmf = composite_pmf_array(MU, K, 12)
print(f"pmf mass up to N=12: {pmf.sum():.9f}")
