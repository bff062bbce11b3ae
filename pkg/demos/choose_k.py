"""Three ways to pick the number of mixture components.

On a corpus planted with k=3 we compare: (a) the WCSS elbow of K-means
on proportional-count features, (b) majority voting across four cluster
validity indices, and (c) BIC/AIC over fitted mixtures.  The
information criteria see the actual sequence model, so they are the
most trustworthy; the feature-space methods are cheap first looks.
"""

import numpy as np

from seqmix import (
    dataset_features,
    generate_synthetic,
    planted_spec,
    select_k_by_ic,
    suggest_k,
    wcss_curve,
)

data, _ = generate_synthetic(planted_spec(m=6, k=3, n_traces=500, seed=7))
features = dataset_features(data)
print(f"{data.n_traces} traces -> feature matrix {features.shape}")

# --- (a) WCSS elbow -----------------------------------------------------------

print("\nWCSS by k (look for the elbow):")
for k, w in wcss_curve(features, range(1, 7), seed=0):
    print(f"  k={k}: {w:10.3f}")

# --- (b) validity-index voting -------------------------------------------------

k_best, votes = suggest_k(features, range(2, 7), seed=0)
print(f"\nindex votes: {votes}")
print(f"majority suggestion: k={k_best}")

# --- (c) information criteria on the fitted mixtures ----------------------------

result = select_k_by_ic(data, range(1, 6), strategy="k_em", seed=0)
print("\n   k        BIC        AIC   log-likelihood  iters")
for k, bic, aic, ll, iters in result.table:
    print(f"  {k:2d} {bic:10.1f} {aic:10.1f} {ll:14.1f} {iters:6d}")
lo, hi = result.k_range_suggestion
if lo == hi:
    print(f"\nBIC and AIC agree on k={lo}")
else:
    print(f"\nBIC prefers k={result.k_bic}, AIC prefers k={result.k_aic}; "
          f"anything in [{lo},{hi}] is defensible")

# sanity: the corpus was planted with k=3
assert result.k_bic == 3, "BIC should recover the planted component count here"
print("BIC recovered the planted k=3")
