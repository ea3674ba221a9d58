"""Walk through variety curation on synthetic embeddings.

Three tight clusters plus a handful of outliers: the row-variance score
should surface the outliers and the cluster fringes, which is exactly
what makes the selection "variety-seeking" without knowing how many
clusters exist.
"""

import numpy as np

from instrefine.variety import (
    covariance,
    project,
    row_variances,
    select_top_fraction,
    top_k_eigen,
)

rng = np.random.default_rng(42)

# 60 points in 8 dimensions: three clusters of 18 plus 6 scattered outliers.
centers = rng.normal(scale=4.0, size=(3, 8))
cluster_points = np.concatenate(
    [center + rng.normal(scale=0.3, size=(18, 8)) for center in centers]
)
outliers = rng.normal(scale=6.0, size=(6, 8))
X = np.concatenate([cluster_points, outliers])
ids = [f"cluster_{i:02d}" for i in range(54)] + [f"outlier_{i}" for i in range(6)]

print(f"embeddings: {X.shape[0]} rows x {X.shape[1]} dims")

C = covariance(X)
print(f"covariance: {C.shape}, symmetric to {np.abs(C - C.T).max():.1e}")

pair = top_k_eigen(C, k=4)
print("top-4 eigenvalues:", np.round(pair.eigenvalues, 3))

R = project(X, pair)
print("reduced coordinates:", R.shape)
print(
    "column variances match eigenvalues:",
    np.allclose(R.var(axis=0, ddof=1), pair.eigenvalues, rtol=1e-8),
)

scores = row_variances(R)
selected = select_top_fraction(scores.tolist(), ids, fraction=0.2)
print(f"\nselected {len(selected)} of {len(ids)} items (top 20% by row variance):")
for rank, rid in enumerate(selected, start=1):
    print(f"  {rank:2d}. {rid}")

outlier_hits = sum(1 for rid in selected if rid.startswith("outlier"))
print(f"\noutliers captured: {outlier_hits} of 6")
