"""Regenerates hdbscan_reference.json with scikit-learn's HDBSCAN."""
import json

import numpy as np
from sklearn.cluster import HDBSCAN

rng = np.random.default_rng(7)
centers = np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])
blobs = [c + rng.normal(scale=0.8, size=(40, 2)) for c in centers]
noise = rng.uniform(-4.0, 10.0, size=(12, 2))
X = np.round(np.vstack(blobs + [noise]), 6)

cases = []
for mcs, ms in [(5, None), (10, None), (8, 3)]:
    model = HDBSCAN(min_cluster_size=mcs, min_samples=ms, metric="euclidean",
                    cluster_selection_method="eom", copy=True).fit(X)
    cases.append({
        "min_cluster_size": mcs,
        "min_samples": ms or 0,
        "labels": model.labels_.tolist(),
        "probabilities": model.probabilities_.tolist(),
    })

with open("hdbscan_reference.json", "w") as f:
    json.dump({"points": X.tolist(), "cases": cases}, f)
