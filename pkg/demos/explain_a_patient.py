#!/usr/bin/env python3
"""Explain one prediction with a local linear surrogate and rank the drivers."""

import tempfile
from pathlib import Path

import numpy as np

from twinscope import (
    FEATURE_NAMES,
    ForestConfig,
    PatientFeatures,
    SplitSpec,
    SurrogateConfig,
    aggregate_explanations,
    explain_instance,
    fetch_ilpd,
    impute,
    load_dataset,
    split,
    train_forest,
)

csv_path = Path(tempfile.mkdtemp(prefix="twinscope-demo-")) / "ilpd.csv"
fetch_ilpd(csv_path, source="bundled")
ds = load_dataset(csv_path)
train, test = split(ds, SplitSpec(seed=7))
train, test = impute(train), impute(test)
model = train_forest(train, ForestConfig(n_trees=60, max_depth=8, seed=7))

case = PatientFeatures.from_dict(
    {
        "age": 58.0, "gender": 1.0, "total_bilirubin": 2.7, "direct_bilirubin": 1.3,
        "alp": 260.0, "alt": 152.0, "ast": 118.0, "total_proteins": 6.2,
        "albumin": 2.9, "ag_ratio": 0.8,
    }
)

ex = explain_instance(model, case, train.stats, SurrogateConfig(n_samples=5000, seed=11))
print(f"risk probability {ex.prediction:.4f} (local fidelity {ex.local_fidelity:.3f})")
print("\nfeature contributions, strongest first:")
order = np.argsort(-np.abs(ex.contributions))
for j in order:
    print(f"  {FEATURE_NAMES[j]:<18} {ex.contributions[j]:+.4f}")

# averaged |contribution| over a handful of test patients shows the global picture
sample = [test.records[i].features for i in range(12)]
ranked = aggregate_explanations(
    [explain_instance(model, p, train.stats, SurrogateConfig(n_samples=2000, seed=k))
     for k, p in enumerate(sample)]
)
print("\nmean |contribution| across 12 test patients:")
for name, mag in ranked[:5]:
    print(f"  {name:<18} {mag:.4f}")
