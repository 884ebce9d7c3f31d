#!/usr/bin/env python3
"""Train the liver-risk forest on the ILPD table and look at the numbers."""

import tempfile
from pathlib import Path

from twinscope import (
    ForestConfig,
    SplitSpec,
    evaluate_model,
    fetch_ilpd,
    impute,
    learning_curve,
    load_dataset,
    save_model,
    split,
    train_forest,
)

work = Path(tempfile.mkdtemp(prefix="twinscope-demo-"))
csv_path = work / "ilpd.csv"

source = fetch_ilpd(csv_path, source="auto", timeout=5)
ds = load_dataset(csv_path)
print(f"dataset: {len(ds)} records from source {source!r}")
print(f"missing A/G ratio in {ds.missing_ag_count()} records (median-imputed before training)")

train, test = split(ds, SplitSpec(train_fraction=0.8, seed=42, stratified=True))
train, test = impute(train), impute(test)
print(f"split: {len(train)} train / {len(test)} test")

cfg = ForestConfig(n_trees=100, max_depth=8, min_samples_leaf=5, features_per_split=3, seed=42)
model = train_forest(train, cfg)
report = evaluate_model(model, test)
print(f"validation accuracy {report.accuracy:.4f}, auc {report.auc:.4f}")
print(f"confusion ((tn, fp), (fn, tp)): {report.confusion}")

model_hash = save_model(model, work / "model.json", background=train)
print(f"saved {work / 'model.json'} (hash {model_hash})")

print("\nlearning curve (same split, growing training prefix):")
for p in learning_curve(ds, ForestConfig(n_trees=40, max_depth=8, seed=42), [0.25, 0.5, 0.75, 1.0]):
    print(f"  n={p.train_size:3d}  train {p.train_accuracy:.3f}  validation {p.validation_accuracy:.3f}")
