#!/usr/bin/env python3
"""Follow one patient twin through observations, assessment, and a what-if.

ServiceCore is the state machine behind the HTTP API, usable in-process.
`twinscope serve --model ... --rules ... --data-dir ...` exposes the
same operations as JSON endpoints.
"""

import tempfile
from pathlib import Path

from twinscope import (
    ForestConfig,
    Observation,
    SplitSpec,
    TwinStore,
    default_liver_table,
    fetch_ilpd,
    impute,
    load_dataset,
    load_model,
    save_model,
    split,
    train_forest,
)
from twinscope.service import ServiceCore

work = Path(tempfile.mkdtemp(prefix="twinscope-demo-"))
fetch_ilpd(work / "ilpd.csv", source="bundled")
ds = load_dataset(work / "ilpd.csv")
train, _ = split(ds, SplitSpec(seed=42))
train = impute(train)
model = train_forest(train, ForestConfig(n_trees=60, max_depth=8, seed=42))
save_model(model, work / "model.json", background=train)

core = ServiceCore(load_model(work / "model.json"), default_liver_table(), TwinStore(work / "twins"))

baseline = {
    "age": 51.0, "gender": 0.0, "total_bilirubin": 0.9, "direct_bilirubin": 0.2,
    "alp": 210.0, "alt": 38.0, "ast": 44.0, "total_proteins": 6.9,
    "albumin": 3.6, "ag_ratio": 1.1,
}
state = core.store.create_twin("demo-patient", baseline, observed_at="2026-05-01T09:00:00Z")
print(f"created twin {state.patient_id} with {state.log_length} baseline records")

for day, alt in [(2, 66.0), (9, 94.0), (16, 131.0)]:
    state = core.store.record_observation(
        Observation("demo-patient", "alt", alt, f"2026-05-{day:02d}T09:00:00Z", source="lab")
    )
print(f"after three lab results the log holds {state.log_length} records; alt is {state.snapshot.alt}")
print("alt history:", core.store.history("demo-patient", "alt"))

result = core.assess({"patient_id": "demo-patient", "seed": 1})
print(f"\nassessment: risk {result['risk_probability']:.4f}, rule outcome {result['rule_decision']['outcome']}")
contributions = result["explanation"]["contributions"]
top = sorted(contributions.items(), key=lambda kv: -abs(kv[1]))[:3]
for name, value in top:
    print(f"  {name:<18} {value:+.4f}")

whatif = core.assess({"patient_id": "demo-patient", "overrides": {"alt": 20.0}, "seed": 1})
print(f"\nwhat-if alt back to 20: risk {whatif['risk_probability']:.4f}, "
      f"rule outcome {whatif['rule_decision']['outcome']}")
print(f"twin log untouched: {core.store.twin_state('demo-patient').log_length} records")
