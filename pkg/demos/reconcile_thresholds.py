#!/usr/bin/env python3
"""Check an authored rule cut against the model's empirical boundary.

The data is synthesized so the true decision boundary sits at alp = 175
while the authored table still says 200. The reconciler reads the
model's partial dependence, finds where it crosses, and drafts a
revision for human review; nothing changes until a reviewer accepts.
"""

from twinscope import (
    ForestConfig,
    ReconcileConfig,
    apply_revision,
    impute,
    parse_table,
    print_table,
    propose_revisions,
    synth_generate,
    train_forest,
)

table = parse_table(
    "table alp_screen hit FIRST\n"
    "inputs: alp\n"
    "| < 200 -> LOW # authored reference cut\n"
    "| - -> HIGH\n"
)
print("authored table:")
print(print_table(table))

ds = impute(synth_generate(2000, "alp>175", noise=0.1, seed=20))
model = train_forest(ds, ForestConfig(n_trees=60, max_depth=8, seed=20))

revisions = propose_revisions(table, model, ds, ReconcileConfig(seed=20))
print(f"{len(revisions)} revision(s) proposed:")
for rev in revisions:
    print(" ", rev.describe())

rev = revisions[0]
revised = apply_revision(table, rev)
print("\nafter review and acceptance:")
print(print_table(revised))
