"""Rule-threshold reconciliation against partial dependence evidence."""

import numpy as np
import pytest

from twinscope.data import impute, synth_generate
from twinscope.errors import (
    FlatCurveError,
    NoCrossingError,
    StaleRevisionError,
    ValidationError,
)
from twinscope.explain import PdpCurve
from twinscope.forest import ForestConfig, train_forest
from twinscope.reconcile import (
    Crossing,
    ReconcileConfig,
    RuleRevision,
    apply_revision,
    empirical_threshold,
    find_crossing,
    is_non_monotone,
    propose_revisions,
)
from twinscope.rules import (
    Comparison,
    HitPolicy,
    Interval,
    RiskLevel,
    RuleRow,
    Wildcard,
    make_table,
    parse_table,
    print_table,
)


def curve_of(grid, values, feature="alp"):
    return PdpCurve(feature=feature, grid=np.asarray(grid, float), pdp=np.asarray(values, float))


def alp_table(cut=200.0):
    return make_table(
        "alp_screen",
        ["alp"],
        HitPolicy.FIRST,
        [
            RuleRow((Comparison("<", cut),), RiskLevel.LOW),
            RuleRow((Wildcard(),), RiskLevel.HIGH),
        ],
    )


# -- crossing detection ----------------------------------------------------------


def test_midpoint_crossing_linear_interpolation():
    # step from 0.2 to 0.8 between grid 100 and 110; midpoint level is 0.5
    curve = curve_of([90, 100, 110, 120], [0.2, 0.2, 0.8, 0.8])
    c = find_crossing(curve, ReconcileConfig())
    assert c.level == pytest.approx(0.5)
    # linear interpolation: 100 + (0.5-0.2)/(0.8-0.2)*10 = 105
    assert c.value == pytest.approx(105.0)
    assert c.direction == "rising"
    assert empirical_threshold(curve) == pytest.approx(105.0)


def test_midpoint_crossing_of_straight_line():
    grid = np.linspace(0.0, 100.0, 26)
    curve = curve_of(grid, 0.2 + 0.6 * grid / 100.0)
    c = find_crossing(curve, ReconcileConfig())
    assert c.value == pytest.approx(50.0, abs=1e-9)


def test_fixed_level_crossing():
    grid = np.linspace(0.0, 100.0, 26)
    curve = curve_of(grid, 0.2 + 0.6 * grid / 100.0)
    cfg = ReconcileConfig(crossing_level=0.35)
    c = find_crossing(curve, cfg)
    assert c.level == 0.35
    assert c.value == pytest.approx(25.0, abs=1e-9)


def test_falling_curve_direction():
    curve = curve_of([0, 10, 20, 30], [0.9, 0.8, 0.3, 0.2])
    c = find_crossing(curve, ReconcileConfig())
    assert c.direction == "falling"
    # level = 0.55, crossing between 10 and 20: 10 + (0.8-0.55)/(0.8-0.3)*10
    assert c.value == pytest.approx(15.0)


def test_flat_curve_raises():
    with pytest.raises(FlatCurveError):
        find_crossing(curve_of([0, 10, 20], [0.4, 0.4, 0.4]), ReconcileConfig())


def test_level_outside_range_raises():
    curve = curve_of([0, 10, 20], [0.2, 0.3, 0.4])
    with pytest.raises(NoCrossingError):
        find_crossing(curve, ReconcileConfig(crossing_level=0.9))


def test_short_curve_rejected():
    with pytest.raises(ValidationError):
        find_crossing(curve_of([0, 1], [0.1, 0.9]), ReconcileConfig())


def test_crossing_on_grid_point_exact():
    curve = curve_of([0, 10, 20], [0.2, 0.5, 0.8])
    c = find_crossing(curve, ReconcileConfig())
    assert c.value == pytest.approx(10.0)


def test_non_monotone_detection():
    assert is_non_monotone(curve_of([0, 10, 20, 30], [0.2, 0.8, 0.3, 0.9]))
    assert not is_non_monotone(curve_of([0, 10, 20, 30], [0.2, 0.4, 0.6, 0.8]))
    # tiny wiggles below tolerance do not count
    assert not is_non_monotone(curve_of([0, 10, 20, 30], [0.2, 0.4001, 0.4, 0.8]))


def test_reconcile_config_validation():
    with pytest.raises(ValidationError):
        ReconcileConfig(min_relative_shift=0.0).validate()
    with pytest.raises(ValidationError):
        ReconcileConfig(min_relative_shift=1.0).validate()
    with pytest.raises(ValidationError):
        ReconcileConfig(crossing_level=1.5).validate()
    with pytest.raises(ValidationError):
        ReconcileConfig(crossing_level="median").validate()
    with pytest.raises(ValidationError):
        ReconcileConfig(grid_size=2).validate()
    ReconcileConfig().validate()
    ReconcileConfig(crossing_level=0.5).validate()


# -- proposal flow ----------------------------------------------------------------


@pytest.fixture(scope="module")
def planted():
    """Forest trained on synthetic data whose true boundary is alp = 175."""
    ds = impute(synth_generate(2000, "alp>175", 0.1, seed=1234))
    model = train_forest(ds, ForestConfig(n_trees=30, max_depth=6, seed=1234))
    return ds, model


def test_propose_recovers_planted_threshold(planted):
    ds, model = planted
    revs = propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(seed=1))
    assert len(revs) == 1
    rev = revs[0]
    assert rev.table == "alp_screen"
    assert rev.row == 0
    assert rev.column == "alp"
    assert rev.old_expr == Comparison("<", 200.0)
    assert isinstance(rev.proposed_expr, Comparison)
    assert rev.proposed_expr.op == "<"
    assert 165.0 <= rev.proposed_expr.value <= 185.0
    assert rev.empirical_threshold == pytest.approx(rev.proposed_expr.value)
    assert rev.method == "pdp_crossing"
    assert rev.support > 0
    assert 0.0 <= rev.corroboration <= 1.0
    assert rev.status == "pending"
    assert rev.revision_id
    assert len(rev.curve.grid) == len(rev.curve.pdp)


def test_propose_skips_small_shifts(planted):
    ds, model = planted
    # authored cut already equals the empirical crossing: no proposal
    revs = propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(seed=1))
    t_star = revs[0].empirical_threshold
    tuned = alp_table(round(t_star, 1))
    assert propose_revisions(tuned, model, ds, ReconcileConfig(seed=1)) == []
    # a large min_relative_shift suppresses even the 200 -> 175 move
    assert propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(min_relative_shift=0.5, seed=1)) == []


def test_propose_skips_wildcard_and_gender(planted):
    ds, model = planted
    t = make_table(
        "mixed",
        ["gender", "alp"],
        HitPolicy.FIRST,
        [
            RuleRow((Comparison("<", 0.5), Wildcard()), RiskLevel.LOW),
            RuleRow((Wildcard(), Comparison("<", 200.0)), RiskLevel.LOW),
            RuleRow((Wildcard(), Wildcard()), RiskLevel.HIGH),
        ],
    )
    revs = propose_revisions(t, model, ds, ReconcileConfig(seed=1))
    # only the alp comparison is eligible; gender and wildcards are not
    assert all(r.column == "alp" for r in revs)
    assert len(revs) == 1
    assert revs[0].row == 1


def test_interval_cell_revision(planted):
    ds, model = planted
    t = make_table(
        "interval_screen",
        ["alp"],
        HitPolicy.FIRST,
        [
            RuleRow((Interval(50.0, 200.0, True, True),), RiskLevel.LOW),
            RuleRow((Wildcard(),), RiskLevel.HIGH),
        ],
    )
    revs = propose_revisions(t, model, ds, ReconcileConfig(seed=1))
    assert len(revs) == 1
    prop = revs[0].proposed_expr
    assert isinstance(prop, Interval)
    # the bound nearer the crossing moved; closedness is preserved
    assert prop.lo == 50.0
    assert 165.0 <= prop.hi <= 185.0
    assert prop.lo_closed and prop.hi_closed


def test_apply_revision_and_staleness(planted):
    ds, model = planted
    table = alp_table(200.0)
    revs = propose_revisions(table, model, ds, ReconcileConfig(seed=1))
    rev = revs[0]
    updated = apply_revision(table, rev)
    assert updated.rows[0].cells[0] == rev.proposed_expr
    assert any("revision" in n for n in updated.notes)
    # applying the same revision to the already-updated table is stale
    with pytest.raises(StaleRevisionError):
        apply_revision(updated, rev)
    # applying to a different table name is a usage error
    other = make_table(
        "other", ["alp"], HitPolicy.FIRST,
        [RuleRow((Comparison("<", 200.0),), RiskLevel.LOW), RuleRow((Wildcard(),), RiskLevel.HIGH)],
    )
    with pytest.raises(ValidationError):
        apply_revision(other, rev)
    # round-trips through the canonical printer
    assert parse_table(print_table(updated)) == updated


def test_revision_round_trip(planted):
    ds, model = planted
    rev = propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(seed=1))[0]
    doc = rev.as_dict()
    back = RuleRevision.from_dict(doc)
    assert back.table == rev.table
    assert back.row == rev.row
    assert back.column == rev.column
    assert back.old_expr == rev.old_expr
    assert back.proposed_expr == rev.proposed_expr
    assert back.empirical_threshold == rev.empirical_threshold
    assert back.corroboration == rev.corroboration
    assert back.support == rev.support
    assert back.revision_id == rev.revision_id
    assert back.status == rev.status
    assert np.allclose(back.curve.grid, rev.curve.grid)
    assert np.allclose(back.curve.pdp, rev.curve.pdp)


def test_revision_status_transitions(planted):
    ds, model = planted
    rev = propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(seed=1))[0]
    accepted = rev.with_status("accepted")
    assert accepted.status == "accepted"
    assert accepted.revision_id == rev.revision_id
    with pytest.raises(ValidationError):
        rev.with_status("maybe")


def test_revision_invariants(planted):
    ds, model = planted
    rev = propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(seed=1))[0]
    with pytest.raises(ValidationError):
        RuleRevision(
            table=rev.table, row=rev.row, column=rev.column,
            old_expr=rev.old_expr, proposed_expr=rev.old_expr,  # no change
            empirical_threshold=rev.empirical_threshold, method=rev.method,
            corroboration=rev.corroboration, support=rev.support, curve=rev.curve,
        )
    with pytest.raises(ValidationError):
        RuleRevision(
            table=rev.table, row=rev.row, column=rev.column,
            old_expr=rev.old_expr, proposed_expr=rev.proposed_expr,
            empirical_threshold=rev.empirical_threshold, method=rev.method,
            corroboration=rev.corroboration, support=0, curve=rev.curve,
        )


def test_describe_is_one_line(planted):
    ds, model = planted
    rev = propose_revisions(alp_table(200.0), model, ds, ReconcileConfig(seed=1))[0]
    line = rev.describe()
    assert "\n" not in line
    assert "alp" in line
    assert "200" in line
