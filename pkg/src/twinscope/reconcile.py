"""Reconciling authored rule thresholds with model-derived evidence.

For each numeric comparison or interval cell in a decision table, the
partial dependence curve of the model on that feature locates an
empirical threshold: the first point where the curve crosses a
reference level (by default the midpoint between the curve's extremes),
linearly interpolated between grid points. When the empirical threshold
differs from the authored bound by at least a configurable relative
shift, a revision is proposed that keeps the expression's shape and
replaces the bound. Each proposal carries its evidence curve, a support
count (records lying between the authored and empirical bounds), and a
corroboration score: the fraction of local surrogate explanations,
fitted at the records nearest the empirical threshold, whose slope for
the feature agrees in sign with the curve's crossing direction.

Applying a revision is guarded against staleness: the table cell must
still hold the expression the proposal was computed from.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, impute
from .errors import FlatCurveError, NoCrossingError, StaleRevisionError, ValidationError
from .explain import PdpCurve, SurrogateConfig, explain_instance, pdp
from .features import FEATURE_NAMES, PatientFeatures
from .rules import CellExpr, Comparison, DecisionTable, Interval, parse_expr, print_expr, replace_cell
from .util import content_hash

REVISION_STATUSES = ("pending", "accepted", "rejected")


@dataclass(frozen=True)
class ReconcileConfig:
    min_relative_shift: float = 0.05
    crossing_level: float | str = "midpoint"  # "midpoint" or a fixed level in (0, 1)
    grid_size: int = 50
    n_instances: int = 6  # surrogate fits per corroboration
    surrogate_samples: int = 1000
    seed: int = 0
    flat_tol: float = 1e-6

    def validate(self) -> "ReconcileConfig":
        if not 0.0 < self.min_relative_shift < 1.0:
            raise ValidationError(
                "min_relative_shift must lie in (0, 1)", field="min_relative_shift"
            )
        if self.crossing_level != "midpoint":
            try:
                lv = float(self.crossing_level)
            except (TypeError, ValueError):
                raise ValidationError(
                    "crossing_level must be 'midpoint' or a number", field="crossing_level"
                )
            if not 0.0 < lv < 1.0:
                raise ValidationError("crossing_level must lie in (0, 1)", field="crossing_level")
        if self.grid_size < 3:
            raise ValidationError("grid_size must be >= 3", field="grid_size")
        if self.n_instances < 1:
            raise ValidationError("n_instances must be >= 1", field="n_instances")
        return self


@dataclass(frozen=True)
class Crossing:
    value: float
    level: float
    direction: str  # "rising" or "falling"


def find_crossing(curve: PdpCurve, cfg: ReconcileConfig | None = None) -> Crossing:
    """First crossing of the curve through the configured level.

    Linear interpolation between the bracketing grid points. Raises
    ValidationError for a curve of < 3 points, FlatCurveError when the
    curve moves less than flat_tol overall, NoCrossingError when the
    level is never crossed.
    """
    cfg = (cfg or ReconcileConfig()).validate()
    p = np.asarray(curve.pdp, dtype=float)
    g = np.asarray(curve.grid, dtype=float)
    if len(g) < 3:
        raise ValidationError(f"curve for {curve.feature} has {len(g)} points; need >= 3")
    if curve.range_effect < cfg.flat_tol:
        raise FlatCurveError(
            f"curve for {curve.feature} is flat (range {curve.range_effect:g} < {cfg.flat_tol:g})"
        )
    lv = (float(p.min()) + float(p.max())) / 2.0 if cfg.crossing_level == "midpoint" else float(
        cfg.crossing_level
    )
    for i in range(len(g) - 1):
        a, b = p[i] - lv, p[i + 1] - lv
        if a == b:
            if a == 0.0:
                continue  # flat at the level: no definite crossing here
        elif a == 0.0 or a * b < 0.0 or (b == 0.0 and i + 1 == len(g) - 1):
            t = g[i] + (0.0 - a) * (g[i + 1] - g[i]) / (b - a)
            return Crossing(value=float(t), level=lv, direction="rising" if b > a else "falling")
    raise NoCrossingError(f"curve for {curve.feature} never crosses level {lv:g}")


def empirical_threshold(curve: PdpCurve, cfg: ReconcileConfig | None = None) -> float:
    """Feature value where the curve first crosses the configured level."""
    return find_crossing(curve, cfg).value


def is_non_monotone(curve: PdpCurve, rel_tol: float = 0.05) -> bool:
    """True when the curve both rises and falls by more than rel_tol of
    its total range (small wiggles do not count)."""
    d = np.diff(np.asarray(curve.pdp, dtype=float))
    tol = rel_tol * curve.range_effect
    return bool((d > tol).any() and (d < -tol).any())


@dataclass(frozen=True)
class RuleRevision:
    table: str
    row: int
    column: str  # feature name
    old_expr: CellExpr
    proposed_expr: CellExpr
    empirical_threshold: float
    method: str  # only "pdp_crossing"
    corroboration: float
    support: int  # records between the authored and empirical bounds
    curve: PdpCurve
    annotation: str = ""
    revision_id: str = ""
    status: str = "pending"

    def __post_init__(self):
        if self.proposed_expr == self.old_expr:
            raise ValidationError("proposed_expr must differ from old_expr")
        if self.support <= 0:
            raise ValidationError("support must be > 0", field="support")
        if self.status not in REVISION_STATUSES:
            raise ValidationError(f"unknown revision status {self.status!r}", field="status")

    def with_status(self, status: str) -> "RuleRevision":
        return replace(self, status=status)

    def as_dict(self) -> dict:
        return {
            "table": self.table,
            "row": self.row,
            "column": self.column,
            "old_expr": print_expr(self.old_expr),
            "proposed_expr": print_expr(self.proposed_expr),
            "empirical_threshold": self.empirical_threshold,
            "method": self.method,
            "corroboration": self.corroboration,
            "support": self.support,
            "curve": self.curve.as_dict(),
            "annotation": self.annotation,
            "revision_id": self.revision_id,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RuleRevision":
        return cls(
            table=d["table"],
            row=int(d["row"]),
            column=d["column"],
            old_expr=parse_expr(d["old_expr"]),
            proposed_expr=parse_expr(d["proposed_expr"]),
            empirical_threshold=float(d["empirical_threshold"]),
            method=d["method"],
            corroboration=float(d["corroboration"]),
            support=int(d["support"]),
            curve=PdpCurve(
                feature=d["curve"]["feature"],
                grid=np.array(d["curve"]["grid"], dtype=float),
                pdp=np.array(d["curve"]["pdp"], dtype=float),
            ),
            annotation=d.get("annotation", ""),
            revision_id=d.get("revision_id", ""),
            status=d.get("status", "pending"),
        )

    def describe(self) -> str:
        """One line for the CLI revision report."""
        note = f" [{self.annotation}]" if self.annotation else ""
        return (
            f"{self.table} row {self.row} {self.column}: {print_expr(self.old_expr)} -> "
            f"{print_expr(self.proposed_expr)} (empirical {self.empirical_threshold:.6g}, "
            f"corroboration {self.corroboration:.2f}, support {self.support}){note}"
        )


def _revision_id(table: str, row: int, column: str, old: str, proposed: str) -> str:
    return content_hash(
        {"table": table, "row": row, "column": column, "old": old, "proposed": proposed}
    )


def _revised_expr(cell: CellExpr, t_star: float) -> CellExpr | None:
    """The cell with its bound nearest to t_star replaced; None when the
    replacement cannot be expressed (e.g. an interval would invert)."""
    if isinstance(cell, Comparison):
        return Comparison(cell.op, float(t_star))
    if isinstance(cell, Interval):
        if abs(t_star - cell.lo) <= abs(t_star - cell.hi):
            lo, hi = float(t_star), cell.hi
        else:
            lo, hi = cell.lo, float(t_star)
        if not (lo < hi or (lo == hi and cell.lo_closed and cell.hi_closed)):
            return None
        return Interval(lo, hi, cell.lo_closed, cell.hi_closed)
    return None


def _authored_bound(cell: CellExpr, t_star: float) -> float:
    if isinstance(cell, Comparison):
        return cell.value
    assert isinstance(cell, Interval)
    return cell.lo if abs(t_star - cell.lo) <= abs(t_star - cell.hi) else cell.hi


def _corroboration(model, ds: Dataset, feature: str, crossing: Crossing, cfg: ReconcileConfig) -> float:
    """Fraction of near-threshold local surrogates whose slope sign for
    the feature matches the curve's crossing direction."""
    j = FEATURE_NAMES.index(feature)
    X, _ = ds.matrix()
    order = np.argsort(np.abs(X[:, j] - crossing.value), kind="stable")
    picks = order[: cfg.n_instances]
    if len(picks) == 0:
        return 0.0
    expected = 1.0 if crossing.direction == "rising" else -1.0
    agree = 0
    for k, idx in enumerate(picks):
        inst = PatientFeatures.from_array(X[idx])
        scfg = SurrogateConfig(n_samples=cfg.surrogate_samples, seed=cfg.seed * 1000003 + k)
        exp = explain_instance(model, inst, ds.stats, scfg)
        if exp.contributions[j] * expected > 0:
            agree += 1
    return agree / len(picks)


def propose_revisions(
    table: DecisionTable, model, ds: Dataset, cfg: ReconcileConfig | None = None
) -> list[RuleRevision]:
    """Scan the table for numeric cells whose bound the model's partial
    dependence contradicts, in row-major cell order.

    Wildcards, equality cells, and gender cells are left alone. Features
    whose curve is flat or never crosses the level yield no proposal, as
    do shifts below min_relative_shift and bounds no record falls near
    (support 0).
    """
    cfg = (cfg or ReconcileConfig()).validate()
    ds = impute(ds)
    X, _ = ds.matrix()
    curves: dict[str, PdpCurve] = {}
    crossings: dict[str, Crossing | None] = {}
    corroborations: dict[str, float] = {}
    out: list[RuleRevision] = []
    for r, row in enumerate(table.rows):
        for c, cell in enumerate(row.cells):
            feature = table.inputs[c]
            if feature == "gender":
                continue
            if not isinstance(cell, (Comparison, Interval)) or (
                isinstance(cell, Comparison) and cell.op == "="
            ):
                continue
            if feature not in crossings:
                curve = pdp(model, ds, feature, grid_size=cfg.grid_size)
                curves[feature] = curve
                try:
                    crossings[feature] = find_crossing(curve, cfg)
                except (FlatCurveError, NoCrossingError):
                    crossings[feature] = None
            crossing = crossings[feature]
            if crossing is None:
                continue
            authored = _authored_bound(cell, crossing.value)
            if authored == 0.0:
                continue  # relative shift is undefined at a zero bound
            shift = abs(crossing.value - authored) / abs(authored)
            if shift < cfg.min_relative_shift:
                continue
            proposed = _revised_expr(cell, crossing.value)
            if proposed is None or proposed == cell:
                continue
            lo, hi = sorted((authored, crossing.value))
            col = FEATURE_NAMES.index(feature)
            support = int(np.count_nonzero((X[:, col] >= lo) & (X[:, col] <= hi)))
            if support == 0:
                continue
            if feature not in corroborations:
                corroborations[feature] = _corroboration(model, ds, feature, crossing, cfg)
            old_text, new_text = print_expr(cell), print_expr(proposed)
            out.append(
                RuleRevision(
                    table=table.name,
                    row=r,
                    column=feature,
                    old_expr=cell,
                    proposed_expr=proposed,
                    empirical_threshold=float(crossing.value),
                    method="pdp_crossing",
                    corroboration=corroborations[feature],
                    support=support,
                    curve=curves[feature],
                    annotation="non_monotone" if is_non_monotone(curves[feature]) else "",
                    revision_id=_revision_id(table.name, r, feature, old_text, new_text),
                )
            )
    return out


def apply_revision(table: DecisionTable, rev: RuleRevision) -> DecisionTable:
    """Replace the revised cell, recording the change as a table note.

    Raises StaleRevisionError when the cell no longer holds the
    expression the revision was computed from, and ValidationError when
    the revision addresses a different table or an unknown cell.
    """
    if rev.table != table.name:
        raise ValidationError(f"revision targets table {rev.table!r}, not {table.name!r}")
    if not 0 <= rev.row < len(table.rows):
        raise ValidationError(f"revision row {rev.row} is out of range")
    if rev.column not in table.inputs:
        raise ValidationError(f"revision column {rev.column!r} is not a table input")
    col = table.column_of(rev.column)
    current = table.rows[rev.row].cells[col]
    if current != rev.old_expr:
        raise StaleRevisionError(
            f"cell ({rev.row}, {rev.column}) holds {print_expr(current)!r}, "
            f"revision was computed from {print_expr(rev.old_expr)!r}"
        )
    note = (
        f"revision {rev.revision_id}: {rev.column} row {rev.row} "
        f"{print_expr(rev.old_expr)} -> {print_expr(rev.proposed_expr)} "
        f"(empirical {rev.empirical_threshold:.6g}, corroboration {rev.corroboration:.2f})"
    )
    return replace_cell(table, rev.row, col, rev.proposed_expr, note=note)
