"""Decision tables over patient features, with explicit hit policies.

Cell grammar (whitespace-insensitive):

    cell     := '-' | comparison | interval
    comparison := ('<' | '<=' | '>' | '>=' | '=') number
    interval := ('[' | '(') number '..' number (']' | ')')

An equality against an integral constant parses to EnumEq (used for the
0/1 gender encoding); a fractional constant stays a Comparison. The
canonical printer inverts parse_expr exactly.

Table document format (UTF-8, line oriented; '#' starts a full-line
comment, blank lines are ignored):

    table <name> hit <UNIQUE|FIRST|PRIORITY>
    inputs: <feature>, <feature>, ...
    priority: HIGH > MEDIUM > LOW        (PRIORITY tables only)
    note: <free text>                    (optional, repeatable)
    | <cell> | <cell> | ... -> <LOW|MEDIUM|HIGH>  # annotation
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, replace

from .errors import AmbiguousMatchError, RuleParseError
from .features import FEATURE_NAMES, PatientFeatures


class RiskLevel(enum.Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"


class HitPolicy(enum.Enum):
    UNIQUE = "UNIQUE"
    FIRST = "FIRST"
    PRIORITY = "PRIORITY"


@dataclass(frozen=True)
class Wildcard:
    pass


@dataclass(frozen=True)
class Comparison:
    op: str  # one of < <= > >= =
    value: float

    def __post_init__(self):
        if self.op not in ("<", "<=", ">", ">=", "="):
            raise RuleParseError(f"unknown comparison operator {self.op!r}")
        if not math.isfinite(self.value):
            raise RuleParseError("comparison value must be finite")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise RuleParseError("interval bounds must be finite")
        if self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed)):
            raise RuleParseError(f"reversed or empty interval [{self.lo}..{self.hi}]")


@dataclass(frozen=True)
class EnumEq:
    value: int


CellExpr = Wildcard | Comparison | Interval | EnumEq

# a bare trailing dot is never part of a number, so '16..20' stays two
# numbers around the interval separator
_NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d+)?|\.\d+)(?:[eE][+-]?\d+)?")


def _skip_ws(text: str, pos: int) -> int:
    while pos < len(text) and text[pos].isspace():
        pos += 1
    return pos


def _read_number(text: str, pos: int) -> tuple[float, int]:
    pos = _skip_ws(text, pos)
    m = _NUMBER_RE.match(text, pos)
    if not m:
        raise RuleParseError(f"expected a number at offset {pos}", offset=pos)
    return float(m.group(0)), m.end()


def parse_expr(text: str) -> CellExpr:
    """Parse one cell expression. Raises RuleParseError with a character offset."""
    pos = _skip_ws(text, 0)
    if pos >= len(text):
        raise RuleParseError("empty cell expression", offset=pos)
    ch = text[pos]
    if ch == "-":
        end = _skip_ws(text, pos + 1)
        if end != len(text):
            raise RuleParseError(f"unexpected input after wildcard at offset {end}", offset=end)
        return Wildcard()
    if ch in "<>=":
        op = ch
        pos += 1
        if ch in "<>" and pos < len(text) and text[pos] == "=":
            op += "="
            pos += 1
        value, pos = _read_number(text, pos)
        pos = _skip_ws(text, pos)
        if pos != len(text):
            raise RuleParseError(f"unexpected input at offset {pos}", offset=pos)
        if op == "=" and float(value).is_integer():
            return EnumEq(int(value))
        return Comparison(op, value)
    if ch in "[(":
        lo_closed = ch == "["
        lo, pos = _read_number(text, pos + 1)
        pos = _skip_ws(text, pos)
        if not text.startswith("..", pos):
            raise RuleParseError(f"expected '..' at offset {pos}", offset=pos)
        hi, pos = _read_number(text, pos + 2)
        pos = _skip_ws(text, pos)
        if pos >= len(text) or text[pos] not in "])":
            raise RuleParseError(f"expected ']' or ')' at offset {pos}", offset=pos)
        hi_closed = text[pos] == "]"
        end = _skip_ws(text, pos + 1)
        if end != len(text):
            raise RuleParseError(f"unexpected input at offset {end}", offset=end)
        if lo > hi or (lo == hi and not (lo_closed and hi_closed)):
            raise RuleParseError(f"reversed or empty interval at offset 0: {text.strip()!r}", offset=0)
        return Interval(lo, hi, lo_closed, hi_closed)
    raise RuleParseError(f"unexpected character {ch!r} at offset {pos}", offset=pos)


def _fmt_num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def print_expr(e: CellExpr) -> str:
    """Canonical text: single space after an operator, '..' unspaced."""
    if isinstance(e, Wildcard):
        return "-"
    if isinstance(e, Comparison):
        return f"{e.op} {_fmt_num(e.value)}"
    if isinstance(e, EnumEq):
        return f"= {e.value}"
    if isinstance(e, Interval):
        return (
            ("[" if e.lo_closed else "(")
            + _fmt_num(e.lo)
            + ".."
            + _fmt_num(e.hi)
            + ("]" if e.hi_closed else ")")
        )
    raise TypeError(f"not a cell expression: {e!r}")


def matches(e: CellExpr, v: float) -> bool:
    if isinstance(e, Wildcard):
        return True
    if isinstance(e, Comparison):
        if e.op == "<":
            return v < e.value
        if e.op == "<=":
            return v <= e.value
        if e.op == ">":
            return v > e.value
        if e.op == ">=":
            return v >= e.value
        return v == e.value
    if isinstance(e, EnumEq):
        return v == e.value
    if isinstance(e, Interval):
        lo_ok = v >= e.lo if e.lo_closed else v > e.lo
        hi_ok = v <= e.hi if e.hi_closed else v < e.hi
        return lo_ok and hi_ok
    raise TypeError(f"not a cell expression: {e!r}")


@dataclass(frozen=True)
class RuleRow:
    cells: tuple[CellExpr, ...]
    output: RiskLevel
    annotation: str = ""


@dataclass(frozen=True)
class DecisionTable:
    name: str
    inputs: tuple[str, ...]
    hit_policy: HitPolicy
    rows: tuple[RuleRow, ...]
    priority_order: tuple[RiskLevel, ...] | None = None
    notes: tuple[str, ...] = ()

    def column_of(self, feature: str) -> int:
        return self.inputs.index(feature)


@dataclass(frozen=True)
class TableDecision:
    outcome: RiskLevel | None  # None = NoMatch
    matched_rows: tuple[int, ...]
    trace: tuple[tuple[bool, ...], ...]  # [row][cell] match booleans


def _validate_table(t: DecisionTable, line_of_row=None) -> DecisionTable:
    def fail(msg, line=None):
        raise RuleParseError(msg, line=line)

    if not t.name or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_-]*", t.name):
        fail(f"bad table name {t.name!r}")
    seen = set()
    for f in t.inputs:
        if f not in FEATURE_NAMES:
            fail(f"unknown feature {f!r} in inputs")
        if f in seen:
            fail(f"duplicate input {f!r}")
        seen.add(f)
    if not t.inputs:
        fail("table declares no inputs")
    if not t.rows:
        fail("table has no rows")
    for i, row in enumerate(t.rows):
        if len(row.cells) != len(t.inputs):
            fail(
                f"row {i}: expected {len(t.inputs)} cells, got {len(row.cells)}",
                line=line_of_row(i) if line_of_row else None,
            )
    if t.hit_policy is HitPolicy.PRIORITY:
        if t.priority_order is None or sorted(l.value for l in t.priority_order) != sorted(
            l.value for l in RiskLevel
        ):
            fail("PRIORITY tables must declare a total order over LOW/MEDIUM/HIGH")
    return t


def make_table(name, inputs, hit_policy, rows, priority_order=None, notes=()) -> DecisionTable:
    """Construct and validate a DecisionTable from python values."""
    t = DecisionTable(
        name=name,
        inputs=tuple(inputs),
        hit_policy=HitPolicy(hit_policy) if not isinstance(hit_policy, HitPolicy) else hit_policy,
        rows=tuple(rows),
        priority_order=tuple(priority_order) if priority_order else None,
        notes=tuple(notes),
    )
    return _validate_table(t)


_HEADER_RE = re.compile(r"^table\s+(\S+)\s+hit\s+(\S+)\s*$")


def parse_table(doc: str) -> DecisionTable:
    """Parse and fully validate a table document."""
    name = None
    hit_policy = None
    inputs: tuple[str, ...] | None = None
    priority_order = None
    notes: list[str] = []
    rows: list[RuleRow] = []
    row_lines: list[int] = []

    for lineno, raw in enumerate(doc.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if name is None:
            m = _HEADER_RE.match(line)
            if not m:
                raise RuleParseError("expected header 'table <name> hit <policy>'", line=lineno)
            name = m.group(1)
            try:
                hit_policy = HitPolicy(m.group(2))
            except ValueError:
                raise RuleParseError(f"unknown hit policy {m.group(2)!r}", line=lineno) from None
            continue
        if line.startswith("inputs:"):
            if inputs is not None:
                raise RuleParseError("duplicate inputs line", line=lineno)
            inputs = tuple(f.strip() for f in line[len("inputs:"):].split(",") if f.strip())
            continue
        if line.startswith("priority:"):
            levels = []
            for tok in line[len("priority:"):].split(">"):
                tok = tok.strip()
                try:
                    levels.append(RiskLevel(tok))
                except ValueError:
                    raise RuleParseError(f"unknown risk level {tok!r} in priority", line=lineno) from None
            priority_order = tuple(levels)
            continue
        if line.startswith("note:"):
            notes.append(line[len("note:"):].strip())
            continue
        if line.startswith("|"):
            if inputs is None:
                raise RuleParseError("rows must come after the inputs line", line=lineno)
            annotation = ""
            body = line
            if "#" in body:
                body, annotation = body.split("#", 1)
                annotation = annotation.strip()
            arrow = body.rfind("->")
            if arrow < 0:
                raise RuleParseError("row is missing '-> OUTPUT'", line=lineno)
            cells_part, out_part = body[:arrow], body[arrow + 2:]
            out_tok = out_part.strip()
            try:
                output = RiskLevel(out_tok)
            except ValueError:
                raise RuleParseError(f"unknown output {out_tok!r}", line=lineno) from None
            cell_texts = cells_part.split("|")[1:]
            cells = []
            for col, cell_text in enumerate(cell_texts):
                try:
                    cells.append(parse_expr(cell_text))
                except RuleParseError as exc:
                    raise RuleParseError(f"row cell {col}: {exc}", line=lineno, offset=exc.offset) from None
            rows.append(RuleRow(cells=tuple(cells), output=output, annotation=annotation))
            row_lines.append(lineno)
            continue
        raise RuleParseError(f"unrecognized line: {line!r}", line=lineno)

    if name is None:
        raise RuleParseError("empty document: no table header")
    if inputs is None:
        raise RuleParseError("missing inputs line")
    table = DecisionTable(
        name=name,
        inputs=inputs,
        hit_policy=hit_policy,
        rows=tuple(rows),
        priority_order=priority_order,
        notes=tuple(notes),
    )
    return _validate_table(table, line_of_row=lambda i: row_lines[i])


def print_table(t: DecisionTable) -> str:
    """Bit-exact canonical form; parse_table(print_table(t)) == t."""
    out = [f"table {t.name} hit {t.hit_policy.value}"]
    out.append("inputs: " + ", ".join(t.inputs))
    if t.priority_order:
        out.append("priority: " + " > ".join(l.value for l in t.priority_order))
    for note in t.notes:
        out.append(f"note: {note}")
    for row in t.rows:
        cells = " | ".join(print_expr(c) for c in row.cells)
        line = f"| {cells} -> {row.output.value}"
        if row.annotation:
            line += f" # {row.annotation}"
        out.append(line)
    return "\n".join(out) + "\n"


def evaluate(t: DecisionTable, p: PatientFeatures) -> TableDecision:
    """Evaluate a patient against the table under its hit policy.

    All rows are always traced; matched_rows lists every fully matching
    row regardless of policy. UNIQUE raises AmbiguousMatchError when more
    than one row matches.
    """
    values = [getattr(p, f) for f in t.inputs]
    trace = tuple(
        tuple(matches(cell, v) for cell, v in zip(row.cells, values)) for row in t.rows
    )
    matched = tuple(i for i, row_trace in enumerate(trace) if all(row_trace))
    if not matched:
        return TableDecision(outcome=None, matched_rows=(), trace=trace)
    if t.hit_policy is HitPolicy.UNIQUE:
        if len(matched) > 1:
            raise AmbiguousMatchError(list(matched))
        outcome = t.rows[matched[0]].output
    elif t.hit_policy is HitPolicy.FIRST:
        outcome = t.rows[min(matched)].output
    else:  # PRIORITY
        rank = {level: i for i, level in enumerate(t.priority_order)}
        outcome = min((t.rows[i].output for i in matched), key=lambda o: rank[o])
    return TableDecision(outcome=outcome, matched_rows=matched, trace=trace)


def replace_cell(t: DecisionTable, row: int, col: int, new_expr: CellExpr, note: str | None = None) -> DecisionTable:
    """Functional single-cell update used by the reconciliation loop."""
    rows = list(t.rows)
    cells = list(rows[row].cells)
    cells[col] = new_expr
    rows[row] = replace(rows[row], cells=tuple(cells))
    notes = t.notes + ((note,) if note else ())
    return replace(t, rows=tuple(rows), notes=notes)


def default_liver_table() -> DecisionTable:
    """The shipped age/ALT/AST screening table (placeholder clinical defaults)."""
    from importlib.resources import files

    text = files("twinscope.resources").joinpath("liver_default.table").read_text(encoding="utf-8")
    return parse_table(text)
