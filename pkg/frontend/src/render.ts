// HTML renderers for the console. Every function here is a pure string
// producer: no document access, no state. main.ts owns the DOM and event
// wiring; tests call these directly and inspect the markup.
//
// Numbers are rendered with String(value) on the parsed JSON number, so the
// text on screen is the shortest round-trip form of exactly the value the
// service sent. The console never recomputes risk, contributions, or rule
// outcomes.

import type {
  AssessmentResponse,
  CurveDoc,
  Explanation,
  FeatureMap,
  RevisionEntry,
  RuleDecision,
  RuleTableDoc,
  TwinState,
} from "./types.js";
import { FEATURE_NAMES } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Exact textual form of a JSON number as parsed; never rounded. */
export function fmt(value: number): string {
  return String(value);
}

export function renderVersionBadge(modelVersion: string, rulesVersion: string): string {
  return (
    `<span class="badge" data-role="model-version">model ${escapeHtml(modelVersion)}</span>` +
    `<span class="badge" data-role="rules-version">rules ${escapeHtml(rulesVersion)}</span>`
  );
}

export function renderRiskPanel(assessment: AssessmentResponse): string {
  const outcome = assessment.rule_decision.outcome;
  const outcomeClass = outcome === null ? "none" : outcome.toLowerCase();
  const outcomeText = outcome === null ? "no rule matched" : outcome;
  return (
    `<div class="risk-value" data-role="risk" data-value="${fmt(assessment.risk_probability)}">` +
    `${fmt(assessment.risk_probability)}</div>` +
    `<div class="rule-outcome outcome-${escapeHtml(outcomeClass)}" data-role="outcome">` +
    `${escapeHtml(outcomeText)}</div>`
  );
}

/**
 * One signed horizontal bar per feature, sorted by |contribution| descending.
 * Positive contributions extend right of a center line, negative left; exact
 * zeros get a de-emphasized row with no bar. Widths are proportional to the
 * largest |contribution| so the top feature always spans half the track.
 */
export function renderContributionBars(explanation: Explanation): string {
  const entries = FEATURE_NAMES.map((name) => ({
    name,
    value: explanation.contributions[name],
  })).sort((a, b) => Math.abs(b.value) - Math.abs(a.value) || a.name.localeCompare(b.name));
  const maxAbs = Math.max(...entries.map((e) => Math.abs(e.value)));
  const rows = entries.map((e) => {
    const zero = e.value === 0;
    const half = maxAbs > 0 ? (Math.abs(e.value) / maxAbs) * 50 : 0;
    const side = e.value > 0 ? "positive" : e.value < 0 ? "negative" : "zero";
    const bar = zero
      ? `<span class="bar-center"></span>`
      : e.value > 0
        ? `<span class="bar-center"></span><span class="bar bar-positive" style="width:${half.toFixed(3)}%"></span>`
        : `<span class="bar bar-negative" style="width:${half.toFixed(3)}%;margin-left:${(50 - half).toFixed(3)}%"></span><span class="bar-center"></span>`;
    return (
      `<div class="contribution-row ${side}${zero ? " muted" : ""}" ` +
      `data-feature="${e.name}" data-value="${fmt(e.value)}">` +
      `<span class="feature-name">${e.name}</span>` +
      `<span class="bar-track">${bar}</span>` +
      `<span class="contribution-value">${fmt(e.value)}</span>` +
      `</div>`
    );
  });
  return (
    `<div class="contributions" data-role="contributions" ` +
    `data-intercept="${fmt(explanation.intercept)}" ` +
    `data-fidelity="${fmt(explanation.local_fidelity)}">` +
    rows.join("") +
    `<div class="contribution-footer">intercept ${fmt(explanation.intercept)}, ` +
    `local fidelity ${fmt(explanation.local_fidelity)}</div>` +
    `</div>`
  );
}

/**
 * The decision table with the evaluation trace overlaid: each cell is marked
 * matched or not, fully matching rows are highlighted, and the selected
 * outcome is stated under the table.
 */
export function renderRuleTrace(table: RuleTableDoc, decision: RuleDecision): string {
  const matched = new Set(decision.matched_rows);
  const header =
    `<tr><th></th>` +
    table.inputs.map((name) => `<th>${escapeHtml(name)}</th>`).join("") +
    `<th>outcome</th></tr>`;
  const body = table.rows
    .map((row, r) => {
      const rowTrace = decision.trace[r] ?? [];
      const cells = row.cells
        .map((cell, c) => {
          const hit = rowTrace[c] === true;
          return `<td class="${hit ? "cell-match" : "cell-miss"}">${escapeHtml(cell)}</td>`;
        })
        .join("");
      const cls = matched.has(r) ? "row-matched" : "row-unmatched";
      const note = row.annotation ? ` title="${escapeHtml(row.annotation)}"` : "";
      return (
        `<tr class="${cls}" data-row="${r}"${note}>` +
        `<td class="row-index">${r}</td>${cells}` +
        `<td class="row-output">${escapeHtml(row.output)}</td></tr>`
      );
    })
    .join("");
  const outcomeText = decision.outcome === null ? "no rule matched" : decision.outcome;
  return (
    `<table class="rule-table" data-role="rule-trace" data-table="${escapeHtml(table.name)}">` +
    `${header}${body}</table>` +
    `<div class="rule-summary">hit policy ${escapeHtml(table.hit_policy)}; ` +
    `matched rows [${decision.matched_rows.join(", ")}]; ` +
    `outcome <strong data-role="trace-outcome">${escapeHtml(outcomeText)}</strong></div>`
  );
}

/** Inline SVG polyline of a PDP curve; no external assets. */
export function sparklineSvg(curve: CurveDoc, width = 160, height = 36): string {
  const { grid, pdp } = curve;
  if (grid.length === 0) return `<svg class="sparkline" width="${width}" height="${height}"></svg>`;
  const gLo = grid[0];
  const gSpan = grid[grid.length - 1] - gLo || 1;
  const pLo = Math.min(...pdp);
  const pSpan = Math.max(...pdp) - pLo || 1;
  const pad = 2;
  const points = grid
    .map((g, i) => {
      const x = pad + ((g - gLo) / gSpan) * (width - 2 * pad);
      const y = height - pad - ((pdp[i] - pLo) / pSpan) * (height - 2 * pad);
      return `${x.toFixed(2)},${y.toFixed(2)}`;
    })
    .join(" ");
  return (
    `<svg class="sparkline" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" role="img" aria-label="${escapeHtml(curve.feature)} partial dependence">` +
    `<polyline fill="none" stroke="currentColor" stroke-width="1.5" points="${points}"/>` +
    `</svg>`
  );
}

/**
 * The review panel: pending revisions with the authored and proposed
 * expressions side by side, the supporting PDP sparkline, the support count,
 * and accept/reject buttons. Archived revisions are listed below with their
 * final status and reviewer.
 */
export function renderRevisions(revisions: RevisionEntry[]): string {
  const pending = revisions.filter((r) => r.status === "pending");
  const archived = revisions.filter((r) => r.status !== "pending");
  const card = (rev: RevisionEntry) => {
    const buttons =
      rev.status === "pending"
        ? `<div class="revision-actions">` +
          `<button data-action="review" data-revision-id="${escapeHtml(rev.revision_id)}" data-verdict="accept">accept</button>` +
          `<button data-action="review" data-revision-id="${escapeHtml(rev.revision_id)}" data-verdict="reject">reject</button>` +
          `</div>`
        : `<div class="revision-verdict">${escapeHtml(rev.status)}` +
          (rev.reviewer ? ` by ${escapeHtml(rev.reviewer)}` : "") +
          `</div>`;
    const note = rev.annotation
      ? `<div class="revision-note">note: ${escapeHtml(rev.annotation)}</div>`
      : "";
    return (
      `<div class="revision status-${escapeHtml(rev.status)}" data-revision-id="${escapeHtml(rev.revision_id)}">` +
      `<div class="revision-target">${escapeHtml(rev.table)} row ${rev.row}, column ${escapeHtml(rev.column)}</div>` +
      `<div class="revision-exprs">` +
      `<span class="old-expr" data-role="old-expr">${escapeHtml(rev.old_expr)}</span>` +
      `<span class="arrow">&#8594;</span>` +
      `<span class="proposed-expr" data-role="proposed-expr">${escapeHtml(rev.proposed_expr)}</span>` +
      `</div>` +
      sparklineSvg(rev.curve) +
      `<div class="revision-evidence">empirical ${fmt(rev.empirical_threshold)}, ` +
      `corroboration ${fmt(rev.corroboration)}, ` +
      `support <span data-role="support">${fmt(rev.support)}</span> records (${escapeHtml(rev.method)})</div>` +
      note +
      buttons +
      `</div>`
    );
  };
  const pendingBlock = pending.length
    ? pending.map(card).join("")
    : `<div class="revision-empty">no pending revisions</div>`;
  const archivedBlock = archived.length
    ? `<div class="revisions-archived"><h3>reviewed</h3>${archived.map(card).join("")}</div>`
    : "";
  return `<div class="revisions" data-role="revisions">${pendingBlock}${archivedBlock}</div>`;
}

/** Patient snapshot as a definition list; values are exact API numbers. */
export function renderSnapshot(patient: TwinState): string {
  const rows = FEATURE_NAMES.map(
    (name) =>
      `<div class="snapshot-row" data-feature="${name}">` +
      `<span class="feature-name">${name}</span>` +
      `<span class="feature-value" data-value="${fmt(patient.snapshot[name])}">${fmt(patient.snapshot[name])}</span>` +
      `</div>`,
  ).join("");
  return (
    `<div class="snapshot" data-role="snapshot" data-patient="${escapeHtml(patient.patient_id)}">` +
    `<div class="snapshot-meta">${escapeHtml(patient.patient_id)}, ` +
    `${patient.log_length} log records, updated ${escapeHtml(patient.updated_at)}</div>` +
    rows +
    `</div>`
  );
}

/** Active what-if overrides, so the user always sees what the assessment reflects. */
export function renderOverrides(overrides: Partial<FeatureMap>): string {
  const names = Object.keys(overrides) as (keyof FeatureMap)[];
  if (names.length === 0) return `<div class="overrides empty" data-role="overrides">baseline (no overrides)</div>`;
  const items = names
    .sort()
    .map(
      (name) =>
        `<span class="override" data-feature="${name}" data-value="${fmt(overrides[name] as number)}">` +
        `${name} = ${fmt(overrides[name] as number)}</span>`,
    )
    .join(" ");
  return `<div class="overrides" data-role="overrides">what-if: ${items}</div>`;
}

export function renderError(message: string | null): string {
  if (!message) return "";
  return `<div class="error-banner" data-role="error">${escapeHtml(message)}</div>`;
}
