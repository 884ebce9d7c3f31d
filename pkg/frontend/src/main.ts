// DOM wiring for the console. All logic lives in api.ts (transport),
// state.ts (sequencing and debounce) and render.ts (markup); this file only
// connects events to those pieces and writes their output into the page.

import { Api, ApiError } from "./api.js";
import { Session } from "./state.js";
import {
  fmt,
  renderContributionBars,
  renderError,
  renderOverrides,
  renderRevisions,
  renderRiskPanel,
  renderRuleTrace,
  renderSnapshot,
  renderVersionBadge,
} from "./render.js";
import type { FeatureName, RulesResponse } from "./types.js";
import { FEATURE_NAMES } from "./types.js";

type SliderRange = { min: number; max: number };

let api: Api | null = null;
let session: Session | null = null;
let rules: RulesResponse | null = null;
let modelVersion = "";
let rulesVersion = "";
const sliderRanges = new Map<FeatureName, SliderRange>();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setError(message: string | null): void {
  el("error").innerHTML = renderError(message);
}

function setBadges(): void {
  el("badges").innerHTML = renderVersionBadge(modelVersion, rulesVersion);
}

function renderView(): void {
  if (!session) return;
  const view = session.view;
  el("overrides").innerHTML = renderOverrides(view.whatifOverrides);
  setError(view.error);
  if (view.patient) el("snapshot").innerHTML = renderSnapshot(view.patient);
  if (view.assessment) {
    el("risk").innerHTML = renderRiskPanel(view.assessment);
    el("contributions").innerHTML = renderContributionBars(view.assessment.explanation);
    if (rules) el("trace").innerHTML = renderRuleTrace(rules.table, view.assessment.rule_decision);
    modelVersion = view.assessment.model_version;
    rulesVersion = view.assessment.rules_version;
    setBadges();
  }
}

async function loadRules(): Promise<void> {
  if (!api) return;
  rules = await api.rules();
  rulesVersion = rules.rules_version;
  setBadges();
  el("rules-text").textContent = rules.text;
}

async function loadRevisions(): Promise<void> {
  if (!api) return;
  const doc = await api.revisions();
  el("revisions").innerHTML = renderRevisions(doc.revisions);
}

async function loadPatientList(): Promise<void> {
  if (!api) return;
  const doc = await api.listPatients();
  const select = el<HTMLSelectElement>("patient-select");
  const current = select.value;
  select.innerHTML = doc.patients
    .map((id) => `<option value="${id}">${id}</option>`)
    .join("");
  if (doc.patients.includes(current)) select.value = current;
}

async function loadSliderRanges(): Promise<void> {
  if (!api) return;
  sliderRanges.clear();
  for (const feature of FEATURE_NAMES) {
    try {
      const doc = await api.pdp(feature);
      const grid = doc.curve.grid;
      if (grid.length > 0) {
        sliderRanges.set(feature, { min: grid[0], max: grid[grid.length - 1] });
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 503) break; // no background data
      throw err;
    }
  }
}

function buildSliders(): void {
  const host = el("sliders");
  const snapshot = session?.view.patient?.snapshot;
  const rows = FEATURE_NAMES.map((feature) => {
    const range = sliderRanges.get(feature);
    const value = snapshot ? snapshot[feature] : 0;
    const slider = range
      ? `<input type="range" data-feature="${feature}" min="${fmt(range.min)}" ` +
        `max="${fmt(range.max)}" step="any" value="${fmt(value)}">`
      : `<input type="number" data-feature="${feature}" step="any" value="${fmt(value)}">`;
    return (
      `<label class="slider-row" data-feature="${feature}">` +
      `<span class="feature-name">${feature}</span>${slider}` +
      `<output data-feature="${feature}">${fmt(value)}</output>` +
      `</label>`
    );
  });
  host.innerHTML = rows.join("");
  host.querySelectorAll<HTMLInputElement>("input[data-feature]").forEach((input) => {
    input.addEventListener("input", () => {
      const feature = input.dataset.feature as FeatureName;
      const value = Number(input.value);
      if (!Number.isFinite(value)) return;
      const output = host.querySelector<HTMLOutputElement>(`output[data-feature="${feature}"]`);
      if (output) output.textContent = input.value;
      session?.setOverride(feature, value);
    });
  });
}

async function selectPatient(id: string): Promise<void> {
  if (!api || !session) return;
  const patient = await api.getPatient(id);
  await session.setPatient(patient);
  buildSliders();
}

async function connect(): Promise<void> {
  const baseUrl = el<HTMLInputElement>("base-url").value.trim();
  const token = el<HTMLInputElement>("token").value.trim();
  api = new Api(baseUrl, token);
  session = new Session((req) => {
    if (!api) throw new Error("not connected");
    return api.assess(req);
  });
  session.onChange = renderView;
  try {
    const health = await api.health();
    modelVersion = health.model_version;
    rulesVersion = health.rules_version;
    setBadges();
    await loadRules();
    await loadRevisions();
    await loadPatientList();
    await loadSliderRanges();
    setError(null);
    el("workspace").classList.remove("hidden");
  } catch (err) {
    setError(err instanceof Error ? err.message : String(err));
  }
}

async function createPatient(): Promise<void> {
  if (!api) return;
  const id = el<HTMLInputElement>("create-id").value.trim();
  const text = el<HTMLTextAreaElement>("create-json").value;
  try {
    const baseline = JSON.parse(text);
    await api.createPatient(id, baseline);
    await loadPatientList();
    el<HTMLSelectElement>("patient-select").value = id;
    await selectPatient(id);
    setError(null);
  } catch (err) {
    setError(err instanceof Error ? err.message : String(err));
  }
}

async function handleReview(revisionId: string, verdict: "accept" | "reject"): Promise<void> {
  if (!api || !session) return;
  const reviewer = el<HTMLInputElement>("reviewer").value.trim() || "console";
  try {
    const doc = await api.review(revisionId, verdict, reviewer);
    rulesVersion = doc.rules_version;
    setBadges();
    await loadRules();
    await loadRevisions();
    if (session.view.patient) await session.clearOverrides();
    setError(null);
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      setError("revision was already reviewed elsewhere; panel refreshed");
      await loadRules();
      await loadRevisions();
    } else {
      setError(err instanceof Error ? err.message : String(err));
    }
  }
}

function wire(): void {
  el("connect").addEventListener("click", () => void connect());
  el("load-patient").addEventListener("click", () => {
    const id = el<HTMLSelectElement>("patient-select").value;
    if (id) void selectPatient(id).catch((err) => setError(String(err)));
  });
  el("refresh-patients").addEventListener("click", () => void loadPatientList());
  el("create-patient").addEventListener("click", () => void createPatient());
  el("reset-overrides").addEventListener("click", () => {
    void session?.clearOverrides();
    buildSliders();
  });
  el("revisions").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.dataset.action !== "review") return;
    const revisionId = target.dataset.revisionId;
    const verdict = target.dataset.verdict as "accept" | "reject";
    if (revisionId && (verdict === "accept" || verdict === "reject")) {
      void handleReview(revisionId, verdict);
    }
  });
}

document.addEventListener("DOMContentLoaded", wire);
