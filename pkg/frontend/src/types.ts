// Shapes of the service's JSON bodies. The console computes no risk, rule,
// or contribution logic itself; every number on screen originates in one of
// these responses.

export const FEATURE_NAMES = [
  "age",
  "gender",
  "total_bilirubin",
  "direct_bilirubin",
  "alp",
  "alt",
  "ast",
  "total_proteins",
  "albumin",
  "ag_ratio",
] as const;

export type FeatureName = (typeof FEATURE_NAMES)[number];

export type FeatureMap = Record<FeatureName, number>;

export interface HealthDoc {
  status: string;
  model_version: string;
  rules_version: string;
}

export interface TwinState {
  patient_id: string;
  snapshot: FeatureMap;
  log_length: number;
  updated_at: string;
}

export interface Explanation {
  instance: FeatureMap;
  prediction: number;
  contributions: FeatureMap;
  intercept: number;
  local_fidelity: number;
}

export interface RuleDecision {
  outcome: string | null;
  matched_rows: number[];
  trace: boolean[][];
}

export interface AssessmentResponse {
  risk_probability: number;
  rule_decision: RuleDecision;
  explanation: Explanation;
  model_version: string;
  rules_version: string;
}

export interface RuleRowDoc {
  cells: string[];
  output: string;
  annotation: string;
}

export interface RuleTableDoc {
  name: string;
  inputs: string[];
  hit_policy: string;
  priority_order: string[] | null;
  notes: string[];
  rows: RuleRowDoc[];
}

export interface RulesResponse {
  text: string;
  table: RuleTableDoc;
  rules_version: string;
}

export interface CurveDoc {
  feature: string;
  grid: number[];
  pdp: number[];
  range_effect: number;
}

export interface PdpResponse {
  curve: CurveDoc;
  model_version: string;
}

export interface RevisionEntry {
  revision_id: string;
  table: string;
  row: number;
  column: string;
  old_expr: string;
  proposed_expr: string;
  empirical_threshold: number;
  corroboration: number;
  support: number;
  method: string;
  annotation: string;
  status: string;
  reviewer: string | null;
  curve: CurveDoc;
}

export interface RevisionsResponse {
  revisions: RevisionEntry[];
  rules_version: string;
}

export interface ErrorBody {
  error: string;
  detail: string;
  field?: string;
}

export interface AssessRequest {
  patient_id?: string;
  features?: FeatureMap;
  overrides?: Partial<FeatureMap>;
  seed?: number;
}
