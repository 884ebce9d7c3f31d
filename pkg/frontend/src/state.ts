// Session state for the what-if console.
//
// Two invariants drive the design:
//  - the rendered assessment always corresponds to (patient snapshot + the
//    overrides as last fetched); responses superseded by a newer request are
//    dropped, so the view never mixes two assessments;
//  - slider moves are debounced (250 ms, last request wins) so exploration
//    does not flood the service.
//
// The assess call and the timer are injected, which keeps the sequencing
// logic testable without a server or real clocks.

import type {
  AssessRequest,
  AssessmentResponse,
  FeatureMap,
  FeatureName,
  RevisionEntry,
  TwinState,
} from "./types.js";

export interface SessionView {
  patient: TwinState | null;
  assessment: AssessmentResponse | null;
  whatifOverrides: Partial<FeatureMap>;
  pendingRevisions: RevisionEntry[];
  error: string | null;
}

export type AssessFn = (req: AssessRequest) => Promise<AssessmentResponse>;

export interface Scheduler {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const realScheduler: Scheduler = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export class Session {
  view: SessionView = {
    patient: null,
    assessment: null,
    whatifOverrides: {},
    pendingRevisions: [],
    error: null,
  };
  debounceMs = 250;
  onChange: (view: SessionView) => void = () => {};

  private assessFn: AssessFn;
  private scheduler: Scheduler;
  private seq = 0; // sequence of issued requests
  private applied = 0; // highest sequence whose response reached the view
  private timer: unknown = null;
  private inFlight: Promise<void> | null = null;

  constructor(assessFn: AssessFn, scheduler: Scheduler = realScheduler) {
    this.assessFn = assessFn;
    this.scheduler = scheduler;
  }

  /** Select a patient; clears overrides and reassesses immediately. */
  setPatient(patient: TwinState): Promise<void> {
    this.view.patient = patient;
    this.view.whatifOverrides = {};
    this.view.error = null;
    return this.launch();
  }

  /** Move one slider; the reassessment is debounced, last value wins. */
  setOverride(feature: FeatureName, value: number): void {
    this.view.whatifOverrides = { ...this.view.whatifOverrides, [feature]: value };
    this.onChange(this.view);
    this.schedule();
  }

  clearOverride(feature: FeatureName): void {
    const next = { ...this.view.whatifOverrides };
    delete next[feature];
    this.view.whatifOverrides = next;
    this.onChange(this.view);
    this.schedule();
  }

  /** Drop all overrides and return to the baseline assessment. */
  clearOverrides(): Promise<void> {
    this.view.whatifOverrides = {};
    this.onChange(this.view);
    return this.launch();
  }

  /** Run any pending debounced call now and wait for the newest response. */
  async flush(): Promise<void> {
    if (this.timer !== null) {
      this.scheduler.clear(this.timer);
      this.timer = null;
      await this.launch();
      return;
    }
    if (this.inFlight) await this.inFlight;
  }

  private schedule(): void {
    if (this.timer !== null) this.scheduler.clear(this.timer);
    this.timer = this.scheduler.set(() => {
      this.timer = null;
      void this.launch();
    }, this.debounceMs);
  }

  private launch(): Promise<void> {
    const patient = this.view.patient;
    if (!patient) return Promise.resolve();
    const mySeq = ++this.seq;
    const req: AssessRequest = { patient_id: patient.patient_id };
    const overrides = this.view.whatifOverrides;
    if (Object.keys(overrides).length > 0) req.overrides = { ...overrides };
    const run = this.assessFn(req).then(
      (assessment) => {
        if (mySeq <= this.applied) return; // superseded; drop silently
        this.applied = mySeq;
        this.view.assessment = assessment;
        this.view.error = null;
        this.onChange(this.view);
      },
      (err: unknown) => {
        if (mySeq <= this.applied) return;
        this.applied = mySeq;
        // keep the entered overrides and the last good assessment on screen
        this.view.error = err instanceof Error ? err.message : String(err);
        this.onChange(this.view);
      },
    );
    this.inFlight = run;
    return run;
  }
}
