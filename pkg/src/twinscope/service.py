"""HTTP JSON API: prediction, explanation, PDP, rules, what-if, twins, revisions.

All responses are serialized through one canonical JSON encoder (sorted
keys, compact separators), so identical state yields byte-identical
bodies: repeated GETs are reproducible, and a what-if override equal to
the current snapshot returns exactly the bytes of the no-override call.

Auth is a single shared bearer token from TWINSCOPE_TOKEN (or the app
factory argument). /health is open; every other endpoint requires
`Authorization: Bearer <token>` when a token is configured.

Mutations (observations, revision review) are serialized: the twin
store locks per patient, and rule changes go through one writer lock.
Reads see a consistent (model_version, rules_version) pair because the
rules state is swapped atomically as one immutable object.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass

from fastapi import FastAPI, Request, Response

from .data import impute
from .errors import (
    AmbiguousMatchError,
    ConflictError,
    LoadError,
    NotFoundError,
    StaleRevisionError,
    TwinscopeError,
    ValidationError,
)
from .explain import SurrogateConfig, explain_instance, pdp
from .features import PatientFeatures, validate_features
from .model_io import ModelArtifact, artifact_stats, load_model
from .reconcile import RuleRevision, apply_revision
from .rules import DecisionTable, evaluate, parse_table, print_expr, print_table
from .twinstore import Observation, TwinStore
from .util import content_hash, stable_seed

TOKEN_ENV = "TWINSCOPE_TOKEN"
DATA_DIR_ENV = "TWINSCOPE_DATA_DIR"


def canonical_body(payload) -> bytes:
    return (json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode(
        "utf-8"
    )


def _json(payload, status: int = 200) -> Response:
    return Response(content=canonical_body(payload), status_code=status, media_type="application/json")


def _error(status: int, error: str, detail: str, fieldname: str | None = None) -> Response:
    body = {"error": error, "detail": detail}
    if fieldname is not None:
        body["field"] = fieldname
    return _json(body, status=status)


@dataclass(frozen=True)
class _Rules:
    """Immutable rules snapshot, swapped atomically on accept."""

    table: DecisionTable
    text: str
    version: str


def _rules_state(table: DecisionTable) -> _Rules:
    text = print_table(table)
    return _Rules(table=table, text=text, version=content_hash(text))


def _table_json(t: DecisionTable) -> dict:
    return {
        "name": t.name,
        "inputs": list(t.inputs),
        "hit_policy": t.hit_policy.value,
        "priority_order": [l.value for l in t.priority_order] if t.priority_order else None,
        "notes": list(t.notes),
        "rows": [
            {
                "cells": [print_expr(c) for c in row.cells],
                "output": row.output.value,
                "annotation": row.annotation,
            }
            for row in t.rows
        ],
    }


def _decision_json(decision) -> dict:
    return {
        "outcome": decision.outcome.value if decision.outcome else None,
        "matched_rows": list(decision.matched_rows),
        "trace": [list(row) for row in decision.trace],
    }


class ServiceCore:
    """State + operations behind the HTTP layer, testable without a server."""

    def __init__(
        self,
        artifact: ModelArtifact,
        table: DecisionTable,
        store: TwinStore,
        rules_path: str | None = None,
        revisions: list[RuleRevision] | None = None,
    ):
        self.artifact = artifact
        self.store = store
        self.rules_path = rules_path
        self.rules = _rules_state(table)
        self.pending: dict[str, RuleRevision] = {}
        for rev in revisions or []:
            if rev.status == "pending":
                self.pending[rev.revision_id] = rev
        self.archived: list[dict] = []
        self._write_lock = threading.Lock()

    # -- assessment ---------------------------------------------------------

    def resolve_features(self, body: dict) -> tuple[PatientFeatures, int]:
        has_pid = "patient_id" in body and body["patient_id"] is not None
        has_feats = "features" in body and body["features"] is not None
        if has_pid == has_feats:
            raise ValidationError("provide exactly one of patient_id or features")
        if has_pid:
            feats = self.store.snapshot_features(str(body["patient_id"]))
            default_seed = stable_seed("assess", str(body["patient_id"]))
        else:
            if not isinstance(body["features"], dict):
                raise ValidationError("features must be an object", field="features")
            feats = PatientFeatures.from_dict(body["features"])
            default_seed = 0  # recomputed from effective features below
        overrides = body.get("overrides") or {}
        if not isinstance(overrides, dict):
            raise ValidationError("overrides must be an object", field="overrides")
        if overrides:
            feats = feats.replace(**overrides)
        if not has_pid:
            default_seed = stable_seed("assess", json.dumps(feats.as_dict(), sort_keys=True))
        return feats, default_seed

    def assess(self, body: dict) -> dict:
        feats, default_seed = self.resolve_features(body)
        validate_features(feats, require_complete=True)
        seed = body.get("seed", None)
        if seed is not None and not isinstance(seed, int):
            raise ValidationError("seed must be an integer", field="seed")
        rules = self.rules
        decision = evaluate(rules.table, feats)
        explanation = explain_instance(
            self.artifact.model,
            feats,
            artifact_stats(self.artifact),
            SurrogateConfig(seed=seed if seed is not None else default_seed),
        )
        return {
            "risk_probability": explanation.prediction,
            "rule_decision": _decision_json(decision),
            "explanation": explanation.as_dict(),
            "model_version": self.artifact.model_hash,
            "rules_version": rules.version,
        }

    # -- revisions ----------------------------------------------------------

    def review(self, revision_id: str, verdict: str, reviewer: str) -> dict:
        if verdict not in ("accept", "reject"):
            raise ValidationError("verdict must be accept or reject", field="verdict")
        with self._write_lock:
            rev = self.pending.get(revision_id)
            if rev is None:
                if any(a["revision"]["revision_id"] == revision_id for a in self.archived):
                    raise ConflictError(f"revision {revision_id} was already reviewed")
                raise NotFoundError(f"no such revision: {revision_id}")
            if verdict == "accept":
                new_table = apply_revision(self.rules.table, rev)  # stale -> conflict
                new_rules = _rules_state(new_table)
                if self.rules_path is not None:
                    tmp = self.rules_path + ".tmp"
                    with open(tmp, "w", encoding="utf-8", newline="") as fh:
                        fh.write(new_rules.text)
                        fh.flush()
                        os.fsync(fh.fileno())
                    os.replace(tmp, self.rules_path)
                self.rules = new_rules
                status = "accepted"
            else:
                status = "rejected"
            del self.pending[revision_id]
            self.archived.append(
                {"revision": rev.with_status(status).as_dict(), "reviewer": str(reviewer)}
            )
            return {"rules_version": self.rules.version}


def load_core(
    model_path,
    rules_path,
    data_dir,
    revisions_path=None,
) -> ServiceCore:
    """Read artifacts and build the service state; fails fast on bad files."""
    artifact = load_model(model_path)
    try:
        with open(rules_path, "r", encoding="utf-8") as fh:
            table = parse_table(fh.read())
    except OSError as exc:
        raise LoadError(f"cannot read rules file {rules_path}: {exc}") from exc
    revisions = []
    if revisions_path is not None:
        try:
            with open(revisions_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise LoadError(f"cannot read revisions file {revisions_path}: {exc}") from exc
        revisions = [RuleRevision.from_dict(d) for d in doc.get("revisions", [])]
    return ServiceCore(
        artifact=artifact,
        table=table,
        store=TwinStore(data_dir),
        rules_path=str(rules_path),
        revisions=revisions,
    )


def create_app(core: ServiceCore, token: str | None = None) -> FastAPI:
    """Wire the HTTP routes around a ServiceCore.

    token=None reads TWINSCOPE_TOKEN; an empty value disables auth (open
    local instance).
    """
    if token is None:
        token = os.environ.get(TOKEN_ENV, "")
    app = FastAPI(title="twinscope", docs_url=None, redoc_url=None, openapi_url=None)

    @app.middleware("http")
    async def _auth(request: Request, call_next):
        if token and request.url.path != "/health":
            header = request.headers.get("authorization", "")
            if header != f"Bearer {token}":
                return _error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.exception_handler(TwinscopeError)
    async def _domain_error(request: Request, exc: TwinscopeError):
        if isinstance(exc, NotFoundError):
            return _error(404, "not_found", str(exc))
        if isinstance(exc, (ConflictError, StaleRevisionError, AmbiguousMatchError)):
            return _error(409, "conflict", str(exc))
        if isinstance(exc, ValidationError):
            return _error(422, "validation", str(exc), fieldname=exc.field)
        if isinstance(exc, LoadError):
            return _error(400, "bad_request", str(exc))
        return _error(400, "bad_request", str(exc))

    async def _body(request: Request) -> dict:
        try:
            doc = json.loads(await request.body() or b"{}")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ValidationError("request body must be a JSON object")
        return doc

    core_ref = core

    @app.get("/health")
    async def health():
        return _json(
            {
                "status": "ok",
                "model_version": core_ref.artifact.model_hash,
                "rules_version": core_ref.rules.version,
            }
        )

    @app.get("/patients")
    async def list_patients():
        return _json({"patients": core_ref.store.patient_ids()})

    @app.post("/patients")
    async def create_patient(request: Request):
        body = await _body(request)
        pid = body.get("id")
        if not isinstance(pid, str):
            raise ValidationError("id must be a string", field="id")
        baseline = body.get("baseline")
        if not isinstance(baseline, dict):
            raise ValidationError("baseline must be an object of all 10 features", field="baseline")
        state = core_ref.store.create_twin(
            pid,
            PatientFeatures.from_dict(baseline),
            observed_at=body.get("observed_at"),
            source=str(body.get("source", "baseline")),
        )
        return _json(state.as_dict(), status=201)

    @app.get("/patients/{patient_id}")
    async def get_patient(patient_id: str):
        return _json(core_ref.store.twin_state(patient_id).as_dict())

    @app.post("/patients/{patient_id}/observations")
    async def add_observation(patient_id: str, request: Request):
        body = await _body(request)
        if "feature" not in body or "value" not in body:
            raise ValidationError("observation needs feature and value", field="feature")
        state = core_ref.store.record_observation(
            Observation(
                patient_id=patient_id,
                feature=str(body["feature"]),
                value=body["value"],
                observed_at=body.get("observed_at"),
                source=str(body.get("source", "")),
            )
        )
        return _json(state.as_dict())

    @app.get("/patients/{patient_id}/history")
    async def patient_history(patient_id: str, feature: str | None = None):
        if not feature:
            raise ValidationError("feature query parameter is required", field="feature")
        series = core_ref.store.history(patient_id, feature)
        return _json(
            {
                "patient_id": patient_id,
                "feature": feature,
                "series": [{"observed_at": t, "value": v} for t, v in series],
            }
        )

    @app.post("/assess")
    async def assess(request: Request):
        return _json(core_ref.assess(await _body(request)))

    @app.get("/pdp")
    async def pdp_endpoint(feature: str | None = None, grid_size: int = 50):
        if not feature:
            raise ValidationError("feature query parameter is required", field="feature")
        if core_ref.artifact.background is None:
            return _error(
                503, "unavailable", "model file carries no background records for PDP grids"
            )
        curve = pdp(
            core_ref.artifact.model,
            impute(core_ref.artifact.background),
            feature,
            grid_size=grid_size,
        )
        return _json({"curve": curve.as_dict(), "model_version": core_ref.artifact.model_hash})

    @app.get("/rules")
    async def rules():
        snap = core_ref.rules
        return _json(
            {"text": snap.text, "table": _table_json(snap.table), "rules_version": snap.version}
        )

    @app.get("/revisions")
    async def revisions():
        entries = [dict(r.as_dict(), reviewer=None) for r in core_ref.pending.values()]
        entries.extend(dict(a["revision"], reviewer=a["reviewer"]) for a in core_ref.archived)
        return _json({"revisions": entries, "rules_version": core_ref.rules.version})

    @app.post("/revisions/{revision_id}/review")
    async def review(revision_id: str, request: Request):
        body = await _body(request)
        result = core_ref.review(
            revision_id, str(body.get("verdict", "")), str(body.get("reviewer", ""))
        )
        return _json(result)

    return app


def serve(
    model_path,
    rules_path,
    data_dir,
    port: int = 8000,
    host: str = "127.0.0.1",
    token: str | None = None,
    revisions_path=None,
) -> None:
    """Blocking entry point used by the CLI."""
    import uvicorn

    core = load_core(model_path, rules_path, data_dir, revisions_path=revisions_path)
    app = create_app(core, token=token)
    uvicorn.run(app, host=host, port=port, log_level="warning")
