"""Event-sourced per-patient state ("digital twin") on append-only logs.

Each patient owns one log file named exactly after the patient id. Every
line is one observation event, newline-delimited JSON:

    {"feature": "alt", "value": 50.0, "observed_at": "...", "source": "..."}

The current snapshot is a pure fold over the log: for each feature the
winning value comes from the event with the greatest (observed_at,
ingestion order) pair, so a backdated correction never overrides a newer
measurement, and replaying a log always reproduces the same snapshot.
Creating a twin seeds the log with one observation per feature from a
complete baseline, so snapshots stay complete forever after.

Crash tolerance: a record is committed only once its newline lands. An
unterminated final line is a torn write: it is ignored with a warning
and truncated by the next append. Any earlier unreadable record raises
CorruptLogError naming the byte offset. Appends flush and fsync before
returning, so an acknowledged observation survives a crash.
"""

from __future__ import annotations

import json
import math
import os
import re
import threading
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import ConflictError, CorruptLogError, NotFoundError, ValidationError
from .features import FEATURE_NAMES, PatientFeatures, check_feature_name, validate_features

_PATIENT_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]{0,63}$")


def check_patient_id(patient_id: str) -> str:
    if not isinstance(patient_id, str) or not _PATIENT_ID_RE.match(patient_id):
        raise ValidationError(
            "patient id must be 1-64 characters of [A-Za-z0-9_-], starting alphanumeric",
            field="patient_id",
        )
    return patient_id


def canonical_timestamp(ts: str | None = None) -> str:
    """Normalize to ISO-8601 UTC at millisecond precision with a Z suffix.

    Canonical timestamps sort lexicographically in time order. Naive
    inputs are taken as UTC; None means now.
    """
    if ts is None:
        dt = datetime.now(timezone.utc)
    else:
        try:
            dt = datetime.fromisoformat(str(ts).replace("Z", "+00:00"))
        except ValueError as exc:
            raise ValidationError(f"bad timestamp {ts!r}: {exc}", field="observed_at") from exc
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        dt = dt.astimezone(timezone.utc)
    return f"{dt.strftime('%Y-%m-%dT%H:%M:%S')}.{dt.microsecond // 1000:03d}Z"


def _check_value(feature: str, value) -> float:
    check_feature_name(feature)
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{feature} must be a number, got {value!r}", field=feature)
    if not math.isfinite(v):
        raise ValidationError(f"{feature} must be finite", field=feature)
    if feature == "gender":
        if v not in (0.0, 1.0):
            raise ValidationError("gender must be encoded 0 (female) or 1 (male)", field=feature)
    elif v < 0:
        raise ValidationError(f"{feature} must be >= 0", field=feature)
    return v


@dataclass(frozen=True)
class Observation:
    """One event: a single feature measured for one patient."""

    patient_id: str
    feature: str
    value: float
    observed_at: str | None = None  # None: now; normalized on ingestion
    source: str = ""

    def normalized(self) -> "Observation":
        return Observation(
            patient_id=check_patient_id(self.patient_id),
            feature=self.feature,
            value=_check_value(self.feature, self.value),
            observed_at=canonical_timestamp(self.observed_at),
            source=str(self.source),
        )


@dataclass(frozen=True)
class TwinState:
    """Snapshot of a patient: the fold of every committed observation."""

    patient_id: str
    snapshot: PatientFeatures
    log_length: int
    updated_at: str

    def as_dict(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "snapshot": self.snapshot.as_dict(),
            "log_length": self.log_length,
            "updated_at": self.updated_at,
        }


@dataclass
class _LogRecord:
    feature: str
    value: float
    observed_at: str
    seq: int
    source: str = ""


@dataclass
class _LogScan:
    records: list[_LogRecord] = field(default_factory=list)
    valid_bytes: int = 0
    torn_tail: bool = False


def _scan_log(path: str) -> _LogScan:
    scan = _LogScan()
    with open(path, "rb") as fh:
        data = fh.read()
    # A record is committed only once its newline lands; an unterminated
    # tail is a torn write, ignored here and truncated by the next append.
    end = data.rfind(b"\n") + 1
    scan.torn_tail = end < len(data)
    scan.valid_bytes = end
    if scan.torn_tail:
        warnings.warn(f"torn trailing record in {path} ignored (byte {end})")
    offset = 0
    for raw in data[:end].split(b"\n")[:-1] if end else []:
        if raw == b"":
            offset += 1
            continue
        try:
            doc = json.loads(raw.decode("utf-8"))
            if not isinstance(doc, dict):
                raise ValueError("record is not an object")
            rec = _LogRecord(
                feature=doc["feature"],
                value=_check_value(doc["feature"], doc["value"]),
                observed_at=canonical_timestamp(doc["observed_at"]),
                seq=len(scan.records),
                source=str(doc.get("source", "")),
            )
        except (ValueError, KeyError, TypeError, ValidationError, UnicodeDecodeError) as exc:
            raise CorruptLogError(
                f"unreadable record at byte {offset}: {exc}", path=str(path), offset=offset
            ) from exc
        scan.records.append(rec)
        offset += len(raw) + 1
    return scan


def _fold(patient_id: str, records: list[_LogRecord]) -> TwinState:
    winners: dict[str, tuple[tuple[str, int], float]] = {}
    updated_at = ""
    for rec in records:
        key = (rec.observed_at, rec.seq)
        if rec.observed_at > updated_at:
            updated_at = rec.observed_at
        cur = winners.get(rec.feature)
        if cur is None or key > cur[0]:
            winners[rec.feature] = (key, rec.value)
    snapshot = PatientFeatures(
        **{n: winners[n][1] if n in winners else float("nan") for n in FEATURE_NAMES}
    )
    return TwinState(
        patient_id=patient_id,
        snapshot=snapshot,
        log_length=len(records),
        updated_at=updated_at,
    )


def _encode(rec: dict) -> bytes:
    line = json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
    return line.encode("utf-8")


class TwinStore:
    """Directory of per-patient append-only logs.

    Single-writer, multi-reader per patient within a process: one lock
    per patient serializes appends so concurrent writers never
    interleave partial lines, and readers fold a consistent prefix.
    """

    def __init__(self, data_dir):
        self.data_dir = str(data_dir)
        os.makedirs(self.data_dir, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, patient_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(patient_id, threading.Lock())

    def _path(self, patient_id: str) -> str:
        return os.path.join(self.data_dir, check_patient_id(patient_id))

    def exists(self, patient_id: str) -> bool:
        return os.path.exists(self._path(patient_id))

    def patient_ids(self) -> list[str]:
        return sorted(e for e in os.listdir(self.data_dir) if _PATIENT_ID_RE.match(e))

    def _append_records(self, patient_id: str, path: str, scan: _LogScan, recs: list[dict]) -> None:
        payload = b"".join(_encode(r) for r in recs)
        present = os.path.exists(path)
        with open(path, "r+b" if present else "xb") as fh:
            if present:
                fh.truncate(scan.valid_bytes)  # drop any torn tail
                fh.seek(scan.valid_bytes)
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())

    def create_twin(self, patient_id: str, baseline,
                    observed_at: str | None = None, source: str = "baseline") -> TwinState:
        """Start a patient log, seeded with one observation per feature.

        baseline is a PatientFeatures or a complete feature mapping.
        """
        path = self._path(patient_id)
        if not isinstance(baseline, PatientFeatures):
            baseline = PatientFeatures.from_dict(baseline)
        validate_features(baseline, require_complete=True)
        ts = canonical_timestamp(observed_at)
        with self._lock(patient_id):
            if os.path.exists(path):
                raise ConflictError(f"patient already exists: {patient_id}")
            recs = [
                {"feature": n, "value": getattr(baseline, n), "observed_at": ts, "source": source}
                for n in FEATURE_NAMES
            ]
            self._append_records(patient_id, path, _LogScan(), recs)
            return _fold(patient_id, [
                _LogRecord(feature=r["feature"], value=r["value"], observed_at=ts, seq=i, source=source)
                for i, r in enumerate(recs)
            ])

    def record_observation(self, obs: Observation) -> TwinState:
        """Durably append one observation and return the updated snapshot."""
        obs = obs.normalized()
        path = self._path(obs.patient_id)
        with self._lock(obs.patient_id):
            if not os.path.exists(path):
                raise NotFoundError(f"no such patient: {obs.patient_id}")
            scan = _scan_log(path)
            rec = {
                "feature": obs.feature,
                "value": obs.value,
                "observed_at": obs.observed_at,
                "source": obs.source,
            }
            self._append_records(obs.patient_id, path, scan, [rec])
            scan.records.append(
                _LogRecord(
                    feature=obs.feature, value=obs.value, observed_at=obs.observed_at,
                    seq=len(scan.records), source=obs.source,
                )
            )
            return _fold(obs.patient_id, scan.records)

    def twin_state(self, patient_id: str) -> TwinState:
        path = self._path(patient_id)
        with self._lock(patient_id):
            if not os.path.exists(path):
                raise NotFoundError(f"no such patient: {patient_id}")
            return _fold(patient_id, _scan_log(path).records)

    def snapshot_features(self, patient_id: str) -> PatientFeatures:
        return self.twin_state(patient_id).snapshot

    def history(self, patient_id: str, feature: str) -> list[tuple[str, float]]:
        """All observations of one feature, ascending observed_at, stable
        for equal timestamps (ingestion order)."""
        check_feature_name(feature)
        path = self._path(patient_id)
        with self._lock(patient_id):
            if not os.path.exists(path):
                raise NotFoundError(f"no such patient: {patient_id}")
            recs = [r for r in _scan_log(path).records if r.feature == feature]
        recs.sort(key=lambda r: (r.observed_at, r.seq))
        return [(r.observed_at, r.value) for r in recs]

    def reload(self) -> dict[str, TwinState]:
        """Replay every persisted log; the recovery path after a restart."""
        return {pid: self.twin_state(pid) for pid in self.patient_ids()}

    def delete(self, patient_id: str) -> None:
        path = self._path(patient_id)
        with self._lock(patient_id):
            if not os.path.exists(path):
                raise NotFoundError(f"no such patient: {patient_id}")
            os.remove(path)
