"""Patient feature schema: the 10-field lab/demographic vector.

Feature order is fixed and shared by every model, rule table, and wire
format in the package. Gender is encoded 0 = female, 1 = male. A missing
albumin/globulin ratio is represented as NaN until imputation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ValidationError

FEATURE_NAMES: tuple[str, ...] = (
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
)

N_FEATURES = len(FEATURE_NAMES)
GENDER_INDEX = FEATURE_NAMES.index("gender")

# Plausible lab ranges used by the synthetic generator and UI sliders.
# (lo, hi) in each feature's native unit.
PLAUSIBLE_RANGES: dict[str, tuple[float, float]] = {
    "age": (18.0, 90.0),
    "gender": (0.0, 1.0),
    "total_bilirubin": (0.1, 20.0),
    "direct_bilirubin": (0.0, 10.0),
    "alp": (40.0, 400.0),
    "alt": (5.0, 350.0),
    "ast": (5.0, 350.0),
    "total_proteins": (4.0, 9.5),
    "albumin": (1.5, 5.5),
    "ag_ratio": (0.3, 2.5),
}


@dataclass(frozen=True)
class PatientFeatures:
    """One patient's feature vector. Values are floats in native units."""

    age: float
    gender: float
    total_bilirubin: float
    direct_bilirubin: float
    alp: float
    alt: float
    ast: float
    total_proteins: float
    albumin: float
    ag_ratio: float

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in FEATURE_NAMES], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "PatientFeatures":
        vals = [float(v) for v in arr]
        if len(vals) != N_FEATURES:
            raise ValidationError(f"expected {N_FEATURES} feature values, got {len(vals)}")
        return cls(*vals)

    @classmethod
    def from_dict(cls, d: dict) -> "PatientFeatures":
        missing = [n for n in FEATURE_NAMES if n not in d]
        if missing:
            raise ValidationError(f"missing features: {', '.join(missing)}", field=missing[0])
        extra = [k for k in d if k not in FEATURE_NAMES]
        if extra:
            raise ValidationError(f"unknown features: {', '.join(sorted(extra))}", field=extra[0])
        return cls(**{n: float(d[n]) for n in FEATURE_NAMES})

    def as_dict(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in FEATURE_NAMES}

    def replace(self, **overrides) -> "PatientFeatures":
        for k, v in overrides.items():
            if k not in FEATURE_NAMES:
                raise ValidationError(f"unknown feature: {k}", field=k)
            if not math.isfinite(float(v)):
                raise ValidationError(f"{k} must be finite", field=k)
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def is_complete(self) -> bool:
        """True when every field is finite (post-imputation contract)."""
        return all(math.isfinite(getattr(self, f.name)) for f in fields(self))


@dataclass(frozen=True)
class LabeledRecord:
    features: PatientFeatures
    risk: int  # 0 = no risk, 1 = risk

    def __post_init__(self):
        if self.risk not in (0, 1):
            raise ValidationError(f"risk must be 0 or 1, got {self.risk}", field="risk")


def check_feature_name(name: str) -> str:
    if name not in FEATURE_NAMES:
        raise ValidationError(f"unknown feature: {name}", field=name)
    return name


def validate_features(p: PatientFeatures, require_complete: bool = True) -> list[str]:
    """Sanity-check a feature vector.

    Returns a list of non-fatal flags (e.g. direct > total bilirubin).
    Raises ValidationError for out-of-contract values.
    """
    flags = []
    for name in FEATURE_NAMES:
        v = getattr(p, name)
        if math.isnan(v):
            if name == "ag_ratio" and not require_complete:
                continue
            raise ValidationError(f"{name} is missing", field=name)
        if not math.isfinite(v):
            raise ValidationError(f"{name} must be finite", field=name)
        if name == "gender":
            if v not in (0.0, 1.0):
                raise ValidationError("gender must be encoded 0 (female) or 1 (male)", field=name)
        elif v < 0:
            raise ValidationError(f"{name} must be >= 0", field=name)
    if (
        math.isfinite(p.direct_bilirubin)
        and math.isfinite(p.total_bilirubin)
        and p.direct_bilirubin > p.total_bilirubin
    ):
        flags.append("direct_bilirubin exceeds total_bilirubin")
    return flags
