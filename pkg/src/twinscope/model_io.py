"""Versioned JSON persistence for trained models.

A model file is a single self-describing JSON document: format tag,
format version, model kind, full training configuration, the training
feature statistics, the learned parameters, and (optionally) the
background training records the model was fit on. Backgrounds let a
served model answer partial-dependence and reconciliation queries
without re-reading the training CSV.

Floats are written through json's repr-based encoder, which is exact
for binary64, so save -> load -> save reproduces the file byte for
byte. The model hash identifies the parameters + config payload and is
used for version pinning by the service.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureStats
from .errors import LoadError
from .features import FEATURE_NAMES, LabeledRecord, PatientFeatures
from .forest import ForestConfig, ForestModel, Tree
from .logistic import LogisticModel
from .util import content_hash

MODEL_FORMAT = "twinscope-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ModelArtifact:
    kind: str  # "forest" or "logistic"
    model: ForestModel | LogisticModel
    background: Dataset | None
    model_hash: str

    def predict_proba_batch(self, X):
        return self.model.predict_proba_batch(X)


def _tree_to_dict(tree: Tree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "proba": tree.proba.tolist(),
    }


def _tree_from_dict(d: dict) -> Tree:
    return Tree(
        feature=np.array(d["feature"], dtype=np.int32),
        threshold=np.array(d["threshold"], dtype=float),
        left=np.array(d["left"], dtype=np.int32),
        right=np.array(d["right"], dtype=np.int32),
        proba=np.array(d["proba"], dtype=float),
    )


def _background_to_dict(ds: Dataset) -> dict:
    rows = []
    for r in ds.records:
        rows.append([float(getattr(r.features, n)) for n in FEATURE_NAMES] + [int(r.risk)])
    return {"rows": rows, "stats": ds.stats.as_dict()}


def _background_from_dict(d: dict) -> Dataset:
    records = []
    for row in d["rows"]:
        records.append(LabeledRecord(features=PatientFeatures(*row[:-1]), risk=int(row[-1])))
    return Dataset.from_records(records, stats=FeatureStats.from_dict(d["stats"]))


def model_to_dict(model: ForestModel | LogisticModel, background: Dataset | None = None) -> dict:
    if isinstance(model, ForestModel):
        payload = {
            "kind": "forest",
            "config": {
                "n_trees": model.config.n_trees,
                "max_depth": model.config.max_depth,
                "min_samples_leaf": model.config.min_samples_leaf,
                "features_per_split": model.config.features_per_split,
                "seed": model.config.seed,
            },
            "feature_stats": model.training_stats.as_dict(),
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    elif isinstance(model, LogisticModel):
        payload = {
            "kind": "logistic",
            "weights": model.weights.tolist(),
            "mean": model.mean.tolist(),
            "std": model.std.tolist(),
        }
    else:
        raise TypeError(f"cannot serialize model of type {type(model).__name__}")
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "feature_names": list(FEATURE_NAMES),
        "model_hash": content_hash(payload),
        **payload,
    }
    if background is not None:
        doc["background"] = _background_to_dict(background)
    return doc


def model_from_dict(doc: dict) -> ModelArtifact:
    if doc.get("format") != MODEL_FORMAT:
        raise LoadError(f"not a model file (format tag {doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise LoadError(f"unsupported model file version {doc.get('version')!r}")
    if doc.get("feature_names") != list(FEATURE_NAMES):
        raise LoadError("model file was built for a different feature set")
    kind = doc.get("kind")
    if kind == "forest":
        cfg = ForestConfig(**doc["config"]).validate()
        model: ForestModel | LogisticModel = ForestModel(
            trees=tuple(_tree_from_dict(t) for t in doc["trees"]),
            config=cfg,
            training_stats=FeatureStats.from_dict(doc["feature_stats"]),
        )
    elif kind == "logistic":
        model = LogisticModel(
            weights=np.array(doc["weights"], dtype=float),
            mean=np.array(doc["mean"], dtype=float),
            std=np.array(doc["std"], dtype=float),
        )
    else:
        raise LoadError(f"unknown model kind {kind!r}")
    background = _background_from_dict(doc["background"]) if "background" in doc else None
    return ModelArtifact(kind=kind, model=model, background=background, model_hash=doc["model_hash"])


def dumps_model(model, background: Dataset | None = None) -> str:
    """Deterministic single-line JSON text for the model document."""
    return json.dumps(
        model_to_dict(model, background), sort_keys=True, separators=(",", ":"), allow_nan=False
    ) + "\n"


def save_model(model, path, background: Dataset | None = None) -> str:
    """Write the model document; returns its model hash."""
    text = dumps_model(model, background)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return json.loads(text)["model_hash"]


def load_model(path) -> ModelArtifact:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise LoadError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise LoadError(f"model file {path} does not hold a JSON object")
    return model_from_dict(doc)


def artifact_stats(artifact: ModelArtifact) -> FeatureStats:
    """Training feature statistics for explanation sampling and grids."""
    if artifact.background is not None:
        return artifact.background.stats
    if isinstance(artifact.model, ForestModel):
        return artifact.model.training_stats
    raise LoadError("model file carries no feature statistics; save it with background records")
