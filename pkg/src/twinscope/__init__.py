"""Clinical decision support around a per-patient digital twin.

A liver-disease risk model (a small random forest or a logistic
baseline) runs next to an authored decision table. Local surrogate
explanations and partial dependence curves make the model legible, and
a reconciliation pass compares authored rule thresholds against the
empirical curves, proposing revisions for human review. Patient state
lives in append-only observation logs that fold into snapshots.
"""

from .data import (
    Dataset,
    FeatureStats,
    SplitSpec,
    ThresholdRule,
    fetch_ilpd,
    impute,
    load_dataset,
    load_ilpd,
    parse_threshold_rule,
    save_canonical,
    split,
    synth_generate,
)
from .errors import (
    AmbiguousMatchError,
    ConflictError,
    CorruptLogError,
    ExplainError,
    FlatCurveError,
    LoadError,
    NoCrossingError,
    NotFoundError,
    RuleParseError,
    StaleRevisionError,
    TrainingError,
    TwinscopeError,
    ValidationError,
)
from .explain import (
    Explanation,
    PdpCurve,
    SurrogateConfig,
    aggregate_explanations,
    explain_instance,
    pdp,
    pdp_flatness,
)
from .features import (
    FEATURE_NAMES,
    GENDER_INDEX,
    N_FEATURES,
    LabeledRecord,
    PatientFeatures,
    validate_features,
)
from .forest import ForestConfig, ForestModel, SplitAudit, Tree, predict_proba, train_forest
from .logistic import LogisticModel, train_logistic
from .metrics import EvalReport, LearningCurvePoint, evaluate_model, learning_curve
from .model_io import ModelArtifact, load_model, save_model
from .reconcile import (
    ReconcileConfig,
    RuleRevision,
    apply_revision,
    empirical_threshold,
    propose_revisions,
)
from .rules import (
    DecisionTable,
    HitPolicy,
    RiskLevel,
    RuleRow,
    TableDecision,
    default_liver_table,
    evaluate,
    make_table,
    parse_expr,
    parse_table,
    print_expr,
    print_table,
)
from .twinstore import Observation, TwinState, TwinStore, canonical_timestamp

__version__ = "0.1.0"

__all__ = [
    "AmbiguousMatchError",
    "ConflictError",
    "CorruptLogError",
    "Dataset",
    "DecisionTable",
    "EvalReport",
    "ExplainError",
    "Explanation",
    "FEATURE_NAMES",
    "FeatureStats",
    "FlatCurveError",
    "ForestConfig",
    "ForestModel",
    "GENDER_INDEX",
    "HitPolicy",
    "LabeledRecord",
    "LearningCurvePoint",
    "LoadError",
    "LogisticModel",
    "ModelArtifact",
    "N_FEATURES",
    "NoCrossingError",
    "NotFoundError",
    "Observation",
    "PatientFeatures",
    "PdpCurve",
    "ReconcileConfig",
    "RiskLevel",
    "RuleParseError",
    "RuleRevision",
    "RuleRow",
    "SplitAudit",
    "SplitSpec",
    "StaleRevisionError",
    "SurrogateConfig",
    "TableDecision",
    "ThresholdRule",
    "TrainingError",
    "Tree",
    "TwinState",
    "TwinStore",
    "TwinscopeError",
    "ValidationError",
    "aggregate_explanations",
    "apply_revision",
    "canonical_timestamp",
    "default_liver_table",
    "empirical_threshold",
    "evaluate",
    "evaluate_model",
    "explain_instance",
    "fetch_ilpd",
    "impute",
    "learning_curve",
    "load_dataset",
    "load_ilpd",
    "load_model",
    "make_table",
    "parse_expr",
    "parse_table",
    "parse_threshold_rule",
    "pdp",
    "pdp_flatness",
    "predict_proba",
    "print_expr",
    "print_table",
    "propose_revisions",
    "save_canonical",
    "save_model",
    "split",
    "synth_generate",
    "train_forest",
    "train_logistic",
    "validate_features",
]
