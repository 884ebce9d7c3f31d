"""Command-line driver for the pipeline.

Subcommands: fetch-data, gen-data, train, curve, explain, pdp,
rules check, rules eval, reconcile, serve.

Every randomized subcommand requires --seed, and every subcommand echoes
the effective configuration it ran with (a `config:` line, or the
"config" key under --json), so a printed run can be reproduced exactly.
Defaults may be collected in a JSON config file (--config) with
per-section keys: forest, split, surrogate, reconcile; explicit flags
win over file values. Primary artifacts (model files, CSVs) are
byte-identical across reruns with identical inputs and seeds.

Exit status: 0 success, 1 operation error (diagnostic on stderr),
2 usage error. Output is plain text (no color).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .data import (
    SplitSpec,
    fetch_ilpd,
    impute,
    load_dataset,
    save_canonical,
    split,
    synth_generate,
)
from .errors import TwinscopeError, ValidationError
from .explain import SurrogateConfig, explain_instance, pdp
from .features import FEATURE_NAMES, PatientFeatures
from .forest import ForestConfig, train_forest
from .logistic import train_logistic
from .metrics import curve_to_csv, evaluate_model, learning_curve
from .model_io import artifact_stats, load_model, save_model
from .reconcile import ReconcileConfig, propose_revisions
from .rules import evaluate, parse_table
from .service import DATA_DIR_ENV, serve
from .util import canonical_json


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}", field="config")
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold a JSON object", field="config")
    return doc


def _merged(section: dict, flags: dict, defaults) -> dict:
    """Effective settings: flag > config-file section > dataclass default."""
    out = {}
    for key, default in defaults.items():
        if flags.get(key) is not None:
            out[key] = flags[key]
        elif key in section:
            out[key] = section[key]
        else:
            out[key] = default
    return out


def _forest_config(args, cfg_file: dict, seed: int) -> ForestConfig:
    section = cfg_file.get("forest", {})
    flags = {
        "n_trees": args.trees,
        "max_depth": args.max_depth,
        "min_samples_leaf": args.min_leaf,
        "features_per_split": args.features_per_split,
    }
    defaults = {
        "n_trees": ForestConfig.n_trees,
        "max_depth": ForestConfig.max_depth,
        "min_samples_leaf": ForestConfig.min_samples_leaf,
        "features_per_split": ForestConfig.features_per_split,
    }
    return ForestConfig(seed=seed, **_merged(section, flags, defaults)).validate()


def _split_spec(args, cfg_file: dict, seed: int) -> SplitSpec:
    section = cfg_file.get("split", {})
    flags = {
        "train_fraction": getattr(args, "train_fraction", None),
        "stratified": (False if getattr(args, "no_stratify", False) else None),
    }
    defaults = {"train_fraction": 0.8, "stratified": True}
    return SplitSpec(seed=seed, **_merged(section, flags, defaults))


def _surrogate_config(args, cfg_file: dict, seed: int) -> SurrogateConfig:
    section = cfg_file.get("surrogate", {})
    flags = {
        "n_samples": getattr(args, "n_samples", None),
        "kernel_width": getattr(args, "kernel_width", None),
        "ridge_lambda": getattr(args, "ridge_lambda", None),
        "discretize": (True if getattr(args, "discretize", False) else None),
    }
    defaults = {
        "n_samples": SurrogateConfig.n_samples,
        "kernel_width": SurrogateConfig.kernel_width,
        "ridge_lambda": SurrogateConfig.ridge_lambda,
        "discretize": SurrogateConfig.discretize,
    }
    return SurrogateConfig(seed=seed, **_merged(section, flags, defaults)).validate()


def _reconcile_config(args, cfg_file: dict, seed: int) -> ReconcileConfig:
    section = cfg_file.get("reconcile", {})
    level = args.level
    if level is not None and level != "midpoint":
        level = float(level)
    flags = {
        "min_relative_shift": args.min_shift,
        "crossing_level": level,
        "grid_size": args.grid_size,
        "n_instances": args.n_instances,
        "surrogate_samples": args.surrogate_samples,
    }
    defaults = {
        "min_relative_shift": ReconcileConfig.min_relative_shift,
        "crossing_level": ReconcileConfig.crossing_level,
        "grid_size": ReconcileConfig.grid_size,
        "n_instances": ReconcileConfig.n_instances,
        "surrogate_samples": ReconcileConfig.surrogate_samples,
    }
    return ReconcileConfig(seed=seed, **_merged(section, flags, defaults)).validate()


def _dataclass_dict(obj) -> dict:
    from dataclasses import asdict

    return asdict(obj)


def _emit(args, result: dict, text_lines: list[str]) -> None:
    if getattr(args, "json", False):
        print(json.dumps(result, sort_keys=True))
    else:
        for line in text_lines:
            print(line)
        print("config: " + canonical_json(result["config"]))


def _parse_features_arg(args) -> PatientFeatures:
    if getattr(args, "features_file", None):
        try:
            with open(args.features_file, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ValidationError(f"cannot read features file: {exc}", field="features_file")
    elif getattr(args, "features", None):
        text = args.features
    else:
        raise ValidationError("provide --features JSON or --features-file PATH", field="features")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"features are not valid JSON: {exc}", field="features")
    if not isinstance(doc, dict):
        raise ValidationError("features must be a JSON object", field="features")
    return PatientFeatures.from_dict(doc)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- subcommand bodies --------------------------------------------------------


def _cmd_fetch_data(args, cfg_file: dict) -> int:
    used = fetch_ilpd(args.out, source=args.source, timeout=args.timeout)
    ds = load_dataset(args.out)
    result = {
        "command": "fetch-data",
        "config": {"out": args.out, "source": args.source, "source_used": used},
        "records": len(ds),
        "missing_ag_ratio": ds.missing_ag_count(),
    }
    _emit(args, result, [f"wrote {args.out} ({len(ds)} records, source {used})"])
    return 0


def _cmd_gen_data(args, cfg_file: dict) -> int:
    ds = synth_generate(args.n, args.rule, args.noise, args.seed)
    save_canonical(ds, args.out)
    result = {
        "command": "gen-data",
        "config": {"n": args.n, "rule": args.rule, "noise": args.noise, "seed": args.seed,
                   "out": args.out},
        "records": len(ds),
        "positives": int(sum(r.risk for r in ds.records)),
    }
    _emit(args, result, [f"wrote {args.out} ({len(ds)} records, seed {args.seed})"])
    return 0


def _prepare_train(args, cfg_file: dict):
    ds = load_dataset(args.data, label_polarity=args.label_polarity)
    spec = _split_spec(args, cfg_file, args.seed)
    train, test = split(ds, spec)
    return impute(train), impute(test), spec


def _cmd_train(args, cfg_file: dict) -> int:
    train, test, spec = _prepare_train(args, cfg_file)
    if args.kind == "forest":
        fcfg = _forest_config(args, cfg_file, args.seed)
        model = train_forest(train, fcfg)
        model_config = _dataclass_dict(fcfg)
    else:
        model = train_logistic(train)
        model_config = {"kind": "logistic"}
    report = evaluate_model(model, test)
    model_hash = save_model(model, args.out, background=train)
    config = {
        "command": "train",
        "kind": args.kind,
        "data": args.data,
        "label_polarity": args.label_polarity,
        "seed": args.seed,
        "split": _dataclass_dict(spec),
        "model": model_config,
        "out": args.out,
    }
    result = {
        "command": "train",
        "config": config,
        "model_hash": model_hash,
        "report": report.as_dict(),
    }
    if args.report:
        _write_text(args.report, canonical_json(result) + "\n")
    _emit(
        args,
        result,
        [
            f"trained {args.kind} on {len(train)} records (seed {args.seed})",
            f"validation accuracy {report.accuracy:.4f}, auc {report.auc:.4f} on {report.n_test} records",
            f"model {args.out} (hash {model_hash})",
        ],
    )
    return 0


def _cmd_curve(args, cfg_file: dict) -> int:
    ds = load_dataset(args.data, label_polarity=args.label_polarity)
    fcfg = _forest_config(args, cfg_file, args.seed)
    spec = _split_spec(args, cfg_file, args.seed)
    fractions = [float(f) for f in args.fractions.split(",") if f.strip()]
    points = learning_curve(ds, fcfg, fractions, spec=spec)
    _write_text(args.out, curve_to_csv(points))
    config = {
        "command": "curve",
        "data": args.data,
        "seed": args.seed,
        "fractions": fractions,
        "forest": _dataclass_dict(fcfg),
        "split": _dataclass_dict(spec),
        "out": args.out,
    }
    result = {
        "command": "curve",
        "config": config,
        "points": [
            {"train_size": p.train_size, "train_accuracy": p.train_accuracy,
             "validation_accuracy": p.validation_accuracy}
            for p in points
        ],
    }
    lines = [f"wrote {args.out} ({len(points)} points, seed {args.seed})"] + [
        f"  n={p.train_size}: train {p.train_accuracy:.4f}, validation {p.validation_accuracy:.4f}"
        for p in points
    ]
    _emit(args, result, lines)
    return 0


def _cmd_explain(args, cfg_file: dict) -> int:
    artifact = load_model(args.model)
    feats = _parse_features_arg(args)
    scfg = _surrogate_config(args, cfg_file, args.seed)
    explanation = explain_instance(artifact.model, feats, artifact_stats(artifact), scfg)
    config = {
        "command": "explain",
        "model": args.model,
        "seed": args.seed,
        "surrogate": _dataclass_dict(scfg),
    }
    result = {"command": "explain", "config": config, "explanation": explanation.as_dict()}
    if args.out:
        rows = ["feature,contribution"]
        for name, value in zip(FEATURE_NAMES, explanation.contributions):
            rows.append(f"{name},{float(value)!r}")
        _write_text(args.out, "\n".join(rows) + "\n")
    order = np.argsort(-np.abs(explanation.contributions), kind="stable")
    width = max(len(n) for n in FEATURE_NAMES)
    lines = [
        f"prediction      {explanation.prediction:.6f}",
        f"local_fidelity  {explanation.local_fidelity:.6f}",
        f"intercept       {explanation.intercept:+.6f}",
        f"{'feature'.ljust(width)}  contribution",
    ]
    for j in order:
        lines.append(f"{FEATURE_NAMES[j].ljust(width)}  {explanation.contributions[j]:+.6f}")
    _emit(args, result, lines)
    return 0


def _background_dataset(args, artifact):
    if getattr(args, "data", None):
        return impute(load_dataset(args.data, label_polarity=args.label_polarity))
    if artifact.background is not None:
        return impute(artifact.background)
    raise ValidationError(
        "model file carries no background records; pass --data", field="data"
    )


def _cmd_pdp(args, cfg_file: dict) -> int:
    artifact = load_model(args.model)
    ds = _background_dataset(args, artifact)
    curve = pdp(artifact.model, ds, args.feature, grid_size=args.grid_size)
    _write_text(args.out, curve.to_csv())
    config = {
        "command": "pdp",
        "model": args.model,
        "feature": args.feature,
        "grid_size": args.grid_size,
        "data": getattr(args, "data", None),
        "out": args.out,
    }
    result = {"command": "pdp", "config": config, "curve": curve.as_dict()}
    _emit(
        args,
        result,
        [f"wrote {args.out} ({len(curve.grid)} points, range_effect {curve.range_effect:.6f})"],
    )
    return 0


def _cmd_rules_check(args, cfg_file: dict) -> int:
    with open(args.rules, "r", encoding="utf-8") as fh:
        table = parse_table(fh.read())
    result = {
        "command": "rules check",
        "config": {"rules": args.rules},
        "name": table.name,
        "hit_policy": table.hit_policy.value,
        "inputs": list(table.inputs),
        "rows": len(table.rows),
    }
    _emit(args, result, [f"ok: {table.name} ({len(table.rows)} rows, {table.hit_policy.value})"])
    return 0


def _cmd_rules_eval(args, cfg_file: dict) -> int:
    with open(args.rules, "r", encoding="utf-8") as fh:
        table = parse_table(fh.read())
    feats = _parse_features_arg(args)
    decision = evaluate(table, feats)
    result = {
        "command": "rules eval",
        "config": {"rules": args.rules},
        "outcome": decision.outcome.value if decision.outcome else None,
        "matched_rows": list(decision.matched_rows),
        "trace": [list(row) for row in decision.trace],
    }
    _emit(
        args,
        result,
        [
            f"outcome: {result['outcome']}",
            f"matched_rows: {result['matched_rows']}",
        ],
    )
    return 0


def _cmd_reconcile(args, cfg_file: dict) -> int:
    artifact = load_model(args.model)
    with open(args.rules, "r", encoding="utf-8") as fh:
        table = parse_table(fh.read())
    ds = _background_dataset(args, artifact)
    rcfg = _reconcile_config(args, cfg_file, args.seed)
    revisions = propose_revisions(table, artifact.model, ds, rcfg)
    config = {
        "command": "reconcile",
        "model": args.model,
        "rules": args.rules,
        "data": getattr(args, "data", None),
        "seed": args.seed,
        "reconcile": _dataclass_dict(rcfg),
        "out": args.out,
    }
    if args.out:
        _write_text(
            args.out,
            json.dumps(
                {"config": config, "revisions": [r.as_dict() for r in revisions]},
                sort_keys=True,
            )
            + "\n",
        )
    result = {
        "command": "reconcile",
        "config": config,
        "revisions": [r.as_dict() for r in revisions],
    }
    lines = [f"{len(revisions)} revision(s) proposed"] + [r.describe() for r in revisions]
    if args.out:
        lines.append(f"wrote {args.out}")
    _emit(args, result, lines)
    return 0


def _cmd_serve(args, cfg_file: dict) -> int:
    import os

    data_dir = args.data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise ValidationError(
            f"pass --data-dir or set {DATA_DIR_ENV}", field="data_dir"
        )
    print(f"serving on {args.host}:{args.port} (model {args.model}, rules {args.rules})")
    serve(
        model_path=args.model,
        rules_path=args.rules,
        data_dir=data_dir,
        port=args.port,
        host=args.host,
        revisions_path=args.revisions,
    )
    return 0


# -- parser ------------------------------------------------------------------


def _add_features_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", help="patient features as a JSON object")
    p.add_argument("--features-file", help="path to a JSON file of patient features")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinscope", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON config file with section defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch-data", help="materialize the ILPD CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--source", choices=["auto", "url", "bundled"], default="auto")
    p.add_argument("--timeout", type=float, default=10.0)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=_cmd_fetch_data)

    p = sub.add_parser("gen-data", help="synthesize labeled records around a threshold rule")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rule", required=True, help="e.g. 'alp>175'")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_gen_data)

    def add_forest_flags(p):
        p.add_argument("--trees", type=int)
        p.add_argument("--max-depth", type=int)
        p.add_argument("--min-leaf", type=int, dest="min_leaf")
        p.add_argument("--features-per-split", type=int)

    def add_split_flags(p):
        p.add_argument("--train-fraction", type=float)
        p.add_argument("--no-stratify", action="store_true")
        p.add_argument(
            "--label-polarity", choices=["standard", "paper_table"], default="standard"
        )

    p = sub.add_parser("train", help="split, train, evaluate, save a model")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--kind", choices=["forest", "logistic"], default="forest")
    p.add_argument("--report", help="also write the report JSON here")
    add_forest_flags(p)
    add_split_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("curve", help="learning curve CSV over training-set fractions")
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--fractions", default="0.2,0.4,0.6,0.8,1.0")
    p.add_argument("--out", required=True)
    add_forest_flags(p)
    add_split_flags(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_curve)

    p = sub.add_parser("explain", help="local surrogate explanation for one patient")
    p.add_argument("--model", required=True)
    _add_features_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="write feature,contribution CSV here")
    p.add_argument("--n-samples", type=int)
    p.add_argument("--kernel-width", type=float)
    p.add_argument("--ridge-lambda", type=float)
    p.add_argument("--discretize", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_explain)

    p = sub.add_parser("pdp", help="partial dependence curve CSV for one feature")
    p.add_argument("--model", required=True)
    p.add_argument("--feature", required=True)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--data", help="dataset for grids (default: model background)")
    p.add_argument(
        "--label-polarity", choices=["standard", "paper_table"], default="standard"
    )
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_pdp)

    p = sub.add_parser("rules", help="decision-table utilities")
    rsub = p.add_subparsers(dest="rules_command", required=True)
    pc = rsub.add_parser("check", help="parse and validate a table document")
    pc.add_argument("--rules", required=True)
    pc.add_argument("--json", action="store_true")
    pc.set_defaults(fn=_cmd_rules_check)
    pe = rsub.add_parser("eval", help="evaluate a patient against a table")
    pe.add_argument("--rules", required=True)
    _add_features_args(pe)
    pe.add_argument("--json", action="store_true")
    pe.set_defaults(fn=_cmd_rules_eval)

    p = sub.add_parser("reconcile", help="propose rule-threshold revisions from model evidence")
    p.add_argument("--model", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--data", help="dataset for evidence (default: model background)")
    p.add_argument(
        "--label-polarity", choices=["standard", "paper_table"], default="standard"
    )
    p.add_argument("--out", help="write the revision report JSON here")
    p.add_argument("--min-shift", type=float, dest="min_shift")
    p.add_argument("--level", help="'midpoint' or a probability in (0,1)")
    p.add_argument("--grid-size", type=int)
    p.add_argument("--n-instances", type=int)
    p.add_argument("--surrogate-samples", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=_cmd_reconcile)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--model", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--data-dir", help=f"twin log directory (or {DATA_DIR_ENV})")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--revisions", help="pending-revision JSON from `reconcile --out`")
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg_file = _load_config_file(args.config)
        return args.fn(args, cfg_file)
    except TwinscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
