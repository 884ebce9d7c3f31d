"""Versioned model files: bit-exact round-trips and tamper detection."""

import json

import numpy as np
import pytest

from twinscope.errors import LoadError
from twinscope.model_io import (
    artifact_stats,
    dumps_model,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)


def test_forest_round_trip_bit_exact(tmp_path, small_forest, train_test):
    train, test = train_test
    path = tmp_path / "forest.model.json"
    h = save_model(small_forest, path, background=train)
    art = load_model(path)
    assert art.kind == "forest"
    assert art.model_hash == h
    assert art.model.config == small_forest.config
    assert len(art.model.trees) == len(small_forest.trees)
    for t1, t2 in zip(small_forest.trees, art.model.trees):
        assert np.array_equal(t1.feature, t2.feature)
        assert np.array_equal(t1.threshold, t2.threshold)  # repr floats, no drift
        assert np.array_equal(t1.left, t2.left)
        assert np.array_equal(t1.right, t2.right)
        assert np.array_equal(t1.proba, t2.proba)
    X, _ = test.matrix()
    assert np.array_equal(
        small_forest.predict_proba_batch(X), art.model.predict_proba_batch(X)
    )


def test_logistic_round_trip(tmp_path, logistic_model, train_test):
    _, test = train_test
    path = tmp_path / "logit.model.json"
    save_model(logistic_model, path)
    art = load_model(path)
    assert art.kind == "logistic"
    assert np.array_equal(art.model.weights, logistic_model.weights)
    assert np.array_equal(art.model.mean, logistic_model.mean)
    assert np.array_equal(art.model.std, logistic_model.std)
    X, _ = test.matrix()
    assert np.array_equal(
        logistic_model.predict_proba_batch(X), art.model.predict_proba_batch(X)
    )


def test_background_round_trip(tmp_path, small_forest, train_test):
    train, _ = train_test
    path = tmp_path / "withbg.model.json"
    save_model(small_forest, path, background=train)
    art = load_model(path)
    assert art.background is not None
    assert len(art.background) == len(train)
    Xa, ya = train.matrix()
    Xb, yb = art.background.matrix()
    assert np.array_equal(Xa, Xb, equal_nan=True)
    assert np.array_equal(ya, yb)
    assert np.array_equal(art.background.stats.median, train.stats.median)


def test_dump_is_deterministic(small_forest, train_test):
    train, _ = train_test
    assert dumps_model(small_forest, background=train) == dumps_model(
        small_forest, background=train
    )


def test_model_hash_tracks_content(small_forest, logistic_model):
    d1 = model_to_dict(small_forest)
    d2 = model_to_dict(logistic_model)
    assert d1["model_hash"] != d2["model_hash"]
    assert d1["format"] == "twinscope-model"
    assert d1["version"] == 1


def test_load_rejects_bad_documents(tmp_path, small_forest):
    path = tmp_path / "m.json"
    save_model(small_forest, path)
    doc = json.loads(path.read_text())

    bad = dict(doc)
    bad["format"] = "something-else"
    with pytest.raises(LoadError):
        model_from_dict(bad)

    bad = dict(doc)
    bad["version"] = 99
    with pytest.raises(LoadError):
        model_from_dict(bad)

    bad = dict(doc)
    bad["feature_names"] = list(reversed(bad["feature_names"]))
    with pytest.raises(LoadError):
        model_from_dict(bad)

    bad = dict(doc)
    bad["kind"] = "svm"
    with pytest.raises(LoadError):
        model_from_dict(bad)

    (tmp_path / "not.json").write_text("{", encoding="utf-8")
    with pytest.raises(LoadError):
        load_model(tmp_path / "not.json")
    with pytest.raises(LoadError):
        load_model(tmp_path / "missing.json")


def test_artifact_stats_precedence(tmp_path, small_forest, logistic_model, train_test):
    train, _ = train_test
    p1 = tmp_path / "bg.json"
    save_model(small_forest, p1, background=train)
    art = load_model(p1)
    assert np.array_equal(artifact_stats(art).median, train.stats.median)

    p2 = tmp_path / "nobg.json"
    save_model(small_forest, p2)
    art2 = load_model(p2)
    # falls back to the forest's own training stats
    assert np.array_equal(artifact_stats(art2).mean, small_forest.training_stats.mean)

    p3 = tmp_path / "logit-nobg.json"
    save_model(logistic_model, p3)
    art3 = load_model(p3)
    with pytest.raises(LoadError):
        artifact_stats(art3)


def test_file_ends_with_newline_and_sorted_keys(tmp_path, small_forest):
    path = tmp_path / "m.json"
    save_model(small_forest, path)
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    doc = json.loads(text)
    assert list(doc) == sorted(doc)
