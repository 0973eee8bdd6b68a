import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleepstates.classifiers import (
    TrainConfig,
    class_weights,
    label_steps,
    load_model,
    make_labels,
    save_model,
)
from sleepstates.classifiers.forest import (
    ForestModel,
    Tree,
    feature_importance,
    predict_proba_forest,
    train_forest,
)
from sleepstates.classifiers.logistic import (
    LogisticModel,
    loss_and_grad,
    predict_proba_logistic,
    sigmoid,
    train_logistic,
)
from sleepstates.model import EventClass, LabeledEvent

from conftest import make_series

ON, OFF = EventClass.ONSET, EventClass.WAKEUP


def ev(night, kind, step):
    return LabeledEvent("s1", night, kind, step)


# -- labels ----------------------------------------------------------------


def test_labels_single_night():
    y = make_labels(make_series(np.zeros(300)), [ev(1, ON, 100), ev(1, OFF, 200)])
    assert y.sum() == 100 and y[100] == 1 and y[199] == 1 and y[200] == 0 and y[99] == 0


def test_labels_empty():
    assert make_labels(make_series(np.zeros(50)), []).sum() == 0


def test_labels_two_nights():
    y = make_labels(make_series(np.zeros(100)), [ev(1, ON, 10), ev(1, OFF, 20), ev(2, ON, 50), ev(2, OFF, 70)])
    assert np.flatnonzero(np.diff(np.concatenate(([0], y, [0])))).tolist() == [10, 20, 50, 70]


def test_labels_drop_bad_nights():
    events = [ev(1, ON, 10), ev(2, ON, 50), ev(2, OFF, 40), ev(3, OFF, 80)]
    y, dropped = label_steps(np.arange(100), "s1", events)
    assert y.sum() == 0 and dropped == 3


# -- logistic ----------------------------------------------------------------


def zero_model(n=2):
    names = tuple(f"f{i}" for i in range(n))
    return LogisticModel(names, np.zeros(n), 0.0, np.zeros(n), np.ones(n)), names


def test_zero_model_predicts_half():
    model, names = zero_model()
    p = predict_proba_logistic(model, np.random.default_rng(0).normal(size=(7, 2)), names)
    assert np.all(p == 0.5)


def test_saturation_and_hand_sigmoid():
    model = LogisticModel(("f",), np.array([1.0]), 0.0, np.zeros(1), np.ones(1))
    assert predict_proba_logistic(model, np.array([[0.5]]), ["f"])[0] == pytest.approx(0.62246, abs=5e-6)
    assert predict_proba_logistic(model, np.array([[50.0]]), ["f"])[0] >= 0.999
    assert sigmoid(np.array([0.0]))[0] == 0.5


def test_two_point_weight_positive():
    model = train_logistic(np.array([[-1.0], [1.0]]), np.array([0, 1]), ["x"], TrainConfig(epochs=1))
    assert model.weights[0] > 0


def test_zero_variance_feature_gets_zero_weight():
    rng = np.random.default_rng(1)
    X = np.column_stack([rng.normal(size=200), np.full(200, 3.0)])
    y = (X[:, 0] > 0).astype(int)
    model = train_logistic(X, y, ["a", "b"], TrainConfig(epochs=50))
    assert model.std[1] == 1.0 and model.weights[1] == 0.0


def numeric_grad(w, b, X, y, sw, eps=1e-5):
    g = np.zeros_like(w)
    for j in range(len(w)):
        d = np.zeros_like(w)
        d[j] = eps
        g[j] = (loss_and_grad(w + d, b, X, y, sw)[0] - loss_and_grad(w - d, b, X, y, sw)[0]) / (2 * eps)
    gb = (loss_and_grad(w, b + eps, X, y, sw)[0] - loss_and_grad(w, b - eps, X, y, sw)[0]) / (2 * eps)
    return g, gb


def relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 5))
    y = rng.integers(0, 2, 20).astype(float)
    sw = rng.uniform(0.2, 3.0, 20)
    w, b = rng.normal(size=5), float(rng.normal())
    _, gw, gb = loss_and_grad(w, b, X, y, sw)
    nw, nb = numeric_grad(w, b, X, y, sw)
    assert relative_error(np.append(gw, gb), np.append(nw, nb)) <= 1e-4


def test_loss_non_increasing():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(300, 3))
    y = (X @ [1.0, -2.0, 0.5] + rng.normal(0, 0.5, 300) > 0).astype(int)
    model = train_logistic(X, y, ["a", "b", "c"], TrainConfig(learning_rate=50.0, epochs=100))
    h = np.asarray(model.loss_history)
    assert np.all(np.diff(h) <= 0)
    assert h[-1] < h[0]


def test_balanced_needs_both_classes():
    with pytest.raises(ValueError, match="label 1"):
        train_logistic(np.zeros((4, 1)), np.zeros(4), ["x"])
    assert class_weights(np.array([0, 0, 0, 1]), TrainConfig()) == (4 / 6, 2.0)
    assert class_weights(np.array([0, 1]), TrainConfig(class_weight_mode="2,3")) == (2.0, 3.0)


def test_balanced_matches_duplication_sign_pattern():
    rng = np.random.default_rng(9)
    X0 = rng.normal([-1.0, 1.0, 0.5], 0.3, size=(90, 3))
    X1 = rng.normal([1.0, -1.0, -0.5], 0.3, size=(10, 3))
    X = np.vstack([X0, X1])
    y = np.r_[np.zeros(90), np.ones(10)]
    balanced = train_logistic(X, y, "abc", TrainConfig(epochs=200))
    Xd = np.vstack([X0] + [X1] * 9)
    yd = np.r_[np.zeros(90), np.ones(90)]
    dup = train_logistic(Xd, yd, "abc", TrainConfig(class_weight_mode="uniform", epochs=200))
    assert np.array_equal(np.sign(balanced.weights), np.sign(dup.weights))
    assert np.array_equal(np.sign(balanced.weights), [1, -1, -1])


def test_column_mismatch_lists_names():
    model, names = zero_model()
    with pytest.raises(ValueError, match=r"missing \['f1'\].*extra \['zz'\]"):
        predict_proba_logistic(model, np.zeros((1, 2)), ["f0", "zz"])


def test_logistic_reorders_columns():
    model = LogisticModel(("a", "b"), np.array([1.0, -1.0]), 0.0, np.zeros(2), np.ones(2))
    X = np.array([[2.0, 0.5]])
    assert predict_proba_logistic(model, X, ["a", "b"]) == predict_proba_logistic(model, X[:, ::-1], ["b", "a"])


# -- forest ----------------------------------------------------------------


def xor_data(copies=100):
    X = np.tile(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]), (copies, 1))
    y = (X[:, 0] != X[:, 1]).astype(int)
    return X, y


def test_single_class_gives_leaves():
    X = np.random.default_rng(0).normal(size=(200, 3))
    model = train_forest(X, np.ones(200), "abc", TrainConfig(n_estimators=5, min_samples_leaf=1))
    assert all(t.depth == 0 for t in model.trees)
    assert np.all(predict_proba_forest(model, X, "abc") == 1.0)
    assert all(v == 0 for v in feature_importance(model).values())


def test_xor_separable():
    X, y = xor_data()
    cfg = TrainConfig(n_estimators=10, min_samples_leaf=1, max_depth=3, features_per_split=2)
    model = train_forest(X, y, ["x0", "x1"], cfg)
    assert np.array_equal(predict_proba_forest(model, X, ["x0", "x1"]) > 0.5, y == 1)


def trees_equal(a: ForestModel, b: ForestModel) -> bool:
    return all(
        getattr(ta, k).tobytes() == getattr(tb, k).tobytes()
        for ta, tb in zip(a.trees, b.trees)
        for k in Tree.__dataclass_fields__
    ) and len(a.trees) == len(b.trees)


def test_forest_deterministic_across_threads():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(500, 4))
    y = (X[:, 0] + 0.3 * rng.normal(size=500) > 0).astype(int)
    cfg = TrainConfig(n_estimators=8, min_samples_leaf=5)
    assert trees_equal(train_forest(X, y, "abcd", cfg, threads=1), train_forest(X, y, "abcd", cfg, threads=4))
    other = train_forest(X, y, "abcd", TrainConfig(n_estimators=8, min_samples_leaf=5, rng_seed=1))
    assert not trees_equal(train_forest(X, y, "abcd", cfg), other)


def leaf(v):
    return Tree(*(np.array([a]) for a in (-1, 0.0, -1, -1, v, 1, 0.0)))


def test_forest_prediction_is_tree_mean():
    X = np.zeros((3, 1))
    one = ForestModel(("f",), (leaf(0.25),), 1, 1, 1, 1, 0)
    assert np.all(predict_proba_forest(one, X, ["f"]) == 0.25)
    agree = ForestModel(("f",), (leaf(1.0), leaf(1.0)), 2, 1, 1, 1, 0)
    assert np.all(predict_proba_forest(agree, X, ["f"]) == 1.0)
    split = ForestModel(("f",), (leaf(0.0), leaf(1.0)), 2, 1, 1, 1, 0)
    assert np.all(predict_proba_forest(split, X, ["f"]) == 0.5)


def test_single_split_importance():
    X = np.array([[0.0, 5.0], [1.0, 5.0]] * 10)
    y = np.array([0, 1] * 10)
    model = train_forest(X, y, ["a", "b"], TrainConfig(n_estimators=1, min_samples_leaf=1, features_per_split=2))
    assert model.trees[0].depth == 1
    assert feature_importance(model) == {"a": 1.0, "b": 0.0}


def planted(seed=0, n=2000, d=6):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    return X, (X[:, 0] > 0.2).astype(int)


def test_planted_signal_ranks_first():
    X, y = planted()
    names = [f"f{i}" for i in range(X.shape[1])]
    imp = feature_importance(train_forest(X, y, names, TrainConfig(n_estimators=20, min_samples_leaf=20)))
    assert max(imp, key=imp.get) == "f0"
    assert abs(sum(imp.values()) - 1.0) < 1e-12
    assert all(v >= 0 for v in imp.values())


@settings(max_examples=10, deadline=None)
@given(st.permutations(range(4)))
def test_importance_permutation_equivariant(perm):
    X, y = planted(seed=3, n=400, d=4)
    names = ["a", "b", "c", "d"]
    cfg = TrainConfig(n_estimators=5, min_samples_leaf=10, features_per_split=4)
    base = feature_importance(train_forest(X, y, names, cfg))
    permuted = feature_importance(train_forest(X[:, perm], y, [names[i] for i in perm], cfg))
    for k in names:
        assert permuted[k] == pytest.approx(base[k], abs=1e-12)


def test_forest_rejects_empty():
    with pytest.raises(ValueError):
        train_forest(np.zeros((0, 2)), np.zeros(0), "ab")


@pytest.mark.parametrize("kind", ["logistic", "forest"])
def test_save_load_roundtrip(tmp_path, kind):
    X, y = planted(seed=1, n=300, d=3)
    names = ["a", "b", "c"]
    cfg = TrainConfig(epochs=20, n_estimators=3, min_samples_leaf=5)
    model = train_logistic(X, y, names, cfg) if kind == "logistic" else train_forest(X, y, names, cfg)
    predict = predict_proba_logistic if kind == "logistic" else predict_proba_forest
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert type(back) is type(model)
    assert predict(back, X, names).tobytes() == predict(model, X, names).tobytes()


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_model(p)
