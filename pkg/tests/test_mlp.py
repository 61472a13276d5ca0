import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from igrf.errors import NumericError
from igrf.mlp import (
    AdamState, MlpConfig, batch_norm, fit, forward, init_model, load_model, loss, loss_and_grads,
    one_hot_targets, predict, predict_proba, relu, save_model, softmax, train_step,
)
from igrf.tabular import EncodedMatrix

from oracles import max_relative_error, numeric_gradient


def matrix(X, y, k=None):
    X = np.asarray(X, dtype=float)
    names = tuple(f"c{i}" for i in range(X.shape[1]))
    k = k or int(np.max(y)) + 1
    return EncodedMatrix(names, X, np.asarray(y), {n: [i] for i, n in enumerate(names)},
                         tuple(f"k{i}" for i in range(k)))


def test_softmax_examples():
    assert np.allclose(softmax(np.array([[0.0, math.log(3)]])), [[0.25, 0.75]])
    p = softmax(np.array([[1e4, -1e4, 0.0]]))
    assert np.isfinite(p).all() and p[0, 0] == 1.0
    assert relu(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]


def test_zero_weights_give_uniform_rows():
    m = init_model(3, 4, MlpConfig(hidden_sizes=(5,)))
    for name in m.params:
        if name.startswith(("W", "b", "beta")):
            m.params[name][:] = 0
    p = forward(m, np.random.default_rng(0).random((6, 3)), "train")
    assert np.allclose(p, 0.25)
    assert predict(m, np.ones((3, 3))).tolist() == [0, 0, 0]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rows_sum_to_one(seed):
    rng = np.random.default_rng(seed)
    m = init_model(4, 3, MlpConfig(hidden_sizes=(6, 5), seed=seed % 100))
    for mode in ("train", "infer"):
        p = forward(m, rng.normal(size=(7, 4)) * 10, mode)
        assert np.allclose(p.sum(axis=1), 1, atol=1e-9)


def test_width_mismatch():
    m = init_model(3, 2, MlpConfig(hidden_sizes=(4,)))
    with pytest.raises(ValueError):
        forward(m, np.zeros((2, 5)))


def test_batch_norm_statistics():
    x = np.random.default_rng(3).normal(5, 3, (50, 4))
    xhat, *_ = batch_norm(x, 1e-5)
    assert np.allclose(xhat.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(xhat.var(axis=0), 1, atol=1e-5)


def test_loss_examples():
    target = np.array([[0.0, 1.0]])
    pred = np.array([[0.25, 0.75]])
    assert loss(target, target, "squared_error") == 0
    assert loss(target, target, "cross_entropy") == 0
    assert abs(loss(pred, target, "squared_error") - 0.125) < 1e-12
    assert abs(loss(pred, target) - 0.2877) < 1e-4
    with pytest.raises(ValueError):
        loss(pred, np.zeros((1, 3)))


@pytest.mark.parametrize("kind", ["cross_entropy", "squared_error"])
def test_gradient_matches_finite_differences_h_1e4(kind):
    # 3 features, 2 classes, 4 samples, 64-bit, central differences with h = 1e-4
    rng = np.random.default_rng(11)
    X = rng.normal(size=(4, 3))
    Y = one_hot_targets(np.array([0, 1, 1, 0]), 2)
    cfg = MlpConfig(hidden_sizes=(4,), loss=kind)
    params = init_model(3, 2, cfg, rng).params
    _, analytic, _ = loss_and_grads(params, X, Y, cfg)
    numeric = numeric_gradient(lambda p: loss_and_grads(p, X, Y, cfg)[0], params, h=1e-4)
    assert max_relative_error(analytic, numeric) < 1e-4


def test_zero_learning_rate_leaves_params():
    cfg = MlpConfig(hidden_sizes=(4,), learning_rate=0.0)
    m = init_model(3, 2, cfg)
    before = {k: v.copy() for k, v in m.params.items()}
    train_step(m, np.random.default_rng(0).random((5, 3)), one_hot_targets([0, 1, 0, 1, 1], 2))
    assert all(np.array_equal(before[k], m.params[k]) for k in before)


def test_non_finite_loss_raises():
    m = init_model(2, 2, MlpConfig(hidden_sizes=(3,)))
    with pytest.raises(NumericError):
        train_step(m, np.array([[np.nan, 0], [1, 1]]), one_hot_targets([0, 1], 2))


def test_200_steps_separate_toy_data():
    rng = np.random.default_rng(5)
    X = np.r_[rng.normal(-2, 0.5, (20, 2)), rng.normal(2, 0.5, (20, 2))]
    y = np.r_[np.zeros(20, int), np.ones(20, int)]
    cfg = MlpConfig(hidden_sizes=(8,), learning_rate=1e-2)
    m = init_model(2, 2, cfg)
    state = AdamState()
    for _ in range(200):
        train_step(m, X, one_hot_targets(y, 2), state)
    assert (predict(m, X) == y).all()


def _toy(seed=0, n=40):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    return matrix(rng.normal(size=(n, 3)) + y[:, None], y)


def test_frozen_loss_stops_at_35_and_restores_epoch_5():
    data = _toy()
    cfg = MlpConfig(hidden_sizes=(4,), batch_size=8)
    snapshots = {}

    def hook(epoch, model):
        snapshots[epoch] = model.copy().params
        return 10.0 - epoch if epoch <= 5 else 5.0

    m = fit(cfg, data, data, val_loss_hook=hook)
    assert m.trace.epochs_run == 35 and m.trace.best_epoch == 5
    assert all(np.array_equal(m.params[k], snapshots[5][k]) for k in m.params)


def test_improving_loss_runs_every_epoch():
    cfg = MlpConfig(hidden_sizes=(3,), batch_size=20, max_epochs=300)
    m = fit(cfg, _toy(n=20), _toy(n=20), val_loss_hook=lambda e, _: 1.0 / e)
    assert m.trace.epochs_run == 300


def test_fit_is_deterministic_and_round_trips(tmp_path):
    cfg = MlpConfig(hidden_sizes=(5, 4), batch_size=8, max_epochs=15, seed=9)
    data = _toy(1)
    a, b = fit(cfg, data, data), fit(cfg, data, data)
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])
    save_model(a, tmp_path / "m.npz")
    c = load_model(tmp_path / "m.npz")
    assert np.array_equal(predict_proba(a, data.values), predict_proba(c, data.values))
    assert c.config == a.config


def test_predict_tie_rule():
    m = init_model(1, 2, MlpConfig(hidden_sizes=(2,)))
    for name in m.params:
        if name.startswith(("W", "b", "beta")):
            m.params[name][:] = 0
    assert predict(m, np.array([[1.0], [2.0]])).tolist() == [0, 0]
