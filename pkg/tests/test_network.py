import numpy as np
import pytest

from oracles import gradient_relative_error
from sparsematch import network
from sparsematch.coding import SparseCode
from sparsematch.errors import (ConfigError, CorruptionError, FormatError, ShapeError,
                               TrainingError)
from sparsematch.network import (ARCH1, ARCH2, AdamState, Architecture, PairSamples,
                                 TrainConfig, adam_step, architecture, backward,
                                 bce_loss, forward, init_network, load_model,
                                 predict_pair, save_model, stratified_split, train)


def separable_toy(seed=0, n=200, k=4):
    """Pairs whose label is 1 iff both codes share the sign of coordinate 0."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, k))
    b = rng.standard_normal((n, k))
    labels = np.arange(n) % 2
    b[:, 0] = np.abs(b[:, 0]) + 0.5
    a[:, 0] = np.where(labels == 1, 1, -1) * (np.abs(a[:, 0]) + 0.5)
    return PairSamples(a, b, labels)


def test_init_deterministic_and_shaped():
    p1, p2 = init_network(ARCH2, 14000, seed=3), init_network(ARCH2, 14000, seed=3)
    assert [w.shape for w in p1.weights] == [(14000, 1000), (1000, 1)]
    assert all(np.array_equal(a, b) for a, b in zip(p1.arrays(), p2.arrays()))
    assert all(not b.any() for b in p1.biases)
    limit = np.sqrt(6 / 14000)
    assert np.abs(p1.weights[0]).max() <= limit
    assert abs(p1.weights[0].mean()) < 1e-3 * limit * 10


def test_arch1_shapes():
    p = init_network(ARCH1, 20)
    assert [w.shape for w in p.weights] == [(20, 500), (500, 80), (80, 4), (4, 1)]


def test_architecture_validation():
    with pytest.raises(ConfigError):
        Architecture((3, 0))
    with pytest.raises(ConfigError):
        Architecture((3,), "sigmoid")
    with pytest.raises(ConfigError):
        architecture("3")
    with pytest.raises(ConfigError):
        init_network(ARCH2, 0)
    assert architecture("2", 200).hidden_sizes == (200,)
    assert architecture("1").hidden_sizes == (500, 80, 4)


def test_zero_network_outputs_half():
    p = init_network(ARCH1, 6)
    for w in p.weights:
        w[:] = 0
    np.testing.assert_array_equal(forward(p, np.random.default_rng(0).standard_normal((5, 6))), 0.5)


def test_single_layer_is_logistic():
    p = init_network(Architecture(()), 3, seed=2)
    p.biases[0][:] = 0.3
    x = np.array([0.5, -1.0, 2.0])
    z = x @ p.weights[0][:, 0] + 0.3
    assert forward(p, x)[0] == 1 / (1 + np.exp(-z))


def test_batch_equals_rows():
    p = init_network(Architecture((7, 3)), 5, seed=1)
    x = np.random.default_rng(1).standard_normal((9, 5))
    rows = np.array([forward(p, row)[0] for row in x])
    np.testing.assert_allclose(forward(p, x), rows, rtol=0, atol=1e-15)


def test_outputs_in_unit_interval():
    p = init_network(ARCH2, 8, seed=4)
    out = forward(p, np.random.default_rng(2).standard_normal((50, 8)))
    assert np.all((out > 0) & (out < 1))


def test_forward_shape_error_names_layer():
    p = init_network(ARCH2, 4)
    with pytest.raises(ShapeError, match="layer 0"):
        forward(p, np.ones((2, 5)))
    p.weights[1] = np.ones((3, 1))
    with pytest.raises(ShapeError, match="layer 1"):
        forward(p, np.ones((2, 4)))


def test_bce_values():
    assert bce_loss([0.5, 0.5], [0, 1]) == pytest.approx(np.log(2), abs=1e-12)
    assert bce_loss([0.9], [1]) == pytest.approx(-np.log(0.9), abs=1e-12)
    assert bce_loss([1.0, 0.0], [1, 0]) < 1e-11
    assert np.isfinite(bce_loss([0.0], [1]))
    assert bce_loss([0.0], [1]) == pytest.approx(-np.log(1e-12))
    with pytest.raises(ShapeError):
        bce_loss([0.5], [0, 1])


def test_output_delta_is_prediction_minus_label():
    p = init_network(Architecture(()), 3, seed=5)
    x = np.random.default_rng(3).standard_normal((6, 3))
    y = np.array([0, 1, 1, 0, 1, 0])
    _, gb = backward(p, x, y)
    assert abs(gb[0][0] - np.mean(forward(p, x) - y)) <= 1e-12


def test_zero_labels_half_predictions_bias_gradient():
    p = init_network(ARCH2, 4)
    p.weights[-1][:] = 0
    _, gb = backward(p, np.random.default_rng(0).standard_normal((10, 4)), np.zeros(10))
    assert gb[-1][0] == pytest.approx(0.5, abs=1e-15)


def test_gradient_check_small_net():
    p = init_network(Architecture((3,)), 4, seed=7)
    p.biases[0][:] = 0.1
    rng = np.random.default_rng(4)
    x, y = rng.standard_normal((10, 4)), rng.integers(0, 2, 10)
    assert gradient_relative_error(p, x, y, backward, forward, bce_loss,
                                   entrywise=True) <= 1e-5


@pytest.mark.parametrize("hidden,activation", [((6, 4), "tanh"), ((5,), "relu"),
                                               ((3, 3, 3), "relu")])
def test_gradient_check_random_archs(hidden, activation):
    p = init_network(Architecture(hidden, activation), 7, seed=8)
    rng = np.random.default_rng(5)
    for b in p.biases:
        b[:] = rng.uniform(-0.2, 0.2, b.shape)
    x, y = rng.standard_normal((12, 7)), rng.integers(0, 2, 12)
    assert gradient_relative_error(p, x, y, backward, forward, bce_loss) <= 1e-5


def test_duplicated_batch_same_gradient():
    p = init_network(Architecture((4,)), 3, seed=1)
    rng = np.random.default_rng(6)
    x, y = rng.standard_normal((5, 3)), rng.integers(0, 2, 5)
    g1 = backward(p, x, y)
    g2 = backward(p, np.vstack([x, x]), np.concatenate([y, y]))
    for a, b in zip(g1[0] + g1[1], g2[0] + g2[1]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-16)


def test_adam_zero_gradient():
    p = init_network(Architecture((2,)), 2, seed=0)
    before = [a.copy() for a in p.arrays()]
    zeros = ([np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases])
    state = AdamState.zeros_like(p)
    adam_step(p, zeros, state, lr=0.1)
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), before))
    assert state.step == 1
    state.m[0][:] = 1.0
    state.v[0][:] = 1.0
    adam_step(p, zeros, state, lr=0.1)
    np.testing.assert_array_equal(state.m[0], 0.9)
    np.testing.assert_array_equal(state.v[0], 0.999)


def test_adam_first_step():
    p = init_network(Architecture(()), 1, seed=0)
    w0 = p.weights[0].copy()
    g = np.array([[0.3]])
    adam_step(p, ([g], [np.zeros(1)]), AdamState.zeros_like(p), lr=0.01, eps=1e-8)
    np.testing.assert_allclose(w0 - p.weights[0], 0.01 * 0.3 / (0.3 + 1e-8), rtol=1e-12)


def test_adam_step_index_validated():
    p = init_network(Architecture(()), 1)
    grads = ([np.ones((1, 1))], [np.ones(1)])
    with pytest.raises(ConfigError):
        adam_step(p, grads, AdamState.zeros_like(p), step_index=0)


def test_train_config_validation():
    for kwargs in ({"batch_size": 0}, {"val_split": 1.0}, {"lr": 0}, {"epochs": -1}):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)


def test_stratified_split():
    labels = np.array([0] * 50 + [1] * 30)
    tr, va = stratified_split(labels, 0.2, seed=1)
    assert len(np.intersect1d(tr, va)) == 0 and len(tr) + len(va) == 80
    assert (labels[va] == 0).sum() == 10 and (labels[va] == 1).sum() == 6
    tr2, va2 = stratified_split(labels, 0.2, seed=1)
    assert np.array_equal(va, va2)


def test_train_separable_toy():
    samples = separable_toy()
    arch = Architecture((16,))
    _, history = train(samples, arch, TrainConfig(epochs=50, lr=0.01, seed=0))
    assert len(history) == 50 == len(history.val_acc) == len(history.train_acc)
    assert history.train_loss[-1] < 0.1 * history.train_loss[0]
    params, history2 = train(samples, arch, TrainConfig(epochs=50, lr=0.01, seed=0))
    assert history2.train_loss == history.train_loss
    assert history2.val_acc == history.val_acc
    positive = np.flatnonzero(samples.labels == 1)[0]
    score = predict_pair(params, samples.a[positive], samples.b[positive])
    assert score > 0.5


def test_train_returns_best_validation_epoch():
    samples = separable_toy(seed=2)
    params, history = train(samples, Architecture((8,)),
                            TrainConfig(epochs=15, lr=0.01, seed=3))
    assert history.best_epoch == int(np.argmax(history.val_acc))


def test_train_zero_epochs():
    samples = separable_toy()
    params, history = train(samples, ARCH2, TrainConfig(epochs=0, seed=5))
    assert len(history) == 0
    ref = init_network(ARCH2, 8, seed=5)
    assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), ref.arrays()))


def test_train_single_class_rejected():
    s = PairSamples(np.ones((6, 2)), np.ones((6, 2)), np.ones(6))
    with pytest.raises(TrainingError):
        train(s, ARCH2, TrainConfig(epochs=1))


def test_history_csv(tmp_path):
    _, history = train(separable_toy(), Architecture((4,)), TrainConfig(epochs=3))
    path = tmp_path / "h.csv"
    history.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_acc" and len(lines) == 4


def test_predict_pair():
    p = init_network(Architecture((5,)), 6, seed=1)
    a = SparseCode.from_dense([0, 1.0, 0], 0.1)
    b = SparseCode.from_dense([2.0, 0, 0], 0.1)
    expect = forward(p, np.concatenate([a.values, b.values]))[0]
    assert predict_pair(p, a, b) == expect
    for w in p.weights:
        w[:] = 0
    assert predict_pair(p, a, b) == 0.5 == predict_pair(p, b, a)
    with pytest.raises(ShapeError):
        predict_pair(p, a, SparseCode.from_dense([1.0, 0], 0.1))


def test_model_round_trip(tmp_path):
    p = init_network(Architecture((6, 3), "tanh"), 10, seed=9)
    p.biases[0][:] = 0.25
    path = tmp_path / "m.spmn"
    cfg = TrainConfig(epochs=3)
    save_model(p, path, cfg, meta={"config_hash": "x"})
    q, config, meta = load_model(path)
    assert q.arch == p.arch and q.input_dim == 10 and q.seed == 9
    assert all(a.tobytes() == b.tobytes() for a, b in zip(p.arrays(), q.arrays()))
    assert meta == {"config_hash": "x"} and config["epochs"] == "3"
    save_model(q, tmp_path / "again.spmn", cfg, meta)
    assert path.read_bytes() == (tmp_path / "again.spmn").read_bytes()


def test_model_corruption(tmp_path, monkeypatch):
    path = tmp_path / "m.spmn"
    save_model(init_network(ARCH2, 4), path)
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(CorruptionError):
        load_model(path)
    path.write_bytes(data[:100] + bytes([data[100] ^ 4]) + data[101:])
    with pytest.raises(CorruptionError):
        load_model(path)
    monkeypatch.setattr(network, "VERSION", 2)
    save_model(init_network(ARCH2, 4), path)
    monkeypatch.undo()
    with pytest.raises(FormatError, match="version"):
        load_model(path)
