import numpy as np
import pytest

from helpvote.errors import DimensionMismatch
from helpvote.features import StandardizationStats
from helpvote.models import (
    EVAL,
    MODEL_KINDS,
    TRAIN,
    DenseLayer,
    Model,
    ModelConfig,
    classify,
    forward,
    gradients,
    init_model,
    load_checkpoint,
    loss_from_trace,
    predict,
    save_checkpoint,
    sigmoid,
)


def zero_model(kind, d=3):
    m = init_model(ModelConfig(kind, d))
    return m.with_parameters([np.zeros_like(p) for p in m.parameters()])


def test_init_shapes():
    m = init_model(ModelConfig("mlp64", 3))
    assert [l.W.shape for l in m.layers] == [(64, 3), (32, 64), (1, 32)]
    m = init_model(ModelConfig("mlp64deep", 3))
    assert [l.W.shape for l in m.layers] == [(64, 3), (32, 64), (32, 32), (32, 32), (1, 32)]
    m = init_model(ModelConfig("mlp128", 3))
    assert [l.W.shape for l in m.layers] == [(128, 3), (1, 128)]
    for kind in ("linear", "logistic"):
        assert [l.W.shape for l in init_model(ModelConfig(kind, 3)).layers] == [(1, 3)]


def test_init_deterministic_and_bounded():
    a = init_model(ModelConfig("mlp64", 3, seed=9))
    b = init_model(ModelConfig("mlp64", 3, seed=9))
    c = init_model(ModelConfig("mlp64", 3, seed=10))
    for p, q in zip(a.parameters(), b.parameters()):
        np.testing.assert_array_equal(p, q)
    assert not np.array_equal(a.layers[0].W, c.layers[0].W)
    for layer in a.layers:
        fan_out, fan_in = layer.W.shape
        assert np.abs(layer.W).max() <= np.sqrt(6 / (fan_in + fan_out))
        assert np.all(layer.b == 0)


def test_zero_parameter_outputs():
    x = np.array([0.3, -1.0, 2.0])
    assert predict(zero_model("logistic"), x)[0] == 0.5
    assert predict(zero_model("linear"), x)[0] == 0.0


def test_hand_forward():
    cfg = ModelConfig("mlp128", 1)
    layers = [DenseLayer(np.zeros((128, 1)), np.zeros(128)), DenseLayer(np.zeros((1, 128)), np.zeros(1))]
    layers[0].W[0, 0], layers[0].b[0] = 2.0, -1.0
    layers[1].W[0, 0] = 3.0
    out = predict(Model(layers, cfg), [1.0])[0]
    assert out == pytest.approx(1 / (1 + np.exp(-3.0)), abs=1e-15)
    assert out == pytest.approx(0.95257, abs=1e-5)


def test_dimension_mismatch():
    m = init_model(ModelConfig("mlp64", 3))
    with pytest.raises(DimensionMismatch):
        forward(m, np.zeros(4))
    with pytest.raises(DimensionMismatch):
        gradients(m, np.zeros((2, 3)), [1, 0, 1], TRAIN, np.random.default_rng(0))


def test_eval_forward_mask_free_and_deterministic():
    m = init_model(ModelConfig("mlp64deep", 3, seed=2))
    x = np.random.default_rng(0).normal(size=(5, 3))
    a, b = forward(m, x, EVAL), forward(m, x, EVAL)
    assert a.masks == [] and np.array_equal(a.output, b.output)


def test_train_masks_have_inverted_values():
    m = init_model(ModelConfig("mlp64", 3, dropout_rate=0.2, seed=2))
    tr = forward(m, np.ones((4, 3)), TRAIN, np.random.default_rng(0))
    assert len(tr.masks) == 2
    for mask in tr.masks:
        assert set(np.unique(mask)) <= {0.0, 1.0 / 0.8}


def test_dropout_expectation_matches_eval():
    m = init_model(ModelConfig("mlp128", 2, dropout_rate=0.2, seed=4))
    x = np.array([[0.7, -0.4]])
    clean = forward(m, x, EVAL)
    first_hidden = np.maximum(clean.pre_activations[0], 0.0)[0]
    rng = np.random.default_rng(1)
    xs = np.repeat(x, 10000, axis=0)
    masked = forward(m, xs, TRAIN, rng).activations[0].mean(axis=0)
    active = first_hidden > 1e-3
    assert active.sum() > 10
    np.testing.assert_allclose(masked[active], first_hidden[active], rtol=0.02)


def test_sigmoid_range_and_monotone():
    z = np.linspace(-30, 30, 1001)
    s = sigmoid(z)
    assert np.all((s > 0) & (s < 1))
    assert np.all(np.diff(s) > 0)


def test_relu_nonnegative_preactivations_are_affine():
    m = init_model(ModelConfig("mlp128", 2, seed=1))
    layers = [DenseLayer(np.abs(l.W), np.abs(l.b) + 0.1) for l in m.layers]
    m = Model(layers, m.config)
    x = np.array([[0.5, 1.5]])
    affine = (x @ layers[0].W.T + layers[0].b) @ layers[1].W.T + layers[1].b
    assert forward(m, x, EVAL).pre_activations[-1][0, 0] == pytest.approx(affine[0, 0], rel=1e-15)


def test_classify_rules():
    assert classify(0.5, 0.5) == 1
    assert classify(0.49, 0.5) == 0
    assert classify(0.7, 0.5) == 1
    assert list(classify(np.array([0.2, 0.5, 0.9]))) == [0, 1, 1]


def finite_difference(model, x, y, masks, step=1e-5):
    grads = []
    for k, p in enumerate(model.parameters()):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            vals = []
            for sign in (1, -1):
                params = [q.copy() for q in model.parameters()]
                params[k][idx] += sign * step
                probe = model.with_parameters(params)
                tr = forward(probe, x, TRAIN, masks=masks)
                vals.append(loss_from_trace(probe, tr, y))
            g[idx] = (vals[0] - vals[1]) / (2 * step)
        grads.append(g)
    return grads


@pytest.mark.parametrize("kind", MODEL_KINDS)
@pytest.mark.parametrize("d", [1, 3])
def test_gradients_match_finite_differences(kind, d):
    seed = 100 + d
    model = init_model(ModelConfig(kind, d, seed=seed))
    rng = np.random.default_rng(seed)
    params = [p + 0.1 * rng.normal(size=p.shape) for p in model.parameters()]
    model = model.with_parameters(params)
    while True:
        # keep every ReLU input clear of the kink so the central difference is valid
        x = rng.normal(size=(4, d))
        if all(np.abs(z).min() > 1e-4 for z in forward(model, x).pre_activations[:-1]):
            break
    y = rng.integers(0, 2, 4)
    analytic, _, trace = gradients(model, x, y, TRAIN, rng)
    numeric = finite_difference(model, x, y, trace.masks or None)
    for a, n in zip(analytic, numeric):
        err = np.abs(a - n)
        ok = (err <= 1e-4 * np.maximum(np.abs(a), np.abs(n))) | (err <= 1e-8)
        assert ok.all()


def test_zero_residual_linear_has_zero_gradient():
    m = init_model(ModelConfig("linear", 2, seed=3))
    x = np.random.default_rng(0).normal(size=(6, 2))
    y = predict(m, x)
    grads, loss, _ = gradients(m, x, y, TRAIN)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads)


@pytest.mark.parametrize("kind", MODEL_KINDS)
def test_duplicated_batch_has_same_mean_gradient(kind):
    m = init_model(ModelConfig(kind, 3, dropout_rate=0.0, seed=5))
    rng = np.random.default_rng(2)
    x = rng.normal(size=(5, 3))
    y = rng.integers(0, 2, 5)
    g1, _, _ = gradients(m, x, y, TRAIN)
    g2, _, _ = gradients(m, np.vstack([x, x]), np.concatenate([y, y]), TRAIN)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_checkpoint_roundtrip_is_bit_identical(tmp_path):
    m = init_model(ModelConfig("mlp64deep", 3, seed=77))
    stats = StandardizationStats(np.array([1.0, 2.0, 3.0]), np.array([0.5, 1.5, 0.0]), np.array([False, False, True]))
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, m, stats, ("a", "b", "c"))
    m2, stats2, names = load_checkpoint(path)
    assert names == ("a", "b", "c") and m2.config == m.config
    for p, q in zip(m.parameters(), m2.parameters()):
        np.testing.assert_array_equal(p, q)
    np.testing.assert_array_equal(stats.mean, stats2.mean)
    x = np.random.default_rng(0).normal(size=(10, 3))
    np.testing.assert_array_equal(predict(m, x), predict(m2, x))
