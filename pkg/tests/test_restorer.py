import numpy as np
import pytest

from genesis.errors import ArgumentError, IoError
from genesis.restorer import (
    Architecture,
    TinyRestorer,
    backward,
    encode,
    extract_encoder,
    forward,
    init_model,
    l1_loss,
    linear_probe,
    load_model,
    save_history,
    save_model,
    train,
)
from genesis.rng import TAG_CROP, stream

# a small architecture keeps the finite-difference loop cheap
ARCH = Architecture(input_len=64, hidden=16, code=8)


def _model(seed=1):
    return init_model(ARCH, stream(seed, 0, TAG_CROP))


def _batch(n, seed=0, arch=ARCH):
    rng = np.random.default_rng(seed)
    return rng.random((n, arch.input_len)), rng.random((n, arch.input_len))


def test_init_deterministic_bounded_and_zero_bias():
    a = _model(seed=3)
    b = _model(seed=3)
    c = _model(seed=4)
    for name, fan_in, fan_out in ARCH.layer_dims():
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        assert np.array_equal(a.params[name], b.params[name])
        assert np.abs(a.params[name]).max() < bound
        assert not np.array_equal(a.params[name], c.params[name])
        bias = a.params["b" + name[1:]]
        assert np.array_equal(bias, np.zeros(fan_out))


def test_forward_shape_range_and_determinism():
    model = _model()
    x = np.random.default_rng(2).random(ARCH.input_len)
    out = forward(model, x)
    assert out.shape == (ARCH.input_len,)
    assert (out > 0.0).all() and (out < 1.0).all()
    assert np.array_equal(out, forward(model, x))
    batch = np.random.default_rng(3).random((5, ARCH.input_len))
    assert forward(model, batch).shape == (5, ARCH.input_len)
    with pytest.raises(ArgumentError):
        forward(model, np.zeros(ARCH.input_len + 1))


def test_all_zero_weights_output_half():
    params = {k: np.zeros_like(v) for k, v in _model().params.items()}
    model = TinyRestorer(ARCH, params)
    out = forward(model, np.random.default_rng(4).random(ARCH.input_len))
    assert np.array_equal(out, np.full(ARCH.input_len, 0.5))


def test_l1_loss_basics():
    assert l1_loss(np.ones(5), np.ones(5)) == 0.0
    assert l1_loss(np.ones(5), np.zeros(5)) == 1.0
    perm = np.random.default_rng(5).permutation(8)
    a, b = np.random.default_rng(6).random((2, 8))
    assert l1_loss(a, b) == pytest.approx(l1_loss(a[perm], b[perm]))
    with pytest.raises(ArgumentError):
        l1_loss(np.ones(3), np.ones(4))


def test_dead_input_path_has_zero_gradient():
    model = _model()
    x_tilde = np.zeros(ARCH.input_len)  # zero input -> w1 rows never activate
    x = np.random.default_rng(7).random(ARCH.input_len)
    _, grads = backward(model, x_tilde, x)
    assert np.array_equal(grads["w1"], np.zeros_like(grads["w1"]))


def test_gradients_match_central_differences():
    model = _model(seed=9)
    rng = np.random.default_rng(10)
    x_tilde = rng.random((3, ARCH.input_len))
    x = rng.random((3, ARCH.input_len))
    base_loss, grads = backward(model, x_tilde, x)

    # skip configurations where a near-zero residual puts finite
    # differences across the L1 kink
    trace_err = forward(model, x_tilde) - x
    assert np.abs(trace_err).min() > 1e-7

    eps = 1e-5
    names = list(model.params)
    picker = np.random.default_rng(11)
    checked = 0
    max_rel = 0.0
    while checked < 100:
        name = names[picker.integers(len(names))]
        tensor = model.params[name]
        flat_idx = picker.integers(tensor.size)
        idx = np.unravel_index(flat_idx, tensor.shape)
        original = tensor[idx]
        tensor[idx] = original + eps
        up, _ = backward(model, x_tilde, x)
        tensor[idx] = original - eps
        down, _ = backward(model, x_tilde, x)
        tensor[idx] = original
        numeric = (up - down) / (2 * eps)
        analytic = grads[name][idx]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        max_rel = max(max_rel, abs(numeric - analytic) / denom)
        checked += 1
    assert max_rel < 1e-4


def test_gradients_deterministic():
    model = _model(seed=12)
    x_tilde, x = _batch(2, seed=13)
    _, g1 = backward(model, x_tilde, x)
    _, g2 = backward(model, x_tilde, x)
    for key in g1:
        assert np.array_equal(g1[key], g2[key])


def test_train_zero_lr_keeps_weights():
    model = _model(seed=14)
    x_tilde, x = _batch(8, seed=15)
    trained, history = train(model, x_tilde, x, steps=5, lr=0.0, batch=4,
                             rng=stream(1, 1, TAG_CROP))
    assert len(history.losses) == 5
    for key in model.params:
        assert np.array_equal(trained.params[key], model.params[key])


def test_train_identity_pairs_reduces_loss():
    wins = 0
    for seed in range(10):
        model = init_model(ARCH, stream(20 + seed, 0, TAG_CROP))
        data = np.random.default_rng(30 + seed).random((64, ARCH.input_len))
        trained, history = train(model, data, data, steps=150, lr=0.5, batch=16,
                                 rng=stream(40 + seed, 0, TAG_CROP), momentum=0.9)
        start = np.mean(history.losses[:5])
        end = np.mean(history.losses[-5:])
        wins += end < start
    assert wins >= 10 * 0.95


def test_train_does_not_mutate_input_model():
    model = _model(seed=16)
    snapshot = {k: v.copy() for k, v in model.params.items()}
    x_tilde, x = _batch(8, seed=17)
    train(model, x_tilde, x, steps=3, lr=0.1, batch=4, rng=stream(2, 0, TAG_CROP))
    for key in snapshot:
        assert np.array_equal(model.params[key], snapshot[key])


def test_encoder_matches_forward_half():
    model = _model(seed=18)
    x = np.random.default_rng(19).random(ARCH.input_len)
    feats = encode(model, x)
    assert feats.shape == (ARCH.code,)
    # recompute the first two layers by hand
    p = model.params
    a1 = np.maximum(x @ p["w1"] + p["b1"], 0.0)
    a2 = np.maximum(a1 @ p["w2"] + p["b2"], 0.0)
    assert np.array_equal(feats, a2)

    frozen = extract_encoder(model)
    before = frozen(x)
    model.params["w1"][:] = 0.0
    assert np.array_equal(frozen(x), before)


def test_linear_probe_separable_features():
    def trivial_encoder(batch):
        return batch[:, :8]

    rng = np.random.default_rng(20)
    n = 120
    labels = np.repeat([0, 1], n // 2)
    feats = rng.random((n, 64)) * 0.1
    feats[labels == 1, 0] += 5.0
    result = linear_probe(trivial_encoder, feats, labels, rng=stream(3, 0, TAG_CROP))
    assert result.accuracy == 1.0
    assert result.auc == 1.0


def test_linear_probe_random_features_near_chance():
    def noise_encoder(batch):
        # features unrelated to the label
        return np.random.default_rng(21).random((len(batch), 16))

    rng = np.random.default_rng(22)
    n = 400
    labels = np.repeat([0, 1], n // 2)
    patches = rng.random((n, 32))
    result = linear_probe(noise_encoder, patches, labels, rng=stream(4, 0, TAG_CROP))
    assert 0.35 < result.auc < 0.65


def test_linear_probe_single_class_rejected():
    with pytest.raises(ArgumentError):
        linear_probe(lambda b: b, np.random.random((10, 4)), np.zeros(10))


def test_checkpoint_roundtrip(tmp_path):
    model = _model(seed=23)
    path = tmp_path / "model.bin"
    save_model(model, path)
    back = load_model(path)
    assert back.arch == model.arch
    for key in model.params:
        assert np.array_equal(back.params[key], model.params[key])
    (tmp_path / "junk.bin").write_bytes(b"JUNKJUNKJUNKJUNKJUNK")
    with pytest.raises(IoError):
        load_model(tmp_path / "junk.bin")


def test_history_csv(tmp_path):
    model = _model(seed=24)
    x_tilde, x = _batch(4, seed=25)
    _, history = train(model, x_tilde, x, steps=3, lr=0.1, batch=2,
                       rng=stream(5, 0, TAG_CROP))
    out = tmp_path / "hist.csv"
    save_history(history, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "step,loss"
    assert len(lines) == 4
    assert float(lines[1].split(",")[1]) == history.losses[0]
