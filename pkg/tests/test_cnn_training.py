import numpy as np
import pytest

from polyrefine import cnn


def test_adam_step_matches_reference(rng):
    """One Adam update against a hand-rolled reference implementation."""
    cfg = cnn.TrainConfig(learning_rate=0.01)
    p = rng.normal(size=(3, 2))
    g = rng.normal(size=(3, 2))
    params = [p.copy()]
    state = cnn.AdamState.for_params(params)
    cnn.adam_step(params, [g], state, cfg)
    m = (1 - cfg.beta1) * g
    v = (1 - cfg.beta2) * g * g
    mhat = m / (1 - cfg.beta1)
    vhat = v / (1 - cfg.beta2)
    want = p - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps)
    assert params[0] == pytest.approx(want, rel=1e-12)
    assert state.t == 1


def test_adam_moments_accumulate(rng):
    cfg = cnn.TrainConfig(learning_rate=0.01)
    p = rng.normal(size=4)
    params = [p.copy()]
    state = cnn.AdamState.for_params(params)
    g1, g2 = rng.normal(size=4), rng.normal(size=4)
    cnn.adam_step(params, [g1], state, cfg)
    cnn.adam_step(params, [g2], state, cfg)
    m = (1 - cfg.beta1) * (cfg.beta1 * g1 + g2)
    assert state.m[0] == pytest.approx(m, rel=1e-12)
    assert state.t == 2


def test_toy_training_loss_decreases_across_seeds():
    """400-image toy set: epoch losses drop monotonically over the first
    5 epochs for at least 9 of 10 seeds."""
    data = cnn.generate_dataset(4, 100, seed=123)
    good = 0
    for seed in range(10):
        net = cnn.Network(4, seed=seed)
        cfg = cnn.TrainConfig(seed=seed, max_epochs=5, patience=10)
        hist = cnn.train(net, data, [], cfg)
        losses = hist["train_loss"]
        if all(b < a for a, b in zip(losses, losses[1:])):
            good += 1
    assert good >= 9


def test_confusion_matrix_shape_and_total():
    data = cnn.generate_dataset(4, 8, seed=9)
    net = cnn.Network(4, seed=9)
    cm = cnn.confusion_matrix(net, data)
    assert cm.shape == (4, 4)
    assert cm.sum() == len(data)
    assert cnn.accuracy(cm) == pytest.approx(np.trace(cm) / len(data))


def test_refresh_norm_stats_consistency(rng):
    """After recalibration, inference statistics match the exact aggregate
    of the calibration batch statistics."""
    net = cnn.Network(4, seed=2)
    imgs = (rng.random((64, 64, 64)) > 0.5).astype(np.float32)
    net.refresh_norm_stats(imgs, batch_size=16)
    first_bn = net.layers[1]
    x = imgs[..., None]
    mu, var = first_bn.batch_stats(net.layers[0].forward(x, train=False))
    assert first_bn.running_mean == pytest.approx(mu, abs=1e-4)
    assert first_bn.running_var == pytest.approx(var, rel=1e-3, abs=1e-4)
