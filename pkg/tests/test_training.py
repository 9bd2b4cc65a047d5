"""Tests for the Adam stage, the LM polish, and their shared plumbing."""

import numpy as np
import pytest

from padpd.dataset import Dataset, build_dataset
from padpd.network import (
    Activation,
    ConvNetArch,
    ConvNetParams,
    forward_batch,
    init_params,
    mlp_forward,
    mlp_init,
)
from padpd.signals import ComplexSeq
from padpd.training import (
    AdamConfig,
    LmConfig,
    adam_init,
    adam_step,
    backprop_grads,
    mlp_cost_and_grads,
    mse_cost,
    pack_fc,
    train_mlp_adam,
    train_stage1_adam,
    train_stage2_lm,
    unpack_fc,
    write_history_csv,
)


def tiny_task(arch, n=60, seed=0, label_seed=1):
    """Random graphs with labels from a slightly perturbed random net."""
    rng = np.random.default_rng(seed)
    graphs = rng.standard_normal((n, *arch.input_shape)) * 0.4
    teacher = init_params(arch, label_seed)
    labels = forward_batch(teacher, arch, graphs)
    labels = labels + 0.01 * rng.standard_normal(labels.shape)
    return Dataset(graphs, labels, "train")


def test_mse_cost_formula():
    arch = ConvNetArch(memory_depth=1, kernel_cols=2, kernel_rows=2, n_kernels=2, fc_neurons=3)
    data = tiny_task(arch, n=17)
    params = init_params(arch, 5)
    out = forward_batch(params, arch, data.graphs)
    resid = out - data.labels
    expect = np.sum(resid**2) / (2 * 17)
    assert mse_cost(params, arch, data) == pytest.approx(expect, rel=1e-12)


def test_backprop_matches_finite_differences():
    arch = ConvNetArch(memory_depth=2, kernel_cols=2, kernel_rows=3, n_kernels=2, fc_neurons=4)
    data = tiny_task(arch, n=25, seed=3)
    params = init_params(arch, 11)
    grads = backprop_grads(params, arch, data)

    h = 1e-6
    rng = np.random.default_rng(0)
    arrays = params.as_list()
    grad_arrays = grads.as_list()
    for a_idx in range(len(arrays)):
        flat_idx = rng.integers(0, arrays[a_idx].size, size=min(4, arrays[a_idx].size))
        for fi in flat_idx:
            for sgn, store in ((1, "plus"), (-1, "minus")):
                bumped = [a.copy() for a in arrays]
                bumped[a_idx].ravel()[fi] += sgn * h
                cost = mse_cost(ConvNetParams.from_list(bumped), arch, data)
                if store == "plus":
                    c_plus = cost
                else:
                    c_minus = cost
            numeric = (c_plus - c_minus) / (2 * h)
            analytic = grad_arrays[a_idx].ravel()[fi]
            assert analytic == pytest.approx(numeric, rel=1e-5, abs=1e-9)


def test_adam_step_reference_update():
    cfg = AdamConfig(learning_rate=0.1)
    values = [np.array([1.0, -2.0])]
    state = adam_init(values)

    m = np.zeros(2)
    v = np.zeros(2)
    ref = values[0].copy()
    for k in range(1, 4):
        grad = np.array([0.5, -1.5]) * k
        m = cfg.beta1 * m + (1 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1 - cfg.beta2) * grad**2
        m_hat = m / (1 - cfg.beta1**k)
        v_hat = v / (1 - cfg.beta2**k)
        ref = ref - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
        values = adam_step(values, [np.array([0.5, -1.5]) * k], state, cfg)
    assert np.allclose(values[0], ref, rtol=1e-12)
    assert state.step == 3


def test_stage1_descends_and_stops_at_threshold():
    arch = ConvNetArch(memory_depth=1, kernel_cols=2, kernel_rows=2, n_kernels=2, fc_neurons=3)
    data = tiny_task(arch, n=80)
    params = init_params(arch, 2)
    cfg = AdamConfig(max_iters=300, mse_threshold=0.0)
    trained, hist = train_stage1_adam(params, arch, data, cfg)
    assert hist.shape == (300, 2)
    assert hist[-1, 1] < hist[0, 1] * 0.5  # solid improvement
    assert mse_cost(trained, arch, data) <= hist[-1, 1]

    # threshold met at the first evaluation: no update happens
    lazy, hist0 = train_stage1_adam(params, arch, data, AdamConfig(mse_threshold=1e9))
    assert hist0.shape == (1, 2)
    for a, b in zip(lazy.as_list(), params.as_list()):
        assert np.array_equal(a, b)

    # with a test split the history grows a third column
    test = tiny_task(arch, n=30, seed=9)
    _, hist3 = train_stage1_adam(params, arch, data, AdamConfig(max_iters=5, mse_threshold=0.0), test)
    assert hist3.shape == (5, 3)


def test_pack_unpack_roundtrip():
    arch = ConvNetArch()
    params = init_params(arch, 1)
    theta = pack_fc(params)
    assert theta.size == 18 * 6 + 6 + 6 * 2 + 2  # 128 trainables past the conv layer
    fc_w, fc_b, out_w, out_b = unpack_fc(theta, arch)
    assert np.array_equal(fc_w, params.fc_weights)
    assert np.array_equal(fc_b, params.fc_biases)
    assert np.array_equal(out_w, params.out_weights)
    assert np.array_equal(out_b, params.out_biases)
    with pytest.raises(ValueError):
        unpack_fc(theta[:-1], arch)


def test_lm_polish_improves_and_freezes_conv():
    arch = ConvNetArch(memory_depth=2, kernel_cols=2, kernel_rows=3, n_kernels=2, fc_neurons=4)
    data = tiny_task(arch, n=120, seed=4)
    params = init_params(arch, 3)
    warm, _ = train_stage1_adam(params, arch, data, AdamConfig(max_iters=150, mse_threshold=0.0))
    cost_before = mse_cost(warm, arch, data)

    polished, result = train_stage2_lm(warm, arch, data, LmConfig())
    cost_after = mse_cost(polished, arch, data)
    assert cost_after <= cost_before * (1 + 1e-12)
    assert result.converged
    assert result.reason in ("gradient", "stalled", "damping_limit")

    assert np.array_equal(polished.conv_kernels, warm.conv_kernels)
    assert np.array_equal(polished.conv_biases, warm.conv_biases)

    # accepted-step cost trace is monotone non-increasing
    hist = result.history
    assert hist.shape[1] == 5
    accepted = hist[hist[:, 3] == 1]
    assert len(accepted) >= 1
    assert np.all(np.diff(accepted[:, 1]) <= 1e-15)


def test_lm_converges_immediately_at_zero_residual():
    arch = ConvNetArch(memory_depth=1, kernel_cols=2, kernel_rows=2, n_kernels=2, fc_neurons=3)
    rng = np.random.default_rng(6)
    graphs = rng.standard_normal((40, *arch.input_shape)) * 0.3
    params = init_params(arch, 7)
    labels = forward_batch(params, arch, graphs)  # exact fit already
    data = Dataset(graphs, labels, "train")
    polished, result = train_stage2_lm(params, arch, data, LmConfig())
    assert result.converged and result.reason == "gradient"
    assert result.n_iters == 0
    assert np.array_equal(polished.fc_weights, params.fc_weights)


def test_mlp_grads_match_finite_differences():
    layers = mlp_init([3, 4, 2], Activation("tanh"), seed=8)
    rng = np.random.default_rng(9)
    x = rng.standard_normal((30, 3))
    labels = rng.standard_normal((30, 2))
    cost, grads = mlp_cost_and_grads(layers, x, labels)

    resid = mlp_forward(layers, x) - labels
    assert cost == pytest.approx(np.sum(resid**2) / 60, rel=1e-12)

    h = 1e-6
    for j, layer in enumerate(layers):
        for (r, c) in [(0, 0), (1, 1)]:
            w_plus = layer.weights.copy()
            w_plus[r, c] += h
            w_minus = layer.weights.copy()
            w_minus[r, c] -= h
            lp = list(layers)
            lp[j] = type(layer)(w_plus, layer.biases, layer.act)
            lm = list(layers)
            lm[j] = type(layer)(w_minus, layer.biases, layer.act)
            cp, _ = mlp_cost_and_grads(lp, x, labels)
            cm, _ = mlp_cost_and_grads(lm, x, labels)
            assert grads[j][0][r, c] == pytest.approx((cp - cm) / (2 * h), rel=1e-5)


def test_train_mlp_adam_descends():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((100, 3))
    w_true = rng.standard_normal((3, 2))
    labels = np.tanh(x) @ w_true
    layers = mlp_init([3, 5, 2], Activation("tanh"), seed=0)
    trained, hist = train_mlp_adam(layers, x, labels, AdamConfig(max_iters=400, mse_threshold=0.0))
    assert hist[-1, 1] < hist[0, 1] * 0.2
    # returned layers sit one update past the last history row
    final, _ = mlp_cost_and_grads(trained, x, labels)
    assert final < hist[0, 1] * 0.2


def test_write_history_csv(tmp_path):
    hist = np.array([[1, 0.5], [2, 0.25]])
    path = tmp_path / "h.csv"
    write_history_csv(hist, path, comment="stage 1")
    lines = path.read_text().splitlines()
    assert lines[0] == "# stage 1"
    assert lines[1] == "iter,mse_train"
    assert lines[2].startswith("1,")

    hist3 = np.array([[1, 0.5, 0.6]])
    write_history_csv(hist3, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,mse_train,mse_test"
