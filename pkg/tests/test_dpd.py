"""Tests for indirect-learning predistortion plumbing.

Full-scale linearization quality is exercised by the acceptance suite; here
we pin the gain estimator, the result object, the predistorter's signal
handling, and a short deterministic train/evaluate round trip.
"""

import numpy as np
import pytest

from padpd.dataset import feature_graphs
from padpd.dpd import (
    DpdResult,
    apply_dpd,
    estimate_linear_gain,
    evaluate_linearization,
    train_dpd,
)
from padpd.metrics import ChannelPlan
from padpd.network import ConvNetArch, ConvNetParams, forward_batch, init_params
from padpd.pa import PolyPaModel, default_pa
from padpd.signals import ComplexSeq, OfdmConfig, generate_ofdm
from padpd.training import AdamConfig, LmConfig

RNG = np.random.default_rng(404)


def _seq(data):
    return ComplexSeq(np.asarray(data, dtype=complex))


def test_estimate_linear_gain_exact():
    x = _seq(RNG.normal(size=50) + 1j * RNG.normal(size=50))
    y = x.with_data((2.0 + 1.0j) * x.data)
    assert estimate_linear_gain(x, y) == pytest.approx(abs(2.0 + 1.0j), rel=1e-12)
    assert estimate_linear_gain(x, x.with_data(3.0 * x.data)) == pytest.approx(3.0)


def test_estimate_linear_gain_is_least_squares():
    x = _seq(RNG.normal(size=200) + 1j * RNG.normal(size=200))
    noise = 0.1 * (RNG.normal(size=200) + 1j * RNG.normal(size=200))
    y = x.with_data(1.7 * x.data + noise)
    expect = abs(np.vdot(x.data, y.data) / np.vdot(x.data, x.data))
    assert estimate_linear_gain(x, y) == pytest.approx(expect, rel=1e-12)


def test_estimate_linear_gain_errors():
    x = _seq([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        estimate_linear_gain(x, _seq([1.0, 2.0]))
    with pytest.raises(ValueError):
        estimate_linear_gain(_seq([0.0, 0.0, 0.0]).with_data(np.zeros(3) + 0j), x)
    # output orthogonal to input has zero projection
    with pytest.raises(ValueError):
        estimate_linear_gain(_seq([1.0, 0.0]), _seq([0.0, 1.0]))


def test_dpd_result_properties():
    res = DpdResult(
        acpr_before_db=(-30.0, -31.0),
        acpr_after_db=(-44.0, -42.5),
        nmse_inverse_db=-50.0,
        gain_estimate=0.9,
        predistorted_peak=1.3,
    )
    assert res.improvement_db == pytest.approx((14.0, 11.5))
    assert res.peak_exceeded  # 1.3 > default ceiling 1.2
    assert not DpdResult((-30.0, -30.0), (-40.0, -40.0), -50.0, 0.9, 1.1).peak_exceeded
    d = res.to_dict()
    assert d["improvement_db"] == pytest.approx([14.0, 11.5])
    assert d["peak_exceeded"] is True
    assert d["peak_ceiling"] == 1.2
    with pytest.raises(ValueError):
        DpdResult((-30.0, -30.0), (-40.0, -40.0), -50.0, 0.0, 1.0)


def test_apply_dpd_matches_manual_forward():
    arch = ConvNetArch()
    params = init_params(arch, 3)
    x = _seq(0.5 * (RNG.normal(size=40) + 1j * RNG.normal(size=40)))
    scale = 1.7
    out = apply_dpd(params, arch, x, scale)

    m = arch.memory_depth
    z = x.scaled(scale)
    graphs = feature_graphs(z, m, len(x) - m, m)
    pred = forward_batch(params, arch, graphs)
    expect = (pred[:, 0] + 1j * pred[:, 1]) / scale
    assert np.array_equal(out.data[:m], x.data[:m])  # warm-up passes through
    np.testing.assert_allclose(out.data[m:], expect, rtol=1e-12)
    assert out.sample_rate_hz == x.sample_rate_hz
    assert len(out) == len(x)


def test_apply_dpd_zero_params_zero_output():
    arch = ConvNetArch()
    params = ConvNetParams.from_list(
        [np.zeros_like(a) for a in init_params(arch, 0).as_list()]
    )
    x = _seq(RNG.normal(size=20) + 1j * RNG.normal(size=20))
    out = apply_dpd(params, arch, x, 1.0)
    assert np.array_equal(out.data[: arch.memory_depth], x.data[: arch.memory_depth])
    assert np.all(out.data[arch.memory_depth:] == 0)


def test_apply_dpd_validation():
    arch = ConvNetArch()
    params = init_params(arch, 0)
    x = _seq(RNG.normal(size=10) + 1j * RNG.normal(size=10))
    with pytest.raises(ValueError):
        apply_dpd(params, arch, x, 0.0)
    with pytest.raises(ValueError):
        apply_dpd(params, arch, _seq([1.0, 1.0, 1.0]), 1.0)  # len == memory_depth


def test_train_and_evaluate_round_trip():
    pa = default_pa(0)
    cfg = OfdmConfig(n_symbols=4, seed=2)
    drive = generate_ofdm(cfg).scaled(10 ** (-3.0 / 20.0))
    arch = ConvNetArch()
    params, info = train_dpd(
        pa, drive, arch, AdamConfig(max_iters=800), LmConfig(max_iters=30), count=600
    )
    # short run: not linearization-grade, but clearly better than no model
    assert info["nmse_inverse_db"] < -25.0
    assert info["gain_estimate"] > 0
    assert info["scale"] > 0
    assert info["stage1_history"].shape == (800, 3)

    plan = ChannelPlan.for_bandwidth(cfg.occupied_bandwidth_hz)
    result, spectra = evaluate_linearization(
        pa, drive, params, arch, info["scale"], plan,
        info["gain_estimate"], info["nmse_inverse_db"], segment=256,
    )
    assert result.nmse_inverse_db == pytest.approx(info["nmse_inverse_db"])
    assert all(np.isfinite(v) for v in result.acpr_before_db + result.acpr_after_db)
    assert 0 < result.predistorted_peak < 1.2
    assert len(spectra["freqs_hz"]) == len(spectra["psd_before"]) == len(spectra["psd_after"])
    assert len(spectra["predistorted"]) == len(drive)
    # the bare-PA output in the spectra dict matches a direct PA run
    from padpd.pa import pa_forward

    np.testing.assert_allclose(
        spectra["output_before"].data, pa_forward(pa, drive).data, rtol=1e-12
    )


def test_train_dpd_linear_pa_gain():
    # a purely linear PA: the estimated gain must match |a0| closely
    pa = PolyPaModel(np.array([0.8 - 0.2j]), np.zeros((0, 0)))
    cfg = OfdmConfig(n_symbols=2, seed=2)
    drive = generate_ofdm(cfg)
    from padpd.pa import transmit_chain

    y = transmit_chain(pa, drive)
    assert estimate_linear_gain(drive, y) == pytest.approx(abs(0.8 - 0.2j), rel=1e-9)
