"""Tests for the synthetic memory-polynomial PA and front-end impairments."""

import math

import numpy as np
import pytest

from padpd.pa import (
    ConstructionError,
    ImpairmentConfig,
    PolyPaModel,
    apply_impairments,
    default_pa,
    gain_compression_db,
    iq_imbalance_coefficients,
    load_pa,
    pa_forward,
    save_pa,
    steady_state_gain,
    transmit_chain,
)
from padpd.signals import ComplexSeq


def reference_forward(a, c, x):
    """Direct per-sample evaluation of the memory polynomial."""
    k_order = len(a)
    q_depth = c.shape[1] + 1 if c.size else 1
    y = np.zeros(len(x), dtype=complex)
    for n in range(len(x)):
        for k in range(k_order):
            y[n] += a[k] * x[n] * abs(x[n]) ** k
        for k in range(1, k_order):
            for q in range(1, q_depth):
                past = x[n - q] if n - q >= 0 else 0.0
                y[n] += c[k - 1, q - 1] * x[n] * abs(past) ** k
    return y


def test_model_validation():
    with pytest.raises(ValueError):
        PolyPaModel(np.array([0.0]), np.zeros((0, 0)))  # zero linear gain
    with pytest.raises(ValueError):
        PolyPaModel(np.array([1.0, 0.1]), np.zeros((3, 2)))  # row count mismatch
    with pytest.raises(ValueError):
        PolyPaModel(np.array([1.0, np.inf]), np.zeros((1, 0)))
    m = PolyPaModel(np.array([1.0, -0.2 + 0.1j]), np.full((1, 2), 0.05j))
    assert m.k_order == 2
    assert m.q_depth == 3


def test_forward_matches_reference():
    rng = np.random.default_rng(42)
    a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    a[0] = 1.0
    c = 0.1 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    model = PolyPaModel(a, c)
    x = 0.5 * (rng.standard_normal(40) + 1j * rng.standard_normal(40))
    y = pa_forward(model, ComplexSeq(x))
    assert np.allclose(y.data, reference_forward(a, c, x), rtol=1e-12)


def test_forward_memoryless_and_linear_cases():
    lin = PolyPaModel(np.array([2.0 - 1.0j]), np.zeros((0, 0)))
    x = ComplexSeq(np.array([0.1, -0.4j, 0.3 + 0.2j]))
    assert np.allclose(pa_forward(lin, x).data, (2.0 - 1.0j) * x.data)

    # a pure third-order term: y = a2 * x * |x|^2
    cubic = PolyPaModel(np.array([1.0, 0.0, -0.3]), np.zeros((2, 0)))
    y = pa_forward(cubic, x)
    assert np.allclose(y.data, x.data - 0.3 * x.data * np.abs(x.data) ** 2)


def test_steady_state_gain_analytic():
    model = PolyPaModel(
        np.array([1.0, 0.0, -0.2]), np.array([[0.05], [0.0]], dtype=complex)
    )
    # constant envelope A: gain = |a0 + a2 A^2 + c11 A|
    for amp in (0.3, 1.0):
        expect = abs(1.0 - 0.2 * amp**2 + 0.05 * amp)
        assert steady_state_gain(model, amp) == pytest.approx(expect, rel=1e-9)
    with pytest.raises(ValueError):
        steady_state_gain(model, 0.0)


def test_gain_compression_formula():
    # compression = 20 log10 |a0| - 20 log10 gain(1.0)
    model = PolyPaModel(np.array([1.0, 0.0, -0.25]), np.zeros((2, 0)))
    expect = -20 * math.log10(abs(1.0 - 0.25))
    assert gain_compression_db(model) == pytest.approx(expect, rel=1e-9)


def test_default_pa_contract():
    for seed in range(6):
        pa = default_pa(seed)
        assert pa.k_order == 5
        assert pa.q_depth == 4
        assert abs(pa.a[0]) == 1.0
        assert 2.9 <= gain_compression_db(pa) <= 3.1
        assert np.abs(pa.c).max() <= 0.1 + 1e-12  # cross terms capped at 10% of a0
    # deterministic construction
    p1, p2 = default_pa(3), default_pa(3)
    assert np.array_equal(p1.a, p2.a)
    assert np.array_equal(p1.c, p2.c)
    with pytest.raises(ConstructionError):
        default_pa(0, k_order=1)


def test_default_pa_output_finite_at_soft_peak():
    pa = default_pa(0)
    rng = np.random.default_rng(8)
    x = rng.standard_normal(500) + 1j * rng.standard_normal(500)
    x = 1.2 * x / np.max(np.abs(x))
    y = pa_forward(pa, ComplexSeq(x))
    assert np.isfinite(y.data).all()


def test_impairment_cases_table():
    c1 = ImpairmentConfig.case(1)
    assert not c1.enable_iq_imbalance and not c1.enable_dc_offset

    c2 = ImpairmentConfig.case(2)
    assert c2.iq_gain_imbalance_db == 1.0
    assert c2.iq_phase_imbalance_deg == 3.0
    assert c2.enable_iq_imbalance and not c2.enable_dc_offset

    c3 = ImpairmentConfig.case(3)
    assert c3.dc_offset_i_frac == 0.03
    assert c3.dc_offset_q_frac == 0.05
    assert c3.enable_iq_imbalance and c3.enable_dc_offset

    with pytest.raises(ValueError):
        ImpairmentConfig.case(4)
    with pytest.raises(ValueError):
        ImpairmentConfig(iq_gain_imbalance_db=5.0)
    with pytest.raises(ValueError):
        ImpairmentConfig(dc_offset_i_frac=0.5)


def test_iq_imbalance_map():
    cfg = ImpairmentConfig.case(2)
    mu, nu = iq_imbalance_coefficients(cfg)
    g = 10 ** (1.0 / 20)
    ge = g * np.exp(1j * math.radians(3.0))
    assert mu == pytest.approx((1 + ge) / 2, rel=1e-12)
    assert nu == pytest.approx((1 - ge) / 2, rel=1e-12)

    # image rejection ratio for 1 dB / 3 deg lands near -24 dB
    irr = 20 * np.log10(abs(nu) / abs(mu))
    assert irr == pytest.approx(-23.99, abs=0.05)

    x = ComplexSeq(np.array([0.2 + 0.1j, -0.3j, 0.15]))
    out = apply_impairments(x, cfg)
    assert np.allclose(out.data, mu * x.data + nu * np.conj(x.data), rtol=1e-12)


def test_dc_offset_scales_with_rms():
    cfg = ImpairmentConfig(
        dc_offset_i_frac=0.03, dc_offset_q_frac=0.05, enable_dc_offset=True
    )
    rng = np.random.default_rng(5)
    x = ComplexSeq(0.1 * (rng.standard_normal(200) + 1j * rng.standard_normal(200)))
    out = apply_impairments(x, cfg)
    shift = out.data - x.data
    assert np.allclose(shift, (0.03 + 0.05j) * x.rms(), rtol=1e-12)

    # identity when nothing is enabled
    clean = apply_impairments(x, ImpairmentConfig.case(1))
    assert np.array_equal(clean.data, x.data)


def test_transmit_chain_composition():
    pa = default_pa(1)
    rng = np.random.default_rng(2)
    x = ComplexSeq(0.4 * (rng.standard_normal(100) + 1j * rng.standard_normal(100)))
    cfg = ImpairmentConfig.case(3)
    direct = pa_forward(pa, apply_impairments(x, cfg))
    assert np.array_equal(transmit_chain(pa, x, cfg).data, direct.data)
    assert np.array_equal(transmit_chain(pa, x).data, pa_forward(pa, x).data)


def test_pa_save_load_roundtrip(tmp_path):
    pa = default_pa(4)
    path = tmp_path / "pa.json"
    save_pa(pa, path)
    back = load_pa(path)
    assert np.array_equal(back.a, pa.a)
    assert np.array_equal(back.c, pa.c)
