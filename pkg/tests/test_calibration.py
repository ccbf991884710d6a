import json

import pytest

from distb import blockchain as bc
from distb.calibration import fit_gas, fit_response, load_default, load_reference_tables
from distb.simulator import recalibrate


@pytest.fixture(scope="module")
def refit():
    return recalibrate()


def test_gas_fit_matches_frozen_constants():
    base, per_tx = fit_gas()
    assert base == bc.GAS_BASE
    assert per_tx == bc.GAS_PER_TX


def test_gas_fit_rows_within_10pct():
    base, per_tx = fit_gas()
    t = load_reference_tables()["gas"]
    for n, g in zip(t["tx_count"], t["gas"]):
        assert abs((base + per_tx * n) - g) / g <= 0.10


def test_response_fit_rows_within_15pct():
    import math

    fits = fit_response()
    t = load_reference_tables()["response_ms"]
    for mode in ("distb", "core"):
        a, b = fits[mode]["alpha"], fits[mode]["beta"]
        for s, y in zip(t["file_mb"], t[mode]):
            pred = a + b * math.log2(s)
            assert abs(pred - y) / y <= 0.15, (mode, s, pred, y)


def test_default_record_matches_recalibration(refit):
    # the shipped default is exactly what recalibrate() produces
    shipped = load_default().to_dict()
    fresh = refit.to_dict()
    assert json.dumps(shipped, sort_keys=True) == json.dumps(fresh, sort_keys=True)


def test_envelopes_interpolate_anchors(refit):
    t = load_reference_tables()["throughput_kbps"]
    for n, d, b in zip(t["nodes"], t["distb"], t["baseline"]):
        assert refit.throughput_envelope("distb", n) == d
        assert refit.throughput_envelope("of-baseline", n) == b
    # between anchors: linear and monotone
    assert 2.0 <= refit.throughput_envelope("distb", 3) <= 4.0


def test_response_model_orders_modes(refit):
    for s in (2, 16, 128, 1024):
        assert refit.response_ms("distb", s) < refit.response_ms("core", s)


def test_cpu_constants(refit):
    assert refit.cpu_base_pct == 3.0
    assert refit.cpu_kappa > 0
    assert refit.cpu_smoothing == 0.35
