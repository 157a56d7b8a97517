import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import windowed_means
from privagg.aggregator import (broadcast_signal, generate_day_ahead, generate_target, measure_aggregate,
                                read_series_csv, window_bias, write_series_csv)


def test_measure_aggregate():
    assert measure_aggregate([1, 2, 3]) == 6
    assert measure_aggregate([]) == 0
    assert measure_aggregate([0.5] * 20) == pytest.approx(10)


def test_broadcast_examples():
    assert broadcast_signal(10, 9).e == 1
    assert broadcast_signal(4.2, 4.2).e == 0
    assert broadcast_signal(9, 10).e == -1


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_broadcast_antisymmetric(a, b):
    assert broadcast_signal(a, b).e == -broadcast_signal(b, a).e


BASE = np.array([10.0, 12.0, 9.0, 11.0, 14.0, 13.0, 10.5, 9.5])


def test_zero_reserve_returns_base():
    prof = generate_target(BASE, 0.0, 5.0, seed=1)
    assert np.array_equal(prof.values, np.repeat(BASE, 360))


@pytest.mark.parametrize("corr", [0.0, 120.0])
def test_reserve_bounds_and_neutrality(corr):
    base = np.full(280, 12.0)  # 100800 samples of 5 s
    prof = generate_target(base, 3.0, 5.0, seed=42, correlation_time=corr)
    delta = prof.values - prof.base
    assert delta.size == 100800
    assert np.mean(np.abs(delta) < 3.0) >= 0.99
    assert np.max(np.abs(window_bias(prof))) <= 0.003
    assert np.max(np.abs(delta)) <= 3.0 + 1e-12


@given(st.integers(0, 2 ** 63 - 1))
def test_every_seed_is_neutral(seed):
    prof = generate_target(BASE, 3.0, 5.0, seed=seed)
    assert np.max(np.abs(window_bias(prof))) <= 0.001 * 3.0
    assert np.array_equal(prof.values, generate_target(BASE, 3.0, 5.0, seed=seed).values)


def test_target_errors():
    with pytest.raises(ValueError, match="multiple"):
        generate_target(BASE, 3.0, 5.0, seed=0, horizon=1000.0)
    with pytest.raises(ValueError, match="cover"):
        generate_target(BASE, 3.0, 5.0, seed=0, horizon=BASE.size * 1800.0 + 1800.0)


def test_day_ahead_examples():
    assert np.allclose(generate_day_ahead(np.ones(3600)), [1.0, 1.0])
    assert np.allclose(generate_day_ahead(np.r_[np.zeros(900), 2 * np.ones(900)]), [1.0])
    rng = np.random.default_rng(0)
    h = rng.uniform(0, 3, 7200)
    assert np.allclose(generate_day_ahead(h), windowed_means(h, 1800), rtol=1e-12)
    with pytest.raises(ValueError):
        generate_day_ahead([])
    with pytest.raises(ValueError):
        generate_day_ahead(h, horizon=9000)


def test_series_csv_roundtrip(tmp_path):
    p = tmp_path / "s.csv"
    v = np.array([1.5, 2.25, np.pi])
    write_series_csv(p, v)
    assert p.read_text().splitlines()[0] == "tick,kW"
    assert np.array_equal(read_series_csv(p), v)
    p.write_text("tick,kW\n0,1.0\n1,oops\n")
    with pytest.raises(ValueError, match=":3:"):
        read_series_csv(p)
    p.write_text("t,v\n")
    with pytest.raises(ValueError, match="header"):
        read_series_csv(p)
