import numpy as np
import pytest

from adequacy.traces import LOAD_SHAPE_ID, TraceStore, read_trace_csv, write_trace_csv


def test_series_are_read_only():
    store = TraceStore({"a": [0.1, 0.2]})
    with pytest.raises(ValueError):
        store["a"][0] = 1.0


def test_unknown_trace_raises_key_error():
    with pytest.raises(KeyError, match="unknown trace"):
        TraceStore({"a": [1.0]})["b"]


def test_non_finite_values_rejected():
    with pytest.raises(ValueError):
        TraceStore({"a": [1.0, np.nan]})


def test_calendar_alignment():
    store = TraceStore({"a": np.zeros(72)}, steps_per_day=24)
    assert store.n_days == 3
    assert store.day_of_step(47) == 1
    assert store.length == 72


def test_with_series_returns_new_store():
    store = TraceStore({"a": [1.0, 2.0]})
    new = store.with_series(b=[3.0, 4.0])
    assert "b" in new and "b" not in store


def test_csv_round_trip(tmp_path):
    load = np.array([50.0, 80.0, 100.0, 60.0])
    wind = np.array([0.1, 0.5, 0.9, 0.0])
    solar = np.array([0.0, 0.3, 0.6, 0.0])
    path = tmp_path / "t.csv"
    write_trace_csv(path, load, wind, solar, extra={"hydro_cf": np.full(4, 0.5)})
    store = read_trace_csv(path, steps_per_day=4)
    np.testing.assert_array_equal(store["load_mw"], load)
    np.testing.assert_array_equal(store["wind_cf"], wind)
    np.testing.assert_array_equal(store["hydro_cf"], np.full(4, 0.5))
    np.testing.assert_allclose(store[LOAD_SHAPE_ID], load / 100.0)
    assert store[LOAD_SHAPE_ID].max() == 1.0


@pytest.mark.parametrize("text, message", [
    ("time,load_mw,wind_cf,solar_cf\n0,1,0,0\n", "header"),
    ("timestamp,load_mw,wind_cf,solar_cf\n0,1,0\n", "expected 4 fields"),
    ("timestamp,load_mw,wind_cf,solar_cf\n0,1,0,abc\n", "not a number"),
    ("timestamp,load_mw,wind_cf,solar_cf\n", "no data rows"),
    ("", "empty"),
])
def test_malformed_csv(tmp_path, text, message):
    path = tmp_path / "bad.csv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ValueError, match=message):
        read_trace_csv(path)
