from pathlib import Path

import numpy as np
import pytest

from adequacy.model import Horizon, LoadModel, Scenario, SystemResources, UnlimitedUnit, VariableUnit
from adequacy.oracle import read_toy_fixture
from adequacy.traces import TraceStore

FIXTURES = Path(__file__).parent / "fixtures"


def make_scenario(load, p_u=0.0, p_v=0.0, storage_initials=(), flex_baselines=None, flex_caps=None,
                  col_wind=None, col_baseline=None, scenario_id=0) -> Scenario:
    load = np.asarray(load, dtype=float)
    T = len(load)
    fb = np.zeros((0, T)) if flex_baselines is None else np.atleast_2d(flex_baselines)
    fc = np.zeros((0, T)) if flex_caps is None else np.atleast_2d(flex_caps)
    cw = np.zeros((0, T)) if col_wind is None else np.atleast_2d(col_wind)
    cb = np.zeros((0, T)) if col_baseline is None else np.atleast_2d(col_baseline)
    return Scenario(scenario_id, np.broadcast_to(p_u, T), np.broadcast_to(p_v, T), load,
                    np.asarray(storage_initials, dtype=float), fb, fc, cw, cb)


def flat_system(T: int, supply_mw, peak_mw: float = 10.0, steps_per_day=None, extra=None, **units):
    """Flat-load system whose only fixed supply is a variable unit shaped as ``supply_mw``."""
    supply = np.broadcast_to(np.asarray(supply_mw, dtype=float), (T,))
    cap = float(supply.max()) if supply.max() > 0 else 1.0
    series = {"load": np.ones(T), "supply_cf": supply / cap, **(extra or {})}
    traces = TraceStore(series, steps_per_day=steps_per_day or T)
    res = SystemResources(Horizon(T), variable=(VariableUnit("supply", cap, "supply_cf"),), traces=traces, **units)
    return res, LoadModel(peak_mw)


@pytest.fixture(scope="session")
def toy_cases():
    return read_toy_fixture(FIXTURES / "toy_cases_v1.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def perfect_unit(uid="perfect", mw=1.0):
    return UnlimitedUnit(uid, mw, 0.0, 24.0)


# --- acceptance report -------------------------------------------------------------
# Tests marked with ``criterion("A1")`` are collected here and summarised as one
# PASS/FAIL line per criterion at the end of the run.  Details come from
# ``record_property("detail", ...)``.

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by the test")
    config.stash[ACCEPTANCE] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    details = [str(v) for k, v in item.user_properties if k == "detail"]
    item.config.stash[ACCEPTANCE].setdefault(marker.args[0], []).append((rep.passed, "; ".join(details)))


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(results):
        ok = all(passed for passed, _ in results[name])
        detail = " | ".join(d for _, d in results[name] if d)
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
