import numpy as np
import pytest

from adequacy.colocated import installed_capacity
from adequacy.model import validate
from adequacy.synthetic import SUMMER_DAYS, hydrogen_portfolio, scaled_case_study, season_window, synthetic_traces


@pytest.fixture(scope="module")
def year():
    return synthetic_traces(seed=0)


def test_trace_ranges(year):
    assert year.length == 8760
    assert year["load"].max() == 1.0
    for name in ("wind_cf", "solar_cf"):
        assert 0.0 <= year[name].min() and year[name].max() <= 1.0


def test_deterministic_per_seed(year):
    np.testing.assert_array_equal(synthetic_traces(seed=0)["wind_cf"], year["wind_cf"])
    assert not np.array_equal(synthetic_traces(seed=1)["wind_cf"], year["wind_cf"])


def test_summer_peak_and_dark_nights(year):
    daily_peak = year["load_mw"].reshape(365, 24).max(axis=1)
    assert SUMMER_DAYS[0] <= int(daily_peak.argmax()) < SUMMER_DAYS[1]
    hours = year["solar_cf"].reshape(365, 24)
    assert hours[:, :4].max() == 0.0
    assert int(year["load"].reshape(365, 24).mean(axis=0).argmax()) in range(15, 20)


def test_season_window(year):
    w = season_window(year, *SUMMER_DAYS)
    n = SUMMER_DAYS[1] - SUMMER_DAYS[0]
    assert w.n_days == n
    assert w["load"].max() == 1.0
    np.testing.assert_array_equal(w["wind_cf"], year["wind_cf"][SUMMER_DAYS[0] * 24:SUMMER_DAYS[1] * 24])


def test_case_study_is_valid():
    case = scaled_case_study(T=168)
    assert validate(case.resources, case.load) == []
    res = case.resources
    assert sum(u.capacity_mw for u in res.unlimited) == 64.0
    assert sum(s.e_max_mwh for s in res.storage) == 70.0
    assert res.get(case.twin_id).ely_nominal_mw == pytest.approx(0.8)
    assert installed_capacity(case.portfolio) == pytest.approx(1.65)


def test_capacity_factor_scales_portfolio():
    a = scaled_case_study(T=24, capacity_factor=1.0).portfolio
    b = scaled_case_study(T=24, capacity_factor=1.6).portfolio
    assert installed_capacity(b) == pytest.approx(1.6 * installed_capacity(a))


def test_reference_portfolio():
    p = hydrogen_portfolio()
    assert (p.wind_capacity_mw, p.ely_nominal_mw, p.dr_cap_mw) == (10.0, 8.0, 4.0)
    assert p.tank_initial_mwh_h2 * p.fc_eff_mwh_e_per_mwh_h2 == 5.0
