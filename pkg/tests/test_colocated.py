from dataclasses import replace

import numpy as np
import pytest

from adequacy.colocated import (ColDecision, col_constraints, col_consumption, col_generation, draw_bounds,
                                extractable_energy_mwh, inflexible_twin, installed_capacity, sales_floor,
                                scale_portfolio, to_tank_cap)
from adequacy.dispatch import check_dispatch, dispatch_optimal
from adequacy.heuristic import dispatch_heuristic
from adequacy.model import Horizon, HydrogenPortfolio, SystemResources
from adequacy.synthetic import hydrogen_portfolio

from conftest import make_scenario


def portfolio(**kw):
    base = dict(id="p", wind_capacity_mw=0.0, wind_trace_id=None, ely_nominal_mw=4.0, ely_dr_fraction=0.5,
                fc_max_mw=1.0, tank_max_mwh_h2=10.0, tank_initial_mwh_h2=0.0)
    return HydrogenPortfolio(**{**base, **kw})


def col_scenario(p, load, p_u, wind=None):
    T = len(load)
    wind = np.zeros(T) if wind is None else np.asarray(wind, float)
    return make_scenario(load, p_u=p_u, col_wind=[wind], col_baseline=[np.full(T, p.ely_nominal_mw)])


def col_system(p, T):
    return SystemResources(Horizon(T), colocated=(p,))


def test_generation_and_consumption():
    d = ColDecision(ely_draw_mw=3.0, fc_out_mw=1.0, tank_mwh_h2=2.0, wind_to_grid_mw=2.0, wind_spill_mw=0.5)
    assert col_generation(d) == 3.0
    assert col_consumption(d) == 3.0


def test_extractable_energy():
    assert extractable_energy_mwh(portfolio(tank_initial_mwh_h2=2.5)) == 1.25
    assert extractable_energy_mwh(hydrogen_portfolio(1.0)) == 5.0


def test_draw_bounds_gated_on_shortage():
    p = hydrogen_portfolio(1.0)
    lo, hi = draw_bounds(p, np.array([False, True, False]))
    np.testing.assert_allclose(lo, [8, 4, 8])
    np.testing.assert_allclose(hi, [8, 8, 8])
    assert lo.min() == 4


def test_no_shedding_outside_shortage():
    p = portfolio(tank_initial_mwh_h2=4.0)
    # plenty of supply at step 0, short at step 1
    sc = col_scenario(p, [10, 10], p_u=[20, 12])
    r = dispatch_optimal(sc, col_system(p, 2))
    d = r.col[0]
    assert d.ely_draw_mw[0] == pytest.approx(4.0)
    assert d.fc_out_mw[0] == pytest.approx(0.0, abs=1e-9)
    # 2 MW short: shedding covers it without touching the tank
    assert r.eue_mwh == pytest.approx(0.0, abs=1e-9)
    assert d.ely_draw_mw[1] == pytest.approx(2.0)


def test_reserve_tank_only_discharges():
    p = portfolio(tank_initial_mwh_h2=2.0)
    sc = col_scenario(p, [10, 10, 10], p_u=[20, 11, 11])
    r = dispatch_optimal(sc, col_system(p, 3))
    tank = r.col[0].tank_mwh_h2
    assert np.all(np.diff(tank) <= 1e-9)
    # shortfall 3 MW in steps 1 and 2 (nominal draw counts); shedding covers 2 MW of each,
    # the tank holds 1 MWh of electricity
    assert r.eue_mwh == pytest.approx(2 * (3.0 - 2.0) - 1.0, abs=1e-9)


def test_tank_balance_holds():
    p = hydrogen_portfolio(0.5, tank_recharge=True)
    rng = np.random.default_rng(0)
    T = 24
    sc = col_scenario(p, np.full(T, 10.0), p_u=rng.uniform(8, 20, T), wind=rng.uniform(0, 5, T))
    res = col_system(p, T)
    for r in (dispatch_optimal(sc, res), dispatch_heuristic(sc, res)):
        d = r.col[0]
        flow = p.ely_eff_mwh_h2_per_mwh_e * d.ely_to_tank_mw - d.fc_out_mw / p.fc_eff_mwh_e_per_mwh_h2
        np.testing.assert_allclose(np.diff(d.tank_mwh_h2), flow, atol=1e-9)
        assert check_dispatch(r, sc, res) == []


def test_recharge_round_trip():
    # step 0: surplus, 2 MW above the sales floor goes to the tank (1.4 MWh of hydrogen)
    # step 1: 6 MW short; shedding gives 2 MW, the fuel cell returns 0.7 MWh
    p = portfolio(tank_recharge=True)
    sc = col_scenario(p, [10, 10], p_u=[30, 8])
    r = dispatch_optimal(sc, col_system(p, 2))
    d = r.col[0]
    assert d.ely_to_tank_mw[0] == pytest.approx(2.0)
    assert d.tank_mwh_h2[1] == pytest.approx(1.4)
    assert d.fc_out_mw[1] == pytest.approx(0.7)
    assert r.eue_mwh == pytest.approx(6.0 - 2.0 - 0.7)


def test_no_recharge_without_flag():
    p = portfolio(tank_recharge=False)
    sc = col_scenario(p, [10, 10], p_u=[30, 8])
    r = dispatch_optimal(sc, col_system(p, 2))
    # 6 MW short, 2 MW shed, empty tank stays empty
    assert r.eue_mwh == pytest.approx(4.0)
    assert np.all(to_tank_cap(p, np.array([False, True])) == 0)


def test_sales_floor():
    p = portfolio(tank_recharge=True, ely_sales_floor_mw=3.0)
    short = np.array([False, True])
    # in a shortage the floor drops to the lowest allowed draw
    np.testing.assert_allclose(sales_floor(p, short), [3.0, 2.0])
    np.testing.assert_allclose(to_tank_cap(p, short), [1.0, 2.0])
    sc = col_scenario(p, [10, 10], p_u=[30, 30])
    d = dispatch_optimal(sc, col_system(p, 2)).col[0]
    assert np.all(d.ely_draw_mw - d.ely_to_tank_mw >= 3.0 - 1e-9)


def test_standalone_program_size():
    p = portfolio(tank_recharge=True)
    lp = col_constraints(p, np.zeros(5), np.array([1, -1, 1, -1, 1.0]))
    assert lp.n == 6 * 5
    assert lp.m == 3 * 5
    assert col_constraints(replace(p, tank_recharge=False), np.zeros(5), np.ones(5)).m == 2 * 5


def test_elcc_is_not_additive(toy_cases):
    top, bottom = toy_cases
    for case in (top, bottom):
        alone = case.elcc("wind") + case.elcc("storage")
        assert case.elcc("colocated") == pytest.approx(2.5)
        assert abs(case.elcc("colocated") - alone) >= 0.5
    assert top.elcc("wind") + top.elcc("storage") == pytest.approx(3.0)
    assert bottom.elcc("wind") + bottom.elcc("storage") == pytest.approx(1.0)


def test_scaling_twin_and_capacity():
    p = hydrogen_portfolio(1.0)
    assert installed_capacity(p) == pytest.approx(16.5)
    q = scale_portfolio(p, 2.0, "big")
    assert q.id == "big"
    assert installed_capacity(q) == pytest.approx(33.0)
    assert extractable_energy_mwh(q) == pytest.approx(10.0)
    twin = inflexible_twin(p)
    assert twin.id == "h2__nominal"
    assert twin.ely_nominal_mw == p.ely_nominal_mw
    assert installed_capacity(twin) == 0.0
    lo, hi = draw_bounds(twin, np.array([True]))
    assert lo[0] == hi[0] == 8.0
