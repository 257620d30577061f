import numpy as np
import pytest

from adequacy.dispatch import check_dispatch, dispatch_optimal
from adequacy.heuristic import PriorityConfig, dispatch_heuristic, heuristic_batch
from adequacy.model import FlexibleDemandUnit, Horizon, StorageUnit, SystemResources, augment
from adequacy.oracle import (ToyFlex, ToyInstance, brute_force_eue, greedy_storage_ue, toy_case_addition,
                             toy_case_system)
from adequacy.scenario import generate
from adequacy.synthetic import hydrogen_portfolio

from conftest import flat_system, make_scenario


def mixed_system(rng, T=24, recharge=False):
    supply = rng.uniform(5, 13, T)
    fb = rng.uniform(0, 1.5, T)
    extra = {"fb": fb, "fc": fb * rng.uniform(0, 1, T), "wind_cf": rng.uniform(0, 1, T)}
    return flat_system(
        T, supply, extra=extra,
        storage=(StorageUnit("a", 1.0, 1.0, 0, 4, 0.85, 2.0), StorageUnit("b", 2.0, 2.0, 0, 2, 0.95, 0.5)),
        flexible=(FlexibleDemandUnit("f", "fb", "fc"),),
        colocated=(hydrogen_portfolio(0.2, tank_recharge=recharge),))


def test_abundant_supply():
    res, load = flat_system(12, 40.0, storage=(StorageUnit("b", 1, 1, 0, 2, 0.9, 1),))
    r = dispatch_heuristic(generate(res, load, 1, seed=0).scenarios[0], res)
    assert r.eue_mwh == 0.0 and r.lole_steps == 0


def test_myopic_storage_use_costs_energy():
    # step 0 is short by 1 MW and flexible demand could cover it; step 1 only storage can
    storage = StorageUnit("b", 1.0, 1.0, 0.0, 1.0, 1.0, 1.0)
    res = SystemResources(Horizon(2), storage=(storage,), flexible=(FlexibleDemandUnit("f", 1.0, 1.0),))
    sc = make_scenario([10, 10], p_u=[10, 9], storage_initials=[1.0], flex_baselines=[[1, 0]],
                       flex_caps=[[1, 0]])
    assert dispatch_heuristic(sc, res).eue_mwh == pytest.approx(1.0)
    assert dispatch_optimal(sc, res).eue_mwh == pytest.approx(0.0, abs=1e-9)
    inst = ToyInstance(np.array([0.0, 1.0]), (storage,), flex=(ToyFlex(np.array([1.0, 0.0]), np.array([1.0, 0.0])),),
                       resolution=0.5)
    assert brute_force_eue(inst) == pytest.approx(0.0)


def test_flex_first_order_fixes_that_case():
    storage = StorageUnit("b", 1.0, 1.0, 0.0, 1.0, 1.0, 1.0)
    res = SystemResources(Horizon(2), storage=(storage,), flexible=(FlexibleDemandUnit("f", 1.0, 1.0),))
    sc = make_scenario([10, 10], p_u=[10, 9], storage_initials=[1.0], flex_baselines=[[1, 0]],
                       flex_caps=[[1, 0]])
    rules = PriorityConfig(shortage_order=("flex", "storage", "col_dr", "fuel_cell"))
    assert dispatch_heuristic(sc, res, rules).eue_mwh == pytest.approx(0.0)


@pytest.mark.parametrize("which", ["storage", "colocated"])
def test_toy_cases_match_greedy_oracle(toy_cases, which):
    for case in toy_cases:
        res, load = toy_case_system(case)
        res = augment(res, toy_case_addition(case, which))
        sc = generate(res, load, 1, seed=0).scenarios[0]
        net = case.deficit - (case.wind if which == "colocated" else 0.0)
        assert dispatch_heuristic(sc, res).eue_mwh == pytest.approx(float(greedy_storage_ue(net[None])[0]))


@pytest.mark.parametrize("recharge", [False, True])
def test_heuristic_dispatch_is_feasible(recharge):
    rng = np.random.default_rng(11)
    for _ in range(15):
        res, load = mixed_system(rng, recharge=recharge)
        sset = generate(res, load, 3, seed=1)
        for sc in sset.scenarios:
            r = dispatch_heuristic(sc, res)
            assert check_dispatch(r, sc, res, tol=1e-9) == []


def test_deterministic():
    rng = np.random.default_rng(2)
    res, load = mixed_system(rng)
    sc = generate(res, load, 1, seed=0).scenarios[0]
    a, b = dispatch_heuristic(sc, res), dispatch_heuristic(sc, res)
    np.testing.assert_array_equal(a.unserved, b.unserved)
    np.testing.assert_array_equal(a.soc, b.soc)


def test_batch_matches_single_runs():
    rng = np.random.default_rng(3)
    res, load = mixed_system(rng, recharge=True)
    sset = generate(res, load, 20, seed=5)
    out = heuristic_batch(sset.base, res, chunk=7)
    assert out.results is None
    single = [dispatch_heuristic(sc, res).eue_mwh for sc in sset.scenarios]
    np.testing.assert_allclose(out.eue_mwh, single, rtol=0, atol=1e-12)


def test_never_beats_optimal():
    rng = np.random.default_rng(4)
    for _ in range(10):
        res, load = mixed_system(rng, T=12)
        sc = generate(res, load, 1, seed=0).scenarios[0]
        assert dispatch_optimal(sc, res).eue_mwh <= dispatch_heuristic(sc, res).eue_mwh + 1e-7


def test_invalid_shortage_order():
    with pytest.raises(ValueError):
        PriorityConfig(shortage_order=("storage", "flex"))
    with pytest.raises(ValueError):
        PriorityConfig(shortage_order=("storage", "flex", "col_dr", "col_dr"))
