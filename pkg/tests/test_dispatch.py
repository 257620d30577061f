from dataclasses import replace

import numpy as np
import pytest

from adequacy.dispatch import (aggregate_flex, balance_residual, build_lp, check_dispatch, dispatch_optimal,
                               flex_reduction, postprocess_storage, shortfall)
from adequacy.heuristic import dispatch_heuristic
from adequacy.model import FlexibleDemandUnit, Horizon, StorageUnit, SystemResources, augment, scale_load
from adequacy.oracle import brute_force_eue, random_toy, toy_case_addition, toy_case_system, toy_system
from adequacy.scenario import generate

from conftest import flat_system, make_scenario


def only_scenario(res, load, seed=0):
    return generate(res, load, 1, seed=seed).scenarios[0]


def test_shortfall_and_flex_examples():
    sc = make_scenario([10, 10, 10], p_u=[6, 12, 8], p_v=[1, 1, 1],
                       flex_baselines=[[2, 2, 2]], flex_caps=[[1, 1, 3]])
    np.testing.assert_allclose(shortfall(sc), [5, -1, 3])
    assert shortfall(sc, 2) == 3.0
    # reduction only in short steps and never beyond the shortfall
    np.testing.assert_allclose(flex_reduction(sc), [1, 0, 3])
    np.testing.assert_allclose(aggregate_flex(sc), [1, 2, -1])


def test_lp_dimensions():
    res = SystemResources(Horizon(4), storage=(StorageUnit("b", 1, 1, 0, 2, 0.9, 1),))
    sc = make_scenario([5, 5, 5, 5], p_u=4.0, storage_initials=[1.0])
    prog = build_lp(sc, res)
    # charge, discharge, soc per storage step plus unserved and curtailment per step
    assert prog.lp.n == 20
    assert prog.lp.m == 8


def test_lp_rejects_mismatched_scenario():
    res = SystemResources(Horizon(3), storage=(StorageUnit("b", 1, 1, 0, 2),))
    with pytest.raises(ValueError):
        build_lp(make_scenario([1, 1, 1]), res)


def test_single_battery_closed_form():
    # 1 MW deficit for three steps, 2 MWh in a 1 MW battery: one step stays short
    res = SystemResources(Horizon(3), storage=(StorageUnit("b", 1, 1, 0, 2, 1.0, 2),))
    sc = make_scenario([5, 5, 5], p_u=4.0, storage_initials=[2.0])
    r = dispatch_optimal(sc, res)
    assert r.eue_mwh == pytest.approx(1.0, abs=1e-9)
    assert r.lole_steps == 1


def test_lossy_charge_closed_form():
    # 2 MW surplus then a 2 MW deficit; eta 0.5 stores 1 MWh
    res = SystemResources(Horizon(2), storage=(StorageUnit("b", 2, 2, 0, 5, 0.5, 0),))
    sc = make_scenario([5, 5], p_u=[7, 3], storage_initials=[0.0])
    assert dispatch_optimal(sc, res).eue_mwh == pytest.approx(1.0, abs=1e-9)


def test_matches_brute_force_on_random_toys():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(150):
        inst = random_toy(rng)
        res, load = toy_system(inst)
        lp = dispatch_optimal(only_scenario(res, load), res).eue_mwh
        worst = max(worst, abs(lp - brute_force_eue(inst)))
    assert worst <= 1e-6


def test_abundant_supply_is_fully_served():
    res, load = flat_system(24, 50.0, storage=(StorageUnit("b", 1, 1, 0, 2, 0.9, 1),))
    assert dispatch_optimal(only_scenario(res, load), res).eue_mwh == 0.0


def test_no_supply_everything_unserved():
    res, load = flat_system(6, 0.0, storage=(StorageUnit("b", 1, 1, 0, 2, 0.9, 0),))
    r = dispatch_optimal(only_scenario(res, load), res)
    assert r.eue_mwh == pytest.approx(60.0)
    assert r.lole_steps == 6


def test_top_toy_case_with_both_additions(toy_cases):
    top = toy_cases[0]
    res, load = toy_case_system(top)
    res = augment(res, toy_case_addition(top, "colocated"))
    load = scale_load(load, 2.5)
    r = dispatch_optimal(only_scenario(res, load), res)
    assert r.eue_mwh == pytest.approx(4.0, abs=1e-6)


@pytest.mark.parametrize("ch, dis, eta, out_ch, out_dis", [
    (2.0, 1.0, 0.5, 0.0, 0.0),
    (1.0, 3.0, 1.0, 0.0, 2.0),
    (3.0, 1.0, 1.0, 2.0, 0.0),
    (2.0, 0.0, 0.9, 2.0, 0.0),
    (0.0, 1.5, 0.9, 0.0, 1.5),
])
def test_postprocess_examples(ch, dis, eta, out_ch, out_dis):
    c, d = postprocess_storage(np.array([ch]), np.array([dis]), eta)
    assert c[0] == pytest.approx(out_ch) and d[0] == pytest.approx(out_dis)
    # stored-energy change is untouched
    assert eta * c[0] - d[0] == pytest.approx(eta * ch - dis)


def _random_system(rng, T=12):
    supply = rng.uniform(4, 12, T)
    fb = rng.uniform(0, 2, T)
    fc = fb * rng.uniform(0, 1, T)
    res, load = flat_system(
        T, supply, peak_mw=10.0, extra={"fb": fb, "fc": fc},
        storage=(StorageUnit("a", 1.5, 1.5, 0, 4, 0.85, float(rng.uniform(0, 4))),
                 StorageUnit("b", 0.5, 0.7, 0.2, 2, 0.95, 1.0)),
        flexible=(FlexibleDemandUnit("f", "fb", "fc"),))
    return res, load


def test_dispatch_satisfies_every_constraint():
    rng = np.random.default_rng(6)
    for _ in range(30):
        res, load = _random_system(rng)
        sc = only_scenario(res, load)
        r = dispatch_optimal(sc, res)
        assert check_dispatch(r, sc, res) == []
        assert np.abs(balance_residual(r, sc)).max() <= 1e-6
        assert not np.any((r.charge > 0) & (r.discharge > 0))


def test_check_dispatch_flags_tampering():
    rng = np.random.default_rng(1)
    res, load = _random_system(rng)
    sc = only_scenario(res, load)
    r = dispatch_optimal(sc, res)
    bad = replace(r, unserved=r.unserved + 1.0)
    assert any("balance" in m for m in check_dispatch(bad, sc, res))
    soc = r.soc.copy()
    soc[0, 3] += 0.5
    assert any("dynamics" in m for m in check_dispatch(replace(r, soc=soc), sc, res))


def test_more_load_never_less_unserved():
    rng = np.random.default_rng(3)
    res, load = _random_system(rng)
    sset = generate(res, load, 4, seed=0)
    for n in range(4):
        prev = -1.0
        for d in np.linspace(-3, 3, 7):
            e = dispatch_optimal(sset.realize(res, scale_load(load, d)).scenario(n), res).eue_mwh
            assert e >= prev - 1e-7
            prev = e


def test_added_storage_never_hurts():
    rng = np.random.default_rng(4)
    res, load = _random_system(rng)
    more = augment(res, StorageUnit("c", 1.0, 1.0, 0, 3, 0.9, 1.5))
    sset = generate(res, load, 4, seed=0)
    for n in range(4):
        base = dispatch_optimal(sset.realize(res, load).scenario(n), res).eue_mwh
        assert dispatch_optimal(sset.realize(more, load).scenario(n), more).eue_mwh <= base + 1e-7


def test_optimal_never_worse_than_heuristic():
    rng = np.random.default_rng(8)
    for _ in range(20):
        res, load = _random_system(rng)
        sc = only_scenario(res, load)
        assert dispatch_optimal(sc, res).eue_mwh <= dispatch_heuristic(sc, res).eue_mwh + 1e-7


def test_backends_agree():
    rng = np.random.default_rng(9)
    res, load = _random_system(rng, T=8)
    sc = only_scenario(res, load)
    a = dispatch_optimal(sc, res, backend="highs").eue_mwh
    b = dispatch_optimal(sc, res, backend="simplex").eue_mwh
    assert a == pytest.approx(b, abs=1e-6)


def test_step_table_shape():
    rng = np.random.default_rng(0)
    res, load = _random_system(rng, T=5)
    r = dispatch_optimal(only_scenario(res, load), res)
    header, rows = r.step_table(["a", "b"])
    assert len(rows) == 5
    assert all(len(row) == len(header) for row in rows)
    assert "a:soc_end_mwh" in header
    assert r.summary()["method"] == "optimal"
