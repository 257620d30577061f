import numpy as np
import pytest

from adequacy.dispatch import dispatch_optimal
from adequacy.elcc import (BracketError, ElccStudy, NonMonotoneError, ScenarioMismatchError, assess_scenarios,
                           bisect, bisection_bound, compare_methods, elcc_benchmark, evaluate, expected_reliability,
                           find_delta, is_monotone, nameplate_mw, prepare_addition, reliability_curve, scale_unit)
from adequacy.model import Horizon, LoadModel, StorageUnit, SystemResources, UnlimitedUnit, VariableUnit
from adequacy.oracle import toy_case_addition, toy_case_system
from adequacy.scenario import ScenarioSet, generate
from adequacy.synthetic import hydrogen_portfolio
from adequacy.traces import TraceStore

from conftest import flat_system, perfect_unit


def outage_system(T=24, seed=0):
    """Flat 10 MW load, three 4 MW units with outages, a little storage."""
    res, load = flat_system(T, 0.0, steps_per_day=24,
                            unlimited=tuple(UnlimitedUnit(f"g{i}", 4.0, 0.15, 6.0) for i in range(3)),
                            storage=(StorageUnit("b", 1.0, 1.0, 0.0, 3.0, 0.9, 1.5),))
    return res, load


def test_zero_shortfall_everywhere():
    res, load = flat_system(24, 20.0)
    sset = generate(res, load, 5, seed=0)
    assert expected_reliability(res, load, sset) == 0.0
    assert expected_reliability(res, load, sset, "heuristic") == 0.0


def test_mean_of_two_scenarios():
    # day 0 is 2 MW short in both steps, day 1 is 3 MW short
    traces = TraceStore({"load": np.ones(4), "supply_cf": [0.8, 0.8, 0.7, 0.7]}, steps_per_day=2)
    res = SystemResources(Horizon(2), variable=(VariableUnit("s", 10.0, "supply_cf"),), traces=traces)
    load = LoadModel(10.0)
    sset = ScenarioSet(0, 2, 2, 1.0, np.array([[0], [1]]), traces, res, load)
    np.testing.assert_allclose(evaluate(res, load, sset), [4.0, 6.0])
    assert expected_reliability(res, load, sset) == pytest.approx(5.0)


def test_parallel_matches_serial_and_direct_solves():
    res, load = outage_system()
    sset = generate(res, load, 50, seed=3)
    serial = evaluate(res, load, sset, threads=1)
    parallel = evaluate(res, load, sset, threads=4)
    direct = np.array([dispatch_optimal(sc, res).eue_mwh for sc in sset.scenarios])
    np.testing.assert_allclose(serial, parallel, rtol=0, atol=1e-12)
    np.testing.assert_allclose(serial, direct, rtol=0, atol=1e-7)
    assert serial.mean() > 0


def test_screening_skips_served_scenarios():
    res, load = outage_system()
    sset = generate(res, load, 40, seed=3)
    m = assess_scenarios(res, load, sset)
    h = assess_scenarios(res, load, sset, dispatcher="heuristic")
    assert 0 < len(m.lp_solved) < 40
    assert np.all(h.eue_mwh[np.setdiff1d(np.arange(40), m.lp_solved)] <= 1e-9)
    assert np.all(m.eue_mwh <= h.eue_mwh + 1e-7)


def test_zero_capacity_addition():
    res, load = outage_system()
    sset = generate(res, load, 30, seed=1)
    r = find_delta(ElccStudy(res, load, UnlimitedUnit("nothing", 0.0), sset, delta_lo=-3, delta_hi=3))
    assert abs(r.delta_mw) <= 0.01


def test_perfect_unit_on_flat_system():
    res, load = flat_system(24, 8.0)
    sset = generate(res, load, 3, seed=0)
    r = find_delta(ElccStudy(res, load, perfect_unit(), sset, delta_lo=-4, delta_hi=4))
    assert r.delta_mw == pytest.approx(1.0, abs=1e-12)
    assert r.residual < 1e-6


def test_bottom_toy_wind_is_worth_nothing(toy_cases):
    bottom = toy_cases[1]
    res, load = toy_case_system(bottom)
    sset = generate(res, load, 1, seed=0)
    r = find_delta(ElccStudy(res, load, toy_case_addition(bottom, "wind"), sset, delta_lo=-1, delta_hi=4))
    assert abs(r.delta_mw) <= 0.01


def test_perfect_generator_mode_fixed_point():
    res, load = outage_system()
    sset = generate(res, load, 30, seed=2)
    r = elcc_benchmark(ElccStudy(res, load, perfect_unit(mw=1.5), sset, mode="perfect-generator",
                                 delta_lo=0, delta_hi=6))
    assert r.delta_mw == pytest.approx(1.5, abs=0.01)


def test_reference_unit_without_outages_equals_perfect_mode():
    res, load = outage_system()
    sset = generate(res, load, 30, seed=2)
    add = StorageUnit("new", 2.0, 2.0, 0.0, 4.0, 0.9, 2.0)
    kw = dict(delta_lo=0, delta_hi=6)
    a = elcc_benchmark(ElccStudy(res, load, add, sset, mode="perfect-generator", **kw))
    b = elcc_benchmark(ElccStudy(res, load, add, sset, mode="reference-unit", reference_efor=0.0, **kw))
    assert a.delta_mw == b.delta_mw
    assert a.trace == b.trace


def test_unreliable_reference_unit_needs_more_capacity():
    res, load = outage_system()
    sset = generate(res, load, 30, seed=2)
    add = StorageUnit("new", 2.0, 2.0, 0.0, 4.0, 0.9, 2.0)
    perfect = elcc_benchmark(ElccStudy(res, load, add, sset, mode="perfect-generator", delta_lo=0, delta_hi=8))
    shaky = elcc_benchmark(ElccStudy(res, load, add, sset, mode="reference-unit", reference_efor=0.2,
                                     delta_lo=0, delta_hi=8))
    assert shaky.delta_mw > perfect.delta_mw


def test_bracket_violation_reports_endpoints():
    res, load = flat_system(24, 8.0)
    sset = generate(res, load, 2, seed=0)
    with pytest.raises(BracketError) as info:
        find_delta(ElccStudy(res, load, perfect_unit(), sset, delta_lo=2, delta_hi=4))
    assert info.value.f_lo > info.value.target


def test_non_monotone_sequence_detected():
    values = {0.0: 0.0, 4.0: 4.0, 2.0: 5.0}
    with pytest.raises(NonMonotoneError):
        bisect(lambda x: np.array([values.get(x, 0.0)]), 0.0, 4.0, 3.0, 1e-6, 0.01)
    with pytest.raises(NonMonotoneError):
        bisect(lambda x: np.array([4.0 - x]), 0.0, 4.0, 3.0, 1e-6, 0.01)


@pytest.mark.parametrize("lo, hi, res, bound", [(-10, 10, 0.01, 11), (0, 1, 1, 0), (0, 12, 0.01, 11),
                                                (-2, 6, 0.002, 12)])
def test_bisection_bound(lo, hi, res, bound):
    assert bisection_bound(lo, hi, res) == bound


def test_bisection_respects_bound():
    res, load = outage_system()
    sset = generate(res, load, 30, seed=4)
    study = ElccStudy(res, load, StorageUnit("new", 2.0, 2.0, 0.0, 4.0, 0.9, 2.0), sset,
                      delta_lo=-4, delta_hi=6, delta_resolution=0.001, epsilon=1e-12)
    r = find_delta(study)
    assert r.iterations <= study.max_iterations == 14
    assert all(-4 <= d <= 6 for d, _ in r.trace)


def test_fingerprint_checked():
    res, load = outage_system()
    sset = generate(res, load, 5, seed=4)
    with pytest.raises(ScenarioMismatchError):
        find_delta(ElccStudy(res, load, perfect_unit(), sset, fingerprint="0" * 64))


def test_explicit_target_level():
    res, load = flat_system(24, 8.0)
    sset = generate(res, load, 2, seed=0)
    # baseline is 2 MW short per step (48 MWh); allow 72 MWh after adding 1 MW
    r = find_delta(ElccStudy(res, load, perfect_unit(), sset, delta_lo=-4, delta_hi=4, target_metric=72.0))
    assert r.delta_mw == pytest.approx(2.0, abs=0.01)


def test_lole_metric():
    res, load = flat_system(24, 8.0)
    sset = generate(res, load, 2, seed=0)
    r = find_delta(ElccStudy(res, load, perfect_unit(mw=3.0), sset, metric="lole", delta_lo=-6, delta_hi=6))
    # LOLE is 0 up to 1 MW of extra load and 24 above it, so any match lies past 1 MW
    assert r.metric == "lole"
    assert r.baseline_metric == 24.0 == r.matched_metric
    assert r.delta_mw > 1.0


def test_reliability_curve_monotone():
    res, load = outage_system()
    sset = generate(res, load, 20, seed=5)
    study = ElccStudy(res, load, StorageUnit("new", 2.0, 2.0, 0.0, 4.0, 0.9, 2.0), sset)
    curve = reliability_curve(study, np.linspace(-3, 3, 10))
    assert is_monotone([v for _, v in curve])
    assert not is_monotone([1.0, 0.5])


def test_scaling_helpers():
    s = scale_unit(StorageUnit("b", 1.0, 2.0, 0.5, 4.0, 0.9, 1.0), 1.5)
    assert (s.p_charge_max_mw, s.p_discharge_max_mw, s.e_max_mwh, s.initial_soc_mwh) == (1.5, 3.0, 6.0, 1.5)
    assert nameplate_mw(s) == 3.0
    assert nameplate_mw(hydrogen_portfolio(0.1)) == pytest.approx(1.65)
    base, scaled, swap = prepare_addition(flat_system(4, 1.0)[0], hydrogen_portfolio(0.1), 2.0, twin_baseline=True)
    assert swap == ("h2__nominal",)
    assert base.get("h2__nominal").ely_nominal_mw == pytest.approx(1.6)
    assert scaled.fc_max_mw == pytest.approx(0.5)


def test_compare_first_row_matches_single_study():
    res, load = outage_system()
    sset = generate(res, load, 20, seed=6)
    add = StorageUnit("new", 1.0, 1.0, 0.0, 2.0, 0.9, 1.0)
    rows = compare_methods(res, load, add, sset, [1.0, 2.0], delta_lo=-3, delta_hi=5)
    assert [r.factor for r in rows] == [1.0, 2.0]
    assert rows[1].installed_mw == 2.0
    assert all(r.dominates for r in rows)
    single = find_delta(ElccStudy(res, load, add, sset, delta_lo=-3, delta_hi=5))
    assert rows[0].optimal.delta_mw == single.delta_mw
    heur = find_delta(ElccStudy(res, load, add, sset, delta_lo=-3, delta_hi=5, dispatcher="heuristic"))
    assert rows[0].heuristic.delta_mw == heur.delta_mw


def test_invalid_study_parameters():
    res, load = flat_system(4, 8.0)
    sset = generate(res, load, 1, seed=0)
    with pytest.raises(ValueError):
        ElccStudy(res, load, perfect_unit(), sset, epsilon=0)
    with pytest.raises(ValueError):
        ElccStudy(res, load, perfect_unit(), sset, delta_lo=1, delta_hi=1)
    with pytest.raises(ValueError):
        ElccStudy(res, load, perfect_unit(), sset, mode="perfect-generator", delta_lo=-1)
