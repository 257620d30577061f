"""Chronological priority dispatch without look-ahead.

This mirrors rule-based accreditation practice: each step is settled on its
own.  In surplus steps storage charges (highest efficiency first), the
hydrogen tank may take electrolyzer output above the sales floor, and the
rest is curtailed.  In shortage steps resources are called in a fixed order
(by default storage, flexible demand, electrolyzer shedding, fuel cell) and
whatever remains is unserved.

The batch entry point advances all scenarios of a :class:`ScenarioBatch` in
lock-step, which makes it cheap enough to screen scenarios before solving
LPs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .colocated import ColDecision, sales_floor
from .dispatch import LOLE_EPS, DispatchResult, metrics
from .model import Scenario, SystemResources
from .scenario import ScenarioBatch

SHORTAGE_STEPS = ("storage", "flex", "col_dr", "fuel_cell")
RULESET_LABEL = "representative merit-order rules (not a specific operator manual)"


@dataclass(frozen=True)
class PriorityConfig:
    """Ordering rules for the heuristic dispatcher."""

    charge_order: Literal["eta_desc", "eta_asc", "listed"] = "eta_desc"
    discharge_order: Literal["duration_desc", "duration_asc", "listed"] = "duration_desc"
    shortage_order: tuple[str, ...] = SHORTAGE_STEPS
    charge_tank: bool = True

    def __post_init__(self):
        if sorted(self.shortage_order) != sorted(SHORTAGE_STEPS):
            raise ValueError(f"shortage_order must be a permutation of {SHORTAGE_STEPS}")
        object.__setattr__(self, "shortage_order", tuple(self.shortage_order))


def _order(values: np.ndarray, rule: str) -> np.ndarray:
    if rule == "listed":
        return np.arange(len(values))
    idx = np.argsort(-values if rule.endswith("_desc") else values, kind="stable")
    return idx


@dataclass
class BatchOutcome:
    """Metrics for every scenario plus optional trajectories."""

    eue_mwh: np.ndarray
    lole_steps: np.ndarray
    peak_shortfall_mw: np.ndarray
    results: list[DispatchResult] | None = None


def _batch_from_scenario(s: Scenario) -> ScenarioBatch:
    return ScenarioBatch(s.p_u[None], s.p_v[None], s.load[None], s.storage_initials[None],
                         s.flex_baselines, s.flex_caps, s.col_wind[None], s.col_baseline)


def dispatch_heuristic(scenario: Scenario, resources: SystemResources,
                       rules: PriorityConfig | None = None) -> DispatchResult:
    out = heuristic_batch(_batch_from_scenario(scenario), resources, rules, record=True,
                          scenario_ids=[scenario.scenario_id])
    return out.results[0]


def heuristic_batch(batch: ScenarioBatch, resources: SystemResources, rules: PriorityConfig | None = None,
                    record: bool = False, chunk: int = 512, scenario_ids=None) -> BatchOutcome:
    """Run the priority dispatch on every scenario of ``batch``.

    With ``record=False`` only the metrics are kept, which bounds memory for
    long horizons.
    """
    rules = rules or PriorityConfig()
    N = batch.N
    eue = np.empty(N)
    lole = np.empty(N, dtype=np.int64)
    peak = np.empty(N)
    results = [] if record else None
    ids = list(range(N)) if scenario_ids is None else list(scenario_ids)
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        part = _run(batch, slice(lo, hi), resources, rules, record)
        eue[lo:hi], lole[lo:hi], peak[lo:hi] = part["eue"], part["lole"], part["peak"]
        if record:
            results.extend(_results(part, resources, ids[lo:hi]))
    return BatchOutcome(eue, lole, peak, results)


def _run(batch: ScenarioBatch, sl: slice, res: SystemResources, rules: PriorityConfig, record: bool) -> dict:
    h = res.step_hours
    T = batch.T
    p_u, p_v, load = batch.p_u[sl], batch.p_v[sl], batch.load[sl]
    n = load.shape[0]
    sto = res.storage
    k, r = len(sto), len(res.colocated)
    pch = np.array([s.p_charge_max_mw for s in sto])
    pdis = np.array([s.p_discharge_max_mw for s in sto])
    emin = np.array([s.e_min_mwh for s in sto])
    emax = np.array([s.e_max_mwh for s in sto])
    eta = np.array([s.eta_charge for s in sto])
    charge_seq = _order(eta, rules.charge_order)
    discharge_seq = _order(np.array([s.duration_h for s in sto]), rules.discharge_order)

    cols = res.colocated
    nominal = np.array([p.ely_nominal_mw for p in cols])
    dr_cap = np.array([p.dr_cap_mw for p in cols])
    fc_max = np.array([p.fc_max_mw for p in cols])
    fc_eff = np.array([p.fc_eff_mwh_e_per_mwh_h2 for p in cols])
    ely_eff = np.array([p.ely_eff_mwh_h2_per_mwh_e for p in cols])
    tank_max = np.array([p.tank_max_mwh_h2 for p in cols])
    recharge = np.array([p.tank_recharge and rules.charge_tank for p in cols], dtype=bool)

    flex_base = batch.flex_baselines.sum(axis=0)
    flex_cap = batch.flex_caps.sum(axis=0)
    col_base = batch.col_baseline.sum(axis=0)
    wind = batch.col_wind[sl]                        # (n, r, T)
    short_all = (load + flex_base + col_base - p_u - p_v)   # (n, T)
    floors = np.stack([sales_floor(p, short_all > 0) for p in cols], axis=1) if r else np.zeros((n, 0, T))

    e = np.array(batch.storage_initials[sl], dtype=float).reshape(n, k)
    tank = np.tile(np.array([p.tank_initial_mwh_h2 for p in cols]), (n, 1))
    ue_sum = np.zeros(n)
    lole = np.zeros(n, dtype=np.int64)
    peak = np.zeros(n)

    if record:
        ch_tr = np.zeros((n, k, T))
        dis_tr = np.zeros((n, k, T))
        soc_tr = np.zeros((n, k, T + 1))
        soc_tr[:, :, 0] = e
        red_tr = np.zeros((n, T))
        draw_tr = np.zeros((n, r, T))
        fc_tr = np.zeros((n, r, T))
        to_tank_tr = np.zeros((n, r, T))
        tank_tr = np.zeros((n, r, T + 1))
        tank_tr[:, :, 0] = tank
        cur_tr = np.zeros((n, T))
        ue_tr = np.zeros((n, T))

    for t in range(T):
        s = short_all[:, t]
        net = s - wind[:, :, t].sum(axis=1)
        surplus = np.maximum(-net, 0.0)
        deficit = np.maximum(net, 0.0)
        ch = np.zeros((n, k))
        dis = np.zeros((n, k))
        draw = np.tile(nominal, (n, 1))
        fc = np.zeros((n, r))
        to_tank = np.zeros((n, r))
        red = np.zeros(n)

        for i in charge_seq:
            c = np.minimum(np.minimum(pch[i], (emax[i] - e[:, i]) / (eta[i] * h)), surplus)
            c = np.maximum(c, 0.0)
            ch[:, i] = c
            surplus = surplus - c
            e[:, i] = np.minimum(e[:, i] + eta[i] * c * h, emax[i])
        if recharge.any():
            # hydrogen above the sales floor goes to the tank; grid draw is unchanged
            room = np.maximum(tank_max - tank, 0.0) / (ely_eff * h)
            cap = np.maximum(nominal - floors[:, :, t], 0.0)
            put = np.where(recharge & (net <= 0)[:, None], np.minimum(cap, room), 0.0)
            to_tank = put
            tank = np.minimum(tank + ely_eff * put * h, tank_max)
        cur = surplus

        for step in rules.shortage_order:
            if step == "storage":
                for i in discharge_seq:
                    d = np.maximum(np.minimum(np.minimum(pdis[i], (e[:, i] - emin[i]) / h), deficit), 0.0)
                    dis[:, i] = d
                    deficit = deficit - d
                    e[:, i] = np.maximum(e[:, i] - d * h, emin[i])
            elif step == "flex":
                red = np.where(s > 0, np.minimum(np.minimum(flex_cap[t], deficit), np.maximum(s, 0.0)), 0.0)
                deficit = deficit - red
            elif step == "col_dr":
                for j in range(r):
                    shed = np.where(s > 0, np.minimum(dr_cap[j], deficit), 0.0)
                    draw[:, j] = nominal[j] - shed
                    deficit = deficit - shed
            else:
                for j in range(r):
                    f = np.maximum(np.minimum(np.minimum(fc_max[j], tank[:, j] * fc_eff[j] / h), deficit), 0.0)
                    fc[:, j] = f
                    deficit = deficit - f
                    tank[:, j] = np.maximum(tank[:, j] - f / fc_eff[j] * h, 0.0)
        ue = np.maximum(deficit, 0.0)
        ue_sum += ue
        lole += ue > LOLE_EPS
        peak = np.maximum(peak, ue)

        if record:
            ch_tr[:, :, t], dis_tr[:, :, t], soc_tr[:, :, t + 1] = ch, dis, e
            red_tr[:, t] = red
            draw_tr[:, :, t], fc_tr[:, :, t], to_tank_tr[:, :, t], tank_tr[:, :, t + 1] = draw, fc, to_tank, tank
            cur_tr[:, t], ue_tr[:, t] = cur, ue

    out = {"eue": ue_sum * h, "lole": lole, "peak": peak}
    if record:
        out.update(ch=ch_tr, dis=dis_tr, soc=soc_tr, red=red_tr, draw=draw_tr, fc=fc_tr, to_tank=to_tank_tr,
                   tank=tank_tr, cur=cur_tr, ue=ue_tr, wind=wind, flex_base=flex_base, h=h)
    return out


def _results(part: dict, res: SystemResources, ids) -> list[DispatchResult]:
    out = []
    for a, sid in enumerate(ids):
        decisions = tuple(
            ColDecision(ely_draw_mw=part["draw"][a, j], fc_out_mw=part["fc"][a, j], tank_mwh_h2=part["tank"][a, j],
                        wind_to_grid_mw=part["wind"][a, j].copy(), wind_spill_mw=np.zeros_like(part["wind"][a, j]),
                        ely_to_tank_mw=part["to_tank"][a, j])
            for j in range(len(res.colocated))
        )
        ue = part["ue"][a]
        eue, lole, peak = metrics(ue, part["h"])
        out.append(DispatchResult(
            method="heuristic", scenario_id=int(sid), step_hours=part["h"],
            charge=part["ch"][a], discharge=part["dis"][a], soc=part["soc"][a],
            flex_consumption=part["flex_base"] - part["red"][a], flex_reduction=part["red"][a],
            col=decisions, curtailment=part["cur"][a], unserved=ue,
            eue_mwh=eue, lole_steps=lole, peak_shortfall_mw=peak,
        ))
    return out
