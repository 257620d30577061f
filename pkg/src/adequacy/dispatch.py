"""Unserved-energy minimising dispatch of storage, flexible demand and colocated portfolios.

Per scenario the dispatch is a single linear program over the horizon.
Flexible demand does not appear as variables: whenever the shortfall is
positive the best use of it is to shed ``min(cap, shortfall)``, so its
aggregate consumption is a per-step constant.  Storage charge and discharge
are separate non-negative variables; any step where the solver uses both is
rewritten afterwards as a net flow with the same state of charge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import colocated as col
from .lp import LinearProgram, LPBuilder, LPSolution, solve
from .model import Scenario, SystemResources

LOLE_EPS = 1e-4  # MW of unserved power that counts as a loss-of-load step


class DispatchError(RuntimeError):
    """The dispatch program did not solve to optimality."""


def shortfall(scenario: Scenario, t: int | None = None):
    """Demand plus flexible and colocated baselines, minus conventional and variable supply (MW)."""
    s = (scenario.load + scenario.flex_baselines.sum(axis=0) + scenario.col_baseline.sum(axis=0)
         - scenario.p_u - scenario.p_v)
    return s if t is None else float(s[t])


def flex_reduction(scenario: Scenario, t: int | None = None):
    """Aggregate flexible-demand reduction: ``min(cap, shortfall)`` in shortage steps, else 0."""
    s = shortfall(scenario)
    cap = scenario.flex_caps.sum(axis=0)
    red = np.where(s > 0, np.minimum(cap, np.maximum(s, 0.0)), 0.0)
    return red if t is None else float(red[t])


def aggregate_flex(scenario: Scenario, t: int | None = None):
    """Realised aggregate flexible consumption (MW)."""
    cons = scenario.flex_baselines.sum(axis=0) - flex_reduction(scenario)
    return cons if t is None else float(cons[t])


@dataclass(frozen=True)
class DispatchResult:
    """Trajectories and reliability metrics of one scenario's dispatch.

    ``soc`` and colocated tank levels have ``T + 1`` columns (start of each
    step plus the end of the horizon); every other series has ``T``.
    """

    method: str
    scenario_id: int
    step_hours: float
    charge: np.ndarray          # (k, T)
    discharge: np.ndarray       # (k, T)
    soc: np.ndarray             # (k, T + 1)
    flex_consumption: np.ndarray
    flex_reduction: np.ndarray
    col: tuple[col.ColDecision, ...]
    curtailment: np.ndarray
    unserved: np.ndarray
    eue_mwh: float
    lole_steps: int
    peak_shortfall_mw: float
    lp_objective: float | None = None
    lp_solution: LPSolution | None = field(default=None, compare=False, repr=False)

    @property
    def T(self) -> int:
        return len(self.unserved)

    def summary(self) -> dict:
        return {"method": self.method, "scenario_id": self.scenario_id, "eue_mwh": self.eue_mwh,
                "lole_steps": self.lole_steps, "peak_shortfall_mw": self.peak_shortfall_mw,
                "lp_objective": self.lp_objective}

    def step_table(self, storage_ids=None, portfolio_ids=None) -> tuple[list[str], list[list[float]]]:
        """Header and one row per step: every trajectory flattened into named columns."""
        sids = storage_ids or [str(i) for i in range(self.charge.shape[0])]
        pids = portfolio_ids or [str(j) for j in range(len(self.col))]
        header = ["step", "unserved_mw", "curtailment_mw", "flex_consumption_mw", "flex_reduction_mw"]
        cols = [self.unserved, self.curtailment, self.flex_consumption, self.flex_reduction]
        for i, sid in enumerate(sids):
            header += [f"{sid}:charge_mw", f"{sid}:discharge_mw", f"{sid}:soc_end_mwh"]
            cols += [self.charge[i], self.discharge[i], self.soc[i, 1:]]
        for d, pid in zip(self.col, pids):
            header += [f"{pid}:ely_draw_mw", f"{pid}:ely_to_tank_mw", f"{pid}:fc_out_mw", f"{pid}:tank_end_mwh_h2",
                       f"{pid}:wind_to_grid_mw", f"{pid}:wind_spill_mw"]
            cols += [d.ely_draw_mw, d.ely_to_tank_mw, d.fc_out_mw, d.tank_mwh_h2[1:], d.wind_to_grid_mw,
                     d.wind_spill_mw]
        cols = [np.broadcast_to(np.asarray(c, dtype=float), (self.T,)) for c in cols]
        rows = [[t, *(float(c[t]) for c in cols)] for t in range(self.T)]
        return header, rows


def metrics(unserved: np.ndarray, step_hours: float) -> tuple[float, int, float]:
    """(EUE MWh, LOLE steps, peak unserved MW) of an unserved-power series."""
    ue = np.asarray(unserved)
    return (float(ue.sum() * step_hours), int(np.count_nonzero(ue > LOLE_EPS)),
            float(ue.max()) if ue.size else 0.0)


@dataclass(frozen=True)
class DispatchProgram:
    """The dispatch LP plus the column blocks needed to read a solution back."""

    lp: LinearProgram
    charge: np.ndarray      # (k, T) column indices
    discharge: np.ndarray
    soc: np.ndarray
    unserved: np.ndarray
    curtailment: np.ndarray
    portfolios: tuple[col.PortfolioVars, ...]


def build_lp(scenario: Scenario, resources: SystemResources) -> DispatchProgram:
    """Assemble the scenario's dispatch LP.

    Balance per step::

        P_U + P_V + sum(dis) + UE + sum(col supply)
            = D + sum(ch) + flex_consumption + CUR + sum(col draw)
    """
    T = scenario.T
    if T != resources.T:
        raise ValueError(f"scenario has {T} steps, system horizon is {resources.T}")
    k, r = len(resources.storage), len(resources.colocated)
    if scenario.storage_initials.shape != (k,) or scenario.col_wind.shape[0] != r \
            or scenario.flex_baselines.shape[0] != len(resources.flexible):
        raise ValueError("scenario does not match the system's unit counts")
    h = resources.step_hours
    s = shortfall(scenario)
    b = LPBuilder()

    ch = np.empty((k, T), dtype=np.int64)
    dis = np.empty((k, T), dtype=np.int64)
    soc = np.empty((k, T), dtype=np.int64)
    for i, st in enumerate(resources.storage):
        ch[i] = b.add_variables(f"ch:{st.id}", T, 0.0, st.p_charge_max_mw)
        dis[i] = b.add_variables(f"dis:{st.id}", T, 0.0, st.p_discharge_max_mw)
        soc[i] = b.add_variables(f"soc:{st.id}", T, st.e_min_mwh, st.e_max_mwh)
    pvars = tuple(col.add_portfolio(b, p, scenario.col_wind[j], s > 0, h)
                  for j, p in enumerate(resources.colocated))
    ue = b.add_variables("unserved", T, 0.0, np.inf, cost=h)
    cur = b.add_variables("curtailment", T, 0.0, np.inf)

    # state of charge: soc[t] - soc[t-1] - eta*h*ch[t] + h*dis[t] = (s at t=0)
    for i, st in enumerate(resources.storage):
        prev = np.concatenate([[soc[i, 0]], soc[i, :-1]])
        coefs = np.tile([1.0, -1.0, -st.eta_charge * h, h], (T, 1))
        coefs[0, 1] = 0.0
        rhs = np.zeros(T)
        rhs[0] = scenario.storage_initials[i]
        b.add_rows(np.stack([soc[i], prev, ch[i], dis[i]], axis=1), coefs, "==", rhs)

    cols = [ue[:, None], cur[:, None]]
    coefs = [np.array([1.0]), np.array([-1.0])]
    if k:
        cols += [dis.T, ch.T]
        coefs += [np.ones(k), -np.ones(k)]
    for v in pvars:
        c_, a_ = v.supply_terms()
        cols.append(c_)
        coefs.append(a_)
    rhs = scenario.load + aggregate_flex(scenario) - scenario.p_u - scenario.p_v
    b.add_rows(np.concatenate(cols, axis=1), np.concatenate(coefs), "==", rhs)
    return DispatchProgram(b.build(), ch, dis, soc, ue, cur, pvars)


def postprocess_storage(charge: np.ndarray, discharge: np.ndarray, eta) -> tuple[np.ndarray, np.ndarray]:
    """Replace simultaneous charge/discharge with the equivalent net flow.

    The stored-energy change ``eta*ch - dis`` is kept exactly, so the state of
    charge trajectory is unchanged.  The rewrite never increases net
    withdrawal from the grid; the freed power is returned separately by
    :func:`_net_injection_gain`.
    """
    charge = np.asarray(charge, dtype=float)
    discharge = np.asarray(discharge, dtype=float)
    eta = np.broadcast_to(np.asarray(eta, dtype=float), charge.shape)
    both = (charge > 0) & (discharge > 0)
    net = eta * charge - discharge
    new_ch = np.where(both, np.where(net >= 0, net / eta, 0.0), charge)
    new_dis = np.where(both, np.where(net >= 0, 0.0, -net), discharge)
    return new_ch, new_dis


def _net_injection_gain(old_ch, old_dis, new_ch, new_dis) -> np.ndarray:
    """Extra power the cleaned storage injects per step, summed over classes (>= 0)."""
    gain = (new_dis - new_ch) - (old_dis - old_ch)
    return np.maximum(gain.sum(axis=0), 0.0)


def dispatch_optimal(scenario: Scenario, resources: SystemResources, *, backend: str = "auto",
                     feas_tol: float = 1e-6, opt_tol: float = 1e-6,
                     warm_start: LPSolution | None = None) -> DispatchResult:
    """Solve the scenario's dispatch LP and return cleaned trajectories."""
    prog = build_lp(scenario, resources)
    sol = solve(prog.lp, feas_tol, opt_tol, backend=backend, warm_start=warm_start)
    if not sol.optimal:
        raise DispatchError(
            f"scenario {scenario.scenario_id}: dispatch LP returned {sol.status.value} "
            f"(n={prog.lp.n}, m={prog.lp.m}, residual={sol.residual:.3g})")
    x = sol.x
    h = resources.step_hours
    k = len(resources.storage)
    T = scenario.T
    raw_ch = x[prog.charge] if k else np.zeros((0, T))
    raw_dis = x[prog.discharge] if k else np.zeros((0, T))
    eta = np.array([s.eta_charge for s in resources.storage])
    new_ch, new_dis = postprocess_storage(raw_ch, raw_dis, eta[:, None] if k else 1.0)
    gain = _net_injection_gain(raw_ch, raw_dis, new_ch, new_dis) if k else np.zeros(T)

    ue = np.maximum(x[prog.unserved], 0.0)
    cur = np.maximum(x[prog.curtailment], 0.0)
    # freed power serves unmet demand first, the rest is curtailed
    relief = np.minimum(ue, gain)
    ue = ue - relief
    cur = cur + gain - relief

    if k:
        soc = np.concatenate([scenario.storage_initials[:, None], x[prog.soc]], axis=1)
    else:
        soc = np.zeros((0, T + 1))
    decisions = tuple(col.extract(x, v, p) for v, p in zip(prog.portfolios, resources.colocated))
    eue, lole, peak = metrics(ue, h)
    red = flex_reduction(scenario)
    return DispatchResult(
        method="optimal", scenario_id=scenario.scenario_id, step_hours=h,
        charge=new_ch, discharge=new_dis, soc=soc,
        flex_consumption=scenario.flex_baselines.sum(axis=0) - red, flex_reduction=red,
        col=decisions, curtailment=cur, unserved=ue,
        eue_mwh=eue, lole_steps=lole, peak_shortfall_mw=peak,
        lp_objective=sol.objective, lp_solution=sol,
    )


def balance_residual(result: DispatchResult, scenario: Scenario) -> np.ndarray:
    """Supply minus demand per step (zero for a balanced dispatch)."""
    supply = scenario.p_u + scenario.p_v + result.discharge.sum(axis=0) + result.unserved
    demand = scenario.load + result.charge.sum(axis=0) + result.flex_consumption + result.curtailment
    for d in result.col:
        supply = supply + col.col_generation(d)
        demand = demand + col.col_consumption(d)
    return supply - demand


def check_dispatch(result: DispatchResult, scenario: Scenario, resources: SystemResources,
                   tol: float = 1e-6) -> list[str]:
    """List every constraint the dispatch violates by more than ``tol``."""
    out = []
    h = resources.step_hours
    s = shortfall(scenario)
    short = s > 0

    bal = np.abs(balance_residual(result, scenario))
    if bal.max(initial=0.0) > tol:
        out.append(f"balance residual {bal.max():.3g} at step {int(bal.argmax())}")
    if result.unserved.min(initial=0.0) < -tol:
        out.append("negative unserved energy")
    if result.curtailment.min(initial=0.0) < -tol:
        out.append("negative curtailment")

    for i, st in enumerate(resources.storage):
        c, d, e = result.charge[i], result.discharge[i], result.soc[i]
        if c.min(initial=0) < -tol or c.max(initial=0) > st.p_charge_max_mw + tol:
            out.append(f"{st.id}: charge outside [0, {st.p_charge_max_mw}]")
        if d.min(initial=0) < -tol or d.max(initial=0) > st.p_discharge_max_mw + tol:
            out.append(f"{st.id}: discharge outside [0, {st.p_discharge_max_mw}]")
        if e.min() < st.e_min_mwh - tol or e.max() > st.e_max_mwh + tol:
            out.append(f"{st.id}: state of charge outside [{st.e_min_mwh}, {st.e_max_mwh}]")
        if abs(e[0] - scenario.storage_initials[i]) > tol:
            out.append(f"{st.id}: initial state of charge mismatch")
        chain = e[1:] - e[:-1] - (st.eta_charge * c - d) * h
        if np.abs(chain).max(initial=0) > tol:
            out.append(f"{st.id}: state-of-charge dynamics violated")
        if np.any((c > 0) & (d > 0)):
            out.append(f"{st.id}: simultaneous charge and discharge")

    red = scenario.flex_baselines.sum(axis=0) - result.flex_consumption
    red_cap = np.where(short, np.minimum(scenario.flex_caps.sum(axis=0), np.maximum(s, 0.0)), 0.0)
    if red.min(initial=0) < -tol or np.any(red > red_cap + tol):
        out.append("flexible-demand reduction outside [0, min(cap, shortfall)] or outside shortage")

    for j, p in enumerate(resources.colocated):
        d = result.col[j]
        wind = scenario.col_wind[j]
        lo, hi = col.draw_bounds(p, short)
        if np.any(d.ely_draw_mw < lo - tol) or np.any(d.ely_draw_mw > hi + tol):
            out.append(f"{p.id}: electrolyzer draw outside its gated bounds")
        if np.any(np.abs(d.wind_to_grid_mw + d.wind_spill_mw - wind) > tol) \
                or min(np.min(d.wind_to_grid_mw, initial=0), np.min(d.wind_spill_mw, initial=0)) < -tol:
            out.append(f"{p.id}: wind split violated")
        if np.any(d.fc_out_mw < -tol) or np.any(d.fc_out_mw > p.fc_max_mw + tol):
            out.append(f"{p.id}: fuel cell outside [0, {p.fc_max_mw}]")
        tank = d.tank_mwh_h2
        if tank.min() < -tol or tank.max() > p.tank_max_mwh_h2 + tol or abs(tank[0] - p.tank_initial_mwh_h2) > tol:
            out.append(f"{p.id}: tank level outside bounds")
        flow = (p.ely_eff_mwh_h2_per_mwh_e * d.ely_to_tank_mw - d.fc_out_mw / p.fc_eff_mwh_e_per_mwh_h2) * h
        if np.abs(tank[1:] - tank[:-1] - flow).max(initial=0) > tol:
            out.append(f"{p.id}: tank dynamics violated")
        cap = col.to_tank_cap(p, short)
        if np.any(d.ely_to_tank_mw < -tol) or np.any(d.ely_to_tank_mw > cap + tol):
            out.append(f"{p.id}: hydrogen to tank outside limits")
        if p.tank_recharge and np.any(d.ely_draw_mw - d.ely_to_tank_mw < col.sales_floor(p, short) - tol):
            out.append(f"{p.id}: hydrogen sales below floor")
    return out
