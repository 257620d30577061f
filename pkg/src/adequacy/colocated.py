"""Colocated hydrogen portfolio: wind, electrolyzer, tank and fuel cell as one linear block.

Sign conventions: the portfolio supplies ``wind_to_grid + fc_out`` to the
system and consumes ``ely_draw``.  Its baseline demand in the shortfall is the
gross nominal electrolyzer draw; colocated wind counts as generation.

Tank inventory (MWh of hydrogen) evolves as::

    tank[t+1] = tank[t] + ely_eff * to_tank[t] * h - fc_out[t] / fc_eff * h

where ``to_tank`` is the part of the electrolyzer draw whose hydrogen is kept
rather than sold.  Sales (``ely_draw - to_tank``) must stay above a floor, so
with recharge disabled the tank is a pre-filled reserve.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .lp import LinearProgram, LPBuilder
from .model import HydrogenPortfolio


@dataclass(frozen=True)
class ColDecision:
    """Portfolio decisions; fields are scalars or per-step arrays.

    ``tank_mwh_h2`` is the inventory at the start of each step (one entry
    longer than the other series when given as a trajectory).
    """

    ely_draw_mw: np.ndarray | float
    fc_out_mw: np.ndarray | float
    tank_mwh_h2: np.ndarray | float
    wind_to_grid_mw: np.ndarray | float
    wind_spill_mw: np.ndarray | float
    ely_to_tank_mw: np.ndarray | float = 0.0


def col_generation(decision: ColDecision):
    """Power delivered to the system (MW)."""
    return decision.wind_to_grid_mw + decision.fc_out_mw


def col_consumption(decision: ColDecision):
    """Power drawn from the system (MW)."""
    return decision.ely_draw_mw


def draw_bounds(p: HydrogenPortfolio, shortage: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Electrolyzer draw limits per step; shedding is allowed only in shortage steps."""
    shortage = np.asarray(shortage, dtype=bool)
    lo = p.ely_nominal_mw - np.where(shortage, p.dr_cap_mw, 0.0)
    return lo, np.full(shortage.shape, float(p.ely_nominal_mw))


def sales_floor(p: HydrogenPortfolio, shortage: np.ndarray) -> np.ndarray:
    """Minimum draw committed to hydrogen sales each step.

    The floor never exceeds the lowest allowed draw, so demand response is
    always available when the step permits it.
    """
    lo, _ = draw_bounds(p, shortage)
    return np.minimum(p.sales_floor_mw, lo)


def to_tank_cap(p: HydrogenPortfolio, shortage: np.ndarray) -> np.ndarray:
    if not p.tank_recharge:
        return np.zeros(np.shape(shortage))
    return np.maximum(p.ely_nominal_mw - sales_floor(p, shortage), 0.0)


@dataclass(frozen=True)
class PortfolioVars:
    """LP column indices of one portfolio's decision series."""

    wind_to_grid: np.ndarray
    wind_spill: np.ndarray
    ely_draw: np.ndarray
    ely_to_tank: np.ndarray
    fc_out: np.ndarray
    tank: np.ndarray  # end-of-step inventory

    def supply_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """(columns, coefficients) of net injection, shaped (T, 3)."""
        cols = np.stack([self.wind_to_grid, self.fc_out, self.ely_draw], axis=1)
        return cols, np.array([1.0, 1.0, -1.0])


def add_portfolio(b: LPBuilder, p: HydrogenPortfolio, wind: np.ndarray, shortage: np.ndarray,
                  step_hours: float) -> PortfolioVars:
    """Emit the portfolio's variables and linear constraints into ``b``."""
    wind = np.asarray(wind, dtype=float)
    T = len(wind)
    h = step_hours
    pre = f"col:{p.id}:"
    draw_lo, draw_hi = draw_bounds(p, shortage)
    v = PortfolioVars(
        wind_to_grid=b.add_variables(pre + "wind_to_grid", T, 0.0, wind),
        wind_spill=b.add_variables(pre + "wind_spill", T, 0.0, wind),
        ely_draw=b.add_variables(pre + "ely_draw", T, draw_lo, draw_hi),
        ely_to_tank=b.add_variables(pre + "ely_to_tank", T, 0.0, to_tank_cap(p, shortage)),
        fc_out=b.add_variables(pre + "fc_out", T, 0.0, p.fc_max_mw),
        tank=b.add_variables(pre + "tank", T, 0.0, p.tank_max_mwh_h2),
    )
    # wind split
    b.add_rows(np.stack([v.wind_to_grid, v.wind_spill], axis=1), [1.0, 1.0], "==", wind)
    # tank dynamics; the previous-inventory column of the first row carries a zero coefficient
    prev = np.concatenate([[v.tank[0]], v.tank[:-1]])
    cols = np.stack([v.tank, prev, v.ely_to_tank, v.fc_out], axis=1)
    coefs = np.tile([1.0, -1.0, -p.ely_eff_mwh_h2_per_mwh_e * h, h / p.fc_eff_mwh_e_per_mwh_h2], (T, 1))
    coefs[0, 1] = 0.0
    rhs = np.zeros(T)
    rhs[0] = p.tank_initial_mwh_h2
    b.add_rows(cols, coefs, "==", rhs)
    if p.tank_recharge:
        b.add_rows(np.stack([v.ely_draw, v.ely_to_tank], axis=1), [1.0, -1.0], ">=", sales_floor(p, shortage))
    return v


def col_constraints(p: HydrogenPortfolio, wind: np.ndarray, shortfall: np.ndarray,
                    step_hours: float = 1.0) -> LinearProgram:
    """Stand-alone program holding only the portfolio's variables and constraints."""
    b = LPBuilder()
    add_portfolio(b, p, wind, np.asarray(shortfall) > 0, step_hours)
    return b.build()


def extract(x: np.ndarray, v: PortfolioVars, p: HydrogenPortfolio) -> ColDecision:
    tank = np.concatenate([[p.tank_initial_mwh_h2], x[v.tank]])
    return ColDecision(
        ely_draw_mw=x[v.ely_draw], fc_out_mw=x[v.fc_out], tank_mwh_h2=tank,
        wind_to_grid_mw=x[v.wind_to_grid], wind_spill_mw=x[v.wind_spill], ely_to_tank_mw=x[v.ely_to_tank],
    )


def extractable_energy_mwh(p: HydrogenPortfolio) -> float:
    """Electricity the initial tank can deliver through the fuel cell."""
    return p.tank_initial_mwh_h2 * p.fc_eff_mwh_e_per_mwh_h2


def installed_capacity(p: HydrogenPortfolio) -> float:
    """Nameplate contribution: wind, sheddable electrolyzer load and fuel cell (MW)."""
    return p.wind_capacity_mw + p.dr_cap_mw + p.fc_max_mw


def scale_portfolio(p: HydrogenPortfolio, factor: float, new_id: str | None = None) -> HydrogenPortfolio:
    """Multiply every capacity, power and energy field by ``factor``."""
    floor = None if p.ely_sales_floor_mw is None else p.ely_sales_floor_mw * factor
    return replace(
        p,
        id=new_id or p.id,
        wind_capacity_mw=p.wind_capacity_mw * factor,
        ely_nominal_mw=p.ely_nominal_mw * factor,
        fc_max_mw=p.fc_max_mw * factor,
        tank_max_mwh_h2=p.tank_max_mwh_h2 * factor,
        tank_initial_mwh_h2=p.tank_initial_mwh_h2 * factor,
        ely_sales_floor_mw=floor,
    )


def inflexible_twin(p: HydrogenPortfolio) -> HydrogenPortfolio:
    """The portfolio's electrolyzer at fixed nominal draw, with no wind, storage or flexibility.

    Used as the baseline when accrediting a portfolio: the large load is part
    of the system either way, and only its flexible assets are credited.
    """
    return HydrogenPortfolio(
        id=f"{p.id}__nominal",
        wind_capacity_mw=0.0,
        wind_trace_id=None,
        ely_nominal_mw=p.ely_nominal_mw,
        ely_dr_fraction=0.0,
        fc_max_mw=0.0,
        tank_max_mwh_h2=0.0,
        tank_initial_mwh_h2=0.0,
        ely_eff_mwh_h2_per_mwh_e=p.ely_eff_mwh_h2_per_mwh_e,
        fc_eff_mwh_e_per_mwh_h2=p.fc_eff_mwh_e_per_mwh_h2,
    )
