"""Synthetic hourly traces and a small benchmark system built on them.

The traces are not calibrated to any real system.  They carry the features
that matter for adequacy studies: a summer-peaking load with a late
afternoon peak, solar output confined to daylight, and persistent wind that
is mildly weaker on hot afternoons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colocated import inflexible_twin, scale_portfolio
from .model import (Horizon, HydrogenPortfolio, LoadModel, StorageUnit, SystemResources, UnlimitedUnit,
                    VariableUnit)
from .traces import TraceStore


def synthetic_traces(days: int = 365, seed: int = 0) -> TraceStore:
    """Hourly ``load`` (peak 1), ``load_mw``, ``wind_cf`` and ``solar_cf`` for ``days`` days."""
    rng = np.random.default_rng(seed)
    T = days * 24
    hour = np.arange(T) % 24
    day = np.arange(T) // 24
    season = np.cos(2 * np.pi * (day - 200) / 365.0)            # +1 in mid July
    weekend = ((day % 7) >= 5).astype(float)

    daily = 0.75 + 0.2 * np.exp(-0.5 * ((hour - 17.0) / 3.5) ** 2) - 0.08 * np.exp(-0.5 * ((hour - 4.0) / 2.5) ** 2)
    heat = np.repeat(_ar1(rng, days, 0.7, 0.02), 24)
    load = daily * (1.0 + 0.3 * season + heat) * (1.0 - 0.05 * weekend)
    load = load * (1.0 + _ar1(rng, T, 0.9, 0.01))
    load = np.maximum(load, 0.05)

    latent = _ar1(rng, T, 0.97, 0.12)
    wind = 1.0 / (1.0 + np.exp(-(latent * 1.8 - 1.0 + 0.25 * np.cos(2 * np.pi * hour / 24.0) - 0.6 * season)))
    wind = np.clip(wind, 0.0, 1.0)

    elevation = np.clip(np.sin(np.pi * (hour - 6.0 + 1.0 * season) / (12.0 + 2.0 * season)), 0.0, None)
    clear = np.repeat(np.clip(0.75 + 0.2 * rng.standard_normal(days), 0.1, 1.0), 24)
    solar = np.clip(elevation * clear * (0.85 + 0.15 * season), 0.0, 1.0)

    return TraceStore({
        "load_mw": load,
        "load": load / load.max(),
        "wind_cf": wind,
        "solar_cf": solar,
    }, steps_per_day=24)


SUMMER_DAYS = (170, 240)


def season_window(traces: TraceStore, first_day: int, last_day: int) -> TraceStore:
    """Days ``[first_day, last_day)`` of ``traces``; ``load`` is renormalised to peak 1 within the window."""
    spd = traces.steps_per_day
    sl = slice(first_day * spd, last_day * spd)
    series = {k: np.asarray(v)[sl] for k, v in traces.series.items() if k != "load"}
    if "load_mw" in series:
        series["load"] = series["load_mw"] / series["load_mw"].max()
    return TraceStore(series, steps_per_day=spd)


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    eps = rng.standard_normal(n) * sigma
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return out


def hydrogen_portfolio(scale: float = 1.0, portfolio_id: str = "h2", fc_max_mw: float = 2.5,
                       wind_trace_id: str = "wind_cf", tank_recharge: bool = False) -> HydrogenPortfolio:
    """10 MW wind, 8 MW electrolyzer with 50% shedding, tank holding 5 MWh of electricity; times ``scale``."""
    base = HydrogenPortfolio(
        id=portfolio_id, wind_capacity_mw=10.0, wind_trace_id=wind_trace_id,
        ely_nominal_mw=8.0, ely_dr_fraction=0.5, fc_max_mw=fc_max_mw,
        tank_max_mwh_h2=10.0, tank_initial_mwh_h2=10.0,
        ely_eff_mwh_h2_per_mwh_e=0.7, fc_eff_mwh_e_per_mwh_h2=0.5, tank_recharge=tank_recharge,
    )
    return scale_portfolio(base, scale)


@dataclass(frozen=True)
class CaseStudy:
    resources: SystemResources   # baseline, including the portfolio's inflexible twin
    load: LoadModel
    portfolio: HydrogenPortfolio
    twin_id: str


def scaled_case_study(T: int = 672, capacity_factor: float = 1.0, portfolio_scale: float = 0.1,
                      traces: TraceStore | None = None, trace_seed: int = 0) -> CaseStudy:
    """Small summer-peaking system with a colocated hydrogen portfolio to accredit.

    65 MW peak; eight 8 MW units (5% forced outage, 24 h mean repair);
    30 MW wind; 10 MW solar; 70 MWh of storage in two classes.  The
    portfolio is the reference portfolio scaled by ``portfolio_scale`` and
    then by ``capacity_factor``.  Without explicit traces, the summer window
    of :func:`synthetic_traces` is used, so scenarios bootstrap peak-season days.
    """
    if traces is None:
        traces = season_window(synthetic_traces(seed=trace_seed), *SUMMER_DAYS)
    portfolio = scale_portfolio(hydrogen_portfolio(portfolio_scale), capacity_factor)
    twin = inflexible_twin(portfolio)
    res = SystemResources(
        Horizon(T),
        unlimited=tuple(UnlimitedUnit(f"gen{i}", 8.0, 0.05, 24.0) for i in range(8)),
        variable=(VariableUnit("wind", 30.0, "wind_cf"), VariableUnit("solar", 10.0, "solar_cf")),
        storage=(StorageUnit("bess4h", 10.0, 10.0, 0.0, 40.0, 0.9, 20.0),
                 StorageUnit("bess2h", 15.0, 15.0, 0.0, 30.0, 0.85, 15.0)),
        colocated=(twin,),
        traces=traces,
    )
    return CaseStudy(res, LoadModel(65.0), portfolio, twin.id)
