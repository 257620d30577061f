"""Resource, load and scenario types, plus the transforms used by accreditation studies.

Every type here is immutable; transforms such as :func:`augment` and
:func:`scale_load` return new objects so a fixed scenario set can be replayed
against any number of modified systems.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Iterator, Union

import numpy as np

from .traces import LOAD_SHAPE_ID, TraceStore


@dataclass(frozen=True)
class Violation:
    unit_id: str
    field: str
    message: str
    step: int | None = None

    def __str__(self) -> str:
        at = f" at step {self.step}" if self.step is not None else ""
        return f"{self.unit_id}.{self.field}{at}: {self.message}"


@dataclass(frozen=True)
class Horizon:
    T: int
    step_hours: float = 1.0


@dataclass(frozen=True)
class UnlimitedUnit:
    """Dispatchable generator whose only limit is its two-state availability."""

    id: str
    capacity_mw: float
    efor: float = 0.0
    mean_repair_hours: float = 24.0

    def violations(self, traces=None, T=None) -> list[Violation]:
        out = []
        if not self.capacity_mw >= 0:
            out.append(Violation(self.id, "capacity_mw", "must be >= 0"))
        if not 0 <= self.efor <= 1:
            out.append(Violation(self.id, "efor", "must lie in [0, 1]"))
        if not self.mean_repair_hours > 0:
            out.append(Violation(self.id, "mean_repair_hours", "must be > 0"))
        return out


@dataclass(frozen=True)
class VariableUnit:
    """Wind/solar style unit: output is capacity times a capacity-factor trace."""

    id: str
    capacity_mw: float
    trace_id: str

    def violations(self, traces=None, T=None) -> list[Violation]:
        out = []
        if not self.capacity_mw >= 0:
            out.append(Violation(self.id, "capacity_mw", "must be >= 0"))
        out += _check_unit_trace(self.id, "trace_id", self.trace_id, traces, T)
        return out


@dataclass(frozen=True)
class StorageUnit:
    id: str
    p_charge_max_mw: float
    p_discharge_max_mw: float
    e_min_mwh: float
    e_max_mwh: float
    eta_charge: float = 1.0
    initial_soc_mwh: float = 0.0

    @property
    def duration_h(self) -> float:
        return self.e_max_mwh / self.p_discharge_max_mw if self.p_discharge_max_mw > 0 else np.inf

    def violations(self, traces=None, T=None) -> list[Violation]:
        out = []
        for name in ("p_charge_max_mw", "p_discharge_max_mw", "e_min_mwh"):
            if not getattr(self, name) >= 0:
                out.append(Violation(self.id, name, "must be >= 0"))
        if not self.e_min_mwh <= self.e_max_mwh:
            out.append(Violation(self.id, "e_max_mwh", "must be >= e_min_mwh"))
        if not self.e_min_mwh <= self.initial_soc_mwh <= self.e_max_mwh:
            out.append(Violation(self.id, "initial_soc_mwh", "must lie in [e_min_mwh, e_max_mwh]"))
        if not 0 < self.eta_charge <= 1:
            out.append(Violation(self.id, "eta_charge", "must lie in (0, 1]"))
        return out


@dataclass(frozen=True)
class FlexibleDemandUnit:
    """Demand that may be reduced, only during shortages, up to a per-step cap.

    ``baseline`` and ``reduction_cap`` are either constants (MW) or trace ids.
    """

    id: str
    baseline: Union[float, str]
    reduction_cap: Union[float, str]

    def baseline_series(self, traces: TraceStore, T: int) -> np.ndarray:
        return _series(self.baseline, traces, T)

    def cap_series(self, traces: TraceStore, T: int) -> np.ndarray:
        return _series(self.reduction_cap, traces, T)

    def violations(self, traces=None, T=None) -> list[Violation]:
        out = []
        for name in ("baseline", "reduction_cap"):
            ref = getattr(self, name)
            if isinstance(ref, str):
                out += _check_unit_trace(self.id, name, ref, traces, T, unit_interval=False)
        if out or T is None:
            return out
        base = self.baseline_series(traces, T)
        cap = self.cap_series(traces, T)
        bad = np.flatnonzero((cap < 0) | (cap > base))
        if len(bad):
            out.append(Violation(self.id, "reduction_cap", "must lie in [0, baseline]", int(bad[0])))
        return out


@dataclass(frozen=True)
class HydrogenPortfolio:
    """Wind, electrolyzer, hydrogen tank and fuel cell behind one interconnection.

    The electrolyzer draws ``ely_nominal_mw`` except during shortages, when up
    to ``ely_dr_fraction`` of it may be shed.  With ``tank_recharge`` off the
    tank is a pre-filled reserve; with it on, hydrogen above the sales floor
    may be diverted into the tank.
    """

    id: str
    wind_capacity_mw: float
    wind_trace_id: str | None
    ely_nominal_mw: float
    ely_dr_fraction: float
    fc_max_mw: float
    tank_max_mwh_h2: float
    tank_initial_mwh_h2: float
    ely_eff_mwh_h2_per_mwh_e: float = 0.7
    fc_eff_mwh_e_per_mwh_h2: float = 0.5
    tank_recharge: bool = False
    ely_sales_floor_mw: float | None = None

    @property
    def dr_cap_mw(self) -> float:
        return self.ely_dr_fraction * self.ely_nominal_mw

    @property
    def sales_floor_mw(self) -> float:
        """Electrolyzer draw reserved for hydrogen sales (not available to the tank)."""
        if not self.tank_recharge:
            return self.ely_nominal_mw
        if self.ely_sales_floor_mw is None:
            return self.ely_nominal_mw - self.dr_cap_mw
        return self.ely_sales_floor_mw

    def wind_series(self, traces: TraceStore, T: int) -> np.ndarray:
        if self.wind_capacity_mw == 0 or self.wind_trace_id is None:
            return np.zeros(T)
        return self.wind_capacity_mw * np.asarray(traces[self.wind_trace_id][:T])

    def violations(self, traces=None, T=None) -> list[Violation]:
        out = []
        for name in ("wind_capacity_mw", "ely_nominal_mw", "fc_max_mw", "tank_max_mwh_h2"):
            if not getattr(self, name) >= 0:
                out.append(Violation(self.id, name, "must be >= 0"))
        if not 0 <= self.ely_dr_fraction <= 1:
            out.append(Violation(self.id, "ely_dr_fraction", "must lie in [0, 1]"))
        for name in ("ely_eff_mwh_h2_per_mwh_e", "fc_eff_mwh_e_per_mwh_h2"):
            if not 0 < getattr(self, name) <= 1:
                out.append(Violation(self.id, name, "must lie in (0, 1]"))
        if not 0 <= self.tank_initial_mwh_h2 <= self.tank_max_mwh_h2:
            out.append(Violation(self.id, "tank_initial_mwh_h2", "must lie in [0, tank_max_mwh_h2]"))
        if self.ely_sales_floor_mw is not None and not 0 <= self.ely_sales_floor_mw <= self.ely_nominal_mw:
            out.append(Violation(self.id, "ely_sales_floor_mw", "must lie in [0, ely_nominal_mw]"))
        if self.wind_capacity_mw > 0:
            if self.wind_trace_id is None:
                out.append(Violation(self.id, "wind_trace_id", "required when wind_capacity_mw > 0"))
            else:
                out += _check_unit_trace(self.id, "wind_trace_id", self.wind_trace_id, traces, T)
        return out


Unit = Union[UnlimitedUnit, VariableUnit, StorageUnit, FlexibleDemandUnit, HydrogenPortfolio]

_CLASS_FIELD = {
    UnlimitedUnit: "unlimited",
    VariableUnit: "variable",
    StorageUnit: "storage",
    FlexibleDemandUnit: "flexible",
    HydrogenPortfolio: "colocated",
}


@dataclass(frozen=True)
class SystemResources:
    """The full resource fleet, grouped by class, with the traces it references."""

    horizon: Horizon
    unlimited: tuple[UnlimitedUnit, ...] = ()
    variable: tuple[VariableUnit, ...] = ()
    storage: tuple[StorageUnit, ...] = ()
    flexible: tuple[FlexibleDemandUnit, ...] = ()
    colocated: tuple[HydrogenPortfolio, ...] = ()
    traces: TraceStore = field(default_factory=TraceStore)

    def __post_init__(self):
        for name in _CLASS_FIELD.values():
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def T(self) -> int:
        return self.horizon.T

    @property
    def step_hours(self) -> float:
        return self.horizon.step_hours

    def units(self) -> Iterator[Unit]:
        for name in _CLASS_FIELD.values():
            yield from getattr(self, name)

    def ids(self) -> list[str]:
        return [u.id for u in self.units()]

    def get(self, unit_id: str) -> Unit:
        for u in self.units():
            if u.id == unit_id:
                return u
        raise KeyError(unit_id)


@dataclass(frozen=True)
class LoadModel:
    """Annual peak (MW) and a normalised shape trace with maximum 1."""

    peak_mw: float
    load_trace_id: str = LOAD_SHAPE_ID


class DuplicateIdError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    """One realised joint draw of availability, renewables, baselines and load (MW per step)."""

    scenario_id: int
    p_u: np.ndarray
    p_v: np.ndarray
    load: np.ndarray
    storage_initials: np.ndarray
    flex_baselines: np.ndarray
    flex_caps: np.ndarray
    col_wind: np.ndarray
    col_baseline: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            if f.name == "scenario_id":
                continue
            arr = np.array(getattr(self, f.name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, f.name, arr)
        T = len(self.load)
        ok = (len(self.p_u) == T and len(self.p_v) == T
              and self.flex_baselines.shape[-1:] in ((T,), (0,)) and self.flex_caps.shape == self.flex_baselines.shape
              and self.col_wind.shape[-1:] in ((T,), (0,)) and self.col_baseline.shape == self.col_wind.shape)
        if not ok:
            raise ValueError("scenario series lengths disagree")

    @property
    def T(self) -> int:
        return len(self.load)


# --- validation -------------------------------------------------------------

def _series(ref, traces: TraceStore, T: int) -> np.ndarray:
    if isinstance(ref, str):
        return np.asarray(traces[ref][:T], dtype=float)
    return np.full(T, float(ref))


def _check_unit_trace(uid, fname, trace_id, traces, T, unit_interval=True) -> list[Violation]:
    if traces is None:
        return []
    if trace_id not in traces:
        return [Violation(uid, fname, f"trace {trace_id!r} not found")]
    vals = traces[trace_id]
    if T is not None and len(vals) < T:
        return [Violation(uid, fname, f"trace {trace_id!r} shorter than horizon ({len(vals)} < {T})")]
    if unit_interval:
        bad = np.flatnonzero((vals < 0) | (vals > 1))
        if len(bad):
            return [Violation(uid, fname, f"trace {trace_id!r} outside [0, 1]", int(bad[0]))]
    return []


def validate(resources: SystemResources, load: LoadModel | None = None) -> list[Violation]:
    """Check every type invariant; returns an empty list when all hold."""
    out: list[Violation] = []
    hz = resources.horizon
    if not (isinstance(hz.T, (int, np.integer)) and hz.T >= 1):
        out.append(Violation("horizon", "T", "must be an integer >= 1"))
    if not hz.step_hours > 0:
        out.append(Violation("horizon", "step_hours", "must be > 0"))
    seen = set()
    for u in resources.units():
        if u.id in seen:
            out.append(Violation(u.id, "id", "duplicate id"))
        seen.add(u.id)
        out += u.violations(resources.traces, hz.T)
    if load is not None:
        if not load.peak_mw > 0:
            out.append(Violation("load", "peak_mw", "must be > 0"))
        tid = load.load_trace_id
        if tid not in resources.traces:
            out.append(Violation("load", "load_trace_id", f"trace {tid!r} not found"))
        else:
            shape = resources.traces[tid]
            if len(shape) < hz.T:
                out.append(Violation("load", "load_trace_id", "trace shorter than horizon"))
            if np.any(shape < 0):
                out.append(Violation("load", "load_trace_id", "negative values", int(np.argmax(shape < 0))))
            if len(shape) and abs(shape.max() - 1.0) > 1e-9:
                out.append(Violation("load", "load_trace_id", f"maximum is {shape.max():.12g}, expected 1"))
    return out


# --- transforms -------------------------------------------------------------

def augment(resources: SystemResources, addition: Unit | Iterable[Unit]) -> SystemResources:
    """Return ``resources`` with one or more units added."""
    items = [addition] if type(addition) in _CLASS_FIELD else list(addition)
    existing = set(resources.ids())
    grouped = defaultdict(list)
    for unit in items:
        if type(unit) not in _CLASS_FIELD:
            raise TypeError(f"cannot add object of type {type(unit).__name__}")
        problems = unit.violations(resources.traces, resources.T)
        if problems:
            raise ValueError("; ".join(map(str, problems)))
        if unit.id in existing:
            raise DuplicateIdError(f"unit id {unit.id!r} already present")
        existing.add(unit.id)
        grouped[_CLASS_FIELD[type(unit)]].append(unit)
    changes = {name: getattr(resources, name) + tuple(units) for name, units in grouped.items()}
    return replace(resources, **changes)


def remove(resources: SystemResources, ids: Iterable[str]) -> SystemResources:
    """Return ``resources`` without the named units."""
    ids = set(ids)
    missing = ids - set(resources.ids())
    if missing:
        raise KeyError(f"unknown unit ids: {sorted(missing)}")
    changes = {name: tuple(u for u in getattr(resources, name) if u.id not in ids)
               for name in _CLASS_FIELD.values()}
    return replace(resources, **changes)


def scale_load(load: LoadModel, delta_mw: float) -> LoadModel:
    """Raise the peak by ``delta_mw``; every step scales by the same ratio."""
    peak = load.peak_mw + delta_mw
    if not peak > 0:
        raise ValueError(f"resulting peak {peak} MW is not positive")
    return replace(load, peak_mw=peak)


def _ratio(num: float, den: float, digits: int):
    return round(num / den, digits) if den > 0 else None


def storage_class_key(s: StorageUnit) -> tuple:
    """Units sharing this key are scaled copies of one another and merge without loss."""
    return (
        round(s.eta_charge, 3),
        _ratio(s.e_max_mwh, s.p_discharge_max_mw, 1),
        _ratio(s.e_max_mwh, s.p_charge_max_mw, 1),
        _ratio(s.e_min_mwh, s.e_max_mwh, 3),
        _ratio(s.initial_soc_mwh, s.e_max_mwh, 3),
    )


def aggregate_classes(resources: SystemResources) -> SystemResources:
    """Merge storage units of the same class and all flexible-demand units.

    Conventional and variable units are left as they are (their outputs are
    summed when scenarios are realised); colocated portfolios are never merged.
    """
    groups: dict[tuple, list[StorageUnit]] = {}
    for s in resources.storage:
        groups.setdefault(storage_class_key(s), []).append(s)
    storage = []
    for members in groups.values():
        if len(members) == 1:
            storage.append(members[0])
            continue
        e_tot = sum(m.e_max_mwh for m in members)
        eta = (sum(m.eta_charge * m.e_max_mwh for m in members) / e_tot) if e_tot > 0 else members[0].eta_charge
        storage.append(StorageUnit(
            id="+".join(m.id for m in members),
            p_charge_max_mw=sum(m.p_charge_max_mw for m in members),
            p_discharge_max_mw=sum(m.p_discharge_max_mw for m in members),
            e_min_mwh=sum(m.e_min_mwh for m in members),
            e_max_mwh=e_tot,
            eta_charge=eta,
            initial_soc_mwh=sum(m.initial_soc_mwh for m in members),
        ))

    flex = resources.flexible
    traces = resources.traces
    if len(flex) > 1:
        merged_id = "+".join(f.id for f in flex)
        if all(not isinstance(f.baseline, str) and not isinstance(f.reduction_cap, str) for f in flex):
            base, cap = sum(f.baseline for f in flex), sum(f.reduction_cap for f in flex)
        else:
            T = resources.T
            base, cap = f"{merged_id}:baseline", f"{merged_id}:reduction_cap"
            traces = traces.with_series(**{
                base: sum(f.baseline_series(traces, T) for f in flex),
                cap: sum(f.cap_series(traces, T) for f in flex),
            })
        flex = (FlexibleDemandUnit(merged_id, base, cap),)
    return replace(resources, storage=tuple(storage), flexible=flex, traces=traces)
