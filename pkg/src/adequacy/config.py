"""Study configuration files.

A study is described by one JSON document.  Every section rejects unknown
keys so a misspelled field fails loudly instead of silently taking a
default.  Relative paths are resolved against the directory holding the
config file.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .heuristic import SHORTAGE_STEPS, PriorityConfig
from .model import (FlexibleDemandUnit, Horizon, HydrogenPortfolio, LoadModel, StorageUnit, SystemResources,
                    UnlimitedUnit, VariableUnit)
from .traces import TraceStore, read_trace_csv


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class UnlimitedSpec(_Strict):
    id: str
    capacity_mw: float
    efor: float = 0.0
    mean_repair_hours: float = 24.0

    def build(self) -> UnlimitedUnit:
        return UnlimitedUnit(**self.model_dump())


class VariableSpec(_Strict):
    id: str
    capacity_mw: float
    trace_id: str

    def build(self) -> VariableUnit:
        return VariableUnit(**self.model_dump())


class StorageSpec(_Strict):
    id: str
    p_charge_max_mw: float
    p_discharge_max_mw: float
    e_min_mwh: float = 0.0
    e_max_mwh: float
    eta_charge: float = 1.0
    initial_soc_mwh: float = 0.0

    def build(self) -> StorageUnit:
        return StorageUnit(**self.model_dump())


class FlexibleSpec(_Strict):
    id: str
    baseline: Union[float, str]
    reduction_cap: Union[float, str]

    def build(self) -> FlexibleDemandUnit:
        return FlexibleDemandUnit(**self.model_dump())


class PortfolioSpec(_Strict):
    id: str
    wind_capacity_mw: float
    wind_trace_id: Optional[str] = None
    ely_nominal_mw: float
    ely_dr_fraction: float
    fc_max_mw: float
    tank_max_mwh_h2: float
    tank_initial_mwh_h2: float
    ely_eff_mwh_h2_per_mwh_e: float = 0.7
    fc_eff_mwh_e_per_mwh_h2: float = 0.5
    tank_recharge: bool = False
    ely_sales_floor_mw: Optional[float] = None

    def build(self) -> HydrogenPortfolio:
        return HydrogenPortfolio(**self.model_dump())


class UnitLists(_Strict):
    unlimited: list[UnlimitedSpec] = Field(default_factory=list)
    variable: list[VariableSpec] = Field(default_factory=list)
    storage: list[StorageSpec] = Field(default_factory=list)
    flexible: list[FlexibleSpec] = Field(default_factory=list)
    colocated: list[PortfolioSpec] = Field(default_factory=list)

    def build_units(self) -> tuple:
        return tuple(u.build() for group in (self.unlimited, self.variable, self.storage, self.flexible,
                                             self.colocated) for u in group)


class SystemSection(UnitLists):
    T: int = Field(gt=0)
    step_hours: float = Field(1.0, gt=0)
    peak_load_mw: float = Field(gt=0)
    load_trace_id: str = "load"


class ScenarioSection(_Strict):
    N: int = Field(gt=0)
    seed: int = 0
    block_days: int = Field(1, ge=1)
    randomize_initial_soc: bool = False


class SolverSection(_Strict):
    backend: Literal["auto", "highs", "simplex"] = "auto"
    feas_tol: float = Field(1e-6, gt=0)
    opt_tol: float = Field(1e-6, gt=0)


class PrioritySection(_Strict):
    charge_order: Literal["eta_desc", "eta_asc", "listed"] = "eta_desc"
    discharge_order: Literal["duration_desc", "duration_asc", "listed"] = "duration_desc"
    shortage_order: list[str] = Field(default_factory=lambda: list(SHORTAGE_STEPS))
    charge_tank: bool = True

    def build(self) -> PriorityConfig:
        return PriorityConfig(self.charge_order, self.discharge_order, tuple(self.shortage_order),
                              self.charge_tank)


class StudySection(_Strict):
    metric: Literal["eue", "lole"] = "eue"
    epsilon: float = Field(1e-6, gt=0)
    delta_lo: float = -10.0
    delta_hi: float = 10.0
    delta_resolution: float = Field(0.01, gt=0)
    mode: Literal["load-increase", "perfect-generator", "reference-unit"] = "load-increase"
    reference_efor: float = Field(0.0, ge=0, lt=1)
    reference_mean_repair_hours: float = Field(24.0, gt=0)
    target_metric: Optional[float] = None
    addition: UnitLists = Field(default_factory=UnitLists)
    replaces: list[str] = Field(default_factory=list)
    # when set, each accredited portfolio's fixed-draw twin sits in the baseline and is swapped out
    twin_baseline: bool = False
    scaling_factors: list[float] = Field(default_factory=lambda: [1.0])
    priority: PrioritySection = Field(default_factory=PrioritySection)

    @model_validator(mode="after")
    def _check(self):
        if not self.delta_lo < self.delta_hi:
            raise ValueError("delta_lo must be below delta_hi")
        if any(f <= 0 for f in self.scaling_factors):
            raise ValueError("scaling factors must be positive")
        return self


class PathsSection(_Strict):
    traces: str
    steps_per_day: int = Field(24, ge=1)
    scenarios: str = "scenarios.npz"
    output_dir: str = "out"


class StudyConfig(_Strict):
    system: SystemSection
    scenarios: ScenarioSection
    solver: SolverSection = Field(default_factory=SolverSection)
    study: StudySection = Field(default_factory=StudySection)
    paths: PathsSection

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form; independent of key order and whitespace in the file."""
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def load_config(path) -> tuple[StudyConfig, Path]:
    """Parse a config file; returns the config and the directory relative paths refer to."""
    p = Path(path)
    with p.open(encoding="utf-8") as fh:
        raw = json.load(fh)
    return StudyConfig.model_validate(raw), p.resolve().parent


def resolve(base_dir: Path, path: str) -> Path:
    q = Path(path)
    return q if q.is_absolute() else base_dir / q


def load_traces(cfg: StudyConfig, base_dir: Path) -> TraceStore:
    return read_trace_csv(resolve(base_dir, cfg.paths.traces), cfg.paths.steps_per_day)


def build_system(cfg: StudyConfig, traces: TraceStore) -> tuple[SystemResources, LoadModel]:
    s = cfg.system
    res = SystemResources(
        Horizon(s.T, s.step_hours),
        unlimited=tuple(u.build() for u in s.unlimited),
        variable=tuple(u.build() for u in s.variable),
        storage=tuple(u.build() for u in s.storage),
        flexible=tuple(u.build() for u in s.flexible),
        colocated=tuple(u.build() for u in s.colocated),
        traces=traces,
    )
    return res, LoadModel(s.peak_load_mw, s.load_trace_id)
