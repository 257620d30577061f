"""Expected reliability over a fixed scenario set and ELCC by bisection.

The reliability of a system is the mean, over the fixed scenarios, of the
unserved energy (or loss-of-load steps) of its dispatch.  The ELCC of an
addition is the extra load, applied by scaling the peak, at which the
augmented system is exactly as reliable as the original.  Because every
evaluation replays the same scenarios, the comparison is paired and the
reliability curve is monotone in the added load.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal, Sequence

import numpy as np

from .dispatch import dispatch_optimal
from .heuristic import PriorityConfig, heuristic_batch
from .colocated import inflexible_twin, installed_capacity, scale_portfolio
from .model import (HydrogenPortfolio, LoadModel, StorageUnit, SystemResources, UnlimitedUnit, Unit, VariableUnit,
                    augment, remove, scale_load)
from .scenario import ScenarioSet

Dispatcher = Literal["optimal", "heuristic"]
Metric = Literal["eue", "lole"]
Mode = Literal["load-increase", "perfect-generator", "reference-unit"]
MODES = ("load-increase", "perfect-generator", "reference-unit")

# Scenarios whose priority dispatch already serves all load need no LP:
# the optimum cannot be worse than a feasible dispatch.
SCREEN_TOL = 1e-9
PERFECT_UNIT_ID = "__perfect_unit__"
REFERENCE_UNIT_ID = "__reference_unit__"


class BracketError(RuntimeError):
    def __init__(self, lo, hi, f_lo, f_hi, target):
        super().__init__(f"target {target:.9g} not bracketed: f({lo:.6g})={f_lo:.9g}, f({hi:.6g})={f_hi:.9g}")
        self.lo, self.hi, self.f_lo, self.f_hi, self.target = lo, hi, f_lo, f_hi, target


class NonMonotoneError(RuntimeError):
    pass


class ScenarioMismatchError(RuntimeError):
    pass


@dataclass
class EvalContext:
    """Solver settings shared by every evaluation of a study, plus warm-start state."""

    dispatcher: Dispatcher = "optimal"
    metric: Metric = "eue"
    threads: int = 1
    backend: str = "auto"
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    rules: PriorityConfig | None = None
    warm: dict = field(default_factory=dict)
    lp_solves: int = 0


@dataclass(frozen=True)
class ScenarioMetrics:
    """Per-scenario reliability of one system under one dispatcher."""

    eue_mwh: np.ndarray
    lole_steps: np.ndarray
    peak_shortfall_mw: np.ndarray
    lp_solved: np.ndarray       # scenario indices that needed an LP

    def metric(self, name: Metric) -> np.ndarray:
        return (self.eue_mwh if name == "eue" else self.lole_steps).astype(float)


def assess_scenarios(resources: SystemResources, load: LoadModel, scenarios: ScenarioSet,
                     ctx: EvalContext | None = None, **kwargs) -> ScenarioMetrics:
    """Dispatch every scenario and collect its metrics.

    The priority dispatch runs on all scenarios first; with the optimal
    dispatcher an LP is solved only where it left load unserved.
    """
    ctx = ctx or EvalContext(**kwargs)
    batch = scenarios.realize(resources, load)
    screen = heuristic_batch(batch, resources, ctx.rules)
    if ctx.dispatcher == "heuristic":
        return ScenarioMetrics(screen.eue_mwh, screen.lole_steps, screen.peak_shortfall_mw,
                               np.zeros(0, dtype=np.int64))
    if ctx.dispatcher != "optimal":
        raise ValueError(f"unknown dispatcher {ctx.dispatcher!r}")

    eue = np.zeros(scenarios.N)
    lole = np.zeros(scenarios.N, dtype=np.int64)
    peak = np.zeros(scenarios.N)
    todo = np.flatnonzero(screen.eue_mwh > SCREEN_TOL)

    def one(n: int):
        # DispatchError messages carry the scenario id
        res = dispatch_optimal(batch.scenario(n), resources, backend=ctx.backend, feas_tol=ctx.feas_tol,
                               opt_tol=ctx.opt_tol, warm_start=ctx.warm.get(n))
        return n, res

    if ctx.threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(ctx.threads) as pool:
            done = list(pool.map(one, todo))
    else:
        done = [one(n) for n in todo]
    for n, res in done:
        eue[n], lole[n], peak[n] = res.eue_mwh, res.lole_steps, res.peak_shortfall_mw
        if res.lp_solution is not None and res.lp_solution.basis is not None:
            ctx.warm[n] = res.lp_solution
    ctx.lp_solves += len(todo)
    return ScenarioMetrics(eue, lole, peak, todo)


def evaluate(resources: SystemResources, load: LoadModel, scenarios: ScenarioSet,
             ctx: EvalContext | None = None, **kwargs) -> np.ndarray:
    """Per-scenario reliability metric (length N)."""
    ctx = ctx or EvalContext(**kwargs)
    return assess_scenarios(resources, load, scenarios, ctx).metric(ctx.metric)


def expected_reliability(resources: SystemResources, load: LoadModel, scenarios: ScenarioSet,
                         dispatcher: Dispatcher = "optimal", **kwargs) -> float:
    """Mean of the per-scenario metric over the fixed scenario set."""
    return float(np.mean(evaluate(resources, load, scenarios, dispatcher=dispatcher, **kwargs)))


@dataclass(frozen=True)
class ElccStudy:
    """An accreditation request.

    ``replaces`` names baseline units that the addition supersedes (for a
    colocated portfolio, its inflexible nominal-draw twin).  ``delta_lo`` and
    ``delta_hi`` bound the searched quantity: added load in load-increase
    mode, benchmark unit capacity otherwise.
    """

    resources: SystemResources
    load: LoadModel
    addition: Unit | tuple[Unit, ...]
    scenarios: ScenarioSet
    metric: Metric = "eue"
    epsilon: float = 1e-6
    delta_lo: float = -10.0
    delta_hi: float = 10.0
    delta_resolution: float = 0.01
    mode: Mode = "load-increase"
    reference_efor: float = 0.0
    reference_mean_repair_hours: float = 24.0
    target_metric: float | None = None
    replaces: tuple[str, ...] = ()
    dispatcher: Dispatcher = "optimal"
    rules: PriorityConfig | None = None
    threads: int = 1
    backend: str = "auto"
    feas_tol: float = 1e-6
    opt_tol: float = 1e-6
    fingerprint: str = ""

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.delta_lo < self.delta_hi:
            raise ValueError("delta_lo must be < delta_hi")
        if not self.delta_resolution > 0:
            raise ValueError("delta_resolution must be > 0")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != "load-increase" and self.delta_lo < 0:
            raise ValueError("benchmark capacity bounds must be non-negative")
        if self.mode != "load-increase" and self.target_metric is not None:
            raise ValueError("target_metric applies to load-increase mode only")
        if isinstance(self.addition, list):
            object.__setattr__(self, "addition", tuple(self.addition))
        object.__setattr__(self, "replaces", tuple(self.replaces))
        if not self.fingerprint:
            object.__setattr__(self, "fingerprint", self.scenarios.fingerprint)

    def augmented(self) -> SystemResources:
        base = remove(self.resources, self.replaces) if self.replaces else self.resources
        return augment(base, self.addition)

    def context(self) -> EvalContext:
        return EvalContext(self.dispatcher, self.metric, self.threads, self.backend,
                           self.feas_tol, self.opt_tol, self.rules)

    @property
    def max_iterations(self) -> int:
        return bisection_bound(self.delta_lo, self.delta_hi, self.delta_resolution)


@dataclass(frozen=True)
class ElccResult:
    delta_mw: float
    mode: str
    baseline_metric: float
    matched_metric: float
    residual: float
    iterations: int
    max_iterations: int
    converged_by: str
    trace: tuple[tuple[float, float], ...]
    per_scenario_baseline: np.ndarray = field(repr=False)
    per_scenario_matched: np.ndarray = field(repr=False)
    fingerprint: str = ""
    dispatcher: str = "optimal"
    metric: str = "eue"

    def summary(self) -> dict:
        return {
            "delta_mw": self.delta_mw, "mode": self.mode, "dispatcher": self.dispatcher, "metric": self.metric,
            "baseline_metric": self.baseline_metric, "matched_metric": self.matched_metric,
            "residual": self.residual, "iterations": self.iterations, "max_iterations": self.max_iterations,
            "converged_by": self.converged_by, "fingerprint": self.fingerprint,
        }

    def to_json_dict(self) -> dict:
        d = self.summary()
        d["trace"] = [[x, y] for x, y in self.trace]
        d["per_scenario_baseline"] = self.per_scenario_baseline.tolist()
        d["per_scenario_matched"] = self.per_scenario_matched.tolist()
        return d


def bisection_bound(lo: float, hi: float, resolution: float) -> int:
    """Iterations bisection needs to shrink [lo, hi] to ``resolution``."""
    return max(0, math.ceil(math.log2((hi - lo) / resolution)))


@dataclass
class _Bisection:
    x: float
    value: float
    per_scenario: np.ndarray
    iterations: int
    converged_by: str
    trace: list


def bisect(f: Callable[[float], np.ndarray], lo: float, hi: float, target: float, epsilon: float,
           resolution: float, increasing: bool = True, mono_tol: float = 1e-7) -> _Bisection:
    """Find x in [lo, hi] with mean(f(x)) within ``epsilon`` of ``target``.

    ``f`` returns per-scenario values; their mean is the monotone quantity.
    Stops when the target is hit or the bracket is narrower than
    ``resolution`` (then the bracket midpoint is returned).
    """
    sign = 1.0 if increasing else -1.0
    v_lo, v_hi = f(lo), f(hi)
    f_lo, f_hi = float(v_lo.mean()), float(v_hi.mean())
    trace = [(lo, f_lo), (hi, f_hi)]
    tol = mono_tol * max(1.0, abs(target))
    if sign * (f_lo - f_hi) > tol:
        raise NonMonotoneError(f"endpoint values out of order: f({lo:.6g})={f_lo:.9g}, f({hi:.6g})={f_hi:.9g}")
    if sign * (f_lo - target) > tol or sign * (target - f_hi) > tol:
        raise BracketError(lo, hi, f_lo, f_hi, target)

    iterations = 0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        v = f(mid)
        fm = float(v.mean())
        iterations += 1
        trace.append((mid, fm))
        if sign * (fm - f_lo) < -tol or sign * (f_hi - fm) < -tol:
            raise NonMonotoneError(
                f"f({mid:.6g})={fm:.9g} outside [f({lo:.6g})={f_lo:.9g}, f({hi:.6g})={f_hi:.9g}]")
        if abs(fm - target) < epsilon:
            return _Bisection(mid, fm, v, iterations, "epsilon", trace)
        if sign * (fm - target) < 0:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
    mid = 0.5 * (lo + hi)
    v = f(mid)
    trace.append((mid, float(v.mean())))
    return _Bisection(mid, float(v.mean()), v, iterations, "resolution", trace)


def _check_fingerprint(study: ElccStudy) -> None:
    if study.scenarios.fingerprint != study.fingerprint:
        raise ScenarioMismatchError(
            f"study recorded scenario set {study.fingerprint[:12]}, got {study.scenarios.fingerprint[:12]}")


def find_delta(study: ElccStudy, ctx: EvalContext | None = None) -> ElccResult:
    """Load-increase ELCC: added peak load at which the augmented system matches the target."""
    _check_fingerprint(study)
    ctx = ctx or study.context()
    base_vals = evaluate(study.resources, study.load, study.scenarios, ctx)
    target = float(base_vals.mean()) if study.target_metric is None else float(study.target_metric)
    aug = study.augmented()
    aug_ctx = EvalContext(ctx.dispatcher, ctx.metric, ctx.threads, ctx.backend, ctx.feas_tol, ctx.opt_tol, ctx.rules)

    def f(delta):
        _check_fingerprint(study)
        return evaluate(aug, scale_load(study.load, delta), study.scenarios, aug_ctx)

    b = bisect(f, study.delta_lo, study.delta_hi, target, study.epsilon, study.delta_resolution, increasing=True)
    ctx.lp_solves += aug_ctx.lp_solves
    return _result(study, b, target, base_vals)


def elcc_benchmark(study: ElccStudy) -> ElccResult:
    """ELCC in the study's benchmark mode.

    ``load-increase`` is :func:`find_delta`.  The generator modes return the
    capacity of a benchmark unit (perfectly reliable, or with forced-outage
    rate ``reference_efor``) whose addition to the baseline gives the same
    reliability as adding the resource.
    """
    if study.mode == "load-increase":
        return find_delta(study)
    _check_fingerprint(study)
    ctx = study.context()
    target_vals = evaluate(study.augmented(), study.load, study.scenarios, ctx)
    target = float(target_vals.mean())
    if study.mode == "perfect-generator":
        uid, efor = PERFECT_UNIT_ID, 0.0
    else:
        uid, efor = REFERENCE_UNIT_ID, study.reference_efor

    def f(q):
        _check_fingerprint(study)
        unit = UnlimitedUnit(uid, q, efor, study.reference_mean_repair_hours)
        return evaluate(augment(study.resources, unit), study.load, study.scenarios, ctx)

    b = bisect(f, study.delta_lo, study.delta_hi, target, study.epsilon, study.delta_resolution, increasing=False)
    return _result(study, b, target, target_vals)


def _result(study: ElccStudy, b: _Bisection, target: float, base_vals: np.ndarray) -> ElccResult:
    return ElccResult(
        delta_mw=b.x, mode=study.mode, baseline_metric=target, matched_metric=b.value,
        residual=abs(b.value - target), iterations=b.iterations, max_iterations=study.max_iterations,
        converged_by=b.converged_by, trace=tuple(b.trace),
        per_scenario_baseline=np.asarray(base_vals), per_scenario_matched=np.asarray(b.per_scenario),
        fingerprint=study.fingerprint, dispatcher=study.dispatcher, metric=study.metric,
    )


def reliability_curve(study: ElccStudy, deltas: Sequence[float] | Iterable[float]) -> list[tuple[float, float]]:
    """Expected reliability of the augmented system at each added load."""
    _check_fingerprint(study)
    ctx = study.context()
    aug = study.augmented()
    return [(float(d), float(evaluate(aug, scale_load(study.load, d), study.scenarios, ctx).mean()))
            for d in deltas]


def is_monotone(values: Sequence[float], tol: float = 1e-7) -> bool:
    """True when ``values`` never decrease by more than ``tol``."""
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) >= -tol * np.maximum(1.0, np.abs(v[:-1]))))


# --- capacity sweeps -----------------------------------------------------------

def scale_unit(unit: Unit, factor: float) -> Unit:
    """Copy of ``unit`` with every power and energy rating multiplied by ``factor``."""
    if isinstance(unit, HydrogenPortfolio):
        return scale_portfolio(unit, factor)
    if isinstance(unit, (UnlimitedUnit, VariableUnit)):
        return replace(unit, capacity_mw=unit.capacity_mw * factor)
    if isinstance(unit, StorageUnit):
        return replace(unit, p_charge_max_mw=unit.p_charge_max_mw * factor,
                       p_discharge_max_mw=unit.p_discharge_max_mw * factor,
                       e_min_mwh=unit.e_min_mwh * factor, e_max_mwh=unit.e_max_mwh * factor,
                       initial_soc_mwh=unit.initial_soc_mwh * factor)
    raise TypeError(f"cannot scale {type(unit).__name__} {unit.id!r}")


def nameplate_mw(unit: Unit) -> float:
    """Installed capacity used to express ELCC as a fraction."""
    if isinstance(unit, HydrogenPortfolio):
        return installed_capacity(unit)
    if isinstance(unit, (UnlimitedUnit, VariableUnit)):
        return unit.capacity_mw
    if isinstance(unit, StorageUnit):
        return unit.p_discharge_max_mw
    raise TypeError(f"no nameplate rule for {type(unit).__name__} {unit.id!r}")


@dataclass(frozen=True)
class SweepRow:
    factor: float
    installed_mw: float
    heuristic: ElccResult
    optimal: ElccResult

    @property
    def dominates(self) -> bool:
        """Optimal dispatch accredits at least as much as the priority rules."""
        return self.optimal.delta_mw >= self.heuristic.delta_mw


def compare_methods(resources: SystemResources, load: LoadModel, addition: Unit | Sequence[Unit],
                    scenarios: ScenarioSet, factors: Sequence[float], *, twin_baseline: bool = False,
                    replaces: Sequence[str] = (), **study_kw) -> list[SweepRow]:
    """ELCC of the addition scaled by each factor, under both dispatchers, on one scenario set.

    With ``twin_baseline`` every hydrogen portfolio in the addition has its
    fixed-draw twin placed in the baseline and swapped out on augmentation,
    so the electrolyzer load is part of the system in both cases.
    """
    rows = []
    for factor in factors:
        base, scaled, swap = prepare_addition(resources, addition, factor, twin_baseline, replaces)
        found = {}
        for method in ("heuristic", "optimal"):
            study = ElccStudy(base, load, scaled, scenarios, replaces=swap, dispatcher=method, **study_kw)
            found[method] = elcc_benchmark(study)
        units = scaled if isinstance(scaled, tuple) else (scaled,)
        rows.append(SweepRow(float(factor), float(sum(nameplate_mw(u) for u in units)),
                             found["heuristic"], found["optimal"]))
    return rows


def prepare_addition(resources: SystemResources, addition: Unit | Sequence[Unit], factor: float = 1.0,
                     twin_baseline: bool = False, replaces: Sequence[str] = ()):
    """(baseline, scaled addition, ids the addition replaces) for one sweep point."""
    units = (addition,) if not isinstance(addition, (tuple, list)) else tuple(addition)
    scaled = tuple(u if factor == 1.0 else scale_unit(u, factor) for u in units)
    base, swap = resources, tuple(replaces)
    if twin_baseline:
        twins = tuple(inflexible_twin(u) for u in scaled if isinstance(u, HydrogenPortfolio))
        base = augment(resources, twins) if twins else resources
        swap = swap + tuple(t.id for t in twins)
    return base, (scaled if len(scaled) > 1 else scaled[0]), swap
