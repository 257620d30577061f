"""Brute-force reference solutions for small instances.

Nothing here uses the LP machinery.  :func:`brute_force_eue` runs an exact
dynamic program over storage states with charge/discharge and flexible
reductions restricted to a grid, so its answer is an upper bound on the true
minimum that tightens as the grid is refined.  :func:`reconstruct_toy_cases`
searches small four-step profiles for the two toy systems used to illustrate
that ELCC is not additive.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Horizon, LoadModel, StorageUnit, SystemResources, VariableUnit
from .traces import TraceStore

MAX_STEPS = 8
DEFAULT_BUDGET = 10 ** 8


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class ToyFlex:
    baseline: np.ndarray
    cap: np.ndarray


@dataclass(frozen=True)
class ToyInstance:
    """A tiny single-bus system.

    ``deficit`` is demand minus conventional/variable supply before any wind
    in ``wind``; flexible baselines add to demand on top of it.
    """

    deficit: np.ndarray
    storage: tuple[StorageUnit, ...] = ()
    wind: np.ndarray | None = None
    flex: tuple[ToyFlex, ...] = ()
    resolution: float = 0.1
    step_hours: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "deficit", np.asarray(self.deficit, dtype=float))
        if self.wind is not None:
            object.__setattr__(self, "wind", np.asarray(self.wind, dtype=float))
        object.__setattr__(self, "storage", tuple(self.storage))
        object.__setattr__(self, "flex", tuple(ToyFlex(np.asarray(f.baseline, float), np.asarray(f.cap, float))
                                              for f in self.flex))
        if not 1 <= self.T <= MAX_STEPS:
            raise ValueError(f"toy instances have 1..{MAX_STEPS} steps")
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")
        if len(self.storage) > 2:
            raise ValueError("at most two storage classes")

    @property
    def T(self) -> int:
        return len(self.deficit)

    def shortfall(self) -> np.ndarray:
        s = self.deficit.copy()
        if self.wind is not None:
            s = s - self.wind
        for f in self.flex:
            s = s + f.baseline
        return s


def _grid(lo: float, hi: float, res: float) -> np.ndarray:
    """Multiples of ``res`` in [lo, hi] plus both end points."""
    pts = np.arange(np.ceil(lo / res - 1e-9), np.floor(hi / res + 1e-9) + 1) * res
    return np.unique(np.concatenate([pts, [lo, hi]]))


def flex_reduction_options(inst: ToyInstance, t: int, s_t: float) -> np.ndarray:
    """Every total reduction reachable with per-unit grid reductions that respect the rules.

    Reductions are allowed only when the step is short (``s_t > 0``) and may
    not exceed the shortfall in total.
    """
    if not inst.flex or s_t <= 0:
        return np.zeros(1)
    per_unit = [_grid(0.0, float(f.cap[t]), inst.resolution) for f in inst.flex]
    totals = np.array([sum(c) for c in itertools.product(*per_unit)])
    totals = totals[totals <= s_t + 1e-12]
    return np.unique(np.round(totals, 12))


def brute_force_flex(inst: ToyInstance) -> tuple[float, np.ndarray]:
    """(minimal unserved energy, largest optimal total reduction per step) with flexible demand only."""
    if inst.storage:
        raise ValueError("instance has storage; use brute_force_eue")
    s = inst.shortfall()
    ue = 0.0
    red = np.zeros(inst.T)
    for t in range(inst.T):
        opts = flex_reduction_options(inst, t, s[t])
        u = np.maximum(s[t] - opts, 0.0)
        best = u.min()
        ue += best * inst.step_hours
        red[t] = opts[u <= best + 1e-12].max()
    return ue, red


def brute_force_eue(inst: ToyInstance, budget: int = DEFAULT_BUDGET) -> float:
    """Minimal unserved energy over grid-restricted dispatch decisions.

    Storage moves are signed (negative = charge), so charge and discharge are
    never simultaneous.  Candidate moves per storage are the grid points
    within its power limits plus the moves that exactly fill or empty it.
    The state space is the exact set of reachable state-of-charge vectors.
    """
    h = inst.step_hours
    k = len(inst.storage)
    s = inst.shortfall()
    res = inst.resolution
    pch = np.array([u.p_charge_max_mw for u in inst.storage])
    pdis = np.array([u.p_discharge_max_mw for u in inst.storage])
    emin = np.array([u.e_min_mwh for u in inst.storage])
    emax = np.array([u.e_max_mwh for u in inst.storage])
    eta = np.array([u.eta_charge for u in inst.storage])
    grids = [_grid(-pch[j], pdis[j], res) for j in range(k)]

    states = np.array([[u.initial_soc_mwh for u in inst.storage]], dtype=float).reshape(1, k)
    cost = np.zeros(1)
    spent = 0
    for t in range(inst.T):
        reds = flex_reduction_options(inst, t, s[t])
        # per-state candidate moves: (m, a_j) for each storage
        moves = []
        for j in range(k):
            fill = -np.minimum((emax[j] - states[:, j]) / (eta[j] * h), pch[j])
            empty = np.minimum((states[:, j] - emin[j]) / h, pdis[j])
            g = np.broadcast_to(grids[j], (len(states), len(grids[j])))
            moves.append(np.concatenate([g, fill[:, None], empty[:, None]], axis=1))
        n_moves = int(np.prod([m.shape[1] for m in moves])) if k else 1
        work = len(states) * n_moves * len(reds)
        spent += work
        if spent > budget:
            raise BudgetExceededError(f"enumeration exceeds budget of {budget} combinations")

        if k == 0:
            best = np.min(np.maximum(s[t] - reds, 0.0))
            cost = cost + best * h
            continue

        # cartesian product of per-storage moves, per state
        mesh = np.stack(np.meshgrid(*[np.arange(m.shape[1]) for m in moves], indexing="ij"), -1).reshape(-1, k)
        u = np.stack([moves[j][:, mesh[:, j]] for j in range(k)], axis=-1)  # (m, A, k)
        charge = np.maximum(-u, 0.0)
        dis = np.maximum(u, 0.0)
        new = states[:, None, :] + (eta * charge - dis) * h
        ok = np.all((new >= emin - 1e-9) & (new <= emax + 1e-9), axis=-1)
        inject = u.sum(axis=-1)
        short = s[t] - inject                                   # (m, A)
        step_ue = np.min(np.maximum(short[..., None] - reds, 0.0), axis=-1)
        tot = cost[:, None] + step_ue * h
        new = np.clip(new[ok], emin, emax)
        tot = tot[ok]
        key = np.round(new, 9)
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        best = np.full(len(uniq), np.inf)
        np.minimum.at(best, inv.ravel(), tot)
        # keep an exact representative of each rounded state
        rep = np.empty((len(uniq), k))
        rep[inv.ravel()] = new
        states, cost = rep, best
    return float(cost.min())


# --- two-case toy systems ------------------------------------------------

TOY_BASE_UE = 4.0
TOY_WIND_MW = 2.0
TOY_STORAGE = StorageUnit("storage", p_charge_max_mw=5.0, p_discharge_max_mw=5.0, e_min_mwh=0.0,
                           e_max_mwh=5.0, eta_charge=1.0, initial_soc_mwh=2.0)
TOY_TARGETS = {"top": {"wind": 2.0, "storage": 1.0, "colocated": 2.5},
                "bottom": {"wind": 0.0, "storage": 1.0, "colocated": 2.5}}
TOY_PEAK_MW = 10.0
FIXTURE_VERSION = 1


def greedy_storage_ue(net: np.ndarray, storage: StorageUnit = TOY_STORAGE) -> np.ndarray:
    """Unserved energy of one lossless storage run greedily (optimal when eta = 1).

    ``net`` has shape (..., T): positive = deficit, negative = surplus.
    """
    if storage.eta_charge != 1.0:
        raise ValueError("greedy evaluation is exact only for lossless storage")
    e = np.full(net.shape[:-1], float(storage.initial_soc_mwh))
    ue = np.zeros(net.shape[:-1])
    for t in range(net.shape[-1]):
        n = net[..., t]
        ch = np.minimum(np.minimum(np.maximum(-n, 0.0), storage.p_charge_max_mw), storage.e_max_mwh - e)
        d = np.minimum(np.minimum(np.maximum(n, 0.0), storage.p_discharge_max_mw), e - storage.e_min_mwh)
        e = e + ch - d
        ue += np.maximum(n, 0.0) - d
    return ue


def plain_ue(net: np.ndarray) -> np.ndarray:
    return np.maximum(net, 0.0).sum(axis=-1)


def toy_elcc(ue_fn, net: np.ndarray, target: float = TOY_BASE_UE, lo: float = -4.0, hi: float = 8.0,
             iterations: int = 60) -> np.ndarray:
    """Largest added flat load keeping unserved energy at or below ``target`` (vectorised bisection)."""
    k = net.shape[:-1]
    lo_ = np.full(k, lo)
    hi_ = np.full(k, hi)
    for _ in range(iterations):
        mid = 0.5 * (lo_ + hi_)
        ok = ue_fn(net + mid[..., None]) <= target + 1e-12
        lo_ = np.where(ok, mid, lo_)
        hi_ = np.where(ok, hi_, mid)
    return lo_


def crossing_is_unique(ue_fn, net: np.ndarray, x: np.ndarray, target: float = TOY_BASE_UE,
                       step: float = 1e-3) -> np.ndarray:
    """True where the unserved energy equals ``target`` at ``x`` and is strictly on each side nearby."""
    below = ue_fn(net + (x - step)[..., None]) < target - 1e-9
    above = ue_fn(net + (x + step)[..., None]) > target + 1e-9
    hit = np.abs(ue_fn(net + x[..., None]) - target) < 1e-9
    return below & above & hit


@dataclass(frozen=True)
class ToyCase:
    name: str
    deficit: np.ndarray
    wind: np.ndarray
    storage: StorageUnit = field(default=TOY_STORAGE)

    def instance(self, with_wind=True, with_storage=True, resolution=0.5) -> ToyInstance:
        return ToyInstance(self.deficit, (self.storage,) if with_storage else (),
                           self.wind if with_wind else None, resolution=resolution)

    def elcc(self, which: str) -> float:
        """Independently computed ELCC of ``wind``, ``storage`` or ``colocated``."""
        net = self.deficit[None] - (self.wind[None] if which in ("wind", "colocated") else 0.0)
        fn = plain_ue if which == "wind" else (lambda n: greedy_storage_ue(n, self.storage))
        return float(toy_elcc(fn, net)[0])


def reconstruct_toy_cases(grid_step: float = 0.5, deficit_range=(-4.0, 4.0), wind_max: float = TOY_WIND_MW
                     ) -> tuple[ToyCase, ToyCase]:
    """Search four-step deficit and wind profiles for the two toy cases.

    Requirements for both cases: baseline unserved energy 4 MWh, storage-only
    ELCC 1 MW and colocated ELCC 2.5 MW; wind-only ELCC is 2 MW (top) or
    0 MW (bottom).  Every ELCC must be a unique crossing of the 4 MWh level.
    Candidates are scanned in lexicographic order and the first match for
    each case is returned.
    """
    values = np.arange(deficit_range[0], deficit_range[1] + 1e-9, grid_step)
    winds = np.arange(0.0, wind_max + 1e-9, grid_step)
    d_all = np.array(list(itertools.product(values, repeat=4)))
    d_all = d_all[np.abs(plain_ue(d_all) - TOY_BASE_UE) < 1e-9]
    w_all = np.array(list(itertools.product(winds, repeat=4)))
    sto = lambda n: greedy_storage_ue(n, TOY_STORAGE)

    es = toy_elcc(sto, d_all)
    keep = (np.abs(es - 1.0) < 1e-6) & crossing_is_unique(sto, d_all, es)
    d_ok = d_all[keep]
    found: dict[str, ToyCase] = {}
    for d in d_ok:
        net = d[None, :] - w_all
        ew = toy_elcc(plain_ue, net)
        ec = toy_elcc(sto, net)
        good = (np.abs(ec - 2.5) < 1e-6) & crossing_is_unique(sto, net, ec) & crossing_is_unique(plain_ue, net, ew)
        for name in ("top", "bottom"):
            if name in found:
                continue
            hit = np.flatnonzero(good & (np.abs(ew - TOY_TARGETS[name]["wind"]) < 1e-6))
            if len(hit):
                found[name] = ToyCase(name, d.copy(), w_all[hit[0]].copy())
        if len(found) == 2:
            return found["top"], found["bottom"]
    raise LookupError("no profile pair satisfies every toy-case property")


def write_toy_fixture(path, cases: tuple[ToyCase, ToyCase]) -> None:
    s = cases[0].storage
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# toy ELCC fixture v{FIXTURE_VERSION}; flat load peak {TOY_PEAK_MW} MW; "
                 f"wind {TOY_WIND_MW} MW; storage {s.p_discharge_max_mw} MW/{s.e_max_mwh} MWh "
                 f"initial {s.initial_soc_mwh} MWh eta {s.eta_charge}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case", "step", "deficit_mw", "wind_mw"])
        for c in cases:
            for t in range(len(c.deficit)):
                w.writerow([c.name, t, repr(float(c.deficit[t])), repr(float(c.wind[t]))])


def read_toy_fixture(path) -> tuple[ToyCase, ToyCase]:
    rows: dict[str, list[tuple[int, float, float]]] = {}
    with Path(path).open(encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for rec in csv.DictReader(lines):
        rows.setdefault(rec["case"], []).append((int(rec["step"]), float(rec["deficit_mw"]), float(rec["wind_mw"])))
    out = []
    for name in ("top", "bottom"):
        recs = sorted(rows[name])
        out.append(ToyCase(name, np.array([r[1] for r in recs]), np.array([r[2] for r in recs])))
    return out[0], out[1]


def toy_case_system(case: ToyCase) -> tuple[SystemResources, LoadModel]:
    """The toy case as a one-day system: flat load, supply shaped to give the deficit profile."""
    T = len(case.deficit)
    supply = TOY_PEAK_MW - case.deficit
    cap = float(supply.max())
    traces = TraceStore({"flat": np.ones(T), "supply_cf": supply / cap, "wind_cf": case.wind / TOY_WIND_MW},
                        steps_per_day=T)
    res = SystemResources(Horizon(T), variable=(VariableUnit("supply", cap, "supply_cf"),), traces=traces)
    return res, LoadModel(TOY_PEAK_MW, "flat")


def toy_case_addition(case: ToyCase, which: str):
    wind = VariableUnit("wind", TOY_WIND_MW, "wind_cf")
    return {"wind": wind, "storage": case.storage, "colocated": (wind, case.storage)}[which]


def random_toy(rng: np.random.Generator, max_T: int = 6, max_storage: int = 2, max_flex: int = 1,
               resolution: float = 0.1, etas=(0.8, 0.9, 1.0)) -> ToyInstance:
    """Random instance small enough for :func:`brute_force_eue`."""
    T = int(rng.integers(1, max_T + 1))
    grid = lambda lo, hi, size=None: np.round(rng.integers(round(lo / resolution), round(hi / resolution) + 1,
                                                           size=size) * resolution, 10)
    deficit = grid(-1.0, 1.0, T)
    storage = []
    for j in range(int(rng.integers(0, max_storage + 1))):
        e_max = float(grid(0.2, 0.8))
        storage.append(StorageUnit(
            f"s{j}", p_charge_max_mw=float(grid(0.1, 0.4)), p_discharge_max_mw=float(grid(0.1, 0.4)),
            e_min_mwh=0.0, e_max_mwh=e_max, eta_charge=float(rng.choice(etas)),
            initial_soc_mwh=min(e_max, float(np.round(np.round(rng.uniform(0, e_max) / resolution) * resolution, 10))),
        ))
    flex = []
    for _ in range(int(rng.integers(0, max_flex + 1))):
        base = grid(0.0, 0.6, T)
        cap = np.minimum(grid(0.0, 0.4, T), base)
        flex.append(ToyFlex(base, cap))
    return ToyInstance(deficit, tuple(storage), None, tuple(flex), resolution)


def toy_system(inst: ToyInstance) -> tuple[SystemResources, LoadModel]:
    """Express a toy instance as a one-scenario system for the LP pipeline.

    Demand is a flat 10 MW; conventional-free supply is shaped so that demand
    minus supply equals the instance deficit.
    """
    from .model import FlexibleDemandUnit

    T = inst.T
    peak = 10.0
    supply = peak - inst.deficit
    if inst.wind is not None:
        supply = supply + inst.wind
    cap = float(supply.max())
    series = {"flat": np.ones(T), "supply_cf": supply / cap}
    flex = []
    for i, f in enumerate(inst.flex):
        series[f"flex{i}_base"], series[f"flex{i}_cap"] = f.baseline, f.cap
        flex.append(FlexibleDemandUnit(f"flex{i}", f"flex{i}_base", f"flex{i}_cap"))
    traces = TraceStore(series, steps_per_day=T)
    res = SystemResources(Horizon(T, inst.step_hours), variable=(VariableUnit("supply", cap, "supply_cf"),),
                          storage=inst.storage, flexible=tuple(flex), traces=traces)
    return res, LoadModel(peak, "flat")
