"""Monte Carlo scenario generation with fixed, replayable random draws.

A :class:`ScenarioSet` records the seed and the sampled calendar (which
historical days feed each scenario).  Outage paths are drawn from an RNG
stream keyed by ``(seed, scenario index, unit id)``, so a set generated for
one system can be realised for an augmented system: existing units see the
same outages and new units get their own fixed paths.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .model import LoadModel, Scenario, SystemResources, validate
from .traces import TraceStore

CACHE_FORMAT = 1


def stable_hash(text: str) -> int:
    """64-bit integer hash of ``text`` that is identical across processes."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def stream(seed: int, index: int, tag: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index), stable_hash(tag)]))


def outage_rates(efor: float, mean_repair_hours: float, step_hours: float = 1.0) -> tuple[float, float]:
    """Per-step (failure, repair) probabilities of the two-state chain.

    The repair probability gives the requested mean down time; the failure
    probability then fixes the stationary unavailability at ``efor``.  When
    that would need a failure probability above one it is capped and the
    repair probability is lowered to keep ``efor`` exact.
    """
    if efor <= 0:
        return 0.0, 1.0
    if efor >= 1:
        return 1.0, 0.0
    mu = min(1.0, step_hours / mean_repair_hours)
    lam = mu * efor / (1.0 - efor)
    if lam > 1.0:
        lam = 1.0
        mu = (1.0 - efor) / efor
    return lam, mu


def sample_outage_path(efor: float, mean_repair_hours: float, T: int, rng: np.random.Generator,
                       step_hours: float = 1.0) -> np.ndarray:
    """Availability series (1 = available) from a two-state Markov chain.

    The initial state is drawn from the stationary distribution.  Sojourn
    lengths are geometric, which is exact for the per-step chain.
    """
    if not 0 <= efor <= 1:
        raise ValueError("efor must lie in [0, 1]")
    if efor == 0:
        return np.ones(T, dtype=np.uint8)
    if efor == 1:
        return np.zeros(T, dtype=np.uint8)
    lam, mu = outage_rates(efor, mean_repair_hours, step_hours)
    up = rng.random() >= efor
    states, lengths, covered = [], [], 0
    batch = max(8, int(2 * T * lam * mu / (lam + mu)) + 8)
    while covered < T:
        # alternate sojourns starting from the current state
        first = rng.geometric(lam if up else mu, size=batch)
        second = rng.geometric(mu if up else lam, size=batch)
        seg = np.empty(2 * batch, dtype=np.int64)
        seg[0::2], seg[1::2] = first, second
        st = np.empty(2 * batch, dtype=np.uint8)
        st[0::2], st[1::2] = int(up), int(not up)
        states.append(st)
        lengths.append(seg)
        covered += int(seg.sum())
    return np.repeat(np.concatenate(states), np.concatenate(lengths))[:T]


def bootstrap_blocks(n_days: int, T: int, block_days: int, rng: np.random.Generator,
                     steps_per_day: int = 24) -> np.ndarray:
    """Sample day indices by resampling contiguous blocks of ``block_days`` with replacement.

    Returns one history-day index per scenario day (``ceil(T / steps_per_day)``
    entries).  Blocks never wrap past the end of the history.
    """
    if block_days < 1:
        raise ValueError("block_days must be >= 1")
    if n_days < block_days:
        raise ValueError(f"trace covers {n_days} days, shorter than one {block_days}-day block")
    days_needed = -(-T // steps_per_day)
    n_blocks = -(-days_needed // block_days)
    starts = rng.integers(0, n_days - block_days + 1, size=n_blocks)
    return (starts[:, None] + np.arange(block_days)[None, :]).ravel()[:days_needed]


def step_index(day_idx: np.ndarray, T: int, steps_per_day: int) -> np.ndarray:
    """Map sampled days to trace step indices; works on (..., days) arrays."""
    t = np.arange(T)
    return day_idx[..., t // steps_per_day] * steps_per_day + t % steps_per_day


@dataclass(frozen=True)
class ScenarioBatch:
    """Realised series for all N scenarios, stacked along the first axis."""

    p_u: np.ndarray            # (N, T)
    p_v: np.ndarray            # (N, T)
    load: np.ndarray           # (N, T)
    storage_initials: np.ndarray  # (N, k)
    flex_baselines: np.ndarray    # (f, T), shared by every scenario
    flex_caps: np.ndarray         # (f, T)
    col_wind: np.ndarray          # (N, r, T)
    col_baseline: np.ndarray      # (r, T)

    @property
    def N(self) -> int:
        return self.load.shape[0]

    @property
    def T(self) -> int:
        return self.load.shape[1]

    def scenario(self, n: int) -> Scenario:
        return Scenario(n, self.p_u[n], self.p_v[n], self.load[n], self.storage_initials[n],
                        self.flex_baselines, self.flex_caps, self.col_wind[n], self.col_baseline)

    def digest(self) -> str:
        h = hashlib.sha256()
        for name in ("p_u", "p_v", "load", "storage_initials", "flex_baselines",
                     "flex_caps", "col_wind", "col_baseline"):
            arr = np.ascontiguousarray(getattr(self, name), dtype="<f8")
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(arr.tobytes())
        return h.hexdigest()


class ScenarioSet:
    """N fixed scenarios: the sampled calendar plus keyed RNG streams for outages.

    ``realize(resources, load)`` produces the series any system would see under
    these scenarios.  The base system's realisation is cached and hashed into
    :attr:`fingerprint`.
    """

    def __init__(self, seed: int, N: int, T: int, step_hours: float, day_indices: np.ndarray,
                 traces: TraceStore, base_resources: SystemResources, base_load: LoadModel,
                 randomize_initial_soc: bool = False, block_days: int = 1, threads: int = 1):
        if N < 1:
            raise ValueError("N must be >= 1")
        self.seed = int(seed)
        self.N = int(N)
        self.T = int(T)
        self.step_hours = float(step_hours)
        self.block_days = int(block_days)
        self.randomize_initial_soc = bool(randomize_initial_soc)
        self.day_indices = np.array(day_indices, dtype=np.int64)
        self.day_indices.flags.writeable = False
        self.traces = traces
        self.threads = max(1, int(threads))
        self._avail: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()
        self.steps = step_index(self.day_indices, self.T, traces.steps_per_day)
        self.steps.flags.writeable = False
        self.base = self.realize(base_resources, base_load)
        self.fingerprint = self._fingerprint()

    def __len__(self) -> int:
        return self.N

    @property
    def scenarios(self) -> list[Scenario]:
        return [self.base.scenario(n) for n in range(self.N)]

    def _fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps([self.seed, self.N, self.T, self.step_hours, self.block_days,
                             self.randomize_initial_soc]).encode())
        h.update(np.ascontiguousarray(self.day_indices, dtype="<i8").tobytes())
        h.update(self.base.digest().encode())
        return h.hexdigest()

    # -- per-unit random draws ------------------------------------------------

    def availability(self, unit_id: str, efor: float, mean_repair_hours: float) -> np.ndarray:
        """(N, T) availability of one unit; fixed by (seed, scenario, unit id)."""
        key = (unit_id, float(efor), float(mean_repair_hours))
        cached = self._avail.get(key)
        if cached is not None:
            return cached

        def one(n):
            return sample_outage_path(efor, mean_repair_hours, self.T, stream(self.seed, n, "unit:" + unit_id),
                                      self.step_hours)

        if self.threads > 1 and self.N > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                rows = list(pool.map(one, range(self.N)))
        else:
            rows = [one(n) for n in range(self.N)]
        arr = np.stack(rows)
        arr.flags.writeable = False
        with self._lock:
            self._avail.setdefault(key, arr)
        return self._avail[key]

    def _initial_soc(self, resources: SystemResources) -> np.ndarray:
        k = len(resources.storage)
        out = np.empty((self.N, k))
        for i, s in enumerate(resources.storage):
            if self.randomize_initial_soc:
                out[:, i] = [stream(self.seed, n, "soc:" + s.id).uniform(s.e_min_mwh, s.e_max_mwh)
                             for n in range(self.N)]
            else:
                out[:, i] = s.initial_soc_mwh
        return out

    def _profile(self, store: TraceStore, trace_id: str) -> np.ndarray:
        return np.asarray(store[trace_id])[self.steps]

    def realize(self, resources: SystemResources, load: LoadModel) -> ScenarioBatch:
        """Series seen by ``resources`` under these scenarios."""
        if resources.T != self.T:
            raise ValueError(f"horizon {resources.T} differs from scenario set horizon {self.T}")
        N, T = self.N, self.T
        traces = resources.traces
        p_u = np.zeros((N, T))
        for u in resources.unlimited:
            p_u += u.capacity_mw * self.availability(u.id, u.efor, u.mean_repair_hours)
        p_v = np.zeros((N, T))
        for v in resources.variable:
            p_v += v.capacity_mw * self._profile(traces, v.trace_id)
        shape = self._profile(traces, load.load_trace_id)
        # FLEX baselines are deterministic: first T steps of their traces
        flex_b = np.array([f.baseline_series(resources.traces, T) for f in resources.flexible]).reshape(-1, T)
        flex_c = np.array([f.cap_series(resources.traces, T) for f in resources.flexible]).reshape(-1, T)
        col_w = np.zeros((N, len(resources.colocated), T))
        for r, p in enumerate(resources.colocated):
            if p.wind_capacity_mw > 0 and p.wind_trace_id is not None:
                col_w[:, r, :] = p.wind_capacity_mw * self._profile(traces, p.wind_trace_id)
        col_b = np.array([np.full(T, p.ely_nominal_mw) for p in resources.colocated]).reshape(-1, T)
        batch = ScenarioBatch(p_u, p_v, load.peak_mw * shape, self._initial_soc(resources),
                              flex_b, flex_c, col_w, col_b)
        for name in ("p_u", "p_v", "load", "storage_initials", "flex_baselines", "flex_caps",
                     "col_wind", "col_baseline"):
            getattr(batch, name).flags.writeable = False
        return batch

    # -- cache ----------------------------------------------------------------

    def save(self, path) -> None:
        """Write a binary cache (npz) holding the calendar, base series and fingerprint."""
        meta = dict(format=CACHE_FORMAT, seed=self.seed, N=self.N, T=self.T, step_hours=self.step_hours,
                    block_days=self.block_days, randomize_initial_soc=self.randomize_initial_soc,
                    fingerprint=self.fingerprint)
        arrays = {f"base_{k}": getattr(self.base, k) for k in
                  ("p_u", "p_v", "load", "storage_initials", "flex_baselines", "flex_caps", "col_wind", "col_baseline")}
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), day_indices=self.day_indices, **arrays)

    @classmethod
    def load(cls, path, resources: SystemResources, load: LoadModel, threads: int = 1) -> "ScenarioSet":
        """Read a cache and rebuild the set for ``resources``.

        Raises :class:`CacheMismatchError` if the stored base series differ
        from what ``resources``/``load`` realise under the stored calendar.
        """
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != CACHE_FORMAT:
                raise CacheMismatchError(f"unsupported cache format {meta.get('format')}")
            day_indices = data["day_indices"]
            stored = ScenarioBatch(*(data[f"base_{k}"] for k in
                                     ("p_u", "p_v", "load", "storage_initials", "flex_baselines",
                                      "flex_caps", "col_wind", "col_baseline")))
        sset = cls(meta["seed"], meta["N"], meta["T"], meta["step_hours"], day_indices, resources.traces,
                   resources, load, meta["randomize_initial_soc"], meta["block_days"], threads)
        if stored.digest() != sset.base.digest() or sset.fingerprint != meta["fingerprint"]:
            raise CacheMismatchError("scenario cache does not match the configured system")
        return sset


class CacheMismatchError(ValueError):
    pass


def generate(resources: SystemResources, load: LoadModel, N: int, seed: int, *, block_days: int = 1,
             randomize_initial_soc: bool = False, traces: TraceStore | None = None,
             threads: int = 1) -> ScenarioSet:
    """Sample and fix N scenarios for ``resources``/``load``.

    ``traces`` overrides the store attached to ``resources``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if traces is not None:
        resources = _with_traces(resources, traces)
    problems = validate(resources, load)
    if problems:
        raise ValueError("invalid system: " + "; ".join(map(str, problems)))
    store = resources.traces
    T = resources.T
    if store.length < T:
        raise ValueError(f"traces cover {store.length} steps, horizon needs {T}")
    day_indices = np.stack([
        bootstrap_blocks(store.n_days, T, block_days, stream(seed, n, "calendar"), store.steps_per_day)
        for n in range(N)
    ])
    return ScenarioSet(seed, N, T, resources.step_hours, day_indices, store, resources, load,
                       randomize_initial_soc, block_days, threads)


def _with_traces(resources: SystemResources, traces: TraceStore) -> SystemResources:
    return replace(resources, traces=traces)
