"""Bounded-variable linear programs in sparse row form."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL_ERROR = "numerical_error"


@dataclass(frozen=True)
class LinearProgram:
    """``min c @ x`` subject to sparse rows ``A x (<= | =) b`` and ``lo <= x <= hi``.

    Rows are stored in coordinate form (``row``, ``col``, ``val``).  ``is_eq[i]``
    selects equality for row ``i``; otherwise the row is ``<=``.  Duplicate
    coordinates are summed.
    """

    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray
    rhs: np.ndarray
    is_eq: np.ndarray
    names: tuple[str, ...] | None = None
    blocks: dict[str, np.ndarray] = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.rhs)

    def check(self) -> list[str]:
        """Return invariant violations (empty when well formed)."""
        problems = []
        n, m = self.n, self.m
        if not (len(self.lo) == len(self.hi) == n):
            problems.append("bound vectors do not match variable count")
        elif np.any(self.lo > self.hi):
            problems.append(f"{int(np.sum(self.lo > self.hi))} variables with lo > hi")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            problems.append("NaN bound")
        if not np.all(np.isfinite(self.c)):
            problems.append("non-finite objective coefficient")
        if not np.all(np.isfinite(self.val)) or not np.all(np.isfinite(self.rhs)):
            problems.append("non-finite constraint data")
        if len(self.row) and (self.row.min() < 0 or self.row.max() >= m):
            problems.append("row index out of range")
        if len(self.col) and (self.col.min() < 0 or self.col.max() >= n):
            problems.append("column index out of range")
        if len(self.is_eq) != m:
            problems.append("relation vector does not match row count")
        return problems

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.m, self.n))
        np.add.at(a, (self.row, self.col), self.val)
        return a

    def sparse_matrix(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.val, (self.row, self.col)), shape=(self.m, self.n))

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        act = np.zeros(self.m)
        np.add.at(act, self.row, self.val * x[self.col])
        return act

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest violation of any row or bound at ``x``."""
        act = self.row_activity(x)
        gap = act - self.rhs
        viol = np.where(self.is_eq, np.abs(gap), np.maximum(gap, 0.0))
        worst = float(viol.max()) if self.m else 0.0
        if self.n:
            worst = max(worst, float(np.max(self.lo - x)), float(np.max(x - self.hi)))
        return max(worst, 0.0)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def with_objective(self, c: np.ndarray) -> "LinearProgram":
        return LinearProgram(
            np.asarray(c, dtype=float), self.lo, self.hi, self.row, self.col,
            self.val, self.rhs, self.is_eq, self.names, self.blocks,
        )


@dataclass(frozen=True)
class LPSolution:
    status: LPStatus
    x: np.ndarray | None
    objective: float
    residual: float
    iterations: int = 0
    # Solver-specific restart data (basis indices for the simplex backend).
    basis: object = None
    backend: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LPStatus.OPTIMAL


class LPBuilder:
    """Incremental, vectorised construction of a :class:`LinearProgram`."""

    def __init__(self):
        self._c: list[np.ndarray] = []
        self._lo: list[np.ndarray] = []
        self._hi: list[np.ndarray] = []
        self._names: list[str] = []
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._eq: list[np.ndarray] = []
        self.n = 0
        self.m = 0
        self.blocks: dict[str, np.ndarray] = {}

    def add_variables(self, name: str, count: int, lo=0.0, hi=np.inf, cost=0.0) -> np.ndarray:
        idx = np.arange(self.n, self.n + count)
        self._lo.append(np.broadcast_to(np.asarray(lo, dtype=float), (count,)).copy())
        self._hi.append(np.broadcast_to(np.asarray(hi, dtype=float), (count,)).copy())
        self._c.append(np.broadcast_to(np.asarray(cost, dtype=float), (count,)).copy())
        self._names.extend(f"{name}[{t}]" for t in range(count))
        self.blocks[name] = idx
        self.n += count
        return idx

    def add_rows(self, cols, coefs, sense: str, rhs) -> np.ndarray:
        """Add ``k`` rows at once.

        ``cols`` is a ``(k, width)`` index array and ``coefs`` broadcasts to
        it.  ``sense`` is one of ``"<="``, ``">="``, ``"=="``.  Returns the new
        row indices.
        """
        cols = np.asarray(cols, dtype=np.int64)
        if cols.ndim != 2:
            raise ValueError("cols must be a (k, width) array")
        coefs = np.broadcast_to(np.asarray(coefs, dtype=float), cols.shape)
        k = cols.shape[0]
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (k,))
        if sense == ">=":
            coefs, rhs = -coefs, -rhs
        elif sense not in ("<=", "=="):
            raise ValueError(f"unknown relation {sense!r}")
        ridx = np.arange(self.m, self.m + k)
        self._rows.append(np.repeat(ridx, cols.shape[1]))
        self._cols.append(cols.ravel())
        self._vals.append(np.array(coefs, dtype=float).ravel())
        self._rhs.append(rhs.copy())
        self._eq.append(np.full(k, sense == "=="))
        self.m += k
        return ridx

    def build(self) -> LinearProgram:
        cat = lambda parts, dt=float: np.concatenate(parts).astype(dt) if parts else np.zeros(0, dtype=dt)
        return LinearProgram(
            c=cat(self._c), lo=cat(self._lo), hi=cat(self._hi),
            row=cat(self._rows, np.int64), col=cat(self._cols, np.int64),
            val=cat(self._vals), rhs=cat(self._rhs), is_eq=cat(self._eq, bool),
            names=tuple(self._names), blocks=dict(self.blocks),
        )


def write_lp_format(lp: LinearProgram, path) -> None:
    """Write ``lp`` in CPLEX LP text format for cross-checking with external solvers."""
    names = lp.names or tuple(f"x{j}" for j in range(lp.n))
    names = [_lp_name(s) for s in names]
    a = lp.sparse_matrix().tocsr()

    def expr(cols, vals):
        parts = []
        for j, v in zip(cols, vals):
            if v == 0:
                continue
            parts.append(f"{'+' if v >= 0 else '-'} {abs(v):.17g} {names[j]}")
        return " ".join(parts) if parts else "0 " + names[0]

    nz = np.flatnonzero(lp.c)
    lines = ["\\ written by adequacy", "Minimize", " obj: " + expr(nz, lp.c[nz]), "Subject To"]
    for i in range(lp.m):
        lo_, hi_ = a.indptr[i], a.indptr[i + 1]
        rel = "=" if lp.is_eq[i] else "<="
        lines.append(f" r{i}: {expr(a.indices[lo_:hi_], a.data[lo_:hi_])} {rel} {lp.rhs[i]:.17g}")
    lines.append("Bounds")
    for j in range(lp.n):
        lo, hi = lp.lo[j], lp.hi[j]
        if np.isinf(lo) and np.isinf(hi):
            lines.append(f" {names[j]} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else f"{lo:.17g}"
            hi_s = "+inf" if np.isinf(hi) else f"{hi:.17g}"
            lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _lp_name(s: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in s)
