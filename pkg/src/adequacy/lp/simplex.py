"""Dense bounded-variable revised simplex.

Two-phase method on ``A x + s = b`` with explicit bounds on every column.
Pricing is Dantzig's rule; after a run of degenerate pivots the solver
switches to Bland's smallest-index rule until it makes progress again, which
rules out cycling.  The basis inverse is kept explicitly with product-form
updates and refactored periodically.

Sized for the small and medium programs used in verification; the dispatch
LPs of full-year studies should go to the HiGHS backend.
"""

from __future__ import annotations

import numpy as np

from .program import LinearProgram, LPSolution, LPStatus

REFACTOR_EVERY = 64
DEGENERATE_RUN = 30
PIVOT_TOL = 1e-9


class _Problem:
    """Standard-form data: structurals, then one slack per ``<=`` row, then artificials."""

    def __init__(self, lp: LinearProgram):
        a = lp.dense_matrix()
        m, n = a.shape
        le_rows = np.flatnonzero(~lp.is_eq)
        slack = np.zeros((m, len(le_rows)))
        slack[le_rows, np.arange(len(le_rows))] = 1.0
        self.m, self.n_struct = m, n
        self.n_core = n + len(le_rows)
        self.a = np.hstack([a, slack])
        self.b = lp.rhs.astype(float).copy()
        self.lo = np.concatenate([lp.lo, np.zeros(len(le_rows))])
        self.hi = np.concatenate([lp.hi, np.full(len(le_rows), np.inf)])
        self.c = np.concatenate([lp.c, np.zeros(len(le_rows))])
        self.slack_of_row = np.full(m, -1)
        self.slack_of_row[le_rows] = n + np.arange(len(le_rows))

    def add_artificials(self, signs: np.ndarray, rows: np.ndarray) -> None:
        art = np.zeros((self.m, len(rows)))
        art[rows, np.arange(len(rows))] = signs
        self.a = np.hstack([self.a, art])
        self.lo = np.concatenate([self.lo, np.zeros(len(rows))])
        self.hi = np.concatenate([self.hi, np.full(len(rows), np.inf)])
        self.c = np.concatenate([self.c, np.zeros(len(rows))])


def _initial_nonbasic(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    x = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
    return x.astype(float)


class _Simplex:
    def __init__(self, prob: _Problem, basis: np.ndarray, x: np.ndarray,
                 feas_tol: float, opt_tol: float, max_iter: int):
        self.p = prob
        self.basis = np.asarray(basis, dtype=np.int64)
        self.x = x
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.max_iter = max_iter
        self.iterations = 0
        self.binv = None
        self.refactor()

    def refactor(self) -> bool:
        p = self.p
        try:
            self.binv = np.linalg.inv(p.a[:, self.basis])
        except np.linalg.LinAlgError:
            return False
        nonbasic = np.ones(len(self.x), dtype=bool)
        nonbasic[self.basis] = False
        rhs = p.b - p.a[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs
        return bool(np.all(np.isfinite(self.binv)))

    def run(self, cost: np.ndarray) -> LPStatus:
        p = self.p
        is_basic = np.zeros(len(self.x), dtype=bool)
        is_basic[self.basis] = True
        degenerate = 0
        since_refactor = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return LPStatus.ITERATION_LIMIT
            if since_refactor >= REFACTOR_EVERY:
                if not self.refactor():
                    return LPStatus.NUMERICAL_ERROR
                since_refactor = 0
            y = cost[self.basis] @ self.binv
            d = cost - y @ p.a
            d[is_basic] = 0.0
            room = p.hi - p.lo
            movable = room > 0
            inc = (~is_basic) & movable & (d < -self.opt_tol) & (self.x < p.hi - 1e-12)
            dec = (~is_basic) & movable & (d > self.opt_tol) & (self.x > p.lo + 1e-12)
            eligible = inc | dec
            if not eligible.any():
                return LPStatus.OPTIMAL
            cand = np.flatnonzero(eligible)
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            sgn = 1.0 if inc[j] else -1.0

            alpha = self.binv @ p.a[:, j]
            delta = -sgn * alpha
            xb = self.x[self.basis]
            lob, hib = p.lo[self.basis], p.hi[self.basis]
            ratios = np.full(p.m, np.inf)
            down = delta < -PIVOT_TOL
            up = delta > PIVOT_TOL
            ratios[down] = np.maximum(xb[down] - lob[down], 0.0) / -delta[down]
            ratios[up] = np.maximum(hib[up] - xb[up], 0.0) / delta[up]
            theta_flip = room[j]
            theta_basic = ratios.min() if p.m else np.inf

            if not np.isfinite(theta_basic) and not np.isfinite(theta_flip):
                return LPStatus.UNBOUNDED
            self.iterations += 1
            since_refactor += 1

            if theta_flip <= theta_basic:
                self.x[j] = p.hi[j] if sgn > 0 else p.lo[j]
                self.x[self.basis] = xb + delta * theta_flip
                degenerate = 0
                bland = False
                continue

            theta = theta_basic
            # among ties, prefer the largest pivot magnitude (smallest index under Bland)
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(delta[ties]))])
            leaving = int(self.basis[r])

            self.x[j] += sgn * theta
            self.x[self.basis] = xb + delta * theta
            self.x[leaving] = lob[r] if delta[r] < 0 else hib[r]

            piv = alpha[r]
            row_r = self.binv[r] / piv
            self.binv -= np.outer(alpha, row_r)
            self.binv[r] = row_r
            self.basis[r] = j
            is_basic[leaving] = False
            is_basic[j] = True

            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False


def solve_simplex(lp: LinearProgram, feas_tol: float = 1e-6, opt_tol: float = 1e-6,
                  warm_start: LPSolution | None = None, max_iter: int | None = None) -> LPSolution:
    prob = _Problem(lp)
    m = prob.m
    if max_iter is None:
        max_iter = max(20000, 50 * (m + prob.n_core))

    if m == 0:
        return _solve_unconstrained(lp)

    sim = _warm(prob, warm_start, feas_tol, opt_tol, max_iter)
    phase1_iters = 0
    if sim is None:
        x = _initial_nonbasic(prob.lo, prob.hi)
        resid = prob.b - prob.a @ x
        basis = np.empty(m, dtype=np.int64)
        use_slack = (prob.slack_of_row >= 0) & (resid >= 0)
        basis[use_slack] = prob.slack_of_row[use_slack]
        art_rows = np.flatnonzero(~use_slack)
        signs = np.where(resid[art_rows] >= 0, 1.0, -1.0)
        n_art_start = prob.a.shape[1]
        prob.add_artificials(signs, art_rows)
        basis[art_rows] = n_art_start + np.arange(len(art_rows))
        x = np.concatenate([x, np.zeros(len(art_rows))])
        sim = _Simplex(prob, basis, x, feas_tol, opt_tol, max_iter)
        if len(art_rows):
            cost1 = np.zeros(prob.a.shape[1])
            cost1[n_art_start:] = 1.0
            status = sim.run(cost1)
            if status is not LPStatus.OPTIMAL:
                return LPSolution(status, None, np.nan, np.inf, sim.iterations, backend="simplex")
            sim.refactor()
            infeas = float(np.sum(sim.x[n_art_start:]))
            if infeas > feas_tol:
                return LPSolution(LPStatus.INFEASIBLE, None, np.nan, infeas, sim.iterations, backend="simplex")
            prob.hi[n_art_start:] = 0.0
            sim.x[n_art_start:] = np.clip(sim.x[n_art_start:], 0.0, 0.0)
        phase1_iters = sim.iterations

    status = sim.run(prob.c)
    if status is not LPStatus.OPTIMAL:
        return LPSolution(status, None, np.nan, np.inf, sim.iterations, backend="simplex")
    if not sim.refactor():
        return LPSolution(LPStatus.NUMERICAL_ERROR, None, np.nan, np.inf, sim.iterations, backend="simplex")

    x = sim.x[: lp.n].copy()
    # snap nonbasic structurals exactly onto their bounds
    x = np.clip(x, lp.lo, lp.hi)
    residual = lp.primal_residual(x)
    if residual > feas_tol:
        return LPSolution(LPStatus.NUMERICAL_ERROR, x, lp.objective(x), residual, sim.iterations, backend="simplex")
    basis_info = None
    if np.all(sim.basis < prob.n_core):
        at_upper = np.isclose(sim.x[: prob.n_core], prob.hi[: prob.n_core]) & np.isfinite(prob.hi[: prob.n_core])
        basis_info = {"basis": sim.basis.copy(), "at_upper": at_upper, "shape": (m, prob.n_core)}
    return LPSolution(LPStatus.OPTIMAL, x, lp.objective(x), residual, sim.iterations,
                      basis=basis_info, backend="simplex")


def _warm(prob: _Problem, warm: LPSolution | None, feas_tol, opt_tol, max_iter):
    info = getattr(warm, "basis", None) if warm is not None else None
    if not isinstance(info, dict) or info.get("shape") != (prob.m, prob.n_core):
        return None
    x = _initial_nonbasic(prob.lo, prob.hi)
    up = info["at_upper"]
    x[up] = prob.hi[up]
    sim = _Simplex(prob, info["basis"].copy(), x, feas_tol, opt_tol, max_iter)
    if sim.binv is None or not np.all(np.isfinite(sim.binv)):
        return None
    xb = sim.x[sim.basis]
    if np.any(xb < prob.lo[sim.basis] - feas_tol) or np.any(xb > prob.hi[sim.basis] + feas_tol):
        return None
    return sim


def _solve_unconstrained(lp: LinearProgram) -> LPSolution:
    x = np.where(lp.c > 0, lp.lo, np.where(lp.c < 0, lp.hi, _initial_nonbasic(lp.lo, lp.hi)))
    if not np.all(np.isfinite(x)):
        return LPSolution(LPStatus.UNBOUNDED, None, -np.inf, np.inf, backend="simplex")
    return LPSolution(LPStatus.OPTIMAL, x, lp.objective(x), lp.primal_residual(x), backend="simplex")
