"""HiGHS backend through :func:`scipy.optimize.linprog`."""

from __future__ import annotations

import numpy as np

from .program import LinearProgram, LPSolution, LPStatus

_STATUS = {
    0: LPStatus.OPTIMAL,
    1: LPStatus.ITERATION_LIMIT,
    2: LPStatus.INFEASIBLE,
    3: LPStatus.UNBOUNDED,
    4: LPStatus.NUMERICAL_ERROR,
}


def solve_highs(lp: LinearProgram, feas_tol: float = 1e-6, opt_tol: float = 1e-6,
                warm_start: LPSolution | None = None) -> LPSolution:
    # scipy's wrapper exposes no basis restart, so ``warm_start`` is accepted and ignored.
    from scipy.optimize import linprog

    a = lp.sparse_matrix()
    eq = lp.is_eq
    kwargs = {}
    if (~eq).any():
        kwargs.update(A_ub=a[~eq], b_ub=lp.rhs[~eq])
    if eq.any():
        kwargs.update(A_eq=a[eq], b_eq=lp.rhs[eq])
    res = linprog(
        lp.c, bounds=np.column_stack([lp.lo, lp.hi]), method="highs-ds",
        options={
            "primal_feasibility_tolerance": min(1e-7, feas_tol * 0.1),
            "dual_feasibility_tolerance": min(1e-7, opt_tol * 0.1),
        },
        **kwargs,
    )
    status = _STATUS.get(res.status, LPStatus.NUMERICAL_ERROR)
    iters = int(getattr(res, "nit", 0) or 0)
    if status is not LPStatus.OPTIMAL or res.x is None:
        return LPSolution(status, None, np.nan, np.inf, iters, backend="highs")
    x = np.clip(res.x, lp.lo, lp.hi)
    residual = lp.primal_residual(x)
    if residual > feas_tol:
        return LPSolution(LPStatus.NUMERICAL_ERROR, x, lp.objective(x), residual, iters, backend="highs")
    return LPSolution(LPStatus.OPTIMAL, x, lp.objective(x), residual, iters, backend="highs")
