"""Linear programming core: representation, solver contract, backends."""

from __future__ import annotations

from .program import LinearProgram, LPBuilder, LPSolution, LPStatus, write_lp_format
from .simplex import solve_simplex

BACKENDS = ("auto", "highs", "simplex")

__all__ = [
    "BACKENDS", "LinearProgram", "LPBuilder", "LPSolution", "LPStatus",
    "default_backend", "solve", "write_lp_format",
]


def default_backend() -> str:
    try:
        import scipy.optimize  # noqa: F401
    except ImportError:
        return "simplex"
    return "highs"


def solve(lp: LinearProgram, feas_tol: float = 1e-6, opt_tol: float = 1e-6,
          backend: str = "auto", warm_start: LPSolution | None = None) -> LPSolution:
    """Solve ``lp`` to the given primal-feasibility and optimality tolerances.

    ``backend`` is ``"simplex"`` (built in), ``"highs"`` (via scipy) or
    ``"auto"`` (HiGHS when scipy is importable).  A non-optimal outcome is
    always reported through :class:`LPStatus`; an ``OPTIMAL`` status is only
    returned after the primal residual has been re-checked against
    ``feas_tol``.
    """
    problems = lp.check()
    if problems:
        raise ValueError("malformed linear program: " + "; ".join(problems))
    if backend == "auto":
        backend = default_backend()
    if backend == "simplex":
        return solve_simplex(lp, feas_tol, opt_tol, warm_start=warm_start)
    if backend == "highs":
        from .highs import solve_highs

        return solve_highs(lp, feas_tol, opt_tol, warm_start=warm_start)
    raise ValueError(f"unknown LP backend {backend!r}; expected one of {BACKENDS}")
