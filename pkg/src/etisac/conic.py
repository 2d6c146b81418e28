"""Backend-neutral conic problem container and the solver entry point.

Problems are modelled with cvxpy and solved with Clarabel (a primal-dual
interior-point method with native PSD cones). Constraints are kept in labelled
groups so callers can inspect, count, or dump each family separately.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
import scipy.sparse as sps

from .errors import Infeasible, SolverFailure

__all__ = ["ConicProblem", "ConicSolution", "solve_conic", "DEFAULT_TOL"]

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200
ACCEPT_RESIDUAL = 1e-6


@dataclass
class ConicProblem:
    """Maximize ``objective`` subject to labelled constraint groups."""

    objective: cp.Expression
    variables: dict
    groups: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    _problem: cp.Problem = field(default=None, init=False, repr=False)

    def add(self, label: str, constraints) -> None:
        if isinstance(constraints, cp.constraints.constraint.Constraint):
            constraints = [constraints]
        self.groups.setdefault(label, []).extend(constraints)
        self._problem = None

    @property
    def problem(self) -> cp.Problem:
        if self._problem is None:
            cons = [c for group in self.groups.values() for c in group]
            self._problem = cp.Problem(cp.Maximize(self.objective), cons)
        return self._problem

    def n_rows(self, label: str) -> int:
        """Scalar rows in a constraint group (a PSD block counts its side length squared)."""
        return int(sum(c.size for c in self.groups.get(label, [])))

    @property
    def n_real_dof(self) -> int:
        """Real degrees of freedom: a Hermitian n x n variable contributes n^2."""
        total = 0
        for v in self.variables.values():
            for var in v if isinstance(v, (list, tuple)) else [v]:
                if var.attributes.get("hermitian"):
                    total += var.shape[0] ** 2
                elif var.attributes.get("symmetric") or var.attributes.get("PSD"):
                    n = var.shape[0]
                    total += n * (n + 1) // 2
                elif var.is_complex():
                    total += 2 * var.size
                else:
                    total += var.size
        return total

    def dump_text(self) -> str:
        """Canonical conic data ``min c'x s.t. A x + s = b, s in K`` as sparse triplets."""
        data, _, _ = self.problem.get_problem_data(cp.CLARABEL)
        A = sps.coo_matrix(data["A"])
        out = io.StringIO()
        out.write(f"# conic problem: {A.shape[0]} rows, {A.shape[1]} columns, {A.nnz} nonzeros\n")
        dims = data["dims"]
        out.write(f"cones zero={dims.zero} nonneg={dims.nonneg} soc={list(dims.soc)} psd={list(dims.psd)}\n")
        c = np.asarray(data["c"]).ravel()
        out.write("objective\n")
        for j in np.flatnonzero(c):
            out.write(f"{j} {float(c[j])!r}\n")
        out.write("A\n")
        order = np.lexsort((A.col, A.row))
        for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
            out.write(f"{i} {j} {float(v)!r}\n")
        b = np.asarray(data["b"]).ravel()
        out.write("b\n")
        for i in np.flatnonzero(b):
            out.write(f"{i} {float(b[i])!r}\n")
        return out.getvalue()


@dataclass
class ConicSolution:
    status: str
    objective: float
    residual: float
    gap: float
    iterations: int
    solve_time: float


def solve_conic(p: ConicProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> ConicSolution:
    """Solve and report residuals; raises :class:`Infeasible` or :class:`SolverFailure`."""
    prob = p.problem
    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prob.solve(
                solver=cp.CLARABEL,
                tol_gap_abs=tol,
                tol_gap_rel=tol,
                tol_feas=tol,
                max_iter=max_iter,
            )
    except cp.error.SolverError as exc:
        if _certify_infeasible(prob):
            raise Infeasible("conic problem is infeasible (certified by the fallback solver)") from exc
        raise SolverFailure(f"conic backend failed: {exc}", status="error") from exc

    status = prob.status
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise Infeasible("conic problem is infeasible")
    if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        raise SolverFailure("conic problem is unbounded", status=status)

    residual = max((float(np.max(c.violation())) for c in prob.constraints), default=0.0)
    # "almost solved" is accepted when the primal point is usable; callers re-verify
    # every physical constraint on the extracted beamformers anyway
    if status == cp.OPTIMAL_INACCURATE and residual <= ACCEPT_RESIDUAL:
        pass
    elif status != cp.OPTIMAL:
        raise SolverFailure(f"solver stopped with status {status!r}", status=status, residual=residual)

    stats = prob.solver_stats
    gap = float("nan")
    extra = getattr(stats, "extra_stats", None)
    if extra is not None and hasattr(extra, "obj_val") and hasattr(extra, "obj_val_dual"):
        gap = abs(extra.obj_val - extra.obj_val_dual)
    return ConicSolution(
        status=status,
        objective=float(prob.value),
        residual=residual,
        gap=gap,
        iterations=int(stats.num_iters or 0),
        solve_time=float(stats.solve_time or 0.0),
    )


def _certify_infeasible(prob: cp.Problem) -> bool:
    """Second opinion from SCS, used only to recognise infeasible problems.

    Clarabel sometimes stalls on infeasible instances without producing a
    certificate. An SCS "optimal" answer is never used as a solution here.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prob.solve(solver=cp.SCS, eps=1e-6, max_iters=20000)
    except cp.error.SolverError:
        return False
    return prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)
