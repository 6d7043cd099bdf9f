"""Linear programming core.

A two-phase bounded-variable primal simplex (nonbasic variables rest at a
finite bound or, when free, at zero). The basis is kept as a sparse LU
factorization plus a short file of eta updates, refactored periodically;
every step is deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import csc_matrix
from scipy.sparse.linalg import splu

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-9
DUALITY_TOL = 1e-7
COST_TOL = 1e-9


class Relation(str, Enum):
    GE = "GE"
    LE = "LE"
    EQ = "EQ"


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class NumericalFailure(RuntimeError):
    """Raised when the simplex cannot make reliable progress."""


class SolverTimeout(RuntimeError):
    """Raised when a solve passes its wall-clock deadline."""


@dataclass(eq=False)
class LpProblem:
    """``min objective @ x`` subject to ``A x (rel) rhs`` and box bounds.

    Entries of ``lower``/``upper`` may be infinite.
    """

    objective: np.ndarray
    A: np.ndarray
    relations: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        n = self.objective.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        if A.ndim != 2 or A.shape[1] != n:
            raise ValueError(f"constraint matrix has shape {A.shape}, expected (m, {n})")
        self.A = A
        self.relations = tuple(Relation(r) for r in self.relations)
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        if len(self.relations) != A.shape[0] or self.rhs.size != A.shape[0]:
            raise ValueError("relations/rhs length must match the number of rows")
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound vectors must have one entry per column")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def from_rows(cls, objective, rows, lower, upper) -> "LpProblem":
        """Build from a list of ``(coefficients, relation, rhs)`` triples."""
        n = len(objective)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), n)
        return cls(objective, A, [r[1] for r in rows], [r[2] for r in rows], lower, upper)

    @property
    def n_cols(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def rows(self) -> list:
        return [(self.A[i], self.relations[i], float(self.rhs[i])) for i in range(self.n_rows)]

    def with_objective(self, objective) -> "LpProblem":
        return LpProblem(objective, self.A, self.relations, self.rhs, self.lower, self.upper)

    def with_rows(self, A_extra, relations, rhs) -> "LpProblem":
        A_extra = np.asarray(A_extra, dtype=float).reshape(-1, self.n_cols)
        return LpProblem(
            self.objective,
            np.vstack([self.A, A_extra]),
            self.relations + tuple(relations),
            np.concatenate([self.rhs, np.asarray(rhs, dtype=float).ravel()]),
            self.lower,
            self.upper,
        )

    def with_bounds(self, lower, upper) -> "LpProblem":
        return LpProblem(self.objective, self.A, self.relations, self.rhs, lower, upper)


@dataclass
class LpSolution:
    status: LpStatus
    point: np.ndarray
    objective_value: float
    row_duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    column_reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def dual_objective(self, problem: LpProblem) -> float:
        """Dual objective value of the recorded multipliers."""
        d = self.column_reduced_costs
        total = float(problem.rhs @ self.row_duals)
        for j in np.flatnonzero(np.abs(d) > COST_TOL):
            bound = problem.lower[j] if d[j] > 0 else problem.upper[j]
            if not np.isfinite(bound):
                return -np.inf
            total += d[j] * bound
        return total


def row_activity(problem: LpProblem, point) -> np.ndarray:
    return problem.A @ np.asarray(point, dtype=float)


def point_satisfies(problem: LpProblem, point, tol: float = FEAS_TOL) -> bool:
    """True iff every row relation and every column bound holds within ``tol``."""
    x = np.asarray(point, dtype=float).ravel()
    if x.size != problem.n_cols:
        raise ValueError(f"point has {x.size} entries, problem has {problem.n_cols} columns")
    if np.any(x < problem.lower - tol) or np.any(x > problem.upper + tol):
        return False
    act = row_activity(problem, x)
    for i, rel in enumerate(problem.relations):
        if rel is Relation.GE and act[i] < problem.rhs[i] - tol:
            return False
        if rel is Relation.LE and act[i] > problem.rhs[i] + tol:
            return False
        if rel is Relation.EQ and abs(act[i] - problem.rhs[i]) > tol:
            return False
    return True


class BoundedSimplex:
    """Two-phase revised primal simplex with bounded columns.

    Every row owns an artificial column for the whole solve; unused ones
    are fixed at zero. Pricing is Dantzig's rule; after ``bland_after``
    consecutive degenerate pivots the solver switches to Bland's rule until
    a step makes progress. The ratio test is Harris-style and never picks a
    pivot that is tiny next to the other tied candidates.

    After :meth:`solve`, :meth:`reoptimize` swaps in a new objective and
    runs phase two from the current (still primal feasible) basis.
    """

    def __init__(
        self,
        problem: LpProblem,
        *,
        bland_after: int = 50,
        feas_tol: float = FEAS_TOL,
        pivot_tol: float = PIVOT_TOL,
        refactor_every: int = 64,
        deadline: Optional[float] = None,
    ):
        self.problem = problem
        self.bland_after = bland_after
        self.feas_tol = feas_tol
        self.pivot_tol = pivot_tol
        self.refactor_every = refactor_every
        self.deadline = deadline
        self.iterations = 0
        self._status: Optional[LpStatus] = None
        self._setup()

    # -- construction ---------------------------------------------------
    def _setup(self):
        p = self.problem
        m, n = p.n_rows, p.n_cols
        slack_rows = [i for i, r in enumerate(p.relations) if r is not Relation.EQ]
        ns = len(slack_rows)
        N = n + ns + m
        A = np.zeros((m, N))
        A[:, :n] = p.A
        lo = np.empty(N)
        up = np.empty(N)
        lo[:n], up[:n] = p.lower, p.upper
        lo[n:], up[n:] = 0.0, np.inf
        for k, i in enumerate(slack_rows):
            A[i, n + k] = -1.0 if p.relations[i] is Relation.GE else 1.0

        x = np.zeros(N)
        fin_lo, fin_up = np.isfinite(p.lower), np.isfinite(p.upper)
        x[:n] = np.where(fin_lo, p.lower, np.where(fin_up, p.upper, 0.0))
        resid = p.rhs - A[:, : n + ns] @ x[: n + ns]

        self.n, self.ns, self.m, self.N = n, ns, m, N
        self.art = np.arange(n + ns, N)
        basis = np.empty(m, dtype=int)
        art_used = np.zeros(m, dtype=bool)
        slack_of_row = {i: n + k for k, i in enumerate(slack_rows)}
        for i in range(m):
            s = slack_of_row.get(i)
            # a slack can start basic when it absorbs the residual with the right sign
            if s is not None and resid[i] / A[i, s] >= 0.0:
                basis[i] = s
                x[s] = resid[i] / A[i, s]
            else:
                sign = 1.0 if resid[i] >= 0 else -1.0
                A[i, n + ns + i] = sign
                basis[i] = n + ns + i
                x[n + ns + i] = abs(resid[i])
                art_used[i] = True
        for i in range(m):
            if not art_used[i]:
                A[i, n + ns + i] = 1.0
        lo[n + ns:] = 0.0
        up[n + ns:] = np.where(art_used, np.inf, 0.0)

        self.A_full = A
        self.A_sparse = csc_matrix(A)
        self.A_sparse_T = self.A_sparse.T.tocsr()
        self.lo, self.up = lo, up
        self.x = x
        self.basis = basis
        self.is_basic = np.zeros(N, dtype=bool)
        self.is_basic[basis] = True
        self.phase1_cost = np.zeros(N)
        self.phase1_cost[self.art[art_used]] = 1.0
        self._lu = None
        self._etas: list = []

    # -- basis factorization --------------------------------------------
    def _refactor(self):
        """Fresh sparse LU of the basis; recompute the basic values from it."""
        B = self.A_sparse[:, self.basis]
        try:
            self._lu = splu(B, permc_spec="COLAMD")
        except RuntimeError as exc:  # exactly singular
            raise NumericalFailure("basis matrix became singular") from exc
        self._etas = []
        xn = np.where(self.is_basic, 0.0, self.x)
        xb = self._lu.solve(self.problem.rhs - self.A_sparse @ xn)
        if not np.all(np.isfinite(xb)):
            raise NumericalFailure("basis matrix became singular")
        self.x[self.basis] = xb

    def _ftran(self, a) -> np.ndarray:
        """``B^-1 a`` through the LU factors and the eta file."""
        w = self._lu.solve(a)
        for r, alpha in self._etas:
            wr = w[r] / alpha[r]
            if wr != 0.0:
                w -= wr * alpha
            w[r] = wr
        return w

    def _btran(self, c) -> np.ndarray:
        """``B^-T c``: eta file in reverse, then the transposed LU solve."""
        v = np.array(c, dtype=float)
        for r, alpha in reversed(self._etas):
            v[r] = (v[r] - (alpha @ v - alpha[r] * v[r])) / alpha[r]
        return self._lu.solve(v, trans="T")

    def _reduced_costs(self, cost):
        y = self._btran(cost[self.basis])
        return cost - self.A_sparse_T @ y

    # -- core loop -------------------------------------------------------
    def _iterate(self, cost, phase: int) -> LpStatus:
        x, lo, up = self.x, self.lo, self.up
        if self._lu is None:
            self._refactor()
        d = self._reduced_costs(cost)
        movable = up > lo
        if phase == 2:
            movable[self.art] = False
        degenerate_streak = 0
        refactored_at_opt = False
        max_iter = 50 * (self.m + self.N) + 1000
        while True:
            if self.iterations > max_iter:
                raise NumericalFailure("simplex iteration limit exceeded")
            if self.deadline is not None and self.iterations % 20 == 0:
                if time.perf_counter() > self.deadline:
                    raise SolverTimeout("LP solve exceeded its deadline")
            nonbasic = movable & ~self.is_basic
            can_inc = nonbasic & (x < up) & (d < -COST_TOL)
            can_dec = nonbasic & (x > lo) & (d > COST_TOL)
            cand = can_inc | can_dec
            if not cand.any():
                if refactored_at_opt:
                    return LpStatus.OPTIMAL
                # confirm optimality on a fresh factorization
                self._refactor()
                d = self._reduced_costs(cost)
                refactored_at_opt = True
                continue
            refactored_at_opt = False
            bland = degenerate_streak >= self.bland_after
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, np.abs(d), -1.0)))
            delta = 1.0 if d[q] < 0 else -1.0
            alpha = self._ftran(self.A_full[:, q])
            da = delta * alpha
            xb = x[self.basis]
            lob, upb = lo[self.basis], up[self.basis]
            # entries this small relative to the column are treated as zero
            zero_tol = self.pivot_tol * max(1.0, float(np.abs(alpha).max(initial=0.0)))
            dec = da > zero_tol
            inc = da < -zero_tol
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.full(self.m, np.inf)
                r_dec = (xb - lob) / da
                r_inc = (upb - xb) / (-da)
                ratio = np.where(dec & np.isfinite(lob), r_dec, ratio)
                ratio = np.where(inc & np.isfinite(upb), r_inc, ratio)
            ratio = np.maximum(ratio, 0.0)
            flip = up[q] - lo[q]
            t_min = ratio.min() if self.m else np.inf
            if not np.isfinite(t_min) and not np.isfinite(flip):
                return LpStatus.UNBOUNDED
            if flip <= t_min:
                x[self.basis] = xb - da * flip
                x[q] = up[q] if delta > 0 else lo[q]
                self.iterations += 1
                degenerate_streak = 0 if flip > 1e-12 else degenerate_streak + 1
                continue
            if bland:
                ties = np.flatnonzero(ratio <= t_min + 1e-12)
                size = np.abs(alpha[ties])
                ties = ties[size >= 1e-6 * size.max()]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # Harris-style pass: among near-minimal ratios prefer the largest pivot
                with np.errstate(divide="ignore", invalid="ignore"):
                    relaxed = np.full(self.m, np.inf)
                    relaxed = np.where(dec & np.isfinite(lob), (xb - lob + self.feas_tol) / da, relaxed)
                    relaxed = np.where(inc & np.isfinite(upb), (upb - xb + self.feas_tol) / (-da), relaxed)
                # a basic value that drifted out of its bounds makes ``relaxed`` negative
                bound = max(relaxed.min(), t_min)
                ties = np.flatnonzero(ratio <= bound)
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            t = ratio[r]
            piv = alpha[r]
            if abs(piv) < self.pivot_tol:
                raise NumericalFailure("pivot magnitude below tolerance")
            leaving = self.basis[r]
            x[self.basis] = xb - da * t
            x[q] = x[q] + delta * t
            x[leaving] = lo[leaving] if da[r] > 0 else up[leaving]
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            self.basis[r] = q
            self._etas.append((r, alpha))
            self.iterations += 1
            degenerate_streak = 0 if t > 1e-12 else degenerate_streak + 1
            if len(self._etas) >= self.refactor_every:
                self._refactor()
            d = self._reduced_costs(cost)

    def _phase2_cost(self, objective):
        cost = np.zeros(self.N)
        cost[: self.n] = objective
        return cost

    def solve(self) -> LpSolution:
        if self.phase1_cost.any():
            status = self._iterate(self.phase1_cost, phase=1)
            infeas = float(self.x[self.art].sum())
            scale = max(1.0, float(np.abs(self.problem.rhs).max(initial=0.0)))
            if status is not LpStatus.OPTIMAL or infeas > self.feas_tol * scale:
                self._status = LpStatus.INFEASIBLE
                return self._infeasible()
        self.up[self.art] = 0.0
        self._status = LpStatus.OPTIMAL
        return self._phase2(self.problem.objective)

    def reoptimize(self, objective) -> LpSolution:
        """Re-solve with a new objective, warm-starting from the current basis."""
        if self._status is None:
            self.problem = self.problem.with_objective(objective)
            return self.solve()
        if self._status is LpStatus.INFEASIBLE:
            return self._infeasible()
        self.problem = self.problem.with_objective(objective)
        return self._phase2(self.problem.objective)

    def _phase2(self, objective) -> LpSolution:
        cost = self._phase2_cost(objective)
        status = self._iterate(cost, phase=2)
        n = self.n
        point = self.x[:n].copy()
        if status is LpStatus.UNBOUNDED:
            return LpSolution(LpStatus.UNBOUNDED, point, -np.inf, iterations=self.iterations)
        self._refactor()
        y = self._btran(cost[self.basis])
        if not np.all(np.isfinite(y)):
            raise NumericalFailure("singular final basis")
        reduced = self.problem.objective - self.problem.A.T @ y
        value = float(self.problem.objective @ point)
        return LpSolution(LpStatus.OPTIMAL, point, value, y, reduced, self.iterations)

    def _infeasible(self) -> LpSolution:
        return LpSolution(
            LpStatus.INFEASIBLE, self.x[: self.n].copy(), np.inf, iterations=self.iterations
        )


def solve_lp(problem: LpProblem, *, deadline: Optional[float] = None, **options) -> LpSolution:
    """Solve ``problem`` to optimality.

    Raises:
        NumericalFailure: the pivoting sequence broke down.
        SolverTimeout: ``deadline`` (a ``time.perf_counter`` value) passed.
    """
    return BoundedSimplex(problem, deadline=deadline, **options).solve()


def box_problem(objective, A_ge: Sequence, b_ge: Sequence, lower, upper) -> LpProblem:
    """Shorthand for an all-GE problem."""
    A = np.asarray(A_ge, dtype=float).reshape(-1, len(objective))
    return LpProblem(objective, A, [Relation.GE] * A.shape[0], b_ge, lower, upper)
