"""Cut-generating LP over the projection of a :class:`Polyhedron`.

For a point ``x_bar`` the CGLP picks nonnegative multipliers ``u`` of the
rows of ``P`` (equalities split into a +/- pair) with ``Wz' u = 0`` and
``sum u = 1`` that maximise ``(h - Wx x_bar)' u``. The combination
``(Wx' u) x >= h' u`` is valid for ``proj_x(P)`` and, when the optimum is
positive, cuts off ``x_bar``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_point, check_points
from .approx import Polyhedron, build_approximation
from .bnb import BnbTree
from .lp import BoundedSimplex, LpProblem, LpStatus, NumericalFailure, Relation
from .model import MbpInstance

CUT_TOL = 1e-6
_SCALE_FLOOR = 1e-9
# the CGLP is highly degenerate; Bland's rule only pays off after long stalls
CGLP_BLAND_AFTER = 1000


@dataclass
class Cut:
    """The inequality ``pi x >= pi0``.

    ``violation`` is ``pi0 - pi x_bar`` at the point it was generated for;
    ``multipliers`` (CGLP cuts only) holds one multiplier per row of the
    source polyhedron, free for equality rows, so that ``pi = Wx' y`` and
    ``pi0 = h' y``.
    """

    pi: np.ndarray
    pi0: float
    source: str
    violation: float = 0.0
    generation_index: int = 0
    multipliers: Optional[np.ndarray] = field(default=None, repr=False)

    def slack(self, x) -> float:
        return float(self.pi @ np.asarray(x, dtype=float) - self.pi0)

    def violation_at(self, x) -> float:
        return -self.slack(x)

    def rescaled(self) -> "Cut":
        """Copy scaled so that ``max(|pi|_inf, |pi0|) = 1``."""
        s = max(float(np.abs(self.pi).max(initial=0.0)), abs(self.pi0))
        if s < _SCALE_FLOOR:
            return self
        mult = None if self.multipliers is None else self.multipliers / s
        return Cut(self.pi / s, self.pi0 / s, self.source, self.violation / s, self.generation_index, mult)

    def same_as(self, other: "Cut", tol: float = 1e-9) -> bool:
        return bool(np.abs(self.pi - other.pi).max(initial=0.0) <= tol and abs(self.pi0 - other.pi0) <= tol)

    def to_dict(self) -> dict:
        return {"pi": [float(v) for v in self.pi], "pi0": float(self.pi0), "source": self.source,
                "violation": float(self.violation)}


class Cglp:
    """A CGLP built once for ``P`` and re-solved for each new point.

    Columns are the multipliers of the GE-split rows of ``P``; rows are
    ``Gz' u = 0`` (one per auxiliary column) and the normalization
    ``sum u = 1``. Only the objective depends on ``x_bar``, so successive
    points warm-start from the previous optimal basis.
    """

    def __init__(self, P: Polyhedron, *, source: str = "CGLP", deadline: Optional[float] = None):
        self.P = P
        self.source = source
        self.Gx, self.Gz, self.g, self.origin, self.sign = P.split_rows()
        n_u = self.g.size
        A = np.vstack([self.Gz.T, np.ones((1, n_u))])
        rhs = np.concatenate([np.zeros(P.n_z), [1.0]])
        self.problem = LpProblem(
            np.zeros(n_u), A, [Relation.EQ] * (P.n_z + 1), rhs, np.zeros(n_u), np.full(n_u, np.inf)
        )
        self._solver = BoundedSimplex(self.problem, deadline=deadline, bland_after=CGLP_BLAND_AFTER)
        self._solved = False

    @property
    def n_variables(self) -> int:
        return self.problem.n_cols

    @property
    def n_constraints(self) -> int:
        return self.problem.n_rows

    def objective_for(self, x_bar) -> np.ndarray:
        return -(self.g - self.Gx @ np.asarray(x_bar, dtype=float))

    def set_deadline(self, deadline: Optional[float]) -> None:
        self._solver.deadline = deadline

    def solve(self, x_bar):
        """Optimal multipliers ``u`` and the (unnormalised) violation."""
        obj = self.objective_for(x_bar)
        if self._solved:
            sol = self._solver.reoptimize(obj)
        else:
            self._solver.problem = self.problem.with_objective(obj)
            sol = self._solver.solve()
            self._solved = True
        if sol.status is not LpStatus.OPTIMAL:
            raise NumericalFailure(f"CGLP over {self.P.name} returned {sol.status.value}")
        return np.maximum(sol.point, 0.0), -sol.objective_value

    def cut_from(self, u) -> Cut:
        y = np.zeros(self.P.n_rows)
        np.add.at(y, self.origin, self.sign * u)
        return Cut(self.Gx.T @ u, float(self.g @ u), self.source, multipliers=y)

    def separate(self, x_bar, tol: float = CUT_TOL) -> Optional[Cut]:
        u, _ = self.solve(x_bar)
        cut = self.cut_from(u)
        cut.violation = cut.violation_at(x_bar)
        cut = cut.rescaled()
        if max(float(np.abs(cut.pi).max(initial=0.0)), abs(cut.pi0)) < _SCALE_FLOOR:
            return None
        return cut if cut.violation > tol else None


def build_cglp(P: Polyhedron, x_bar=None) -> LpProblem:
    """The CGLP of ``P`` as a plain LP (objective set when ``x_bar`` is given)."""
    cg = Cglp(P)
    return cg.problem if x_bar is None else cg.problem.with_objective(cg.objective_for(x_bar))


def separate_cglp(P: Polyhedron, x_bar, tol: float = CUT_TOL, *, source: str = "CGLP") -> Optional[Cut]:
    """Most violated cut for ``proj_x(P)`` at ``x_bar``, or ``None``.

    Raises:
        NumericalFailure: the CGLP solve broke down.
    """
    return Cglp(P, source=source).separate(x_bar, tol)


class CglpSeparator(BaseEstimator):
    """Separator over one of the tree approximations ``O1``, ``O2`` or ``O3``.

    :meth:`fit` builds the polyhedron and its CGLP; :meth:`separate`
    returns the most violated cut at a point or ``None``.
    """

    def __init__(self, approximation: str = "O2", tol: float = CUT_TOL):
        self.approximation = approximation
        self.tol = tol

    def fit(self, tree: BnbTree, instance: MbpInstance):
        self.polyhedron_ = build_approximation(self.approximation, tree, instance)
        self.cglp_ = Cglp(self.polyhedron_, source=f"CGLP-{self.approximation}")
        self.n_variables_ = self.cglp_.n_variables
        self.n_constraints_ = self.cglp_.n_constraints
        return self

    def set_deadline(self, deadline: Optional[float]) -> None:
        check_is_fitted(self, "cglp_")
        self.cglp_.set_deadline(deadline)

    def separate(self, x_bar) -> Optional[Cut]:
        check_is_fitted(self, "cglp_")
        return self.cglp_.separate(self._check_point(x_bar), self.tol)

    def decision_function(self, X) -> np.ndarray:
        """Largest normalised violation at each row of ``X`` (<= 0 inside)."""
        check_is_fitted(self, "cglp_")
        X = check_points(X, self.polyhedron_.n_x)
        out = np.empty(X.shape[0])
        for i, x in enumerate(X):
            cut = self.cglp_.cut_from(self.cglp_.solve(x)[0])
            cut.violation = cut.violation_at(x)
            out[i] = cut.rescaled().violation
        return out

    def predict(self, X) -> np.ndarray:
        """1 where a cut with violation above ``tol`` exists, else 0."""
        return (self.decision_function(X) > self.tol).astype(int)

    def _check_point(self, x_bar) -> np.ndarray:
        return check_point(x_bar, self.polyhedron_.n_x)
