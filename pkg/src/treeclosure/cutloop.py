"""Pure cutting-plane loop on an objective-perturbed instance.

The outer LP is the relaxation of the perturbed instance plus the cuts
found so far. Separators are built from a tree of the unperturbed
instance and always use its objective: the dual bounds in the tree only
certify that objective, while the feasible region is shared.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_point, check_points
from .bnb import BnbTree, solve_bnb
from .cglp import CUT_TOL, Cut, CglpSeparator
from .lp import NumericalFailure, SolverTimeout, solve_lp
from .model import MbpInstance
from .sti import StarTreeSeparator
from .tree import summarize

logger = logging.getLogger(__name__)

DEFAULT_TIME_LIMIT = 600.0
DEFAULT_MAX_ITERS = 10_000
ZERO_OPT_TOL = 1e-12


class SeparatorKind(str, Enum):
    OBJ = "Obj"
    STI = "Sti"
    CGLP_O1 = "CglpO1"
    CGLP_O2 = "CglpO2"
    CGLP_O3 = "CglpO3"


class ZeroOptimum(ArithmeticError):
    """The reference optimum is zero, so a relative gap is undefined."""


@dataclass
class CutLoopResult:
    """Outcome of one cutting-plane run; bounds are in the original sense."""

    kind: SeparatorKind
    l_dual: float
    l_opt: float
    gap: float
    cuts_added: int
    iterations: int
    wall_time_seconds: float
    timed_out: bool
    converged: bool
    zero_optimum: bool = False
    cuts: List[Cut] = field(default_factory=list, repr=False)
    lp_values: List[float] = field(default_factory=list, repr=False)


def objective_cut(tree: BnbTree, instance: Optional[MbpInstance] = None) -> Cut:
    """``c x >= mu`` with ``mu`` the smallest leaf bound of the completed tree."""
    inst = instance if instance is not None else tree.instance
    mu = summarize(tree).mu
    return Cut(inst.c.copy(), float(mu), "Obj")


def compute_gap(l_dual: float, l_opt: float, sense=None) -> float:
    """``|l_opt - l_dual| / |l_opt|``; the sense does not change the formula.

    Raises:
        ZeroOptimum: ``|l_opt| < 1e-12``.
    """
    if not np.isfinite(l_opt):
        raise ValueError("reference optimum must be finite")
    if abs(l_opt) < ZERO_OPT_TOL:
        raise ZeroOptimum(f"optimum {l_opt!r} is numerically zero")
    return abs(l_opt - l_dual) / abs(l_opt)


class ObjectiveCutSeparator(BaseEstimator):
    """Baseline separator holding the single objective cut."""

    def __init__(self, tol: float = CUT_TOL):
        self.tol = tol

    def fit(self, tree: BnbTree, instance: Optional[MbpInstance] = None):
        self.cut_ = objective_cut(tree, instance).rescaled()
        return self

    def separate(self, x_bar) -> Optional[Cut]:
        check_is_fitted(self, "cut_")
        x = check_point(x_bar, self.cut_.pi.size)
        cut = Cut(self.cut_.pi, self.cut_.pi0, "Obj", self.cut_.violation_at(x))
        return cut if cut.violation > self.tol else None

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "cut_")
        return self.cut_.pi0 - check_points(X, self.cut_.pi.size) @ self.cut_.pi

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > self.tol).astype(int)


def make_separator(kind, tol: float = CUT_TOL) -> BaseEstimator:
    kind = SeparatorKind(kind)
    if kind is SeparatorKind.OBJ:
        return ObjectiveCutSeparator(tol=tol)
    if kind is SeparatorKind.STI:
        return StarTreeSeparator(tol=tol)
    return CglpSeparator(approximation=kind.value[-2:], tol=tol)


def reference_optimum(perturbed: MbpInstance) -> float:
    """Optimal value of ``perturbed`` in its original sense, by branch-and-bound."""
    tree = solve_bnb(perturbed)
    if tree.incumbent_value is None:
        raise ValueError(f"{perturbed.name} has no feasible point")
    return perturbed.to_original(tree.incumbent_value)


def run_cutting_plane(
    perturbed: MbpInstance,
    tree: BnbTree,
    kind,
    *,
    time_limit: float = DEFAULT_TIME_LIMIT,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = CUT_TOL,
    l_opt: Optional[float] = None,
    original: Optional[MbpInstance] = None,
) -> CutLoopResult:
    """Cut the relaxation of ``perturbed`` with cuts from ``tree``.

    Each iteration solves the current LP, asks the separator for a cut at
    its optimum and adds it; the loop stops when no cut is violated by more
    than ``tol``, after ``max_iters`` LP solves, or when ``time_limit``
    seconds have passed. The limit covers building the separator, every
    separation and every LP solve. ``l_opt`` (original sense) is computed
    by branch-and-bound when not given, outside the time budget.

    Raises:
        NumericalFailure: an LP or CGLP solve broke down.
    """
    kind = SeparatorKind(kind)
    original = original if original is not None else tree.instance
    if original is None:
        raise ValueError("the unperturbed instance is required")
    if original.n != perturbed.n:
        raise ValueError("perturbed and original instances differ in size")
    if l_opt is None:
        l_opt = reference_optimum(perturbed)

    start = time.perf_counter()
    deadline = start + time_limit
    base = perturbed.relaxation()
    cuts: List[Cut] = []
    values: List[float] = []
    timed_out = converged = False
    iterations = 0
    try:
        sep = make_separator(kind, tol).fit(tree, original)
        if hasattr(sep, "set_deadline"):
            sep.set_deadline(deadline)
        while iterations < max_iters:
            if time.perf_counter() > deadline:
                timed_out = True
                break
            problem = base
            if cuts:
                problem = base.with_rows(np.array([c.pi for c in cuts]), ["GE"] * len(cuts),
                                         [c.pi0 for c in cuts])
            sol = solve_lp(problem, deadline=deadline)
            if not sol.optimal:
                raise NumericalFailure(f"outer LP became {sol.status.value} after {len(cuts)} cuts")
            values.append(sol.objective_value)
            iterations += 1
            cut = sep.separate(sol.point)
            if cut is None:
                converged = True
                break
            if any(cut.same_as(old) for old in cuts):
                logger.warning("%s returned a duplicate cut; stopping", kind.value)
                break
            cut.generation_index = len(cuts)
            cuts.append(cut)
    except SolverTimeout:
        timed_out = True
    wall = time.perf_counter() - start

    if values:
        lp_value = values[-1]
    else:
        lp_value = solve_lp(base).objective_value
    l_dual = perturbed.to_original(lp_value)
    zero = False
    try:
        gap = compute_gap(l_dual, l_opt)
    except ZeroOptimum:
        gap, zero = abs(l_opt - l_dual), True
    return CutLoopResult(kind, l_dual, l_opt, gap, len(cuts), iterations, wall, timed_out,
                         converged, zero, cuts, values)
