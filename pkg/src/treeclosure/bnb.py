"""Recording branch-and-bound.

Best-first node selection, most-fractional branching and LP relaxation
bounds, with every explored node kept in the returned tree.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .lp import solve_lp
from .model import MbpInstance

logger = logging.getLogger(__name__)

PRUNE_TOL = 1e-9
INT_TOL = 1e-6


class NodeStatus(str, Enum):
    BRANCHED = "Branched"
    INTEGER_FEASIBLE = "IntegerFeasible"
    INFEASIBLE = "Infeasible"
    PRUNED_BY_BOUND = "PrunedByBound"
    COMPLETED_SIBLING = "CompletedSibling"
    OPEN = "Open"  # left unexplored when a limit fired


class LimitReached(UserWarning):
    """The search stopped on a node or time limit; the tree is incomplete."""


@dataclass
class BnbNode:
    id: int
    parent: Optional[int]
    branch_var: Optional[int]
    branch_value: Optional[int]
    depth: int
    status: NodeStatus
    dual_bound: float  # canonical (min) sense; +inf for infeasible nodes
    lp_point: Optional[np.ndarray] = None
    children: List[int] = field(default_factory=list)
    surrogate: bool = False  # bound replaced by the infeasible-leaf surrogate

    @property
    def is_root(self) -> bool:
        return self.parent is None


@dataclass
class BnbTree:
    nodes: Dict[int, BnbNode]
    root_id: int
    n_vars: int
    n_binary: int
    incumbent_value: Optional[float] = None
    incumbent_point: Optional[np.ndarray] = None
    instance_name: str = ""
    complete: bool = True
    instance: Optional[MbpInstance] = None

    @property
    def root(self) -> BnbNode:
        return self.nodes[self.root_id]

    @property
    def leaf_ids(self) -> List[int]:
        return sorted(i for i, v in self.nodes.items() if not v.children)

    @property
    def d_max(self) -> int:
        return max(v.depth for v in self.nodes.values())

    def __len__(self) -> int:
        return len(self.nodes)

    def bound(self, v: int) -> float:
        return self.nodes[v].dual_bound

    def path(self, v: int) -> List[int]:
        """Node ids from the root down to ``v``, inclusive."""
        out = []
        while v is not None:
            out.append(v)
            v = self.nodes[v].parent
        return out[::-1]

    def fixings(self, v: int) -> Tuple[List[int], List[int]]:
        """Indices fixed to zero and to one on the path to ``v``."""
        zeros, ones = [], []
        for u in self.path(v)[1:]:
            node = self.nodes[u]
            (ones if node.branch_value == 1 else zeros).append(node.branch_var)
        return zeros, ones

    def copy(self) -> "BnbTree":
        nodes = {
            i: BnbNode(v.id, v.parent, v.branch_var, v.branch_value, v.depth, v.status,
                       v.dual_bound, v.lp_point, list(v.children), v.surrogate)
            for i, v in self.nodes.items()
        }
        return BnbTree(nodes, self.root_id, self.n_vars, self.n_binary, self.incumbent_value,
                       self.incumbent_point, self.instance_name, self.complete, self.instance)


def _most_fractional(point: np.ndarray, candidates: np.ndarray) -> Optional[int]:
    if candidates.size == 0:
        return None
    frac = np.minimum(point[candidates], 1.0 - point[candidates])
    k = int(np.argmax(frac))  # first maximum, i.e. lowest index on ties
    if frac[k] <= INT_TOL:
        return None
    return int(candidates[k])


def solve_bnb(
    instance: MbpInstance,
    *,
    node_limit: Optional[int] = None,
    time_limit: Optional[float] = None,
    prune_tol: float = PRUNE_TOL,
) -> BnbTree:
    """Solve ``instance`` and return the full search tree.

    Nodes are popped in order of their LP bound (insertion order breaks
    ties) and split on the binary variable whose LP value is closest to
    one half. Children are solved on creation, so infeasible ones appear
    in the tree with status ``Infeasible``; an integral LP solution updates
    the incumbent immediately.

    When a limit fires, the unexplored nodes keep status ``Open``, the tree
    is flagged incomplete and a :class:`LimitReached` warning is issued.
    """
    start = time.perf_counter()
    counter = itertools.count()
    nodes: Dict[int, BnbNode] = {}
    heap: list = []
    incumbent = np.inf
    incumbent_point = None
    binary = instance.binary

    def create(parent: Optional[BnbNode], var: Optional[int], value: Optional[int]) -> BnbNode:
        nonlocal incumbent, incumbent_point
        lower, upper = instance.lb.copy(), instance.ub.copy()
        if parent is not None:
            for u in _path(parent.id):
                if nodes[u].branch_var is not None:
                    lower[nodes[u].branch_var] = upper[nodes[u].branch_var] = nodes[u].branch_value
            lower[var] = upper[var] = value
        sol = solve_lp(instance.relaxation(lower, upper))
        node_id = len(nodes)
        depth = 0 if parent is None else parent.depth + 1
        if not sol.optimal:
            status, bound, point = NodeStatus.INFEASIBLE, np.inf, None
        else:
            bound, point = sol.objective_value, sol.point
            if _most_fractional(point, binary) is None:
                status = NodeStatus.INTEGER_FEASIBLE
                if bound < incumbent:
                    incumbent, incumbent_point = bound, point.copy()
                    incumbent_point[binary] = np.round(incumbent_point[binary])
            else:
                status = NodeStatus.OPEN
        node = BnbNode(node_id, None if parent is None else parent.id, var, value, depth, status, bound, point)
        nodes[node_id] = node
        if parent is not None:
            parent.children.append(node_id)
        if status is NodeStatus.OPEN:
            heapq.heappush(heap, (bound, next(counter), node_id))
        return node

    def _path(v: int) -> List[int]:
        out = []
        while v is not None:
            out.append(v)
            v = nodes[v].parent
        return out

    create(None, None, None)
    complete = True
    while heap:
        bound, _, vid = heapq.heappop(heap)
        node = nodes[vid]
        if bound >= incumbent - prune_tol:
            node.status = NodeStatus.PRUNED_BY_BOUND
            continue
        if (node_limit is not None and len(nodes) + 2 > node_limit + 1) or (
            time_limit is not None and time.perf_counter() - start > time_limit
        ):
            complete = False
            break
        on_path = {nodes[u].branch_var for u in _path(vid)}
        candidates = np.array([i for i in binary if i not in on_path], dtype=int)
        var = _most_fractional(node.lp_point, candidates)
        node.status = NodeStatus.BRANCHED
        create(node, var, 0)
        create(node, var, 1)

    if not complete:
        warnings.warn(
            f"branch-and-bound stopped early on {instance.name} with {len(heap) + 1} open nodes",
            LimitReached,
            stacklevel=2,
        )
    tree = BnbTree(
        nodes,
        0,
        instance.n,
        instance.n_binary,
        None if not np.isfinite(incumbent) else float(incumbent),
        incumbent_point,
        instance.name,
        complete,
        instance,
    )
    logger.debug("bnb %s: %d nodes, incumbent %s", instance.name, len(nodes), tree.incumbent_value)
    return tree


class BranchAndBound(BaseEstimator):
    """Estimator wrapper around :func:`solve_bnb`.

    After :meth:`fit`, ``tree_`` holds the recorded search tree and
    ``incumbent_value_`` the best objective found in the instance's
    original sense (``None`` if no integer point was found).
    """

    def __init__(self, node_limit=None, time_limit=None, prune_tol=PRUNE_TOL):
        self.node_limit = node_limit
        self.time_limit = time_limit
        self.prune_tol = prune_tol

    def fit(self, instance: MbpInstance, y=None):
        self.tree_ = solve_bnb(
            instance, node_limit=self.node_limit, time_limit=self.time_limit, prune_tol=self.prune_tol
        )
        value = self.tree_.incumbent_value
        self.incumbent_value_ = None if value is None else instance.to_original(value)
        self.incumbent_point_ = self.tree_.incumbent_point
        self.n_nodes_ = len(self.tree_)
        return self

    def predict(self, instance: Optional[MbpInstance] = None):
        """Best integer point found during :meth:`fit`."""
        from sklearn.utils.validation import check_is_fitted

        check_is_fitted(self, "tree_")
        return self.incumbent_point_
