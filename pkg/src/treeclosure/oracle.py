"""Brute-force reference computations for tests.

Everything here is exhaustive and guarded by hard size limits; nothing is
ever truncated or approximated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .approx import Polyhedron, _stack, bound_rows
from .bnb import BnbNode, BnbTree, NodeStatus
from .cglp import Cut
from .lp import LpStatus, Relation, solve_lp
from .model import MbpInstance
from .sti import MAX_ENUM_NODES, SizeGuard, _chain_value, compute_deltas, enumerate_chains

MAX_ENUM_BINARY = 20
_CHUNK = 1 << 16
ROW_TOL = 1e-9


@dataclass
class EnumerationResult:
    """Feasible points of an instance; values are canonical (min sense).

    For mixed instances each row of ``feasible_points`` holds a binary
    assignment completed by an optimal continuous part.
    """

    feasible_points: np.ndarray
    values: np.ndarray
    optimal_value: Optional[float]
    optimal_point: Optional[np.ndarray]

    def __len__(self) -> int:
        return self.feasible_points.shape[0]

    def original_value(self, instance: MbpInstance) -> Optional[float]:
        return None if self.optimal_value is None else instance.to_original(self.optimal_value)


def _guard(n_binary: int) -> None:
    if n_binary > MAX_ENUM_BINARY:
        raise SizeGuard(f"enumeration limited to {MAX_ENUM_BINARY} binaries, got {n_binary}")


def binary_points(n: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
    """Rows ``start .. stop-1`` of the 0/1 table in counting order (bit i is x_i)."""
    stop = (1 << n) if stop is None else stop
    codes = np.arange(start, stop, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(float)


def _slice_lp(instance: MbpInstance, assignment: np.ndarray, objective):
    lower = instance.lb.copy()
    upper = instance.ub.copy()
    lower[instance.binary] = upper[instance.binary] = assignment
    return solve_lp(instance.relaxation(lower, upper, objective))


def enumerate_feasible(instance: MbpInstance) -> EnumerationResult:
    """Every feasible binary assignment of ``instance``.

    Raises:
        SizeGuard: more than 20 binary variables.
    """
    nb = instance.n_binary
    _guard(nb)
    n = instance.n
    pts, vals = [], []
    if nb == n:
        for start in range(0, 1 << nb, _CHUNK):
            X = np.zeros((min(_CHUNK, (1 << nb) - start), n))
            X[:, instance.binary] = binary_points(nb, start, start + X.shape[0])
            ok = np.all(X @ instance.A.T >= instance.b - ROW_TOL, axis=1)
            pts.append(X[ok])
            vals.append(X[ok] @ instance.c)
    else:
        for assignment in binary_points(nb):
            sol = _slice_lp(instance, assignment, instance.c)
            if sol.status is LpStatus.OPTIMAL:
                pts.append(sol.point[None, :])
                vals.append(np.array([sol.objective_value]))
    X = np.vstack(pts) if pts else np.zeros((0, n))
    v = np.concatenate(vals) if vals else np.zeros(0)
    if v.size == 0:
        return EnumerationResult(X, v, None, None)
    best = int(np.argmin(v))
    return EnumerationResult(X, v, float(v[best]), X[best].copy())


def audit_cut(cut: Cut, instance: MbpInstance, enumeration: Optional[EnumerationResult] = None) -> float:
    """Smallest slack ``pi x - pi0`` of ``cut`` over the feasible set.

    The cut is valid when the result is at least ``-1e-6``; an empty
    feasible set gives ``+inf``. Pass ``enumeration`` to reuse a previous
    enumeration of the same instance.
    """
    if enumeration is None:
        enumeration = enumerate_feasible(instance)
    if len(enumeration) == 0:
        return np.inf
    if instance.n_binary == instance.n:
        return float((enumeration.feasible_points @ cut.pi).min() - cut.pi0)
    worst = np.inf
    for x in enumeration.feasible_points:
        sol = _slice_lp(instance, x[instance.binary], cut.pi)
        worst = min(worst, sol.objective_value - cut.pi0)
    return float(worst)


def product_form_z(tree: BnbTree, x) -> np.ndarray:
    """Leaf indicators ``prod (1 - x_i) * prod x_j`` in ``tree.leaf_ids`` order."""
    x = np.asarray(x, dtype=float)
    z = np.ones(len(tree.leaf_ids))
    for j, v in enumerate(tree.leaf_ids):
        zeros, ones = tree.fixings(v)
        z[j] = np.prod(1.0 - x[zeros]) * np.prod(x[ones])
    return z


def node_indicators(tree: BnbTree, x) -> np.ndarray:
    """Product-form indicator of every node, in sorted id order."""
    x = np.asarray(x, dtype=float)
    out = []
    for v in sorted(tree.nodes):
        zeros, ones = tree.fixings(v)
        out.append(np.prod(1.0 - x[zeros]) * np.prod(x[ones]))
    return np.array(out)


def build_B_lin(tree: BnbTree, instance: MbpInstance) -> Polyhedron:
    """Untightened linearization with one indicator per node (sorted ids).

    ``z_root = 1``; ``z_v <= z_parent``; ``z_v <= 1 - x_i`` or ``z_v <=
    x_i`` by branch direction, with the matching lower rows ``z_v >=
    z_parent - x_i`` or ``z_v >= z_parent + x_i - 1``; ``0 <= z <= 1`` and
    the box of ``x``.
    """
    n = instance.n
    ids = sorted(tree.nodes)
    col = {v: j for j, v in enumerate(ids)}
    m = len(ids)

    def e(v, s=1.0):
        w = np.zeros(m)
        w[col[v]] = s
        return w

    blocks = [(np.zeros(n), e(tree.root_id), Relation.EQ, 1.0, "root")]
    for v in ids:
        node = tree.nodes[v]
        blocks.append((np.zeros(n), e(v), Relation.GE, 0.0, "z_nonneg"))
        blocks.append((np.zeros(n), e(v, -1.0), Relation.GE, -1.0, "z_le_one"))
        if node.parent is None:
            continue
        p, i = node.parent, node.branch_var
        blocks.append((np.zeros(n), e(p) - e(v), Relation.GE, 0.0, "parent"))
        xi = np.zeros(n)
        xi[i] = 1.0
        if node.branch_value == 0:
            blocks.append((-xi, -e(v), Relation.GE, -1.0, "upper0"))
            blocks.append((xi, e(v) - e(p), Relation.GE, 0.0, "lower0"))
        else:
            blocks.append((xi, -e(v), Relation.GE, 0.0, "upper1"))
            blocks.append((-xi, e(v) - e(p), Relation.GE, -1.0, "lower1"))
    D, f = bound_rows(instance)
    for r in range(D.shape[0]):
        blocks.append((D[r], np.zeros(m), Relation.GE, f[r], "bound"))
    return _stack("B_lin", n, m, blocks, ids)


def enumerate_sti(tree: BnbTree, x_bar, *, c=None, lift: bool = True) -> float:
    """Largest violation over every chain, by exhaustive enumeration.

    Raises:
        SizeGuard: the tree has more than 13 nodes.
    """
    if len(tree.nodes) > MAX_ENUM_NODES:
        raise SizeGuard(f"chain enumeration limited to {MAX_ENUM_NODES} nodes, tree has {len(tree.nodes)}")
    ctx = compute_deltas(tree, x_bar, c, lift=lift)
    lhs = float(ctx.c @ ctx.x_bar)
    return max(_chain_value(ctx, chain) for chain in enumerate_chains(ctx)) - lhs


def random_tree(rng: np.random.Generator, n_binary: int, max_nodes: int, *,
                stop_prob: float = 0.2, flat_prob: float = 0.3) -> BnbTree:
    """A random full binary tree with monotone bounds and no instance.

    Leaves are split in random order on a variable not yet fixed on their
    path; child bounds add an exponential increment to the parent bound,
    except with probability ``flat_prob`` where they copy it.
    """
    nodes = {0: BnbNode(0, None, None, None, 0, NodeStatus.BRANCHED, float(rng.normal()))}
    open_leaves = [0]
    while open_leaves and len(nodes) + 2 <= max_nodes:
        v = open_leaves.pop(int(rng.integers(len(open_leaves))))
        used = {nodes[u].branch_var for u in _ancestors(nodes, v)} - {None}
        free = [i for i in range(n_binary) if i not in used]
        if not free:
            continue
        i = int(rng.choice(free))
        for val in (0, 1):
            k = len(nodes)
            bump = 0.0 if rng.random() < flat_prob else float(rng.exponential())
            nodes[k] = BnbNode(k, v, i, val, nodes[v].depth + 1, NodeStatus.PRUNED_BY_BOUND,
                               nodes[v].dual_bound + bump)
            nodes[v].children.append(k)
            open_leaves.append(k)
        if rng.random() < stop_prob:
            break
    for v in nodes.values():
        if not v.children and v.status is NodeStatus.BRANCHED:
            v.status = NodeStatus.PRUNED_BY_BOUND
    return BnbTree(nodes, 0, n_binary, n_binary)


def _ancestors(nodes, v):
    while v is not None:
        yield v
        v = nodes[v].parent
