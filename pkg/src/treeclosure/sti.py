"""Star tree inequalities.

For a node ``v`` let ``s_v(x) = sum_{i in ones(v)} (1 - x_i) + sum_{i in
zeros(v)} x_i`` count how far ``x`` is from the fixings on the path to
``v`` and ``Delta_v = min(1, s_v)``. With nodes ordered by bound
(``phi``, largest first) and any chain ``t_1 = phi_1 < t_2 < ... < t_k``
closed by ``t_{k+1} = phi_last``,

    c x >= l_{t_1} - sum_j (l_{t_j} - l_{t_{j+1}}) Delta_{t_j}(x)

holds on the feasible region. The most violated chain at a point is a
shortest path over the bound-sorted nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_point, check_points
from .bnb import BnbTree
from .cglp import CUT_TOL, Cut
from .tree import TreeSummary, lift_bounds, summarize

MAX_ENUM_NODES = 13


class SizeGuard(ValueError):
    """The requested exhaustive computation is too large."""


@dataclass
class StiContext:
    """Bounds, ordering and ``Delta`` values of one tree at one point."""

    tree: BnbTree
    summary: TreeSummary
    c: np.ndarray
    x_bar: np.ndarray
    deltas: Dict[int, float]
    sums: Dict[int, float]  # unclipped s_v

    def bound(self, v: int) -> float:
        return self.tree.nodes[v].dual_bound


@dataclass
class StiChain:
    """Chain ``t_1 .. t_k``; the closing node ``phi_last`` is implicit."""

    nodes: List[int]
    coefficients: List[float] = field(default_factory=list)
    value: float = 0.0  # right-hand side of the inequality at x_bar


def compute_deltas(tree: BnbTree, x_bar, c=None, *, lift: bool = True) -> StiContext:
    """``Delta_v`` for every node via the parent recursion.

    ``c`` defaults to the objective of the tree's instance. With ``lift``
    internal bounds are raised by :func:`treeclosure.tree.lift_bounds`
    first, which makes the last node of ``phi`` carry the smallest leaf
    bound.
    """
    if lift:
        tree = lift_bounds(tree)
    x = np.asarray(x_bar, dtype=float).ravel()
    if c is None:
        if tree.instance is None:
            raise ValueError("tree carries no instance; pass the objective explicitly")
        c = tree.instance.c
    summ = summarize(tree)
    sums: Dict[int, float] = {}
    deltas: Dict[int, float] = {}
    for v, path in sorted(summ.path_to_root.items(), key=lambda kv: len(kv[1])):
        node = tree.nodes[v]
        if node.parent is None:
            sums[v], deltas[v] = 0.0, 0.0
            continue
        xi = x[node.branch_var]
        term = (1.0 - xi) if node.branch_value == 1 else xi
        sums[v] = sums[node.parent] + term
        deltas[v] = min(1.0, deltas[node.parent] + term)
    return StiContext(tree, summ, np.asarray(c, dtype=float), x, deltas, sums)


def _chain_value(ctx: StiContext, chain: List[int]) -> float:
    """Right-hand side of the nonlinear inequality for ``chain`` at ``x_bar``."""
    last = ctx.summary.phi[-1]
    ends = chain + [last]
    value = ctx.bound(chain[0])
    for a, b in zip(ends[:-1], ends[1:]):
        value -= (ctx.bound(a) - ctx.bound(b)) * ctx.deltas[a]
    return value


def best_chain(ctx: StiContext, *, prune: bool = True) -> StiChain:
    """Chain with the largest right-hand side, by dynamic programming.

    ``dist[q] = min_{p < q} dist[p] + (l_p - l_q) Delta_p`` over positions
    in ``phi``; the answer is ``l_{phi_1} - dist[last]``. With ``prune``,
    a node sharing its bound with another node of smaller ``Delta`` is
    dropped first (it can never beat that node), except the two end points.
    """
    phi = ctx.summary.phi
    if len(phi) == 1:
        return StiChain([phi[0]], [0.0], ctx.bound(phi[0]))
    order = list(phi)
    if prune:
        order = _prune(ctx, order)
    bounds = np.array([ctx.bound(v) for v in order])
    delta = np.array([ctx.deltas[v] for v in order])
    k = len(order)
    dist = np.full(k, np.inf)
    pred = np.full(k, -1)
    dist[0] = 0.0
    for q in range(1, k):
        cand = dist[:q] + (bounds[:q] - bounds[q]) * delta[:q]
        p = int(np.argmin(cand))
        dist[q], pred[q] = cand[p], p
    path = [k - 1]
    while path[-1] != 0:
        path.append(int(pred[path[-1]]))
    path = path[::-1][:-1]
    nodes = [order[p] for p in path]
    ends = nodes + [order[-1]]
    coefs = [ctx.bound(a) - ctx.bound(b) for a, b in zip(ends[:-1], ends[1:])]
    return StiChain(nodes, coefs, float(bounds[0] - dist[-1]))


def _prune(ctx: StiContext, order: List[int]) -> List[int]:
    keep = [order[0]]
    best: Dict[float, int] = {}
    for v in order[1:-1]:
        l = ctx.bound(v)
        if l not in best or ctx.deltas[v] < ctx.deltas[best[l]]:
            best[l] = v
    keep.extend(sorted(best.values(), key=order.index))
    keep.append(order[-1])
    return keep


def materialize_sti(ctx: StiContext, chain: StiChain, *, source: str = "STI") -> Cut:
    """Linear cut from ``chain``.

    Each ``Delta_t`` is replaced by its linear sum when ``s_t(x_bar) <= 1``
    and by the constant 1 otherwise; both choices are at least ``Delta_t``
    everywhere, so the cut is valid and matches the chain value at
    ``x_bar``.
    """
    pi = ctx.c.copy()
    pi0 = ctx.bound(chain.nodes[0])
    last = ctx.summary.phi[-1]
    ends = chain.nodes + [last]
    for a, b in zip(ends[:-1], ends[1:]):
        w = ctx.bound(a) - ctx.bound(b)
        if w <= 0.0:
            continue
        if ctx.sums[a] <= 1.0:
            zeros, ones = ctx.tree.fixings(a)
            pi[zeros] += w
            pi[ones] -= w
            pi0 -= w * len(ones)
        else:
            pi0 -= w
    return Cut(pi, float(pi0), source, violation=float(pi0 - pi @ ctx.x_bar))


def separate_sti(tree: BnbTree, x_bar, tol: float = CUT_TOL, *, c=None, lift: bool = True,
                 prune: bool = True) -> Optional[Cut]:
    """Most violated star tree inequality at ``x_bar`` or ``None``.

    The returned cut is rescaled to unit max-norm; its ``violation`` is
    measured after rescaling.
    """
    ctx = compute_deltas(tree, x_bar, c, lift=lift)
    chain = best_chain(ctx, prune=prune)
    cut = materialize_sti(ctx, chain).rescaled()
    return cut if cut.violation > tol else None


def sti_violation(tree: BnbTree, x_bar, *, c=None, lift: bool = True) -> float:
    """Largest violation ``l_{t_1} - ... - c x_bar`` over all chains (unscaled)."""
    ctx = compute_deltas(tree, x_bar, c, lift=lift)
    return best_chain(ctx).value - float(ctx.c @ ctx.x_bar)


def enumerate_chains(ctx: StiContext):
    """Yield every chain ``[phi_1] + T`` with ``T`` a subset of the middle of ``phi``."""
    phi = ctx.summary.phi
    middle = phi[1:-1]
    for mask in range(1 << len(middle)):
        yield [phi[0]] + [v for j, v in enumerate(middle) if mask >> j & 1]


def sti_closure_check(tree: BnbTree, x_bar, *, c=None, lift: bool = True, tol: float = 1e-7) -> bool:
    """True iff ``x_bar`` satisfies every star tree inequality of ``tree``.

    Raises:
        SizeGuard: the tree has more than 13 nodes.
    """
    if len(tree.nodes) > MAX_ENUM_NODES:
        raise SizeGuard(f"closure check limited to {MAX_ENUM_NODES} nodes, tree has {len(tree.nodes)}")
    ctx = compute_deltas(tree, x_bar, c, lift=lift)
    lhs = float(ctx.c @ ctx.x_bar)
    return all(lhs >= _chain_value(ctx, chain) - tol for chain in enumerate_chains(ctx))


class StarTreeSeparator(BaseEstimator):
    """Separator for star tree inequalities of a fitted tree.

    ``fit(tree, instance)`` records the tree and the objective the bounds
    refer to; :meth:`separate` runs the shortest-path separation.
    """

    def __init__(self, tol: float = CUT_TOL, lift_bounds: bool = True, prune: bool = True):
        self.tol = tol
        self.lift_bounds = lift_bounds
        self.prune = prune

    def fit(self, tree: BnbTree, instance=None):
        self.tree_ = lift_bounds(tree) if self.lift_bounds else tree
        self.c_ = np.asarray(instance.c if instance is not None else tree.instance.c, dtype=float)
        self.n_nodes_ = len(tree.nodes)
        return self

    def separate(self, x_bar) -> Optional[Cut]:
        check_is_fitted(self, "tree_")
        x_bar = check_point(x_bar, self.c_.size)
        return separate_sti(self.tree_, x_bar, self.tol, c=self.c_, lift=False, prune=self.prune)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "tree_")
        X = check_points(X, self.c_.size)
        return np.array([sti_violation(self.tree_, x, c=self.c_, lift=False) for x in X])

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > self.tol).astype(int)
