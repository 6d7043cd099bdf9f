"""Post-processing of recorded search trees.

Completion to a full binary tree, depth truncation, structural checks,
derived quantities (leaf sets, bound ordering) and JSON round trips.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from .bnb import BnbNode, BnbTree, NodeStatus
from .model import MbpInstance, dumps_json

MONOTONE_TOL = 1e-9


class MalformedTree(ValueError):
    pass


# -- completion and truncation ----------------------------------------------


def surrogate_bound(tree: BnbTree) -> Optional[float]:
    """Finite stand-in for the bound of infeasible nodes.

    ``L_max + (L_max - L_min + 1)`` over the finite bounds of the tree, or
    ``None`` when the tree has no finite bound at all.
    """
    finite = [v.dual_bound for v in tree.nodes.values() if math.isfinite(v.dual_bound) and not v.surrogate]
    if not finite:
        return None
    hi, lo = max(finite), min(finite)
    return hi + (hi - lo + 1.0)


def complete_tree(tree: BnbTree) -> BnbTree:
    """Return a full binary copy of ``tree`` with clamped, finite bounds.

    A node with a single child gets the missing sibling (status
    ``CompletedSibling``, bound of the parent). Infeasible nodes receive
    :func:`surrogate_bound`, and every bound is then raised to at least the
    bound of its parent. The operation is idempotent.

    Raises:
        MalformedTree: a node has more than two children.
    """
    out = tree.copy()
    nodes = out.nodes
    for v in list(nodes.values()):
        if len(v.children) > 2:
            raise MalformedTree(f"node {v.id} has {len(v.children)} children")
        if len(v.children) == 1:
            child = nodes[v.children[0]]
            sib = BnbNode(
                id=max(nodes) + 1,
                parent=v.id,
                branch_var=child.branch_var,
                branch_value=1 - child.branch_value,
                depth=v.depth + 1,
                status=NodeStatus.COMPLETED_SIBLING,
                dual_bound=v.dual_bound,
            )
            nodes[sib.id] = sib
            v.children.append(sib.id)
        if len(v.children) == 2:
            v.children.sort(key=lambda c: nodes[c].branch_value)

    fill = surrogate_bound(out)
    for v in nodes.values():
        if not math.isfinite(v.dual_bound) and fill is not None:
            v.dual_bound = fill
            v.surrogate = True

    for vid in _preorder(out):
        v = nodes[vid]
        if v.parent is not None:
            v.dual_bound = max(v.dual_bound, nodes[v.parent].dual_bound)
    return out


def truncate_tree(tree: BnbTree, r_depth: float) -> BnbTree:
    """Keep the nodes of depth at most ``floor(r_depth * d_max)``.

    Nodes at the cut depth become leaves with their own bounds; the result
    is completed again.
    """
    if not 0.0 < r_depth <= 1.0:
        raise ValueError(f"depth ratio must lie in (0, 1], got {r_depth}")
    limit = math.floor(r_depth * tree.d_max + 1e-12)
    out = tree.copy()
    out.nodes = {i: v for i, v in out.nodes.items() if v.depth <= limit}
    for v in out.nodes.values():
        if v.depth == limit:
            v.children = []
    return complete_tree(out)


def lift_bounds(tree: BnbTree) -> BnbTree:
    """Raise every internal bound to the smallest leaf bound below it.

    ``l_v := max(l_v, min_{u in L_v} l_u)`` is still a valid bound for the
    subtree of ``v`` (its leaves partition that region) and keeps bounds
    nondecreasing along paths. Afterwards the root carries the tree's
    global bound, so the smallest bound over all nodes equals the smallest
    leaf bound.
    """
    out = tree.copy()
    for vid in reversed(_preorder(out)):
        v = out.nodes[vid]
        if v.children:
            v.dual_bound = max(v.dual_bound, min(out.nodes[c].dual_bound for c in v.children))
    return out


def _preorder(tree: BnbTree) -> List[int]:
    order, stack = [], [tree.root_id]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(reversed(tree.nodes[v].children))
    return order


# -- derived quantities -----------------------------------------------------


@dataclass
class TreeSummary:
    """Quantities derived from a completed tree.

    Attributes:
        mu: smallest leaf bound.
        phi: node ids sorted by bound, largest first (ties by id).
        leaf_descendants: leaves below each node (a leaf maps to itself).
        path_to_root: nodes from the root down to each node.
    """

    mu: float
    phi: List[int]
    leaf_descendants: Dict[int, List[int]]
    path_to_root: Dict[int, List[int]] = field(repr=False)

    def ancestors_in(self, subset: Iterable[int], v: int) -> List[int]:
        """Members of ``subset`` on the path from the root to ``v``."""
        subset = set(subset)
        return [u for u in self.path_to_root[v] if u in subset]


def summarize(tree: BnbTree) -> TreeSummary:
    nodes = tree.nodes
    leaves = tree.leaf_ids
    order = _preorder(tree)
    below: Dict[int, List[int]] = {}
    for vid in reversed(order):
        v = nodes[vid]
        below[vid] = sorted(u for c in v.children for u in below[c]) if v.children else [vid]
    paths: Dict[int, List[int]] = {}
    for vid in order:
        p = nodes[vid].parent
        paths[vid] = (paths[p] if p is not None else []) + [vid]
    mu = min(nodes[v].dual_bound for v in leaves)
    phi = sorted(nodes, key=lambda v: (-nodes[v].dual_bound, v))
    return TreeSummary(mu, phi, below, paths)


# -- validation -------------------------------------------------------------


@dataclass
class TreeDiagnostics:
    shape: List[str] = field(default_factory=list)
    counts: List[str] = field(default_factory=list)
    monotonicity: List[str] = field(default_factory=list)
    repeated_vars: List[str] = field(default_factory=list)
    siblings: List[str] = field(default_factory=list)
    partition: List[str] = field(default_factory=list)

    @property
    def messages(self) -> List[str]:
        return (self.shape + self.counts + self.monotonicity + self.repeated_vars
                + self.siblings + self.partition)

    def __bool__(self) -> bool:
        return bool(self.messages)

    def __len__(self) -> int:
        return len(self.messages)


def validate_tree(tree: BnbTree, *, partition_limit: int = 15) -> TreeDiagnostics:
    """Collect structural problems of ``tree``; an empty result means valid.

    The partition check enumerates all binary assignments and is skipped
    when the tree has more than ``partition_limit`` binaries.
    """
    diag = TreeDiagnostics()
    nodes = tree.nodes
    for v in nodes.values():
        if len(v.children) not in (0, 2):
            diag.shape.append(f"node {v.id} has {len(v.children)} children")
        for c in v.children:
            if nodes[c].parent != v.id:
                diag.shape.append(f"node {c} does not point back to parent {v.id}")
            if nodes[c].dual_bound < v.dual_bound - MONOTONE_TOL:
                diag.monotonicity.append(
                    f"bound of node {c} ({nodes[c].dual_bound:g}) below parent {v.id} ({v.dual_bound:g})"
                )
        if len(v.children) == 2:
            a, b = (nodes[c] for c in v.children)
            if a.branch_var != b.branch_var or {a.branch_value, b.branch_value} != {0, 1}:
                diag.siblings.append(f"children of node {v.id} do not split one variable into 0/1")
    n_leaves = len(tree.leaf_ids)
    if len(nodes) != 2 * n_leaves - 1:
        diag.counts.append(f"|V| = {len(nodes)} but 2|L| - 1 = {2 * n_leaves - 1}")
    for leaf in tree.leaf_ids:
        seen = [nodes[u].branch_var for u in tree.path(leaf)[1:]]
        if len(seen) != len(set(seen)):
            diag.repeated_vars.append(f"path to leaf {leaf} branches twice on one variable")
    if tree.n_binary <= partition_limit and not diag.shape:
        diag.partition.extend(_partition_problems(tree))
    return diag


def leaf_fixing_masks(tree: BnbTree, points: np.ndarray, binary: np.ndarray) -> Dict[int, np.ndarray]:
    """For each leaf, which rows of ``points`` agree with its fixings."""
    col = {int(j): k for k, j in enumerate(binary)}
    out = {}
    for leaf in tree.leaf_ids:
        zeros, ones = tree.fixings(leaf)
        mask = np.ones(points.shape[0], dtype=bool)
        for j in zeros:
            mask &= points[:, col[j]] == 0
        for j in ones:
            mask &= points[:, col[j]] == 1
        out[leaf] = mask
    return out


def _partition_problems(tree: BnbTree) -> List[str]:
    nb = tree.n_binary
    binary = tree.instance.binary if tree.instance is not None else np.arange(nb)
    points = (np.arange(2**nb)[:, None] >> np.arange(nb)[None, :]) & 1
    hits = sum(m.astype(int) for m in leaf_fixing_masks(tree, points, binary).values())
    bad = np.flatnonzero(hits != 1)
    if bad.size == 0:
        return []
    return [f"{bad.size} of {points.shape[0]} binary points are not covered by exactly one leaf"]


# -- serialization ----------------------------------------------------------


def tree_to_dict(tree: BnbTree) -> dict:
    inc = tree.incumbent_value
    fill = [v.dual_bound for v in tree.nodes.values() if v.surrogate]
    return {
        "root": tree.root_id,
        "nodes": [
            {
                "id": v.id,
                "parent": v.parent,
                "branch_var": v.branch_var,
                "branch_value": v.branch_value,
                "depth": v.depth,
                "status": v.status.value,
                "dual_bound": v.dual_bound,
            }
            for v in sorted(tree.nodes.values(), key=lambda v: v.id)
        ],
        "incumbent": inc if inc is None else float(inc),
        "d_max": tree.d_max,
        "instance_name": tree.instance_name,
        "metadata": {"complete": tree.complete, "surrogate_bound": fill[0] if fill else None},
    }


def tree_from_dict(data: dict, instance: Optional[MbpInstance] = None) -> BnbTree:
    """Rebuild a tree; ``instance`` supplies variable counts when given."""
    meta = data.get("metadata", {})
    fill = meta.get("surrogate_bound")
    nodes: Dict[int, BnbNode] = {}
    for rec in data["nodes"]:
        status = NodeStatus(rec["status"])
        bound = rec["dual_bound"]
        if bound is None:
            bound = math.inf
        nodes[rec["id"]] = BnbNode(
            rec["id"], rec["parent"], rec["branch_var"], rec["branch_value"], rec["depth"], status,
            float(bound), surrogate=status is NodeStatus.INFEASIBLE and fill is not None,
        )
    for v in sorted(nodes.values(), key=lambda v: v.id):
        if v.parent is not None:
            nodes[v.parent].children.append(v.id)
    for v in nodes.values():
        v.children.sort(key=lambda c: (nodes[c].branch_value, c))
    if instance is not None:
        n_vars, n_binary = instance.n, instance.n_binary
    else:
        used = [v.branch_var for v in nodes.values() if v.branch_var is not None]
        n_vars = n_binary = (max(used) + 1) if used else 0
    return BnbTree(
        nodes, int(data["root"]), n_vars, n_binary, data.get("incumbent"), None,
        data.get("instance_name", ""), bool(meta.get("complete", True)), instance,
    )


def save_tree(tree: BnbTree, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_json(tree_to_dict(tree)))


def load_tree(path, instance: Optional[MbpInstance] = None) -> BnbTree:
    with open(path) as fh:
        return tree_from_dict(json.load(fh), instance)
