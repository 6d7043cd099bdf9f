"""Outer approximations of the feasible region built from a search tree.

Every builder returns a :class:`Polyhedron` over ``(x, z)``:

* ``O1``: disjunction of the leaf atoms in its extended (lifted) form.
* ``O2``: the tightened leaf-indicator system ``B_tight`` plus the single
  row ``H`` that links ``c x`` to the leaf bounds.
* ``O3``: ``B_tight`` plus one mixing row per node.

Internal-node indicators never appear explicitly; a node's indicator is
the sum of the indicators of the leaves below it. All rows use the
objective of the instance the tree was built for.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .bnb import BnbTree, NodeStatus
from .lp import LpProblem, LpStatus, Relation, solve_lp
from .model import MbpInstance
from .tree import lift_bounds, summarize


class ExcludedLeaf(ValueError):
    """The leaf is infeasible and takes no part in the disjunction."""


class EmptyDisjunction(ValueError):
    """Every leaf of the tree is infeasible."""


@dataclass(eq=False)
class Polyhedron:
    """``Wx x + Wz z (rel) h`` with ``rel`` in {GE, EQ}.

    ``row_kinds`` tags each row with the part of the formulation it comes
    from, ``z_labels`` describes each auxiliary column.
    """

    Wx: np.ndarray
    Wz: np.ndarray
    relations: tuple
    h: np.ndarray
    z_labels: list = field(default_factory=list)
    row_kinds: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        self.Wx = np.atleast_2d(np.asarray(self.Wx, dtype=float))
        self.Wz = np.asarray(self.Wz, dtype=float).reshape(self.Wx.shape[0], -1)
        self.h = np.asarray(self.h, dtype=float).ravel()
        self.relations = tuple(Relation(r) for r in self.relations)
        r = self.Wx.shape[0]
        if self.Wz.shape[0] != r or self.h.size != r or len(self.relations) != r:
            raise ValueError("row blocks of the polyhedron disagree in length")
        if any(rel is Relation.LE for rel in self.relations):
            raise ValueError("LE rows must be negated to GE before storage")
        if not self.row_kinds:
            self.row_kinds = ["row"] * r

    @property
    def n_x(self) -> int:
        return self.Wx.shape[1]

    @property
    def n_z(self) -> int:
        return self.Wz.shape[1]

    @property
    def n_rows(self) -> int:
        return self.Wx.shape[0]

    @property
    def eq_mask(self) -> np.ndarray:
        return np.array([rel is Relation.EQ for rel in self.relations], dtype=bool)

    def row_counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for kind in self.row_kinds:
            out[kind] = out.get(kind, 0) + 1
        return out

    def residuals(self, x, z) -> np.ndarray:
        """Row activity minus right-hand side."""
        return self.Wx @ np.asarray(x, dtype=float) + self.Wz @ np.asarray(z, dtype=float) - self.h

    def contains(self, x, z, tol: float = 1e-9) -> bool:
        res = self.residuals(x, z)
        eq = self.eq_mask
        return bool(np.all(res[~eq] >= -tol) and np.all(np.abs(res[eq]) <= tol))

    def extended_lp(self, direction_x, direction_z=None) -> LpProblem:
        """LP over ``(x, z)`` with free columns; bounds live in the rows."""
        d = np.concatenate([
            np.asarray(direction_x, dtype=float),
            np.zeros(self.n_z) if direction_z is None else np.asarray(direction_z, dtype=float),
        ])
        A = np.hstack([self.Wx, self.Wz])
        inf = np.full(d.size, np.inf)
        return LpProblem(d, A, self.relations, self.h, -inf, inf)

    def split_rows(self):
        """GE-only copy: each EQ row becomes the row and its negation.

        Returns ``(Gx, Gz, g, origin, sign)`` where ``origin`` maps each
        split row to its source row and ``sign`` is +1 or -1.
        """
        eq = self.eq_mask
        origin = np.concatenate([np.arange(self.n_rows), np.flatnonzero(eq)])
        sign = np.concatenate([np.ones(self.n_rows), -np.ones(int(eq.sum()))])
        return (self.Wx[origin] * sign[:, None], self.Wz[origin] * sign[:, None],
                self.h[origin] * sign, origin, sign)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_x": self.n_x,
            "n_z": self.n_z,
            "z_labels": [list(lbl) if isinstance(lbl, tuple) else lbl for lbl in self.z_labels],
            "rows": [
                {"kind": self.row_kinds[i], "wx": self.Wx[i].tolist(), "wz": self.Wz[i].tolist(),
                 "rel": self.relations[i].value, "h": float(self.h[i])}
                for i in range(self.n_rows)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def _stack(name: str, n_x: int, n_z: int, blocks: Sequence[tuple], z_labels) -> Polyhedron:
    """Assemble rows given as ``(wx, wz, rel, h, kind)`` tuples."""
    if not blocks:
        return Polyhedron(np.zeros((0, n_x)), np.zeros((0, n_z)), (), np.zeros(0), z_labels, [], name)
    Wx = np.array([b[0] for b in blocks], dtype=float).reshape(len(blocks), n_x)
    Wz = np.array([b[1] for b in blocks], dtype=float).reshape(len(blocks), n_z)
    return Polyhedron(Wx, Wz, [b[2] for b in blocks], [b[3] for b in blocks], z_labels,
                      [b[4] for b in blocks], name)


# -- bound rows and atoms ---------------------------------------------------


def bound_rows(instance: MbpInstance, zeros=(), ones=()):
    """``X-hat`` as GE rows: two per binary, one per finite continuous bound.

    Fixings tighten the binary rows in place (``x_i >= 1`` or
    ``-x_i >= 0``) so the row count does not depend on them.
    """
    n = instance.n
    zeros, ones = set(zeros), set(ones)
    D, f = [], []
    for i in instance.binary:
        e = np.zeros(n)
        e[i] = 1.0
        D.append(e)
        f.append(1.0 if i in ones else 0.0)
        D.append(-e)
        f.append(0.0 if i in zeros else -1.0)
    for j in instance.continuous:
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(instance.lb[j]):
            D.append(e)
            f.append(instance.lb[j])
        if np.isfinite(instance.ub[j]):
            D.append(-e)
            f.append(-instance.ub[j])
    return np.array(D).reshape(len(D), n), np.array(f)


@dataclass
class AtomSystem:
    """Atom of a leaf: ``D x >= f`` with ``k = 1 + 2|I_B| + o`` rows."""

    leaf: int
    D: np.ndarray
    f: np.ndarray

    @property
    def k(self) -> int:
        return self.D.shape[0]

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.D @ np.asarray(x, dtype=float) >= self.f - tol))


def _is_excluded(tree: BnbTree, v: int) -> bool:
    return tree.nodes[v].status is NodeStatus.INFEASIBLE


def build_atom(tree: BnbTree, instance: MbpInstance, v: int) -> AtomSystem:
    """Bound row ``c x >= l_v`` plus the fixing-tightened box of leaf ``v``.

    Raises:
        ExcludedLeaf: ``v`` is infeasible.
    """
    if tree.nodes[v].children:
        raise ValueError(f"node {v} is not a leaf")
    if _is_excluded(tree, v):
        raise ExcludedLeaf(f"leaf {v} is infeasible")
    zeros, ones = tree.fixings(v)
    Db, fb = bound_rows(instance, zeros, ones)
    D = np.vstack([instance.c[None, :], Db])
    f = np.concatenate([[tree.bound(v)], fb])
    return AtomSystem(v, D, f)


def included_leaves(tree: BnbTree) -> List[int]:
    return [v for v in tree.leaf_ids if not _is_excluded(tree, v)]


def build_O1_lin(tree: BnbTree, instance: MbpInstance) -> Polyhedron:
    """Extended formulation of the convex hull of the leaf atoms.

    Columns are ``(z^v, z0^v)`` for each feasible leaf ``v`` in leaf order;
    rows are ``D_v z^v - f_v z0^v >= 0``, ``z0^v >= 0``, ``x = sum z^v`` and
    ``sum z0^v = 1``.

    Raises:
        EmptyDisjunction: every leaf is infeasible.
    """
    leaves = included_leaves(tree)
    if not leaves:
        raise EmptyDisjunction("no feasible leaf to build the disjunction from")
    n = instance.n
    atoms = [build_atom(tree, instance, v) for v in leaves]
    k = atoms[0].k
    n_z = len(leaves) * (n + 1)
    blocks = []
    labels = []
    for j, atom in enumerate(atoms):
        off = j * (n + 1)
        labels.extend((atom.leaf, i) for i in range(n))
        labels.append((atom.leaf, "z0"))
        for row in range(k):
            wz = np.zeros(n_z)
            wz[off: off + n] = atom.D[row]
            wz[off + n] = -atom.f[row]
            blocks.append((np.zeros(n), wz, Relation.GE, 0.0, "atom"))
        wz = np.zeros(n_z)
        wz[off + n] = 1.0
        blocks.append((np.zeros(n), wz, Relation.GE, 0.0, "z0_nonneg"))
    for i in range(n):
        wx = np.zeros(n)
        wx[i] = 1.0
        wz = np.zeros(n_z)
        wz[i::n + 1][: len(leaves)] = -1.0
        blocks.append((wx, wz, Relation.EQ, 0.0, "link"))
    wz = np.zeros(n_z)
    wz[n::n + 1] = 1.0
    blocks.append((np.zeros(n), wz, Relation.EQ, 1.0, "convexity"))
    return _stack("O1", n, n_z, blocks, labels)


# -- leaf-indicator formulations --------------------------------------------


def _leaf_index(tree: BnbTree) -> Dict[int, int]:
    return {v: j for j, v in enumerate(tree.leaf_ids)}


def _leaf_sum(tree: BnbTree, below: List[int], col: Dict[int, int]) -> np.ndarray:
    w = np.zeros(len(col))
    w[[col[u] for u in below]] = 1.0
    return w


def _btight_blocks(tree: BnbTree, instance: MbpInstance) -> list:
    n = instance.n
    col = _leaf_index(tree)
    summ = summarize(tree)
    blocks = [(np.zeros(n), np.ones(len(col)), Relation.EQ, 1.0, "root")]
    for v in sorted(tree.nodes):
        node = tree.nodes[v]
        if node.parent is None:
            continue
        wz = -_leaf_sum(tree, summ.leaf_descendants[v], col)
        wx = np.zeros(n)
        if node.branch_value == 0:
            wx[node.branch_var] = -1.0
            blocks.append((wx, wz, Relation.GE, -1.0, "branch0"))
        else:
            wx[node.branch_var] = 1.0
            blocks.append((wx, wz, Relation.GE, 0.0, "branch1"))
    for u, j in col.items():
        wz = np.zeros(len(col))
        wz[j] = 1.0
        blocks.append((np.zeros(n), wz, Relation.GE, 0.0, "z_nonneg"))
    D, f = bound_rows(instance)
    for i in range(D.shape[0]):
        blocks.append((D[i], np.zeros(len(col)), Relation.GE, f[i], "bound"))
    return blocks


def build_B_tight(tree: BnbTree, instance: MbpInstance) -> Polyhedron:
    """Tightened leaf-indicator rows with one ``z`` column per leaf.

    ``sum_L z = 1``; ``x_i + sum_{L_v} z <= 1`` for nodes that fix a
    variable to zero; ``sum_{L_v} z <= x_i`` for nodes that fix it to one;
    ``z >= 0`` and the box of ``x``.
    """
    return _stack("B_tight", instance.n, len(tree.leaf_ids), _btight_blocks(tree, instance),
                  list(tree.leaf_ids))


def build_H(tree: BnbTree, instance: MbpInstance) -> tuple:
    """The row ``c x - sum_L l_v z_v >= 0`` as ``(wx, wz, rel, h, kind)``."""
    wz = -np.array([tree.bound(v) for v in tree.leaf_ids])
    return (instance.c.copy(), wz, Relation.GE, 0.0, "H")


def build_M(tree: BnbTree, instance: MbpInstance, *, lift: bool = True) -> list:
    """Mixing rows ``c x + (mu - l_v) sum_{L_v} z >= mu``, one per node.

    With ``lift`` the internal bounds are first raised by
    :func:`treeclosure.tree.lift_bounds`, which only tightens the rows.
    """
    if lift:
        tree = lift_bounds(tree)
    col = _leaf_index(tree)
    summ = summarize(tree)
    mu = summ.mu
    rows = []
    for v in sorted(tree.nodes):
        wz = (mu - tree.bound(v)) * _leaf_sum(tree, summ.leaf_descendants[v], col)
        rows.append((instance.c.copy(), wz, Relation.GE, mu, "M"))
    return rows


def build_O2_lin(tree: BnbTree, instance: MbpInstance) -> Polyhedron:
    blocks = _btight_blocks(tree, instance) + [build_H(tree, instance)]
    return _stack("O2", instance.n, len(tree.leaf_ids), blocks, list(tree.leaf_ids))


def build_O3_lin(tree: BnbTree, instance: MbpInstance, *, lift: bool = True) -> Polyhedron:
    blocks = _btight_blocks(tree, instance) + build_M(tree, instance, lift=lift)
    return _stack("O3", instance.n, len(tree.leaf_ids), blocks, list(tree.leaf_ids))


BUILDERS = {"O1": build_O1_lin, "O2": build_O2_lin, "O3": build_O3_lin}


def build_approximation(kind: str, tree: BnbTree, instance: MbpInstance) -> Polyhedron:
    try:
        return BUILDERS[kind](tree, instance)
    except KeyError:
        raise ValueError(f"unknown approximation {kind!r}; expected one of {sorted(BUILDERS)}") from None


@dataclass
class SizeReport:
    """Row and column tallies of a built approximation."""

    name: str
    n_leaves: int
    n_included: int
    k: int
    n_z: int
    inequality_rows: int
    equality_rows: int
    by_kind: Dict[str, int]

    @property
    def rows(self) -> int:
        return self.inequality_rows + self.equality_rows


def size_report(P: Polyhedron, tree: BnbTree, instance: MbpInstance) -> SizeReport:
    eq = int(P.eq_mask.sum())
    return SizeReport(
        P.name, len(tree.leaf_ids), len(included_leaves(tree)),
        1 + 2 * instance.n_binary + instance.o, P.n_z, P.n_rows - eq, eq, P.row_counts(),
    )


def solve_extended(P: Polyhedron, direction_x, **options) -> Optional[float]:
    """``min d x`` over the projection of ``P``; ``None`` if infeasible."""
    sol = solve_lp(P.extended_lp(direction_x), **options)
    if sol.status is LpStatus.OPTIMAL:
        return sol.objective_value
    if sol.status is LpStatus.UNBOUNDED:
        return -np.inf
    return None
