import numpy as np
import pytest

from treeclosure.approx import build_B_tight
from treeclosure.bnb import BnbNode, BnbTree, NodeStatus, solve_bnb
from treeclosure.cglp import Cut
from treeclosure.cutloop import objective_cut
from treeclosure.model import GeneratorConfig, MbpInstance, canonicalize, generate_mkp
from treeclosure.oracle import (MAX_ENUM_BINARY, audit_cut, binary_points, build_B_lin, enumerate_feasible,
                                enumerate_sti, node_indicators, product_form_z, random_tree)
from treeclosure.sti import SizeGuard
from treeclosure.tree import complete_tree, validate_tree


def test_empty_constraints():
    inst = canonicalize("Min", [1.0, 1.0], [])
    assert len(enumerate_feasible(inst)) == 4


def test_infeasible_instance():
    inst = canonicalize("Min", [1.0], [([1.0], "GE", 2.0)])
    res = enumerate_feasible(inst)
    assert len(res) == 0 and res.optimal_value is None and res.optimal_point is None


def test_frozen_optima():
    expect = {0: 13.77508300892559, 1: 11.929971948642121, 2: 11.4986614242135}
    for seed, value in expect.items():
        inst = generate_mkp(GeneratorConfig(n=10, seed=seed))
        res = enumerate_feasible(inst)
        assert res.original_value(inst) == pytest.approx(value, abs=1e-9)
        assert np.all(res.feasible_points @ inst.A.T >= inst.b - 1e-9)


def test_mixed_enumeration():
    # min x0 + y s.t. y >= 0.5 - x0, y in [0, 2]
    inst = MbpInstance("mix", "Min", [1.0, 1.0], [[1.0, 1.0]], [0.5], [0], [0, 0], [1, 2])
    res = enumerate_feasible(inst)
    assert len(res) == 2 and res.optimal_value == pytest.approx(0.5)
    assert audit_cut(Cut(np.array([1.0, 1.0]), 0.5, "t"), inst, res) == pytest.approx(0.0, abs=1e-9)


def test_size_guard():
    inst = canonicalize("Min", np.ones(MAX_ENUM_BINARY + 1), [])
    with pytest.raises(SizeGuard):
        enumerate_feasible(inst)


def test_audit_detects_corruption(mkp10, mkp10_tree, mkp10_enum):
    cut = objective_cut(mkp10_tree)
    assert audit_cut(cut, mkp10, mkp10_enum) >= -1e-9
    bad = Cut(cut.pi, cut.pi0 + 10.0, "bad")
    assert audit_cut(bad, mkp10, mkp10_enum) < -1.0


def test_product_form(mkp10_tree, mkp10, mkp10_enum):
    root = BnbTree({0: BnbNode(0, None, None, None, 0, NodeStatus.PRUNED_BY_BOUND, 0.0)}, 0, 3, 3)
    assert product_form_z(root, [0.3, 0.2, 0.9]).tolist() == [1.0]
    P = build_B_tight(mkp10_tree, mkp10)
    for x in mkp10_enum.feasible_points[::37]:
        z = product_form_z(mkp10_tree, x)
        assert z.sum() == 1.0
        assert P.contains(x, z)


def test_b_lin_contains_product_points(small_mkp, small_tree):
    B = build_B_lin(small_tree, small_mkp)
    assert B.n_z == len(small_tree)
    for x in binary_points(small_mkp.n):
        assert B.contains(x, node_indicators(small_tree, x))
        z = node_indicators(small_tree, x)
        z[-1] = 1.0 - z[-1]
        assert not B.contains(x, z)


def test_enumerate_sti_guard_and_monotone(rng):
    t = complete_tree(random_tree(rng, 6, 9))
    assert not validate_tree(t)
    x, c = rng.random(6), rng.normal(size=6)
    base = enumerate_sti(t, x, c=c)
    assert np.isfinite(base)


def test_random_tree_shapes(rng):
    for _ in range(30):
        t = complete_tree(random_tree(rng, 5, int(rng.integers(1, 14))))
        assert len(t) <= 13 and not validate_tree(t)


def test_enumeration_is_deterministic(mkp10):
    a, b = enumerate_feasible(mkp10), enumerate_feasible(mkp10)
    assert np.array_equal(a.feasible_points, b.feasible_points)
