import numpy as np
import pytest

from treeclosure.bnb import BnbNode, BnbTree, NodeStatus, solve_bnb
from treeclosure.cutloop import (ObjectiveCutSeparator, SeparatorKind, ZeroOptimum, compute_gap, make_separator,
                                 objective_cut, reference_optimum, run_cutting_plane)
from treeclosure.lp import solve_lp
from treeclosure.model import perturb_objective
from treeclosure.oracle import audit_cut, enumerate_feasible
from treeclosure.tree import truncate_tree


def test_gap_formula(rng):
    assert compute_gap(5.0, 5.0) == 0.0
    assert compute_gap(1.05 * 8.0, 8.0) == pytest.approx(0.05)
    for _ in range(100):
        a, b = rng.normal(size=2) * 10
        assert compute_gap(a, b) == pytest.approx(abs(b - a) / abs(b), rel=1e-15)
    with pytest.raises(ZeroOptimum):
        compute_gap(1.0, 0.0)
    with pytest.raises(ValueError):
        compute_gap(1.0, np.inf)


def test_objective_cut(mkp10, mkp10_tree, mkp10_enum):
    cut = objective_cut(mkp10_tree)
    assert cut.pi0 == pytest.approx(mkp10_enum.optimal_value, abs=1e-7)
    assert audit_cut(cut, mkp10, mkp10_enum) >= -1e-9
    single = BnbTree({0: BnbNode(0, None, None, None, 0, NodeStatus.PRUNED_BY_BOUND, -20.0)}, 0, 10, 10,
                     instance=mkp10)
    assert objective_cut(single).pi0 == -20.0
    for r in (0.25, 0.5):
        assert objective_cut(truncate_tree(mkp10_tree, r)).pi0 <= cut.pi0 + 1e-9


def test_obj_loop_adds_at_most_one_cut(mkp10, mkp10_tree):
    pert = perturb_objective(mkp10, 0)
    res = run_cutting_plane(pert, mkp10_tree, "Obj")
    assert res.cuts_added <= 1 and res.converged
    lp = solve_lp(pert.relaxation()).objective_value
    mu = objective_cut(mkp10_tree).pi0
    # the perturbed bound cannot drop below the unperturbed LP bound
    assert pert.from_original(res.l_dual) >= lp - 1e-9
    assert res.gap == pytest.approx(compute_gap(res.l_dual, res.l_opt))
    assert mu <= mkp10.c @ enumerate_feasible(mkp10).optimal_point + 1e-9


@pytest.mark.parametrize("kind", ["Obj", "Sti", "CglpO2", "CglpO3", "CglpO1"])
def test_loop_properties(kind, mkp10, mkp10_tree, mkp10_enum):
    pert = perturb_objective(mkp10, 11)
    l_opt = reference_optimum(pert)
    res = run_cutting_plane(pert, mkp10_tree, kind, l_opt=l_opt)
    assert res.converged and not res.timed_out
    assert all(b >= a - 1e-9 for a, b in zip(res.lp_values, res.lp_values[1:]))
    for i, a in enumerate(res.cuts):
        assert audit_cut(a, pert, mkp10_enum) >= -1e-6
        for b in res.cuts[i + 1:]:
            assert not a.same_as(b)
    assert pert.from_original(res.l_dual) <= pert.from_original(l_opt) + 1e-7
    again = run_cutting_plane(pert, mkp10_tree, kind, l_opt=l_opt)
    assert again.gap == res.gap and again.cuts_added == res.cuts_added


def test_hierarchy_on_one_instance(mkp10, mkp10_tree):
    pert = perturb_objective(mkp10, 4)
    l_opt = reference_optimum(pert)
    gaps = {k: run_cutting_plane(pert, mkp10_tree, k, l_opt=l_opt).gap for k in ("Obj", "Sti", "CglpO2", "CglpO1")}
    assert gaps["CglpO1"] <= gaps["CglpO2"] + 1e-6 <= gaps["Sti"] + 2e-6 <= gaps["Obj"] + 3e-6


def test_timeout(mkp10, mkp10_tree):
    pert = perturb_objective(mkp10, 2)
    res = run_cutting_plane(pert, mkp10_tree, "CglpO1", time_limit=1e-4, l_opt=1.0)
    assert res.timed_out and res.wall_time_seconds >= 1e-4


def test_max_iters(mkp10, mkp10_tree):
    res = run_cutting_plane(perturb_objective(mkp10, 1), mkp10_tree, "Sti", max_iters=1, l_opt=10.0)
    assert res.iterations == 1 and not res.converged


def test_zero_optimum_flag(mkp10, mkp10_tree):
    res = run_cutting_plane(perturb_objective(mkp10, 1), mkp10_tree, "Obj", l_opt=0.0)
    assert res.zero_optimum and res.gap == pytest.approx(abs(res.l_dual))


def test_make_separator():
    assert isinstance(make_separator("Obj"), ObjectiveCutSeparator)
    assert make_separator(SeparatorKind.CGLP_O3).approximation == "O3"
    with pytest.raises(ValueError):
        make_separator("Nope")


def test_size_mismatch(mkp10, mkp10_tree, small_mkp):
    with pytest.raises(ValueError):
        run_cutting_plane(small_mkp, mkp10_tree, "Obj", l_opt=1.0)
