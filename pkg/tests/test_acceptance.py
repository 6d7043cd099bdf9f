"""Acceptance criteria 1-10.

Each test records a one-line summary that the conftest hook prints as
``criterion N: PASS|FAIL  detail``. Run standalone with
``python tests/test_acceptance.py`` or as part of ``pytest``.
"""

import csv
import functools
import time

import numpy as np
import pytest

from treeclosure.approx import build_O1_lin, build_O2_lin, build_O3_lin, included_leaves, solve_extended
from treeclosure.bnb import solve_bnb
from treeclosure.cglp import build_cglp
from treeclosure.cli import main
from treeclosure.cutloop import run_cutting_plane
from treeclosure.experiment import ExperimentConfig, iter_cells
from treeclosure.lp import LpStatus, solve_lp
from treeclosure.model import GeneratorConfig, MbpInstance, generate_mkp, generate_scp
from treeclosure.oracle import audit_cut, binary_points, enumerate_feasible, enumerate_sti, random_tree
from treeclosure.sti import sti_violation
from treeclosure.tree import complete_tree, truncate_tree, validate_tree

ALL_KINDS = ["Obj", "Sti", "CglpO2", "CglpO1", "CglpO3"]
CHAIN = ["CglpO1", "CglpO2", "Sti", "Obj"]


def report(record_property, ok: bool, detail: str):
    record_property("acceptance", detail)
    print(f"{'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def small_instances():
    """Twenty seeded instances with n <= 14: ten knapsack, ten covering."""
    out = []
    for k in range(10):
        n = 8 + k % 7
        out.append(generate_mkp(GeneratorConfig(n=n, seed=100 + k)))
        out.append(generate_scp(GeneratorConfig(n=n, seed=200 + k)))
    return out


@functools.lru_cache(maxsize=None)
def grid(problem: str):
    """Every n=10 cell of ``problem`` with all five separators.

    Returns ``(cells, results, seconds)``.
    """
    config = ExperimentConfig(problem=problem, sizes=[10], separators=ALL_KINDS)
    t0 = time.perf_counter()
    cells, results = [], []
    for cell in iter_cells(config):
        cells.append(cell)
        results.append(run_cutting_plane(cell.perturbed, cell.tree, cell.kind, time_limit=cell.time_limit,
                                         max_iters=cell.max_iters, tol=cell.tol, l_opt=cell.l_opt,
                                         original=cell.original))
    return cells, results, time.perf_counter() - t0


def test_criterion_01_bb_matches_enumeration(record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for inst in small_instances():
        tree = solve_bnb(inst)
        worst = max(worst, abs(tree.incumbent_value - enumerate_feasible(inst).optimal_value))
    elapsed = time.perf_counter() - t0
    report(record_property, worst <= 1e-7 and elapsed < 120,
           f"20 instances, worst |BB - enumeration| = {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_tree_structure(record_property):
    trees = [complete_tree(solve_bnb(inst)) for inst in small_instances()]
    for problem in ("mkp", "scp"):
        cells = iter_cells(ExperimentConfig(problem=problem, sizes=[10], perturbations=1, separators=["Obj"]))
        trees += [c.tree for c in cells]
    problems = []
    for t in trees:
        problems += validate_tree(t, partition_limit=12).messages
    checked = sum(t.n_binary <= 12 for t in trees)
    report(record_property, not problems,
           f"{len(trees)} trees ({checked} with partition enumeration), {len(problems)} diagnostics")


def test_criterion_03_cut_validity(record_property):
    worst, n_cuts = np.inf, 0
    for problem in ("mkp", "scp"):
        cells, results, _ = grid(problem)
        enums = {}
        for cell, res in zip(cells, results):
            key = cell.perturbation
            if key not in enums:
                enums[key] = enumerate_feasible(cell.perturbed)
            for cut in res.cuts:
                worst = min(worst, audit_cut(cut, cell.perturbed, enums[key]))
                n_cuts += 1
    report(record_property, n_cuts > 0 and worst >= -1e-6,
           f"{n_cuts} cuts audited, worst slack {worst:.2e}")


def test_criterion_04_sti_dp_matches_enumeration(record_property):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 9))
        tree = complete_tree(random_tree(rng, n, int(rng.integers(1, 14))))
        c, x = rng.normal(size=n), rng.random(n)
        worst = max(worst, abs(sti_violation(tree, x, c=c) - enumerate_sti(tree, x, c=c)))
    elapsed = time.perf_counter() - t0
    report(record_property, worst <= 1e-9 and elapsed < 60,
           f"200 trees, worst |DP - enumeration| = {worst:.2e}, {elapsed:.1f} s")


def test_criterion_05_inclusion_hierarchy(record_property):
    rng = np.random.default_rng(5)
    order_ok, sti_worst, count = True, -np.inf, 0
    for seed in range(5):
        inst = generate_mkp(GeneratorConfig(n=10, seed=seed))
        tree = complete_tree(solve_bnb(inst))
        P1, P2, P3 = (f(tree, inst) for f in (build_O1_lin, build_O2_lin, build_O3_lin))
        for _ in range(50):
            d = rng.normal(size=inst.n)
            v1, v2, v3 = (solve_extended(P, d) for P in (P1, P2, P3))
            order_ok &= v1 >= v2 - 1e-7 and v2 - 1e-7 >= v3 - 2e-7
            sol = solve_lp(P2.extended_lp(d))
            assert sol.status is LpStatus.OPTIMAL
            sti_worst = max(sti_worst, sti_violation(tree, sol.point[:inst.n], c=inst.c))
            count += 1
    report(record_property, order_ok and sti_worst <= 1e-7,
           f"{count} directions, O1 >= O2 >= O3 {'holds' if order_ok else 'violated'}, "
           f"worst STI violation at O2 points {sti_worst:.2e}")


def test_criterion_06_o2_equals_o3_on_binary_points(record_property):
    rng = np.random.default_rng(6)
    trees = []
    for n in (3, 4, 5):
        for seed in range(3):
            inst = generate_mkp(GeneratorConfig(n=n, seed=seed))
            trees.append((complete_tree(solve_bnb(inst)), inst))
            t = complete_tree(random_tree(rng, n, 15))
            trees.append((t, inst))
    mismatches, checks = 0, 0
    for tree, inst in trees:
        O2, O3 = build_O2_lin(tree, inst), build_O3_lin(tree, inst)
        Z = binary_points(len(tree.leaf_ids))
        for x in binary_points(inst.n):
            for z in Z:
                mismatches += O2.contains(x, z) != O3.contains(x, z)
                checks += 1
    report(record_property, mismatches == 0,
           f"{len(trees)} trees, {checks} binary (x, z) pairs, {mismatches} membership mismatches")


def test_criterion_07_gap_ordering(record_property):
    t_total, violations, timeouts, compared = 0.0, [], 0, 0
    for problem in ("mkp", "scp"):
        cells, results, seconds = grid(problem)
        t_total += seconds
        gaps = {}
        for cell, res in zip(cells, results):
            timeouts += res.timed_out
            gaps[(cell.perturbation, cell.depth, cell.kind)] = res.gap
        for p in sorted({c.perturbation for c in cells}):
            g = [gaps[(p, 1.0, k)] for k in CHAIN]
            compared += 1
            if not g[0] <= g[1] + 1e-6 <= g[2] + 2e-6 <= g[3] + 3e-6:
                violations.append(f"{problem} p{p}: " + ", ".join(f"{k}={v:.3g}" for k, v in zip(CHAIN, g)))
    ok = not violations and timeouts == 0 and t_total < 600
    report(record_property, ok,
           f"{compared} instances at depth 1.0, {len(violations)} ordering violations, {timeouts} timeouts, "
           f"grids {t_total:.1f} s" + (f"; {violations}" if violations else ""))


def test_criterion_08_depth_trend(record_property):
    bad = []
    for problem in ("mkp", "scp"):
        cells, results, _ = grid(problem)
        for kind in ALL_KINDS:
            mean = {r: np.mean([res.gap for c, res in zip(cells, results) if c.kind == kind and c.depth == r])
                    for r in (0.25, 1.0)}
            if not mean[1.0] <= mean[0.25] + 1e-9:
                bad.append(f"{problem}/{kind}: {mean[1.0]:.3g} > {mean[0.25]:.3g}")
    report(record_property, not bad, f"10 (problem, separator) pairs, {len(bad)} with deeper gap larger"
           + (f"; {bad}" if bad else ""))


def mixed_instance():
    """Knapsack rows over eight binaries and two continuous columns in [0, 1]."""
    base = generate_mkp(GeneratorConfig(n=10, seed=7))
    return MbpInstance("mixed", "Min", base.c, base.A, base.b, np.arange(8), np.zeros(10), np.ones(10))


def expected_sizes(tree, inst):
    """``(variables, constraints)`` of each CGLP, from the documented formulas."""
    L, L_in = len(tree.leaf_ids), len(included_leaves(tree))
    k = 1 + 2 * inst.n_binary + inst.o
    lin = 2 * inst.n_binary + inst.o
    return {"O1": (L_in * (k + 1) + 2 * (inst.n + 1), L_in * (inst.n + 1) + 1),
            "O2": (lin + 3 * L + 1, L + 1),
            "O3": (lin + 5 * L - 1, L + 1)}


def test_criterion_09_cglp_sizes(record_property):
    cases = []
    for n, seed in ((10, 1), (14, 3)):
        full = complete_tree(solve_bnb(generate_mkp(GeneratorConfig(n=n, seed=seed))))
        cases += [(truncate_tree(full, r), full.instance) for r in (0.25, 0.5, 1.0)]
    mkp12 = generate_mkp(GeneratorConfig(n=12, seed=2))
    cases.append((complete_tree(solve_bnb(mkp12)), mkp12))
    scp = generate_scp(GeneratorConfig(n=10, seed=0, q=0.5))
    cases.append((complete_tree(solve_bnb(scp)), scp))
    mixed = mixed_instance()
    full = complete_tree(solve_bnb(mixed))
    cases += [(truncate_tree(full, r), mixed) for r in (0.5, 1.0)]
    assert len(cases) == 10
    wrong = []
    for tree, inst in cases:
        for name, (cols, rows) in expected_sizes(tree, inst).items():
            builder = {"O1": build_O1_lin, "O2": build_O2_lin, "O3": build_O3_lin}[name]
            lp = build_cglp(builder(tree, inst))
            if (lp.n_cols, lp.n_rows) != (cols, rows):
                wrong.append(f"{inst.name} |L|={len(tree.leaf_ids)} {name}: "
                             f"{(lp.n_cols, lp.n_rows)} != {(cols, rows)}")
    report(record_property, not wrong, f"10 trees x 3 approximations, {len(wrong)} size mismatches"
           + (f"; {wrong}" if wrong else ""))


def raw_without_time(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    drop = rows[0].index("time_s")
    return [[v for j, v in enumerate(r) if j != drop] for r in rows]


def test_criterion_10_determinism(record_property, tmp_path, capsys):
    codes = []
    for run in ("a", "b"):
        codes.append(main(["experiment", "--problem", "mkp", "--sizes", "10", "--seed", "3",
                           "--out-dir", str(tmp_path / run)]))
    capsys.readouterr()
    a, b = (raw_without_time(tmp_path / run / "mkp_raw.csv") for run in ("a", "b"))
    same = a == b and len(a) == 1 + 5 * 4 * 4
    report(record_property, same and codes == [0, 0],
           f"two MKP n=10 runs, {len(a) - 1} raw rows, identical apart from time_s: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
