"""Cutting planes from branch-and-bound trees.

A recorded search tree of a mixed-binary program yields outer
approximations of its feasible region (the disjunctive hull of the leaves,
a leaf-indicator formulation and a mixing-set variant) and a family of
star tree inequalities. Cuts are separated with a cut-generating LP or a
shortest-path routine and applied in a pure cutting-plane loop.
"""

from .approx import build_approximation, build_B_tight, build_O1_lin, build_O2_lin, build_O3_lin, size_report
from .bnb import BnbNode, BnbTree, BranchAndBound, NodeStatus, solve_bnb
from .cglp import Cut, CglpSeparator, separate_cglp
from .cutloop import (CutLoopResult, ObjectiveCutSeparator, SeparatorKind, ZeroOptimum, compute_gap,
                      objective_cut, run_cutting_plane)
from .lp import LpProblem, LpSolution, LpStatus, NumericalFailure, SolverTimeout, solve_lp
from .model import GeneratorConfig, MbpInstance, canonicalize, generate_mkp, generate_scp, perturb_objective
from .sti import StarTreeSeparator, separate_sti
from .tree import complete_tree, lift_bounds, load_tree, save_tree, truncate_tree, validate_tree

__version__ = "0.1.0"

__all__ = [
    "BnbNode", "BnbTree", "BranchAndBound", "CglpSeparator", "Cut", "CutLoopResult", "GeneratorConfig",
    "LpProblem", "LpSolution", "LpStatus", "MbpInstance", "NodeStatus", "NumericalFailure",
    "ObjectiveCutSeparator", "SeparatorKind", "SolverTimeout", "StarTreeSeparator", "ZeroOptimum",
    "build_B_tight", "build_O1_lin", "build_O2_lin", "build_O3_lin", "build_approximation", "canonicalize",
    "complete_tree", "compute_gap", "generate_mkp", "generate_scp", "lift_bounds", "load_tree",
    "objective_cut", "perturb_objective", "run_cutting_plane", "save_tree", "separate_cglp", "separate_sti",
    "size_report", "solve_bnb", "solve_lp", "truncate_tree", "validate_tree",
]
