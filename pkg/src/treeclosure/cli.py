"""Command line entry point: ``treeclosure {generate,solve,experiment,report}``.

Exit codes: 0 on success, 1 when a cell hit a numerical failure, 2 for
usage, I/O and schema errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .bnb import solve_bnb
from .cutloop import SeparatorKind
from .experiment import (AVG_COLUMNS, DEFAULT_SEPARATORS, PROBLEMS, RAW_COLUMNS, ExperimentConfig, cell_seed,
                         format_table, make_instance, plot_gaps, read_csv, run_experiment, write_csv)
from .model import load_instance, save_instance
from .tree import complete_tree, save_tree

logger = logging.getLogger("treeclosure")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> List[int]:
    return [int(t) for t in text.split(",") if t]


def _float_list(text: str) -> List[float]:
    return [float(t) for t in text.split(",") if t]


def _kind_list(text: str) -> List[str]:
    return [SeparatorKind(t).value for t in text.split(",") if t]


def _flatten(values):
    return [v for chunk in values for v in chunk]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treeclosure", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def grid_args(sp):
        sp.add_argument("--problem", choices=sorted(PROBLEMS), default="mkp")
        sp.add_argument("--sizes", type=_int_list, nargs="+", default=[[10, 20, 40, 60]],
                        help="comma or space separated instance sizes")
        sp.add_argument("--instances", type=int, default=1, help="instances per size")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        sp.add_argument("--out-dir", type=Path, default=Path("results"))

    g = sub.add_parser("generate", help="write seeded instances as JSON")
    grid_args(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="branch-and-bound one instance and store its tree")
    s.add_argument("instance", type=Path)
    s.add_argument("--out", type=Path, help="tree JSON path (default: next to the instance)")
    s.add_argument("--node-limit", type=int)
    s.add_argument("--time-limit", type=float)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="run the perturbation grid and write raw and averaged CSV")
    grid_args(e)
    e.add_argument("--perturbations", type=int, default=5)
    e.add_argument("--depths", type=_float_list, nargs="+", default=[[0.25, 0.5, 0.75, 1.0]])
    e.add_argument("--separators", type=_kind_list, nargs="+", default=[list(DEFAULT_SEPARATORS)],
                   help="subset of Obj,Sti,CglpO1,CglpO2,CglpO3")
    e.add_argument("--with-o3", action="store_true", help="also run CglpO3")
    e.add_argument("--time-limit", type=float, default=600.0, help="seconds per cell")
    e.add_argument("--max-iters", type=int, default=10_000)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--emit-plots", action="store_true")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("report", help="print an averaged CSV as a table")
    r.add_argument("csv", type=Path)
    r.add_argument("--emit-plots", action="store_true")
    r.add_argument("--out-dir", type=Path, help="plot directory (default: next to the CSV)")
    r.set_defaults(func=cmd_report)
    return p


def cmd_generate(args) -> int:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for size in _flatten(args.sizes):
        for idx in range(args.instances):
            seed = cell_seed(args.seed, args.problem, size, idx, 0)
            inst = make_instance(args.problem, size, seed)
            path = args.out_dir / f"{inst.name}.json"
            save_instance(inst, path)
            print(path)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    tree = solve_bnb(inst, node_limit=args.node_limit, time_limit=args.time_limit)
    out = args.out or args.instance.with_name(args.instance.stem + "_tree.json")
    save_tree(complete_tree(tree), out)
    value = None if tree.incumbent_value is None else inst.to_original(tree.incumbent_value)
    print(json.dumps({"instance": inst.name, "incumbent": value, "nodes": len(tree), "complete": tree.complete,
                      "tree": str(out)}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    separators = _flatten(args.separators)
    if args.with_o3 and "CglpO3" not in separators:
        separators.append("CglpO3")
    config = ExperimentConfig(problem=args.problem, sizes=_flatten(args.sizes), perturbations=args.perturbations,
                              depth_ratios=_flatten(args.depths), separators=separators,
                              time_limit=args.time_limit, master_seed=args.seed, instances=args.instances,
                              workers=args.workers, max_iters=args.max_iters)
    result = run_experiment(config)
    raw_path = args.out_dir / f"{config.problem}_raw.csv"
    avg_path = args.out_dir / f"{config.problem}_averaged.csv"
    write_csv(raw_path, result.raw, RAW_COLUMNS)
    write_csv(avg_path, result.averaged, AVG_COLUMNS)
    print(format_table(result.averaged))
    print(f"raw rows: {raw_path}\naveraged rows: {avg_path}")
    if args.emit_plots:
        for path in plot_gaps(result.averaged, args.out_dir):
            print(path)
    if result.failures:
        print(f"{result.failures} cell(s) failed numerically", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_report(args) -> int:
    rows = read_csv(args.csv, AVG_COLUMNS)
    print(format_table(rows))
    if args.emit_plots:
        for path in plot_gaps(rows, args.out_dir or args.csv.parent):
            print(path)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"treeclosure: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
