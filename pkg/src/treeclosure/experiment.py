"""Seeded shooting experiment: one tree per instance, cuts on perturbed copies.

For every (size, instance) the unperturbed instance is solved once; the
completed tree is truncated to each depth ratio and every separator runs a
cutting-plane loop on each perturbed objective. One raw row is written per
cell, then rows are averaged over perturbations (and instances).
"""

from __future__ import annotations

import csv
import logging
import math
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence

import numpy as np

from .bnb import BnbTree, solve_bnb
from .cutloop import DEFAULT_MAX_ITERS, DEFAULT_TIME_LIMIT, SeparatorKind, reference_optimum, run_cutting_plane
from .lp import NumericalFailure
from .model import GeneratorConfig, MbpInstance, generate_mkp, generate_scp, perturb_objective
from .tree import complete_tree, truncate_tree

logger = logging.getLogger(__name__)

PROBLEMS = {"mkp": (1, generate_mkp), "scp": (2, generate_scp)}
DEFAULT_SEPARATORS = ("Obj", "Sti", "CglpO2", "CglpO1")
RAW_COLUMNS = ("instance", "size", "instance_index", "perturbation", "seed", "approx", "depth",
               "gap", "time_s", "timed_out", "cuts", "iterations", "l_dual", "l_opt",
               "zero_optimum", "status")
AVG_COLUMNS = ("instance", "size", "approx", "depth", "gap", "time_s", "timeouts", "cuts")
STATUS_OK = "ok"


@dataclass
class ExperimentConfig:
    problem: str = "mkp"
    sizes: List[int] = field(default_factory=lambda: [10, 20, 40, 60])
    perturbations: int = 5
    depth_ratios: List[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0])
    separators: List[str] = field(default_factory=lambda: list(DEFAULT_SEPARATORS))
    time_limit: float = DEFAULT_TIME_LIMIT
    master_seed: int = 0
    instances: int = 1
    workers: int = 1
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = 1e-6
    q: float = 0.2

    def __post_init__(self):
        self.problem = self.problem.lower()
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {sorted(PROBLEMS)}")
        if not (self.sizes and self.depth_ratios and self.separators):
            raise ValueError("sizes, depth ratios and separators must be nonempty")
        if self.perturbations < 1 or self.instances < 1 or self.workers < 1:
            raise ValueError("perturbations, instances and workers must be positive")
        if any(not 0.0 < r <= 1.0 for r in self.depth_ratios):
            raise ValueError("depth ratios must lie in (0, 1]")
        self.separators = [SeparatorKind(s).value for s in self.separators]
        self.sizes = [int(s) for s in self.sizes]
        self.depth_ratios = [float(r) for r in self.depth_ratios]


def cell_seed(master_seed: int, problem: str, size: int, instance_index: int,
              perturbation_index: int) -> int:
    """32-bit seed from the cell coordinates; index 0 is the instance itself."""
    code = PROBLEMS[problem][0]
    ss = np.random.SeedSequence([master_seed, code, size, instance_index, perturbation_index])
    return int(ss.generate_state(1, np.uint32)[0])


def make_instance(problem: str, size: int, seed: int, q: float = 0.2) -> MbpInstance:
    gen = PROBLEMS[problem][1]
    return gen(GeneratorConfig(n=size, seed=seed, q=q), name=f"{problem}_n{size}_s{seed}")


@dataclass
class Cell:
    """Everything one cutting-plane run needs; owned by a single worker."""

    problem: str
    size: int
    instance_index: int
    perturbation: int
    seed: int
    kind: str
    depth: float
    tree: BnbTree
    original: MbpInstance
    perturbed: MbpInstance
    l_opt: float
    time_limit: float
    max_iters: int
    tol: float


def iter_cells(config: ExperimentConfig) -> Iterator[Cell]:
    """Cells in a fixed order: size, instance, perturbation, depth, separator."""
    for size in config.sizes:
        for idx in range(config.instances):
            inst = make_instance(config.problem, size, cell_seed(config.master_seed, config.problem, size, idx, 0),
                                 config.q)
            full = complete_tree(solve_bnb(inst))
            trees = {r: truncate_tree(full, r) for r in config.depth_ratios}
            logger.info("%s: %d nodes, depth %d", inst.name, len(full), full.d_max)
            for p in range(config.perturbations):
                seed = cell_seed(config.master_seed, config.problem, size, idx, p + 1)
                pert = perturb_objective(inst, seed)
                l_opt = reference_optimum(pert)
                for r in config.depth_ratios:
                    for kind in config.separators:
                        yield Cell(config.problem, size, idx, p, seed, kind, r, trees[r], inst, pert, l_opt,
                                   config.time_limit, config.max_iters, config.tol)


def run_cell(cell: Cell) -> Dict[str, object]:
    row = {"instance": cell.problem.upper(), "size": cell.size, "instance_index": cell.instance_index,
           "perturbation": cell.perturbation, "seed": cell.seed, "approx": cell.kind, "depth": cell.depth,
           "l_opt": cell.l_opt}
    try:
        res = run_cutting_plane(cell.perturbed, cell.tree, cell.kind, time_limit=cell.time_limit,
                                max_iters=cell.max_iters, tol=cell.tol, l_opt=cell.l_opt,
                                original=cell.original)
    except NumericalFailure as exc:
        logger.error("%s %s depth %s: %s", cell.perturbed.name, cell.kind, cell.depth, exc)
        row.update(gap=math.nan, time_s=math.nan, timed_out=0, cuts=0, iterations=0, l_dual=math.nan,
                   zero_optimum=0, status="NumericalFailure")
        return row
    row.update(gap=res.gap, time_s=res.wall_time_seconds, timed_out=int(res.timed_out), cuts=res.cuts_added,
               iterations=res.iterations, l_dual=res.l_dual, zero_optimum=int(res.zero_optimum),
               status=STATUS_OK)
    return row


@dataclass
class ExperimentResult:
    raw: List[Dict[str, object]]
    averaged: List[Dict[str, object]]

    @property
    def failures(self) -> int:
        return sum(r["status"] != STATUS_OK for r in self.raw)


def average_rows(raw: Iterable[Dict[str, object]]) -> List[Dict[str, object]]:
    """Mean gap, time and cuts plus the timeout count per (instance, size, approx, depth).

    Failed cells are left out of the means; groups keep first-seen order.
    """
    groups: "OrderedDict[tuple, list]" = OrderedDict()
    for r in raw:
        key = (r["instance"], int(r["size"]), r["approx"], float(r["depth"]))
        groups.setdefault(key, []).append(r)
    out = []
    for (inst, size, approx, depth), rows in groups.items():
        ok = [r for r in rows if r["status"] == STATUS_OK]
        mean = (lambda col: float(np.mean([float(r[col]) for r in ok])) if ok else math.nan)
        out.append({"instance": inst, "size": size, "approx": approx, "depth": depth, "gap": mean("gap"),
                    "time_s": mean("time_s"), "timeouts": sum(int(r["timed_out"]) for r in ok),
                    "cuts": mean("cuts")})
    sizes = list(OrderedDict.fromkeys((r["instance"], r["size"]) for r in out))
    approxes = list(OrderedDict.fromkeys(r["approx"] for r in out))
    return sorted(out, key=lambda r: (sizes.index((r["instance"], r["size"])), approxes.index(r["approx"]),
                                      r["depth"]))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    cells = iter_cells(config)
    if config.workers == 1:
        raw = [run_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(run_cell, cells))
    return ExperimentResult(raw, average_rows(raw))


def _cell_text(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, rows: Sequence[Dict[str, object]], columns: Sequence[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell_text(r[c]) for c in columns])


def read_csv(path, columns: Sequence[str] = AVG_COLUMNS) -> List[Dict[str, object]]:
    """Rows of a result CSV with numbers parsed.

    Raises:
        ValueError: the header does not contain ``columns``.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(columns) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        rows = []
        for r in reader:
            for k in ("size", "timeouts", "instance_index", "perturbation", "seed", "timed_out", "iterations",
                      "zero_optimum"):
                if k in r:
                    r[k] = int(r[k])
            for k in ("depth", "gap", "time_s", "cuts", "l_dual", "l_opt"):
                if k in r:
                    r[k] = float(r[k])
            rows.append(r)
    return rows


def format_table(rows: Sequence[Dict[str, object]]) -> str:
    """Text table with one block per size and one line per separator.

    Each depth contributes gap (percent), mean time, timeouts and mean cuts.
    """
    lines = []
    sizes = list(OrderedDict.fromkeys((r["instance"], r["size"]) for r in rows))
    for inst, size in sizes:
        block = [r for r in rows if r["instance"] == inst and r["size"] == size]
        depths = sorted({r["depth"] for r in block})
        head = f"{inst} n={size}".ljust(12) + "".join(f"| r={d:<4g} gap%     time   TO   cuts ".ljust(36)
                                                        for d in depths)
        lines.append(head)
        lines.append("-" * len(head))
        for approx in OrderedDict.fromkeys(r["approx"] for r in block):
            cells = {r["depth"]: r for r in block if r["approx"] == approx}
            line = approx.ljust(12)
            for d in depths:
                r = cells.get(d)
                if r is None:
                    line += "| -".ljust(36)
                    continue
                line += (f"| {100 * r['gap']:10.4f} {r['time_s']:8.2f} {r['timeouts']:4d} "
                         f"{r['cuts']:6.1f} ").ljust(36)
            lines.append(line)
        lines.append("")
    return "\n".join(lines)


def plot_gaps(rows: Sequence[Dict[str, object]], out_dir) -> List[Path]:
    """One PNG per (instance, size): mean gap against depth ratio per separator."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for inst, size in OrderedDict.fromkeys((r["instance"], r["size"]) for r in rows):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        block = [r for r in rows if r["instance"] == inst and r["size"] == size]
        for approx in OrderedDict.fromkeys(r["approx"] for r in block):
            pts = sorted((r["depth"], 100 * r["gap"]) for r in block if r["approx"] == approx)
            ax.plot(*zip(*pts), marker="o", label=approx)
        ax.set_xlabel("depth ratio")
        ax.set_ylabel("gap (%)")
        ax.set_title(f"{inst} n={size}")
        ax.legend()
        fig.tight_layout()
        path = out_dir / f"gap_{str(inst).lower()}_n{size}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
