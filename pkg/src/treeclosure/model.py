"""Mixed-binary instances, random generators and objective perturbation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .lp import LpProblem, Relation


class Sense(str, Enum):
    MIN = "Min"
    MAX = "Max"


class DimensionMismatch(ValueError):
    pass


@dataclass(eq=False)
class MbpInstance:
    """A mixed-binary program stored in canonical form ``min c x, A x >= b``.

    ``c`` is always the minimization objective; for instances given as
    maximization problems it is the negated original objective, and
    :meth:`to_original` maps canonical objective values back.
    """

    name: str
    original_sense: Sense
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    binary: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.b.size != self.A.shape[0]:
            raise DimensionMismatch("row count of A does not match b")
        self.binary = np.asarray(sorted(set(int(i) for i in self.binary)), dtype=int)
        self.lb = np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.asarray(self.ub, dtype=float).ravel()
        if self.lb.size != n or self.ub.size != n:
            raise DimensionMismatch("bounds must have one entry per variable")
        if self.binary.size and (self.binary.min() < 0 or self.binary.max() >= n):
            raise DimensionMismatch("binary index out of range")
        self.lb[self.binary] = 0.0
        self.ub[self.binary] = 1.0
        self.original_sense = Sense(self.original_sense)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n_binary(self) -> int:
        return self.binary.size

    @property
    def continuous(self) -> np.ndarray:
        mask = np.ones(self.n, dtype=bool)
        mask[self.binary] = False
        return np.flatnonzero(mask)

    @property
    def o(self) -> int:
        """Number of finite continuous bounds."""
        cont = self.continuous
        return int(np.isfinite(self.lb[cont]).sum() + np.isfinite(self.ub[cont]).sum())

    @property
    def objective_original(self) -> np.ndarray:
        return self.c if self.original_sense is Sense.MIN else -self.c

    def to_original(self, value: float) -> float:
        return value if self.original_sense is Sense.MIN else -value

    def from_original(self, value: float) -> float:
        return self.to_original(value)

    def relaxation(self, lower=None, upper=None, objective=None) -> LpProblem:
        """Continuous relaxation, optionally with tightened bounds."""
        return LpProblem(
            self.c if objective is None else objective,
            self.A,
            [Relation.GE] * self.m,
            self.b,
            self.lb if lower is None else lower,
            self.ub if upper is None else upper,
        )

    def with_objective_original(self, objective, name: Optional[str] = None) -> "MbpInstance":
        objective = np.asarray(objective, dtype=float)
        c = objective if self.original_sense is Sense.MIN else -objective
        return replace(self, c=c, name=name or self.name)


def canonicalize(
    sense,
    objective,
    rows: Sequence,
    *,
    binary=None,
    bounds=None,
    name: str = "instance",
    seed: Optional[int] = None,
) -> MbpInstance:
    """Bring a problem into canonical ``min, A x >= b`` form.

    ``rows`` holds ``(coefficients, relation, rhs)`` triples; LE rows are
    negated and EQ rows are split into a GE pair. ``binary`` defaults to all
    variables and ``bounds`` (one ``(lb, ub)`` pair per variable) is only
    consulted for continuous ones.
    """
    sense = Sense(sense)
    objective = np.asarray(objective, dtype=float).ravel()
    n = objective.size
    A, b = [], []
    for coeffs, rel, rhs in rows:
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if coeffs.size != n:
            raise DimensionMismatch(f"row has {coeffs.size} coefficients, expected {n}")
        rel = Relation(rel)
        if rel in (Relation.GE, Relation.EQ):
            A.append(coeffs)
            b.append(float(rhs))
        if rel in (Relation.LE, Relation.EQ):
            A.append(-coeffs)
            b.append(-float(rhs))
    if binary is None:
        binary = range(n)
    if bounds is None:
        lb, ub = np.zeros(n), np.ones(n)
    else:
        if len(bounds) != n:
            raise DimensionMismatch("bounds must have one pair per variable")
        lb = np.array([bd[0] for bd in bounds], dtype=float)
        ub = np.array([bd[1] for bd in bounds], dtype=float)
    c = objective if sense is Sense.MIN else -objective
    return MbpInstance(
        name, sense, c, np.array(A).reshape(len(A), n), np.array(b), np.asarray(list(binary)), lb, ub, seed
    )


# -- random streams ---------------------------------------------------------


class StableRng:
    """Reproducible uniform and normal draws on top of a PCG64 stream.

    Uniforms take the top 53 bits of each 64-bit output; normals come from
    the Box-Muller transform. Both are defined here rather than through
    ``numpy.random.Generator`` methods so the streams cannot drift between
    library versions.
    """

    def __init__(self, *key: int):
        self._bits = np.random.PCG64(np.random.SeedSequence([int(k) for k in key]))

    def random(self, size) -> np.ndarray:
        raw = self._bits.random_raw(int(np.prod(size)))
        return ((raw >> np.uint64(11)).astype(float) * 2.0**-53).reshape(size)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return low + (high - low) * self.random(size)

    def normal(self, size) -> np.ndarray:
        count = int(np.prod(size))
        pairs = (count + 1) // 2
        u1 = 1.0 - self.random(pairs)  # in (0, 1]
        u2 = self.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([radius * np.cos(2 * np.pi * u2), radius * np.sin(2 * np.pi * u2)])
        return z[:count].reshape(size)


# -- generators -------------------------------------------------------------


@dataclass
class GeneratorConfig:
    n: int
    m: Optional[int] = None
    q: float = 0.2
    seed: int = 0
    literal_scp_max: bool = False

    def __post_init__(self):
        if self.m is None:
            self.m = max(1, self.n // 2)
        if self.n < 2 or self.m < 1 or not 0.0 < self.q < 1.0:
            raise ValueError(f"invalid generator config: n={self.n}, m={self.m}, q={self.q}")


_MKP_STREAM, _SCP_STREAM, _PERTURB_STREAM = 1, 2, 3


def generate_mkp(config: GeneratorConfig, name: Optional[str] = None) -> MbpInstance:
    """Multi-dimensional knapsack: ``max c x, A x <= 0.9 * A 1`` over binaries."""
    rng = StableRng(_MKP_STREAM, config.seed, config.n, config.m)
    c = rng.uniform(1.0, 2.0, config.n)
    A = rng.uniform(0.0, 1.0, (config.m, config.n))
    b = 0.9 * A.sum(axis=1)
    rows = [(A[i], Relation.LE, b[i]) for i in range(config.m)]
    return canonicalize(Sense.MAX, c, rows, name=name or f"mkp_n{config.n}", seed=config.seed)


def generate_scp(config: GeneratorConfig, name: Optional[str] = None) -> MbpInstance:
    """Set covering: ``min c x, A x >= 1`` with a Bernoulli(q) incidence matrix.

    Rows that come out empty are redrawn. ``config.literal_scp_max`` keeps
    the maximization sense instead, which makes the all-ones vector optimal.
    """
    rng = StableRng(_SCP_STREAM, config.seed, config.n, config.m)
    A = (rng.random((config.m, config.n)) < config.q).astype(float)
    for i in range(config.m):
        while not A[i].any():
            A[i] = (rng.random(config.n) < config.q).astype(float)
    c = rng.uniform(1.0, 2.0, config.n)
    sense = Sense.MAX if config.literal_scp_max else Sense.MIN
    rows = [(A[i], Relation.GE, 1.0) for i in range(config.m)]
    return canonicalize(sense, c, rows, name=name or f"scp_n{config.n}", seed=config.seed)


def perturb_objective(instance: MbpInstance, seed: int, *, name: Optional[str] = None) -> MbpInstance:
    """Add independent ``Normal(0, 0.1 |c_i|)`` noise to each original cost."""
    rng = StableRng(_PERTURB_STREAM, seed)
    c = instance.objective_original
    noisy = c + 0.1 * np.abs(c) * rng.normal(c.size)
    return instance.with_objective_original(noisy, name=name or f"{instance.name}_p{seed}")


# -- serialization ----------------------------------------------------------


def _fmt(x: float) -> str:
    if x is None or not math.isfinite(x):
        return "null"
    return format(float(x), ".17g")


def _dump(obj, indent: int = 0) -> str:
    """JSON text with every real written at 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_dump(v, indent + 2)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_dump(v) for v in obj) + "]"
        items = [f"{pad}  {_dump(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return _fmt(obj)


def dumps_json(obj) -> str:
    return _dump(obj) + "\n"


def instance_to_dict(instance: MbpInstance) -> dict:
    return {
        "name": instance.name,
        "sense": instance.original_sense.value,
        "n": instance.n,
        "objective": [float(v) for v in instance.objective_original],
        "rows": [
            {"coeffs": [float(v) for v in instance.A[i]], "rel": "GE", "rhs": float(instance.b[i])}
            for i in range(instance.m)
        ],
        "binary": [int(i) for i in instance.binary],
        "bounds": [{"lb": float(instance.lb[j]), "ub": float(instance.ub[j])} for j in range(instance.n)],
        "seed": instance.seed,
    }


def instance_from_dict(data: dict) -> MbpInstance:
    def num(v, default):
        return default if v is None else float(v)

    n = int(data["n"])
    objective = data["objective"]
    if len(objective) != n:
        raise DimensionMismatch("objective length does not match n")
    rows = [(r["coeffs"], r["rel"], r["rhs"]) for r in data["rows"]]
    bounds = [(num(bd["lb"], -np.inf), num(bd["ub"], np.inf)) for bd in data["bounds"]]
    return canonicalize(
        data["sense"], objective, rows, binary=data["binary"], bounds=bounds,
        name=data["name"], seed=data.get("seed"),
    )


def save_instance(instance: MbpInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_json(instance_to_dict(instance)))


def load_instance(path) -> MbpInstance:
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
