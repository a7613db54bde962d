"""SUU instances: jobs, machines, failure probabilities and precedence.

An instance holds an ``m x n`` matrix ``q`` where ``q[i, j]`` is the
probability that job ``j`` does *not* complete when machine ``i`` runs it
for one step.  Schedulers mostly work with the log failures
``ell[i, j] = -log2 q[i, j]``, which add up across machines and steps.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

#: log failure substituted where q == 0 (certain success); exceeds every
#: work requirement the simulator can draw (at most 60).
LOG_CAP = 64.0

INDEPENDENT = "independent"
CHAINS = "chains"
FOREST = "forest"
DAG = "dag"
_KINDS = (INDEPENDENT, CHAINS, FOREST, DAG)


class InstanceFormatError(ValueError):
    """Raised when an instance file cannot be parsed."""


class InstanceValidationError(ValueError):
    """Raised when a parsed instance breaks a model invariant."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(f"[{rule}] {msg}" for rule, msg in report.violations))


class UnsupportedPrecedence(ValueError):
    """A scheduler was handed a precedence structure it cannot schedule."""


def log_failure(q: float, cap: float = LOG_CAP) -> float:
    """Return ``-log2 q``; 0 for ``q == 1`` and ``cap`` for ``q == 0``."""
    q = float(q)
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise ValueError(f"failure probability {q!r} outside [0, 1]")
    if q == 0.0:
        return cap
    if q == 1.0:
        return 0.0
    return -math.log2(q)


@dataclass(frozen=True)
class LogFailures:
    ell: np.ndarray
    cap: float = LOG_CAP
    capped: np.ndarray | None = None  # mask of entries where q == 0


def log_failures(q: np.ndarray, cap: float = LOG_CAP) -> LogFailures:
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("failure probabilities must lie in [0, 1]")
    zero = q == 0.0
    with np.errstate(divide="ignore"):
        ell = -np.log2(np.where(zero, 1.0, q))
    ell = np.where(zero, cap, ell)
    ell[q == 1.0] = 0.0
    ell.setflags(write=False)
    return LogFailures(ell=ell, cap=cap, capped=zero)


@dataclass(frozen=True)
class Precedence:
    """Precedence constraints among jobs.

    ``chains`` lists job sequences (earlier jobs precede later ones).
    ``edges`` lists ``(u, v)`` pairs meaning ``u`` must complete before
    ``v`` starts; for forests ``direction`` is ``"out"`` (every job has at
    most one predecessor) or ``"in"`` (at most one successor).
    """

    kind: str = INDEPENDENT
    chains: tuple[tuple[int, ...], ...] = ()
    edges: tuple[tuple[int, int], ...] = ()
    direction: str = "out"

    @classmethod
    def independent(cls) -> "Precedence":
        return cls()

    @classmethod
    def from_chains(cls, chains: Sequence[Sequence[int]]) -> "Precedence":
        return cls(kind=CHAINS, chains=tuple(tuple(int(j) for j in c) for c in chains))

    @classmethod
    def forest(cls, edges: Sequence[Sequence[int]], direction: str = "out") -> "Precedence":
        return cls(kind=FOREST, edges=tuple((int(u), int(v)) for u, v in edges), direction=direction)

    @classmethod
    def dag(cls, edges: Sequence[Sequence[int]]) -> "Precedence":
        return cls(kind=DAG, edges=tuple((int(u), int(v)) for u, v in edges))

    def edge_list(self) -> list[tuple[int, int]]:
        if self.kind == CHAINS:
            return [(c[k], c[k + 1]) for c in self.chains for k in range(len(c) - 1)]
        return list(self.edges)

    @lru_cache(maxsize=256)
    def predecessors(self, n: int) -> tuple[tuple[int, ...], ...]:
        """Immediate predecessors of every job."""
        preds: list[list[int]] = [[] for _ in range(n)]
        for u, v in self.edge_list():
            preds[v].append(u)
        return tuple(tuple(sorted(p)) for p in preds)


@dataclass(frozen=True, eq=False)
class Instance:
    q: np.ndarray
    precedence: Precedence = field(default_factory=Precedence)

    def __post_init__(self):
        q = np.array(self.q, dtype=float, copy=True)
        if q.ndim != 2:
            raise ValueError("q must be a 2-d matrix (machines x jobs)")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def m(self) -> int:
        return self.q.shape[0]

    @property
    def n(self) -> int:
        return self.q.shape[1]

    @property
    def logs(self) -> LogFailures:
        lf = self.__dict__.get("_logs")
        if lf is None:
            lf = log_failures(self.q)
            object.__setattr__(self, "_logs", lf)
        return lf

    @property
    def ell(self) -> np.ndarray:
        return self.logs.ell

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.precedence == other.precedence and np.array_equal(self.q, other.q)

    def __hash__(self):
        return hash((self.q.tobytes(), self.q.shape, self.precedence))

    def restrict(self, jobs: Sequence[int], precedence: Precedence | None = None) -> "Instance":
        """Sub-instance on ``jobs`` (renumbered 0..k-1 in the given order)."""
        return Instance(self.q[:, list(jobs)], precedence or Precedence())

    def to_dict(self) -> dict:
        p = self.precedence
        prec: dict = {"type": p.kind}
        if p.kind == CHAINS:
            prec["chains"] = [list(c) for c in p.chains]
        elif p.kind in (FOREST, DAG):
            prec["edges"] = [list(e) for e in p.edges]
            if p.kind == FOREST:
                prec["direction"] = p.direction
        return {"n": self.n, "m": self.m, "q": self.q.tolist(), "precedence": prec}

    def instance_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


# -- validation --------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, rule: str, message: str) -> None:
        self.violations.append((rule, message))


def _has_cycle(n: int, edges: list[tuple[int, int]]) -> bool:
    indeg = [0] * n
    out: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        out[u].append(v)
        indeg[v] += 1
    stack = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while stack:
        u = stack.pop()
        seen += 1
        for v in out[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                stack.append(v)
    return seen < n


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every model invariant and report all violations found."""
    rep = ValidationReport()
    q = inst.q
    n, m = inst.n, inst.m
    if n < 1:
        rep.add("size", "instance must have at least one job")
    if m < 1:
        rep.add("size", "instance must have at least one machine")
    bad = np.argwhere(~((q >= 0.0) & (q <= 1.0)))
    for i, j in bad:
        rep.add("q-range", f"q[{i}][{j}] = {q[i, j]!r} outside [0, 1]")
    if m >= 1:
        for j in range(n):
            if not np.any(q[:, j] < 1.0):
                rep.add("capable-machine", f"no capable machine for job {j} (all q = 1)")

    p = inst.precedence
    if p.kind not in _KINDS:
        rep.add("precedence-type", f"unknown precedence type {p.kind!r}")
        return rep
    if p.kind == CHAINS:
        seen: dict[int, int] = {}
        for c, chain in enumerate(p.chains):
            for j in chain:
                if not 0 <= j < n:
                    rep.add("job-id", f"chain {c} references unknown job {j}")
                elif j in seen:
                    rep.add("chains-disjoint", f"chains not disjoint: job {j} in chains {seen[j]} and {c}")
                else:
                    seen[j] = c
    elif p.kind in (FOREST, DAG):
        ok_ids = True
        for u, v in p.edges:
            if not (0 <= u < n and 0 <= v < n):
                rep.add("job-id", f"edge ({u}, {v}) references unknown job")
                ok_ids = False
            elif u == v:
                rep.add("acyclic", f"self-loop on job {u}")
                ok_ids = False
        if ok_ids and _has_cycle(n, list(p.edges)):
            rep.add("acyclic", "precedence graph has a cycle")
        if p.kind == FOREST and ok_ids:
            if p.direction not in ("out", "in"):
                rep.add("forest-direction", f"forest direction must be 'out' or 'in', got {p.direction!r}")
            else:
                deg = [0] * n
                for u, v in p.edges:
                    deg[v if p.direction == "out" else u] += 1
                what = "predecessor" if p.direction == "out" else "successor"
                for j, d in enumerate(deg):
                    if d > 1:
                        rep.add("forest-degree", f"job {j} has {d} {what}s in an {p.direction}-forest")
                if len(set(p.edges)) != len(p.edges):
                    rep.add("forest-degree", "duplicate forest edge")
    return rep


def check_instance(inst: Instance) -> Instance:
    rep = validate_instance(inst)
    if not rep.ok:
        raise InstanceValidationError(rep)
    return inst


# -- generators --------------------------------------------------------------

def generate_random_instance(
    n: int,
    m: int,
    shape: str = INDEPENDENT,
    q_low: float = 0.1,
    q_high: float = 0.9,
    seed: int = 0,
    *,
    chain_length: int | None = None,
    n_trees: int = 1,
    direction: str = "out",
    edge_prob: float = 0.2,
) -> Instance:
    """Random instance with ``q`` drawn uniformly from ``(q_low, q_high)``.

    ``shape`` is one of ``independent``, ``chains`` (jobs shuffled and cut
    into chains of ``chain_length``), ``forest`` (``n_trees`` random
    recursive trees) or ``dag`` (random edges along a shuffled order).
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if not 0.0 <= q_low <= q_high < 1.0:
        raise ValueError("need 0 <= q_low <= q_high < 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    q = rng.uniform(q_low, q_high, size=(m, n))
    if shape == INDEPENDENT:
        prec = Precedence()
    elif shape == CHAINS:
        if chain_length is None or chain_length < 1:
            raise ValueError("chains shape needs chain_length >= 1")
        perm = [int(j) for j in rng.permutation(n)]
        prec = Precedence.from_chains([perm[k:k + chain_length] for k in range(0, n, chain_length)])
    elif shape == FOREST:
        if not 1 <= n_trees <= n:
            raise ValueError("need 1 <= n_trees <= n")
        order = [int(j) for j in rng.permutation(n)]
        edges = []
        for pos in range(n_trees, n):
            parent = order[int(rng.integers(pos))]
            child = order[pos]
            edges.append((parent, child) if direction == "out" else (child, parent))
        prec = Precedence.forest(edges, direction)
    elif shape == DAG:
        order = [int(j) for j in rng.permutation(n)]
        edges = [(order[a], order[b]) for a in range(n) for b in range(a + 1, n)
                 if rng.random() < edge_prob]
        prec = Precedence.dag(edges)
    else:
        raise ValueError(f"unknown precedence shape {shape!r}")
    return check_instance(Instance(q, prec))


def lr_hard_groups(n: int, m: int) -> tuple[list[list[int]], list[int]]:
    """Job groups ``J_1..J_r`` and remainder ``R`` of the greedy-hard family."""
    if n < 4 or n & (n - 1):
        raise ValueError(f"n must be a power of 2 and at least 4, got {n}")
    if m < 1:
        raise ValueError("m must be positive")
    r = min(m, int(math.log2(n)) // 2)
    groups, start = [], 0
    for k in range(1, r + 1):
        size = n >> k
        groups.append(list(range(start, start + size)))
        start += size
    return groups, list(range(start, n))


def generate_lr_hard_instance(n: int, m: int) -> Instance:
    """Instance on which the success-probability greedy is a log factor off.

    With ``r = min(m, log2(n)/2)``, group ``J_k`` has ``n / 2^k`` jobs that
    succeed with probability ``1/2^i`` on machines ``i = k..r``; remainder
    jobs succeed surely on machines ``1..r``.  Machines are 1-indexed in
    that description and stored 0-indexed, so row ``i - 1`` is machine ``i``.
    Groups occupy consecutive job ids, ``J_1`` first and ``R`` last.
    """
    groups, rest = lr_hard_groups(n, m)
    r = len(groups)
    p = np.zeros((m, n))
    for k, jobs in enumerate(groups, start=1):
        for i in range(k, r + 1):
            p[i - 1, jobs] = 0.5 ** i
    p[:r, rest] = 1.0
    return check_instance(Instance(1.0 - p))


# -- serialization -----------------------------------------------------------

def _parse_precedence(obj, n: int) -> Precedence:
    if obj is None:
        return Precedence()
    if not isinstance(obj, dict):
        raise InstanceFormatError("field 'precedence' must be an object")
    kind = obj.get("type", INDEPENDENT)
    if kind not in _KINDS:
        raise InstanceFormatError(f"field 'precedence.type': unknown value {kind!r}")
    try:
        if kind == CHAINS:
            return Precedence.from_chains(obj.get("chains", []))
        if kind == FOREST:
            return Precedence.forest(obj.get("edges", []), obj.get("direction", "out"))
        if kind == DAG:
            return Precedence.dag(obj.get("edges", []))
    except (TypeError, ValueError) as exc:
        raise InstanceFormatError(f"field 'precedence': {exc}") from None
    return Precedence()


def instance_from_dict(obj) -> Instance:
    if not isinstance(obj, dict):
        raise InstanceFormatError("instance must be a JSON object")
    for key in ("n", "m", "q"):
        if key not in obj:
            raise InstanceFormatError(f"missing field {key!r}")
    n, m, rows = obj["n"], obj["m"], obj["q"]
    if not isinstance(n, int) or not isinstance(m, int):
        raise InstanceFormatError("fields 'n' and 'm' must be integers")
    if not isinstance(rows, list) or len(rows) != m:
        raise InstanceFormatError(f"field 'q' must have m = {m} rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise InstanceFormatError(f"field 'q' row {i} has length {got}, expected n = {n}")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InstanceFormatError(f"field 'q' row {i} column {j}: not a number: {v!r}")
    q = np.array(rows, dtype=float).reshape(m, n)
    return Instance(q, _parse_precedence(obj.get("precedence"), n))


def read_instance(path) -> Instance:
    """Load and validate an instance JSON file."""
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        inst = instance_from_dict(obj)
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from None
    return check_instance(inst)


def write_instance(inst: Instance, path) -> None:
    d = inst.to_dict()
    # one matrix row per line keeps fixtures hand-editable
    rows = ",\n    ".join(json.dumps(r) for r in d["q"])
    text = (
        "{\n"
        f'  "n": {d["n"]},\n'
        f'  "m": {d["m"]},\n'
        f'  "q": [\n    {rows}\n  ],\n'
        f'  "precedence": {json.dumps(d["precedence"])}\n'
        "}\n"
    )
    Path(path).write_text(text)
