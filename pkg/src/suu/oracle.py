"""Exact optimal expected makespan for tiny instances.

Dynamic programming over surviving-job subsets: for every subset ``S``
(in increasing size) and every machine-to-job assignment ``A`` over the
eligible jobs of ``S``,

    V_A(S) = (1 + sum_{S' < S} P_A(S -> S') V(S')) / (1 - P_A(S -> S))

and ``V(S)`` is the minimum over assignments that can make progress.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .model import Instance
from .schedulers import IDLE, Policy

PROGRESS_EPS = 1e-15


class OracleLimitError(ValueError):
    pass


@dataclass(frozen=True)
class OracleLimits:
    n_max: int = 4
    m_max: int = 3


@dataclass
class StateTable:
    m: int
    n: int
    values: dict[int, float] = field(default_factory=dict)
    best_assignment: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    def value(self, survivors) -> float:
        return self.values[mask_of(survivors)]

    def to_json(self) -> dict:
        return {
            "values": {str(s): v for s, v in sorted(self.values.items())},
            "assignments": {str(s): [None if a == IDLE else a for a in A]
                            for s, A in sorted(self.best_assignment.items())},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def mask_of(jobs) -> int:
    s = 0
    for j in jobs:
        s |= 1 << int(j)
    return s


def _eligible(S: int, n: int, preds) -> list[int]:
    return [j for j in range(n) if S >> j & 1 and not any(S >> p & 1 for p in preds[j])]


def exact_expected_makespan(inst: Instance, limits: OracleLimits = OracleLimits()) -> tuple[float, StateTable]:
    """``E[T_OPT]`` and the full optimal state table."""
    n, m = inst.n, inst.m
    if n > limits.n_max or m > limits.m_max:
        raise OracleLimitError(
            f"instance has n={n}, m={m}; oracle limits are n <= {limits.n_max}, m <= {limits.m_max} "
            f"(raise them with --n-max/--m-max)")
    q = inst.q
    useful = inst.ell > 0
    preds = inst.precedence.predecessors(n)
    table = StateTable(m, n)
    table.values[0] = 0.0
    table.best_assignment[0] = (IDLE,) * m
    for S in sorted(range(1, 1 << n), key=lambda s: (bin(s).count("1"), s)):
        elig = _eligible(S, n, preds)
        options = [[j for j in elig if useful[i, j]] + [IDLE] for i in range(m)]
        best, best_a = np.inf, None
        for A in itertools.product(*options):
            survive: dict[int, float] = {}
            for i, j in enumerate(A):
                if j != IDLE:
                    survive[j] = survive.get(j, 1.0) * q[i, j]
            if not survive:
                continue
            jobs = sorted(survive)
            p_stay = float(np.prod([survive[j] for j in jobs]))
            if 1.0 - p_stay < PROGRESS_EPS:
                continue
            acc = 1.0
            for done in itertools.product((False, True), repeat=len(jobs)):
                if not any(done):
                    continue
                p, S2 = 1.0, S
                for j, d in zip(jobs, done):
                    if d:
                        p *= 1.0 - survive[j]
                        S2 &= ~(1 << j)
                    else:
                        p *= survive[j]
                acc += p * table.values[S2]
            v = acc / (1.0 - p_stay)
            if v < best - 1e-12:
                best, best_a = v, A
        if best_a is None:
            raise ValueError(f"no assignment makes progress on survivor set {S:#b}")
        table.values[S] = float(best)
        table.best_assignment[S] = tuple(int(a) for a in best_a)
    return table.values[table.full], table


class OraclePolicy(Policy):
    """Replay the optimal assignment for the current survivor set."""

    name = "oracle"

    def __init__(self, inst: Instance, table: StateTable):
        super().__init__(inst)
        self.table = table

    def step(self, t, survivors):
        S = mask_of(survivors)
        if S not in self.table.best_assignment:
            raise KeyError(f"survivor set {sorted(survivors)} missing from the oracle table")
        return np.array(self.table.best_assignment[S], dtype=np.int64)


def oracle_policy(inst: Instance, table: StateTable) -> OraclePolicy:
    return OraclePolicy(inst, table)
