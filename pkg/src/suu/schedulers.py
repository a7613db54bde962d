"""Schedules for independent jobs.

A :class:`Policy` is driven one timestep at a time by the simulator.  At
step ``t`` it sees the set of surviving jobs and returns, for every
machine, the job it runs (or ``IDLE``).  Policies never see the hidden
work thresholds; any emission naming a finished or ineligible job is
turned into idle time by the simulator.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .model import INDEPENDENT, Instance, UnsupportedPrecedence
from .rounding import IntegralAssignment, round_lp1

IDLE = -1


class Policy:
    """Base class: adaptive machine-to-job assignment, one step at a time."""

    name = "policy"

    def __init__(self, inst: Instance):
        self.inst = inst
        self.meta: dict = {}
        self._preds = inst.precedence.predecessors(inst.n)

    def step(self, t: int, survivors: frozenset) -> np.ndarray:
        raise NotImplementedError

    def oblivious_grid(self) -> np.ndarray | None:
        """For purely oblivious policies, the periodic ``(period, m)`` grid."""
        return None

    def eligible(self, survivors) -> list[int]:
        return sorted(j for j in survivors if not any(p in survivors for p in self._preds[j]))

    def idle(self) -> np.ndarray:
        return np.full(self.inst.m, IDLE, dtype=np.int64)


def require_independent(inst: Instance, who: str) -> None:
    if inst.precedence.kind != INDEPENDENT:
        raise UnsupportedPrecedence(f"{who} needs independent jobs, got {inst.precedence.kind} precedence")


# -- finite oblivious schedules ----------------------------------------------

@dataclass
class FiniteSchedule:
    length: int
    slots: list[list[tuple[int, int]]] = field(default_factory=list)  # per machine: (job, duration)

    def grid(self) -> np.ndarray:
        g = np.full((self.length, len(self.slots)), IDLE, dtype=np.int64)
        for i, row in enumerate(self.slots):
            pos = 0
            for j, dur in row:
                g[pos:pos + dur, i] = j
                pos += dur
        return g


def assignment_to_schedule(a: IntegralAssignment | np.ndarray) -> FiniteSchedule:
    """Lay each machine's assigned steps out back to back, jobs in id order."""
    x = a.x_hat if isinstance(a, IntegralAssignment) else np.asarray(a)
    slots = [[(int(j), int(x[i, j])) for j in range(x.shape[1]) if x[i, j] > 0] for i in range(x.shape[0])]
    length = int(x.sum(axis=1).max(initial=0))
    return FiniteSchedule(length, slots)


class RepeatSchedule(Policy):
    """Repeat one finite oblivious schedule forever."""

    name = "repeat"

    def __init__(self, inst: Instance, schedule: FiniteSchedule):
        super().__init__(inst)
        self.schedule = schedule
        self._grid = schedule.grid()

    def step(self, t, survivors):
        if self.schedule.length == 0:
            return self.idle()
        self.meta["repetitions"] = (t - 1) // self.schedule.length + 1
        return self._grid[(t - 1) % self.schedule.length]

    def oblivious_grid(self):
        return self._grid


def always_assign(inst: Instance, job: int = 0) -> RepeatSchedule:
    """Every machine works on ``job`` at every step."""
    return RepeatSchedule(inst, FiniteSchedule(1, [[(job, 1)] for _ in range(inst.m)]))


@lru_cache(maxsize=512)
def _cached_round(inst: Instance, jobs: frozenset, L: float) -> IntegralAssignment:
    return round_lp1(inst, jobs, L)


class SuuIObl(RepeatSchedule):
    """Oblivious schedule: round LP1 for all jobs at ``L = 1/2`` and repeat it."""

    name = "obl"

    def __init__(self, inst: Instance):
        require_independent(inst, "SUU-I-OBL")
        self.assignment = _cached_round(inst, frozenset(range(inst.n)), 0.5)
        super().__init__(inst, assignment_to_schedule(self.assignment))


# -- semioblivious rounds ----------------------------------------------------

@dataclass(frozen=True)
class RoundPlan:
    K: int
    tail: str  # "sequential" or "repeat"

    def target(self, k: int) -> float:
        return 0.5 if k == 1 else 2.0 ** (k - 2)


def round_count(n: int, m: int) -> int:
    """``ceil(log2 log2 min(m, n)) + 3``, at least 3."""
    mn = min(m, n)
    inner = math.ceil(math.log2(math.log2(mn))) if mn >= 4 else 0
    return max(3, inner + 3)


def round_plan(n: int, m: int) -> RoundPlan:
    return RoundPlan(K=round_count(n, m), tail="sequential" if n <= m else "repeat")


class SequentialAllMachines(Policy):
    """Run the lowest-id eligible job on every useful machine until it finishes."""

    name = "sequential"

    def __init__(self, inst: Instance, jobs: Sequence[int] | None = None):
        super().__init__(inst)
        self.jobs = frozenset(range(inst.n) if jobs is None else jobs)
        self._useful = inst.ell > 0

    def step(self, t, survivors):
        out = self.idle()
        todo = self.jobs & survivors
        for j in self.eligible(todo) if todo else ():
            if all(p not in survivors for p in self._preds[j]):
                out[self._useful[:, j]] = j
                break
        return out


class SuuISem(Policy):
    """Semioblivious rounds with doubling targets, then a terminal fallback.

    Round 1 targets log mass 1/2 for all jobs, round ``k >= 2`` targets
    ``2^(k-2)`` for the jobs still alive when it starts.  After ``K`` rounds
    the survivors are run one at a time on all machines (``n <= m``) or the
    round-``K`` schedule is repeated (``m < n``).
    """

    name = "sem"

    def __init__(self, inst: Instance, jobs: Sequence[int] | None = None):
        super().__init__(inst)
        require_independent(inst, "SUU-I-SEM")
        self.jobs = frozenset(range(inst.n) if jobs is None else jobs)
        self.plan = round_plan(len(self.jobs), inst.m)
        self.k = 0
        self._grid = None
        self._pos = 0
        self._tail = None
        self.meta.update(K=self.plan.K, rounds=[], tail=None)

    def _start_round(self, t, alive):
        self.k += 1
        L = self.plan.target(self.k)
        a = _cached_round(self.inst, alive, L)
        self._grid = assignment_to_schedule(a).grid()
        self._pos = 0
        self.meta["rounds"].append({"k": self.k, "start": t, "target": L, "jobs": len(alive),
                                    "length": len(self._grid), "t_star": a.t_ref})

    def step(self, t, survivors):
        alive = self.jobs & survivors
        if not alive:
            return self.idle()
        if self._tail is not None:
            return self._tail.step(t, survivors)
        # rows that only name finished jobs would be pure idle time; skip them
        while self._grid is not None and self._pos < len(self._grid) and \
                not any(j in alive for j in self._grid[self._pos].tolist() if j >= 0):
            self._pos += 1
        if self._grid is None or self._pos >= len(self._grid):
            if self.k < self.plan.K:
                self._start_round(t, alive)
            elif self.plan.tail == "sequential":
                self.meta["tail"] = {"mode": "sequential", "start": t}
                self._tail = SequentialAllMachines(self.inst, sorted(alive))
                return self._tail.step(t, survivors)
            else:
                if self.meta["tail"] is None:
                    self.meta["tail"] = {"mode": "repeat", "start": t}
                self._pos = 0
        row = self._grid[self._pos]
        self._pos += 1
        return row


# -- greedy baseline ---------------------------------------------------------

class LRGreedy(Policy):
    """Per step, scan (machine, job) pairs by nonincreasing success probability
    and give a free machine to a job unless that pushes the job's success
    sum above 1.  Ties go to the smaller (machine, job) pair."""

    name = "greedy"

    def __init__(self, inst: Instance):
        super().__init__(inst)
        require_independent(inst, "SUU-I-LR")
        self.p = 1.0 - inst.q
        self._cands = None
        self._seen = None
        self.meta["max_success_sum"] = 0.0

    def _refresh(self, survivors):
        m, n = self.inst.m, self.inst.n
        alive = np.zeros(n, dtype=bool)
        alive[list(survivors)] = True
        self._cands = []
        for i in range(m):
            js = np.nonzero((self.p[i] > 0) & alive)[0]
            js = js[np.lexsort((js, -self.p[i, js]))]
            self._cands.append(js.tolist())
        self._seen = survivors

    def step(self, t, survivors):
        if survivors is not self._seen:
            self._refresh(survivors)
        out = self.idle()
        p = self.p
        heap = [(-p[i, c[0]], i, 0) for i, c in enumerate(self._cands) if c]
        heapq.heapify(heap)
        sums: dict[int, float] = {}
        while heap:
            negp, i, k = heapq.heappop(heap)
            j = self._cands[i][k]
            s = sums.get(j, 0.0) - negp
            if s <= 1.0 + 1e-12:
                out[i] = j
                sums[j] = s
            elif k + 1 < len(self._cands[i]):
                nj = self._cands[i][k + 1]
                heapq.heappush(heap, (-p[i, nj], i, k + 1))
        if sums:
            self.meta["max_success_sum"] = max(self.meta["max_success_sum"], max(sums.values()))
        return out
