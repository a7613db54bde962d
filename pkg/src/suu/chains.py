"""Schedulers for chain and forest precedence.

SUU-C builds one adaptive schedule per chain from a rounded LP2
assignment: the chain's next unfinished job ``j`` gets a window of
``d_j`` supersteps in which machine ``i`` works on it for the first
``x_hat[i, j]`` of them.  The chain schedules run side by side from
random start delays; each superstep is flattened into as many real
timesteps as the busiest machine needs.  Long jobs become pauses and are
finished in batches by the semioblivious independent-jobs scheduler at
segment boundaries.  SUU-T cuts a forest into blocks of chains and runs
SUU-C on the blocks one after another.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import rng as rngs
from .lp import chain_list
from .model import CHAINS, FOREST, Instance, Precedence, UnsupportedPrecedence
from .rounding import IntegralAssignment, round_lp2
from .schedulers import IDLE, Policy, SequentialAllMachines, SuuISem

__all__ = [
    "apply_random_delays", "flatten_superstep", "coarsen_assignment", "Coarsened",
    "decompose_forest", "congestion_bound", "SubPolicy", "SuuC", "SuuT",
]


def apply_random_delays(n_chains: int, H: int, seed: int, *key) -> np.ndarray:
    """Independent uniform start delays in ``{0, ..., H}``, one per chain."""
    if H < 0:
        raise ValueError(f"H must be nonnegative, got {H}")
    g = rngs.stream(seed, rngs.DELAYS, *key)
    return g.integers(0, int(H) + 1, size=n_chains, dtype=np.int64)


def flatten_superstep(raw: Sequence[Sequence[tuple[int, int]]]) -> list[np.ndarray]:
    """Serialize one superstep into ``c(t)`` timesteps.

    ``raw[i]`` lists the ``(chain id, job)`` pairs emitted for machine ``i``.
    Each machine runs its jobs in ascending chain id order and idles once
    it runs out.
    """
    c = max((len(r) for r in raw), default=0)
    rows = [np.full(len(raw), IDLE, dtype=np.int64) for _ in range(c)]
    for i, r in enumerate(raw):
        for pos, (_, j) in enumerate(sorted(r)):
            rows[pos][i] = j
    return rows


@dataclass
class Coarsened:
    x: np.ndarray          # coarsened steps, multiples of ``quantum``
    remainder: np.ndarray  # steps rounded off, reinserted when the job runs
    quantum: int


def coarsen_assignment(a: IntegralAssignment | np.ndarray, t_ref: float, n: int, m: int) -> Coarsened:
    """Round every ``x_hat[i, j]`` down to a multiple of ``t_ref / (n m)``.

    The quantum is floored to an integer so coarsened assignments stay
    whole timesteps; a quantum of at most 1 leaves the assignment as is.
    """
    if t_ref <= 0:
        raise ValueError("t_ref must be positive")
    x = np.asarray(a.x_hat if isinstance(a, IntegralAssignment) else a, dtype=np.int64)
    quantum = int(math.floor(t_ref / (n * m)))
    if quantum <= 1:
        return Coarsened(x.copy(), np.zeros_like(x), 1)
    coarse = quantum * (x // quantum)
    return Coarsened(coarse, x - coarse, quantum)


def _forest_children(prec: Precedence, n: int) -> tuple[list[list[int]], list[int]]:
    """Children and parent in the tree orientation (roots on top)."""
    children: list[list[int]] = [[] for _ in range(n)]
    parent = [-1] * n
    for u, v in prec.edge_list():
        top, bottom = (u, v) if prec.direction == "out" else (v, u)
        children[top].append(bottom)
        parent[bottom] = top
    return children, parent


def decompose_forest(prec: Precedence, n: int) -> list[Precedence]:
    """Heavy-path decomposition of a forest into blocks of disjoint chains.

    Every node continues the chain of its largest child subtree (ties go
    to the smaller id); other children head new chains.  A chain's block
    is the number of chains above it on the way to its root.  For
    in-forests chains run bottom-up and the deepest block comes first, so
    in both directions a block only depends on earlier blocks.
    """
    if prec.kind != FOREST:
        raise UnsupportedPrecedence(f"forest decomposition needs forest precedence, got {prec.kind}")
    children, parent = _forest_children(prec, n)
    order: list[int] = []
    stack = [v for v in range(n) if parent[v] < 0]
    while stack:
        v = stack.pop()
        order.append(v)
        stack.extend(children[v])
    size = [1] * n
    for v in reversed(order):
        if parent[v] >= 0:
            size[parent[v]] += size[v]
    by_depth: dict[int, list[list[int]]] = {}
    heads = deque((v, 0) for v in range(n) if parent[v] < 0)
    while heads:
        v, depth = heads.popleft()
        chain = []
        while True:
            chain.append(v)
            kids = sorted(children[v], key=lambda c: (-size[c], c))
            if not kids:
                break
            heads.extend((c, depth + 1) for c in kids[1:])
            v = kids[0]
        by_depth.setdefault(depth, []).append(chain)
    depths = sorted(by_depth)
    if prec.direction == "in":
        depths.reverse()
        by_depth = {d: [c[::-1] for c in cs] for d, cs in by_depth.items()}
    return [Precedence.from_chains(sorted(by_depth[d])) for d in depths]


def congestion_bound(n: int, m: int) -> float:
    """``4 log2(n+m) / log2 log2(n+m)``, the congestion allowed before fallback."""
    x = math.log2(n + m)
    return 4.0 * x / math.log2(x) if x > 2 else 4.0 * max(x, 1.0)


class SubPolicy(Policy):
    """Run a policy built for ``inst.restrict(jobs)`` inside the full instance."""

    def __init__(self, inst: Instance, jobs: Sequence[int], inner: Policy):
        super().__init__(inst)
        self.jobs = list(jobs)
        self.inner = inner
        self.meta = inner.meta
        self.name = inner.name
        self._to_global = np.array(self.jobs + [IDLE], dtype=np.int64)
        self._seen = None
        self._local = frozenset()

    def done(self, survivors) -> bool:
        return not any(j in survivors for j in self.jobs)

    def step(self, t, survivors):
        if survivors is not self._seen:
            self._local = frozenset(k for k, j in enumerate(self.jobs) if j in survivors)
            self._seen = survivors
        return self._to_global[np.asarray(self.inner.step(t, self._local), dtype=np.int64)]


@lru_cache(maxsize=256)
def _cached_lp2(inst: Instance) -> IntegralAssignment:
    return round_lp2(inst)


@dataclass
class _ChainState:
    jobs: tuple[int, ...]
    delay: int
    cursor: int = 0
    win: int = 0
    pause_left: int = 0
    waiting: int = -1  # long job the chain is waiting on


class SuuC(Policy):
    """Chain scheduler with random delays, flattening and long-job batches.

    ``gamma``, the segment length and the coarsening quantum are derived
    from the integral reference length ``t_ref = max(load, longest chain)``
    of the rounded LP2 assignment.
    """

    name = "chains"

    def __init__(self, inst: Instance, seed: int = 0, *, delay_key: tuple = ()):
        super().__init__(inst)
        if inst.precedence.kind != CHAINS:
            raise UnsupportedPrecedence(f"SUU-C needs chains precedence, got {inst.precedence.kind}")
        n, m = inst.n, inst.m
        self.chains = chain_list(inst)
        a = _cached_lp2(inst)
        self.assignment = a
        d_full = a.d
        lengths = [int(sum(d_full[j] for j in c)) for c in self.chains]
        self.t_ref = max(a.load, max(lengths, default=0), 1)
        self.gamma = max(1, self.t_ref // math.ceil(math.log2(n + m))) if n + m > 1 else 1
        self.long = d_full > self.gamma
        co = coarsen_assignment(a, self.t_ref, n, m)
        self.x, self.rem = co.x, co.remainder
        self.d = np.maximum(1, self.x.max(axis=0, initial=0))
        self.H = int(self.x.sum(axis=1).max(initial=0))
        delays = apply_random_delays(len(self.chains), self.H, seed, *delay_key)
        self.state = [_ChainState(c, int(dl)) for c, dl in zip(self.chains, delays)]
        self.Z = max((sum(self.gamma if self.long[j] else int(self.d[j]) for j in c) for c in self.chains),
                     default=0)
        self.bounds = {
            "congestion": congestion_bound(n, m),
            "length": 8 * (self.H + self.Z),
            "load": 8 * int(math.ceil(6.0 * a.t_ref - 1e-12)),
        }
        self.s = 0
        self._boundary = 0
        self._queue: deque = deque()
        self._sem: SubPolicy | None = None
        self._fallback: Policy | None = None
        self._pauses: dict[int, list[int]] = {}
        self._load = np.zeros(m, dtype=np.int64)
        self.windows = np.zeros(n, dtype=np.int64)
        self.meta.update(
            gamma=self.gamma, t_ref=self.t_ref, t_star=a.t_ref, quantum=co.quantum, H=self.H, Z=self.Z,
            delays=delays.tolist(), long_jobs=np.nonzero(self.long)[0].tolist(), bounds=self.bounds,
            congestion=[], c_max=0, fallback=None, sem_batches=[], windows=self.windows,
        )

    # -- pseudoschedule ------------------------------------------------------

    def _emit_chain(self, k: int, st: _ChainState, survivors, raw, inserted) -> None:
        while st.cursor < len(st.jobs):
            if st.pause_left > 0:
                st.pause_left -= 1
                return
            if st.waiting >= 0:
                if st.waiting in survivors:
                    return
                st.waiting = -1
                st.cursor += 1
                st.win = 0
                continue
            j = st.jobs[st.cursor]
            if j not in survivors:
                st.cursor += 1
                st.win = 0
                continue
            if self.long[j]:
                st.waiting = j
                st.pause_left = self.gamma - 1
                self._pauses.setdefault((self.s - 1) // self.gamma, []).append(j)
                return
            if st.win == 0:
                self.windows[j] += 1
                r = self.rem[:, j]
                for pos in range(int(r.max(initial=0))):
                    inserted.append(np.where(r > pos, j, IDLE).astype(np.int64))
            for i in np.nonzero(self.x[:, j] > st.win)[0]:
                raw[i].append((k, j))
            st.win += 1
            if st.win >= self.d[j]:
                st.win = 0
            return

    def _abandon(self, reason: str, t: int, survivors) -> None:
        self.meta["fallback"] = {"reason": reason, "superstep": self.s, "t": t}
        self._queue.clear()
        self._fallback = SequentialAllMachines(self.inst, sorted(survivors))

    def _advance(self, t: int, survivors) -> None:
        """Run the next superstep, or start a long-job batch at a segment end."""
        if self.s and self.s % self.gamma == 0 and self._boundary < self.s:
            self._boundary = self.s
            batch = [j for j in self._pauses.pop(self.s // self.gamma - 1, []) if j in survivors]
            if batch:
                sub = self.inst.restrict(batch)
                self._sem = SubPolicy(self.inst, batch, SuuISem(sub))
                self.meta["sem_batches"].append({"superstep": self.s, "t": t, "jobs": batch})
                return
        if self.s >= self.bounds["length"]:
            self._abandon("length", t, survivors)
            return
        self.s += 1
        raw: list[list[tuple[int, int]]] = [[] for _ in range(self.inst.m)]
        inserted: list[np.ndarray] = []
        for k, st in enumerate(self.state):
            if self.s > st.delay:
                self._emit_chain(k, st, survivors, raw, inserted)
        c = max(len(r) for r in raw)
        if c:
            self.meta["congestion"].append(c)
            self.meta["c_max"] = max(self.meta["c_max"], c)
        if c > self.bounds["congestion"]:
            self._abandon("congestion", t, survivors)
            return
        rows = inserted + flatten_superstep(raw)
        for row in rows:
            self._load += row >= 0
        if self._load.max(initial=0) > self.bounds["load"]:
            self._abandon("load", t, survivors)
            return
        self._queue.extend(rows)

    def step(self, t, survivors):
        if not survivors:
            return self.idle()
        while True:
            if self._fallback is not None:
                return self._fallback.step(t, survivors)
            if self._queue:
                return self._queue.popleft()
            if self._sem is not None:
                if not self._sem.done(survivors):
                    return self._sem.step(t, survivors)
                self._sem = None
            self._advance(t, survivors)


class SuuT(Policy):
    """Forest scheduler: run SUU-C on each heavy-path block in turn."""

    name = "trees"

    def __init__(self, inst: Instance, seed: int = 0):
        super().__init__(inst)
        if inst.precedence.kind != FOREST:
            raise UnsupportedPrecedence(f"SUU-T needs forest precedence, got {inst.precedence.kind}")
        self.seed = seed
        self.blocks = decompose_forest(inst.precedence, inst.n)
        self.b = -1
        self._cur: SubPolicy | None = None
        self.meta.update(blocks=len(self.blocks), block_meta=[])

    def _start(self, b: int) -> SubPolicy:
        chains = self.blocks[b].chains
        jobs = [j for c in chains for j in c]
        local = {j: k for k, j in enumerate(jobs)}
        sub = self.inst.restrict(jobs, Precedence.from_chains([[local[j] for j in c] for c in chains]))
        pol = SubPolicy(self.inst, jobs, SuuC(sub, self.seed, delay_key=(b,)))
        self.meta["block_meta"].append(pol.meta)
        return pol

    def step(self, t, survivors):
        while self._cur is None or self._cur.done(survivors):
            if self.b + 1 >= len(self.blocks):
                return self.idle()
            self.b += 1
            self._cur = self._start(self.b)
        return self._cur.step(t, survivors)
