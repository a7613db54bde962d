"""Rounding fractional LP solutions to integral machine-step assignments.

Machines are grouped per job by the binary order of magnitude of their
clamped log failure.  Each group's total fractional assignment is scaled
by 6 and floored, and an integral max flow then spreads the group totals
back over individual machines without exceeding ``ceil(6 t*)`` load.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lp import OPTIMAL, clamp_log_failures, solve_lp1, solve_lp2
from .model import Instance

GROUP_EPS = 1e-12
INF = None  # marker passed to FlowNetwork.add_arc for uncapacitated arcs


class RoundingError(RuntimeError):
    pass


def floor_log2(x: float) -> int:
    """Exact ``floor(log2 x)`` for positive finite ``x``."""
    _, e = math.frexp(x)
    return e - 1


@dataclass
class GroupedAssignment:
    D_star: dict[tuple[int, int], float]
    rounded: dict[tuple[int, int], int]
    groups: dict[tuple[int, int], list[int]]  # (j, k) -> machines in the group


def group_assignments(x_star: np.ndarray, ellc: np.ndarray, *, slack: float = 0.0) -> GroupedAssignment:
    """Sum ``x*`` per job over machines whose clamped log failure lies in ``[2^k, 2^(k+1))``.

    ``rounded`` holds ``floor(6 D* - slack)``; groups whose total is
    negligible are left out.
    """
    m, n = x_star.shape
    D: dict[tuple[int, int], float] = {}
    members: dict[tuple[int, int], list[int]] = {}
    for j in range(n):
        for i in range(m):
            if ellc[i, j] <= 0:
                continue
            key = (j, floor_log2(float(ellc[i, j])))
            members.setdefault(key, []).append(i)
            if x_star[i, j] > 0:
                D[key] = D.get(key, 0.0) + float(x_star[i, j])
    D = {key: v for key, v in D.items() if v > GROUP_EPS}
    rounded = {key: int(math.floor(6.0 * v - slack)) for key, v in D.items()}
    rounded = {key: r for key, r in rounded.items() if r > 0}
    groups = {key: members[key] for key in D}
    return GroupedAssignment(D_star=D, rounded=rounded, groups=groups)


# -- max flow ----------------------------------------------------------------

@dataclass
class FlowNetwork:
    """Directed network with integral capacities (``None`` means infinite)."""

    nodes: list = field(default_factory=list)
    arcs: list[tuple[int, int, int | None]] = field(default_factory=list)
    source: int = 0
    sink: int = 1

    def node(self, label) -> int:
        idx = self.__dict__.setdefault("_idx", {})
        if label not in idx:
            idx[label] = len(self.nodes)
            self.nodes.append(label)
        return idx[label]

    def add_arc(self, u, v, cap: int | None) -> int:
        if cap is not None and (cap < 0 or int(cap) != cap):
            raise ValueError(f"capacity must be a nonnegative integer, got {cap!r}")
        self.arcs.append((self.node(u), self.node(v), None if cap is None else int(cap)))
        return len(self.arcs) - 1


def max_flow_integral(net: FlowNetwork) -> tuple[int, list[int]]:
    """Edmonds-Karp maximum ``source -> sink`` flow.

    Returns the flow value and the integral flow on every arc.  Infinite
    arcs get capacity one more than the sum of all finite capacities, which
    exceeds every finite cut, so they never bind.
    """
    big = sum(c for _, _, c in net.arcs if c is not None) + 1
    nn = len(net.nodes)
    # residual graph as paired half-arcs: 2a forward, 2a+1 backward
    head: list[int] = []
    cap: list[int] = []
    adj: list[list[int]] = [[] for _ in range(nn)]
    for u, v, c in net.arcs:
        adj[u].append(len(head))
        head.append(v)
        cap.append(big if c is None else c)
        adj[v].append(len(head))
        head.append(u)
        cap.append(0)
    s, t = net.source, net.sink
    value = 0
    if s == t:
        return 0, [0] * len(net.arcs)
    while True:
        prev = [-1] * nn
        prev[s] = -2
        dq = deque([s])
        while dq and prev[t] == -1:
            u = dq.popleft()
            for e in adj[u]:
                if cap[e] > 0 and prev[head[e]] == -1:
                    prev[head[e]] = e
                    dq.append(head[e])
        if prev[t] == -1:
            break
        push = None
        v = t
        while v != s:
            e = prev[v]
            push = cap[e] if push is None else min(push, cap[e])
            v = head[e ^ 1]
        v = t
        while v != s:
            e = prev[v]
            cap[e] -= push
            cap[e ^ 1] += push
            v = head[e ^ 1]
        value += push
    flows = [cap[2 * a + 1] for a in range(len(net.arcs))]
    return value, flows


# -- integral assignments ----------------------------------------------------

@dataclass
class IntegralAssignment:
    x_hat: np.ndarray  # (m, n) nonnegative integers
    t_ref: float
    target: float
    jobs: tuple[int, ...]
    d_star: np.ndarray | None = None

    @property
    def load(self) -> int:
        return int(self.x_hat.sum(axis=1).max(initial=0))

    @property
    def d(self) -> np.ndarray:
        """Per-job length ``max_i x_hat[i, j]`` (at least 1 for chain use)."""
        return np.maximum(1, self.x_hat.max(axis=0, initial=0))

    def mass(self, ellc: np.ndarray) -> np.ndarray:
        return (ellc * self.x_hat).sum(axis=0)


def _build_network(grouped: GroupedAssignment, m: int, sink_cap: int, arc_caps=None):
    net = FlowNetwork()
    net.node("s")
    net.node("w")
    src_arcs = {}
    job_arcs = []  # (arc index, i, j)
    for key in sorted(grouped.rounded):
        r = grouped.rounded[key]
        src_arcs[key] = net.add_arc("s", ("u",) + key, r)
        j = key[0]
        for i in grouped.groups[key]:
            c = None if arc_caps is None else int(arc_caps[j])
            job_arcs.append((net.add_arc(("u",) + key, ("v", i), c), i, j))
    for i in range(m):
        net.add_arc(("v", i), "w", sink_cap)
    return net, src_arcs, job_arcs


def _round(inst, x_star, t_star, ellc, target, jobs, arc_caps=None, d_star=None):
    m, n = inst.m, inst.n
    sink_cap = int(math.ceil(6.0 * t_star - 1e-12)) if t_star > 0 else 0
    for slack in (0.0, 1e-9):
        grouped = group_assignments(x_star, ellc, slack=slack)
        net, src_arcs, job_arcs = _build_network(grouped, m, sink_cap, arc_caps)
        value, flows = max_flow_integral(net)
        if all(flows[a] == grouped.rounded[key] for key, a in src_arcs.items()):
            break
    else:
        raise RoundingError("max flow does not saturate the group arcs")
    x_hat = np.zeros((m, n), dtype=np.int64)
    for a, i, j in job_arcs:
        x_hat[i, j] += flows[a]
    out = IntegralAssignment(x_hat=x_hat, t_ref=float(t_star), target=float(target),
                             jobs=tuple(jobs), d_star=d_star)
    mass = out.mass(ellc)
    short = [j for j in jobs if mass[j] < target - 1e-9]
    if short:
        raise RoundingError(f"rounded assignment leaves jobs {short[:5]} below target {target}")
    if out.load > sink_cap:
        raise RoundingError("rounded load exceeds ceil(6 t*)")
    return out


def round_lp1(inst: Instance, jobs: Iterable[int] | None = None, L: float = 0.5, *,
              solution=None) -> IntegralAssignment:
    """Integral assignment giving every job in ``jobs`` clamped log mass ``>= L``
    with load at most ``ceil(6 t*)``, where ``t*`` is the LP1 optimum."""
    jobs = sorted(set(range(inst.n) if jobs is None else (int(j) for j in jobs)))
    m, n = inst.m, inst.n
    if not jobs or L <= 0:
        return IntegralAssignment(np.zeros((m, n), dtype=np.int64), 0.0, float(L), tuple(jobs))
    sol = solution if solution is not None else solve_lp1(inst, jobs, L)
    if sol.status != OPTIMAL:
        raise RoundingError(f"LP1 is {sol.status}; the instance should always admit a solution")
    ellc = clamp_log_failures(inst.ell, L)
    x_star = np.where(ellc > 0, np.maximum(sol.x_star, 0.0), 0.0)
    return _round(inst, x_star, sol.t_star, ellc, L, jobs)


def round_lp2(inst: Instance, *, solution=None) -> IntegralAssignment:
    """Integral LP2 assignment: unit clamped mass per job, load at most
    ``ceil(6 t*)`` and ``x_hat[i, j] <= ceil(6 d*_j)``."""
    sol = solution if solution is not None else solve_lp2(inst)
    if sol.status != OPTIMAL:
        raise RoundingError(f"LP2 is {sol.status}; the instance should always admit a solution")
    ellc = clamp_log_failures(inst.ell, 1.0)
    x_star = np.where(ellc > 0, np.maximum(sol.x_star, 0.0), 0.0)
    caps = np.ceil(6.0 * sol.d_star - 1e-9).astype(np.int64)
    return _round(inst, x_star, sol.t_star, ellc, 1.0, range(inst.n), arc_caps=caps,
                  d_star=sol.d_star.copy())


def chain_lengths(a: IntegralAssignment, chains: Sequence[Sequence[int]]) -> list[int]:
    d = a.d
    return [int(sum(d[j] for j in c)) for c in chains]
