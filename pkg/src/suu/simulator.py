"""Executing policies under deferred decisions.

Each job ``j`` gets a hidden work requirement ``w_j = -log2 r_j`` with
``r_j`` uniform on (0, 1); it completes at the first step where the log
mass it has accrued reaches ``w_j``.  Over any history this has the same
distribution as flipping an independent coin per machine and step, which
:func:`execute_reference_bernoulli` does directly for cross-checking.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngs
from .lp import OPTIMAL, LinearProgram, solve_lp
from .model import INDEPENDENT, Instance, UnsupportedPrecedence
from .schedulers import IDLE, Policy

MASS_TOL = 1e-12
MIN_R = 2.0 ** -60
STEP_CAP = 10_000_000


class RunawayPolicy(RuntimeError):
    pass


class TrialError(RuntimeError):
    def __init__(self, trial: int, exc: Exception):
        self.trial = trial
        super().__init__(f"trial {trial}: {type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class WorkThresholds:
    r: np.ndarray
    w: np.ndarray


def thresholds_from_r(r) -> WorkThresholds:
    r = np.maximum(np.asarray(r, dtype=float), MIN_R)
    return WorkThresholds(r=r, w=-np.log2(r))


def draw_thresholds(inst_or_n, seed: int, trials: int | None = None) -> WorkThresholds:
    """Uniform ``r_j`` from the outcome stream of ``seed``; ``w_j = -log2 r_j``.

    With ``trials`` set, returns a ``(trials, n)`` batch whose rows are the
    per-trial thresholds used by :func:`estimate`.
    """
    n = inst_or_n.n if isinstance(inst_or_n, Instance) else int(inst_or_n)
    g = rngs.stream(seed, rngs.OUTCOMES)
    r = g.random(n if trials is None else (trials, n))
    while np.any(r == 0.0):
        zero = r == 0.0
        r[zero] = g.random(int(zero.sum()))
    return thresholds_from_r(r)


@dataclass
class ExecutionTrace:
    completed_at: np.ndarray
    makespan: int
    accrued: np.ndarray
    steps: list[np.ndarray] | None = None
    meta: dict = field(default_factory=dict)

    def survivors_at(self, t: int) -> frozenset:
        """Jobs still incomplete at the start of step ``t``."""
        return frozenset(int(j) for j in np.nonzero(self.completed_at >= t)[0])

    def to_jsonl(self) -> str:
        lines = []
        done = {}
        for j, c in enumerate(self.completed_at.tolist()):
            done.setdefault(int(c), []).append(j)
        for t, row in enumerate(self.steps or [], start=1):
            lines.append(json.dumps({"t": t, "assign": [None if a == IDLE else int(a) for a in row],
                                     "completed": done.get(t, [])}))
        return "\n".join(lines) + ("\n" if lines else "")

    def summary(self) -> dict:
        return {"completed_at": [int(c) for c in self.completed_at], "makespan": int(self.makespan),
                "meta": _jsonable(self.meta)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (frozenset, set)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _step_mass(ell: np.ndarray, row: np.ndarray, n: int) -> np.ndarray:
    on = np.nonzero(row >= 0)[0]
    return np.bincount(row[on], weights=ell[on, row[on]], minlength=n)


_ROW_CACHE_MAX = 4096


def _row_info(inst: Instance, row: tuple):
    """Per-row ``(job, mass) pairs, jobs on, q on``, memoized per instance.

    A step only touches the jobs named in its row, so the simulator keeps
    per-job state in plain lists and updates at most ``m`` entries.
    Oblivious and round-based policies repeat rows, so most lookups hit.
    """
    cache = inst.__dict__.get("_sim_rows")
    if cache is None:
        cache = {}
        object.__setattr__(inst, "_sim_rows", cache)
    info = cache.get(row)
    if info is None:
        if len(cache) >= _ROW_CACHE_MAX:
            cache.clear()
        ell, q = inst.ell, inst.q
        mass: dict[int, float] = {}
        jobs, q_on = [], []
        for i, j in enumerate(row):
            if j >= 0:
                # same summation order as _step_mass
                mass[j] = mass.get(j, 0.0) + float(ell[i, j])
                jobs.append(j)
                q_on.append(float(q[i, j]))
        info = (list(mass.items()), jobs, q_on)
        cache[row] = info
    return info


def _structure(inst: Instance):
    cached = inst.__dict__.get("_sim_structure")
    if cached is None:
        n = inst.n
        preds = inst.precedence.predecessors(n)
        succs: list[list[int]] = [[] for _ in range(n)]
        for v, ps in enumerate(preds):
            for u in ps:
                succs[u].append(v)
        cached = ([len(p) for p in preds], succs)
        object.__setattr__(inst, "_sim_structure", cached)
    return cached


def _run(policy: Policy, inst: Instance, outcome, record: bool, step_cap: int):
    n = inst.n
    n_preds, succs = _structure(inst)
    waiting = list(n_preds)
    # usable[j]: job j is alive and all its predecessors are done; the
    # trailing False entry absorbs IDLE (-1) lookups
    usable = [w == 0 for w in waiting] + [False]
    alive = [True] * n
    accrued = [0.0] * n
    completed = [0] * n
    survivors = frozenset(range(n))
    steps = [] if record else None
    t = 0
    remaining = n
    blocked_emissions = 0
    while remaining:
        t += 1
        if t > step_cap:
            raise RunawayPolicy(f"policy {policy.name!r} exceeded {step_cap} steps")
        raw = policy.step(t, survivors)
        row = tuple(raw.tolist() if isinstance(raw, np.ndarray) else (int(j) for j in raw))
        if not all(usable[j] for j in row):
            blocked_emissions += sum(1 for j in row if j >= 0 and not usable[j] and alive[j])
            row = tuple(j if usable[j] else IDLE for j in row)
        if record:
            steps.append(np.array(row, dtype=np.int64))
        done = outcome(row, accrued)
        if done:
            for j in done:
                alive[j] = False
                usable[j] = False
                completed[j] = t
                for v in succs[j]:
                    waiting[v] -= 1
                    if waiting[v] == 0:
                        usable[v] = True
            remaining -= len(done)
            survivors = survivors.difference(done)
    meta = dict(policy.meta)
    meta["policy"] = policy.name
    meta["blocked_emissions"] = blocked_emissions
    return ExecutionTrace(completed_at=np.array(completed, dtype=np.int64), makespan=t,
                          accrued=np.array(accrued), steps=steps, meta=meta)


def trace_violations(trace: ExecutionTrace, inst: Instance) -> list[str]:
    """Precedence and capacity problems in a recorded trace.

    Checks that no job is worked on before all its predecessors complete,
    that completions respect precedence, that rows name at most one job
    per machine, and that the policy never asked for a blocked job.
    """
    if trace.steps is None:
        raise ValueError("trace was run with record=False")
    out = []
    preds = inst.precedence.predecessors(inst.n)
    done = trace.completed_at
    for t, row in enumerate(trace.steps, start=1):
        row = np.asarray(row)
        if row.shape != (inst.m,):
            out.append(f"step {t}: row shape {row.shape} != ({inst.m},)")
        for j in set(row[row >= 0].tolist()):
            late = [p for p in preds[j] if done[p] >= t]
            if late:
                out.append(f"step {t}: job {j} runs before predecessors {late} complete")
    for j in range(inst.n):
        for p in preds[j]:
            if done[p] >= done[j]:
                out.append(f"job {j} completes at {done[j]}, predecessor {p} at {done[p]}")
    if trace.meta.get("blocked_emissions", 0):
        out.append(f"policy emitted {trace.meta['blocked_emissions']} blocked assignments")
    return out


def execute(policy: Policy, inst: Instance, seed: int = 0, *, thresholds: WorkThresholds | None = None,
            record: bool = True, step_cap: int = STEP_CAP) -> ExecutionTrace:
    """Run ``policy`` to completion under deferred-decision semantics.

    ``thresholds`` overrides the work requirements otherwise drawn from
    ``seed`` (used for paired comparisons across policies).
    """
    th = thresholds if thresholds is not None else draw_thresholds(inst, seed)
    w = (np.asarray(th.w, dtype=float) - MASS_TOL).tolist()

    def outcome(row, accrued):
        done = []
        for j, mu in _row_info(inst, row)[0]:
            acc = accrued[j] = accrued[j] + mu
            if acc >= w[j]:
                done.append(j)
        return done

    tr = _run(policy, inst, outcome, record, step_cap)
    tr.meta["seed"] = seed
    return tr


def execute_reference_bernoulli(policy: Policy, inst: Instance, seed: int = 0, *, record: bool = True,
                                step_cap: int = STEP_CAP,
                                generator: np.random.Generator | None = None) -> ExecutionTrace:
    """Run ``policy`` with one independent failure coin per assigned machine
    and step; a job completes as soon as any of its coins succeeds.

    Coins come from the outcome stream of ``seed`` unless an explicit
    ``generator`` is supplied (handy for many back-to-back trials).
    """
    g = generator if generator is not None else rngs.stream(seed, rngs.OUTCOMES)

    def outcome(row, accrued):
        pairs, jobs, q_on = _row_info(inst, row)
        for j, mu in pairs:
            accrued[j] += mu
        if not jobs:
            return ()
        coins = g.random(len(jobs)).tolist()
        return sorted({j for j, c, qq in zip(jobs, coins, q_on) if c >= qq})

    tr = _run(policy, inst, outcome, record, step_cap)
    tr.meta["seed"] = seed
    return tr


def oblivious_completions(grid: np.ndarray, inst: Instance, w: np.ndarray) -> np.ndarray:
    """Completion steps for a repeated oblivious grid, for a batch of thresholds.

    Under an oblivious schedule a job's accrued mass never depends on the
    other jobs, so completion of ``j`` is the first step at which the
    running mass reaches ``w_j``.  ``w`` has shape ``(trials, n)``.
    Masses accumulate one step at a time exactly as in :func:`execute`.
    """
    n, ell = inst.n, inst.ell
    period = grid.shape[0]
    per_step = np.stack([_step_mass(ell, row, n) for row in grid]) if period else np.zeros((0, n))
    if period == 0 or np.any(per_step.sum(axis=0) <= 0):
        raise RunawayPolicy("oblivious schedule never serves some job")
    target = np.asarray(w, dtype=float) - MASS_TOL
    out = np.zeros(target.shape, dtype=np.int64)
    todo = np.ones(target.shape, dtype=bool)
    base = np.zeros(n)
    offset = 0
    while np.any(todo):
        cum = np.empty((period, n))
        acc = base
        for s in range(period):
            acc = acc + per_step[s]
            cum[s] = acc
        for j in range(n):
            sel = todo[:, j] & (target[:, j] <= cum[-1, j])
            if np.any(sel):
                out[sel, j] = offset + np.searchsorted(cum[:, j], target[sel, j], side="left") + 1
                todo[sel, j] = False
        base = cum[-1]
        offset += period
        if offset > STEP_CAP:
            raise RunawayPolicy("oblivious schedule exceeded the step cap")
    return out


# -- Monte Carlo -------------------------------------------------------------

@dataclass
class MakespanEstimate:
    mean: float
    stderr: float
    trials: int
    p50: float
    p95: float
    makespans: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_samples(cls, xs) -> "MakespanEstimate":
        xs = np.asarray(xs, dtype=float)
        k = xs.size
        if k < 1:
            raise ValueError("need at least one trial")
        mean = math.fsum(xs) / k
        var = math.fsum((xs - mean) ** 2) / (k - 1) if k > 1 else 0.0
        return cls(mean=mean, stderr=math.sqrt(var / k), trials=k,
                   p50=float(np.quantile(xs, 0.5)), p95=float(np.quantile(xs, 0.95)), makespans=xs)

    def csv_row(self, instance_id: str, policy: str) -> dict:
        return {"instance_id": instance_id, "policy": policy, "trials": self.trials,
                "mean": self.mean, "stderr": self.stderr, "p50": self.p50, "p95": self.p95}


PolicyFactory = Callable[[Instance, int], Policy]


def _one_trial(factory, inst, seed, k, th):
    try:
        pol = factory(inst, rngs.derive_seed(seed, rngs.DELAYS, k))
        return execute(pol, inst, seed, thresholds=th, record=False).makespan
    except Exception as exc:  # noqa: BLE001 - re-raised with the trial index
        raise TrialError(k, exc) from exc


def estimate(factory: PolicyFactory, inst: Instance, trials: int, seed: int, *, workers: int = 1,
             fast_oblivious: bool = True) -> MakespanEstimate:
    """Mean makespan over ``trials`` independent executions.

    Trial ``k`` takes row ``k`` of the threshold batch drawn from ``seed``,
    so policies estimated with the same master seed see identical
    thresholds trial by trial.  ``factory(inst, s)`` builds a fresh policy,
    ``s`` seeding any internal randomness (chain delays).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if inst.n == 0:
        return MakespanEstimate.from_samples(np.zeros(trials, dtype=np.int64))
    batch = draw_thresholds(inst, seed, trials)
    w = batch.w
    if fast_oblivious:
        grid = factory(inst, rngs.derive_seed(seed, rngs.DELAYS, 0)).oblivious_grid()
        if grid is not None:
            done = oblivious_completions(grid, inst, w)
            return MakespanEstimate.from_samples(done.max(axis=1, initial=0))
    args = ([factory] * trials, [inst] * trials, [seed] * trials, range(trials),
            [WorkThresholds(r=batch.r[k], w=w[k]) for k in range(trials)])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            spans = list(ex.map(_one_trial, *args))
    else:
        spans = list(map(_one_trial, *args))
    return MakespanEstimate.from_samples(spans)


# -- offline lower bound -----------------------------------------------------

def offline_lower_bound(inst: Instance, th: WorkThresholds | np.ndarray, *, method: str = "auto") -> float:
    """Fractional lower bound on the makespan of a clairvoyant schedule.

    Optimum of ``min t`` s.t. ``sum_i ell_ij x_ij >= w_j`` and
    ``sum_j x_ij <= t`` with ``x >= 0``; unclamped log failures.
    """
    if inst.precedence.kind != INDEPENDENT:
        raise UnsupportedPrecedence("offline lower bound is defined for independent jobs")
    w = th.w if isinstance(th, WorkThresholds) else np.asarray(th, dtype=float)
    jobs = [j for j in range(inst.n) if w[j] > 0]
    if not jobs:
        return 0.0
    ell = inst.ell
    pairs = [(i, j) for j in jobs for i in range(inst.m) if ell[i, j] > 0]
    nv = len(pairs) + 1
    obj = np.zeros(nv)
    obj[-1] = 1.0
    lp = LinearProgram(obj, m=inst.m, n=inst.n)
    rows_j = {j: np.zeros(nv) for j in jobs}
    rows_i = [np.zeros(nv) for _ in range(inst.m)]
    for k, (i, j) in enumerate(pairs):
        rows_j[j][k] = ell[i, j]
        rows_i[i][k] = 1.0
    for j in jobs:
        lp.add(rows_j[j], ">=", float(w[j]))
    for row in rows_i:
        row[-1] = -1.0
        lp.add(row, "<=", 0.0)
    sol = solve_lp(lp, method=method)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"offline bound LP is {sol.status}")
    return float(sol.values[-1])


# -- exports -----------------------------------------------------------------

ESTIMATE_COLUMNS = ["instance_id", "policy", "trials", "mean", "stderr", "p50", "p95"]


def estimate_csv(rows: list[dict], columns=ESTIMATE_COLUMNS) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    wr.writeheader()
    for r in rows:
        wr.writerow(r)
    return buf.getvalue()
