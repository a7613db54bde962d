"""
One job, one machine
====================

The smallest instance already shows how the simulator works.  A job that
fails each step with probability q = 1/2 finishes after a geometric number
of steps, so its expected makespan is 2.
"""

# %%
import numpy as np

from suu import Instance, estimate, exact_expected_makespan
from suu.schedulers import FiniteSchedule, RepeatSchedule, always_assign
from suu.simulator import WorkThresholds, draw_thresholds, execute, execute_reference_bernoulli

inst = Instance([[0.5]])
print("log failure ell =", inst.ell[0, 0])

# %% [markdown]
# Instead of flipping a coin every step, each job draws a hidden amount of
# work w = -log2(r) with r uniform on (0, 1).  The job completes once the
# log failures it has received add up to w.  With ell = 1 per step, the
# completion step is simply ceil(w).

# %%
th = draw_thresholds(inst, seed=0, trials=5)
print("work w:        ", np.round(th.w[:, 0], 3))
print("completion:    ", np.ceil(th.w[:, 0] - 1e-12).astype(int))

est = estimate(lambda i, s: always_assign(i), inst, 100_000, seed=1)
print(f"mean makespan {est.mean:.4f} +- {est.stderr:.4f} (p50 {est.p50}, p95 {est.p95})")

value, table = exact_expected_makespan(inst)
print("exact optimum:", value)

# %% [markdown]
# The hidden-work view and per-step coin flips give the same distribution
# over survivor histories.  A two-job schedule where the machines swap jobs
# every step is a compact check.

# %%
two = Instance([[0.5, 0.7], [0.6, 0.5]])
sched = FiniteSchedule(2, [[(0, 1), (1, 1)], [(1, 1), (0, 1)]])
g = np.random.default_rng(3)
batch = draw_thresholds(two, seed=2, trials=20_000)
work = [tuple(execute(RepeatSchedule(two, sched), two, thresholds=WorkThresholds(batch.r[k], batch.w[k]),
                      record=False).completed_at)
        for k in range(batch.w.shape[0])]
coins = [tuple(execute_reference_bernoulli(RepeatSchedule(two, sched), two, record=False,
                                           generator=g).completed_at)
         for _ in range(20_000)]
for label, hist in (("hidden work", work), ("coin flips", coins)):
    arr = np.array(hist)
    print(f"{label:12s} mean completion {arr.mean(axis=0).round(3)}  makespan {arr.max(axis=1).mean():.3f}")
