"""
Independent jobs: LP rounding, oblivious and semioblivious schedules
===================================================================

A linear program picks how many steps each machine spends on each job so
that every job receives enough log failure mass.  Rounding its solution
through a max-flow gives an integral assignment, which is then laid out
as a finite schedule.
"""

# %%
import numpy as np

from suu import (Instance, LRGreedy, SuuIObl, SuuISem, estimate, generate_lr_hard_instance,
                 generate_random_instance, offline_lower_bound, round_lp1, solve_lp1)
from suu.lp import clamp_log_failures
from suu.policies import factory
from suu.simulator import draw_thresholds

inst = generate_random_instance(6, 3, seed=4)
print("q =\n", inst.q.round(2))

sol = solve_lp1(inst, None, 0.5)
print(f"fractional length t* = {sol.t_star:.3f}")
print("x* =\n", sol.x_star.round(3))

a = round_lp1(inst, None, 0.5, solution=sol)
print("rounded steps x_hat =\n", a.x_hat)
print("load", a.load, "<= ceil(6 t*) =", int(np.ceil(6 * sol.t_star)))
print("mass per job", a.mass(clamp_log_failures(inst.ell, 0.5)).round(2))

# %% [markdown]
# The oblivious policy repeats that schedule until every job is done.  The
# semioblivious policy re-solves the LP for the survivors at the start of
# each round and doubles the mass target from round to round.  Both are
# compared against a per-trial offline bound: the best fractional schedule
# that already knows the hidden work of each job.

# %%
def compare(inst, names, trials=300, seed=0):
    batch = draw_thresholds(inst, seed, trials)
    offline = np.mean([offline_lower_bound(inst, batch.w[k]) for k in range(trials)])
    out = {}
    for name in names:
        est = estimate(factory(name), inst, trials, seed)
        out[name] = est.mean / offline
    return offline, out


for n in (8, 64, 256):
    inst = generate_random_instance(n, 8, seed=n)
    offline, ratios = compare(inst, ["obl", "sem", "greedy"])
    print(f"n={n:4d}  offline {offline:7.2f}  " + "  ".join(f"{k} {v:5.2f}" for k, v in ratios.items()))

# %% [markdown]
# The greedy baseline maximizes the success probability of each step.  On
# the hard family the jobs come in groups of shrinking size and greedy
# wastes machines on the large groups first, so its ratio keeps growing
# with n while the semioblivious ratio does not.

# %%
for n in (64, 256, 1024):
    inst = generate_lr_hard_instance(n, 8)
    offline, ratios = compare(inst, ["greedy", "sem"], trials=30, seed=1)
    print(f"LR-hard n={n:5d}  greedy {ratios['greedy']:5.2f}  sem {ratios['sem']:5.2f}")
