"""
Chains and forests
==================

With chain precedence a job may only run after its chain predecessor has
finished.  The chain scheduler rounds a second LP that also bounds every
chain's length, shifts each chain by a random delay so that few chains
want the same machine at once, and flattens the resulting supersteps into
ordinary steps.
"""

# %%
import numpy as np

from suu import SuuC, SuuT, decompose_forest, estimate, execute, generate_random_instance
from suu.policies import factory
from suu.simulator import trace_violations

inst = generate_random_instance(200, 20, "chains", seed=0, chain_length=10)
pol = SuuC(inst, seed=0)
print("LP2 t* =", round(pol.assignment.t_ref, 3), " reference length", pol.t_ref, " gamma", pol.gamma)
print("first delays", pol.meta["delays"][:10], " range 0 ..", pol.H)

trace = execute(pol, inst, seed=0)
print("makespan", trace.makespan, " c_max", pol.meta["c_max"], " bound", round(pol.bounds["congestion"], 2))
print("fallback", pol.meta["fallback"], " precedence problems", len(trace_violations(trace, inst)))

# %% [markdown]
# Congestion counts how many chains ask for the same machine inside one
# superstep.  The delays spread the chain starts over 0 .. H supersteps,
# which keeps the maximum small across seeds.

# %%
c = [SuuC(inst, seed=s) for s in range(30)]
for s, p in enumerate(c):
    execute(p, inst, seed=s, record=False)
cm = np.array([p.meta["c_max"] for p in c])
print("c_max over 30 seeds: mean", cm.mean().round(2), " max", cm.max())

# %% [markdown]
# Forests are cut into chains along heavy paths: each node continues the
# chain of its largest child.  Any root-to-leaf path crosses at most
# log2(n) light edges, so the chains fall into few blocks of independent
# chains, and the blocks run one after another.

# %%
forest = generate_random_instance(300, 6, "forest", seed=2, n_trees=3)
blocks = decompose_forest(forest.precedence, forest.n)
print("n =", forest.n, " blocks", len(blocks), " limit", int(np.log2(forest.n)) + 1)
for b, prec in enumerate(blocks):
    lengths = sorted((len(ch) for ch in prec.chains), reverse=True)
    print(f"block {b}: {len(lengths)} chains, longest {lengths[:5]}")

for name in ("trees", "sequential"):
    est = estimate(factory(name), forest, 50, seed=1)
    print(f"{name:10s} mean makespan {est.mean:8.2f} +- {est.stderr:.2f}")

tr = execute(SuuT(forest, 1), forest, seed=1)
print("trees trace problems:", len(trace_violations(tr, forest)))
