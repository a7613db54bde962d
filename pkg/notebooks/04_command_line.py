"""
The command line
================

Everything above is also reachable through the ``suu`` command.  This
script drives it in a scratch directory; the same argument lists work in
a shell.
"""

# %%
import json
import tempfile
from pathlib import Path

from suu.cli import main

work = Path(tempfile.mkdtemp(prefix="suu-demo-"))
print("working in", work)


def suu(*args):
    argv = [str(a) for a in args]
    print("$ suu", " ".join(argv))
    code = main(argv)
    print(f"[exit {code}]\n")
    return code


# %%
suu("gen", "--random", "-n", 3, "-m", 2, "--seed", 1, "-o", work / "tiny.json")
suu("gen", "--chains", "4x5", "-m", 3, "--seed", 1, "-o", work / "chains.json")
suu("gen", "--lr-hard", "-n", 64, "-m", 4, "-o", work / "hard.json")

# %% [markdown]
# ``run`` estimates one policy and, with ``--out``, records trial 0 in
# full.  Asking for a policy that does not fit the precedence type exits
# with code 3.

# %%
suu("run", "--policy", "chains", "--trials", 200, "--seed", 9, "--out", work / "run", work / "chains.json")
print((work / "run" / "trace.jsonl").read_text().splitlines()[0])
suu("run", "--policy", "obl", "--seed", 9, work / "chains.json")

# %% [markdown]
# ``compare`` gives every policy the same hidden work per trial and
# reports ratios against the LP bound, the offline bound and, for tiny
# instances, the exact optimum.

# %%
suu("compare", "--policies", "obl,sem,greedy", "--oracle", "--trials", 2000, "--seed", 3,
    "-o", work / "tiny.csv", work / "tiny.json")
suu("compare", "--policies", "greedy,sem", "--trials", 50, "--seed", 3, "--format", "json",
    "-o", work / "hard.json.out", work / "hard.json")
suu("report", work / "tiny.csv", work / "hard.json.out", "--summary")

# %%
suu("oracle", work / "tiny.json", "--out", work / "table.json")
table = json.loads((work / "table.json").read_text())
print("optimal first assignment:", table["assignments"][str(2 ** 3 - 1)])
suu("oracle", work / "chains.json")
