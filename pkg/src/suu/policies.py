"""Policy registry: names, precedence compatibility and picklable factories."""
from __future__ import annotations

from functools import lru_cache, partial

from .chains import SuuC, SuuT
from .model import CHAINS, FOREST, INDEPENDENT, Instance, UnsupportedPrecedence
from .oracle import OracleLimits, OraclePolicy, StateTable, exact_expected_makespan
from .schedulers import LRGreedy, Policy, SequentialAllMachines, SuuIObl, SuuISem

# policy name -> precedence kinds it accepts (None = any)
COMPATIBLE = {
    "obl": (INDEPENDENT,),
    "sem": (INDEPENDENT,),
    "greedy": (INDEPENDENT,),
    "chains": (CHAINS,),
    "trees": (FOREST,),
    "sequential": None,
    "oracle": None,
}
POLICY_NAMES = tuple(COMPATIBLE)


def check_compatible(name: str, inst: Instance) -> None:
    if name not in COMPATIBLE:
        raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
    kinds = COMPATIBLE[name]
    if kinds is not None and inst.precedence.kind not in kinds:
        raise UnsupportedPrecedence(
            f"policy {name!r} needs {' or '.join(kinds)} precedence but the instance has "
            f"{inst.precedence.kind} precedence")


@lru_cache(maxsize=64)
def oracle_table(inst: Instance, n_max: int = 4, m_max: int = 3) -> StateTable:
    return exact_expected_makespan(inst, OracleLimits(n_max, m_max))[1]


def build_policy(name: str, inst: Instance, seed: int = 0, *, limits: OracleLimits | None = None) -> Policy:
    check_compatible(name, inst)
    if name == "obl":
        return SuuIObl(inst)
    if name == "sem":
        return SuuISem(inst)
    if name == "greedy":
        return LRGreedy(inst)
    if name == "chains":
        return SuuC(inst, seed)
    if name == "trees":
        return SuuT(inst, seed)
    if name == "sequential":
        return SequentialAllMachines(inst)
    limits = limits or OracleLimits()
    return OraclePolicy(inst, oracle_table(inst, limits.n_max, limits.m_max))


def factory(name: str, limits: OracleLimits | None = None):
    """``f(inst, seed) -> Policy`` for :func:`suu.simulator.estimate`."""
    return partial(build_policy, name, limits=limits)
