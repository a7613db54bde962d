"""Scheduling unit jobs on unrelated machines whose steps fail at random.

Instances, LP relaxations and their rounding, oblivious and adaptive
schedulers for independent jobs, chains and forests, a Monte Carlo
simulator, and an exact oracle for tiny instances.
"""
__version__ = "0.1.0"

from .model import Instance, Precedence, generate_lr_hard_instance, generate_random_instance, read_instance, write_instance
from .lp import solve_lp1, solve_lp2
from .rounding import round_lp1, round_lp2
from .schedulers import LRGreedy, SequentialAllMachines, SuuIObl, SuuISem
from .chains import SuuC, SuuT, decompose_forest
from .simulator import draw_thresholds, estimate, execute, execute_reference_bernoulli, offline_lower_bound
from .oracle import exact_expected_makespan, oracle_policy

__all__ = [
    "Instance", "Precedence", "generate_random_instance", "generate_lr_hard_instance", "read_instance",
    "write_instance", "solve_lp1", "solve_lp2", "round_lp1", "round_lp2", "SuuIObl", "SuuISem", "LRGreedy",
    "SequentialAllMachines", "SuuC", "SuuT", "decompose_forest", "execute", "execute_reference_bernoulli",
    "estimate", "draw_thresholds", "offline_lower_bound", "exact_expected_makespan", "oracle_policy",
]
