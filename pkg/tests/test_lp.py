import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from suu.lp import (INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, LPIterationLimit, build_lp1, build_lp2,
                    clamp_log_failures, solve_lp, solve_lp1, solve_lp2)
from suu.model import Instance, Precedence, generate_random_instance

from reference import check_lp_feasible, lp1_value, lp2_value


def test_clamp_examples():
    out = clamp_log_failures(np.array([3.0, 0.25, 0.0]), 0.5)
    assert out.tolist() == [0.5, 0.25, 0.0]


def test_lp1_single_job_clamped():
    # ell = 1 is clamped to L = 1/2, so one full step is needed
    sol = solve_lp1(Instance([[0.5]]), [0], 0.5)
    assert sol.status == OPTIMAL
    assert sol.t_star == pytest.approx(1.0, abs=1e-9)
    assert sol.x_star[0, 0] == pytest.approx(1.0, abs=1e-9)


def test_lp1_empty_and_nonpositive_target():
    inst = Instance([[0.5, 0.5]])
    for jobs, L in [([], 0.5), ([0, 1], 0.0)]:
        sol = solve_lp1(inst, jobs, L)
        assert sol.t_star == 0.0
        assert not sol.x_star.any()


def test_lp1_symmetric_split():
    sol = solve_lp1(Instance([[0.5], [0.5]]), [0], 1.0)
    assert sol.t_star == pytest.approx(0.5, abs=1e-9)


def test_lp1_unknown_job():
    with pytest.raises(ValueError):
        build_lp1(Instance([[0.5]]), [3], 0.5)


@pytest.mark.parametrize("q, chains, t", [
    ([[0.5]], [[0]], 1.0),
    ([[0.5, 0.5], [0.5, 0.5]], [[0], [1]], 1.0),
    ([[0.5, 0.5]], [[0, 1]], 2.0),
])
def test_lp2_examples(q, chains, t):
    inst = Instance(q, Precedence.from_chains(chains))
    sol = solve_lp2(inst)
    assert sol.status == OPTIMAL
    assert sol.t_star == pytest.approx(t, abs=1e-9)
    assert np.all(sol.d_star >= 1 - 1e-9)


def test_lp2_needs_chains():
    with pytest.raises(ValueError):
        build_lp2(Instance([[0.5]]))


def _tiny_lp(extra_upper=None):
    # variables (x, t): min t s.t. x >= 1, x - t <= 0
    lp = LinearProgram(np.array([0.0, 1.0]))
    lp.add(np.array([1.0, 0.0]), ">=", 1)
    lp.add(np.array([1.0, -1.0]), "<=", 0)
    if extra_upper is not None:
        lp.add(np.array([0.0, 1.0]), "<=", extra_upper)
    return lp


@pytest.mark.parametrize("method", ["simplex", "highs"])
def test_solve_lp_small(method):
    sol = solve_lp(_tiny_lp(), method=method)
    assert sol.status == OPTIMAL and sol.objective == pytest.approx(1.0)
    assert solve_lp(_tiny_lp(0.5), method=method).status == INFEASIBLE


def test_solve_lp_unbounded():
    lp = LinearProgram(np.array([-1.0]))
    lp.add(np.array([1.0]), ">=", 0)
    assert solve_lp(lp, method="simplex").status == UNBOUNDED


def test_iteration_limit_is_loud():
    inst = generate_random_instance(12, 4, seed=3)
    with pytest.raises(LPIterationLimit):
        solve_lp(build_lp1(inst, range(12), 1.0), method="simplex", max_iter=2)


def test_bland_rule_agrees():
    inst = generate_random_instance(10, 4, seed=11)
    lp = build_lp1(inst, range(10), 2.0)
    a = solve_lp(lp, method="simplex", rule="dantzig")
    b = solve_lp(lp, method="simplex", rule="bland")
    assert a.objective == pytest.approx(b.objective, rel=1e-9, abs=1e-9)


def test_dump_lists_constraints():
    lp = build_lp1(Instance([[0.5, 0.25]]), [0, 1], 0.5)
    text = lp.dump()
    assert len(text.strip().splitlines()) >= len(lp.constraints)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 5), st.sampled_from([0.5, 1.0, 2.0, 4.0]), st.integers(0, 10**6))
def test_lp1_matches_reference_and_is_feasible(n, m, L, seed):
    inst = generate_random_instance(n, m, seed=seed, q_low=0.05, q_high=0.99)
    jobs = [j for j in range(n) if (seed >> j) & 1] or [0]
    lp = build_lp1(inst, jobs, L)
    sol = solve_lp(lp, method="simplex")
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(lp1_value(inst.ell, jobs, L), rel=1e-7, abs=1e-7)
    assert check_lp_feasible(lp, sol.values) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 9), st.integers(1, 4), st.integers(1, 4), st.integers(0, 10**6))
def test_lp2_matches_reference_and_is_feasible(n, m, length, seed):
    inst = generate_random_instance(n, m, "chains", seed=seed, chain_length=length, q_low=0.05, q_high=0.99)
    lp = build_lp2(inst)
    sol = solve_lp(lp, method="simplex")
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(lp2_value(inst.ell, inst.precedence.chains), rel=1e-7, abs=1e-7)
    assert check_lp_feasible(lp, sol.values) == []


def test_highs_route_agrees_with_simplex():
    inst = generate_random_instance(30, 6, seed=2)
    lp = build_lp1(inst, range(30), 1.0)
    a = solve_lp(lp, method="simplex")
    b = solve_lp(lp, method="highs")
    assert a.objective == pytest.approx(b.objective, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(1, 4), st.sampled_from([0.5, 1.0, 2.0]), st.integers(0, 10**6))
def test_lp1_structural_properties(n, m, L, seed):
    inst = generate_random_instance(n, m, seed=seed)
    rng = np.random.default_rng(seed)
    J = list(range(n))
    U = sorted(rng.choice(n, size=n // 2, replace=False).tolist())
    Ubar = [j for j in J if j not in U]
    t = lambda jobs, L: solve_lp1(inst, jobs, L).t_star
    tol = 1e-7
    assert t(J, L) <= t(J, 2 * L) + tol                       # monotone in L
    assert t(U, L) <= t(J, L) + tol                           # monotone in the job set
    assert t(J, 2 * L) <= 2 * t(J, L) + tol                   # doubling
    assert t(U, L) + t(Ubar, L) >= t(J, L) - tol              # subadditivity
