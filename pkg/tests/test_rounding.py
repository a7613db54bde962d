import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from suu.lp import clamp_log_failures, solve_lp1, solve_lp2
from suu.model import Instance, Precedence, generate_random_instance
from suu.rounding import (FlowNetwork, floor_log2, group_assignments, max_flow_integral, round_lp1,
                          round_lp2, chain_lengths)

from reference import brute_force_max_flow, flow_violations, networkx_max_flow


@pytest.mark.parametrize("x, k", [(1.0, 0), (0.5, -1), (0.75, -1), (3.9, 1), (4.0, 2), (2 ** -30, -30)])
def test_floor_log2(x, k):
    assert floor_log2(x) == k


def test_group_single_machine():
    g = group_assignments(np.array([[0.5]]), np.array([[0.5]]))
    assert g.D_star == {(0, -1): 0.5}
    assert g.rounded == {(0, -1): 3}


def test_group_empty_when_unassigned():
    g = group_assignments(np.zeros((2, 2)), np.full((2, 2), 0.5))
    assert g.D_star == {} and g.rounded == {}


def test_group_merges_same_magnitude():
    ellc = np.array([[0.6], [0.9]])  # both in [1/2, 1)
    g = group_assignments(np.array([[0.3], [0.2]]), ellc)
    assert g.D_star[(0, -1)] == pytest.approx(0.5)
    assert g.rounded[(0, -1)] == 3
    assert g.groups[(0, -1)] == [0, 1]


def test_group_skips_useless_machines():
    g = group_assignments(np.array([[0.7], [0.4]]), np.array([[0.0], [1.0]]))
    assert list(g.D_star) == [(0, 0)]


def _net(n_nodes, arcs):
    net = FlowNetwork()
    for v in range(n_nodes):
        net.node(v)
    for u, v, c in arcs:
        net.add_arc(u, v, c)
    return net


@pytest.mark.parametrize("n_nodes, arcs, value", [
    (3, [(0, 2, 2), (2, 1, 1)], 1),
    (3, [(0, 2, 3), (2, 1, 5)], 3),
    (4, [(0, 2, 1), (0, 3, 1), (2, 1, 1), (3, 1, 1)], 2),
    (3, [(0, 2, None), (2, 1, 2), (0, 1, 0)], 2),  # infinite arc out of the source
])
def test_max_flow_examples(n_nodes, arcs, value):
    net = _net(n_nodes, arcs)
    got, flows = max_flow_integral(net)
    assert got == value == brute_force_max_flow(n_nodes, arcs, 0, 1)
    assert flow_violations(net, flows) == []


def test_max_flow_rejects_fractional_capacity():
    with pytest.raises(ValueError):
        _net(2, [(0, 1, 1.5)])


@st.composite
def small_networks(draw):
    n_nodes = draw(st.integers(2, 8))
    n_arcs = draw(st.integers(0, 14))
    arcs = []
    for _ in range(n_arcs):
        u = draw(st.integers(0, n_nodes - 1))
        v = draw(st.integers(0, n_nodes - 1))
        if u == v:
            continue
        cap = draw(st.one_of(st.none(), st.integers(0, 6)))
        arcs.append((u, v, cap))
    # keep at least one finite path bound so the brute force cut is finite
    arcs.append((0, 1, draw(st.integers(0, 3))))
    return n_nodes, arcs


@settings(max_examples=200)
@given(small_networks())
def test_max_flow_against_two_oracles(data):
    n_nodes, arcs = data
    net = _net(n_nodes, arcs)
    value, flows = max_flow_integral(net)
    assert flow_violations(net, flows) == []
    out = sum(f for (u, _, _), f in zip(net.arcs, flows) if u == 0) - \
        sum(f for (_, v, _), f in zip(net.arcs, flows) if v == 0)
    assert out == value
    brute = brute_force_max_flow(n_nodes, arcs, 0, 1)
    if math.isfinite(brute):
        assert value == brute == networkx_max_flow(n_nodes, arcs, 0, 1)


def test_round_lp1_single_job():
    a = round_lp1(Instance([[0.5]]), [0], 0.5)
    # clamped ell' = 1/2 gives x* = t* = 1, group k = -1 with floor(6 * 1) = 6
    assert a.x_hat.tolist() == [[6]]
    assert a.load == 6 == math.ceil(6 * a.t_ref)


def test_round_lp1_empty():
    a = round_lp1(Instance([[0.5, 0.5]]), [], 0.5)
    assert a.load == 0 and not a.x_hat.any()


def test_round_lp1_diagonal():
    inst = Instance([[0.5, 1.0], [1.0, 0.5]])
    a = round_lp1(inst, None, 0.5)
    assert a.x_hat[0, 1] == 0 and a.x_hat[1, 0] == 0
    assert a.x_hat[0, 0] >= 1 and a.x_hat[1, 1] >= 1
    assert a.load <= math.ceil(6 * a.t_ref)


def test_round_lp2_examples():
    a = round_lp2(Instance([[0.5]], Precedence.from_chains([[0]])))
    assert a.x_hat[0, 0] >= 1 and a.d[0] <= 6
    inst = Instance([[0.5, 0.5]], Precedence.from_chains([[0, 1]]))
    a = round_lp2(inst)
    assert a.load <= math.ceil(6 * 2)
    assert np.all(a.mass(clamp_log_failures(inst.ell, 1.0)) >= 1)
    zero = Instance([[1.0, 0.5], [0.5, 0.5]], Precedence.from_chains([[0, 1]]))
    assert round_lp2(zero).x_hat[0, 0] == 0


def _coverage_ok(inst, jobs, L):
    sol = solve_lp1(inst, jobs, L)
    a = round_lp1(inst, jobs, L, solution=sol)
    ellc = clamp_log_failures(inst.ell, L)
    g = group_assignments(np.where(ellc > 0, np.maximum(sol.x_star, 0), 0), ellc)
    mass = a.mass(ellc)
    for j in jobs:
        lower = sum(r * 2.0 ** k for (jj, k), r in g.rounded.items() if jj == j)
        assert mass[j] >= lower - 1e-9
        assert lower >= L - 1e-9
    assert a.load <= math.ceil(6 * sol.t_star - 1e-12)


@settings(max_examples=80)
@given(st.integers(1, 10), st.integers(1, 6), st.sampled_from([0.5, 1.0, 2.0, 4.0]), st.integers(0, 10**6))
def test_round_lp1_coverage_and_load(n, m, L, seed):
    inst = generate_random_instance(n, m, seed=seed, q_low=0.02, q_high=0.999)
    _coverage_ok(inst, list(range(n)), L)


@settings(max_examples=40)
@given(st.integers(1, 10), st.integers(1, 4), st.integers(1, 5), st.integers(0, 10**6))
def test_round_lp2_guarantees(n, m, length, seed):
    inst = generate_random_instance(n, m, "chains", seed=seed, chain_length=length)
    sol = solve_lp2(inst)
    a = round_lp2(inst, solution=sol)
    ellc = clamp_log_failures(inst.ell, 1.0)
    assert np.all(a.mass(ellc) >= 1 - 1e-9)
    assert a.load <= math.ceil(6 * sol.t_star - 1e-12)
    assert np.all(a.x_hat <= np.ceil(6 * sol.d_star - 1e-9)[None, :])
    chains = inst.precedence.chains
    for ch, length_k in zip(chains, chain_lengths(a, chains)):
        assert length_k <= 7 * sum(sol.d_star[j] for j in ch) + 1e-9


def test_rounding_handles_certain_success():
    inst = Instance([[0.0, 0.9], [0.5, 0.0]])
    a = round_lp1(inst, None, 4.0)
    assert np.all(a.mass(clamp_log_failures(inst.ell, 4.0)) >= 4)
