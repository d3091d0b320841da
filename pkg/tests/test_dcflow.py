import numpy as np
import pytest

from gridcascade.dcflow import (
    ShedPolicy,
    Topology,
    dc_opf,
    dc_power_flow,
    emergency_uniform_shed,
    islands,
)
from gridcascade.netcase import Branch, Bus, Generator, NetworkCase, scale_loading

from .oracles import dc_flow_reference, random_small_case


def _chain_case():
    """1 --(x=0.1)-- 2 --(x=0.2)-- 3 with a single generator at bus 1."""
    return NetworkCase(
        buses=(
            Bus(id=1, base_demand=0.0, is_slack=True),
            Bus(id=2, base_demand=30.0),
            Bus(id=3, base_demand=20.0),
        ),
        branches=(
            Branch(id=1, from_bus=1, to_bus=2, reactance=0.1, rating_long_term=100.0, cost_weight=1.0),
            Branch(id=2, from_bus=2, to_bus=3, reactance=0.2, rating_long_term=100.0, cost_weight=1.0),
        ),
        generators=(Generator(bus=1, p_min=0.0, p_max=100.0, cost_linear=1.0, cost_quadratic=0.01),),
        base_mva=100.0,
    ).validate()


def test_chain_flow_hand_computed():
    case = _chain_case()
    sol = dc_power_flow(case, Topology.full(case))
    # radial network: branch flow equals downstream demand
    assert sol.flows[0] == pytest.approx(50.0)
    assert sol.flows[1] == pytest.approx(20.0)
    np.testing.assert_allclose(sol.served, [0.0, 30.0, 20.0])


def test_kcl_holds(case):
    sol = dc_power_flow(case, Topology.full(case))
    # nodal balance: injection = sum of outgoing flows
    A = np.zeros((case.n_buses, case.n_branches))
    idx = case.bus_index()
    for k, br in enumerate(case.branches):
        A[idx[br.from_bus], k] += 1.0
        A[idx[br.to_bus], k] -= 1.0
    np.testing.assert_allclose(A @ sol.flows, sol.injections, atol=1e-8)


def test_islanding_and_blackout():
    case = _chain_case()
    topo = Topology.full(case).without([1])  # cut 2--3
    comps = islands(topo, case)
    assert comps == [[1, 2], [3]]
    sol = dc_power_flow(case, topo)
    assert sol.served[2] == 0.0  # bus 3 has no generation
    assert sol.blackout_islands == [[3]]
    assert sol.flows[1] == 0.0


def test_gen_deficient_island_scales_demand():
    case = _chain_case()
    demand = np.array([0.0, 150.0, 0.0])
    topo = Topology.full(case).without([1])
    sol = dc_power_flow(case, topo, demand=demand)
    # island capacity 100 < demand 150: uniform scaling to capacity
    assert sol.served[1] == pytest.approx(100.0)


def test_full_service_opf_balances(case):
    sol = dc_opf(case, Topology.full(case), ShedPolicy.FULL_SERVICE)
    assert sol.feasible
    assert sol.generation.sum() == pytest.approx(case.total_demand())
    np.testing.assert_allclose(sol.served, case.demand_vector(), atol=1e-6)
    assert (np.abs(sol.flows) <= case.rating_vector() + 1e-6).all()


def test_full_service_opf_feasibility_boundary(case):
    # the intact network admits full service up to 1.3x loading and no further
    ok = dc_opf(scale_loading(case, 1.3), Topology.full(case), ShedPolicy.FULL_SERVICE)
    assert ok.feasible
    bad = dc_opf(scale_loading(case, 1.4), Topology.full(case), ShedPolicy.FULL_SERVICE)
    assert not bad.feasible


def test_cost_based_shed_relieves_overload():
    case = _chain_case()
    tight = NetworkCase(
        buses=case.buses,
        branches=(
            case.branches[0],
            Branch(id=2, from_bus=2, to_bus=3, reactance=0.2, rating_long_term=5.0, cost_weight=1.0),
        ),
        generators=case.generators,
        base_mva=100.0,
    ).validate()
    sol = dc_opf(tight, Topology.full(tight), ShedPolicy.COST_BASED_SHED)
    assert sol.feasible
    assert abs(sol.flows[1]) <= 5.0 + 1e-6
    assert sol.served[2] == pytest.approx(5.0, abs=1e-6)  # only what the line can carry
    assert sol.served[1] == pytest.approx(30.0, abs=1e-6)  # untouched load keeps service


def test_cost_based_shed_prefers_low_priority():
    base = _chain_case()
    case = NetworkCase(
        buses=(
            Bus(id=1, base_demand=0.0, is_slack=True),
            Bus(id=2, base_demand=30.0, shed_priority=5.0),
            Bus(id=3, base_demand=20.0, shed_priority=0.1),
        ),
        branches=(
            Branch(id=1, from_bus=1, to_bus=2, reactance=0.1, rating_long_term=40.0, cost_weight=1.0),
            Branch(id=2, from_bus=2, to_bus=3, reactance=0.2, rating_long_term=100.0, cost_weight=1.0),
        ),
        generators=base.generators,
        base_mva=100.0,
    ).validate()
    sol = dc_opf(case, Topology.full(case), ShedPolicy.COST_BASED_SHED)
    assert sol.feasible
    # the 10 MW congestion deficit lands on the cheap-to-shed bus
    assert sol.served[1] == pytest.approx(30.0, abs=1e-6)
    assert sol.served[2] == pytest.approx(10.0, abs=1e-6)


def test_emergency_uniform_shed_scales_island():
    case = _chain_case()
    demand = np.array([0.0, 90.0, 60.0])  # 150 > 100 MW capacity
    sol = emergency_uniform_shed(case, Topology.full(case), rating_factor=1.0, demand=demand)
    gamma = sol.served.sum() / 150.0
    assert gamma == pytest.approx(100.0 / 150.0, abs=1e-3)
    np.testing.assert_allclose(sol.served, gamma * demand, atol=1e-6)


def test_emergency_shed_noop_when_feasible(case):
    sol = emergency_uniform_shed(case, Topology.full(case), rating_factor=1.0)
    np.testing.assert_allclose(sol.served, case.demand_vector(), atol=1e-6)


def test_random_networks_match_reference(rng):
    for _ in range(30):
        small = random_small_case(rng)
        alive = np.ones(small.n_branches, dtype=bool)
        if small.n_branches > 2 and rng.random() < 0.5:
            alive[rng.integers(small.n_branches)] = False
        flows, served, inj = dc_flow_reference(small, alive)
        sol = dc_power_flow(small, Topology(alive))
        np.testing.assert_allclose(sol.flows, flows, atol=1e-8)
        np.testing.assert_allclose(sol.served, served, atol=1e-8)
