"""DC power flow and DC optimal power flow over an arbitrary alive-branch
topology, with island decomposition.

All quantities are in MW.  The linearized flow on branch b is
``(theta_f - theta_t) / x_b * base_mva``; internally angles are scaled by
``base_mva`` so injections can be kept in MW throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .netcase import NetworkCase
from .simplex import solve_lp

__all__ = [
    "Topology",
    "FlowSolution",
    "DispatchSolution",
    "ShedPolicy",
    "islands",
    "dc_power_flow",
    "dc_opf",
    "emergency_uniform_shed",
    "proportional_dispatch",
]

# pivot magnitudes below this mark an island system as degenerate
_SINGULAR_TOL = 1e-10
_N_COST_SEGMENTS = 3
_SHED_COST_FACTOR = 1e3


class ShedPolicy(Enum):
    FULL_SERVICE = "full_service"
    COST_BASED_SHED = "cost_based_shed"


@dataclass(frozen=True)
class Topology:
    """Binary alive-vector over branches (the network state)."""

    alive: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.alive, dtype=bool)
        object.__setattr__(self, "alive", arr)

    @staticmethod
    def full(case: NetworkCase) -> "Topology":
        return Topology(np.ones(case.n_branches, dtype=bool))

    def without(self, branch_positions) -> "Topology":
        alive = self.alive.copy()
        alive[list(branch_positions)] = False
        return Topology(alive)


@dataclass
class FlowSolution:
    angles: np.ndarray  # radians per bus
    flows: np.ndarray  # MW per branch, 0 on dead branches
    injections: np.ndarray  # MW per bus (gen - served)
    islands: list[list[int]]  # bus ids per island
    served: np.ndarray  # MW per bus actually served
    blackout_islands: list[list[int]] = field(default_factory=list)


@dataclass
class DispatchSolution:
    generation: np.ndarray  # MW per generator
    served: np.ndarray  # MW per bus
    flows: np.ndarray  # MW per branch
    objective: float
    feasible: bool
    islands: list[list[int]] = field(default_factory=list)
    blackout_islands: list[list[int]] = field(default_factory=list)


class _Grid:
    """Index arrays for one (case, topology) pair."""

    def __init__(self, case: NetworkCase, topology: Topology):
        self.case = case
        self.topology = topology
        self.index = case.bus_index()
        self.f = np.array([self.index[br.from_bus] for br in case.branches])
        self.t = np.array([self.index[br.to_bus] for br in case.branches])
        self.x = np.array([br.reactance for br in case.branches])
        self.alive = topology.alive
        self.demand = case.demand_vector()
        self.gen_bus = np.array([self.index[g.bus] for g in case.generators], dtype=int)
        self.islands = _components(case.n_buses, self.f, self.t, self.alive)

    def island_branches(self, island_pos):
        members = set(island_pos)
        return [
            b
            for b in range(self.case.n_branches)
            if self.alive[b] and self.f[b] in members and self.t[b] in members
        ]


def _components(n, f, t, alive):
    adj: list[list[int]] = [[] for _ in range(n)]
    for b in np.flatnonzero(alive):
        adj[f[b]].append(t[b])
        adj[t[b]].append(f[b])
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        comp = [start]
        seen[start] = True
        stack = [start]
        while stack:
            for w in adj[stack.pop()]:
                if not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    stack.append(w)
        comps.append(sorted(comp))
    comps.sort(key=lambda c: c[0])
    return comps


def islands(topology: Topology, case: NetworkCase) -> list[list[int]]:
    """Connected components of the alive-branch graph, as bus ids, ordered by
    their smallest bus id."""
    grid = _Grid(case, topology)
    ids = [b.id for b in case.buses]
    return [[ids[k] for k in comp] for comp in grid.islands]


def _island_slack(case: NetworkCase, grid: _Grid, island_pos) -> int | None:
    """Generator bus with largest p_max, ties by smallest bus id."""
    members = set(island_pos)
    best = None
    for g in case.generators:
        pos = grid.index[g.bus]
        if pos not in members:
            continue
        key = (-g.p_max, g.bus)
        if best is None or key < best[0]:
            best = (key, pos)
    return None if best is None else best[1]


def _reduced_susceptance(grid: _Grid, island_pos, branches, slack_pos):
    local = {p: k for k, p in enumerate(island_pos)}
    k = len(island_pos)
    B = np.zeros((k, k))
    for b in branches:
        i, j = local[grid.f[b]], local[grid.t[b]]
        w = 1.0 / grid.x[b]
        B[i, i] += w
        B[j, j] += w
        B[i, j] -= w
        B[j, i] -= w
    keep = [k_ for k_ in range(k) if island_pos[k_] != slack_pos]
    return B[np.ix_(keep, keep)], local, keep


def _solve_island_angles(grid: _Grid, island_pos, branches, slack_pos, inj):
    """Return per-island angle vector (slack at 0) or None when degenerate."""
    B, local, keep = _reduced_susceptance(grid, island_pos, branches, slack_pos)
    if not keep:
        return np.zeros(len(island_pos)), local
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError:
        return None, local
    if np.min(np.abs(np.diag(L))) ** 2 < _SINGULAR_TOL:
        return None, local
    p = np.array([inj[island_pos[k_]] for k_ in keep])
    theta_red = np.linalg.solve(B, p)
    theta = np.zeros(len(island_pos))
    for kk, k_ in enumerate(keep):
        theta[k_] = theta_red[kk]
    return theta, local


def proportional_dispatch(case: NetworkCase, grid: _Grid, demand: np.ndarray):
    """CFS-style dispatch: per island, scale output proportional to capacity to
    meet island demand; if capacity falls short, scale demand down uniformly;
    islands with no generation serve nothing.

    Returns (generation per gen, served per bus, blackout island list).
    """
    n_gen = len(case.generators)
    gen = np.zeros(n_gen)
    served = demand.astype(float).copy()
    blackout = []
    pmax = np.array([g.p_max for g in case.generators])
    for comp in grid.islands:
        members = set(comp)
        gidx = [k for k in range(n_gen) if grid.gen_bus[k] in members]
        d_total = float(sum(demand[p] for p in comp))
        cap = float(pmax[gidx].sum()) if gidx else 0.0
        if not gidx or cap <= 0:
            if d_total > 0:
                blackout.append(comp)
            for p in comp:
                served[p] = 0.0
            continue
        if cap >= d_total:
            scale = d_total / cap if cap > 0 else 0.0
            gen[gidx] = pmax[gidx] * scale
        else:
            gen[gidx] = pmax[gidx]
            gamma = cap / d_total if d_total > 0 else 1.0
            for p in comp:
                served[p] = demand[p] * gamma
    return gen, served, blackout


def dc_power_flow(
    case: NetworkCase,
    topology: Topology,
    injections: np.ndarray | None = None,
    demand: np.ndarray | None = None,
) -> FlowSolution:
    """Solve the linear DC power flow per island.

    When ``injections`` is omitted, a proportional-to-capacity dispatch is
    netted against ``demand`` (default: case demands).  Each island's slack
    bus absorbs the residual mismatch; degenerate islands are blacked out.
    """
    grid = _Grid(case, topology)
    if demand is None:
        demand = grid.demand
    if injections is None:
        gen, served, blackout = proportional_dispatch(case, grid, demand)
        inj = -served
        np.add.at(inj, grid.gen_bus, gen)
    else:
        inj = np.asarray(injections, dtype=float).copy()
        served = demand.astype(float).copy()
        blackout = []

    angles = np.zeros(case.n_buses)
    flows = np.zeros(case.n_branches)
    ids = [b.id for b in case.buses]
    blackout_ids = [[ids[p] for p in comp] for comp in blackout]
    dead_pos = {p for comp in blackout for p in comp}
    inj_out = inj.copy()
    for comp in blackout:
        for p in comp:
            inj_out[p] = 0.0

    for comp in grid.islands:
        branches = grid.island_branches(comp)
        if comp[0] in dead_pos:
            continue
        slack = _island_slack(case, grid, comp)
        if slack is None:
            slack = comp[0]
        # the slack absorbs the island mismatch
        mismatch = float(sum(inj[p] for p in comp))
        inj_local = inj.copy()
        inj_local[slack] -= mismatch
        inj_out[slack] = inj_local[slack]
        theta, local = _solve_island_angles(grid, comp, branches, slack, inj_local)
        if theta is None:
            blackout_ids.append([ids[p] for p in comp])
            for p in comp:
                served[p] = 0.0
                inj_out[p] = 0.0
            continue
        for k, p in enumerate(comp):
            angles[p] = theta[k] / case.base_mva
        for b in branches:
            flows[b] = (theta[local[grid.f[b]]] - theta[local[grid.t[b]]]) / grid.x[b]

    island_ids = [[ids[p] for p in comp] for comp in grid.islands]
    return FlowSolution(
        angles=angles,
        flows=flows,
        injections=inj_out,
        islands=island_ids,
        served=served,
        blackout_islands=blackout_ids,
    )


def _cost_segments(g):
    """Split [p_min, p_max] into convex linear segments of the quadratic cost."""
    width = (g.p_max - g.p_min) / _N_COST_SEGMENTS
    segs = []
    for s in range(_N_COST_SEGMENTS):
        lo = g.p_min + s * width
        hi = lo + width
        # chord slope of c2 p^2 + c1 p over [lo, hi]
        slope = g.cost_quadratic * (lo + hi) + g.cost_linear
        segs.append((hi - lo, slope))
    return segs


def _shed_cost_unit(case: NetworkCase) -> float:
    top = 0.0
    for g in case.generators:
        top = max(top, g.cost_quadratic * 2 * g.p_max + g.cost_linear)
    return _SHED_COST_FACTOR * max(top, 1.0)


def _island_isf(grid: _Grid, comp, branches, slack):
    """Injection shift factors: flows = ISF @ injections (island-local)."""
    B, local, keep = _reduced_susceptance(grid, comp, branches, slack)
    k = len(comp)
    isf = np.zeros((len(branches), k))
    if not keep or not branches:
        return isf, local
    Binv = np.linalg.inv(B)
    # theta_red = Binv @ P_keep; flow_b = (theta_f - theta_t)/x
    theta_rows = np.zeros((k, len(keep)))
    for kk, k_ in enumerate(keep):
        theta_rows[k_, :] = Binv[kk, :]
    for bi, b in enumerate(branches):
        row = (theta_rows[local[grid.f[b]]] - theta_rows[local[grid.t[b]]]) / grid.x[b]
        for kk, k_ in enumerate(keep):
            isf[bi, k_] = row[kk]
    return isf, local


def _solve_island_dispatch(
    case, grid, comp, branches, demand, ratings, policy, served_cap=None
):
    """LP dispatch for one island.  Returns (gen, served, flows, obj, feasible)."""
    n_gen = len(case.generators)
    members = set(comp)
    gidx = [k for k in range(n_gen) if grid.gen_bus[k] in members]
    d_local = np.array([demand[p] for p in comp])
    load_pos = [k for k, p in enumerate(comp) if d_local[k] > 0]
    gen = np.zeros(n_gen)
    served = np.array([demand[p] for p in comp])
    flows_island = np.zeros(len(branches))

    if not gidx:
        if policy is ShedPolicy.FULL_SERVICE and d_local.sum() > 1e-9:
            return gen, np.zeros(len(comp)), flows_island, 0.0, False
        return gen, np.zeros(len(comp)), flows_island, 0.0, True
    if d_local.sum() <= 1e-12 and sum(case.generators[k].p_min for k in gidx) <= 1e-12:
        return gen, served, flows_island, 0.0, True

    slack = _island_slack(case, grid, comp)
    isf, local = _island_isf(grid, comp, branches, slack)

    # variables: generator cost segments, then (for cost-based shed) served load
    seg_costs, seg_caps, seg_owner = [], [], []
    base_gen = np.zeros(n_gen)
    for k in gidx:
        g = case.generators[k]
        base_gen[k] = g.p_min
        for cap, slope in _cost_segments(g):
            seg_costs.append(slope)
            seg_caps.append(cap)
            seg_owner.append(k)
    n_seg = len(seg_costs)
    cost_based = policy is ShedPolicy.COST_BASED_SHED
    n_load = len(load_pos) if cost_based else 0
    n_var = n_seg + n_load

    prio = case.priority_vector()
    shed_unit = _shed_cost_unit(case)
    c = np.array(
        seg_costs
        + [-shed_unit * prio[comp[lp]] for lp in load_pos[:n_load]]
    )

    # per-bus injection as a linear map of the variables
    inj_map = np.zeros((len(comp), n_var))
    inj_fixed = np.zeros(len(comp))
    for local_k, p in enumerate(comp):
        inj_fixed[local_k] = 0.0
    for k in gidx:
        inj_fixed[local[grid.gen_bus[k]]] += base_gen[k]
    for s in range(n_seg):
        inj_map[local[grid.gen_bus[seg_owner[s]]], s] = 1.0
    if cost_based:
        for j, lp in enumerate(load_pos):
            inj_map[lp, n_seg + j] = -1.0
    else:
        inj_fixed -= d_local

    # balance: total injection = 0
    A_eq = inj_map.sum(axis=0, keepdims=True)
    b_eq = np.array([-inj_fixed.sum()])

    # |flow| <= rating for every island branch
    rows, rhs = [], []
    if branches:
        F = isf @ inj_map
        f0 = isf @ inj_fixed
        r = np.array([ratings[b] for b in branches])
        rows = np.vstack([F, -F])
        rhs = np.concatenate([r - f0, r + f0])
    lb = np.zeros(n_var)
    ub = np.array(
        seg_caps + ([d_local[lp] for lp in load_pos] if cost_based else [])
    )

    res = solve_lp(
        c,
        A_ub=rows if len(rows) else None,
        b_ub=rhs if len(rows) else None,
        A_eq=A_eq,
        b_eq=b_eq,
        lb=lb,
        ub=ub,
    )
    if not res.optimal:
        if cost_based:
            raise AssertionError(
                "cost-based shed LP infeasible; shedding everything is always "
                f"feasible (status {res.status})"
            )
        return gen, served, flows_island, 0.0, False

    gen[:] = base_gen
    gen[~np.isin(np.arange(n_gen), gidx)] = 0.0
    for s in range(n_seg):
        gen[seg_owner[s]] += res.x[s]
    if cost_based:
        served = np.zeros(len(comp))
        for j, lp in enumerate(load_pos):
            served[lp] = res.x[n_seg + j]
    inj = inj_map @ res.x + inj_fixed
    if branches:
        flows_island = isf @ inj
    obj = float(np.array(seg_costs) @ res.x[:n_seg])
    if cost_based:
        obj += float(
            sum(
                shed_unit * prio[comp[lp]] * (d_local[lp] - served[lp])
                for lp in load_pos
            )
        )
    return gen, served, flows_island, obj, True


def dc_opf(
    case: NetworkCase,
    topology: Topology,
    policy: ShedPolicy,
    rating_factor: float = 1.0,
    demand: np.ndarray | None = None,
) -> DispatchSolution:
    """Linear-program dispatch under the given shed policy.

    FULL_SERVICE fixes served load at demand and reports ``feasible=False``
    when any island cannot carry it; COST_BASED_SHED adds served-load
    variables priced at ``shed_priority`` times a dominant shed cost and is
    always feasible.
    """
    grid = _Grid(case, topology)
    if demand is None:
        demand = grid.demand
    ratings = case.rating_vector() * rating_factor

    n_gen = len(case.generators)
    gen = np.zeros(n_gen)
    served = np.zeros(case.n_buses)
    flows = np.zeros(case.n_branches)
    objective = 0.0
    feasible = True
    ids = [b.id for b in case.buses]
    blackout = []

    for comp in grid.islands:
        branches = grid.island_branches(comp)
        g_i, s_i, f_i, obj_i, ok = _solve_island_dispatch(
            case, grid, comp, branches, demand, ratings, policy
        )
        gen += g_i
        for k, p in enumerate(comp):
            served[p] = s_i[k]
        for bi, b in enumerate(branches):
            flows[b] = f_i[bi]
        objective += obj_i
        feasible = feasible and ok
        if ok and s_i.sum() <= 1e-9 and sum(demand[p] for p in comp) > 1e-9:
            blackout.append([ids[p] for p in comp])

    island_ids = [[ids[p] for p in comp] for comp in grid.islands]
    if not feasible:
        served = np.zeros(case.n_buses)
        gen = np.zeros(n_gen)
        flows = np.zeros(case.n_branches)
        objective = 0.0
    return DispatchSolution(
        generation=gen,
        served=served,
        flows=flows,
        objective=objective,
        feasible=feasible,
        islands=island_ids,
        blackout_islands=blackout,
    )


def emergency_uniform_shed(
    case: NetworkCase,
    topology: Topology,
    rating_factor: float = 1.0,
    demand: np.ndarray | None = None,
    tol: float = 1e-4,
) -> DispatchSolution:
    """Largest uniform demand scale each island can serve in full.

    Per island, bisects the scale factor gamma in [0, 1] (tolerance ``tol``)
    for feasibility of FULL_SERVICE dispatch on gamma-scaled demands.
    """
    grid = _Grid(case, topology)
    if demand is None:
        demand = grid.demand
    ratings = case.rating_vector() * rating_factor
    n_gen = len(case.generators)
    gen = np.zeros(n_gen)
    served = np.zeros(case.n_buses)
    flows = np.zeros(case.n_branches)
    objective = 0.0
    ids = [b.id for b in case.buses]
    blackout = []

    for comp in grid.islands:
        branches = grid.island_branches(comp)

        def attempt(gamma):
            local_demand = demand.copy()
            for p in comp:
                local_demand[p] = demand[p] * gamma
            return _solve_island_dispatch(
                case, grid, comp, branches, local_demand,
                ratings, ShedPolicy.FULL_SERVICE,
            )

        g_i, s_i, f_i, obj_i, ok = attempt(1.0)
        if not ok:
            lo, hi = 0.0, 1.0  # lo assumed feasible; hi known infeasible
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if attempt(mid)[4]:
                    lo = mid
                else:
                    hi = mid
            g_i, s_i, f_i, obj_i, ok = attempt(lo)
            if not ok or lo <= tol:
                # gamma = 0 (or solver failure near 0): island blackout
                g_i = np.zeros(n_gen)
                s_i = np.zeros(len(comp))
                f_i = np.zeros(len(branches))
                obj_i = 0.0
                if sum(demand[p] for p in comp) > 1e-9:
                    blackout.append([ids[p] for p in comp])
        gen += g_i
        for k, p in enumerate(comp):
            served[p] = s_i[k]
        for bi, b in enumerate(branches):
            flows[b] = f_i[bi]
        objective += obj_i

    island_ids = [[ids[p] for p in comp] for comp in grid.islands]
    return DispatchSolution(
        generation=gen,
        served=served,
        flows=flows,
        objective=objective,
        feasible=True,
        islands=island_ids,
        blackout_islands=blackout,
    )
