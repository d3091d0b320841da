"""Deterministic cascade oracle with three corrective-action policies.

Each propagation step solves the policy's flow problem, then trips every
alive branch whose flow magnitude exceeds the applicable thermal rating.
Long-term ratings apply while the network is intact; once any branch is
dead the short-term rating (1.05x long-term) takes over.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dcflow import (
    ShedPolicy,
    Topology,
    dc_opf,
    dc_power_flow,
    emergency_uniform_shed,
)
from .netcase import NetworkCase, ScenarioProfile, apply_wind

__all__ = [
    "Policy",
    "EventKind",
    "CascadeEvent",
    "CascadeTrace",
    "run_cascade",
    "run_with_wind_reduction",
    "concat_traces",
    "binarize_service",
]

SHORT_TERM_FACTOR = 1.05
_OVERLOAD_TOL = 1e-6
_SERVICE_TOL = 1e-3


class Policy(Enum):
    EXP1 = "exp1"  # no corrective action: proportional island rebalancing
    EXP2 = "exp2"  # full-service redispatch, uniform emergency shed fallback
    EXP3 = "exp3"  # smart scheduling: cost-based shed OPF


class EventKind(Enum):
    LINE_TRIP = "line_trip"
    LOAD_SHED = "load_shed"
    WIND_REDUCTION = "wind_reduction"
    ISLAND_BLACKOUT = "island_blackout"
    REDISPATCH = "redispatch"


@dataclass(frozen=True)
class CascadeEvent:
    time: int
    kind: EventKind
    subject: int | None = None  # branch or bus id
    magnitude: float = 0.0  # MW where applicable


@dataclass
class CascadeTrace:
    profile: ScenarioProfile
    policy: Policy
    states: np.ndarray  # (T, N_br) binary, s[t]
    served: np.ndarray  # (T, N) MW per bus
    load_bits: np.ndarray  # (T, N) binary service vector
    events: list[CascadeEvent]
    demand: np.ndarray  # net demand in effect (MW per bus)
    t_offset: int = 0
    blackout: bool = False

    @property
    def n_steps(self):
        return self.states.shape[0]

    @property
    def final_state(self):
        return self.states[-1]

    @property
    def final_served(self):
        return self.served[-1]

    def failure_times(self) -> dict[int, int]:
        """Branch position -> absolute step at which it tripped."""
        out = {}
        for ev in self.events:
            if ev.kind is EventKind.LINE_TRIP:
                out.setdefault(ev.subject, ev.time)
        return out

    def to_dict(self) -> dict:
        return {
            "profile": {
                "loading_multiplier": self.profile.loading_multiplier,
                "wind_fraction": self.profile.wind_fraction,
                "wind_buses": sorted(self.profile.wind_buses),
                "initial_contingencies": sorted(self.profile.initial_contingencies),
                "wind_reduction": self.profile.wind_reduction,
            },
            "policy": self.policy.value,
            "states": self.states.astype(int).tolist(),
            "served": np.round(self.served, 9).tolist(),
            "load_bits": self.load_bits.astype(int).tolist(),
            "demand": np.round(self.demand, 9).tolist(),
            "t_offset": self.t_offset,
            "blackout": self.blackout,
            "events": [
                {
                    "time": ev.time,
                    "kind": ev.kind.value,
                    "subject": ev.subject,
                    "magnitude": ev.magnitude,
                }
                for ev in self.events
            ],
        }

    @staticmethod
    def from_dict(doc: dict) -> "CascadeTrace":
        prof = doc["profile"]
        profile = ScenarioProfile(
            loading_multiplier=prof["loading_multiplier"],
            wind_fraction=prof["wind_fraction"],
            wind_buses=frozenset(prof["wind_buses"]),
            initial_contingencies=frozenset(prof["initial_contingencies"]),
            wind_reduction=prof["wind_reduction"],
        )
        return CascadeTrace(
            profile=profile,
            policy=Policy(doc["policy"]),
            states=np.array(doc["states"], dtype=np.int8),
            served=np.array(doc["served"], dtype=float),
            load_bits=np.array(doc["load_bits"], dtype=np.int8),
            events=[
                CascadeEvent(
                    time=e["time"],
                    kind=EventKind(e["kind"]),
                    subject=e["subject"],
                    magnitude=e["magnitude"],
                )
                for e in doc["events"]
            ],
            demand=np.array(doc["demand"], dtype=float),
            t_offset=doc.get("t_offset", 0),
            blackout=doc.get("blackout", False),
        )


def binarize_service(served: np.ndarray, demand: np.ndarray) -> np.ndarray:
    """1 where served >= (1 - 1e-3) * demand, and always 1 at zero demand."""
    served = np.asarray(served, dtype=float)
    demand = np.asarray(demand, dtype=float)
    bits = (served >= (1.0 - _SERVICE_TOL) * demand) | (demand <= 0)
    return bits.astype(np.int8)


def _step_solution(case, topo, policy, rating_factor, demand):
    """Solve one cascade step; returns (served, flows, generation, blackouts)."""
    if policy is Policy.EXP1:
        sol = dc_power_flow(case, topo, demand=demand)
        gen = None
        return sol.served, sol.flows, gen, sol.blackout_islands
    if policy is Policy.EXP2:
        sol = emergency_uniform_shed(case, topo, rating_factor, demand=demand)
    else:
        sol = dc_opf(case, topo, ShedPolicy.COST_BASED_SHED, rating_factor, demand=demand)
    return sol.served, sol.flows, sol.generation, sol.blackout_islands


def run_cascade(
    case: NetworkCase,
    profile: ScenarioProfile,
    policy: Policy,
    reduced: bool = False,
    initial_alive: np.ndarray | None = None,
    t_offset: int = 0,
    baseline_served: np.ndarray | None = None,
    baseline_generation: np.ndarray | None = None,
) -> CascadeTrace:
    """Run the cascade oracle to quiescence and return the full trace.

    ``reduced`` selects the post-wind-reduction demand level.  The remaining
    keyword arguments let a second round continue from a previous trace's
    terminal state with consistent event timing.
    """
    profile.validate(case)
    net_case, spills = apply_wind(case, profile, reduced=reduced)
    demand = net_case.demand_vector()
    n_br = case.n_branches
    pos_of_branch = {br.id: k for k, br in enumerate(case.branches)}
    branch_ids = [br.id for br in case.branches]
    ratings = case.rating_vector()

    if initial_alive is None:
        alive = np.ones(n_br, dtype=bool)
    else:
        alive = np.asarray(initial_alive, dtype=bool).copy()

    events: list[CascadeEvent] = []
    if reduced and profile.wind_reduction > 0:
        events.append(
            CascadeEvent(
                time=t_offset,
                kind=EventKind.WIND_REDUCTION,
                magnitude=profile.wind_reduction * case.total_demand(),
            )
        )
    for bus_id, mw in spills:
        events.append(
            CascadeEvent(t_offset, EventKind.LOAD_SHED, subject=bus_id, magnitude=-mw)
        )

    # initial contingencies trip at the first step of the first round
    if initial_alive is None:
        for bid in sorted(profile.initial_contingencies):
            k = pos_of_branch[bid]
            if alive[k]:
                alive[k] = False
                events.append(CascadeEvent(t_offset, EventKind.LINE_TRIP, subject=bid))

    prev_served = demand.copy() if baseline_served is None else np.asarray(baseline_served)
    prev_gen = baseline_generation
    seen_blackouts: set[tuple[int, ...]] = set()
    states, served_rows = [], []
    t = t_offset
    while True:
        factor = SHORT_TERM_FACTOR if (~alive).any() else 1.0
        topo = Topology(alive.copy())
        served, flows, gen, blackouts = _step_solution(
            net_case, topo, policy, factor, demand
        )
        states.append(alive.copy())
        served_rows.append(served.copy())

        for comp in blackouts:
            key = tuple(comp)
            if key not in seen_blackouts:
                seen_blackouts.add(key)
                mw = float(sum(demand[net_case.bus_index()[b]] for b in comp))
                events.append(
                    CascadeEvent(t, EventKind.ISLAND_BLACKOUT, subject=comp[0], magnitude=mw)
                )
        drops = prev_served - served
        for p in np.flatnonzero(drops > _OVERLOAD_TOL):
            events.append(
                CascadeEvent(
                    t,
                    EventKind.LOAD_SHED,
                    subject=case.buses[p].id,
                    magnitude=float(drops[p]),
                )
            )
        if gen is not None and (
            prev_gen is None or np.max(np.abs(gen - prev_gen)) > _OVERLOAD_TOL
        ):
            events.append(
                CascadeEvent(t, EventKind.REDISPATCH, magnitude=float(gen.sum()))
            )
        prev_served = served
        prev_gen = gen

        overloaded = alive & (np.abs(flows) > ratings * factor + _OVERLOAD_TOL)
        if not overloaded.any() or len(states) > n_br + 1:
            break
        t += 1
        for k in np.flatnonzero(overloaded):
            alive[k] = False
            events.append(CascadeEvent(t, EventKind.LINE_TRIP, subject=branch_ids[k]))

    states_arr = np.array(states, dtype=np.int8)
    served_arr = np.array(served_rows, dtype=float)
    bits = np.vstack([binarize_service(row, demand) for row in served_arr])
    total_blackout = bool(served_arr[-1].sum() <= _OVERLOAD_TOL and demand.sum() > 0)
    return CascadeTrace(
        profile=profile,
        policy=policy,
        states=states_arr,
        served=served_arr,
        load_bits=bits,
        events=events,
        demand=demand,
        t_offset=t_offset,
        blackout=total_blackout,
    )


def run_with_wind_reduction(
    case: NetworkCase, profile: ScenarioProfile, policy: Policy
) -> tuple[CascadeTrace, CascadeTrace | None]:
    """First round at net load, then a second round after the wind reduction.

    Returns ``(before, after)``; ``after`` is ``None`` when the first round
    already ended in a complete blackout.
    """
    pre = run_cascade(case, profile, policy)
    if pre.blackout:
        return pre, None
    post = run_cascade(
        case,
        profile,
        policy,
        reduced=True,
        initial_alive=pre.final_state.astype(bool),
        t_offset=pre.t_offset + pre.n_steps,
        baseline_served=pre.final_served,
    )
    return pre, post


def concat_traces(pre: CascadeTrace, post: CascadeTrace | None) -> CascadeTrace:
    """Stack a wind-reduction pair into one time-contiguous trace."""
    if post is None:
        return pre
    return CascadeTrace(
        profile=pre.profile,
        policy=pre.policy,
        states=np.vstack([pre.states, post.states]),
        served=np.vstack([pre.served, post.served]),
        load_bits=np.vstack([pre.load_bits, post.load_bits]),
        events=list(pre.events) + list(post.events),
        demand=post.demand,
        t_offset=pre.t_offset,
        blackout=post.blackout,
    )
