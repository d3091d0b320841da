import numpy as np
import pytest

from gridcascade.cascade import (
    CascadeTrace,
    EventKind,
    Policy,
    binarize_service,
    concat_traces,
    run_cascade,
    run_with_wind_reduction,
)
from gridcascade.netcase import ScenarioProfile


def _profile(c=1.5, lines=(5, 9), w=0.0, dw=0.0):
    return ScenarioProfile(
        loading_multiplier=c,
        wind_fraction=w,
        initial_contingencies=frozenset(lines),
        wind_reduction=dw,
    )


def test_binarize_service():
    served = np.array([100.0, 99.95, 98.0, 0.0])
    demand = np.array([100.0, 100.0, 100.0, 0.0])
    np.testing.assert_array_equal(binarize_service(served, demand), [1, 1, 0, 1])


def test_states_monotone_nonincreasing(case):
    trace = run_cascade(case, _profile(1.6), Policy.EXP1)
    diffs = np.diff(trace.states.astype(int), axis=0)
    assert (diffs <= 0).all()  # a failed branch never comes back


def test_initial_contingencies_dead_at_t0(case):
    trace = run_cascade(case, _profile(), Policy.EXP1)
    pos = {br.id: k for k, br in enumerate(case.branches)}
    assert trace.states[0, pos[5]] == 0
    assert trace.states[0, pos[9]] == 0


def test_exp3_no_post_initial_trips(case):
    for c in (1.0, 1.5, 1.8):
        trace = run_cascade(case, _profile(c), Policy.EXP3)
        trips = [ev for ev in trace.events if ev.kind is EventKind.LINE_TRIP and ev.time > 0]
        assert trips == []
        assert trace.n_steps == 1


def test_trips_follow_short_term_overload(case):
    """Every recorded post-initial trip corresponds to a prior-step overload."""
    trace = run_cascade(case, _profile(1.7), Policy.EXP1)
    times = trace.failure_times()
    pos = {br.id: k for k, br in enumerate(case.branches)}
    for ev in trace.events:
        if ev.kind is EventKind.LINE_TRIP and ev.time > 0:
            k = pos[ev.subject]
            assert times[ev.subject] == ev.time
            assert trace.states[ev.time - 1, k] == 1
            assert trace.states[ev.time, k] == 0
    assert (np.abs(trace.served) <= trace.demand + 1e-9).all()


def test_determinism(case):
    a = run_cascade(case, _profile(1.6), Policy.EXP1)
    b = run_cascade(case, _profile(1.6), Policy.EXP1)
    assert a.to_dict() == b.to_dict()


def test_serialization_roundtrip(case):
    trace = run_cascade(case, _profile(1.6, w=0.4, dw=0.0), Policy.EXP2)
    again = CascadeTrace.from_dict(trace.to_dict())
    np.testing.assert_array_equal(again.states, trace.states)
    np.testing.assert_allclose(again.served, trace.served)
    assert again.profile == trace.profile
    assert len(again.events) == len(trace.events)


def test_wind_reduction_rounds_are_contiguous(case):
    profile = _profile(1.8, w=0.7, dw=0.5)
    pre, post = run_with_wind_reduction(case, profile, Policy.EXP1)
    assert post is not None
    assert post.t_offset == pre.t_offset + pre.n_steps
    combined = concat_traces(pre, post)
    assert combined.n_steps == pre.n_steps + post.n_steps
    # second round sees the higher post-reduction demand
    assert post.demand.sum() > pre.demand.sum()
    assert any(ev.kind is EventKind.WIND_REDUCTION for ev in combined.events)


def test_wind_round_demand_levels(case):
    profile = _profile(1.6, w=0.7, dw=0.3)
    pre, post = run_with_wind_reduction(case, profile, Policy.EXP3)
    assert pre.demand.sum() == pytest.approx(0.9 * case.total_demand(), rel=1e-9)
    assert post.demand.sum() == pytest.approx(1.2 * case.total_demand(), rel=1e-9)


def test_exp2_redispatch_recorded(case):
    trace = run_cascade(case, _profile(1.3), Policy.EXP2)
    assert any(ev.kind is EventKind.REDISPATCH for ev in trace.events)


def test_load_shed_events_match_served_drops(case):
    trace = run_cascade(case, _profile(1.7), Policy.EXP1)
    for row in range(trace.n_steps - 1):
        drops = trace.served[row] - trace.served[row + 1]
        evs = {
            ev.subject: ev.magnitude
            for ev in trace.events
            if ev.kind is EventKind.LOAD_SHED and ev.time == row + 1
        }
        for p in np.flatnonzero(drops > 1e-6):
            bus_id = case.buses[p].id
            assert evs.get(bus_id, 0.0) == pytest.approx(drops[p])
