"""Loss, resilience, criticality, and prediction-error metrics.

Grid-centric loss discounts each failed branch's (normalized) capacity by
``exp(-0.2 t)`` at its failure step; consumer-centric loss discounts every
served-load drop between consecutive steps the same way, weighted by the
bus shed priority.  Resilience impact is the extra loss a wind reduction
adds on top of the first-round cascade.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cascade import CascadeTrace, EventKind, concat_traces
from .influence import (
    LinkFailureIM,
    LoadShedIM,
    baseline_predict,
    link_transitions,
    load_pairs,
    predict_load_shed,
    predict_next_state,
)
from .netcase import NetworkCase
from .sampler import SamplePool

__all__ = [
    "LossReport",
    "ResilienceReport",
    "CriticalityReport",
    "ErrorRateReport",
    "grid_loss",
    "consumer_loss",
    "loss_report",
    "resilience",
    "criticality",
    "error_rates",
    "expected_losses",
]

DISCOUNT_RATE = 0.2


@dataclass
class LossReport:
    grid_loss: float
    consumer_loss: float
    per_branch: np.ndarray  # contribution per branch
    per_bus: np.ndarray  # contribution per bus


@dataclass
class ResilienceReport:
    r: float
    r_grid: float
    r_consumer: float
    pre: LossReport
    post: LossReport
    delta_w: float


@dataclass
class CriticalityReport:
    c_d: np.ndarray  # per branch
    c_e: np.ndarray  # per branch
    ranking: list[int]  # branch ids, most critical first


@dataclass
class ErrorRateReport:
    link: dict[str, float]  # method -> mean misclassification rate
    load: dict[str, float]


def _discount(t):
    return float(np.exp(-DISCOUNT_RATE * t))


def grid_loss(trace: CascadeTrace, case: NetworkCase) -> float:
    return loss_report(trace, case).grid_loss


def consumer_loss(trace: CascadeTrace, case: NetworkCase) -> float:
    return loss_report(trace, case).consumer_loss


def loss_report(trace: CascadeTrace, case: NetworkCase) -> LossReport:
    """Both loss components of one trace, using absolute step times."""
    pos_of_branch = {br.id: k for k, br in enumerate(case.branches)}
    weights = case.cost_weight_vector()
    per_branch = np.zeros(case.n_branches)
    for ev in trace.events:
        if ev.kind is EventKind.LINE_TRIP:
            k = pos_of_branch[ev.subject]
            if per_branch[k] == 0:
                per_branch[k] = weights[k] * _discount(ev.time)

    # Shed is accounted at the step it occurs, including the corrective shed
    # at the first step of a round (drop from the round's service baseline).
    # Wind-spill bookkeeping entries carry negative magnitudes and are skipped.
    prio = case.priority_vector()
    pos_of_bus = {bus.id: k for k, bus in enumerate(case.buses)}
    per_bus = np.zeros(case.n_buses)
    for ev in trace.events:
        if ev.kind is EventKind.LOAD_SHED and ev.magnitude > 0:
            k = pos_of_bus[ev.subject]
            per_bus[k] += prio[k] * ev.magnitude * _discount(ev.time)
    return LossReport(
        grid_loss=float(per_branch.sum()),
        consumer_loss=float(per_bus.sum()),
        per_branch=per_branch,
        per_bus=per_bus,
    )


def resilience(pre: LossReport, post: LossReport, delta_w: float) -> ResilienceReport:
    """Componentwise loss increase caused by the wind reduction."""
    r_grid = post.grid_loss - pre.grid_loss
    r_consumer = post.consumer_loss - pre.consumer_loss
    return ResilienceReport(
        r=r_grid + r_consumer,
        r_grid=r_grid,
        r_consumer=r_consumer,
        pre=pre,
        post=post,
        delta_w=delta_w,
    )


def resilience_for_pair(
    pre: CascadeTrace, post: CascadeTrace | None, case: NetworkCase, delta_w: float
) -> ResilienceReport:
    """Resilience impact of one wind-reduction run (post=None means the first
    round blacked out; the impact is then zero by convention)."""
    rep_pre = loss_report(pre, case)
    rep_post = loss_report(concat_traces(pre, post), case) if post else rep_pre
    return resilience(rep_pre, rep_post, delta_w)


def _minmax(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo < 1e-12:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def criticality(model_link: LinkFailureIM, model_load: LoadShedIM) -> CriticalityReport:
    """Per-branch influence scores from the trained weight matrices."""
    if model_link.d.shape[0] != model_load.e.shape[1]:
        raise ValueError("link and load models disagree on the branch count")
    c_d = (model_link.d * (model_link.a11 - model_link.a01)).sum(axis=1)
    c_e = (model_load.e.T * (model_load.b11 - model_load.b01)).sum(axis=1)
    combined = _minmax(c_d) + _minmax(c_e)
    order = sorted(range(c_d.size), key=lambda j: (-combined[j], j))
    return CriticalityReport(c_d=c_d, c_e=c_e, ranking=[j + 1 for j in order])


def error_rates(
    model_link: LinkFailureIM,
    model_load: LoadShedIM,
    pool: SamplePool,
    baselines: tuple[str, ...] = ("RANDOM", "UNIFORM"),
) -> ErrorRateReport:
    """Mean per-entry misclassification over the test split, for the trained
    models and the flow-free baselines evaluated on the same pairs."""
    test = pool.test_traces()
    if not test:
        raise ValueError("test split is empty")
    X, Y = link_transitions(test)
    S, L = load_pairs(test)

    link = {}
    load = {}
    if X.shape[0]:
        pred = predict_next_state(model_link, X).binarized
        link["im"] = float(np.mean(pred != Y.astype(np.int8)))
    else:
        link["im"] = 0.0
    pred_l = predict_load_shed(model_load, S).binarized
    load["im"] = float(np.mean(pred_l != L.astype(np.int8)))

    for kind in baselines:
        key = kind.lower()
        if X.shape[0]:
            link[key] = float(
                np.mean(baseline_predict(kind, pool, "link") != Y.astype(np.int8))
            )
        else:
            link[key] = 0.0
        load[key] = float(
            np.mean(baseline_predict(kind, pool, "load") != L.astype(np.int8))
        )
    return ErrorRateReport(link=link, load=load)


def expected_losses(pool: SamplePool, case: NetworkCase) -> dict[int, dict]:
    """Pool-mean G and L conditioned on the initial contingency containing
    each branch; advisory ranking input."""
    sums: dict[int, dict] = {}
    for tr in pool.traces:
        rep = loss_report(tr, case)
        for bid in tr.profile.initial_contingencies:
            entry = sums.setdefault(bid, {"g": 0.0, "l": 0.0, "n": 0})
            entry["g"] += rep.grid_loss
            entry["l"] += rep.consumer_loss
            entry["n"] += 1
    return {
        bid: {
            "expected_grid_loss": e["g"] / e["n"],
            "expected_consumer_loss": e["l"] / e["n"],
            "n_samples": e["n"],
        }
        for bid, e in sums.items()
    }
