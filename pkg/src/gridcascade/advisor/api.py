"""HTTP advisory service.

Versioned JSON API over immutable loaded artifacts.  Heavy work (pool
generation, model training) runs as asynchronous jobs on a single worker
thread that serializes writes to the artifact store; scenario simulation,
prediction, and what-if sweeps answer synchronously.  Errors use a
``{code, message, detail}`` envelope.
"""

from __future__ import annotations

import queue
import tempfile
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from ..cascade import Policy, concat_traces, run_cascade, run_with_wind_reduction
from ..influence import (
    LinkFailureIM,
    LoadShedIM,
    estimate_transitions,
    export_matrices_csv,
    load_model,
    predict_cascade,
    predict_load_shed,
    predict_next_state,
    save_model,
    train_link_model,
    train_load_model,
)
from ..metrics import criticality, loss_report, resilience_for_pair
from ..netcase import CaseError, NetworkCase, ScenarioProfile, load_bundled_case
from ..sampler import PoolConfig, generate_pool, load_pool, save_pool
from .store import ArtifactStore

__all__ = ["AdvisorService", "create_app", "ApiError"]

API_PREFIX = "/api/v1"


class ApiError(Exception):
    def __init__(self, code: str, message: str, detail=None, status: int = 400):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail
        self.status = status


# ---------------------------------------------------------------------------
# request bodies


class ScenarioRequest(BaseModel):
    case: str = "ieee30"
    loading_multiplier: float = 1.0
    wind_fraction: float = 0.0
    wind_reduction: float = 0.0
    initial_contingencies: list[int] = Field(default_factory=list)
    wind_buses: list[int] = Field(default_factory=list)
    policy: str = "exp1"


class PoolRequest(BaseModel):
    case: str = "ieee30"
    n_samples: int = 100
    loading_multipliers: list[float] = Field(default_factory=lambda: [1.0])
    wind_fraction: float = 0.0
    wind_reductions: list[float] = Field(default_factory=list)
    policy: str = "exp1"
    seed: int = 0
    train_fraction: float = 0.7
    distinct_pairs: bool = False


class TrainRequest(BaseModel):
    pool: str
    target: str  # "link" | "load"


class PredictRequest(BaseModel):
    model_id: str
    state: list[int]
    mode: str = "next"  # link models: "next" | "cascade"


class WhatIfRequest(BaseModel):
    case: str = "ieee30"
    loading_multiplier: float = 1.0
    wind_fraction: float = 0.7
    initial_contingencies: list[int] = Field(default_factory=list)
    policies: list[str] = Field(default_factory=lambda: ["exp1", "exp3"])
    grid: list[float] = Field(default_factory=lambda: [round(0.1 * k, 1) for k in range(1, 8)])


# ---------------------------------------------------------------------------
# job queue


class _JobRegistry:
    """Single worker thread; serializes artifact-store writes."""

    def __init__(self):
        self._jobs: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue()
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def submit(self, fn) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = {"id": job_id, "status": "queued"}
        self._queue.put((job_id, fn))
        return job_id

    def get(self, job_id: str) -> dict:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise ApiError("job_not_found", f"no job {job_id!r}", status=404)
            return dict(job)

    def _run(self):
        while True:
            job_id, fn = self._queue.get()
            with self._lock:
                self._jobs[job_id]["status"] = "running"
            try:
                result = fn()
            except ApiError as exc:
                update = {"status": "error", "error": {"code": exc.code, "message": exc.message}}
            except Exception as exc:  # surfaced to the poller, not the log only
                update = {"status": "error", "error": {"code": "job_failed", "message": str(exc)}}
            else:
                update = {"status": "done", "result": result}
            with self._lock:
                self._jobs[job_id].update(update)


# ---------------------------------------------------------------------------
# service


def _policy(name: str) -> Policy:
    try:
        return Policy(name.lower())
    except ValueError:
        raise ApiError("unknown_policy", f"unknown policy {name!r}", status=422)


class AdvisorService:
    def __init__(self, store: ArtifactStore | None = None, case_names=("ieee30",)):
        self.store = store or ArtifactStore()
        self.cases: dict[str, NetworkCase] = {
            name: load_bundled_case(name) for name in case_names
        }
        self.jobs = _JobRegistry()
        self._models: dict[str, LinkFailureIM | LoadShedIM] = {}
        self._pools: dict[str, object] = {}
        self._cache_lock = threading.Lock()

    # -- artifact resolution ------------------------------------------------

    def case(self, name: str) -> NetworkCase:
        if name not in self.cases:
            raise ApiError("case_not_found", f"no case {name!r}", status=404)
        return self.cases[name]

    def model(self, model_id: str):
        with self._cache_lock:
            if model_id in self._models:
                return self._models[model_id]
        try:
            text = self.store.read("models", model_id)
        except KeyError:
            raise ApiError("model_not_found", f"no model {model_id!r}", status=404)
        model = load_model(text)
        with self._cache_lock:
            self._models[model_id] = model
        return model

    def pool(self, pool_id: str):
        with self._cache_lock:
            if pool_id in self._pools:
                return self._pools[pool_id]
        try:
            path = self.store.path("pools", pool_id)
        except KeyError:
            raise ApiError("pool_not_found", f"no pool {pool_id!r}", status=404)
        pool = load_pool(path)
        with self._cache_lock:
            self._pools[pool_id] = pool
        return pool

    def _publish_model(self, model) -> str:
        model_id = self.store.put("models", save_model(model))
        with self._cache_lock:
            self._models[model_id] = model
        return model_id

    def _publish_pool(self, pool) -> str:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "pool.jsonl"
            save_pool(pool, path)
            pool_id = self.store.put_file("pools", path)
        with self._cache_lock:
            self._pools[pool_id] = pool
        return pool_id

    # -- scenario plumbing --------------------------------------------------

    def profile_from(self, req: ScenarioRequest | WhatIfRequest, wind_reduction=None):
        case = self.case(req.case)
        try:
            profile = ScenarioProfile(
                loading_multiplier=req.loading_multiplier,
                wind_fraction=req.wind_fraction,
                wind_buses=frozenset(getattr(req, "wind_buses", ())),
                initial_contingencies=frozenset(req.initial_contingencies),
                wind_reduction=(
                    req.wind_reduction if wind_reduction is None else wind_reduction
                ),
            )
            profile.validate(case)
        except (ValueError, CaseError) as exc:
            raise ApiError("invalid_scenario", str(exc), status=422)
        return case, profile


def _trace_payload(trace, case) -> dict:
    rep = loss_report(trace, case)
    doc = trace.to_dict()
    doc["loss"] = {"grid": rep.grid_loss, "consumer": rep.consumer_loss}
    return doc


def create_app(service: AdvisorService | None = None) -> FastAPI:
    svc = service or AdvisorService()
    app = FastAPI(title="gridcascade advisor", version="1.0")
    app.state.service = svc

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.get(API_PREFIX + "/cases")
    def list_cases():
        return [
            {
                "id": name,
                "n_buses": case.n_buses,
                "n_branches": case.n_branches,
                "total_demand_mw": case.total_demand(),
                "branches": [
                    {"id": br.id, "from": br.from_bus, "to": br.to_bus, "rating_mw": br.rating_long_term}
                    for br in case.branches
                ],
                "buses": [
                    {"id": bus.id, "demand_mw": bus.base_demand, "priority": bus.shed_priority}
                    for bus in case.buses
                ],
            }
            for name, case in svc.cases.items()
        ]

    @app.post(API_PREFIX + "/pools", status_code=202)
    def create_pool(req: PoolRequest):
        case = svc.case(req.case)
        try:
            config = PoolConfig(
                n_samples=req.n_samples,
                loading_multipliers=tuple(req.loading_multipliers),
                wind_fraction=req.wind_fraction,
                wind_reductions=tuple(req.wind_reductions),
                policy=_policy(req.policy),
                seed=req.seed,
                train_fraction=req.train_fraction,
                distinct_pairs=req.distinct_pairs,
            ).validate()
        except ValueError as exc:
            raise ApiError("invalid_pool_config", str(exc), status=422)

        def job():
            pool = generate_pool(case, config)
            return {"pool_id": svc._publish_pool(pool), "n_traces": len(pool.traces)}

        return {"job_id": svc.jobs.submit(job)}

    @app.post(API_PREFIX + "/models", status_code=202)
    def train_model(req: TrainRequest):
        if req.target not in ("link", "load"):
            raise ApiError("invalid_target", "target must be 'link' or 'load'", status=422)
        pool = svc.pool(req.pool)

        def job():
            transitions = estimate_transitions(pool)
            if req.target == "link":
                model = train_link_model(pool, transitions)
            else:
                model = train_load_model(pool, transitions)
            return {
                "model_id": svc._publish_model(model),
                "target": req.target,
                "meta": model.meta,
            }

        return {"job_id": svc.jobs.submit(job)}

    @app.get(API_PREFIX + "/jobs/{job_id}")
    def job_status(job_id: str):
        return svc.jobs.get(job_id)

    @app.get(API_PREFIX + "/models/{model_id}/matrices")
    def model_matrices(model_id: str, name: str | None = None):
        model = svc.model(model_id)
        mats = export_matrices_csv(model)
        if name is not None:
            if name not in mats:
                raise ApiError(
                    "matrix_not_found", f"no matrix {name!r}", detail=sorted(mats), status=404
                )
            return PlainTextResponse(mats[name], media_type="text/csv")
        sections = [f"# {key}\n{csv_text}" for key, csv_text in sorted(mats.items())]
        return PlainTextResponse("".join(sections), media_type="text/csv")

    @app.post(API_PREFIX + "/simulate")
    def simulate(req: ScenarioRequest):
        case, profile = svc.profile_from(req)
        policy = _policy(req.policy)
        if profile.wind_reduction > 0:
            pre, post = run_with_wind_reduction(case, profile, policy)
            trace = concat_traces(pre, post)
            payload = _trace_payload(trace, case)
            payload["resilience"] = {
                "r": resilience_for_pair(pre, post, case, profile.wind_reduction).r
            }
            return payload
        trace = run_cascade(case, profile, policy)
        return _trace_payload(trace, case)

    @app.post(API_PREFIX + "/predict")
    def predict(req: PredictRequest):
        model = svc.model(req.model_id)
        state = np.asarray(req.state, dtype=float)
        if isinstance(model, LinkFailureIM):
            if state.size != model.n_branches:
                raise ApiError("bad_state", f"state must have {model.n_branches} entries", status=422)
            if req.mode == "cascade":
                seq = predict_cascade(model, state)
                return {"kind": "link", "mode": "cascade", "states": seq.astype(int).tolist()}
            out = predict_next_state(model, state)
            return {
                "kind": "link",
                "mode": "next",
                "probabilities": out.probabilities.tolist(),
                "binarized": out.binarized.astype(int).tolist(),
            }
        if isinstance(model, LoadShedIM):
            if state.size != model.b11.shape[0]:
                raise ApiError("bad_state", f"state must have {model.b11.shape[0]} entries", status=422)
            out = predict_load_shed(model, state)
            return {
                "kind": "load",
                "probabilities": out.probabilities.tolist(),
                "binarized": out.binarized.astype(int).tolist(),
            }
        raise ApiError("model_not_found", "unsupported model kind", status=404)

    @app.get(API_PREFIX + "/criticality")
    def criticality_ranking(link_model: str, load_model: str):
        lm = svc.model(link_model)
        dm = svc.model(load_model)
        if not isinstance(lm, LinkFailureIM) or not isinstance(dm, LoadShedIM):
            raise ApiError(
                "model_kind_mismatch",
                "criticality needs one link model and one load model",
                status=422,
            )
        rep = criticality(lm, dm)
        return {
            "c_d": rep.c_d.tolist(),
            "c_e": rep.c_e.tolist(),
            "ranking": rep.ranking,
        }

    @app.post(API_PREFIX + "/whatif")
    def whatif(req: WhatIfRequest):
        if any(b <= a for a, b in zip(req.grid, req.grid[1:])) or not req.grid:
            raise ApiError("invalid_grid", "Δw grid must be strictly increasing", status=422)
        curves = {}
        for pol_name in req.policies:
            policy = _policy(pol_name)
            points = []
            for dw in req.grid:
                case, profile = svc.profile_from(req, wind_reduction=dw)
                pre, post = run_with_wind_reduction(case, profile, policy)
                rep = resilience_for_pair(pre, post, case, dw)
                points.append(
                    {
                        "delta_w": dw,
                        "r": rep.r,
                        "r_grid": rep.r_grid,
                        "r_consumer": rep.r_consumer,
                        "blackout": pre.blackout,
                    }
                )
            curves[policy.value] = points
        return {"grid": list(req.grid), "curves": curves}

    return app
