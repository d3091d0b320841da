import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridcascade.advisor.api import AdvisorService, create_app
from gridcascade.advisor.store import ArtifactStore


@pytest.fixture(scope="module")
def service(tmp_path_factory):
    store = ArtifactStore(tmp_path_factory.mktemp("artifacts"))
    return AdvisorService(store=store)


@pytest.fixture(scope="module")
def client(service):
    return TestClient(create_app(service))


def _wait_job(client, job_id, timeout=120.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/api/v1/jobs/{job_id}").json()
        if doc["status"] in ("done", "error"):
            return doc
        time.sleep(0.05)
    raise TimeoutError(job_id)


@pytest.fixture(scope="module")
def trained(client):
    r = client.post(
        "/api/v1/pools",
        json={"n_samples": 50, "loading_multipliers": [1.5], "policy": "exp1", "seed": 3},
    )
    assert r.status_code == 202
    job = _wait_job(client, r.json()["job_id"])
    assert job["status"] == "done", job
    pool_id = job["result"]["pool_id"]
    models = {}
    for target in ("link", "load"):
        r = client.post("/api/v1/models", json={"pool": pool_id, "target": target})
        job = _wait_job(client, r.json()["job_id"])
        assert job["status"] == "done", job
        models[target] = job["result"]["model_id"]
    return pool_id, models


def test_store_content_addressing(tmp_path):
    store = ArtifactStore(tmp_path)
    a = store.put("models", '{"x": 1}')
    b = store.put("models", '{"x": 1}')
    c = store.put("models", '{"x": 2}')
    assert a == b != c
    assert store.read("models", a) == '{"x": 1}'
    assert ("models", a) in store
    assert ("models", "ffff") not in store


def test_store_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("GRIDCASCADE_DATA", str(tmp_path / "custom"))
    store = ArtifactStore()
    assert store.root == tmp_path / "custom"


def test_cases_endpoint(client):
    cases = client.get("/api/v1/cases").json()
    assert [c["id"] for c in cases] == ["ieee30"]
    assert cases[0]["n_branches"] == 41
    assert len(cases[0]["buses"]) == 30


def test_simulate_deterministic(client):
    body = {"loading_multiplier": 1.5, "initial_contingencies": [5, 9], "policy": "exp1"}
    a = client.post("/api/v1/simulate", json=body).json()
    b = client.post("/api/v1/simulate", json=body).json()
    assert a == b
    assert a["loss"]["grid"] > 0


def test_simulate_rejects_bad_profile(client):
    r = client.post("/api/v1/simulate", json={"loading_multiplier": 9.0, "initial_contingencies": [1, 2]})
    assert r.status_code == 422
    doc = r.json()
    assert set(doc) == {"code", "message", "detail"}
    assert doc["code"] == "invalid_scenario"


def test_predict_endpoints(client, trained):
    _, models = trained
    state = [1] * 41
    state[4] = state[8] = 0
    r = client.post("/api/v1/predict", json={"model_id": models["link"], "state": state})
    doc = r.json()
    assert doc["kind"] == "link" and len(doc["probabilities"]) == 41
    # dead links stay dead under the monotonicity mask
    assert doc["binarized"][4] == 0 and doc["binarized"][8] == 0
    r = client.post(
        "/api/v1/predict", json={"model_id": models["link"], "state": state, "mode": "cascade"}
    )
    seq = np.array(r.json()["states"])
    assert (np.diff(seq, axis=0) <= 0).all()
    r = client.post("/api/v1/predict", json={"model_id": models["load"], "state": state})
    assert len(r.json()["binarized"]) == 30


def test_predict_bad_state_rejected(client, trained):
    _, models = trained
    r = client.post("/api/v1/predict", json={"model_id": models["link"], "state": [1, 0]})
    assert r.status_code == 422 and r.json()["code"] == "bad_state"


def test_matrices_csv(client, trained):
    _, models = trained
    r = client.get(f"/api/v1/models/{models['link']}/matrices", params={"name": "d"})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/csv")
    rows = [line.split(",") for line in r.text.strip().splitlines()]
    assert len(rows) == 41 and len(rows[0]) == 41
    # exported D columns remain on the simplex
    mat = np.array(rows, dtype=float)
    np.testing.assert_allclose(mat.sum(axis=0), 1.0, atol=1e-4)
    r = client.get(f"/api/v1/models/{models['link']}/matrices", params={"name": "nope"})
    assert r.status_code == 404


def test_criticality_endpoint(client, trained):
    _, models = trained
    r = client.get(
        "/api/v1/criticality",
        params={"link_model": models["link"], "load_model": models["load"]},
    )
    doc = r.json()
    assert sorted(doc["ranking"]) == list(range(1, 42))
    r = client.get(
        "/api/v1/criticality",
        params={"link_model": models["load"], "load_model": models["load"]},
    )
    assert r.status_code == 422


def test_whatif_curves(client):
    body = {
        "loading_multiplier": 1.8,
        "wind_fraction": 0.7,
        "initial_contingencies": [5, 9],
        "policies": ["exp1", "exp3"],
        "grid": [0.2, 0.5, 0.7],
    }
    doc = client.post("/api/v1/whatif", json=body).json()
    assert set(doc["curves"]) == {"exp1", "exp3"}
    for points in doc["curves"].values():
        assert [p["delta_w"] for p in points] == [0.2, 0.5, 0.7]
    exp1 = [p["r"] for p in doc["curves"]["exp1"]]
    exp3 = [p["r"] for p in doc["curves"]["exp3"]]
    assert all(b <= a for a, b in zip(exp1, exp3))


def test_whatif_rejects_unsorted_grid(client):
    r = client.post("/api/v1/whatif", json={"initial_contingencies": [5, 9], "grid": [0.3, 0.2]})
    assert r.status_code == 422 and r.json()["code"] == "invalid_grid"


def test_job_not_found(client):
    r = client.get("/api/v1/jobs/deadbeef")
    assert r.status_code == 404 and r.json()["code"] == "job_not_found"


def test_model_immutability(service, trained):
    """Published artifacts never change: re-reading returns identical bytes."""
    _, models = trained
    first = service.store.read("models", models["link"])
    second = service.store.read("models", models["link"])
    assert first == second
