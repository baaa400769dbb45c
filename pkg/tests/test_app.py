import pytest

from app import app
from conftest import TEST_WAVE

EXPERIMENT = {"levels": [4], "method": "velocity_only", "k_wave": TEST_WAVE, "lambda": [0.0]}


@pytest.fixture
def client():
    app.config["TESTING"] = True
    return app.test_client()


def _start(client, payload=None):
    response = client.post("/1-experiment/start", json=payload or EXPERIMENT)
    assert response.status_code == 201, response.get_json()
    return response.get_json()["experiment_id"]


def test_start_experiment(client):
    response = client.post("/1-experiment/start", json=EXPERIMENT)
    assert response.status_code == 201
    body = response.get_json()
    assert body["status"] == "created"
    assert body["next"] == "/2-experiment/run"


def test_invalid_config_is_rejected(client):
    response = client.post("/1-experiment/start", json={"tol": 2.0})
    assert response.status_code == 400
    assert "Invalid experiment config" in response.get_json()["message"]


def test_full_workflow(client):
    experiment_id = _start(client)

    state = client.get(f"/3-experiment/{experiment_id}").get_json()
    assert state["status"] == "created"
    assert state["config"]["lambda"] == [0.0]
    assert state["records"] == []

    response = client.post("/2-experiment/run", json={"experiment_id": experiment_id})
    assert response.status_code == 200
    body = response.get_json()
    assert body["status"] == "finished"
    assert len(body["records"]) == 1
    record = body["records"][0]
    assert record["converged"] is True
    assert record["dofs"] == 187
    assert record["press_err"] is None

    state = client.get(f"/3-experiment/{experiment_id}").get_json()
    assert state["status"] == "finished"
    assert state["errors"] == {}

    csv = client.get(f"/4-experiment/{experiment_id}/csv")
    assert csv.status_code == 200
    assert csv.mimetype == "text/csv"
    lines = csv.get_data(as_text=True).splitlines()
    assert lines[0].startswith("method,precond,level,dofs")
    assert len(lines) == 2


def test_csv_before_run_conflicts(client):
    experiment_id = _start(client)
    assert client.get(f"/4-experiment/{experiment_id}/csv").status_code == 409


def test_unknown_experiment(client):
    assert client.get("/3-experiment/missing").status_code == 404
    assert client.post("/2-experiment/run", json={"experiment_id": "missing"}).status_code == 404
    assert client.post("/2-experiment/run", json={}).status_code == 400
