import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from urgencykit.config import PipelineConfig
from urgencykit.ensemble import EnsembleModel, Featurizer
from urgencykit.linear import LEAST_SQUARES, ProbabilisticLinearModel
from urgencykit.preprocess import Message
from urgencykit.service import create_app

from test_active import URGENT_WORDS, heuristic_label, make_pool


def keyword_model():
    """Tiny real model: manual features with a weight on the 'help' bit."""
    weights = np.zeros(11)
    weights[1] = 4.0  # 'help'
    weights[-1] = 2.0  # digits
    member = ProbabilisticLinearModel(weights=weights, bias=-1.0, reg=1.0,
                                      feature_set="manual")
    return EnsembleModel(members=[member], member_weights=np.array([1.0]),
                         threshold=0.5, featurizer=Featurizer())


def session_config():
    return PipelineConfig(
        active={"seed_size": 4, "batch_size": 3, "target_total": 10},
        classifier={"cv_folds": 2},
    )


@pytest.fixture()
def scoring_client():
    return TestClient(create_app(model=keyword_model()))


@pytest.fixture()
def session_client(tmp_path):
    app = create_app(
        pool=make_pool(30),
        featurizer=Featurizer(),
        config=session_config(),
        sessions_dir=str(tmp_path / "sessions"),
    )
    return TestClient(app)


def test_health(scoring_client):
    r = scoring_client.get("/v1/health")
    assert r.status_code == 200
    assert r.json()["model_loaded"] is True


def test_score_without_model_is_503():
    client = TestClient(create_app())
    r = client.post("/v1/score", json={"texts": ["help"]})
    assert r.status_code == 503


def test_score_contract(scoring_client):
    r = scoring_client.post("/v1/score", json={"texts": ["please help now", "quiet day"]})
    assert r.status_code == 200
    results = r.json()["results"]
    assert len(results) == 2
    assert results[0]["verdict"] == "urgent"
    assert results[1]["verdict"] == "non_urgent"
    for item in results:
        assert 0.0 <= item["score"] <= 1.0


def test_score_empty_list(scoring_client):
    r = scoring_client.post("/v1/score", json={"texts": []})
    assert r.status_code == 200
    assert r.json()["results"] == []


def test_score_deterministic_within_request(scoring_client):
    r = scoring_client.post("/v1/score", json={"texts": ["help me", "help me"]})
    a, b = r.json()["results"]
    assert a["score"] == b["score"]


def test_score_malformed_body(scoring_client):
    r = scoring_client.post("/v1/score", json={"wrong": 1})
    assert r.status_code == 422


def test_sessions_unconfigured_is_503(scoring_client):
    r = scoring_client.post("/v1/sessions", json={})
    assert r.status_code == 503


def test_session_lifecycle(session_client):
    r = session_client.post("/v1/sessions", json={"seed": 11})
    assert r.status_code == 200
    status = r.json()
    sid = status["session_id"]
    assert status["round"] == 0
    assert status["pending_count"] == 4
    assert status["model_version"] == 0

    r = session_client.get(f"/v1/sessions/{sid}/batch")
    batch = r.json()["messages"]
    assert len(batch) == 4
    assert all(m["score"] is None for m in batch)  # no model at round 0

    # partial submission: counts advance, no retrain
    first_two = [{"id": m["id"], "label": heuristic_label(Message(m["id"], m["text"]))}
                 for m in batch[:2]]
    r = session_client.post(f"/v1/sessions/{sid}/labels", json={"labels": first_two})
    assert r.status_code == 200
    assert r.json()["model_version"] == 0
    assert r.json()["labeled_count"] == 2

    # double-submit of an already-labeled id: 409 listing the ids
    r = session_client.post(f"/v1/sessions/{sid}/labels", json={"labels": first_two[:1]})
    assert r.status_code == 409
    assert r.json()["detail"]["ids"] == [first_two[0]["id"]]

    rest = [{"id": m["id"], "label": heuristic_label(Message(m["id"], m["text"]))}
            for m in batch[2:]]
    r = session_client.post(f"/v1/sessions/{sid}/labels", json={"labels": rest})
    status = r.json()
    assert status["model_version"] == 1
    assert status["round"] == 1
    assert status["pending_count"] == 3

    r = session_client.get(f"/v1/sessions/{sid}/batch")
    batch2 = r.json()["messages"]
    assert len(batch2) == 3
    assert all(m["score"] is not None for m in batch2)  # ambiguity visible now

    # drive to completion
    while not status["complete"]:
        r = session_client.get(f"/v1/sessions/{sid}/batch")
        labels = [
            {"id": m["id"], "label": heuristic_label(Message(m["id"], m["text"]))}
            for m in r.json()["messages"]
        ]
        status = session_client.post(
            f"/v1/sessions/{sid}/labels", json={"labels": labels}
        ).json()
    assert status["labeled_count"] == 10
    assert status["model_version"] == 3

    r = session_client.get(f"/v1/sessions/{sid}/export")
    assert r.status_code == 200
    lines = [json.loads(l) for l in r.text.strip().split("\n")]
    assert len(lines) == 10
    assert all(l["label"] in (0, 1) for l in lines)


def test_unknown_session_404(session_client):
    assert session_client.get("/v1/sessions/nope/status").status_code == 404
    assert session_client.get("/v1/sessions/nope/batch").status_code == 404
    assert session_client.post("/v1/sessions/nope/labels",
                               json={"labels": []}).status_code == 404


def test_session_schedule_override_validated(session_client):
    r = session_client.post(
        "/v1/sessions",
        json={"schedule": {"seed_size": 100, "batch_size": 10, "target_total": 50}},
    )
    assert r.status_code == 422


def test_session_event_log_written(tmp_path):
    sessions_dir = tmp_path / "logs"
    app = create_app(pool=make_pool(30), featurizer=Featurizer(),
                     config=session_config(), sessions_dir=str(sessions_dir))
    client = TestClient(app)
    sid = client.post("/v1/sessions", json={}).json()["session_id"]
    log = sessions_dir / f"{sid}.jsonl"
    assert log.exists()
    events = [json.loads(l) for l in log.read_text().strip().split("\n")]
    assert events[0]["event"] == "session_init"
    assert events[1]["event"] == "seed_drawn"
