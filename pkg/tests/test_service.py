"""Service endpoints exercised over the ASGI app."""

import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from starlette.testclient import TestClient

from crowdsched.service import app
from social_fixtures import hand_check_log

from crowdsched.io import format_events_csv, format_friends_csv


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


SMALL_CONFIG = {"tasks": 40, "workers": 10, "categories": 2, "seed": 11}


class TestHealth:
    def test_health(self, client):
        response = client.get("/health")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"


class TestSimulate:
    def test_returns_metrics_and_csv(self, client):
        response = client.post("/simulate", json={"config": SMALL_CONFIG})
        assert response.status_code == 200
        body = response.json()
        assert body["completed"] == 40
        assert body["metrics"]["policy"] == "BBS"
        assert body["metrics_csv"].startswith("seed,policy,m,n,L,")
        assert body["trace_csv"].count("\n") == 41  # header + one row per task

    def test_seed_override(self, client):
        base = client.post("/simulate", json={"config": SMALL_CONFIG}).json()
        overridden = client.post(
            "/simulate", json={"config": SMALL_CONFIG, "seed": 99}
        ).json()
        assert base["metrics"]["seed"] == 11
        assert overridden["metrics"]["seed"] == 99

    def test_unknown_key_is_400_naming_the_key(self, client):
        response = client.post("/simulate", json={"config": {"quality": [0.8, 0.9]}})
        assert response.status_code == 400
        assert "quality" in response.json()["detail"]

    def test_bad_range_is_400(self, client):
        response = client.post(
            "/simulate", json={"config": {"quality_range": [0.9, 0.8]}}
        )
        assert response.status_code == 400
        assert "quality_range" in response.json()["detail"]


class TestSweep:
    def test_row_cardinality(self, client):
        response = client.post(
            "/sweep",
            json={
                "config": SMALL_CONFIG,
                "param": "m",
                "values": ["10", "20"],
                "seeds": [0, 1],
                "policies": ["BBS", "RANDOM"],
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["rows"] == 8
        assert body["metrics_csv"].count("\n") == 9

    def test_q_range_values(self, client):
        response = client.post(
            "/sweep",
            json={
                "config": SMALL_CONFIG,
                "param": "q-range",
                "values": ["0.75:0.8", "0.8:0.85"],
                "seeds": [0],
                "policies": ["BBS"],
            },
        )
        assert response.status_code == 200
        assert response.json()["rows"] == 2

    def test_unknown_param_rejected(self, client):
        response = client.post(
            "/sweep", json={"config": {}, "param": "delta", "values": ["1"]}
        )
        assert response.status_code == 400
        assert "param" in response.json()["detail"]

    def test_unknown_policy_rejected(self, client):
        response = client.post(
            "/sweep",
            json={"config": {}, "param": "m", "values": ["10"], "policies": ["LIFO"]},
        )
        assert response.status_code == 400


class TestNotifyEval:
    def test_table_and_csv(self, client):
        events, friends, _ = hand_check_log()
        response = client.post(
            "/notify-eval",
            json={
                "events_csv": format_events_csv(events),
                "friends_csv": format_friends_csv(friends),
                "fractions": [0.4],
                "methods": ["NWP"],
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert body["table"] == [
            {
                "method": "NWP", "fraction": 0.4, "predictions": 2,
                "correct": 1, "actual": 2, "precision": 0.5, "recall": 0.5,
            }
        ]
        assert body["csv"].splitlines()[0] == (
            "method,fraction,predictions,correct,actual,precision,recall"
        )

    def test_empty_events_rejected(self, client):
        response = client.post(
            "/notify-eval",
            json={"events_csv": "worker_id,timestamp_epoch_seconds\n"},
        )
        assert response.status_code == 400


class TestCalibrate:
    CSV = (
        "worker_id,category,task_id,answer,ground_truth\n"
        "w1,cat,q1,1,1\nw1,cat,q2,1,0\nw1,cat,q3,1,0\n"
        "w2,cat,q1,1,1\nw2,cat,q2,0,0\nw2,cat,q3,0,0\n"
        "w3,cat,q1,0,1\nw3,cat,q2,0,0\nw3,cat,q3,1,0\n"
    )

    def test_emits_both_csvs(self, client):
        response = client.post("/calibrate", json={"qualification_csv": self.CSV})
        assert response.status_code == 200
        body = response.json()
        accuracy_lines = body["accuracies_csv"].splitlines()
        assert accuracy_lines[0] == "worker_id,category,accuracy,flipped"
        assert len(accuracy_lines) == 4
        difficulty_lines = body["difficulties_csv"].splitlines()
        assert difficulty_lines[0] == "category,task_id,difficulty"
        assert [line.split(",")[1] for line in difficulty_lines[1:]] == ["q1", "q2", "q3"]

    def test_malformed_csv_rejected(self, client):
        response = client.post("/calibrate", json={"qualification_csv": "nope\n"})
        assert response.status_code == 400
