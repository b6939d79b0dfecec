import json
import threading
import time
from importlib import resources

import pytest
from fastapi.testclient import TestClient

from awareauto.config import Config
from awareauto.pipeline import Pipeline
from awareauto.service import RefinementService, create_app

FLOW = json.loads(
    resources.files("awareauto").joinpath("data/session_flow.json").read_text(encoding="utf-8")
)


@pytest.fixture()
def client():
    service = RefinementService(Pipeline.from_config(Config()))
    return TestClient(create_app(service=service))


def wait_for_grounding(client, session_id, round_no, timeout=5.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        session = client.get(f"/sessions/{session_id}").json()
        entry = next(h for h in session["history"] if h["round"] == round_no)
        if entry["grounding_status"] != "pending":
            return session, entry
        time.sleep(0.01)
    raise AssertionError(f"grounding for round {round_no} never finished")


def post_round(client, session_id, round_spec):
    if round_spec["kind"] == "expression":
        return client.post(
            f"/sessions/{session_id}/expression",
            json={"expression": round_spec["expression"], "snapshot": round_spec["snapshot"]},
        )
    return client.post(f"/sessions/{session_id}/edit", json={"document": round_spec["document"]})


class TestThreeRoundFlow:
    def test_expression_modification_edit_confirm(self, client):
        session_id = client.post("/sessions").json()["id"]

        # round 1: initial expression; stage-1 result arrives immediately
        r1 = post_round(client, session_id, FLOW["rounds"][0])
        assert r1.status_code == 200
        body = r1.json()
        assert body["round"] == 1
        assert body["kind"] == "expression"
        assert body["nl_rule"].startswith("OPERATION: CREATE")
        assert body["grounding_status"] == "pending"
        _, entry1 = wait_for_grounding(client, session_id, 1)
        assert entry1["grounded"]["feasible"] is True

        # round 2: spoken correction becomes a MODIFY applied to the draft
        r2 = post_round(client, session_id, FLOW["rounds"][1])
        assert r2.json()["round"] == 2
        assert r2.json()["kind"] == "modification_expression"
        assert "porch light" in r2.json()["nl_rule"]
        _, entry2 = wait_for_grounding(client, session_id, 2)
        assert entry2["grounded"]["feasible"] is False
        codes = {e["code"] for e in entry2["errors"] if e.get("code")}
        assert codes == {"UNKNOWN_TARGET"}
        confirm = client.post(f"/sessions/{session_id}/confirm")
        assert confirm.status_code == 409  # infeasible draft is rejected

        # round 3: direct edit fixes the rule
        r3 = post_round(client, session_id, FLOW["rounds"][2])
        assert r3.json()["round"] == 3
        assert r3.json()["kind"] == "direct_edit"
        _, entry3 = wait_for_grounding(client, session_id, 3)
        assert entry3["grounded"]["feasible"] is True

        confirmed = client.post(f"/sessions/{session_id}/confirm")
        assert confirmed.status_code == 200
        assert confirmed.json() == {
            "deployed": FLOW["deploy_name"],
            "rounds": 3,
            "operation": "create",
        }

        rules = client.get("/rules").json()["rules"]
        assert [r["name"] for r in rules] == [FLOW["deploy_name"]]
        session = client.get(f"/sessions/{session_id}").json()
        assert session["closed"] is True
        assert session["round"] == 3

    def test_history_records_every_round_exactly_once(self, client):
        session_id = client.post("/sessions").json()["id"]
        for i, round_spec in enumerate(FLOW["rounds"], start=1):
            post_round(client, session_id, round_spec)
            wait_for_grounding(client, session_id, i)
        history = client.get(f"/sessions/{session_id}").json()["history"]
        assert [h["round"] for h in history] == [1, 2, 3]
        assert all(h["nl_rule"] for h in history)
        assert all(h["grounding_status"] == "done" for h in history)


class TestEditErrors:
    def test_parse_error_reports_position_and_preserves_draft(self, client):
        session_id = client.post("/sessions").json()["id"]
        post_round(client, session_id, FLOW["rounds"][0])
        wait_for_grounding(client, session_id, 1)
        before = client.get(f"/sessions/{session_id}").json()["draft_nl"]

        bad = "OPERATION: CREATE\nNAME: x\nTRIGGERS:\n  T1 | EVENT | go\nACTIONS:\n  G1 WHEN T9:\n    A1 | do\n"
        resp = client.post(f"/sessions/{session_id}/edit", json={"document": bad})
        assert resp.status_code == 400
        detail = resp.json()["detail"]
        assert detail["line"] == 6 and detail["column"] == 1
        after = client.get(f"/sessions/{session_id}").json()
        assert after["draft_nl"] == before
        assert after["round"] == 1  # rejected input does not consume a round


class TestSessionRules:
    def test_unknown_session_is_404(self, client):
        assert client.get("/sessions/nope").status_code == 404

    def test_confirm_without_draft_is_409(self, client):
        session_id = client.post("/sessions").json()["id"]
        assert client.post(f"/sessions/{session_id}/confirm").status_code == 409

    def test_delete_unknown_rule_is_404(self, client):
        assert client.delete("/rules/ghost").status_code == 404

    def test_sessions_are_isolated(self, client):
        a = client.post("/sessions").json()["id"]
        b = client.post("/sessions").json()["id"]
        post_round(client, a, FLOW["rounds"][0])
        wait_for_grounding(client, a, 1)
        session_b = client.get(f"/sessions/{b}").json()
        assert session_b["draft_nl"] is None and session_b["history"] == []

    def test_delete_expression_round_trip(self, client):
        # deploy via the three-round flow, then delete through a new session
        session_id = client.post("/sessions").json()["id"]
        for round_spec in FLOW["rounds"]:
            post_round(client, session_id, round_spec)
            wait_for_grounding(
                client, session_id, len(client.get(f"/sessions/{session_id}").json()["history"])
            )
        client.post(f"/sessions/{session_id}/confirm")
        assert client.get("/rules").json()["rules"]

        resp = client.delete(f"/rules/{FLOW['deploy_name']}")
        assert resp.status_code == 200
        assert client.get("/rules").json()["rules"] == []


class TestSimulatorEndpoints:
    def deploy_sleep_mode(self, client):
        session_id = client.post("/sessions").json()["id"]
        for round_spec in FLOW["rounds"]:
            post_round(client, session_id, round_spec)
            wait_for_grounding(
                client, session_id, len(client.get(f"/sessions/{session_id}").json()["history"])
            )
        assert client.post(f"/sessions/{session_id}/confirm").status_code == 200

    def test_events_advance_state_and_trace(self, client):
        self.deploy_sleep_mode(client)
        resp = client.post(
            "/sim/events",
            json={"events": [{"at": 10, "target": "VoiceAssistant", "interface": "ruleName", "value": "sleep mode"}]},
        )
        assert resp.status_code == 200
        executed = resp.json()["executed"]
        assert [(r["at"], r["target"], r["parameter"]) for r in executed] == [
            (10, "TV", "off"),
            (10, "ceiling light", "off"),
            (10, "speaker", "stop"),
            (10, "air conditioner", "on"),
        ]
        state = client.get("/sim/state").json()
        assert state["states"]["air conditioner"]["switch"] == "on"
        trace = client.get("/sim/trace").json()["trace"]
        assert len(trace) == 4
        advanced = client.post("/sim/advance", json={"to": 600}).json()
        assert advanced["now"] == 600 and advanced["executed"] == []

    def test_bad_event_rejected(self, client):
        resp = client.post(
            "/sim/events",
            json={"events": [{"at": 1, "target": "ghost", "interface": "switch", "value": "on"}]},
        )
        assert resp.status_code == 400


class SlowBackend:
    """Blocks completions until released; for in-flight guard tests."""

    def __init__(self, inner):
        self.inner = inner
        self.release = threading.Event()

    def complete(self, request):
        if "OPERATION:" in request.user_message:
            self.release.wait(timeout=5)
        return self.inner.complete(request)


def test_one_inference_in_flight_per_session():
    from awareauto.config import make_backend

    config = Config()
    backend = SlowBackend(make_backend(config))
    from awareauto.context import load_catalog

    pipeline = Pipeline(load_catalog(config.catalog_path), backend)
    client = TestClient(create_app(service=RefinementService(pipeline)))
    session_id = client.post("/sessions").json()["id"]
    first = post_round(client, session_id, FLOW["rounds"][0])
    assert first.status_code == 200
    # grounding is stalled: a second input must be refused
    second = post_round(client, session_id, FLOW["rounds"][1])
    assert second.status_code == 409
    backend.release.set()
    wait_for_grounding(client, session_id, 1)
    third = post_round(client, session_id, FLOW["rounds"][1])
    assert third.status_code == 200
