import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from awareauto.llm import (
    API_KEY_ENV,
    CompletionRequest,
    CredentialError,
    MissingFixtureError,
    RecordingBackend,
    RemoteBackend,
    ScriptedBackend,
    TransportError,
    complete,
    fixture_key,
)

REQ = CompletionRequest("system prompt", "user message")


class StubLLMServer:
    """Tiny chat-completion endpoint; optionally fails the first N calls."""

    def __init__(self, reply="OK", fail_first=0):
        self.requests = []
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                outer.requests.append((dict(self.headers), body))
                if len(outer.requests) <= fail_first:
                    self.send_response(500)
                    self.end_headers()
                    return
                payload = json.dumps(
                    {"choices": [{"message": {"content": outer.pick_reply(body)}}]}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.reply = reply
        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def pick_reply(self, body):
        return self.reply

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_port}/v1/chat"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()


class TestFixtureKey:
    def test_platform_stable_value(self):
        # sha256("system prompt" + NUL + "user message"); frozen so recorded
        # fixture names stay valid across machines
        assert fixture_key(REQ) == (
            "448d79be58efb2296b5c077c0528c2bdb495d053bba07127d064e200e97973fe"
        )

    def test_sampling_parameters_do_not_change_the_key(self):
        tuned = CompletionRequest("system prompt", "user message", temperature=0.9, max_tokens=17)
        assert fixture_key(tuned) == fixture_key(REQ)

    def test_prompts_change_the_key(self):
        assert fixture_key(CompletionRequest("system prompt", "other")) != fixture_key(REQ)


class TestScripted:
    def test_known_key_returns_exact_bytes(self, tmp_path):
        text = "OPERATION: CREATE\nand so on\n"
        (tmp_path / f"{fixture_key(REQ)}.txt").write_text(text)
        assert complete(ScriptedBackend(tmp_path), REQ) == text

    def test_missing_fixture_names_expected_file(self, tmp_path):
        with pytest.raises(MissingFixtureError) as err:
            complete(ScriptedBackend(tmp_path), REQ)
        assert fixture_key(REQ) in str(err.value)
        assert str(tmp_path) in str(err.value)


class TestRemote:
    def test_happy_path_and_auth_header(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV, "sekrit")
        with StubLLMServer(reply="OK") as stub:
            backend = RemoteBackend(stub.url, backoff_s=0)
            assert complete(backend, REQ) == "OK"
            headers, body = stub.requests[0]
            assert headers["Authorization"] == "Bearer sekrit"
            assert body["messages"][0] == {"role": "system", "content": "system prompt"}
            assert body["messages"][1] == {"role": "user", "content": "user message"}

    def test_retries_then_succeeds(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV, "k")
        with StubLLMServer(reply="OK", fail_first=2) as stub:
            backend = RemoteBackend(stub.url, backoff_s=0)
            assert complete(backend, REQ) == "OK"
            assert len(stub.requests) == 3

    def test_gives_up_after_three_attempts(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV, "k")
        with StubLLMServer(fail_first=99) as stub:
            backend = RemoteBackend(stub.url, backoff_s=0)
            with pytest.raises(TransportError):
                complete(backend, REQ)
            assert len(stub.requests) == 3

    def test_missing_credential(self, monkeypatch):
        monkeypatch.delenv(API_KEY_ENV, raising=False)
        with pytest.raises(CredentialError, match=API_KEY_ENV):
            complete(RemoteBackend("http://127.0.0.1:1/x"), REQ)


class TestRecording:
    def test_record_then_replay_round_trip(self, tmp_path, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV, "k")
        with StubLLMServer(reply="OK") as stub:
            recording = RecordingBackend(RemoteBackend(stub.url, backoff_s=0), tmp_path)
            assert complete(recording, REQ) == "OK"
        fixture = tmp_path / f"{fixture_key(REQ)}.txt"
        assert fixture.read_text() == "OK"
        assert complete(ScriptedBackend(tmp_path), REQ) == "OK"


class TestRequestValidation:
    def test_empty_prompts_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest("", "x")
        with pytest.raises(ValueError):
            CompletionRequest("x", "")

    def test_temperature_range(self):
        with pytest.raises(ValueError):
            CompletionRequest("a", "b", temperature=1.5)
