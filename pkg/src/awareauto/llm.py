"""Text-completion backends: remote HTTP, scripted fixtures, and recording.

The scripted backend replays fixture files keyed by a platform-stable hash
of the prompts, which keeps every pipeline test deterministic. The
recording backend proxies a remote endpoint and writes those fixtures.
"""

from __future__ import annotations

import hashlib
import os
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

API_KEY_ENV = "AWAREAUTO_LLM_API_KEY"


class LLMError(Exception):
    pass


class TransportError(LLMError):
    """Remote call failed after retries."""


class CredentialError(LLMError):
    pass


class MissingFixtureError(LLMError):
    def __init__(self, key: str, path: Path):
        super().__init__(
            f"no fixture for request {key}; create {path} with the expected completion"
        )
        self.key = key
        self.path = path


@dataclass(frozen=True)
class CompletionRequest:
    system_prompt: str
    user_message: str
    temperature: float = 0.0
    max_tokens: int = 2048

    def __post_init__(self):
        if not self.system_prompt or not self.user_message:
            raise ValueError("prompts must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must be in [0, 1]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def fixture_key(request: CompletionRequest) -> str:
    """Stable fixture filename stem for a request.

    Only the prompts participate, so recorded fixtures survive sampling
    parameter tuning.
    """
    blob = request.system_prompt.encode("utf-8") + b"\x00" + request.user_message.encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class ScriptedBackend:
    """Replays one fixture file per request from a directory."""

    kind = "scripted"

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)

    def complete(self, request: CompletionRequest) -> str:
        key = fixture_key(request)
        path = self.fixtures_dir / f"{key}.txt"
        if not path.is_file():
            raise MissingFixtureError(key, path)
        return path.read_text(encoding="utf-8")


class RemoteBackend:
    """Chat-completion-style HTTP backend with bounded retries."""

    kind = "remote_http"

    def __init__(
        self,
        endpoint: str,
        model: str = "default",
        timeout_s: float = 60.0,
        max_attempts: int = 3,
        backoff_s: float = 0.5,
        api_key: str | None = None,
    ):
        if not endpoint:
            raise ValueError("remote backend needs an endpoint")
        self.endpoint = endpoint
        self.model = model
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._api_key = api_key

    def _key(self) -> str:
        key = self._api_key or os.environ.get(API_KEY_ENV)
        if not key:
            raise CredentialError(f"set {API_KEY_ENV} to use the remote backend")
        return key

    def complete(self, request: CompletionRequest) -> str:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_message},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {self._key()}"}
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = httpx.post(self.endpoint, json=body, headers=headers, timeout=self.timeout_s)
                resp.raise_for_status()
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
                last = exc
        raise TransportError(f"remote completion failed after {self.max_attempts} attempts: {last}")


class RecordingBackend:
    """Proxies a remote backend and saves each completion as a fixture."""

    kind = "recording"

    def __init__(self, remote: RemoteBackend, fixtures_dir: str | Path):
        self.remote = remote
        self.fixtures_dir = Path(fixtures_dir)

    def complete(self, request: CompletionRequest) -> str:
        text = self.remote.complete(request)
        self.fixtures_dir.mkdir(parents=True, exist_ok=True)
        (self.fixtures_dir / f"{fixture_key(request)}.txt").write_text(text, encoding="utf-8")
        return text


def complete(backend, request: CompletionRequest) -> str:
    return backend.complete(request)
