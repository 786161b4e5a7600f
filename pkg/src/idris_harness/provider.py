"""Model access behind a text-in/text-out contract.

Two providers are shipped: a live adapter speaking the OpenAI-compatible
chat-completion protocol, and a replay provider that answers from a recorded
fixture so whole runs reproduce offline with zero network access. A
recording wrapper captures live sessions into replay fixtures.

Replay fixture format: JSON lines, one object per line with fields
``digest`` and ``response``. The digest covers prompt text and model name
only, so a recorded session survives sampling-knob changes.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from .errors import CodeExtractionError, ProviderUnavailable, ReplayMiss
from .prompting import Prompt

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)

DEFAULT_TIMEOUT_S = 120.0
DEFAULT_RETRIES = 3


@dataclass(frozen=True)
class ProviderRequest:
    prompt: Prompt
    model_name: str
    temperature: float | None = None

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ValueError("model_name must be non-empty")

    @property
    def digest(self) -> str:
        return request_digest(self.prompt.text, self.model_name)


@dataclass(frozen=True)
class RawResponse:
    text: str
    provider_id: str
    latency_ms: float = 0.0


class Provider(Protocol):
    def complete(self, req: ProviderRequest) -> RawResponse: ...


def request_digest(prompt_text: str, model_name: str) -> str:
    """Stable lookup key for a request: sha256 over model name and prompt."""
    h = hashlib.sha256()
    h.update(model_name.encode("utf-8"))
    h.update(b"\x00")
    h.update(prompt_text.encode("utf-8"))
    return h.hexdigest()


def wrap_code(code: str) -> str:
    """Wrap code in the JSON envelope the prompts ask for."""
    return json.dumps({"code": code}, ensure_ascii=False)


def extract_code(raw: RawResponse) -> str:
    """Pull solution code out of a model response.

    Happy path: the response is a JSON object with the code under a "code"
    key. Fallback: the first fenced code block (real models sometimes break
    the JSON contract; a fenced block that itself holds the JSON envelope is
    unwrapped). Anything else is an extraction failure, which the refinement
    loop treats as one consumed attempt rather than a crash.
    """
    code = _json_code(raw.text)
    if code is not None:
        return code
    match = _FENCE_RE.search(raw.text)
    if match:
        body = match.group(1)
        inner = _json_code(body)
        return inner if inner is not None else body
    raise CodeExtractionError("response contains neither a code key nor a fenced block", raw_text=raw.text)


def _json_code(text: str) -> str | None:
    try:
        obj = json.loads(text.strip())
    except (json.JSONDecodeError, ValueError):
        return None
    if isinstance(obj, dict) and isinstance(obj.get("code"), str):
        return obj["code"]
    return None


class ReplayProvider:
    """Deterministic provider answering from a recorded fixture file."""

    provider_id = "replay"

    def __init__(self, fixture_path: Path | str):
        self._path = Path(fixture_path)
        self._entries = _load_fixture(self._path)

    def __len__(self) -> int:
        return len(self._entries)

    def complete(self, req: ProviderRequest) -> RawResponse:
        digest = req.digest
        try:
            text = self._entries[digest]
        except KeyError:
            raise ReplayMiss(
                f"no recorded response for digest {digest} "
                f"(exercise {req.prompt.exercise_slug}, {req.prompt.kind} prompt) in {self._path}"
            ) from None
        return RawResponse(text=text, provider_id=self.provider_id, latency_ms=0.0)


class LiveProvider:
    """OpenAI-compatible chat-completion client.

    Endpoint and key come from configuration or the PROVIDER_URL /
    PROVIDER_KEY environment variables, never from code. Transient transport
    failures are retried with exponential backoff.
    """

    provider_id = "live"

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        retries: int = DEFAULT_RETRIES,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        backoff_base_s: float = 1.0,
    ):
        if not endpoint:
            raise ValueError("endpoint must be non-empty")
        self._endpoint = endpoint
        self._api_key = api_key
        self._retries = max(0, retries)
        self._timeout_s = timeout_s
        self._backoff_base_s = backoff_base_s

    def complete(self, req: ProviderRequest) -> RawResponse:
        payload: dict = {
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt.text}],
        }
        if req.temperature is not None:
            payload["temperature"] = req.temperature
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            if attempt:
                time.sleep(self._backoff_base_s * 2 ** (attempt - 1))
            start = time.monotonic()
            try:
                resp = requests.post(self._endpoint, json=payload, headers=headers, timeout=self._timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = ProviderUnavailable(f"server returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise ProviderUnavailable(f"provider rejected request: {resp.status_code} {resp.text[:200]}")
            text = _parse_chat_completion(resp.json())
            latency_ms = (time.monotonic() - start) * 1000.0
            return RawResponse(text=text, provider_id=self.provider_id, latency_ms=latency_ms)
        raise ProviderUnavailable(f"transport failed after {self._retries + 1} tries: {last_error}")


class RecordingProvider:
    """Wrap any provider and append its responses to a replay fixture.

    Appends are serialized under a lock; duplicate digests are written once.
    """

    def __init__(self, inner: Provider, fixture_path: Path | str):
        self._inner = inner
        self._path = Path(fixture_path)
        self._lock = threading.Lock()
        self._seen: set[str] = set(_load_fixture(self._path)) if self._path.exists() else set()

    def complete(self, req: ProviderRequest) -> RawResponse:
        raw = self._inner.complete(req)
        digest = req.digest
        with self._lock:
            if digest not in self._seen:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with self._path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"digest": digest, "response": raw.text}, ensure_ascii=False) + "\n")
                self._seen.add(digest)
        return raw


def _parse_chat_completion(body: dict) -> str:
    try:
        text = body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProviderUnavailable(f"malformed completion body: {str(body)[:200]}") from None
    if text is None or text == "":
        raise ProviderUnavailable("provider returned an empty completion")
    return text


def _load_fixture(path: Path) -> dict[str, str]:
    if not path.is_file():
        raise ReplayMiss(f"replay fixture {path} does not exist")
    entries: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entries[obj["digest"]] = obj["response"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ReplayMiss(f"malformed fixture line {line_no} in {path}") from None
    return entries
