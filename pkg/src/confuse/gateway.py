"""Uniform access to chat-completion models.

Three backends share one interface: Live (OpenAI-compatible wire protocol
with retries), Scripted (deterministic table lookup for tests), and Replay
(content-addressed disk cache wrapping another backend). Requests are
identified by a stable fingerprint over the raw request bytes, never over
parsed structure.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

import httpx


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class UnscriptedRequestError(GatewayError):
    def __init__(self, fingerprint: str):
        self.fingerprint = fingerprint
        super().__init__(f"unscripted request: {fingerprint}")


class StructuredOutputError(GatewayError):
    """Raised after two consecutive parse failures; carries both raw texts."""

    def __init__(self, message: str, raw_responses: list[str]):
        self.raw_responses = raw_responses
        super().__init__(message)


class KeyMissingError(StructuredOutputError):
    pass


@dataclass(frozen=True)
class ModelRef:
    name: str
    endpoint: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"

    def __post_init__(self):
        if not self.name:
            raise ValueError("model name must be non-empty")
        parsed = urlparse(self.endpoint)
        if not (parsed.scheme and parsed.netloc):
            raise ValueError(f"endpoint is not an absolute URL: {self.endpoint!r}")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    max_tokens: int = 512
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if not 0 < self.max_tokens <= 32768:
            raise ValueError(f"max_tokens out of range: {self.max_tokens}")


#: Default sampling for judgment calls: distinct samples are needed for voting.
JUDGE_PARAMS = SamplingParams(temperature=0.7, max_tokens=1024)
#: Default sampling for answer generation.
ANSWER_PARAMS = SamplingParams(temperature=0.0, max_tokens=1024)


def fingerprint(model: ModelRef, messages: list[dict], params: SamplingParams) -> str:
    """Stable hash of the request bytes.

    Hashing is over the serialized request, so two requests fingerprint
    equal only when their content is byte-identical.
    """
    payload = json.dumps(
        {
            "model": model.name,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "seed": params.seed,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend:
    """Interface: produce the assistant text for one chat completion."""

    def complete(self, model: ModelRef, messages: list[dict],
                 params: SamplingParams) -> str:
        raise NotImplementedError


class LiveBackend(Backend):
    """HTTP backend over ``{endpoint}/chat/completions``.

    Retries transient failures (transport errors, 5xx, 429) up to
    ``max_attempts`` with exponential backoff. Retries never change sample
    counts: they happen inside a single logical call.
    """

    RETRYABLE_STATUS = {429, 500, 502, 503, 504}

    def __init__(self, max_attempts: int = 3, backoff_base: float = 1.0,
                 timeout: float = 120.0):
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout

    def complete(self, model, messages, params):
        import os

        url = model.endpoint.rstrip("/") + "/chat/completions"
        headers = {}
        key = os.environ.get(model.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": model.name,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.seed is not None:
            body["seed"] = params.seed

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                resp = httpx.post(url, json=body, headers=headers,
                                  timeout=self.timeout)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if resp.status_code in self.RETRYABLE_STATUS:
                last_error = TransportError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise TransportError(
                    f"HTTP {resp.status_code}: {resp.text[:500]}")
            text = resp.json()["choices"][0]["message"]["content"]
            if not text:
                raise TransportError("empty completion from upstream")
            return text
        raise TransportError(f"retries exhausted: {last_error}")


class ScriptedBackend(Backend):
    """Deterministic backend for tests.

    Responses come either from an explicit fingerprint table or from
    ordered rules matched against the last user message. A rule maps a
    regex to a response queue; queues pop in order and their last entry
    repeats. Unknown requests raise UnscriptedRequestError.
    """

    def __init__(self, script: dict[str, str] | None = None):
        self.script = dict(script or {})
        self.rules: list[tuple[re.Pattern, list[str]]] = []
        self.call_log: list[dict] = []

    @classmethod
    def from_rules(cls, rules: list[tuple[str, str | list[str]]]) -> "ScriptedBackend":
        backend = cls()
        for pattern, responses in rules:
            if isinstance(responses, str):
                responses = [responses]
            backend.rules.append((re.compile(pattern, re.DOTALL), list(responses)))
        return backend

    def complete(self, model, messages, params):
        fp = fingerprint(model, messages, params)
        prompt = messages[-1]["content"]
        self.call_log.append({"model": model.name, "prompt": prompt,
                              "fingerprint": fp})
        if fp in self.script:
            return self.script[fp]
        for pattern, queue in self.rules:
            if pattern.search(prompt):
                return queue.pop(0) if len(queue) > 1 else queue[0]
        raise UnscriptedRequestError(fp)


class ReplayBackend(Backend):
    """Content-addressed disk cache, one file per fingerprint.

    Reads are lock-free; writes are serialized. With no inner backend a
    cache miss is an error, which makes replay runs fully offline.
    """

    def __init__(self, cache_dir: str | Path, inner: Backend | None = None):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.inner = inner
        self._write_lock = threading.Lock()

    def _path(self, fp: str) -> Path:
        return self.cache_dir / f"{fp}.json"

    def complete(self, model, messages, params):
        fp = fingerprint(model, messages, params)
        path = self._path(fp)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))["response"]
        if self.inner is None:
            raise UnscriptedRequestError(fp)
        text = self.inner.complete(model, messages, params)
        with self._write_lock:
            path.write_text(json.dumps({"response": text}, ensure_ascii=False),
                            encoding="utf-8")
        return text


class Gateway:
    """Front door for all model calls.

    Concurrency is limited per model name (token bucket of in-flight
    requests, default 4).
    """

    def __init__(self, backend: Backend, max_inflight: int = 4):
        self.backend = backend
        self._limits: dict[str, threading.Semaphore] = {}
        self._limits_lock = threading.Lock()
        self.max_inflight = max_inflight

    def _limit(self, name: str) -> threading.Semaphore:
        with self._limits_lock:
            if name not in self._limits:
                self._limits[name] = threading.Semaphore(self.max_inflight)
            return self._limits[name]

    def complete(self, model: ModelRef, messages: list[dict],
                 params: SamplingParams) -> str:
        if not messages:
            raise ValueError("messages must be non-empty")
        if messages[-1].get("role") != "user":
            raise ValueError("last message role must be 'user'")
        with self._limit(model.name):
            text = self.backend.complete(model, messages, params)
        if not text:
            raise TransportError("empty completion")
        return text

    def ask(self, model: ModelRef, prompt: str, params: SamplingParams) -> str:
        return self.complete(model, [{"role": "user", "content": prompt}], params)

    def complete_structured(self, model: ModelRef, messages: list[dict],
                            params: SamplingParams,
                            required_keys: list[str]) -> dict:
        """Complete and extract the first JSON object from the response.

        On parse failure, re-asks once with an explicit valid-JSON
        instruction before raising StructuredOutputError.
        """
        if not required_keys:
            raise ValueError("required_keys must be non-empty")
        raw_responses = []
        text = self.complete(model, messages, params)
        raw_responses.append(text)
        obj = extract_json_object(text)
        if obj is None:
            retry_messages = messages + [
                {"role": "assistant", "content": text},
                {"role": "user", "content": "Your previous response was not "
                 "valid JSON. Respond with valid JSON only."},
            ]
            text = self.complete(model, retry_messages, params)
            raw_responses.append(text)
            obj = extract_json_object(text)
            if obj is None:
                raise StructuredOutputError(
                    "no JSON object in two consecutive responses", raw_responses)
        missing = [k for k in required_keys if k not in obj]
        if missing:
            raise KeyMissingError(
                f"missing keys in structured output: {missing}", raw_responses)
        return obj

    def ask_structured(self, model: ModelRef, prompt: str,
                       params: SamplingParams, required_keys: list[str]) -> dict:
        return self.complete_structured(
            model, [{"role": "user", "content": prompt}], params, required_keys)


def extract_json_object(text: str) -> dict | None:
    """Return the first balanced-brace JSON object in text, or None.

    Markdown code fences are stripped first; models routinely wrap the
    object in prose or fences despite instructions.
    """
    cleaned = re.sub(r"```(?:json)?", "", text)
    start = cleaned.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escape = False
        for i in range(start, len(cleaned)):
            ch = cleaned[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    candidate = cleaned[start:i + 1]
                    try:
                        obj = json.loads(candidate)
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = cleaned.find("{", start + 1)
    return None
