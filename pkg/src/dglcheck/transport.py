"""LLM transports: an HTTPS chat-completions client and a replay of canned answers."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time

import requests

log = logging.getLogger(__name__)

API_KEY_ENV = "DGL_LLM_API_KEY"
BASE_URL_ENV = "DGL_LLM_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"


class TransportError(RuntimeError):
    pass


class ReplayExhausted(TransportError):
    pass


class ReplayMismatch(TransportError):
    pass


def request_hash(messages, params) -> str:
    body = json.dumps({"messages": messages, "params": params}, sort_keys=True,
                      ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


class LlmTransport:
    """``send(messages, params) -> completion text``.

    ``params`` carries ``model``, ``temperature`` and ``max_tokens``.
    ``ordered`` transports hand out answers in call order, so callers must
    not issue requests concurrently.
    """

    ordered = False

    def send(self, messages: list, params: dict) -> str:
        raise NotImplementedError


class ReplayTransport(LlmTransport):
    """Answers from a JSONL transcript, one ``{"response": ...}`` per line.

    A line may carry ``request_hash``; when present it must match the
    request being answered.
    """

    ordered = True

    def __init__(self, entries):
        self.entries = [e if isinstance(e, dict) else {"response": e} for e in entries]
        self.pos = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "ReplayTransport":
        entries = []
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as e:
                    raise TransportError(f"{path}:{n}: {e}") from None
                if "response" not in entry:
                    raise TransportError(f"{path}:{n}: missing 'response'")
                entries.append(entry)
        return cls(entries)

    @property
    def remaining(self) -> int:
        return len(self.entries) - self.pos

    def send(self, messages, params):
        with self._lock:
            if self.pos >= len(self.entries):
                raise ReplayExhausted(f"replay transcript exhausted after {self.pos} responses")
            entry = self.entries[self.pos]
            self.pos += 1
        want = entry.get("request_hash")
        if want and want != request_hash(messages, params):
            raise ReplayMismatch(f"request {self.pos} does not match the recorded hash")
        return entry["response"]


class HttpTransport(LlmTransport):
    """OpenAI-style ``POST {base_url}/chat/completions`` with retries."""

    retry_statuses = frozenset({429, 500, 502, 503, 504})

    def __init__(self, api_key=None, base_url=None, timeout=30.0, retries=3,
                 backoff=1.0, session=None):
        self.api_key = api_key or os.environ.get(API_KEY_ENV)
        if not self.api_key:
            raise TransportError(f"no API key: set {API_KEY_ENV}")
        self.base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def send(self, messages, params):
        body = {"model": params["model"], "messages": messages}
        if params.get("temperature") is not None:
            body["temperature"] = params["temperature"]
        if params.get("max_tokens"):
            body["max_tokens"] = params["max_tokens"]
        headers = {"Authorization": f"Bearer {self.api_key}"}
        url = f"{self.base_url}/chat/completions"
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=self.timeout)
            except requests.RequestException as e:
                last = str(e)
                log.warning("LLM request failed (%s), attempt %d", e, attempt + 1)
                continue
            if resp.status_code in self.retry_statuses:
                last = f"HTTP {resp.status_code}"
                log.warning("LLM endpoint returned %s, attempt %d", resp.status_code, attempt + 1)
                continue
            if resp.status_code != 200:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as e:
                raise TransportError(f"malformed completion response: {e}") from None
        raise TransportError(f"giving up after {self.retries + 1} attempts: {last}")
