"""LLM chat backends behind one contract: ``complete(prompt, meta) -> str``.

Two implementations: a remote OpenAI-compatible chat-completions client and a
scripted backend that replays canned completions from a fixture file, which
keeps pipeline and metric runs fully offline and reproducible.

Scripted fixture format (JSONL, first match wins)::

    {"match": {"record_id": "r7"}, "completion": "..."}
    {"match": {"turn_index": 0}, "completion": "..."}
    {"match": {"prompt_sha256": "<hex>"}, "completion": "..."}

All keys inside one ``match`` object must hold (AND).  ``turn_index`` matches
the caller-provided meta value when present, otherwise the backend's own call
counter.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import requests

from .errors import BackendTimeout, BackendUnavailable


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ScriptRule:
    match: dict
    completion: str


class ScriptedBackend:
    """Deterministic LLM stand-in replaying fixture completions."""

    backend_id = "scripted"

    def __init__(self, rules: list[ScriptRule]):
        self.rules = list(rules)
        self._calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        rules = []
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise BackendUnavailable(f"scripted fixture unreadable: {e}") from None
        for i, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rules.append(ScriptRule(match=dict(obj["match"]), completion=str(obj["completion"])))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise BackendUnavailable(f"scripted fixture line {i + 1}: {e}") from None
        return cls(rules)

    def _matches(self, rule: ScriptRule, prompt: str, meta: Mapping, call_index: int) -> bool:
        for key, expected in rule.match.items():
            if key == "prompt_sha256":
                if prompt_sha256(prompt) != expected:
                    return False
            elif key == "turn_index":
                actual = meta.get("turn_index", call_index)
                if actual != expected:
                    return False
            elif meta.get(key) != expected:
                return False
        return True

    def complete(self, prompt: str, meta: Mapping | None = None) -> str:
        meta = meta or {}
        with self._lock:
            call_index = self._calls
            self._calls += 1
        for rule in self.rules:
            if self._matches(rule, prompt, meta, call_index):
                return rule.completion
        raise BackendUnavailable(
            f"no scripted completion matches call {call_index} (meta={dict(meta)})"
        )

    def reset(self) -> None:
        with self._lock:
            self._calls = 0


class RemoteChatBackend:
    """OpenAI-compatible chat-completions client; temperature 0 by default."""

    backend_id = "remote"

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        temperature: float = 0.0,
        timeout: float = 60.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.temperature = temperature
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, prompt: str, meta: Mapping | None = None) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        try:
            resp = self.session.post(
                self.endpoint, json=payload, headers=headers, timeout=self.timeout
            )
        except requests.Timeout as e:
            raise BackendTimeout(str(e)) from None
        except requests.RequestException as e:
            raise BackendUnavailable(str(e)) from None
        if resp.status_code != 200:
            raise BackendUnavailable(f"chat endpoint returned {resp.status_code}", resp.status_code)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise BackendUnavailable(f"malformed chat response: {e}") from None
