"""Completion-service client: templates, transports, repair, and retries.

The client renders versioned plain-text templates, sends them through a
transport (live HTTPS chat endpoint or recorded fixtures), and coerces the
reply into schema-valid JSON: one repair pass (strip prose and fences,
re-balance brackets), then up to ``max_retries`` fresh completions before
giving up with LLM_PROTOCOL_ERROR.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Protocol

import httpx
import jsonschema

from ..errors import AnalysisError

ENV_ENDPOINT = "PCIG_LLM_ENDPOINT"
ENV_API_KEY = "PCIG_LLM_API_KEY"
ENV_MODEL = "PCIG_LLM_MODEL"

LLM_ANALYSIS_SCHEMA_ID = "llm_analysis"
LLM_BOXES_SCHEMA_ID = "llm_boxes"


class LlmProtocolError(AnalysisError):
    def __init__(self, message: str, **details: Any) -> None:
        super().__init__("LLM_PROTOCOL_ERROR", message, **details)


class TransportError(Exception):
    """A single transport attempt failed; the client may retry."""


@dataclass
class TransportReply:
    text: str
    cost: float = 0.0


class LlmTransport(Protocol):
    def send(self, rendered_prompt: str, *, template_id: str, variables: dict[str, str], temperature: float) -> TransportReply:
        ...


def fixture_key(template_id: str, variables: dict[str, str]) -> str:
    """Stable content hash identifying one (template, variables) call."""
    blob = json.dumps([template_id, sorted(variables.items())], ensure_ascii=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:24]


class FixtureTransport:
    """Replays responses recorded on disk, keyed by content hash.

    Identical (template_id, variables) always yield identical bytes, which is
    what makes full pipeline runs reproducible offline.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def path_for(self, template_id: str, variables: dict[str, str]) -> Path:
        return self.directory / f"{fixture_key(template_id, variables)}.txt"

    def save_response(self, template_id: str, variables: dict[str, str], text: str) -> Path:
        path = self.path_for(template_id, variables)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path

    def send(self, rendered_prompt: str, *, template_id: str, variables: dict[str, str], temperature: float) -> TransportReply:
        path = self.path_for(template_id, variables)
        if not path.exists():
            raise TransportError(f"no recorded fixture at {path}")
        return TransportReply(text=path.read_text(encoding="utf-8"), cost=0.0)


class HttpChatTransport:
    """Minimal chat-completion POST client; endpoint and key come from config or env."""

    def __init__(
        self,
        endpoint: Optional[str] = None,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        cost_per_call: float = 0.0,
    ):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.model = model or os.environ.get(ENV_MODEL, "gpt-4-turbo")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.timeout = timeout
        self.cost_per_call = cost_per_call
        if not self.endpoint:
            raise ValueError(f"no completion endpoint configured; set {ENV_ENDPOINT}")

    def send(self, rendered_prompt: str, *, template_id: str, variables: dict[str, str], temperature: float) -> TransportReply:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": rendered_prompt}],
        }
        try:
            response = httpx.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            body = response.json()
            text = body["choices"][0]["message"]["content"]
        except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"completion call failed: {exc}") from exc
        return TransportReply(text=text, cost=self.cost_per_call)


_TEMPLATE_RE = re.compile(r"\{\{(\w+)\}\}")


def render_template(template_id: str, variables: dict[str, str]) -> str:
    """Substitute ``{{name}}`` placeholders in a shipped template file."""
    text = resources.files("pcig").joinpath(f"analysis/templates/{template_id}.txt").read_text("utf-8")

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name not in variables:
            raise ValueError(f"template {template_id!r} requires variable {name!r}")
        return variables[name]

    return _TEMPLATE_RE.sub(substitute, text)


_schema_cache: dict[str, dict] = {}


def load_schema(schema_id: str) -> dict:
    if schema_id not in _schema_cache:
        text = resources.files("pcig").joinpath(f"schemas/{schema_id}.schema.json").read_text("utf-8")
        _schema_cache[schema_id] = json.loads(text)
    return _schema_cache[schema_id]


def repair_json(text: str) -> str:
    """One mechanical repair pass: drop prose/fences, re-balance brackets."""
    fenced = re.search(r"```(?:json)?\s*([\s\S]*?)(?:```|\Z)", text)
    if fenced:
        text = fenced.group(1)
    start = text.find("{")
    if start == -1:
        return text.strip()
    text = text[start:]
    end = text.rfind("}")
    candidate = text[: end + 1] if end != -1 else text
    # Append closers for brackets left open outside string literals.
    stack = []
    in_string = False
    escaped = False
    for ch in candidate:
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch in "{[":
            stack.append(ch)
        elif ch == "}" and stack and stack[-1] == "{":
            stack.pop()
        elif ch == "]" and stack and stack[-1] == "[":
            stack.pop()
    if in_string:
        candidate += '"'
    for opener in reversed(stack):
        candidate += "}" if opener == "{" else "]"
    return candidate.strip()


class LlmClient:
    """Template-in, text-out completion client with cost accounting.

    Safe for concurrent use: the cost accumulator updates under a lock and
    transports hold no per-call state.
    """

    def __init__(self, transport: LlmTransport, temperature: float = 0.0, max_retries: int = 2):
        self.transport = transport
        self.temperature = temperature
        self.max_retries = max_retries
        self._cost = 0.0
        self._lock = threading.Lock()

    @property
    def cost(self) -> float:
        with self._lock:
            return self._cost

    def _add_cost(self, amount: float) -> None:
        with self._lock:
            self._cost += max(amount, 0.0)

    def complete(self, template_id: str, variables: dict[str, str]) -> str:
        """Render the template and return the raw completion text."""
        rendered = render_template(template_id, variables)
        last_error: Optional[Exception] = None
        for _ in range(1 + self.max_retries):
            try:
                reply = self.transport.send(
                    rendered, template_id=template_id, variables=variables, temperature=self.temperature
                )
            except TransportError as exc:
                last_error = exc
                continue
            self._add_cost(reply.cost)
            return reply.text
        raise LlmProtocolError(f"transport failed after {1 + self.max_retries} attempts: {last_error}")

    def complete_json(self, template_id: str, variables: dict[str, str], schema_id: str) -> dict:
        """Completion coerced to schema-valid JSON, with repair and retries."""
        schema = load_schema(schema_id)
        rendered = render_template(template_id, variables)
        last_error: Optional[Exception] = None
        for _ in range(1 + self.max_retries):
            try:
                reply = self.transport.send(
                    rendered, template_id=template_id, variables=variables, temperature=self.temperature
                )
            except TransportError as exc:
                last_error = exc
                continue
            self._add_cost(reply.cost)
            for candidate in (reply.text, repair_json(reply.text)):
                try:
                    document = json.loads(candidate)
                    jsonschema.validate(document, schema)
                    return document
                except (json.JSONDecodeError, jsonschema.ValidationError) as exc:
                    last_error = exc
        raise LlmProtocolError(
            f"response could not be repaired into schema {schema_id!r} "
            f"after {1 + self.max_retries} attempts: {last_error}"
        )
