"""Chat-completions gateway used by the ``llm`` planning backend.

Requests are built deterministically (canonical JSON), so a replay file keyed
by the SHA-256 digest of the request body can stand in for a live endpoint.
An endpoint of the form ``replay:<path>`` selects that replay transport.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from netorch import canonical
from netorch.errors import (
    AuthError,
    BackendError,
    EnvelopeParseError,
    PlanRejected,
    ProtocolError,
    TransportError,
)
from netorch.executor import ToolCall, tool_call_from_obj
from netorch.planner import Plan, Slot, TaskSpec, Violation, _freeze, validate_plan
from netorch.registry import Registry

ROLES = ("system", "user", "assistant", "tool")
BACKOFF_BASE_S = 0.5
BACKOFF_FACTOR = 2.0


@dataclass(frozen=True)
class GatewayConfig:
    endpoint: str
    api_key: str = ""
    model: str = "mistral-7b-instruct"
    timeout_ms: int = 30_000
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    @classmethod
    def from_env(cls, env=None, **overrides) -> "GatewayConfig":
        env = os.environ if env is None else env
        values = {
            "endpoint": env.get("NETORCH_LLM_ENDPOINT", ""),
            "api_key": env.get("NETORCH_LLM_API_KEY", ""),
            "model": env.get("NETORCH_LLM_MODEL", cls.model),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str = ""
    tool_calls: tuple[ToolCall, ...] | None = None
    tool_call_id: str | None = None

    def to_wire(self) -> dict:
        msg: dict = {"role": self.role, "content": self.content}
        if self.tool_calls:
            msg["tool_calls"] = [
                {
                    "id": c.call_id,
                    "type": "function",
                    "function": {"name": c.tool, "arguments": canonical.dumps(c.arguments)},
                }
                for c in self.tool_calls
            ]
        if self.tool_call_id is not None:
            msg["tool_call_id"] = self.tool_call_id
        return msg


def check_messages(messages: list[ChatMessage]) -> None:
    if not messages:
        raise ValueError("messages must be non-empty")
    if messages[0].role != "system":
        raise ValueError("first message must be the system prompt")
    seen: set[str] = set()
    for m in messages:
        if m.role not in ROLES:
            raise ValueError(f"unknown role {m.role!r}")
        for c in m.tool_calls or ():
            seen.add(c.call_id)
        if m.role == "tool" and m.tool_call_id not in seen:
            raise ValueError(f"tool message references unknown call {m.tool_call_id!r}")


# ------------------------------------------------------------------ prompts


def build_system_prompt(registry: Registry) -> str:
    lines = [
        "You are NetOrch, a coordinator for wireless network resource allocation.",
        "Break each user request into tasks and call one tool per task with JSON arguments.",
        "Matrices are passed as {\"rows\": r, \"cols\": c, \"data\": [row-major values]}.",
        "",
    ]
    models = registry.list_models()
    if not models:
        lines.append("No models are available in the repository.")
    else:
        lines.append(f"You have access to a repository of {len(models)} wireless models:")
        for m in models:
            slots = ", ".join(f"{s.name}:{s.type}{'' if s.required else '?'}" for s in m.input_schema)
            lines.append(f"- {m.model_id} [{m.task_type} / {m.objective}]: {m.description}")
            lines.append(f"  inputs: {slots}")
    return "\n".join(lines) + "\n"


_SLOT_JSON_SCHEMA = {
    "number": {"type": "number"},
    "number_list": {"type": "array", "items": {"type": "number"}},
    "matrix": {
        "type": "object",
        "properties": {
            "rows": {"type": "integer"},
            "cols": {"type": "integer"},
            "data": {"type": "array", "items": {"type": "number"}},
        },
        "required": ["cols", "data", "rows"],
    },
    "string": {"type": "string"},
}


def tool_schemas(registry: Registry) -> list[dict]:
    tools = []
    for m in registry.list_models():
        props = {s.name: _SLOT_JSON_SCHEMA[s.type] for s in m.input_schema}
        tools.append(
            {
                "type": "function",
                "function": {
                    "name": m.model_id,
                    "description": m.description,
                    "parameters": {
                        "type": "object",
                        "properties": props,
                        "required": sorted(s.name for s in m.input_schema if s.required),
                        "additionalProperties": False,
                    },
                },
            }
        )
    return tools


def build_request(config: GatewayConfig, messages: list[ChatMessage], tools: list[dict]) -> bytes:
    body = {"model": config.model, "messages": [m.to_wire() for m in messages]}
    if tools:
        body["tools"] = tools
    return canonical.encode(body)


def request_digest(body: bytes) -> str:
    return hashlib.sha256(body).hexdigest()


# --------------------------------------------------------------- transports


class Transport(Protocol):
    def __call__(self, url: str, headers: dict, body: bytes, timeout_s: float) -> tuple[int, bytes]: ...


def http_transport(url: str, headers: dict, body: bytes, timeout_s: float) -> tuple[int, bytes]:
    try:
        resp = httpx.post(url, headers=headers, content=body, timeout=timeout_s)
    except httpx.HTTPError as exc:
        raise TransportError(str(exc)) from exc
    return resp.status_code, resp.content


@dataclass
class ReplayTransport:
    """Serves scripted responses keyed by request digest; unknown digests fail."""

    responses: dict[str, object] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "ReplayTransport":
        responses = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    responses[entry["digest"]] = entry["response"]
                except (ValueError, KeyError, TypeError) as exc:
                    raise BackendError(f"bad replay line {lineno}: {exc}") from exc
        return cls(responses)

    def add(self, body: bytes, response) -> str:
        digest = request_digest(body)
        self.responses[digest] = response
        return digest

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            for digest in sorted(self.responses):
                fh.write(canonical.encode({"digest": digest, "response": self.responses[digest]}) + b"\n")

    def __call__(self, url, headers, body, timeout_s):
        digest = request_digest(body)
        if digest not in self.responses:
            raise BackendError(f"no scripted response for request digest {digest}")
        return 200, canonical.encode(self.responses[digest])


def transport_for(config: GatewayConfig) -> Callable:
    if config.endpoint.startswith("replay:"):
        return ReplayTransport.load(config.endpoint[len("replay:"):])
    if not config.endpoint:
        raise BackendError("no LLM endpoint configured (set NETORCH_LLM_ENDPOINT)")
    return http_transport


# ----------------------------------------------------------------- protocol


def _parse_tool_call(raw, path: str) -> ToolCall:
    if not isinstance(raw, dict):
        raise ProtocolError(path)
    fn = raw.get("function")
    if not isinstance(fn, dict):
        raise ProtocolError(path + ".function")
    if not isinstance(raw.get("id"), str) or not raw["id"]:
        raise ProtocolError(path + ".id")
    args = fn.get("arguments", "{}")
    if isinstance(args, str):
        try:
            args = json.loads(args) if args.strip() else {}
        except ValueError as exc:
            raise ProtocolError(path + ".function.arguments", f"unparsable arguments ({exc.msg})") from exc
    try:
        return tool_call_from_obj({"call_id": raw["id"], "tool": fn.get("name"), "arguments": args})
    except EnvelopeParseError as exc:
        field_map = {"tool": "function.name", "arguments": "function.arguments"}
        raise ProtocolError(f"{path}.{field_map.get(exc.path, exc.path)}") from exc


def parse_response(body: bytes) -> ChatMessage:
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise ProtocolError("$", f"unparsable body ({exc})") from exc
    try:
        msg = obj["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProtocolError("choices[0].message") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("choices[0].message")
    role = msg.get("role", "assistant")
    if role != "assistant":
        raise ProtocolError("choices[0].message.role")
    content = msg.get("content") or ""
    if not isinstance(content, str):
        raise ProtocolError("choices[0].message.content")
    raw_calls = msg.get("tool_calls") or []
    if not isinstance(raw_calls, list):
        raise ProtocolError("choices[0].message.tool_calls")
    calls = tuple(
        _parse_tool_call(c, f"choices[0].message.tool_calls[{i}]") for i, c in enumerate(raw_calls)
    )
    return ChatMessage("assistant", content, calls or None)


def chat_complete(
    config: GatewayConfig,
    messages: list[ChatMessage],
    tools: list[dict] | None = None,
    *,
    transport: Callable | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatMessage:
    check_messages(messages)
    transport = transport or transport_for(config)
    body = build_request(config, messages, tools or [])
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    url = config.endpoint
    last_error = "no attempt made"
    for attempt in range(config.max_retries + 1):
        if attempt:
            sleep(BACKOFF_BASE_S * BACKOFF_FACTOR ** (attempt - 1))
        try:
            status, payload = transport(url, headers, body, config.timeout_ms / 1000.0)
        except TransportError as exc:
            last_error = str(exc)
            continue
        if status in (401, 403):
            raise AuthError(f"endpoint rejected credentials (HTTP {status})")
        if status >= 500:
            last_error = f"HTTP {status}"
            continue
        if status >= 400:
            raise BackendError(f"request rejected (HTTP {status})")
        return parse_response(payload)
    raise TransportError(f"giving up after {config.max_retries + 1} attempts: {last_error}")


def user_message(query: str, payload: dict | None = None) -> ChatMessage:
    content = query
    if payload:
        content += "\n\nAttached data (JSON):\n" + canonical.dumps(payload)
    return ChatMessage("user", content)


def plan_with_llm(
    config: GatewayConfig,
    query: str,
    registry: Registry,
    *,
    payload: dict | None = None,
    transport: Callable | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Plan:
    if config is None:
        config = GatewayConfig.from_env()
    messages = [ChatMessage("system", build_system_prompt(registry)), user_message(query, payload)]
    reply = chat_complete(config, messages, tool_schemas(registry), transport=transport, sleep=sleep)
    calls = reply.tool_calls or ()
    if not calls:
        raise PlanRejected([Violation("NoToolCalls", 0)])
    tasks = []
    unknown = []
    for i, call in enumerate(calls):
        desc = registry.get(call.tool)
        if desc is None:
            unknown.append(Violation("NoModelForTask", i, f": {call.tool}"))
            continue
        slots = tuple(Slot(k, _freeze(call.arguments[k])) for k in sorted(call.arguments))
        tasks.append(TaskSpec(i, desc.task_type, desc.objective, slots, (), model_id=call.tool))
    if unknown:
        raise PlanRejected(unknown)
    plan = Plan(query, tuple(tasks))
    violations = validate_plan(plan, registry)
    if violations:
        raise PlanRejected(violations)
    return plan
