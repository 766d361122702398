"""Task planning: turn a query (plus optional structured payload) into a Plan.

The ``mock`` backend is a fixed keyword grammar, so its output is a pure
function of (query, payload). The ``llm`` backend delegates to
:func:`netorch.llmgw.plan_with_llm`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from netorch import canonical
from netorch.errors import UnrecognizedIntent
from netorch.registry import Registry, default_registry


@dataclass(frozen=True)
class Slot:
    name: str
    value: Any

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value}


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    task_type: str
    objective: str
    slots: tuple[Slot, ...] = ()
    depends_on: tuple[int, ...] = ()
    # explicit tool choice (llm backend); not part of plan identity
    model_id: str | None = field(default=None, compare=False)

    def slot(self, name: str, default=None):
        for s in self.slots:
            if s.name == name:
                return s.value
        return default

    def slot_names(self) -> set[str]:
        return {s.name for s in self.slots}

    def to_dict(self) -> dict:
        out = {
            "task_id": self.task_id,
            "task_type": self.task_type,
            "objective": self.objective,
            "slots": [s.to_dict() for s in self.slots],
            "depends_on": list(self.depends_on),
        }
        if self.model_id is not None:
            out["model_id"] = self.model_id
        return out


@dataclass(frozen=True)
class Plan:
    query_text: str
    tasks: tuple[TaskSpec, ...]

    def to_dict(self) -> dict:
        return {"query_text": self.query_text, "tasks": [t.to_dict() for t in self.tasks]}

    def to_json(self) -> bytes:
        return canonical.encode(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "Plan":
        obj = canonical.from_plain(obj)
        tasks = tuple(
            TaskSpec(
                task_id=t["task_id"],
                task_type=t["task_type"],
                objective=t["objective"],
                slots=tuple(Slot(s["name"], _freeze(s["value"])) for s in t["slots"]),
                depends_on=tuple(t["depends_on"]),
                model_id=t.get("model_id"),
            )
            for t in obj["tasks"]
        )
        return cls(obj["query_text"], tasks)


@dataclass(frozen=True)
class Violation:
    kind: str
    task_id: int
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}({self.task_id}{self.detail})"


def _freeze(value):
    """Slot values become hashable-ish canonical forms: lists -> tuples, arrays -> Matrix."""
    value = canonical.from_plain(canonical.to_plain(value))
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, dict):
        return canonical.from_plain(value)
    return value


# ------------------------------------------------------------------ grammar

_TASK_RULES = (
    ("bandwidth_allocation", ("bandwidth",)),
    ("power_allocation", ("power", "sinr")),
    ("channel_estimation", ("channel estimation", "channel estimate")),
    ("beam_prediction", ("beam",)),
)

_NUMBER = r"(\d+(?:\.\d+)?)"
_NUMERIC_SLOTS = (
    ("total_bw", re.compile(_NUMBER + r"\s+bandwidth\s+units?")),
    ("users", re.compile(_NUMBER + r"\s+(?:users?|ues?|user equipments?)\b")),
    ("cells", re.compile(_NUMBER + r"\s+cells?\b")),
)


def _number(text: str):
    return float(text) if "." in text else int(text)


def _task_type(text: str) -> str | None:
    for task_type, words in _TASK_RULES:
        if any(w in text for w in words):
            return task_type
    return None


def _objective(text: str, task_type: str) -> tuple[str, str]:
    """Return (task_type, objective); baselines move the task to ``baseline``."""
    power_like = task_type == "power_allocation"
    if "water-filling" in text or "water filling" in text or "waterfilling" in text:
        return "baseline", "water_filling"
    if "equal" in text or "uniform" in text:
        if power_like:
            return "baseline", "uniform_power"
        if task_type == "bandwidth_allocation":
            return "baseline", "equal_split"
    if power_like and "sinr" in text and ("product" in text or "proportional" in text):
        return task_type, "max_prod_sinr"
    if "proportional fairness" in text or "proportionally fair" in text:
        return task_type, "proportional_fairness"
    if "max-min" in text or "maxmin" in text or "minimum sinr" in text or "worst" in text:
        return task_type, "max_min_sinr"
    defaults = {"bandwidth_allocation": "proportional_fairness", "power_allocation": "max_min_sinr"}
    return task_type, defaults.get(task_type, "none")


def _declared_slots(registry: Registry, task_type: str, objective: str) -> set[str]:
    models = registry.list_models(task_type)
    narrowed = [m for m in models if m.objective == objective] or models
    return {name for m in narrowed for name in m.slot_names()}


def _split_parts(text: str) -> list[str]:
    parts = [p.strip() for p in re.split(r"\band\b", text)]
    if len(parts) > 1 and all(_task_type(p) for p in parts):
        return parts
    return [text]


def plan_mock(query: str, payload: dict | None = None, registry: Registry | None = None) -> Plan:
    if not query or not query.strip():
        raise ValueError("query must be non-empty")
    registry = registry if registry is not None else default_registry()
    text = query.lower()
    payload = payload or {}
    numeric = {}
    for name, pattern in _NUMERIC_SLOTS:
        m = pattern.search(text)
        if m:
            numeric[name] = _number(m.group(1))

    tasks = []
    for part in _split_parts(text):
        task_type = _task_type(part)
        if task_type is None:
            raise UnrecognizedIntent(f"no task recognised in {query!r}")
        task_type, objective = _objective(part, task_type)
        declared = _declared_slots(registry, task_type, objective)
        values = {k: v for k, v in numeric.items() if k in declared}
        values.update({k: v for k, v in payload.items() if k in declared})
        slots = tuple(Slot(k, _freeze(values[k])) for k in sorted(values))
        tasks.append(TaskSpec(len(tasks), task_type, objective, slots, ()))
    return Plan(query, tuple(tasks))


def plan_query(
    query: str,
    payload: dict | None = None,
    backend: str = "mock",
    *,
    registry: Registry | None = None,
    config=None,
    transport=None,
) -> Plan:
    if backend == "mock":
        return plan_mock(query, payload, registry)
    if backend == "llm":
        from netorch import llmgw

        registry = registry if registry is not None else default_registry()
        return llmgw.plan_with_llm(config, query, registry, payload=payload, transport=transport)
    raise ValueError(f"unknown backend {backend!r}")


def required_slots(registry: Registry, task_type: str, objective: str) -> set[str]:
    models = registry.list_models(task_type)
    narrowed = [m for m in models if m.objective == objective] or models
    return {s.name for m in narrowed for s in m.input_schema if s.required}


def validate_plan(plan: Plan, registry: Registry) -> list[Violation]:
    violations: list[Violation] = []
    ids = [t.task_id for t in plan.tasks]
    for pos, task in enumerate(plan.tasks):
        if task.task_id != pos:
            violations.append(Violation("BadTaskId", task.task_id, f" at position {pos}"))
        if not registry.list_models(task.task_type):
            violations.append(Violation("NoModelForTask", task.task_id))
        elif task.model_id is not None and task.model_id not in registry:
            violations.append(Violation("NoModelForTask", task.task_id, f": {task.model_id}"))
        bad_deps = [d for d in task.depends_on if d not in ids or d >= task.task_id]
        for d in bad_deps:
            violations.append(Violation("DanglingDependency", task.task_id, f"→{d}"))
        derivable = set()
        for d in task.depends_on:
            if d in ids and d < task.task_id:
                dep = plan.tasks[ids.index(d)]
                for m in registry.list_models(dep.task_type):
                    derivable.update(m.output_schema)
        have = task.slot_names() | derivable
        for name in sorted(required_slots(registry, task.task_type, task.objective) - have):
            violations.append(Violation("MissingSlot", task.task_id, f":{name}"))
    return violations
