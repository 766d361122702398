"""Model repository: descriptors of the analytical and learned models the
coordinator can call, plus the flat JSON file format they live in."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from netorch import canonical
from netorch.errors import DuplicateModelId, InvalidDescriptor, ParseError

TASK_TYPES = (
    "bandwidth_allocation",
    "power_allocation",
    "channel_estimation",
    "beam_prediction",
    "baseline",
)
OBJECTIVES = (
    "proportional_fairness",
    "max_min_sinr",
    "max_prod_sinr",
    "equal_split",
    "uniform_power",
    "water_filling",
    "none",
)
SOURCES = ("analytical", "learned")
SLOT_TYPES = ("number", "number_list", "matrix", "string")

REGISTRY_VERSION = 1
_DESCRIPTOR_FIELDS = (
    "model_id",
    "task_type",
    "objective",
    "description",
    "input_schema",
    "output_schema",
    "download_count",
    "source",
)


@dataclass(frozen=True)
class SlotSchema:
    name: str
    type: str
    required: bool = True

    def to_dict(self) -> dict:
        return {"name": self.name, "type": self.type, "required": self.required}


@dataclass(frozen=True)
class ModelDescriptor:
    model_id: str
    task_type: str
    objective: str
    description: str
    input_schema: tuple[SlotSchema, ...]
    output_schema: tuple[str, ...]
    download_count: int = 0
    source: str = "analytical"

    def __post_init__(self):
        # normalise list inputs so descriptors stay hashable and immutable
        object.__setattr__(self, "input_schema", tuple(self.input_schema))
        object.__setattr__(self, "output_schema", tuple(self.output_schema))

    def validate(self) -> None:
        if not isinstance(self.model_id, str) or not self.model_id:
            raise InvalidDescriptor("model_id must be a non-empty string")
        if self.task_type not in TASK_TYPES:
            raise InvalidDescriptor(f"{self.model_id}: unknown task_type {self.task_type!r}")
        if self.objective not in OBJECTIVES:
            raise InvalidDescriptor(f"{self.model_id}: unknown objective {self.objective!r}")
        if self.source not in SOURCES:
            raise InvalidDescriptor(f"{self.model_id}: unknown source {self.source!r}")
        if not isinstance(self.description, str) or not self.description.strip():
            raise InvalidDescriptor(f"{self.model_id}: empty description")
        if not self.input_schema:
            raise InvalidDescriptor(f"{self.model_id}: empty input_schema")
        if not self.output_schema:
            raise InvalidDescriptor(f"{self.model_id}: empty output_schema")
        names = [s.name for s in self.input_schema]
        if any(not n for n in names):
            raise InvalidDescriptor(f"{self.model_id}: empty slot name")
        if len(set(names)) != len(names):
            raise InvalidDescriptor(f"{self.model_id}: duplicate slot names")
        for s in self.input_schema:
            if s.type not in SLOT_TYPES:
                raise InvalidDescriptor(f"{self.model_id}: slot {s.name!r} has unknown type {s.type!r}")
        if not all(isinstance(f, str) and f for f in self.output_schema):
            raise InvalidDescriptor(f"{self.model_id}: bad output_schema entry")
        if isinstance(self.download_count, bool) or not isinstance(self.download_count, int) or self.download_count < 0:
            raise InvalidDescriptor(f"{self.model_id}: download_count must be a non-negative integer")

    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.input_schema)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "task_type": self.task_type,
            "objective": self.objective,
            "description": self.description,
            "input_schema": [s.to_dict() for s in self.input_schema],
            "output_schema": list(self.output_schema),
            "download_count": self.download_count,
            "source": self.source,
        }


@dataclass
class Registry:
    models: dict[str, ModelDescriptor] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.models)

    def __contains__(self, model_id: str) -> bool:
        return model_id in self.models

    def get(self, model_id: str) -> ModelDescriptor | None:
        return self.models.get(model_id)

    def register_model(self, descriptor: ModelDescriptor) -> str:
        descriptor.validate()
        if descriptor.model_id in self.models:
            raise DuplicateModelId(descriptor.model_id)
        self.models[descriptor.model_id] = descriptor
        return descriptor.model_id

    def list_models(self, task_type: str | None = None) -> list[ModelDescriptor]:
        out = [m for _, m in sorted(self.models.items())]
        if task_type is not None:
            out = [m for m in out if m.task_type == task_type]
        return out

    @classmethod
    def from_descriptors(cls, descriptors: Iterable[ModelDescriptor]) -> "Registry":
        reg = cls()
        for d in descriptors:
            reg.register_model(d)
        return reg

    def to_dict(self) -> dict:
        return {
            "version": REGISTRY_VERSION,
            "models": [m.to_dict() for m in self.list_models()],
        }


def register_model(registry: Registry, descriptor: ModelDescriptor) -> str:
    return registry.register_model(descriptor)


def list_models(registry: Registry, task_type: str | None = None) -> list[ModelDescriptor]:
    return registry.list_models(task_type)


def _slot_from_dict(obj, where: str) -> SlotSchema:
    if not isinstance(obj, dict):
        raise ParseError("slot entry must be an object", field=where)
    unknown = set(obj) - {"name", "type", "required"}
    if unknown:
        raise ParseError(f"unknown slot fields {sorted(unknown)}", field=where)
    for key in ("name", "type"):
        if not isinstance(obj.get(key), str):
            raise ParseError(f"slot {key} must be a string", field=f"{where}.{key}")
    required = obj.get("required", True)
    if not isinstance(required, bool):
        raise ParseError("slot required must be a boolean", field=f"{where}.required")
    return SlotSchema(obj["name"], obj["type"], required)


def descriptor_from_dict(obj, where: str = "model") -> ModelDescriptor:
    if not isinstance(obj, dict):
        raise ParseError("descriptor must be an object", field=where)
    unknown = set(obj) - set(_DESCRIPTOR_FIELDS)
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", field=where)
    missing = [f for f in _DESCRIPTOR_FIELDS if f not in obj]
    if missing:
        raise ParseError(f"missing fields {missing}", field=where)
    if not isinstance(obj["input_schema"], list):
        raise ParseError("input_schema must be a list", field=f"{where}.input_schema")
    if not isinstance(obj["output_schema"], list):
        raise ParseError("output_schema must be a list", field=f"{where}.output_schema")
    slots = tuple(
        _slot_from_dict(s, f"{where}.input_schema[{i}]") for i, s in enumerate(obj["input_schema"])
    )
    desc = ModelDescriptor(
        model_id=obj["model_id"],
        task_type=obj["task_type"],
        objective=obj["objective"],
        description=obj["description"],
        input_schema=slots,
        output_schema=tuple(obj["output_schema"]),
        download_count=obj["download_count"],
        source=obj["source"],
    )
    try:
        desc.validate()
    except InvalidDescriptor as exc:
        raise ParseError(str(exc), field=where) from exc
    return desc


def registry_from_dict(doc) -> Registry:
    if not isinstance(doc, dict):
        raise ParseError("registry document must be an object", field="$")
    unknown = set(doc) - {"version", "models"}
    if unknown:
        raise ParseError(f"unknown fields {sorted(unknown)}", field="$")
    if doc.get("version") != REGISTRY_VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}", field="version")
    models = doc.get("models")
    if not isinstance(models, list):
        raise ParseError("models must be a list", field="models")
    reg = Registry()
    for i, entry in enumerate(models):
        desc = descriptor_from_dict(entry, f"models[{i}]")
        try:
            reg.register_model(desc)
        except DuplicateModelId as exc:
            raise ParseError(f"DuplicateModelId: {exc}", field=f"models[{i}].model_id") from exc
    return reg


def loads_registry(text: str) -> Registry:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return registry_from_dict(doc)


def load_registry(path: str | Path) -> Registry:
    # OSError propagates as the IO failure
    text = Path(path).read_text(encoding="utf-8")
    return loads_registry(text)


def save_registry(registry: Registry, path: str | Path) -> None:
    Path(path).write_bytes(canonical.encode(registry.to_dict()) + b"\n")


def default_registry() -> Registry:
    text = resources.files("netorch.data").joinpath("default_registry.json").read_text("utf-8")
    return loads_registry(text)
