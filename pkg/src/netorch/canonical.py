"""Canonical JSON encoding used for envelopes, logs, archives and goldens.

Keys are sorted, separators carry no whitespace, floats use Python's shortest
round-trip repr and 2-D numeric data travels as ``{"rows", "cols", "data"}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np


@dataclass(frozen=True)
class Matrix:
    """Row-major numeric matrix with explicit dimensions."""

    rows: int
    cols: int
    data: tuple

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0 or len(self.data) != self.rows * self.cols:
            raise ValueError(
                f"matrix data has {len(self.data)} entries, expected {self.rows}x{self.cols}"
            )

    @classmethod
    def from_array(cls, arr) -> "Matrix":
        a = np.asarray(arr, dtype=float)
        if a.ndim != 2:
            raise ValueError("Matrix.from_array needs a 2-D array")
        return cls(a.shape[0], a.shape[1], tuple(float(x) for x in a.ravel()))

    def to_array(self) -> np.ndarray:
        return np.array(self.data, dtype=float).reshape(self.rows, self.cols)


def to_plain(value: Any) -> Any:
    """Convert a value tree into JSON-ready builtins (matrices become dicts)."""
    if isinstance(value, Matrix):
        return {"rows": value.rows, "cols": value.cols, "data": [to_plain(x) for x in value.data]}
    if isinstance(value, np.ndarray):
        if value.ndim == 2:
            return to_plain(Matrix.from_array(value))
        return [to_plain(x) for x in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(x) for x in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        if not math.isfinite(f):
            raise ValueError(f"non-finite number {f!r} cannot be encoded")
        return f
    if value is None or isinstance(value, str):
        return value
    if hasattr(value, "to_dict"):
        return to_plain(value.to_dict())
    raise TypeError(f"cannot encode {type(value).__name__}")


def _is_matrix_obj(obj: dict) -> bool:
    return (
        set(obj) == {"rows", "cols", "data"}
        and isinstance(obj["rows"], int)
        and isinstance(obj["cols"], int)
        and isinstance(obj["data"], list)
    )


def from_plain(value: Any) -> Any:
    """Inverse of :func:`to_plain`: matrix-shaped objects become :class:`Matrix`."""
    if isinstance(value, dict):
        if _is_matrix_obj(value):
            return Matrix(value["rows"], value["cols"], tuple(value["data"]))
        return {k: from_plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [from_plain(x) for x in value]
    return value


def dumps(value: Any) -> str:
    return json.dumps(
        to_plain(value),
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    )


def encode(value: Any) -> bytes:
    return dumps(value).encode("utf-8")


def loads(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)
