"""Model selection: task-type filter, objective narrowing, similarity ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from netorch.errors import DimensionMismatch, NoModelForTask
from netorch.memory import bucket_counts, similarity
from netorch.registry import Registry


@dataclass(frozen=True)
class RankedCandidate:
    model_id: str
    score: float
    rank: int

    def to_dict(self) -> dict:
        return {"model_id": self.model_id, "score": self.score, "rank": self.rank}


def cosine_similarity(u: Sequence[float], v: Sequence[float]) -> float:
    """u.v / (|u||v|), or 0.0 when either vector has zero norm."""
    a = np.asarray(u, dtype=float).ravel()
    b = np.asarray(v, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    # clamp rounding drift so the score stays inside [-1, 1]
    return max(-1.0, min(1.0, float(np.dot(a, b)) / (na * nb)))


def rank_models(
    registry: Registry,
    task_type: str,
    objective: str,
    query_text: str,
    top_n: int = 1,
) -> list[RankedCandidate]:
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    candidates = registry.list_models(task_type)
    if not candidates:
        raise NoModelForTask(f"no registered model for task type {task_type!r}")
    narrowed = [m for m in candidates if m.objective == objective]
    if narrowed:
        candidates = narrowed

    q = bucket_counts(query_text)
    scored = [(similarity(bucket_counts(m.description), q), m) for m in candidates]
    # order on the exact key so rounding never overrides the tie-breaks
    scored.sort(key=lambda sm: (-sm[0][1], -sm[1].download_count, sm[1].model_id))
    return [
        RankedCandidate(m.model_id, score, rank)
        for rank, ((score, _), m) in enumerate(scored[:top_n], start=1)
    ]
