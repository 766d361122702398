"""Experience archive: hashed bag-of-words embeddings, a JSONL-backed record
store, brute-force cosine retrieval and user feedback."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable

import numpy as np

from netorch import canonical
from netorch.errors import InvalidRating, ParseError, UnknownRecord

EMBED_DIM = 256

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def token_index(token: str) -> int:
    return fnv1a64(token.encode("utf-8")) % EMBED_DIM


def embed_text(text: str) -> np.ndarray:
    """Map text to a unit-norm 256-bucket token-count vector (zero if no tokens)."""
    vec = np.zeros(EMBED_DIM, dtype=float)
    for tok in tokenize(text):
        vec[token_index(tok)] += 1.0
    norm = float(np.sqrt(np.dot(vec, vec)))
    if norm > 0.0:
        vec /= norm
    return vec


@lru_cache(maxsize=4096)
def bucket_counts(text: str) -> tuple[tuple[int, int], ...]:
    """Integer bucket counts behind :func:`embed_text`, as sorted (index, count) pairs."""
    return tuple(sorted(Counter(token_index(t) for t in tokenize(text)).items()))


def similarity(a: tuple, b: tuple) -> tuple[float, Fraction]:
    """Cosine of two bucket-count vectors plus an exact ordering key.

    Normalised float vectors make mathematically equal cosines differ in the
    last bit, which would let rounding override tie-breaks. Counts are
    non-negative, so the squared cosine as a fraction orders exactly.
    """
    da, db = dict(a), dict(b)
    dot = sum(c * db.get(i, 0) for i, c in da.items())
    na2 = sum(c * c for c in da.values())
    nb2 = sum(c * c for c in db.values())
    if na2 == 0 or nb2 == 0:
        return 0.0, Fraction(0)
    return min(1.0, dot / math.sqrt(na2 * nb2)), Fraction(dot * dot, na2 * nb2)


@dataclass(frozen=True)
class Feedback:
    rating: int
    note: str = ""

    def to_dict(self) -> dict:
        return {"rating": self.rating, "note": self.note}


@dataclass
class MemoryRecord:
    record_id: int
    query_text: str
    plan: Any
    result_summary: str
    metrics: dict
    embedding: np.ndarray
    feedback: Feedback | None = None

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "query_text": self.query_text,
            "plan": self.plan,
            "result_summary": self.result_summary,
            "metrics": self.metrics,
            "embedding": [float(x) for x in self.embedding],
            "feedback": None if self.feedback is None else self.feedback.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "MemoryRecord":
        fb = obj.get("feedback")
        return cls(
            record_id=obj["record_id"],
            query_text=obj["query_text"],
            plan=obj["plan"],
            result_summary=obj["result_summary"],
            metrics=obj["metrics"],
            embedding=np.asarray(obj["embedding"], dtype=float),
            feedback=None if fb is None else Feedback(fb["rating"], fb.get("note", "")),
        )


@dataclass(frozen=True)
class Hit:
    record: MemoryRecord
    score: float
    source: str = "local"


def _read_jsonl(path: Path) -> dict[int, MemoryRecord]:
    records: dict[int, MemoryRecord] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = canonical.loads(line)
            except ValueError as exc:
                raise ParseError(f"bad archive line: {exc}", line=lineno) from exc
            if "embedding" in obj:
                rec = MemoryRecord.from_dict(obj)
                if rec.record_id != len(records):
                    raise ParseError(f"record_id {rec.record_id} out of sequence", line=lineno, field="record_id")
                records[rec.record_id] = rec
            else:
                rid = obj.get("record_id")
                if rid not in records:
                    raise ParseError(f"feedback patch for unknown record {rid}", line=lineno, field="record_id")
                fb = obj["feedback"]
                records[rid].feedback = Feedback(fb["rating"], fb.get("note", ""))
    return records


@dataclass
class Archive:
    """Local append-only archive, optionally merged with read-only shared ones.

    Without a ``path`` the archive lives purely in memory.
    """

    path: Path | None = None
    shared_paths: tuple = ()
    records: dict[int, MemoryRecord] = field(default_factory=dict)
    shared: list[tuple[str, MemoryRecord]] = field(default_factory=list)

    @classmethod
    def open(cls, path: str | Path | None = None, shared_paths: Iterable[str | Path] = ()) -> "Archive":
        arch = cls(Path(path) if path is not None else None, tuple(Path(p) for p in shared_paths))
        if arch.path is not None and arch.path.exists():
            arch.records = _read_jsonl(arch.path)
        for sp in arch.shared_paths:
            for rec in _read_jsonl(sp).values():
                arch.shared.append((str(sp), rec))
        return arch

    def __len__(self) -> int:
        return len(self.records)

    def _append(self, obj: dict) -> None:
        if self.path is None:
            return
        with self.path.open("ab") as fh:
            fh.write(canonical.encode(obj) + b"\n")

    def store_record(
        self,
        query_text: str,
        plan: Any = None,
        result_summary: str = "",
        metrics: dict | None = None,
    ) -> int:
        rid = len(self.records)
        rec = MemoryRecord(
            record_id=rid,
            query_text=query_text,
            plan=canonical.to_plain(plan),
            result_summary=result_summary,
            metrics=canonical.to_plain(metrics or {}),
            embedding=embed_text(query_text),
        )
        self._append(rec.to_dict())
        self.records[rid] = rec
        return rid

    def retrieve(self, query_text: str, k: int) -> list[Hit]:
        if k < 1:
            raise ValueError("k must be >= 1")
        q = bucket_counts(query_text)
        scored = []
        for src, r in [("local", r) for r in self.records.values()] + list(self.shared):
            score, key = similarity(q, bucket_counts(r.query_text))
            scored.append((key, Hit(r, score, src)))
        # newer record first on ties; local beats shared at equal id
        scored.sort(key=lambda kh: (-kh[0], -kh[1].record.record_id, kh[1].source != "local", kh[1].source))
        return [h for _, h in scored[:k]]

    def record_feedback(self, record_id: int, rating: int, note: str = "") -> MemoryRecord:
        if record_id not in self.records:
            raise UnknownRecord(f"no record {record_id}")
        if isinstance(rating, bool) or rating not in (-1, 0, 1):
            raise InvalidRating(f"rating must be -1, 0 or +1, got {rating!r}")
        fb = Feedback(int(rating), note)
        self._append({"record_id": record_id, "feedback": fb.to_dict()})
        self.records[record_id].feedback = fb
        return self.records[record_id]

    def compact(self) -> None:
        """Rewrite the local file with feedback patches folded into records."""
        if self.path is None:
            return
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with tmp.open("wb") as fh:
            for rid in sorted(self.records):
                fh.write(canonical.encode(self.records[rid].to_dict()) + b"\n")
        tmp.replace(self.path)

    def last(self, n: int) -> list[MemoryRecord]:
        ids = sorted(self.records)[-n:] if n > 0 else []
        return [self.records[i] for i in ids]

    def snapshot(self) -> bytes:
        """Canonical serialisation of the in-memory index, for reload checks."""
        return b"\n".join(canonical.encode(self.records[i].to_dict()) for i in sorted(self.records))


def store_record(archive: Archive, query_text: str, plan=None, result_summary: str = "", metrics=None) -> int:
    return archive.store_record(query_text, plan, result_summary, metrics)


def retrieve(archive: Archive, query_text: str, k: int) -> list[Hit]:
    return archive.retrieve(query_text, k)


def record_feedback(archive: Archive, record_id: int, rating: int, note: str = "") -> MemoryRecord:
    return archive.record_feedback(record_id, rating, note)


__all__ = [
    "EMBED_DIM",
    "Archive",
    "Feedback",
    "Hit",
    "MemoryRecord",
    "embed_text",
    "fnv1a64",
    "record_feedback",
    "retrieve",
    "store_record",
    "tokenize",
]
