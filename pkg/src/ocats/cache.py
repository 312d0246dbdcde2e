"""Repository of teacher-labeled instances with exact k-NN queries.

The cache doubles as the student's training set and the k-NN memory, so it
never evicts. Storage is a flat array with an exhaustive cosine scan: exact,
and fast enough for the ~1e4-entry regime this targets. Queries are served
from an immutable snapshot (entry count + array reference) taken under the
lock, so readers never observe a half-inserted row.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .domain import EmbeddedInstance, Instance, LabelSpace, validate_embedding
from .errors import EmptyCacheError, FormatError, IoError, UnknownLabelError

# Clamp for the 1/d^2 distance weighting: an exact duplicate (d=0) gets
# weight 1/eps^2 = 1e12 and dominates any realistic neighbor without
# producing infinities.
WEIGHT_EPSILON = 1e-6

FILE_VERSION = 1


def neighbor_weight(distance: float) -> float:
    return 1.0 / max(distance, WEIGHT_EPSILON) ** 2


@dataclass(frozen=True)
class CacheEntry:
    embedded: EmbeddedInstance
    teacher_label: str
    seq: int
    invalid: bool = False


@dataclass(frozen=True)
class Neighbor:
    entry: CacheEntry
    distance: float
    weight: float

    @property
    def vector(self) -> np.ndarray:
        return self.entry.embedded.embedding

    @property
    def label(self) -> str:
        return self.entry.teacher_label


class Cache:
    """Append-only store of (embedded instance, teacher label) pairs."""

    def __init__(self, label_space: LabelSpace, dim: int):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.label_space = label_space
        self.dim = int(dim)
        self._lock = threading.RLock()
        self._entries: list[CacheEntry] = []
        # unit-normalized rows, grown by doubling so inserts stay amortized O(d)
        self._unit = np.empty((16, self.dim), dtype=np.float64)
        self._valid = np.empty(16, dtype=bool)
        self._size = 0

    @classmethod
    def seeded(
        cls,
        entries: Iterable[tuple[EmbeddedInstance, str]],
        label_space: LabelSpace,
        dim: Optional[int] = None,
    ) -> "Cache":
        """Build a cache from (instance, label) pairs, e.g. the few-shot train set."""
        entries = list(entries)
        if dim is None:
            if not entries:
                raise ValueError("dim is required to seed an empty cache")
            dim = entries[0][0].dim
        cache = cls(label_space, dim)
        for embedded, label in entries:
            cache.insert(embedded, label)
        return cache

    def __len__(self) -> int:
        return self._size

    @property
    def entries(self) -> list[CacheEntry]:
        with self._lock:
            return list(self._entries)

    def valid_count(self) -> int:
        with self._lock:
            return int(np.count_nonzero(self._valid[: self._size]))

    def training_entries(self) -> list[CacheEntry]:
        """Entries usable as the student's training set (invalid ones excluded)."""
        with self._lock:
            return [e for e in self._entries if not e.invalid]

    def _grow_to(self, capacity: int) -> None:
        new_cap = max(16, self._unit.shape[0])
        while new_cap < capacity:
            new_cap *= 2
        if new_cap != self._unit.shape[0]:
            unit = np.empty((new_cap, self.dim), dtype=np.float64)
            unit[: self._size] = self._unit[: self._size]
            valid = np.empty(new_cap, dtype=bool)
            valid[: self._size] = self._valid[: self._size]
            self._unit = unit
            self._valid = valid

    def insert(self, embedded: EmbeddedInstance, teacher_label: str, invalid: bool = False) -> int:
        """Append an entry; returns its sequence number. Visible to queries at once.

        ``invalid`` marks protocol-error sentinels: stored and counted, but
        never returned as neighbors nor used for training.
        """
        label = str(teacher_label).strip()
        if not invalid and label not in self.label_space:
            raise UnknownLabelError(f"unknown teacher label {teacher_label!r}")
        vec = validate_embedding(embedded.embedding, dim=self.dim)
        with self._lock:
            seq = self._size
            self._grow_to(seq + 1)
            self._unit[seq] = vec / np.linalg.norm(vec)
            self._valid[seq] = not invalid
            self._entries.append(
                CacheEntry(embedded=embedded, teacher_label=label, seq=seq, invalid=invalid)
            )
            self._size = seq + 1
            return seq

    def _snapshot(self):
        with self._lock:
            return self._size, self._unit, self._valid, self._entries

    def k_nearest(self, query, k: int) -> list[Neighbor]:
        """Exact k nearest cached entries by cosine distance, ascending.

        Ties break toward the lower sequence number (stable sort over
        insertion order). Returns min(k, usable entries) neighbors.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        size, unit, valid, entries = self._snapshot()
        q = np.asarray(query, dtype=np.float64)
        q = validate_embedding(q, dim=self.dim)
        usable = np.flatnonzero(valid[:size])
        if usable.size == 0:
            raise EmptyCacheError("cache has no usable entries")
        dists = 1.0 - unit[usable] @ (q / np.linalg.norm(q))
        np.clip(dists, 0.0, 2.0, out=dists)
        order = np.argsort(dists, kind="stable")[: min(k, usable.size)]
        return [
            Neighbor(
                entry=entries[int(usable[i])],
                distance=float(dists[i]),
                weight=neighbor_weight(float(dists[i])),
            )
            for i in order
        ]

    def save(self, path) -> None:
        """Write the versioned JSONL snapshot (header line, then one entry per line)."""
        path = Path(path)
        header = {
            "version": FILE_VERSION,
            "dim": self.dim,
            "labels": list(self.label_space.labels),
        }
        try:
            with path.open("w", encoding="utf-8") as fh:
                fh.write(json.dumps(header) + "\n")
                for entry in self.entries:
                    record = {
                        "id": entry.embedded.id,
                        "text": entry.embedded.text,
                        "label": entry.teacher_label,
                        "vector": entry.embedded.embedding.tolist(),
                        "seq": entry.seq,
                    }
                    if entry.invalid:
                        record["invalid"] = True
                    fh.write(json.dumps(record) + "\n")
        except OSError as exc:
            raise IoError(f"cannot write cache to {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Cache":
        path = Path(path)
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoError(f"cannot read cache from {path}: {exc}") from exc
        if not lines:
            raise FormatError(f"{path} is empty, expected a header line")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise FormatError(f"corrupt cache header: {exc.msg}", line=1) from exc
        if not isinstance(header, dict) or header.get("version") != FILE_VERSION:
            raise FormatError(f"unsupported cache file version in {path}")
        try:
            cache = cls(LabelSpace(header["labels"]), int(header["dim"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"corrupt cache header: {exc}") from exc
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                embedded = EmbeddedInstance(
                    Instance(id=str(record["id"]), text=str(record["text"])),
                    validate_embedding(record["vector"], dim=cache.dim),
                )
                expected_seq = int(record["seq"])
                invalid = bool(record.get("invalid", False))
                label = str(record["label"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"corrupt cache entry: {exc}", line=lineno) from exc
            seq = cache.insert(embedded, label, invalid=invalid)
            if seq != expected_seq:
                raise FormatError(
                    f"sequence gap: entry says {expected_seq}, position is {seq}", line=lineno
                )
        return cache
