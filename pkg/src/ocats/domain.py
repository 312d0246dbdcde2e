"""Core data types: label spaces, instances, embeddings, and the distance/entropy math."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .errors import DegenerateVectorError, DimensionError, UnknownLabelError


class LabelSpace:
    """Ordered set of class labels with a stable label <-> index bijection.

    Labels are trimmed of surrounding whitespace and compared as exact
    strings. At least two distinct labels are required.
    """

    def __init__(self, labels: Iterable[str]):
        cleaned = [str(label).strip() for label in labels]
        if any(not label for label in cleaned):
            raise ValueError("labels must be non-empty strings")
        if len(set(cleaned)) != len(cleaned):
            raise ValueError("labels must be unique")
        if len(cleaned) < 2:
            raise ValueError("a label space needs at least 2 labels")
        self._labels = tuple(cleaned)
        self._index = {label: i for i, label in enumerate(self._labels)}

    @property
    def labels(self) -> tuple[str, ...]:
        return self._labels

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self):
        return iter(self._labels)

    def __contains__(self, name) -> bool:
        return str(name).strip() in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSpace) and self._labels == other._labels

    def __hash__(self) -> int:
        return hash(self._labels)

    def __repr__(self) -> str:
        return f"LabelSpace({len(self)} labels)"

    def index(self, name: str) -> int:
        key = str(name).strip()
        try:
            return self._index[key]
        except KeyError:
            raise UnknownLabelError(f"unknown label {name!r}") from None

    def name(self, index: int) -> str:
        return self._labels[index]

    @property
    def max_entropy(self) -> float:
        """Upper bound of the Shannon entropy over this label set (natural log)."""
        return float(np.log(len(self._labels)))


@dataclass(frozen=True)
class Instance:
    """One incoming text item; gold_label is present in simulation, absent live."""

    id: str
    text: str
    gold_label: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("instance id must be non-empty")
        if not self.text:
            raise ValueError("instance text must be non-empty")


def validate_embedding(values, dim: Optional[int] = None, normalize: bool = False) -> np.ndarray:
    """Return a read-only float64 vector, rejecting NaN/inf/zero-norm input.

    With ``normalize`` the vector is scaled to unit L2 norm (done once at
    ingestion; cosine distance then reduces to 1 - dot).
    """
    vec = np.array(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise DimensionError(f"embedding must be a non-empty 1-d vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionError(f"expected dim {dim}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise DegenerateVectorError("embedding has NaN or infinite components")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise DegenerateVectorError("embedding has zero norm")
    if normalize:
        vec = vec / norm
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class EmbeddedInstance:
    """Instance plus its fixed-dimension vector representation."""

    instance: Instance
    embedding: np.ndarray

    @property
    def id(self) -> str:
        return self.instance.id

    @property
    def text(self) -> str:
        return self.instance.text

    @property
    def gold_label(self) -> Optional[str]:
        return self.instance.gold_label

    @property
    def dim(self) -> int:
        return int(self.embedding.shape[0])


def cosine_distance(a, b) -> float:
    """1 - cos(a, b), clipped into [0, 2]; symmetric, 0 on identical inputs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateVectorError("cosine distance undefined for zero-norm vectors")
    dist = 1.0 - float(np.dot(a, b)) / (norm_a * norm_b)
    return min(max(dist, 0.0), 2.0)


def shannon_entropy(probs) -> float:
    """-sum p ln p over the nonzero components of a probability vector."""
    p = np.asarray(probs, dtype=np.float64)
    nz = p[p > 0.0]
    # the +0.0 normalizes the -0.0 a one-hot distribution would produce
    return float(-np.sum(nz * np.log(nz)) + 0.0)


def label_index(space: LabelSpace, name: str) -> int:
    """Stable index of ``name`` in ``space``; raises UnknownLabelError otherwise."""
    return space.index(name)
