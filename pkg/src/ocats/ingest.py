"""Dataset and embedding loaders, seeded few-shot splits, shuffled streams.

File formats:
  - dataset JSONL: one object per line with ``id``, ``text``, ``label``
  - dataset CSV: header ``id,text,label``, UTF-8, RFC-4180 quoting
  - embedding JSONL: ``id`` plus ``vector`` (all vectors the same length)
  - split override: JSON object with ``train_ids`` and ``dev_ids`` arrays
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .domain import EmbeddedInstance, Instance, LabelSpace, validate_embedding
from .errors import (
    DegenerateVectorError,
    DimensionError,
    FormatError,
    InsufficientClassError,
    MissingEmbeddingError,
    SchemaError,
)

_DATASET_FIELDS = ("id", "text", "label")


@dataclass(frozen=True)
class Dataset:
    name: str
    label_space: LabelSpace
    items: tuple[Instance, ...]

    def __post_init__(self):
        seen = set()
        for item in self.items:
            if item.id in seen:
                raise SchemaError(f"duplicate instance id {item.id!r}")
            seen.add(item.id)
            if item.gold_label is None or item.gold_label not in self.label_space:
                raise SchemaError(f"instance {item.id!r} has missing or unknown label")

    def __len__(self) -> int:
        return len(self.items)

    def by_class(self) -> dict[str, list[Instance]]:
        groups: dict[str, list[Instance]] = {label: [] for label in self.label_space}
        for item in self.items:
            groups[item.gold_label.strip()].append(item)
        return groups


@dataclass(frozen=True)
class FewShotSplit:
    """Per-class train/dev subsets, reproducible from (dataset, seed, sizes)."""

    train: tuple[EmbeddedInstance, ...]
    dev: tuple[EmbeddedInstance, ...]
    seed: int


@dataclass(frozen=True)
class Stream:
    """One seeded permutation of the incoming test set."""

    items: tuple[EmbeddedInstance, ...]
    shuffle_seed: int

    def __len__(self) -> int:
        return len(self.items)


def _detect_format(path: Path, format: Optional[str]) -> str:
    if format is not None:
        if format not in ("jsonl", "csv"):
            raise ValueError(f"unsupported dataset format {format!r}")
        return format
    suffix = path.suffix.lower()
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    if suffix == ".csv":
        return "csv"
    raise ValueError(f"cannot infer format from {path.name!r}; pass format=")


def _rows_from_jsonl(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(record, dict):
                raise FormatError("expected a JSON object", line=lineno)
            yield lineno, record


def _rows_from_csv(path: Path):
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        missing = [f for f in _DATASET_FIELDS if f not in reader.fieldnames]
        if missing:
            raise SchemaError(f"CSV header missing fields {missing}")
        for record in reader:
            yield reader.line_num, record


def load_dataset(
    path,
    format: Optional[str] = None,
    label_space: Optional[LabelSpace] = None,
    name: Optional[str] = None,
) -> Dataset:
    """Parse a dataset file and validate every row against the label space.

    Without an explicit ``label_space`` the space is inferred as the sorted
    distinct labels of the file.
    """
    path = Path(path)
    fmt = _detect_format(path, format)
    rows = _rows_from_jsonl(path) if fmt == "jsonl" else _rows_from_csv(path)

    raw: list[tuple[int, str, str, str]] = []
    for lineno, record in rows:
        values = []
        for field in _DATASET_FIELDS:
            value = record.get(field)
            if value is None or str(value) == "":
                raise SchemaError(f"line {lineno}: missing field {field!r}")
            values.append(str(value))
        raw.append((lineno, *values))

    if not raw:
        raise FormatError(f"{path} contains no records")

    if label_space is None:
        label_space = LabelSpace(sorted({label.strip() for _, _, _, label in raw}))
    items = []
    for lineno, id_, text, label in raw:
        if label not in label_space:
            raise SchemaError(f"line {lineno}: label {label!r} not in label space")
        items.append(Instance(id=id_, text=text, gold_label=label.strip()))
    return Dataset(name=name or path.stem, label_space=label_space, items=tuple(items))


def load_embeddings(path, normalize: bool = True) -> dict[str, np.ndarray]:
    """Load an id -> vector map, enforcing a constant dimension and finite values."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    dim: Optional[int] = None
    for lineno, record in _rows_from_jsonl(path):
        id_ = record.get("id")
        vector = record.get("vector")
        if id_ is None or vector is None:
            raise SchemaError(f"line {lineno}: embedding record needs 'id' and 'vector'")
        id_ = str(id_)
        if id_ in out:
            raise SchemaError(f"line {lineno}: duplicate embedding id {id_!r}")
        try:
            vec = validate_embedding(vector, dim=dim, normalize=normalize)
        except DimensionError as exc:
            raise DimensionError(f"line {lineno}: {exc}") from exc
        except DegenerateVectorError as exc:
            raise DegenerateVectorError(f"line {lineno}: {exc}") from exc
        if dim is None:
            dim = vec.shape[0]
        out[id_] = vec
    if not out:
        raise FormatError(f"{path} contains no embedding records")
    return out


def attach_embeddings(
    items: Sequence[Instance], embeddings: Mapping[str, np.ndarray]
) -> list[EmbeddedInstance]:
    """Pair instances with their vectors; missing ids are a hard error."""
    missing = [item.id for item in items if item.id not in embeddings]
    if missing:
        shown = ", ".join(missing[:5])
        raise MissingEmbeddingError(
            f"{len(missing)} instance ids without embeddings (first: {shown})"
        )
    return [EmbeddedInstance(item, embeddings[item.id]) for item in items]


def load_split_override(path) -> tuple[list[str], list[str]]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc.msg}") from exc
    if not isinstance(payload, dict) or "train_ids" not in payload or "dev_ids" not in payload:
        raise SchemaError(f"{path}: override needs 'train_ids' and 'dev_ids' arrays")
    train_ids = [str(i) for i in payload["train_ids"]]
    dev_ids = [str(i) for i in payload["dev_ids"]]
    if set(train_ids) & set(dev_ids):
        raise SchemaError(f"{path}: train_ids and dev_ids overlap")
    return train_ids, dev_ids


def _word_count(text: str) -> int:
    return len(text.split())


def make_few_shot_split(
    dataset: Dataset,
    embeddings: Mapping[str, np.ndarray],
    n_train: int,
    n_dev: int,
    seed: int,
    strategy: str = "uniform",
    override: Optional[tuple[Sequence[str], Sequence[str]]] = None,
) -> FewShotSplit:
    """Sample ``n_train`` + ``n_dev`` instances per class without replacement.

    ``strategy="uniform"`` samples uniformly. ``strategy="median-length"``
    picks the train instances whose whitespace word count is closest to the
    class median (dev stays uniform over the remainder). An ``override``
    of explicit (train_ids, dev_ids) bypasses sampling entirely.
    """
    if override is not None:
        by_id = {item.id: item for item in dataset.items}
        train_ids, dev_ids = override
        unknown = [i for i in (*train_ids, *dev_ids) if i not in by_id]
        if unknown:
            raise SchemaError(f"override ids not in dataset: {unknown[:5]}")
        train = attach_embeddings([by_id[i] for i in train_ids], embeddings)
        dev = attach_embeddings([by_id[i] for i in dev_ids], embeddings)
        return FewShotSplit(train=tuple(train), dev=tuple(dev), seed=seed)

    if strategy not in ("uniform", "median-length"):
        raise ValueError(f"unknown split strategy {strategy!r}")
    if n_train < 1 or n_dev < 0:
        raise ValueError("n_train must be >= 1 and n_dev >= 0")

    rng = random.Random(seed)
    train: list[Instance] = []
    dev: list[Instance] = []
    groups = dataset.by_class()
    for label in dataset.label_space:
        # sorted-by-id candidates make the draw independent of file order
        candidates = sorted(groups[label], key=lambda item: item.id)
        required = n_train + n_dev
        if len(candidates) < required:
            raise InsufficientClassError(label, len(candidates), required)
        if strategy == "uniform":
            chosen = rng.sample(candidates, required)
            train.extend(chosen[:n_train])
            dev.extend(chosen[n_train:])
        else:
            median = float(np.median([_word_count(c.text) for c in candidates]))
            shuffled = candidates[:]
            rng.shuffle(shuffled)
            shuffled.sort(key=lambda item: abs(_word_count(item.text) - median))
            picked = shuffled[:n_train]
            train.extend(picked)
            rest = [c for c in candidates if c.id not in {p.id for p in picked}]
            dev.extend(rng.sample(rest, n_dev))

    return FewShotSplit(
        train=tuple(attach_embeddings(train, embeddings)),
        dev=tuple(attach_embeddings(dev, embeddings)),
        seed=seed,
    )


def make_streams(
    test: Sequence[EmbeddedInstance], n_shuffles: int, base_seed: int
) -> list[Stream]:
    """Return ``n_shuffles`` seeded permutations of the test set."""
    if n_shuffles < 1:
        raise ValueError("n_shuffles must be >= 1")
    streams = []
    for offset in range(n_shuffles):
        seed = base_seed + offset
        order = list(test)
        random.Random(seed).shuffle(order)
        streams.append(Stream(items=tuple(order), shuffle_seed=seed))
    return streams
