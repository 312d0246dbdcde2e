"""Teacher backends: live chat-completion client, record/replay store, and a
seeded oracle for simulation.

All backends satisfy the same protocol: ``respond(instance) -> TeacherResponse``.
The live client builds a few-shot chat prompt (system message naming every
class, demonstrators as alternating user/assistant turns grouped class by
class, the query as the final user turn) and canonicalizes the assistant's
reply back into the label space.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .domain import Instance, LabelSpace
from .errors import (
    FixtureMissError,
    FormatError,
    OracleNeedsGoldError,
    TeacherProtocolError,
    TeacherUnavailableError,
)

API_KEY_ENV = "OCATS_TEACHER_API_KEY"

_TASK_TEMPLATES = ("intent", "sentiment")

_INTENT_SYSTEM = (
    "You are an expert assistant in the customer service department of a company. "
    "Classify each customer message into exactly one of the known classes so the "
    "service worker can answer it. You MUST respond with the number and the name "
    "of one of the following classes; any other reply will be penalized.\n"
    "The classes are:\n{classes}"
)

_SENTIMENT_SYSTEM = (
    "Analyze the sentiment of each of the following texts and classify it as "
    "either {choices}. Respond with the class name only.\n"
    "The classes are:\n{classes}"
)


@dataclass(frozen=True)
class PromptBundle:
    """System message + demonstrator history + the final user query."""

    system_message: str
    demonstrators: tuple[tuple[str, str], ...]
    query_text: str

    def messages(self) -> list[dict]:
        msgs = [{"role": "system", "content": self.system_message}]
        for user_text, assistant_label in self.demonstrators:
            msgs.append({"role": "user", "content": user_text})
            msgs.append({"role": "assistant", "content": assistant_label})
        msgs.append({"role": "user", "content": self.query_text})
        return msgs


@dataclass(frozen=True)
class TeacherResponse:
    label: str
    raw_text: str
    latency_ms: float = 0.0
    cost_units: float = 1.0


def build_prompt(
    space: LabelSpace,
    demos: Sequence,
    query: Instance,
    task_template: str = "intent",
) -> PromptBundle:
    """Assemble the few-shot chat prompt.

    ``demos`` are instances with gold labels (the few-shot train set);
    they are emitted grouped by class in label-space order, preserving the
    given order within each class.
    """
    if task_template not in _TASK_TEMPLATES:
        raise ValueError(f"unknown task template {task_template!r}")
    class_lines = "\n".join(f"- {label}" for label in space)
    if task_template == "intent":
        system = _INTENT_SYSTEM.format(classes=class_lines)
    else:
        quoted = [f"'{label}'" for label in space]
        choices = " or ".join(quoted) if len(quoted) == 2 else ", ".join(quoted)
        system = _SENTIMENT_SYSTEM.format(choices=choices, classes=class_lines)

    ordered = sorted(
        enumerate(demos), key=lambda pair: (space.index(pair[1].gold_label), pair[0])
    )
    demonstrators = tuple((demo.text, demo.gold_label) for _, demo in ordered)
    return PromptBundle(
        system_message=system, demonstrators=demonstrators, query_text=query.text
    )


def prompt_hash(bundle: PromptBundle) -> str:
    payload = json.dumps(bundle.messages(), sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


_NUMERIC_PREFIX = re.compile(r"^\s*\d+\s*[-–.:)]*\s*")


def canonical_label(raw_text: str, space: LabelSpace) -> str:
    """Map a raw assistant reply onto a label: trim, match case-insensitively,
    and if that fails strip a leading "NN - " style numeric prefix and retry.

    The raw form is tried first so labels that themselves start with digits
    are never mangled; this also makes canonicalization idempotent.
    """
    trimmed = raw_text.strip()
    for attempt in (trimmed, _NUMERIC_PREFIX.sub("", trimmed).strip()):
        if not attempt:
            continue
        lowered = attempt.lower()
        for label in space:
            if label.lower() == lowered:
                return label
    raise TeacherProtocolError(
        f"cannot map teacher reply {raw_text!r} to a label", raw_text=raw_text
    )


class OracleTeacher:
    """Simulation stand-in: returns the gold label with probability
    ``accuracy``, otherwise a uniformly random wrong label. Deterministic
    per (seed, instance.id), independent of call order."""

    def __init__(
        self, space: LabelSpace, accuracy: float, seed: int = 0, cost_units: float = 1.0
    ):
        if not (0.0 <= accuracy <= 1.0):
            raise ValueError("accuracy must be in [0, 1]")
        self.space = space
        self.accuracy = accuracy
        self.seed = seed
        self.cost_units = cost_units

    def respond(self, instance: Instance) -> TeacherResponse:
        if instance.gold_label is None:
            raise OracleNeedsGoldError(f"instance {instance.id!r} has no gold label")
        rng = random.Random(f"{self.seed}:{instance.id}")
        if rng.random() < self.accuracy:
            label = instance.gold_label
        else:
            wrong = [l for l in self.space if l != instance.gold_label]
            label = rng.choice(wrong)
        return TeacherResponse(label=label, raw_text=label, cost_units=self.cost_units)


class FixtureStore:
    """JSONL store of recorded teacher responses keyed by (id, prompt hash)."""

    def __init__(self, path):
        self.path = Path(path)
        self._records: dict[tuple[str, str], TeacherResponse] = {}
        if self.path.exists():
            for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    key = (str(rec["id"]), str(rec["prompt_hash"]))
                    self._records[key] = TeacherResponse(
                        label=str(rec["label"]), raw_text=str(rec["raw_text"])
                    )
                except (json.JSONDecodeError, KeyError) as exc:
                    raise FormatError(f"corrupt fixture record: {exc}", line=lineno) from exc

    def __len__(self) -> int:
        return len(self._records)

    def get(self, instance_id: str, bundle_hash: str) -> TeacherResponse:
        try:
            return self._records[(instance_id, bundle_hash)]
        except KeyError:
            raise FixtureMissError(
                f"no fixture for id {instance_id!r} under this prompt"
            ) from None

    def record(self, instance_id: str, bundle_hash: str, response: TeacherResponse) -> None:
        self._records[(instance_id, bundle_hash)] = response
        line = json.dumps(
            {
                "id": instance_id,
                "prompt_hash": bundle_hash,
                "raw_text": response.raw_text,
                "label": response.label,
            }
        )
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()


class _PromptingTeacher:
    """Shared prompt construction for the backends that need the chat bundle."""

    def __init__(self, space: LabelSpace, demos: Sequence, task_template: str):
        self.space = space
        self.demos = list(demos)
        self.task_template = task_template

    def bundle_for(self, instance: Instance) -> PromptBundle:
        return build_prompt(self.space, self.demos, instance, self.task_template)


class ReplayTeacher(_PromptingTeacher):
    """Byte-deterministic playback of recorded responses; a recording made
    under a different prompt (hash mismatch) is treated as a miss."""

    def __init__(self, space, demos, task_template, store: FixtureStore):
        super().__init__(space, demos, task_template)
        self.store = store

    def respond(self, instance: Instance) -> TeacherResponse:
        return self.store.get(instance.id, prompt_hash(self.bundle_for(instance)))


class LiveTeacher(_PromptingTeacher):
    """Chat-completion client: one POST per call, temperature 0, up to
    ``max_attempts`` tries with exponential backoff on transport errors and
    HTTP 429/5xx."""

    def __init__(
        self,
        space: LabelSpace,
        demos: Sequence,
        task_template: str,
        endpoint: str,
        model: str,
        cost_units: float = 1.0,
        timeout: float = 60.0,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
        client: Optional[httpx.Client] = None,
    ):
        super().__init__(space, demos, task_template)
        self.endpoint = endpoint
        self.model = model
        self.cost_units = cost_units
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._client = client or httpx.Client(timeout=timeout)

    def _post(self, bundle: PromptBundle) -> str:
        body = {"model": self.model, "messages": bundle.messages(), "temperature": 0}
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._client.post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise TeacherUnavailableError(f"teacher returned HTTP {resp.status_code}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise TeacherProtocolError(
                    f"malformed completion payload: {exc}", raw_text=resp.text
                ) from exc
        raise TeacherUnavailableError(
            f"teacher unreachable after {self.max_attempts} attempts ({last_error})"
        )

    def respond(self, instance: Instance) -> TeacherResponse:
        bundle = self.bundle_for(instance)
        started = time.perf_counter()
        raw = self._post(bundle)
        latency_ms = (time.perf_counter() - started) * 1000.0
        label = canonical_label(raw, self.space)
        return TeacherResponse(
            label=label, raw_text=raw, latency_ms=latency_ms, cost_units=self.cost_units
        )


class RecordingTeacher:
    """Wraps another teacher and records every response into a fixture store."""

    def __init__(self, inner, store: FixtureStore, prompting: Optional[_PromptingTeacher] = None):
        self.inner = inner
        self.store = store
        self._prompting = prompting or (inner if isinstance(inner, _PromptingTeacher) else None)

    def respond(self, instance: Instance) -> TeacherResponse:
        response = self.inner.respond(instance)
        bundle_hash = (
            prompt_hash(self._prompting.bundle_for(instance)) if self._prompting else ""
        )
        self.store.record(instance.id, bundle_hash, response)
        return response
