"""The online serving loop: student predicts, the gate decides, and rejected
instances go to the teacher, whose answer is cached and may trigger a student
retrain. Instance i+1 always sees the cache state left by instance i.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Optional

from .cache import Cache
from .domain import EmbeddedInstance, LabelSpace
from .errors import (
    EmptyCacheError,
    EmptyNeighborhoodError,
    FixtureMissError,
    OracleNeedsGoldError,
    TeacherProtocolError,
    TeacherUnavailableError,
)
from .gate import Thresholds, bootstrap_decision, decide
from .ingest import Stream
from .metrics import RunTrace, STUDENT, TEACHER, TraceStep
from .students import KnnStudent, MlpConfig, MlpStudent, maybe_retrain

STUDENT_KINDS = ("knn", "mlp")
TEACHER_KINDS = ("oracle", "replay", "live")


@dataclass(frozen=True)
class RouterConfig:
    thresholds: Thresholds
    student: str = "knn"
    k: int = 5
    lam: float = 0.0
    mlp: Optional[MlpConfig] = None
    entropy_domain: str = "present"
    teacher: str = "oracle"

    def __post_init__(self):
        if self.student not in STUDENT_KINDS:
            raise ValueError(f"student kind must be one of {STUDENT_KINDS}")
        if self.teacher not in TEACHER_KINDS:
            raise ValueError(f"teacher kind must be one of {TEACHER_KINDS}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")


def make_student(config: RouterConfig, space: LabelSpace):
    if config.student == "knn":
        return KnnStudent(k=config.k, entropy_domain=config.entropy_domain)
    return MlpStudent(space, config.mlp or MlpConfig(), k=config.k)


@dataclass(frozen=True)
class ServeResult:
    label: str
    source: str
    distance: float
    entropy: float
    latency_ms: float = 0.0
    retrained: bool = False


class Router:
    """One stream's worth of online state: cache, student, teacher, counters.

    Thread safety: predictions read a cache snapshot; the teacher path
    (insert + retrain + counters) is serialized on an internal lock, which is
    the contract the gateway relies on.
    """

    def __init__(self, cache: Cache, student, teacher, thresholds: Thresholds):
        self.cache = cache
        self.student = student
        self.teacher = teacher
        self.thresholds = thresholds
        self.n = 0
        self.m = 0
        self._lock = threading.Lock()
        self.student.initialize(self.cache)

    def serve(self, inst: EmbeddedInstance) -> ServeResult:
        started = time.perf_counter()
        try:
            pred = self.student.predict(self.cache, inst.embedding)
            decision = decide(pred, self.thresholds)
        except (EmptyCacheError, EmptyNeighborhoodError):
            pred = None
            decision = bootstrap_decision(self.cache.label_space)

        if decision.use_student:
            with self._lock:
                self.n += 1
            return ServeResult(
                label=pred.label,
                source=STUDENT,
                distance=decision.distance,
                entropy=decision.entropy,
                latency_ms=(time.perf_counter() - started) * 1000.0,
            )

        invalid = False
        try:
            response = self.teacher.respond(inst.instance)
            label = response.label
            cached_label = response.label
        except TeacherProtocolError as exc:
            # unusable reply: scored incorrect, cached but never trained on
            invalid = True
            label = ""
            cached_label = exc.raw_text
        except (TeacherUnavailableError, OracleNeedsGoldError, FixtureMissError) as exc:
            raise type(exc)(f"instance {inst.id!r}: {exc}") from exc

        with self._lock:
            self.cache.insert(inst, cached_label, invalid=invalid)
            retrained = maybe_retrain(self.student, self.cache)
            self.n += 1
            self.m += 1
        return ServeResult(
            label=label,
            source=TEACHER,
            distance=decision.distance,
            entropy=decision.entropy,
            latency_ms=(time.perf_counter() - started) * 1000.0,
            retrained=retrained,
        )


def run_stream(router: Router, stream: Stream) -> RunTrace:
    """Serve a stream strictly in order; on an unrecoverable teacher error the
    partial trace is returned flagged incomplete."""
    steps: list[TraceStep] = []
    complete = True
    m = 0
    for i, inst in enumerate(stream.items, start=1):
        try:
            result = router.serve(inst)
        except (TeacherUnavailableError, OracleNeedsGoldError, FixtureMissError):
            complete = False
            break
        if result.source == TEACHER:
            m += 1
        steps.append(TraceStep(
            step=i,
            instance_id=inst.id,
            decision=result.source,
            predicted=result.label,
            gold=inst.gold_label,
            distance=result.distance,
            entropy=result.entropy,
            m=m,
            n=i,
        ))
    return RunTrace(steps=tuple(steps), complete=complete)
