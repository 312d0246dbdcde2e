"""Discounted evaluation measures and running statistics over run traces.

The central quantity is phi_hat = phi - lambda * rho, where phi is a quality
score (accuracy by default), rho = M/N is the fraction of instances routed to
the teacher, and lambda is the exchange rate between calls and quality points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import (
    EmptyTraceError,
    FormatError,
    IoError,
    MissingGoldError,
    TraceShapeError,
)

STUDENT = "student"
TEACHER = "teacher"

TRACE_HEADER = ["step", "id", "decision", "predicted", "gold", "correct",
                "distance", "entropy", "M", "N"]


@dataclass(frozen=True)
class TraceStep:
    """One served instance: the decision, the served label, and the gate
    signals, plus cumulative call (M) and instance (N) counters."""

    step: int
    instance_id: str
    decision: str
    predicted: str
    gold: Optional[str]
    distance: float
    entropy: float
    m: int
    n: int

    def __post_init__(self):
        if self.decision not in (STUDENT, TEACHER):
            raise ValueError(f"decision must be student or teacher, got {self.decision!r}")
        if self.step < 1 or self.n < 1 or self.m < 0:
            raise ValueError("step and N must be >= 1, M >= 0")
        if self.m > self.n:
            raise ValueError(f"M={self.m} exceeds N={self.n}")

    @property
    def correct(self) -> Optional[bool]:
        if self.gold is None:
            return None
        return self.predicted == self.gold


@dataclass(frozen=True)
class RunTrace:
    """Ordered per-step log of one online run.

    ``complete`` is False when the run aborted mid-stream (for example on an
    unrecoverable teacher failure) and the trace is a prefix.
    """

    steps: tuple[TraceStep, ...]
    complete: bool = True

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        m_prev = 0
        for i, step in enumerate(self.steps, start=1):
            if step.step != i or step.n != i:
                raise TraceShapeError(
                    f"trace step {i} carries step={step.step}, N={step.n}"
                )
            expected_m = m_prev + (1 if step.decision == TEACHER else 0)
            if step.m != expected_m:
                raise TraceShapeError(
                    f"cumulative M at step {i} is {step.m}, expected {expected_m}"
                )
            m_prev = step.m

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def n(self) -> int:
        return len(self.steps)

    @property
    def m(self) -> int:
        return self.steps[-1].m if self.steps else 0

    @property
    def rho(self) -> float:
        if not self.steps:
            raise EmptyTraceError("empty trace has no call ratio")
        return self.m / self.n


@dataclass(frozen=True)
class DiscountedScore:
    phi: float
    rho: float
    lam: float
    phi_hat: float


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    calls: int
    accuracy: float
    phi_hat: float


Scorer = Callable[[RunTrace], float]


def accuracy(trace: RunTrace) -> float:
    """Fraction of steps whose served label matches gold."""
    if not trace.steps:
        raise EmptyTraceError("cannot score an empty trace")
    hits = 0
    for step in trace.steps:
        if step.gold is None:
            raise MissingGoldError(f"step {step.step} ({step.instance_id!r}) has no gold label")
        hits += step.predicted == step.gold
    return hits / trace.n


def discounted(phi: float, m: int, n: int, lam: float) -> DiscountedScore:
    """phi_hat = phi - lam * (m/n). May be negative."""
    if n < 1:
        raise EmptyTraceError("N must be >= 1")
    if not (0 <= m <= n):
        raise ValueError(f"M must be in [0, N]; got M={m}, N={n}")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    rho = m / n
    return DiscountedScore(phi=phi, rho=rho, lam=lam, phi_hat=phi - lam * rho)


def score_trace(trace: RunTrace, lam: float, scorer: Scorer = accuracy) -> DiscountedScore:
    """Discounted score of a whole trace under a pluggable quality scorer."""
    return discounted(scorer(trace), trace.m, trace.n, lam)


def trajectory(trace: RunTrace, lam: float, window: int = 1) -> list[TrajectoryPoint]:
    """Running (calls, accuracy, phi_hat) series, one point per ``window``
    steps; the final step is always included so the last point equals the
    whole-run metrics."""
    if window < 1:
        raise ValueError("window must be >= 1")
    points = []
    hits = 0
    last = len(trace.steps)
    for step in trace.steps:
        if step.gold is None:
            raise MissingGoldError(f"step {step.step} ({step.instance_id!r}) has no gold label")
        hits += step.predicted == step.gold
        if step.step % window == 0 or step.step == last:
            phi = hits / step.n
            points.append(TrajectoryPoint(
                step=step.step,
                calls=step.m,
                accuracy=phi,
                phi_hat=phi - lam * (step.m / step.n),
            ))
    return points


@dataclass(frozen=True)
class AggregateSummary:
    n_traces: int
    calls_mean: float
    calls_std: float
    accuracy_mean: float
    accuracy_std: float
    phi_hat_mean: float
    phi_hat_std: float


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    # sample standard deviation (ddof=1); a single value reports 0
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def aggregate(traces: Sequence[RunTrace], lam: float) -> AggregateSummary:
    """Mean and sample stdev of (calls, accuracy, phi_hat) across traces of
    equal length (shufflings of the same stream)."""
    if not traces:
        raise EmptyTraceError("aggregate requires at least one trace")
    length = traces[0].n
    for t in traces:
        if t.n != length:
            raise TraceShapeError(f"trace lengths differ: {t.n} vs {length}")
    calls = [float(t.m) for t in traces]
    accs = [accuracy(t) for t in traces]
    phi_hats = [score_trace(t, lam).phi_hat for t in traces]
    c_mean, c_std = _mean_std(calls)
    a_mean, a_std = _mean_std(accs)
    p_mean, p_std = _mean_std(phi_hats)
    return AggregateSummary(
        n_traces=len(traces),
        calls_mean=c_mean, calls_std=c_std,
        accuracy_mean=a_mean, accuracy_std=a_std,
        phi_hat_mean=p_mean, phi_hat_std=p_std,
    )


def aggregate_trajectory(
    traces: Sequence[RunTrace], lam: float, window: int = 1
) -> list[dict]:
    """Per-step mean and stdev of the trajectory across traces, for plotting."""
    if not traces:
        raise EmptyTraceError("aggregate requires at least one trace")
    series = [trajectory(t, lam, window) for t in traces]
    length = len(series[0])
    for s in series:
        if len(s) != length:
            raise TraceShapeError("trajectories have different lengths")
    rows = []
    for i in range(length):
        points = [s[i] for s in series]
        c_mean, c_std = _mean_std([float(p.calls) for p in points])
        a_mean, a_std = _mean_std([p.accuracy for p in points])
        p_mean, p_std = _mean_std([p.phi_hat for p in points])
        rows.append({
            "step": points[0].step,
            "calls_mean": c_mean, "calls_std": c_std,
            "accuracy_mean": a_mean, "accuracy_std": a_std,
            "phi_hat_mean": p_mean, "phi_hat_std": p_std,
        })
    return rows


def _fmt(value: float) -> str:
    return repr(float(value))


def write_trace_csv(trace: RunTrace, path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for s in trace.steps:
                correct = "" if s.correct is None else int(s.correct)
                writer.writerow([
                    s.step, s.instance_id, s.decision, s.predicted,
                    "" if s.gold is None else s.gold, correct,
                    _fmt(s.distance), _fmt(s.entropy), s.m, s.n,
                ])
    except OSError as exc:
        raise IoError(f"cannot write trace to {path}: {exc}") from exc


def read_trace_csv(path, complete: bool = True) -> RunTrace:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{path} is empty") from None
            if header != TRACE_HEADER:
                raise FormatError(f"unexpected trace header {header!r}")
            steps = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(TRACE_HEADER):
                    raise FormatError(f"wrong column count", line=lineno)
                try:
                    steps.append(TraceStep(
                        step=int(row[0]), instance_id=row[1], decision=row[2],
                        predicted=row[3], gold=row[4] or None,
                        distance=float(row[6]), entropy=float(row[7]),
                        m=int(row[8]), n=int(row[9]),
                    ))
                except ValueError as exc:
                    raise FormatError(f"bad trace row: {exc}", line=lineno) from exc
    except OSError as exc:
        raise IoError(f"cannot read trace from {path}: {exc}") from exc
    return RunTrace(steps=tuple(steps), complete=complete)


def write_trajectory_csv(points: Sequence[TrajectoryPoint], path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "calls", "accuracy", "phi_hat"])
            for p in points:
                writer.writerow([p.step, p.calls, _fmt(p.accuracy), _fmt(p.phi_hat)])
    except OSError as exc:
        raise IoError(f"cannot write trajectory to {path}: {exc}") from exc


def write_aggregate_trajectory_csv(rows: Sequence[dict], path) -> None:
    header = ["step", "calls_mean", "calls_std", "accuracy_mean",
              "accuracy_std", "phi_hat_mean", "phi_hat_std"]
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([row["step"]] + [_fmt(row[k]) for k in header[1:]])
    except OSError as exc:
        raise IoError(f"cannot write trajectory to {path}: {exc}") from exc
