"""Routing criteria: trust the student only when both signals clear their thresholds.

Comparisons are strict (< threshold); boundary equality routes to the
teacher, the cost-incurring direction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import LabelSpace
from .students import StudentPrediction

DISTANCE_BOUND = 2.0


@dataclass(frozen=True)
class Thresholds:
    t_c: float
    t_h: float

    def __post_init__(self):
        if not (0.0 <= self.t_c <= DISTANCE_BOUND):
            raise ValueError(f"t_c must be in [0, 2], got {self.t_c}")
        if self.t_h < 0.0:
            raise ValueError(f"t_h must be >= 0, got {self.t_h}")


@dataclass(frozen=True)
class GateDecision:
    use_student: bool
    distance_ok: bool
    entropy_ok: bool
    distance: float
    entropy: float


def decide(pred: StudentPrediction, thresholds: Thresholds) -> GateDecision:
    """Both conditions must hold for the student's answer to be served."""
    distance_ok = pred.centroid_distance < thresholds.t_c
    entropy_ok = pred.entropy < thresholds.t_h
    return GateDecision(
        use_student=distance_ok and entropy_ok,
        distance_ok=distance_ok,
        entropy_ok=entropy_ok,
        distance=pred.centroid_distance,
        entropy=pred.entropy,
    )


def bootstrap_decision(space: LabelSpace) -> GateDecision:
    """Cold-start decision when the student cannot predict (empty cache):
    always call the teacher, with both signals pinned at their upper bounds."""
    return GateDecision(
        use_student=False,
        distance_ok=False,
        entropy_ok=False,
        distance=DISTANCE_BOUND,
        entropy=space.max_entropy,
    )
