"""Per-lambda threshold optimization on the few-shot dev stream.

A 10x10 grid search over (t_c, t_H) provides a head start; a Tree-structured
Parzen Estimator then proposes further trials, maximizing discounted accuracy.
The TPE models good and bad observation densities per dimension with truncated
Gaussian kernels and suggests the candidate maximizing their ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .cache import Cache
from .domain import LabelSpace
from .gate import Thresholds
from .ingest import FewShotSplit, make_streams
from .metrics import score_trace
from .router import Router, RouterConfig, make_student, run_stream


@dataclass(frozen=True)
class SearchSpace:
    """Box bounds for the two gate thresholds."""

    t_c_lo: float = 0.0
    t_c_hi: float = 2.0
    t_h_lo: float = 0.0
    t_h_hi: float = 4.34

    def __post_init__(self):
        if not (self.t_c_lo < self.t_c_hi and self.t_h_lo < self.t_h_hi):
            raise ValueError("search space bounds must satisfy lo < hi")

    @classmethod
    def for_label_space(cls, space: LabelSpace) -> "SearchSpace":
        # entropy can never exceed ln L, so cap t_H there
        return cls(t_h_hi=space.max_entropy)

    @property
    def bounds(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.t_c_lo, self.t_c_hi), (self.t_h_lo, self.t_h_hi))

    def clamp(self, t_c: float, t_h: float) -> Thresholds:
        return Thresholds(
            t_c=min(max(t_c, self.t_c_lo), self.t_c_hi),
            t_h=min(max(t_h, self.t_h_lo), self.t_h_hi),
        )


@dataclass(frozen=True)
class TunerObservation:
    thresholds: Thresholds
    objective: float
    trial: int

    def __post_init__(self):
        if not math.isfinite(self.objective):
            raise ValueError("objective must be finite")


@dataclass(frozen=True)
class TpeConfig:
    n_trials: int = 50
    n_startup: int = 0
    gamma: float = 0.25
    n_candidates: int = 24
    bandwidth_rule: str = "scott"
    seed: int = 0

    def __post_init__(self):
        if self.n_trials < 0:
            raise ValueError("n_trials must be >= 0")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must be in (0, 1)")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.bandwidth_rule != "scott":
            raise ValueError(f"unknown bandwidth rule {self.bandwidth_rule!r}")


Evaluator = Callable[[Thresholds], float]


class ThresholdEvaluator:
    """Objective for the tuner: run the full online loop over the dev stream
    with a fresh cache seeded from the few-shot train set, return phi_hat.

    A fresh cache and student per call keeps trials independent (no leakage).
    """

    def __init__(
        self,
        split: FewShotSplit,
        space: LabelSpace,
        config: RouterConfig,
        teacher,
        dev_seed: int = 0,
    ):
        self.split = split
        self.space = space
        self.config = config
        self.teacher = teacher
        # fixed dev order: tuning replays the same single shuffle every trial
        self.dev_stream = make_streams(split.dev, 1, dev_seed)[0]

    def seeded_cache(self) -> Cache:
        return Cache.seeded(
            ((item, item.gold_label) for item in self.split.train),
            self.space,
            dim=self.split.train[0].dim if self.split.train else None,
        )

    def __call__(self, thresholds: Thresholds) -> float:
        config = replace(self.config, thresholds=thresholds)
        cache = self.seeded_cache()
        student = make_student(config, self.space)
        router = Router(cache, student, self.teacher, thresholds)
        trace = run_stream(router, self.dev_stream)
        return score_trace(trace, config.lam).phi_hat


def grid_search(
    space: SearchSpace, evaluator: Evaluator, resolution: int = 10
) -> list[TunerObservation]:
    """Evaluate the full resolution^2 lattice (bounds included), t_c outer."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    t_c_axis = np.linspace(space.t_c_lo, space.t_c_hi, resolution)
    t_h_axis = np.linspace(space.t_h_lo, space.t_h_hi, resolution)
    observations = []
    trial = 0
    for t_c in t_c_axis:
        for t_h in t_h_axis:
            th = Thresholds(t_c=float(t_c), t_h=float(t_h))
            observations.append(
                TunerObservation(thresholds=th, objective=evaluator(th), trial=trial)
            )
            trial += 1
    return observations


def _bandwidth(values: np.ndarray, lo: float, hi: float) -> float:
    # Scott-style rule on truncated support, floored so point masses still mix
    n = len(values)
    span = hi - lo
    if n < 2:
        return 0.25 * span
    sd = float(np.std(values, ddof=1))
    bw = sd * n ** (-0.2)
    return float(min(max(bw, 1e-3 * span), span))


class _TruncatedKde:
    """Mean of truncated Gaussian kernels plus a uniform prior at weight
    1/(n+1), on support [lo, hi]."""

    def __init__(self, values: Sequence[float], lo: float, hi: float):
        self.lo = lo
        self.hi = hi
        self.centers = np.asarray(values, dtype=np.float64)
        self.sigma = _bandwidth(self.centers, lo, hi)
        n = len(self.centers)
        self.prior_weight = 1.0 / (n + 1)
        self._uniform_pdf = 1.0 / (hi - lo)
        # per-kernel CDF at the support edges; the difference is the mass
        # inside [lo, hi] used to renormalize each truncated kernel
        self._cdf_lo = ndtr((lo - self.centers) / self.sigma) if n else None
        self._cdf_hi = ndtr((hi - self.centers) / self.sigma) if n else None

    def pdf(self, x: float) -> float:
        total = self.prior_weight * self._uniform_pdf
        if len(self.centers):
            z = (x - self.centers) / self.sigma
            dens = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))
            masses = self._cdf_hi - self._cdf_lo
            total += (1.0 - self.prior_weight) * float(np.mean(dens / masses))
        return total

    def sample(self, rng: np.random.Generator) -> float:
        n = len(self.centers)
        if n == 0 or rng.random() < self.prior_weight:
            return float(rng.uniform(self.lo, self.hi))
        i = int(rng.integers(n))
        # inverse-CDF sampling restricted to the support
        u = rng.uniform(self._cdf_lo[i], self._cdf_hi[i])
        x = self.centers[i] + self.sigma * float(ndtri(u))
        return float(min(max(x, self.lo), self.hi))


def tpe_suggest(
    history: Sequence[TunerObservation],
    space: SearchSpace,
    cfg: TpeConfig,
    trial_index: int,
) -> Thresholds:
    """Propose thresholds maximizing l(x)/g(x) over candidates sampled from l,
    where l models the top gamma-quantile of observations and g the rest.

    Deterministic per (history, seed, trial index); with insufficient history
    falls back to a uniform sample in the space.
    """
    rng = np.random.default_rng([cfg.seed, trial_index])
    if len(history) < max(2, cfg.n_startup):
        return space.clamp(
            float(rng.uniform(space.t_c_lo, space.t_c_hi)),
            float(rng.uniform(space.t_h_lo, space.t_h_hi)),
        )
    # stable sort, best objective first; ties resolved by earliest trial
    ranked = sorted(history, key=lambda o: (-o.objective, o.trial))
    n_good = max(1, math.ceil(cfg.gamma * len(ranked)))
    n_good = min(n_good, len(ranked) - 1)
    good, bad = ranked[:n_good], ranked[n_good:]

    kdes = []
    for dim, (lo, hi) in enumerate(space.bounds):
        pick = (lambda o: o.thresholds.t_c) if dim == 0 else (lambda o: o.thresholds.t_h)
        kdes.append((
            _TruncatedKde([pick(o) for o in good], lo, hi),
            _TruncatedKde([pick(o) for o in bad], lo, hi),
        ))

    best_score = -math.inf
    best: Optional[tuple[float, float]] = None
    for _ in range(cfg.n_candidates):
        candidate = tuple(l.sample(rng) for l, _ in kdes)
        score = 0.0
        for x, (l, g) in zip(candidate, kdes):
            score += math.log(max(l.pdf(x), 1e-300)) - math.log(max(g.pdf(x), 1e-300))
        if score > best_score:
            best_score = score
            best = candidate
    return space.clamp(*best)


@dataclass(frozen=True)
class TuneResult:
    best: TunerObservation
    observations: tuple[TunerObservation, ...]
    contour_t_c: tuple[float, ...]
    contour_t_h: tuple[float, ...]
    contour: tuple[tuple[float, ...], ...]


def tune(
    space: SearchSpace,
    cfg: TpeConfig,
    evaluator: Evaluator,
    resolution: int = 10,
) -> TuneResult:
    """Grid head start + TPE trials; best = argmax objective, ties by earliest
    trial. The grid lattice doubles as contour-map data for plotting."""
    observations = grid_search(space, evaluator, resolution)
    t_c_axis = np.linspace(space.t_c_lo, space.t_c_hi, resolution)
    t_h_axis = np.linspace(space.t_h_lo, space.t_h_hi, resolution)
    contour = tuple(
        tuple(observations[i * resolution + j].objective for j in range(resolution))
        for i in range(resolution)
    )
    for _ in range(cfg.n_trials):
        trial = len(observations)
        th = tpe_suggest(observations, space, cfg, trial_index=trial)
        observations.append(
            TunerObservation(thresholds=th, objective=evaluator(th), trial=trial)
        )
    best = max(observations, key=lambda o: (o.objective, -o.trial))
    return TuneResult(
        best=best,
        observations=tuple(observations),
        contour_t_c=tuple(float(v) for v in t_c_axis),
        contour_t_h=tuple(float(v) for v in t_h_axis),
        contour=contour,
    )
