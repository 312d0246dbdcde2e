"""Experiment orchestration behind the CLI: config loading and validation,
the split/tune/simulate runners, and the reproducibility manifest.

All outputs are deterministic functions of (config, seeds, data): JSON is
written with sorted keys and CSV floats use repr, so re-running a manifest
reproduces every artifact byte for byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields as dataclass_fields
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .cache import Cache
from .domain import LabelSpace
from .errors import ConfigError, OcatsError
from .gate import Thresholds
from .ingest import (
    FewShotSplit,
    attach_embeddings,
    load_dataset,
    load_embeddings,
    load_split_override,
    make_few_shot_split,
    make_streams,
)
from .metrics import (
    aggregate,
    aggregate_trajectory,
    score_trace,
    write_aggregate_trajectory_csv,
    write_trace_csv,
)
from .router import Router, RouterConfig, make_student, run_stream
from .students import MlpConfig
from .teachers import (
    FixtureStore,
    LiveTeacher,
    OracleTeacher,
    RecordingTeacher,
    ReplayTeacher,
)
from .tuner import SearchSpace, ThresholdEvaluator, TpeConfig, TuneResult, tune

DEFAULT_LAMBDAS = (0.05, 0.1, 0.2, 0.3)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class TeacherSettings:
    kind: str = "oracle"
    accuracy: float = 0.9
    seed: int = 0
    cost_units: float = 1.0
    endpoint: Optional[str] = None
    model: Optional[str] = None
    task_template: str = "intent"
    fixtures: Optional[str] = None
    record: bool = False

    def __post_init__(self):
        _require(self.kind in ("oracle", "replay", "live"),
                 f"teacher.kind must be oracle, replay, or live; got {self.kind!r}")
        _require(0.0 <= self.accuracy <= 1.0, "teacher.accuracy must be in [0, 1]")
        _require(self.cost_units >= 0, "teacher.cost_units must be >= 0")
        _require(self.task_template in ("intent", "sentiment"),
                 "teacher.task_template must be intent or sentiment")
        if self.kind == "replay":
            _require(self.fixtures is not None, "replay teacher needs teacher.fixtures")
        if self.kind == "live":
            _require(bool(self.endpoint), "live teacher needs teacher.endpoint")
            _require(bool(self.model), "live teacher needs teacher.model")


@dataclass(frozen=True)
class TuningSettings:
    n_trials: int = 50
    gamma: float = 0.25
    n_candidates: int = 24
    resolution: int = 10
    seed: int = 0
    t_c_lo: float = 0.0
    t_c_hi: float = 2.0
    t_h_lo: float = 0.0
    t_h_hi: Optional[float] = None

    def __post_init__(self):
        _require(self.n_trials >= 0, "tuning.n_trials must be >= 0")
        _require(self.resolution >= 2, "tuning.resolution must be >= 2")

    def search_space(self, space: LabelSpace) -> SearchSpace:
        t_h_hi = self.t_h_hi if self.t_h_hi is not None else space.max_entropy
        return SearchSpace(
            t_c_lo=self.t_c_lo, t_c_hi=self.t_c_hi, t_h_lo=self.t_h_lo, t_h_hi=t_h_hi
        )

    def tpe_config(self) -> TpeConfig:
        return TpeConfig(
            n_trials=self.n_trials,
            gamma=self.gamma,
            n_candidates=self.n_candidates,
            seed=self.seed,
        )


@dataclass(frozen=True)
class GatewaySettings:
    host: str = "127.0.0.1"
    port: int = 8000
    cache_path: Optional[str] = None
    embed_dim: int = 768
    embed_seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    embeddings: str
    output_dir: str
    test_dataset: Optional[str] = None
    test_embeddings: Optional[str] = None
    dataset_format: Optional[str] = None
    seed: int = 0
    stream_seed: Optional[int] = None
    n_shuffles: int = 5
    n_train: int = 3
    n_dev: int = 13
    split_strategy: str = "uniform"
    split_override: Optional[str] = None
    student: str = "knn"
    k: int = 5
    entropy_domain: str = "present"
    mlp: Optional[MlpConfig] = None
    teacher: TeacherSettings = field(default_factory=TeacherSettings)
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    thresholds: Optional[dict[str, Thresholds]] = None
    tuning: TuningSettings = field(default_factory=TuningSettings)
    trajectory_window: int = 1
    gateway: GatewaySettings = field(default_factory=GatewaySettings)

    def __post_init__(self):
        _require(self.n_shuffles >= 1, "n_shuffles must be >= 1")
        _require(self.n_train >= 1 and self.n_dev >= 0,
                 "n_train must be >= 1 and n_dev >= 0")
        _require(self.student in ("knn", "mlp"),
                 f"student must be knn or mlp; got {self.student!r}")
        _require(self.k >= 1, "k must be >= 1")
        _require(all(lam >= 0 for lam in self.lambdas), "every lambda must be >= 0")
        _require(len(self.lambdas) >= 1, "lambdas must be nonempty")
        _require(self.trajectory_window >= 1, "trajectory_window must be >= 1")

    @property
    def stream_base_seed(self) -> int:
        return self.stream_seed if self.stream_seed is not None else self.seed + 1

    def check_input_files(self, need_test: bool = True) -> None:
        paths = [("dataset file", self.dataset), ("embedding file", self.embeddings)]
        if need_test and self.test_dataset is not None:
            paths.append(("test dataset file", self.test_dataset))
        if need_test and self.test_embeddings is not None:
            paths.append(("test embedding file", self.test_embeddings))
        if self.split_override is not None:
            paths.append(("split override file", self.split_override))
        if self.teacher.kind == "replay":
            paths.append(("fixture file", self.teacher.fixtures))
        for label, path in paths:
            if not Path(path).exists():
                raise ConfigError(f"{label} not found: {path}")


def _lam_key(lam: float) -> str:
    return repr(float(lam))


def _build_dataclass(cls, payload: Mapping, context: str):
    if not isinstance(payload, Mapping):
        raise ConfigError(f"{context} must be a JSON object")
    known = {f.name for f in dataclass_fields(cls)}
    unknown = sorted(set(payload) - known)
    _require(not unknown, f"unknown {context} keys: {', '.join(unknown)}")
    try:
        return cls(**payload)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {context}: {exc}") from exc


def config_from_dict(payload: Mapping) -> ExperimentConfig:
    if not isinstance(payload, Mapping):
        raise ConfigError("config must be a JSON object")
    if "config" in payload and "code_version" in payload:
        # a manifest doubles as a config: unwrap and re-run
        return config_from_dict(payload["config"])
    data = dict(payload)
    for key in ("dataset", "embeddings", "output_dir"):
        _require(key in data, f"config is missing required key {key!r}")
    if "teacher" in data and data["teacher"] is not None:
        data["teacher"] = _build_dataclass(TeacherSettings, data["teacher"], "teacher")
    if "tuning" in data and data["tuning"] is not None:
        data["tuning"] = _build_dataclass(TuningSettings, data["tuning"], "tuning")
    if "gateway" in data and data["gateway"] is not None:
        data["gateway"] = _build_dataclass(GatewaySettings, data["gateway"], "gateway")
    if "mlp" in data and data["mlp"] is not None:
        data["mlp"] = _build_dataclass(MlpConfig, data["mlp"], "mlp")
    if "lambdas" in data:
        _require(isinstance(data["lambdas"], Sequence) and not isinstance(data["lambdas"], str),
                 "lambdas must be an array of numbers")
        data["lambdas"] = tuple(float(v) for v in data["lambdas"])
    if "thresholds" in data and data["thresholds"] is not None:
        raw = data["thresholds"]
        _require(isinstance(raw, Mapping), "thresholds must map lambda to {t_c, t_h}")
        parsed = {}
        for key, value in raw.items():
            _require(isinstance(value, Mapping) and {"t_c", "t_h"} <= set(value),
                     f"thresholds[{key!r}] must carry t_c and t_h")
            try:
                parsed[_lam_key(float(key))] = Thresholds(
                    t_c=float(value["t_c"]), t_h=float(value["t_h"])
                )
            except ValueError as exc:
                raise ConfigError(f"thresholds[{key!r}]: {exc}") from exc
        data["thresholds"] = parsed
    return _build_dataclass(ExperimentConfig, data, "config")


def config_to_dict(config: ExperimentConfig) -> dict:
    def convert(value):
        if isinstance(value, Thresholds):
            return {"t_c": value.t_c, "t_h": value.t_h}
        if isinstance(value, (TeacherSettings, TuningSettings, GatewaySettings, MlpConfig)):
            return {f.name: convert(getattr(value, f.name)) for f in dataclass_fields(value)}
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        return value

    return {f.name: convert(getattr(config, f.name)) for f in dataclass_fields(ExperimentConfig)}


def load_config(path, overrides: Optional[Mapping] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg}") from exc
    if isinstance(payload, Mapping) and "config" in payload and "code_version" in payload:
        payload = payload["config"]
    if not isinstance(payload, Mapping):
        raise ConfigError(f"{path}: config must be a JSON object")
    merged = dict(payload)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    return config_from_dict(merged)


@dataclass(frozen=True)
class ExperimentData:
    label_space: LabelSpace
    split: FewShotSplit
    test_items: tuple
    dim: int


def load_experiment_data(config: ExperimentConfig) -> ExperimentData:
    """Load datasets and embeddings, draw the few-shot split, and carve out
    the stream pool (the test dataset, or the remainder of the single one)."""
    dataset = load_dataset(config.dataset, format=config.dataset_format)
    embeddings = load_embeddings(config.embeddings)
    override = (
        load_split_override(config.split_override)
        if config.split_override is not None
        else None
    )
    split = make_few_shot_split(
        dataset,
        embeddings,
        n_train=config.n_train,
        n_dev=config.n_dev,
        seed=config.seed,
        strategy=config.split_strategy,
        override=override,
    )
    if config.test_dataset is not None:
        test_set = load_dataset(
            config.test_dataset,
            format=config.dataset_format,
            label_space=dataset.label_space,
        )
        test_embeddings = (
            load_embeddings(config.test_embeddings)
            if config.test_embeddings is not None
            else embeddings
        )
        test_items = attach_embeddings(test_set.items, test_embeddings)
    else:
        held = {item.id for item in split.train} | {item.id for item in split.dev}
        rest = [item for item in dataset.items if item.id not in held]
        test_items = attach_embeddings(rest, embeddings)
    if not test_items:
        raise ConfigError("the stream pool is empty; nothing to simulate")
    dim = split.train[0].dim if split.train else test_items[0].dim
    return ExperimentData(
        label_space=dataset.label_space,
        split=split,
        test_items=tuple(test_items),
        dim=dim,
    )


def make_teacher(config: ExperimentConfig, data: ExperimentData, allow_paid: bool = False):
    settings = config.teacher
    if settings.kind == "oracle":
        return OracleTeacher(
            data.label_space,
            accuracy=settings.accuracy,
            seed=settings.seed,
            cost_units=settings.cost_units,
        )
    if settings.kind == "replay":
        store = FixtureStore(settings.fixtures)
        return ReplayTeacher(
            data.label_space, data.split.train, settings.task_template, store
        )
    if not allow_paid:
        raise ConfigError("live teacher requires --allow-paid")
    teacher = LiveTeacher(
        data.label_space,
        data.split.train,
        settings.task_template,
        endpoint=settings.endpoint,
        model=settings.model,
        cost_units=settings.cost_units,
    )
    if settings.record:
        _require(settings.fixtures is not None,
                 "teacher.record needs teacher.fixtures to write to")
        teacher = RecordingTeacher(teacher, FixtureStore(settings.fixtures))
    return teacher


def router_config(config: ExperimentConfig, thresholds: Thresholds, lam: float) -> RouterConfig:
    return RouterConfig(
        thresholds=thresholds,
        student=config.student,
        k=config.k,
        lam=lam,
        mlp=config.mlp,
        entropy_domain=config.entropy_domain,
        teacher=config.teacher.kind,
    )


def _write_json(path: Path, payload) -> None:
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(config: ExperimentConfig, out_dir: Path, command: str,
                   outputs: Sequence[str]) -> Path:
    from . import __version__

    manifest = {
        "code_version": __version__,
        "command": command,
        "config": config_to_dict(config),
        "outputs": {name: _sha256_file(out_dir / name) for name in sorted(outputs)},
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


# --- split ---------------------------------------------------------------


def run_split(config: ExperimentConfig) -> dict:
    config.check_input_files(need_test=False)
    data = load_experiment_data(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def class_counts(items) -> dict:
        counts: dict[str, int] = {}
        for item in items:
            counts[item.gold_label] = counts.get(item.gold_label, 0) + 1
        return dict(sorted(counts.items()))

    payload = {
        "seed": config.seed,
        "n_train": config.n_train,
        "n_dev": config.n_dev,
        "strategy": config.split_strategy,
        "train_ids": [item.id for item in data.split.train],
        "dev_ids": [item.id for item in data.split.dev],
        "stats": {
            "train_per_class": class_counts(data.split.train),
            "dev_per_class": class_counts(data.split.dev),
            "n_train_total": len(data.split.train),
            "n_dev_total": len(data.split.dev),
        },
    }
    _write_json(out_dir / "split.json", payload)
    write_manifest(config, out_dir, "split", ["split.json"])
    return payload


# --- tune ----------------------------------------------------------------


def tuning_report_name(lam: float) -> str:
    return f"tuning_lam{_lam_key(lam)}.json"


def _tune_result_payload(lam: float, result: TuneResult) -> dict:
    return {
        "lambda": lam,
        "best": {
            "t_c": result.best.thresholds.t_c,
            "t_h": result.best.thresholds.t_h,
            "objective": result.best.objective,
            "trial": result.best.trial,
        },
        "observations": [
            {
                "trial": obs.trial,
                "t_c": obs.thresholds.t_c,
                "t_h": obs.thresholds.t_h,
                "objective": obs.objective,
            }
            for obs in result.observations
        ],
        "contour": {
            "t_c": list(result.contour_t_c),
            "t_h": list(result.contour_t_h),
            "objective": [list(row) for row in result.contour],
        },
    }


def _write_contour_csv(path: Path, result: TuneResult) -> None:
    import csv as _csv

    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["t_c", "t_h", "phi_hat"])
        for i, t_c in enumerate(result.contour_t_c):
            for j, t_h in enumerate(result.contour_t_h):
                writer.writerow([repr(t_c), repr(t_h), repr(result.contour[i][j])])


def run_tuning(config: ExperimentConfig, allow_paid: bool = False,
               lambdas: Optional[Sequence[float]] = None) -> dict[str, Thresholds]:
    config.check_input_files(need_test=False)
    data = load_experiment_data(config)
    _require(len(data.split.dev) > 0, "tuning needs a nonempty dev split (n_dev >= 1)")
    teacher = make_teacher(config, data, allow_paid)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    space = config.tuning.search_space(data.label_space)
    tpe_cfg = config.tuning.tpe_config()

    best: dict[str, Thresholds] = {}
    outputs = []
    for lam in (lambdas if lambdas is not None else config.lambdas):
        base = router_config(config, Thresholds(0.0, 0.0), lam)
        evaluator = ThresholdEvaluator(
            data.split, data.label_space, base, teacher, dev_seed=config.seed
        )
        result = tune(space, tpe_cfg, evaluator, resolution=config.tuning.resolution)
        report = tuning_report_name(lam)
        contour = f"contour_lam{_lam_key(lam)}.csv"
        _write_json(out_dir / report, _tune_result_payload(lam, result))
        _write_contour_csv(out_dir / contour, result)
        outputs.extend([report, contour])
        best[_lam_key(lam)] = result.best.thresholds
    write_manifest(config, out_dir, "tune", outputs)
    return best


def resolve_thresholds(config: ExperimentConfig) -> dict[str, Thresholds]:
    """Thresholds per lambda, inline from the config or read back from the
    tuning reports in the output directory."""
    resolved: dict[str, Thresholds] = {}
    inline = config.thresholds or {}
    for lam in config.lambdas:
        key = _lam_key(lam)
        if key in inline:
            resolved[key] = inline[key]
            continue
        report = Path(config.output_dir) / tuning_report_name(lam)
        if not report.exists():
            raise ConfigError(
                f"no thresholds for lambda={key}: provide them inline or run "
                f"`tune` first (missing {report})"
            )
        payload = json.loads(report.read_text(encoding="utf-8"))
        best = payload["best"]
        resolved[key] = Thresholds(t_c=float(best["t_c"]), t_h=float(best["t_h"]))
    return resolved


# --- simulate ------------------------------------------------------------


def always_teacher_accuracy(teacher, items) -> float:
    """Quality of routing everything to the teacher; order-independent for
    the deterministic oracle, so one pass over the pool suffices."""
    hits = 0
    for item in items:
        hits += teacher.respond(item.instance).label == item.gold_label
    return hits / len(items)


def trace_name(lam: float, shuffle_index: int) -> str:
    return f"trace_lam{_lam_key(lam)}_shuffle{shuffle_index}.csv"


def run_simulation(config: ExperimentConfig, allow_paid: bool = False) -> dict:
    config.check_input_files()
    data = load_experiment_data(config)
    teacher = make_teacher(config, data, allow_paid)
    thresholds = resolve_thresholds(config)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    streams = make_streams(data.test_items, config.n_shuffles, config.stream_base_seed)
    baseline_phi = always_teacher_accuracy(teacher, data.test_items)

    outputs: list[str] = []
    summary_rows = []
    for lam in config.lambdas:
        key = _lam_key(lam)
        th = thresholds[key]
        traces = []
        trace_files = []
        for idx, stream in enumerate(streams):
            cache = Cache.seeded(
                ((item, item.gold_label) for item in data.split.train),
                data.label_space,
                dim=data.dim,
            )
            rc = router_config(config, th, lam)
            student = make_student(rc, data.label_space)
            router = Router(cache, student, teacher, th)
            trace = run_stream(router, stream)
            name = trace_name(lam, idx)
            write_trace_csv(trace, out_dir / name)
            traces.append(trace)
            trace_files.append(name)
            if not trace.complete:
                raise OcatsError(
                    f"stream aborted early (lambda={key}, shuffle {idx}); "
                    f"partial trace kept at {name}"
                )
        summary = aggregate(traces, lam)
        trajectory_file = f"trajectory_lam{key}.csv"
        write_aggregate_trajectory_csv(
            aggregate_trajectory(traces, lam, config.trajectory_window),
            out_dir / trajectory_file,
        )
        outputs.extend(trace_files + [trajectory_file])
        summary_rows.append({
            "lambda": lam,
            "thresholds": {"t_c": th.t_c, "t_h": th.t_h},
            "calls_mean": summary.calls_mean,
            "calls_std": summary.calls_std,
            "accuracy_mean": summary.accuracy_mean,
            "accuracy_std": summary.accuracy_std,
            "phi_hat_mean": summary.phi_hat_mean,
            "phi_hat_std": summary.phi_hat_std,
            "always_teacher_phi": baseline_phi,
            "always_teacher_phi_hat": baseline_phi - lam,
            "traces": trace_files,
            "trajectory": trajectory_file,
        })

    summary_payload = {
        "student": config.student,
        "teacher": config.teacher.kind,
        "n_shuffles": config.n_shuffles,
        "stream_length": len(data.test_items),
        "cache_seed_size": len(data.split.train),
        "lambdas": list(config.lambdas),
        "results": summary_rows,
    }
    _write_json(out_dir / "summary.json", summary_payload)
    outputs.append("summary.json")
    write_manifest(config, out_dir, "simulate", outputs)
    return summary_payload


# --- report --------------------------------------------------------------


def recompute_summary(output_dir) -> dict:
    """Rebuild per-lambda metrics from the raw trace CSVs on disk; the stored
    summary.json is bookkeeping only and must agree with this."""
    from .metrics import read_trace_csv

    out_dir = Path(output_dir)
    summary_path = out_dir / "summary.json"
    if not summary_path.exists():
        raise ConfigError(f"no summary.json under {out_dir}; run simulate first")
    stored = json.loads(summary_path.read_text(encoding="utf-8"))
    rows = []
    for row in stored["results"]:
        lam = float(row["lambda"])
        traces = [read_trace_csv(out_dir / name) for name in row["traces"]]
        summary = aggregate(traces, lam)
        rows.append({
            "lambda": lam,
            "calls_mean": summary.calls_mean,
            "calls_std": summary.calls_std,
            "accuracy_mean": summary.accuracy_mean,
            "accuracy_std": summary.accuracy_std,
            "phi_hat_mean": summary.phi_hat_mean,
            "phi_hat_std": summary.phi_hat_std,
        })
    return {"results": rows, "stored": stored}


def verify_summary(output_dir, tolerance: float = 1e-9) -> list[str]:
    """Compare summary.json against recomputation; returns mismatch messages."""
    recomputed = recompute_summary(output_dir)
    problems = []
    for fresh, stored in zip(recomputed["results"], recomputed["stored"]["results"]):
        for key in ("calls_mean", "calls_std", "accuracy_mean", "accuracy_std",
                    "phi_hat_mean", "phi_hat_std"):
            if abs(fresh[key] - stored[key]) > tolerance:
                problems.append(
                    f"lambda={fresh['lambda']}: {key} stored {stored[key]!r} "
                    f"!= recomputed {fresh[key]!r}"
                )
    return problems
