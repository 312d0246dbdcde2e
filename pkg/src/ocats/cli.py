"""Command-line front end: split, tune, simulate, serve, report.

Configuration lives in a single JSON document; every flag below overrides the
matching config field. Exit codes: 0 success, 1 runtime failure, 2 config or
validation failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .errors import (
    ConfigError,
    FormatError,
    InsufficientClassError,
    OcatsError,
    SchemaError,
)
from .experiments import (
    load_config,
    run_simulation,
    run_split,
    run_tuning,
    verify_summary,
    recompute_summary,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_VALIDATION_ERRORS = (ConfigError, SchemaError, FormatError, InsufficientClassError)


def _parse_lambdas(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse --lambdas {text!r}: {exc}") from exc


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("output_dir", "seed", "student", "k", "n_shuffles",
            "n_train", "n_dev", "stream_seed")
    overrides = {key: getattr(args, key, None) for key in keys}
    if getattr(args, "lambdas", None) is not None:
        overrides["lambdas"] = _parse_lambdas(args.lambdas)
    return overrides


def _load(args: argparse.Namespace):
    return load_config(args.config, _overrides(args))


def cmd_split(args: argparse.Namespace) -> int:
    config = _load(args)
    payload = run_split(config)
    print(f"wrote {config.output_dir}/split.json "
          f"({payload['stats']['n_train_total']} train, "
          f"{payload['stats']['n_dev_total']} dev)")
    return EXIT_OK


def cmd_tune(args: argparse.Namespace) -> int:
    config = _load(args)
    best = run_tuning(config, allow_paid=args.allow_paid)
    for key, th in best.items():
        print(f"lambda={key}: best t_c={th.t_c:.6f} t_h={th.t_h:.6f}")
    print(f"reports written under {config.output_dir}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    summary = run_simulation(config, allow_paid=args.allow_paid)
    for row in summary["results"]:
        print(
            f"lambda={row['lambda']}: calls {row['calls_mean']:.1f}"
            f" +/- {row['calls_std']:.1f}, accuracy {row['accuracy_mean']:.4f},"
            f" phi_hat {row['phi_hat_mean']:.4f}"
            f" (always-teacher {row['always_teacher_phi_hat']:.4f})"
        )
    print(f"traces and summary written under {config.output_dir}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .gateway import build_gateway

    config = _load(args)
    if args.host is not None or args.port is not None:
        gateway = replace(
            config.gateway,
            host=args.host if args.host is not None else config.gateway.host,
            port=args.port if args.port is not None else config.gateway.port,
        )
        config = replace(config, gateway=gateway)
    app = build_gateway(config, allow_paid=args.allow_paid)
    uvicorn.run(app, host=config.gateway.host, port=config.gateway.port)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    recomputed = recompute_summary(args.output_dir)
    for row in recomputed["results"]:
        print(
            f"lambda={row['lambda']}: calls {row['calls_mean']:.1f}"
            f" +/- {row['calls_std']:.1f}, accuracy {row['accuracy_mean']:.4f},"
            f" phi_hat {row['phi_hat_mean']:.4f}"
        )
    problems = verify_summary(args.output_dir)
    if problems:
        for problem in problems:
            print(f"mismatch: {problem}", file=sys.stderr)
        return EXIT_RUNTIME
    print("summary.json agrees with the raw traces")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ocats",
        description="Online cost-aware teacher-student routing: cache an "
                    "expensive classifier's answers and serve a cheap local "
                    "student when it is trustworthy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, with_paid: bool = True) -> None:
        p.add_argument("--config", required=True,
                       help="experiment config JSON (a manifest.json also works)")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--stream-seed", dest="stream_seed", type=int)
        p.add_argument("--student", choices=("knn", "mlp"))
        p.add_argument("--k", type=int)
        p.add_argument("--n-shuffles", dest="n_shuffles", type=int)
        p.add_argument("--n-train", dest="n_train", type=int)
        p.add_argument("--n-dev", dest="n_dev", type=int)
        p.add_argument("--lambdas", help="comma-separated, e.g. 0.05,0.1,0.2,0.3")
        if with_paid:
            p.add_argument("--allow-paid", action="store_true",
                           help="permit calls to a live (paid) teacher")

    p_split = sub.add_parser("split", help="draw and save the few-shot split")
    add_common(p_split, with_paid=False)
    p_split.set_defaults(func=cmd_split)

    p_tune = sub.add_parser("tune", help="tune gate thresholds per lambda")
    add_common(p_tune)
    p_tune.set_defaults(func=cmd_tune)

    p_sim = sub.add_parser("simulate", help="run the online loop over test streams")
    add_common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    add_common(p_serve)
    p_serve.add_argument("--host")
    p_serve.add_argument("--port", type=int)
    p_serve.set_defaults(func=cmd_serve)

    p_report = sub.add_parser(
        "report", help="recompute metrics from traces and check summary.json"
    )
    p_report.add_argument("--output-dir", dest="output_dir", required=True)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OcatsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
