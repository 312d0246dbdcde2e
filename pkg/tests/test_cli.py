"""Tests for the command-line interface: subcommands, overrides, exit codes."""

import json
from pathlib import Path

import pytest

from conftest import write_config
from ocats.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, build_parser, main
from ocats.experiments import trace_name

INLINE = {"0.1": {"t_c": 0.35, "t_h": 0.25}}


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def config_path(small_config, tmp_path):
    cfg = dict(small_config, n_dev=3, thresholds=INLINE)
    return write_config(cfg, tmp_path / "config.json")


class TestSplit:
    def test_writes_split_and_reports_counts(self, capsys, config_path, small_config):
        code, out, err = run_cli(capsys, "split", "--config", str(config_path))
        assert code == EXIT_OK
        assert "split.json" in out
        assert "60 train" in out
        assert (Path(small_config["output_dir"]) / "split.json").exists()

    def test_overrides_change_the_split(self, capsys, config_path, tmp_path):
        out_dir = tmp_path / "override"
        code, _, _ = run_cli(
            capsys, "split", "--config", str(config_path),
            "--output-dir", str(out_dir), "--n-dev", "10", "--seed", "3",
        )
        assert code == EXIT_OK
        payload = json.loads((out_dir / "split.json").read_text())
        assert payload["seed"] == 3
        assert payload["stats"]["n_dev_total"] == 10 * 20

    def test_oversized_split_is_a_config_failure(self, capsys, config_path):
        """Asking for more per-class instances than exist exits 2."""
        code, _, err = run_cli(
            capsys, "split", "--config", str(config_path), "--n-dev", "50"
        )
        assert code == EXIT_CONFIG
        assert "error:" in err


class TestTune:
    def test_tune_writes_reports(self, capsys, config_path, small_config):
        code, out, _ = run_cli(capsys, "tune", "--config", str(config_path))
        assert code == EXIT_OK
        assert "lambda=0.1: best t_c=" in out
        assert (Path(small_config["output_dir"]) / "tuning_lam0.1.json").exists()

    def test_lambdas_override(self, capsys, config_path, small_config):
        code, out, _ = run_cli(
            capsys, "tune", "--config", str(config_path), "--lambdas", "0.2"
        )
        assert code == EXIT_OK
        assert "lambda=0.2" in out
        assert "lambda=0.1" not in out
        assert (Path(small_config["output_dir"]) / "tuning_lam0.2.json").exists()

    def test_unparseable_lambdas_exit_config(self, capsys, config_path):
        code, _, err = run_cli(
            capsys, "tune", "--config", str(config_path), "--lambdas", "0.1,abc"
        )
        assert code == EXIT_CONFIG
        assert "lambdas" in err


class TestSimulate:
    def test_simulate_prints_summary_lines(self, capsys, config_path, small_config):
        code, out, _ = run_cli(capsys, "simulate", "--config", str(config_path))
        assert code == EXIT_OK
        assert "lambda=0.1: calls" in out
        assert "always-teacher" in out
        out_dir = Path(small_config["output_dir"])
        assert (out_dir / "summary.json").exists()
        assert (out_dir / trace_name(0.1, 0)).exists()

    def test_simulate_without_thresholds_exits_config(
        self, capsys, small_config, tmp_path
    ):
        cfg = dict(small_config, n_dev=3)
        path = write_config(cfg, tmp_path / "config.json")
        code, _, err = run_cli(capsys, "simulate", "--config", str(path))
        assert code == EXIT_CONFIG
        assert "tune" in err


class TestReport:
    def test_report_agrees_after_simulate(self, capsys, config_path, small_config):
        assert run_cli(capsys, "simulate", "--config", str(config_path))[0] == EXIT_OK
        code, out, _ = run_cli(
            capsys, "report", "--output-dir", small_config["output_dir"]
        )
        assert code == EXIT_OK
        assert "summary.json agrees with the raw traces" in out
        assert "lambda=0.1" in out

    def test_report_flags_tampered_summary(self, capsys, config_path, small_config):
        """A summary.json that disagrees with its traces exits 1."""
        assert run_cli(capsys, "simulate", "--config", str(config_path))[0] == EXIT_OK
        summary_path = Path(small_config["output_dir"]) / "summary.json"
        payload = json.loads(summary_path.read_text())
        payload["results"][0]["accuracy_mean"] += 0.25
        summary_path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        code, _, err = run_cli(
            capsys, "report", "--output-dir", small_config["output_dir"]
        )
        assert code == EXIT_RUNTIME
        assert "mismatch" in err
        assert "accuracy_mean" in err

    def test_report_on_empty_directory_exits_config(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "report", "--output-dir", str(tmp_path))
        assert code == EXIT_CONFIG
        assert "simulate" in err


class TestFailureModes:
    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "split", "--config", str(tmp_path / "absent.json")
        )
        assert code == EXIT_CONFIG
        assert "not found" in err

    def test_malformed_config_json(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{oops", encoding="utf-8")
        code, _, err = run_cli(capsys, "split", "--config", str(path))
        assert code == EXIT_CONFIG
        assert "invalid JSON" in err

    def test_unknown_config_key(self, capsys, small_config, tmp_path):
        path = write_config(dict(small_config, lambada=0.1), tmp_path / "c.json")
        code, _, err = run_cli(capsys, "split", "--config", str(path))
        assert code == EXIT_CONFIG
        assert "lambada" in err

    def test_missing_data_file_names_the_path(self, capsys, small_config, tmp_path):
        cfg = dict(small_config, embeddings=str(tmp_path / "gone.jsonl"))
        path = write_config(cfg, tmp_path / "c.json")
        code, _, err = run_cli(capsys, "split", "--config", str(path))
        assert code == EXIT_CONFIG
        assert "gone.jsonl" in err

    def test_missing_required_flag_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["split"])
        assert err.value.code == 2

    def test_unknown_student_choice_is_a_usage_error(self, capsys, config_path):
        with pytest.raises(SystemExit) as err:
            main(["simulate", "--config", str(config_path), "--student", "svm"])
        assert err.value.code == 2


class TestParser:
    def test_serve_accepts_network_flags(self):
        args = build_parser().parse_args(
            ["serve", "--config", "c.json", "--host", "0.0.0.0", "--port", "9001"]
        )
        assert args.command == "serve"
        assert args.host == "0.0.0.0"
        assert args.port == 9001

    def test_manifest_is_advertised_as_config_input(self):
        parser = build_parser()
        assert "manifest.json" in parser.format_help() or any(
            "manifest.json" in (a.help or "")
            for sub in parser._subparsers._group_actions
            for p in sub.choices.values()
            for a in p._actions
        )


class TestEndToEnd:
    def test_split_tune_simulate_report(self, capsys, small_config, tmp_path):
        """The documented workflow runs clean end to end on one config."""
        cfg = dict(small_config, n_dev=3)
        path = write_config(cfg, tmp_path / "config.json")
        out_dir = small_config["output_dir"]
        assert run_cli(capsys, "split", "--config", str(path))[0] == EXIT_OK
        assert run_cli(capsys, "tune", "--config", str(path))[0] == EXIT_OK
        assert run_cli(capsys, "simulate", "--config", str(path))[0] == EXIT_OK
        code, out, _ = run_cli(capsys, "report", "--output-dir", out_dir)
        assert code == EXIT_OK
        assert "agrees" in out
