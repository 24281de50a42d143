"""Unit tests for the command-line front end."""

import json
from fractions import Fraction
from pathlib import Path

import pytest

from moment_perturb.cli import (
    RunFlags,
    format_text,
    main,
    parse_ops,
    parse_t_grid,
    parse_tol,
    run,
    verify_certificate,
)
from moment_perturb.const import (
    EXIT_INCONSISTENT,
    EXIT_OK,
    EXIT_PARSE_ERROR,
    EXIT_REFUSAL,
    TOL_ZERO,
)
from moment_perturb.exceptions import SchemaMismatch, SpecParseError

SPECS = Path(__file__).resolve().parent.parent / "specs"
PAIR = str(SPECS / "pair.json")


def perturb_report(tmp_path: Path) -> Path:
    out = tmp_path / "report.json"
    code = main(
        [
            "perturb",
            "identity",
            "polystable",
            "--spec",
            PAIR,
            "--delta",
            "1.0",
            "--format",
            "machine",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    return out


# --- flag parsing ---


class TestFlagParsing:
    def test_t_grid(self):
        assert parse_t_grid("1:0.001:4") == pytest.approx((1.0, 0.1, 0.01, 0.001))
        assert parse_t_grid("0.5:0.5:1") == (0.5,)

    @pytest.mark.parametrize("text", ["1:2", "a:b:c", "0:1:3", "1:0.1:0"])
    def test_bad_t_grid(self, text):
        with pytest.raises(SpecParseError):
            parse_t_grid(text)

    def test_ops(self):
        rho = parse_ops("1, -2")
        assert rho.xi == (Fraction(1), Fraction(-2))
        assert rho.lattice

    def test_rational_ops_are_not_lattice(self):
        rho = parse_ops("1/2,1")
        assert rho.xi == (Fraction(1, 2), Fraction(1))
        assert not rho.lattice

    @pytest.mark.parametrize("text", ["x", "", "1,abc"])
    def test_bad_ops(self, text):
        with pytest.raises(SpecParseError):
            parse_ops(text)

    def test_tol(self):
        assert parse_tol([f"{TOL_ZERO}=1e-8", "max_iter = 10"]) == {
            TOL_ZERO: 1e-8,
            "max_iter": 10.0,
        }

    @pytest.mark.parametrize("pair", ["zero_tol", "zero_tol=small"])
    def test_bad_tol(self, pair):
        with pytest.raises(SpecParseError):
            parse_tol([pair])


# --- run ---


class TestRun:
    def test_classify(self):
        report, code = run("classify", PAIR, RunFlags(names=("polystable",)))
        assert code == EXIT_OK
        assert report.results[0]["stability"] == "stable"
        assert report.seed == 0

    def test_seed_flag_wins(self):
        report, _ = run("classify", PAIR, RunFlags(names=("origin",), seed=11))
        assert report.seed == 11

    def test_missing_spec_file(self, tmp_path):
        report, code = run("classify", tmp_path / "absent.json", RunFlags(names=("p",)))
        assert code == EXIT_PARSE_ERROR
        assert report.exit_code == EXIT_PARSE_ERROR
        assert report.results[0]["error"] == "SpecParseError"

    def test_unknown_tolerance_override(self):
        _, code = run("classify", PAIR, RunFlags(names=("origin",), tol={"bogus": 1.0}))
        assert code == EXIT_PARSE_ERROR

    def test_tolerance_override_is_recorded(self):
        report, _ = run("classify", PAIR, RunFlags(names=("origin",), tol={TOL_ZERO: 1e-8}))
        assert report.tolerances[TOL_ZERO] == 1e-8

    def test_deterministic(self):
        flags = RunFlags(names=("identity", "polystable"), delta=1.0)
        first, _ = run("perturb", PAIR, flags)
        second, _ = run("perturb", PAIR, flags)
        assert first.to_bytes(include_timings=False) == second.to_bytes(include_timings=False)


class TestFormatText:
    def test_scaling_table(self):
        flags = RunFlags(names=("quadratic", "balanced"), delta=0.5, t_grid=(100.0, 1.0))
        report, code = run("scan", PAIR, flags)
        text = format_text(report)
        assert code == EXIT_OK
        assert "[scan quadratic balanced] scaling" in text
        assert "outside model ball" in text
        assert text.endswith("exit 0\n")

    def test_error_lines(self):
        report, _ = run("perturb", PAIR, RunFlags(names=("identity", "polystable"), delta=0.5))
        text = format_text(report)
        assert "error: HypothesisFailed" in text
        assert "exit 2" in text


# --- main ---


class TestMain:
    def test_machine_output(self, tmp_path):
        out = tmp_path / "classify.json"
        code = main(
            ["classify", "polystable", "--spec", PAIR, "--format", "machine", "--out", str(out)]
        )
        assert code == EXIT_OK
        data = json.loads(out.read_text())
        assert data["results"][0]["label"] == "classify polystable"
        assert data["exit_code"] == EXIT_OK

    def test_text_to_stdout(self, capsys):
        assert main(["classify", "unstable", "--spec", PAIR]) == EXIT_OK
        out = capsys.readouterr().out
        assert "[classify unstable] cross_validation" in out
        assert "stability: unstable" in out

    def test_refusal_exit_code(self, tmp_path):
        code = main(
            [
                "perturb",
                "identity",
                "polystable",
                "--spec",
                PAIR,
                "--delta",
                "0.5",
                "--out",
                str(tmp_path / "r.txt"),
            ]
        )
        assert code == EXIT_REFUSAL

    def test_bad_flag_value(self, capsys):
        code = main(["scan", "quadratic", "balanced", "--spec", PAIR, "--t-grid", "1:2"])
        assert code == EXIT_PARSE_ERROR
        assert "--t-grid" in capsys.readouterr().err

    def test_degenerate(self, tmp_path):
        out = tmp_path / "deg.json"
        code = main(
            ["degenerate", "balanced", "--spec", PAIR, "--ops", "1", "--format", "machine",
             "--out", str(out)]
        )
        assert code == EXIT_OK
        assert json.loads(out.read_text())["results"][0]["limit_exists"] is False

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert "moment-perturb" in capsys.readouterr().out


class TestVerify:
    def test_issued_report_verifies(self, tmp_path):
        path = perturb_report(tmp_path)
        assert verify_certificate(path)
        assert main(["verify", str(path)]) == EXIT_OK

    def test_tampered_report_rejected(self, tmp_path):
        path = perturb_report(tmp_path)
        data = json.loads(path.read_text())
        data["results"][0]["eta_norm"] *= 0.5
        path.write_text(json.dumps(data))
        assert not verify_certificate(path)
        assert main(["verify", str(path)]) == EXIT_INCONSISTENT

    def test_report_without_certificates(self, tmp_path):
        out = tmp_path / "classify.json"
        main(["classify", "origin", "--spec", PAIR, "--format", "machine", "--out", str(out)])
        with pytest.raises(SchemaMismatch):
            verify_certificate(out)
        assert main(["verify", str(out)]) == EXIT_PARSE_ERROR

    def test_not_json(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text("garbage")
        assert main(["verify", str(path)]) == EXIT_PARSE_ERROR
