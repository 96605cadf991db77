"""Command-line contract: argument grammar, exit codes, stdout summary."""

import json
import subprocess
import sys

import pytest

from theta_figures import read_verdict
from theta_figures.cli import main

GOLDEN_INPUTS = {
    "density_evolution": "density_evolution.csv",
    "ks_timeline": "ks_timeline.csv",
    "rate_loglog": "rate_theta0p0.csv",
    "heatmap_2d": "density_2d.csv",
}


class TestHappyPath:
    @pytest.mark.parametrize("kind", sorted(GOLDEN_INPUTS))
    def test_each_kind_renders_from_golden_csv(self, kind, fixture_path,
                                               tmp_path, capsys):
        out = tmp_path / f"{kind}.png"
        code = main([kind, "--in", fixture_path(GOLDEN_INPUTS[kind]),
                     "--out", str(out)])
        assert code == 0
        assert out.exists()
        summary = json.loads(capsys.readouterr().out)
        assert summary["kind"] == kind
        assert summary["file"] == str(out)

    def test_rate_annotation_matches_verdict_to_two_decimals(
            self, fixture_path, tmp_path, capsys):
        verdict_file = fixture_path("rate_verdict.json")
        code = main(["rate_loglog", "--in", fixture_path("rate_theta0p0.csv"),
                     "--verdict", verdict_file,
                     "--out", str(tmp_path / "rate.png")])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        slope = read_verdict(verdict_file)["metrics"]["fits"][
            "theta=0.0 variance"]["slope"]
        assert summary["annotations"]["slope"] == f"slope = {slope:.2f}"


class TestErrors:
    def test_missing_required_flag_is_usage_error(self, capsys):
        assert main(["ks_timeline", "--out", "x.png"]) == 2
        capsys.readouterr()

    def test_unknown_kind_is_usage_error(self, capsys):
        assert main(["pie_chart", "--in", "x.csv", "--out", "x.png"]) == 2
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()

    def test_nonexistent_input_reports_and_exits_2(self, tmp_path, capsys):
        code = main(["ks_timeline", "--in", str(tmp_path / "missing.csv"),
                     "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert "figures error" in capsys.readouterr().err

    def test_schema_mismatch_diagnoses_columns(self, fixture_path, tmp_path,
                                               capsys):
        out = tmp_path / "x.png"
        code = main(["heatmap_2d", "--in", fixture_path("ks_timeline.csv"),
                     "--out", str(out)])
        assert code == 2
        err = capsys.readouterr().err
        assert "['t', 'x', 'y', 'mass']" in err
        assert "['t', 'statistic', 'p_value']" in err
        assert not out.exists()

    def test_empty_csv_exits_2_and_writes_nothing(self, tmp_path, capsys):
        src = tmp_path / "empty.csv"
        src.write_text("t,statistic,p_value\n")
        out = tmp_path / "x.png"
        code = main(["ks_timeline", "--in", str(src), "--out", str(out)])
        assert code == 2
        assert "no data rows" in capsys.readouterr().err
        assert not out.exists()

    def test_corrupt_verdict_json_exits_2(self, fixture_path, tmp_path,
                                          capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code = main(["rate_loglog", "--in", fixture_path("rate_theta0p0.csv"),
                     "--verdict", str(bad),
                     "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert "figures error" in capsys.readouterr().err


class TestConsoleEntry:
    def test_module_invocation_works(self, fixture_path, tmp_path):
        out = tmp_path / "ks.png"
        proc = subprocess.run(
            [sys.executable, "-m", "theta_figures.cli", "ks_timeline",
             "--in", fixture_path("ks_timeline.csv"), "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert out.exists()
        assert json.loads(proc.stdout)["kind"] == "ks_timeline"
