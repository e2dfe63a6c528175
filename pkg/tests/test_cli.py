import json
import subprocess
import sys

import pytest

from unsafeprop.cli import main
from unsafeprop.fixtures import fixture_path

FIG1 = str(fixture_path("fig1"))
FIXTURES = ["fig1", "generic_chain", "depth_cap", "redundant_block", "vacuous_unsafe"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestExitCodes:
    def test_check_fig1(self, capsys):
        code, out, err = run(capsys, "check", FIG1)
        assert (code, err) == (0, "")
        assert "5 packages" in out

    def test_discipline_error(self, capsys):
        code, _, err = run(capsys, "check", str(fixture_path("unsafe_call_error")))
        assert code == 1
        assert "E-UNSAFE-OP" in err

    def test_warning_only(self, capsys):
        code, out, err = run(capsys, "check", str(fixture_path("redundant_block")))
        assert code == 0
        assert "W-REDUNDANT-UNSAFE" in err and "W-REDUNDANT-UNSAFE" not in out

    def test_syntax_error(self, capsys, tmp_path):
        (tmp_path / "bad.ml").write_text("package p; fn (")
        code, _, err = run(capsys, "analyze", str(tmp_path))
        assert code == 1
        assert "E-SYNTAX" in err

    def test_missing_path(self, capsys, tmp_path):
        missing = tmp_path / "nope"
        code, _, err = run(capsys, "metrics", str(missing))
        assert code == 2
        assert str(missing) in err

    @pytest.mark.parametrize("argv,flag", [
        (["analyze", FIG1, "--depth-cap", "0"], "--depth-cap"),
        (["metrics", FIG1, "--cap-percentile", "150"], "--cap-percentile"),
        (["analyze", FIG1, "--mode", "reckless"], "--mode"),
        (["graph", FIG1, "--format", "csv"], "--format"),
        (["bogus"], "bogus"),
    ])
    def test_usage_errors_name_the_flag(self, capsys, argv, flag):
        code, _, err = run(capsys, *argv)
        assert code == 2
        assert flag in err

    def test_unknown_trusted_package(self, capsys):
        code, _, err = run(capsys, "analyze", FIG1, "--trusted", "nowhere")
        assert code == 2 and "nowhere" in err

    @pytest.mark.parametrize("name", FIXTURES)
    @pytest.mark.parametrize("command", ["check", "graph", "analyze", "metrics"])
    def test_fixtures_succeed(self, capsys, command, name):
        assert run(capsys, command, str(fixture_path(name)))[0] == 0

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "unsafeprop", "check", FIG1],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stderr == ""


class TestOutputs:
    def test_analyze_both_modes(self, capsys):
        code, out, _ = run(capsys, "analyze", FIG1, "--mode", "both")
        rows = {(r["id"], r["mode"]): r["label"] for r in json.loads(out)}
        assert rows[("library1::foo", "conservative")] == "possibly-unsafe"
        assert rows[("library1::foo", "optimistic")] == "safe"
        assert len(rows) == 10

    def test_analyze_single_mode_csv(self, capsys):
        code, out, _ = run(capsys, "analyze", FIG1, "--mode", "optimistic", "--format", "csv")
        lines = out.splitlines()
        assert lines[0] == "id,mode,label,declared_unsafe,vacuous"
        assert "library4::qux,optimistic,possibly-unsafe,true,true" in lines
        assert all(",optimistic," in line for line in lines[1:])

    def test_graph_export(self, capsys):
        code, out, _ = run(capsys, "graph", FIG1, "--early-termination")
        data = json.loads(out)
        assert data["meta"]["early_termination"] is True
        assert len(data["nodes"]) == 6

    def test_out_file(self, capsys, tmp_path):
        target = tmp_path / "v.json"
        code, out, _ = run(capsys, "analyze", FIG1, "--out", str(target))
        assert (code, out) == (0, "")
        assert json.loads(target.read_text())

    def test_metrics_directory(self, capsys, tmp_path):
        out_dir = tmp_path / "report"
        assert run(capsys, "metrics", FIG1, "--out", str(out_dir))[0] == 0
        assert sorted(snapshot(tmp_path)) == sorted(f"report/{n}" for n in [
            "metrics.csv", "cdf_blocks.csv", "cdf_unsafe_fns.csv",
            "cdf_possibly_unsafe_conservative.csv", "cdf_possibly_unsafe_optimistic.csv",
            "cdf_blocks.png", "cdf_unsafe_fns.png", "cdf_possibly_unsafe.png", "abi_census.png",
        ])
        assert (out_dir / "cdf_blocks.csv").read_text() == \
            "count,cumulative_percent\n0,80.0\n1,100.0\n"
        assert (out_dir / "cdf_blocks.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_cap_percentile(self, capsys, tmp_path):
        run(capsys, "metrics", FIG1, "--out", str(tmp_path), "--cap-percentile", "90")
        assert (tmp_path / "cdf_blocks.csv").read_text() == "count,cumulative_percent\n0,80.0\n"

    def test_diff_against_metrics_csv(self, capsys, tmp_path):
        run(capsys, "metrics", FIG1, "--out", str(tmp_path))
        code, out, _ = run(capsys, "diff", str(tmp_path / "metrics.csv"), FIG1)
        assert code == 0
        assert "#summary,blocks,same,100.0" in out.splitlines()
        code, out, _ = run(capsys, "diff", FIG1, FIG1, "--format", "json")
        assert json.loads(out)["summary"]["unsafe_fns"]["same"] == 100.0

    def test_diff_rejects_other_csv(self, capsys, tmp_path):
        (tmp_path / "x.csv").write_text("a,b\n")
        assert run(capsys, "diff", str(tmp_path / "x.csv"), FIG1)[0] == 2

    def test_synth(self, capsys, tmp_path):
        assert run(capsys, "synth", "--seed", "3", "--out", str(tmp_path))[0] == 0
        assert run(capsys, "check", str(tmp_path))[0] == 0


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["check", FIG1], ["graph", FIG1], ["analyze", FIG1], ["analyze", FIG1, "--format", "csv"],
        ["metrics", FIG1], ["diff", FIG1, FIG1],
    ])
    def test_stdout_stable(self, capsys, argv):
        first, second = run(capsys, *argv), run(capsys, *argv)
        assert first == second

    def test_metrics_files_stable(self, capsys, tmp_path):
        run(capsys, "metrics", FIG1, "--out", str(tmp_path / "a"))
        run(capsys, "metrics", FIG1, "--out", str(tmp_path / "b"))
        assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")
