"""Command-line interface tests (in-process invocation)."""

import filecmp
from pathlib import Path

import pytest

from epidusim.cli import main


def tree_bytes(root: Path) -> dict:
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestSimulate:
    def test_writes_deterministic_records(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        argv = ["simulate", "--profile", "expert", "--mass", "71", "--trials", "2", "--seed", "1"]
        assert main(argv + ["--out", str(a)]) == 0
        assert main(argv + ["--out", str(b)]) == 0
        ta, tb = tree_bytes(a), tree_bytes(b)
        assert len(ta) == 2
        assert ta == tb

    def test_default_masses_need_multiple_of_three(self, tmp_path, capsys):
        assert main(["simulate", "--trials", "4", "--out", str(tmp_path)]) == 2
        assert "multiple of 3" in capsys.readouterr().err

    def test_twelve_trial_run(self, tmp_path):
        out = tmp_path / "records"
        assert main(
            ["simulate", "--profile", "novice", "--trials", "3", "--seed", "7",
             "--out", str(out)]
        ) == 0
        files = sorted(out.glob("*.jsonl"))
        assert len(files) == 3
        assert files[0].name == "novice-s7_trial000.jsonl"


class TestAnalyze:
    def test_empty_glob_fails_without_partial_output(self, tmp_path, capsys):
        out = tmp_path / "metrics.csv"
        code = main(["analyze", "--in", str(tmp_path / "none*.jsonl"), "--out", str(out)])
        assert code == 2
        assert not out.exists()
        assert "no record files" in capsys.readouterr().err

    def test_analyze_simulated_records(self, tmp_path):
        records = tmp_path / "records"
        main(["simulate", "--profile", "expert", "--mass", "71", "--trials", "2",
              "--seed", "3", "--out", str(records)])
        out = tmp_path / "metrics.csv"
        assert main(["analyze", "--in", str(records / "*.jsonl"), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 3  # header + 2 trials
        assert lines[0].startswith("participant,trial_index,kind,")


class TestReplay:
    def test_verify_passes_on_genuine_record(self, tmp_path):
        records = tmp_path / "records"
        main(["simulate", "--profile", "intermediate", "--mass", "85", "--trials", "1",
              "--seed", "5", "--out", str(records)])
        (path,) = records.glob("*.jsonl")
        assert main(["replay", "--in", str(path), "--verify"]) == 0

    def test_verify_fails_on_tampered_record(self, tmp_path):
        records = tmp_path / "records"
        main(["simulate", "--profile", "expert", "--mass", "71", "--trials", "1",
              "--seed", "6", "--out", str(records)])
        (path,) = records.glob("*.jsonl")
        lines = path.read_text().splitlines()
        # corrupt one logged force field mid-file
        idx = len(lines) // 2
        assert '"f_touhy_n":' in lines[idx]
        import json

        row = json.loads(lines[idx])
        row["f_touhy_n"] += 0.37
        lines[idx] = json.dumps(row, sort_keys=True, separators=(",", ":"))
        path.write_text("\n".join(lines) + "\n")
        assert main(["replay", "--in", str(path), "--verify"]) == 1


class TestReportCommand:
    def test_end_to_end_pipeline(self, tmp_path):
        records = tmp_path / "records"
        for profile, seed in (("novice", 1), ("intermediate", 2), ("expert", 3)):
            main(["simulate", "--profile", profile, "--trials", "3", "--seed", str(seed),
                  "--out", str(records)])
        metrics = tmp_path / "metrics.csv"
        assert main(["analyze", "--in", str(records / "*.jsonl"), "--out", str(metrics)]) == 0

        profiles = tmp_path / "profiles.csv"
        profiles.write_text(
            "participant,years_experience,n_epidurals_estimate,position,vas_overall\n"
            "novice-s1,0.5,20,resident,55\n"
            "intermediate-s2,2,150,,70\n"
            "expert-s3,9,800,attending,85\n"
        )
        out = tmp_path / "report"
        assert main(["report", "--metrics", str(metrics), "--profiles", str(profiles),
                     "--out", str(out)]) == 0
        produced = {p.name for p in out.iterdir()}
        assert {"participants.csv", "outcome_rates_by_level.csv", "summary.json",
                "vas_by_group.csv"} <= produced

        # novice simulations overshoot on light patients: success ordering holds
        header, *rows = (out / "participants.csv").read_text().splitlines()
        cols = header.split(",")
        by_id = {r.split(",")[0]: dict(zip(cols, r.split(","))) for r in rows}
        assert float(by_id["expert-s3"]["success_rate"]) >= float(
            by_id["novice-s1"]["success_rate"]
        )

    def test_report_missing_profile_is_clean_error(self, tmp_path, capsys):
        records = tmp_path / "records"
        main(["simulate", "--profile", "expert", "--mass", "71", "--trials", "1",
              "--seed", "4", "--out", str(records)])
        metrics = tmp_path / "metrics.csv"
        main(["analyze", "--in", str(records / "*.jsonl"), "--out", str(metrics)])
        profiles = tmp_path / "profiles.csv"
        profiles.write_text("participant,years_experience,n_epidurals_estimate,position\n")
        code = main(["report", "--metrics", str(metrics), "--profiles", str(profiles),
                     "--out", str(tmp_path / "rep")])
        assert code == 2
        assert "without profiles" in capsys.readouterr().err
