import json
import subprocess
import sys

import pytest

from pooltest import cli

from conftest import CHAIN_3, GREEDY_3


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestCount:
    def test_known_count(self, capsys):
        code, out, _ = run_cli(capsys, "count", "--n", "4")
        assert code == 0
        assert out.strip() == "36585024"

    def test_json_output(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "count", "--n", "3")
        assert code == 0
        assert json.loads(out) == {"n": 3, "count": 312, "method": "dp"}

    def test_naive_count(self, capsys):
        code, out, _ = run_cli(capsys, "count", "--n", "3", "--naive")
        assert out.strip() == "12"

    def test_catalan_bound(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "count", "--n", "2", "--catalan")
        assert json.loads(out)["count"] == 28

    def test_size_limit_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "count", "--n", "9")
        assert code == 3
        assert "limited" in err


class TestEnumerate:
    def test_count_only(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate", "--n", "3", "--count-only")
        assert out.strip() == "312"

    def test_dump_file(self, capsys, tmp_path):
        path = tmp_path / "procs.txt"
        code, _, _ = run_cli(capsys, "enumerate", "--n", "2", "--out", str(path))
        assert code == 0
        lines = path.read_text().splitlines()
        assert len(lines) == 4
        assert all(line.startswith(("P{", "L(")) for line in lines)


class TestOptimal:
    def test_hard_point(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "optimal", "--priors", "0.01,0.17,0.51")
        body = json.loads(out)
        assert body["procedure"] == CHAIN_3
        assert body["expected_length"] == pytest.approx(1.889133, abs=1e-9)

    def test_exact_fractions(self, capsys):
        code, out, _ = run_cli(
            capsys, "--json", "optimal", "--priors", "1/100,17/100,51/100", "--exact"
        )
        assert json.loads(out)["expected_length_exact"] == "1889133/1000000"

    def test_tree_out(self, capsys, tmp_path):
        path = tmp_path / "tree.txt"
        run_cli(capsys, "optimal", "--priors", "0.1,0.2", "--tree-out", str(path))
        assert path.read_text().strip() == "P{1,2}[L(00),P{1}[L(01),P{2}[L(10),L(11)]]]"


class TestGreedy:
    def test_hard_point(self, capsys):
        code, out, _ = run_cli(capsys, "--json", "greedy", "--priors", "0.01,0.17,0.51")
        body = json.loads(out)
        assert body["procedure"] == GREEDY_3
        assert body["expected_length"] == pytest.approx(1.9616, abs=1e-9)


class TestZonesAndSlice:
    def test_compute_save_slice(self, capsys, tmp_path):
        zm_path = tmp_path / "zm3.json"
        code, out, _ = run_cli(
            capsys, "--json", "zones", "--n", "3", "--res", "32", "--out", str(zm_path)
        )
        assert code == 0
        assert json.loads(out)["zone_count"] == 52

        csv_path = tmp_path / "slice.csv"
        code, out, _ = run_cli(
            capsys,
            "--json",
            "slice",
            "--zonemap",
            str(zm_path),
            "--plane",
            "z=0.17",
            "--res",
            "24",
            "--out",
            str(csv_path),
        )
        assert code == 0
        body = json.loads(out)
        assert len(body["distinct_ids"]) > 3
        rows = csv_path.read_text().strip().splitlines()
        assert len(rows) == 24 and len(rows[0].split(",")) == 24


class TestSimulate:
    def test_fixed_priors(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "--json",
            "simulate",
            "--priors",
            "0.1,0.2",
            "--strategy",
            "optimal",
            "--trials",
            "4000",
            "--seed",
            "5",
        )
        body = json.loads(out)
        assert body["trials"] == 4000
        assert 1.0 <= body["mean_tests"] <= 2.0

    def test_uniform_priors(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "--json",
            "simulate",
            "--uniform-priors",
            "--n",
            "3",
            "--strategy",
            "naive",
            "--trials",
            "50",
            "--seed",
            "2",
        )
        assert json.loads(out)["mean_tests"] == 3.0

    def test_missing_priors_is_an_error(self, capsys):
        code, _, err = run_cli(capsys, "simulate", "--strategy", "naive")
        assert code == 1
        assert "priors" in err


class TestInteractiveSession:
    def test_negative_run(self):
        proc = subprocess.run(
            [sys.executable, "-m", "pooltest.cli", "session", "--priors", "0.01,0.17,0.51"],
            input="-\n",
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert "test pool {1,2,3}" in proc.stdout
        assert "complete after 1 tests" in proc.stdout
        assert "outcome 000" in proc.stdout

    def test_positive_then_negative(self):
        proc = subprocess.run(
            [sys.executable, "-m", "pooltest.cli", "session", "--priors", "0.1,0.2"],
            input="+\n-\n",
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert "complete after 2 tests" in proc.stdout
        assert "infected samples: [2]" in proc.stdout
