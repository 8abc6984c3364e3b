"""Command-line interface."""

import csv
import io
import json

import pytest

from aigc_incentive import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


class TestCommands:
    def test_complete_single_seed(self, tmp_path, capsys):
        code, out, _ = run(["complete", "--config", "mnist_vd", "--seed", "7",
                            "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK
        rows = read_csv(tmp_path / "complete.csv")
        assert len(rows) == 1 and rows[0]["seed"] == "7"
        assert int(rows[0]["T_o"]) >= 1 and "T_o=" in out

    def test_incomplete_reports_both_modes(self, tmp_path, capsys):
        code, _, _ = run(["incomplete", "--config", "mnist_vd", "--seed", "0",
                          "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK
        row = read_csv(tmp_path / "incomplete.csv")[0]
        for key in ("realized_cost", "mc_cost_mean", "mc_cost_se",
                    "expected_cost_paper-literal", "expected_cost_conditional"):
            assert float(row[key]) > 0
        # the conditional normalisation tracks the sampled cost
        mc, se = float(row["mc_cost_mean"]), float(row["mc_cost_se"])
        assert abs(float(row["expected_cost_conditional"]) - mc) < 5 * se + 1e-6 * mc

    def test_json_format(self, tmp_path, capsys):
        code, _, _ = run(["complete", "--config", "mnist_vd", "--seed", "1", "--format", "json",
                          "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK
        records = json.loads((tmp_path / "complete.json").read_text())
        assert records[0]["seed"] == 1

    def test_flsim(self, tmp_path, capsys):
        code, out, _ = run(["flsim", "--config", "quad_small", "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK and out.startswith("PASS")
        rows = read_csv(tmp_path / "trace.csv")
        assert len(rows) == 51
        assert all(float(r["margin"]) >= -1e-9 for r in rows)

    def test_benchmark(self, tmp_path, capsys):
        code, _, _ = run(["benchmark", "--config", "vc_ud", "--seed", "0",
                          "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK
        rows = read_csv(tmp_path / "benchmark.csv")
        assert sorted(r["mechanism"] for r in rows) == ["IMFL", "NAIGC", "NDQ"]
        assert (tmp_path / "benchmark_summary.json").exists()

    def test_sweep(self, tmp_path, capsys):
        code, _, _ = run(["sweep", "--config", "mnist_vd", "--seed", "0", "--var", "K",
                          "--values", "10,20", "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK
        rows = read_csv(tmp_path / "sweep.csv")
        assert [r["K"] for r in rows] == ["10", "20"]

    def test_montecarlo(self, tmp_path, capsys):
        code, _, _ = run(["montecarlo", "--config", "mnist_vd", "--seed", "0", "--trials", "4000",
                          "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_OK
        rows = read_csv(tmp_path / "montecarlo.csv")
        assert len(rows) == 8
        for r in rows:
            # an empty cohort is too rare to be sampled once p is large
            rare = 100.0 * (1.0 - float(r["p"])) ** 10
            assert float(r["abs_diff"]) < 5 * float(r["mc_std_error"]) + rare + 1e-9

    def test_rerun_is_byte_identical(self, tmp_path, capsys):
        for sub in ("a", "b"):
            assert run(["incomplete", "--config", "mnist_vd", "--seed", "2",
                        "--out", str(tmp_path / sub)], capsys)[0] == cli.EXIT_OK
        assert (tmp_path / "a" / "incomplete.csv").read_bytes() == \
            (tmp_path / "b" / "incomplete.csv").read_bytes()


class TestErrors:
    def test_bad_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        doc = json.loads((cli.Path(__file__).parents[1] / "src" / "aigc_incentive" / "presets"
                          / "mnist_vd.json").read_text())
        doc["learning"]["eta"] = 0.5
        path.write_text(json.dumps(doc))
        code, _, err = run(["complete", "--config", str(path), "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_CONFIG
        payload = json.loads(err)
        assert payload["error"] == "config" and payload["problems"]

    def test_missing_config_flag(self, tmp_path, capsys):
        code, _, err = run(["complete", "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_CONFIG and "--config" in json.loads(err)["message"]

    def test_sweep_without_values(self, tmp_path, capsys):
        code, _, err = run(["sweep", "--config", "quad_small", "--out", str(tmp_path)], capsys)
        assert code == cli.EXIT_CONFIG and json.loads(err)["error"] == "config"

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            cli.main(["nonsense"])
