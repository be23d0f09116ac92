import math
import subprocess
import sys
import time

import numpy as np
import pytest

from tamatch import bench
from tamatch.bench import ResultRow, SweepSpec
from tamatch.cli import main
from tamatch.core import InvalidInput

SMALL = dict(n=200, seeds=[0, 1], alphas=[0.0, 0.5], record_wall_time=False)


@pytest.fixture(scope="module")
def small_rows():
    return bench.run_sweep(SweepSpec.from_dict(SMALL), workers=1)


def write_toml(path, **items):
    spec = SweepSpec.from_dict(items)
    path.write_text(spec.to_toml())
    return path


class TestSweep:
    def test_one_cell_per_kind(self):
        rows = bench.run_sweep(SweepSpec(n=200, seeds=(3,), alphas=(0.2,), variants=("Ranking",)))
        assert [(r.kind, r.variant) for r in rows] == [("add", "Ranking"), ("replace", "Ranking")]
        assert rows[0].test_verdict == "baseline" and rows[0].wall_time_ms > 0

    def test_grid_shape_and_order(self, small_rows):
        assert len(small_rows) == 2 * 2 * 2 * len(bench.VARIANTS)
        keys = [(r.kind, r.alpha, r.seed) for r in small_rows]
        assert keys == sorted(keys, key=lambda k: (["add", "replace"].index(k[0]), k[1], k[2]))
        assert all(not r.test_verdict.startswith("error") for r in small_rows)

    def test_variants_share_each_cell(self, small_rows):
        by_key = {}
        for r in small_rows:
            by_key.setdefault(r.key, set()).add(r.n_star)
        assert all(len(s) == 1 for s in by_key.values())

    def test_workers_do_not_change_results(self, small_rows):
        parallel = bench.run_sweep(SweepSpec.from_dict(SMALL), workers=2)
        assert bench.rows_to_csv(parallel) == bench.rows_to_csv(small_rows)

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv(bench.WORKERS_ENV, "3")
        assert bench.worker_count() == 3
        monkeypatch.setenv(bench.WORKERS_ENV, "many")
        with pytest.raises(InvalidInput):
            bench.worker_count()
        monkeypatch.delenv(bench.WORKERS_ENV)
        assert bench.worker_count() == 1


class TestCsv:
    def test_empty(self):
        assert bench.rows_to_csv([]) == ",".join(bench.CSV_HEADER) + "\n"
        assert bench.parse_csv(bench.rows_to_csv([])) == []

    def test_single_row(self):
        text = bench.rows_to_csv([ResultRow("Greedy", "add", 0.1, 0, 7, 9, "baseline")])
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[1] == "Greedy,add,0.1,0,7,9,0.777778,baseline,nan,0,0.000"

    def test_round_trip(self, small_rows):
        text = bench.rows_to_csv(small_rows)
        back = bench.parse_csv(text)
        assert len(back) == len(small_rows)
        for a, b in zip(small_rows, back):
            for f in ("variant", "kind", "alpha", "seed", "m", "n_star", "test_verdict", "k_consumed", "wall_time_ms"):
                assert getattr(a, f) == getattr(b, f)
            assert a.ratio == b.ratio
            assert (math.isnan(a.l1_hat) and math.isnan(b.l1_hat)) or a.l1_hat == b.l1_hat
        assert bench.rows_to_csv(back) == text

    def test_byte_reproducible(self, small_rows, tmp_path):
        again = bench.run_sweep(SweepSpec.from_dict(SMALL))
        bench.emit_csv(small_rows, tmp_path / "a.csv")
        bench.emit_csv(again, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    @pytest.mark.parametrize("text", [
        "",
        "variant,kind\n",
        ",".join(bench.CSV_HEADER) + "\nGreedy,add,0.1,0,7,9\n",
        ",".join(bench.CSV_HEADER) + "\nGreedy,add,0.1,0,7,9,0.5,baseline,nan,0,0.000\n",
        ",".join(bench.CSV_HEADER) + "\nGreedy,add,x,0,7,9,0.777778,baseline,nan,0,0.000\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(InvalidInput):
            bench.parse_csv(text)


class TestConfig:
    def test_defaults(self):
        spec = SweepSpec()
        assert spec.n == 2000 and spec.seeds == tuple(range(10)) and len(spec.alphas) == 11
        assert spec.kinds == ("add", "replace") and spec.epsilon is None

    def test_toml_round_trip(self, tmp_path):
        spec = SweepSpec(n=100, seeds=(4, 5), epsilon=0.3, record_wall_time=False)
        path = tmp_path / "c.toml"
        path.write_text(spec.to_toml())
        assert SweepSpec.from_toml(path) == spec
        path.write_text(SweepSpec().to_toml())
        assert SweepSpec.from_toml(path) == SweepSpec()

    @pytest.mark.parametrize("data", [
        {"n": 7},
        {"n": 2000.0},
        {"seeds": 3},
        {"seeds": []},
        {"alphas": [1.5]},
        {"kinds": ["swap"]},
        {"variants": ["Oracle"]},
        {"variants": ["Greedy", "Greedy"]},
        {"epsilon": "big"},
        {"delta": 0},
        {"record_wall_time": 1},
        {"colour": "red"},
    ])
    def test_rejects(self, data):
        with pytest.raises(InvalidInput):
            SweepSpec.from_dict(data)

    def test_bad_toml_syntax(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("n = = 3\n")
        with pytest.raises(InvalidInput):
            SweepSpec.from_toml(path)


class TestPlot:
    def test_deterministic_and_summary(self, small_rows, tmp_path):
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        bench.plot(small_rows, "replace", a)
        bench.plot(small_rows, "replace", b)
        assert a.read_bytes() == b.read_bytes()
        summary = bench.read_plot_summary(a)
        assert summary["missing"] == []
        for v in bench.VARIANTS:
            for alpha in (0.0, 0.5):
                xs = [r.ratio for r in small_rows if r.variant == v and r.kind == "replace" and r.alpha == alpha]
                mean, std, count = summary["series"][v][repr(alpha)]
                assert count == 2
                assert abs(mean - np.mean(xs)) < 1e-9 and abs(std - np.std(xs, ddof=1)) < 1e-9

    def test_missing_variant_warns(self, small_rows, tmp_path):
        rows = [r for r in small_rows if r.variant != "Greedy"]
        with pytest.warns(UserWarning):
            summary = bench.plot(rows, "add", tmp_path / "p.svg", variants=list(bench.VARIANTS))
        assert summary["missing"] == ["Greedy"]
        assert "no data for Greedy" in (tmp_path / "p.svg").read_text()

    def test_no_rows_for_kind(self, small_rows, tmp_path):
        with pytest.raises(InvalidInput):
            bench.plot([r for r in small_rows if r.kind == "add"], "replace", tmp_path / "x.svg")


class TestCli:
    def test_exit_codes(self, capsys):
        assert main(["--help"]) == 0
        assert main(["frobnicate"]) == 1
        assert main(["run", "--n", "oops"]) == 1
        assert main(["run", "--n", "7"]) == 2
        assert main(["plot", "/nonexistent/x.csv"]) == 2

    def test_run_is_deterministic(self, capsys):
        args = ["run", "--n", "200", "--seed", "2", "--alpha", "0.3", "--kind", "replace"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first
        assert first.startswith("variant=TaM-all n=200 seed=2 ")

    def test_generate_then_run(self, tmp_path, capsys):
        assert main(["generate", "--n", "100", "--seed", "1", "--alpha", "0.2", "--out-dir", str(tmp_path)]) == 0
        capsys.readouterr()
        files = ["--instance", str(tmp_path / "instance.txt"), "--advice", str(tmp_path / "advice.txt")]
        assert main(["run", "--seed", "1", *files]) == 0
        from_files = capsys.readouterr().out
        assert main(["run", "--n", "100", "--seed", "1", "--alpha", "0.2"]) == 0
        assert capsys.readouterr().out == from_files

    def test_print_config(self, tmp_path, capsys):
        cfg = write_toml(tmp_path / "c.toml", n=100, seeds=[1])
        assert main(["sweep", "--config", str(cfg), "--print-config"]) == 0
        out = capsys.readouterr().out
        assert "n = 100" in out and "seeds = [1]" in out and 'epsilon = "auto"' in out

    def test_sweep_plot_pipeline(self, tmp_path, capsys):
        cfg = write_toml(tmp_path / "c.toml", n=100, seeds=[0], alphas=[0.0, 1.0], variants=["Ranking", "TaM-all"])
        out = tmp_path / "res.csv"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        assert len(bench.read_csv(out)) == 2 * 2 * 2
        assert main(["plot", str(out)]) == 0
        assert (tmp_path / "res_add.svg").exists() and (tmp_path / "res_replace.svg").exists()

    def test_bad_config_exit(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("alphas = [2.0]\n")
        assert main(["sweep", "--config", str(cfg)]) == 2

    def test_selftest(self, capsys):
        assert main(["selftest", "--trials", "20"]) == 0
        assert capsys.readouterr().out.count("PASS") == 6

    def test_demo_subprocess(self):
        start = time.perf_counter()
        proc = subprocess.run([sys.executable, "-m", "tamatch.cli", "demo-hardness"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert proc.stdout.splitlines() == ["correct advice: ratio 1.000", "wrong advice:   ratio 0.500"]
        assert time.perf_counter() - start < 10
