import csv
import json

import pytest

from rndcache import cli, config
from rndcache.errors import ConfigError, PrecisionError


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    comments = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return comments, rows[0], rows[1:]


def test_prefactor_table(tmp_path):
    out = tmp_path / "p.csv"
    assert cli.main(["analyze", "--preset", "fig-prefactors", "--out", str(out)]) == 0
    comments, header, rows = read_csv(out)
    assert header == ["alpha", "rho", "lambda"]
    assert len(rows) == 80 and rows[0][0] == "1.05" and rows[-1][0] == "5.0"
    assert comments[0].startswith("# config_sha256=") and "seed=1" in comments[0]


def test_single_analyze_marks_missing_cells(tmp_path):
    out = tmp_path / "s.csv"
    code = cli.main(["analyze", "--preset", "fig-single", "--alpha", "1.7", "--catalog", "20000",
                     "--sizes", "25", "--out", str(out)])
    assert code == 0
    _, header, rows = read_csv(out)
    by_policy = {r[header.index("policy")]: r for r in rows}
    assert float(by_policy["RND"][header.index("analytic_exact")]) == pytest.approx(0.14713, abs=1e-5)
    assert by_policy["LRU"][header.index("analytic_exact")] == "NA"
    assert by_policy["RND"][header.index("sim_mean")] == "NA"


def test_compare_is_reproducible(tmp_path):
    args = ["compare", "--preset", "fig-tandem", "--policies", "RND-RND", "--reps", "2",
            "--measure", "20000", "--warmup", "1000", "--jobs", "1", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    _, header, rows = read_csv(a)
    for col in ("analytic_local", "analytic_global", "sim_local_mean", "sim_local_stderr"):
        assert col in header
    assert len(rows) == 2 * 100


def test_sweep_table(tmp_path):
    out = tmp_path / "sw.csv"
    code = cli.main(["sweep", "--preset", "fig-tandem", "--policies", "RND-RND", "--sizes",
                     "10,20", "--reps", "0", "--out", str(out)])
    assert code == 0
    _, header, rows = read_csv(out)
    assert [r[header.index("C")] for r in rows] == ["10", "10", "20", "20"]
    assert all(r[header.index("analytic_formula")] != "NA" for r in rows)


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(tmp_path))
    assert cli.main(["analyze", "--preset", "fig-prefactors"]) == 0
    assert (tmp_path / "analyze-fig-prefactors.csv").exists()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("preset: fig-single\ndistribution:\n  alpha: [2.0]\n  catalog: [inf]\n"
                   "grid:\n  sizes: [10]\n")
    out = tmp_path / "o.csv"
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    rnd = [r for r in rows if r[2] == "RND"][0]
    assert float(rnd[header.index("analytic_exact")]) == pytest.approx(3 / 23)
    assert cli.main(["analyze", "--config", str(cfg), "--sizes", "1", "--out", str(out)]) == 0
    _, header, rows = read_csv(out)
    assert float(rows[0][header.index("analytic_exact")]) == pytest.approx(0.6)


def test_unknown_preset_lists_valid_names():
    with pytest.raises(ConfigError, match="fig-mixed"):
        config.preset("fig-nothing")


def test_config_error_exit_code(capsys):
    assert cli.main(["analyze", "--alpha", "0.8"]) == 2
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["exit_code"] == 2 and record["field"] == "distribution.alpha"


def test_bad_yaml_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("run: [unclosed\n")
    assert cli.main(["analyze", "--config", str(bad)]) == 2


def test_mixed_three_level_rejected():
    assert cli.main(["analyze", "--preset", "fig-tandem", "--sizes", "5,5,5",
                     "--policies", "RND-LRU-RND", "--out", "-"]) == 2


def test_precision_failure_exit_code(monkeypatch, capsys, tmp_path):
    def boom(*args, **kwargs):
        raise PrecisionError("lost digits", C=17)

    monkeypatch.setattr(cli.single, "miss_rate_exact", boom)
    code = cli.main(["analyze", "--sizes", "17", "--out", str(tmp_path / "x.csv")])
    assert code == 3
    record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["C"] == 17 and "C=17" in record["context"]


def test_verify_passes():
    assert cli.main(["verify", "--out", "-"]) == 0


def test_verify_threshold_exit_code(monkeypatch):
    monkeypatch.setattr(cli, "verification_checks", lambda: [("broken", 1.0, 1e-9)])
    assert cli.main(["verify", "--out", "-"]) == 4


def test_flag_parsers():
    assert config.parse_int_list("1:3,7,10:20:5", "x") == [1, 2, 3, 7, 10, 15, 20]
    assert config.parse_catalogs("2000,inf") == [2000, "inf"]
    with pytest.raises(ConfigError):
        config.parse_int_list("a:b", "x")
