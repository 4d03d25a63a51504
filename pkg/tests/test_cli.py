import hashlib
import json
import subprocess
import sys

import pytest

from nutriclass import pipeline
from nutriclass.cli import main
from nutriclass.errors import DomainError, ReportVersionError
from nutriclass.schema import parse_survey_csv, preprocess

FAST = ["--synthetic-n", "1200", "--n-trees", "5", "--epochs", "3", "--mlp-hidden", "8"]


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_generate_is_reproducible(tmp_path, capsys):
    assert main(["generate", "--n", "1000", "--seed", "0", "--out", str(tmp_path / "a.csv")]) == 0
    assert main(["generate", "--n", "1000", "--seed", "0", "--out", str(tmp_path / "b.csv")]) == 0
    assert _sha(tmp_path / "a.csv") == _sha(tmp_path / "b.csv")
    out = capsys.readouterr().out
    assert "wrote 1000 rows" in out and "target mean" in out
    data = preprocess(parse_survey_csv(tmp_path / "a.csv"))
    assert len(data) == 1000 and data.provenance["rows_dropped"] == 0


def test_generate_zero_rows_is_usage_error(tmp_path):
    assert main(["generate", "--n", "0", "--out", str(tmp_path / "x.csv")]) == 2
    assert not (tmp_path / "x.csv").exists()


def test_bad_flags_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code == 2
    assert main(["run", "--out", str(tmp_path / "o"), "--models", "dt,knn"]) == 2
    assert main(["run", "--out", str(tmp_path / "o"), "--test-fraction", "1.5"]) == 2
    assert not (tmp_path / "o").exists()


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "all"
    assert main(["run", "--out", str(out)] + FAST) == 0
    return out


def test_run_writes_all_artifacts(small_run):
    names = {p.name for p in small_run.iterdir()}
    expected = {"report.json", "correlation.csv", "correlation.txt", "pca_variance.csv",
                "pca_scatter.csv", "rf_oob_curve.csv", "rf_importances.csv", "mlp_history.csv",
                "mlp_model.bin"}
    expected |= {f"confusion_{m}.csv" for m in pipeline.MODELS}
    expected |= {f"metrics_{m}.csv" for m in pipeline.MODELS}
    assert names == expected
    rep = json.loads((small_run / "report.json").read_text())
    assert set(rep["models"]) == set(pipeline.MODELS)
    for m in rep["models"].values():
        assert len(m["confusion"]) == 4 and sum(map(sum, m["confusion"])) == rep["provenance"]["rows_test"]
        assert set(m["metrics"]["per_class"]) == {"1", "2", "3", "4"}


def test_report_provenance_and_topology(small_run):
    rep = json.loads((small_run / "report.json").read_text())
    prov = rep["provenance"]
    assert prov["rows_dropped"] + prov["rows_analyzed"] == prov["rows_parsed"]
    assert prov["rows_train"] + prov["rows_test"] == prov["rows_analyzed"]
    widths = {name: m["stats"]["input_width"] for name, m in rep["models"].items()}
    assert widths["dt"] == rep["pca"]["k"] < 20
    assert widths["rf"] == widths["svm"] == widths["mlp"] == 20
    assert rep["report_version"] == pipeline.REPORT_VERSION
    assert len(prov["config_hash"]) == 64


def test_single_model_run(tmp_path):
    out = tmp_path / "rf"
    assert main(["run", "--out", str(out), "--models", "rf"] + FAST) == 0
    rep = json.loads((out / "report.json").read_text())
    assert list(rep["models"]) == ["rf"]
    assert "pca" not in rep
    assert not (out / "mlp_model.bin").exists()


def test_run_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = FAST + ["--models", "dt,rf,mlp"]
    assert main(["run", "--out", str(a)] + args) == 0
    assert main(["run", "--out", str(b)] + args) == 0
    for p in a.iterdir():
        assert _sha(p) == _sha(b / p.name), p.name


def test_seed_changes_the_report(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--out", str(a), "--models", "dt"] + FAST) == 0
    assert main(["run", "--out", str(b), "--models", "dt", "--seed", "8"] + FAST) == 0
    assert _sha(a / "report.json") != _sha(b / "report.json")


def test_config_file_and_override(tmp_path):
    cfg = {"input": {"synthetic": {"n": 900, "seed": 1, "spec": None}}, "models": ["dt"],
           "pca": {"variance_target": 0.8}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert main(["run", "--config", str(path), "--out", str(out), "--pca-target", "0.9"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["pca"]["variance_target"] == 0.9
    assert rep["provenance"]["rows_parsed"] == 900
    path.write_text(json.dumps({"bogus": 1}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "p")]) == 2


def test_csv_input_and_exclude_zscores(tmp_path):
    csv_path = tmp_path / "d.csv"
    assert main(["generate", "--n", "800", "--seed", "2", "--out", str(csv_path)]) == 0
    out = tmp_path / "o"
    assert main(["run", "--input", str(csv_path), "--out", str(out), "--models", "rf",
                 "--n-trees", "3", "--exclude-zscores"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["models"]["rf"]["stats"]["input_width"] == 16
    assert rep["provenance"]["source"] == str(csv_path)


def test_missing_input_is_runtime_error(tmp_path):
    assert main(["run", "--input", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")]) == 1
    assert not (tmp_path / "o").exists()
    assert not list(tmp_path.glob(".o.partial-*"))


def test_failure_leaves_no_partial_output(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise ArithmeticError("injected")

    monkeypatch.setattr(pipeline.mlp, "write_history", boom)
    out = tmp_path / "o"
    assert main(["run", "--out", str(out), "--models", "mlp"] + FAST) == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_refuses_to_replace_unrelated_directory(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / "keep.txt").write_text("x")
    assert main(["run", "--out", str(out), "--models", "dt"] + FAST) == 1
    assert (out / "keep.txt").read_text() == "x"


def test_rerun_replaces_previous_run(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--out", str(out), "--models", "dt"] + FAST) == 0
    assert main(["run", "--out", str(out), "--models", "rf"] + FAST) == 0
    assert not (out / "confusion_dt.csv").exists()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["o"]


def test_compare(tmp_path, capsys, small_run):
    rf = tmp_path / "rf"
    assert main(["run", "--out", str(rf), "--models", "rf"] + FAST) == 0
    table = pipeline.compare_reports([small_run / "report.json", rf / "report.json"], ["all", "rf"])
    assert len(table.rows) == 5
    src = json.loads((small_run / "report.json").read_text())
    row = table.rows[0]
    assert row[2]["accuracy"] == src["models"]["dt"]["metrics"]["accuracy"]
    assert row[2]["f1"] == src["models"]["dt"]["metrics"]["macro"]["f1"]
    capsys.readouterr()
    assert main(["compare", str(small_run / "report.json"), str(rf / "report.json"),
                 "--out", str(tmp_path / "cmp.csv")]) == 0
    assert "*" in capsys.readouterr().out
    assert (tmp_path / "cmp.csv").read_text().startswith("run,model,accuracy")


def test_compare_self_first_wins(small_run):
    p = small_run / "report.json"
    table = pipeline.compare_reports([p, p])
    n = len(table.rows) // 2
    for c in table.columns:
        assert table.best[c] < n
    for i in range(n):
        assert table.rows[i][2] == table.rows[i + n][2]


def test_compare_two_single_model_reports(tmp_path):
    a, b = tmp_path / "dt", tmp_path / "rf"
    assert main(["run", "--out", str(a), "--models", "dt"] + FAST) == 0
    assert main(["run", "--out", str(b), "--models", "rf"] + FAST) == 0
    table = pipeline.compare_reports([a / "report.json", b / "report.json"])
    assert [r[1] for r in table.rows] == ["Decision tree (PCA)", "Random forest"]


def test_compare_version_mismatch(tmp_path, small_run):
    rep = json.loads((small_run / "report.json").read_text())
    rep["report_version"] = 999
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(rep))
    with pytest.raises(ReportVersionError):
        pipeline.compare_reports([small_run / "report.json", bad])
    assert main(["compare", str(small_run / "report.json"), str(bad)]) == 2
    assert main(["compare", str(small_run / "report.json")]) == 2


def test_config_validation():
    with pytest.raises(DomainError):
        pipeline.RunConfig.from_dict({"input": {"csv": "a.csv", "synthetic": {"n": 5, "seed": 1}}})
    with pytest.raises(DomainError):
        pipeline.RunConfig.from_dict({"models": []})
    with pytest.raises(DomainError):
        pipeline.RunConfig.from_dict({"staging": {"cutoffs": [-3, -2, -1]}})
    a = pipeline.RunConfig.from_dict({}, out_dir="x")
    b = pipeline.RunConfig.from_dict({}, out_dir="y")
    assert a.digest() == b.digest()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "nutriclass", "generate", "--n", "0",
                          "--out", str(tmp_path / "z.csv")], capture_output=True, text=True)
    assert res.returncode == 2 and "error" in res.stderr
