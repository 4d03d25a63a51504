"""End-to-end run: ingest, stage, split, fit the four classifiers, evaluate, correlate.

The run writes one JSON report plus CSV sidecars into an output directory.
Everything is derived from the config and its seed, so two runs with the
same config produce byte-identical files.
"""
import copy
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import correlation, metrics, mlp, pca, svm, trees
from .errors import DomainError, ReportVersionError
from .numeric import Rng
from .schema import (CLASS_NAMES, StagingPolicy, default_schema, parse_survey_csv,
                     preprocess, split_train_test)
from .synthetic import GeneratorSpec, generate_synthetic

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
REPORT_NAME = "report.json"
MODELS = ("dt", "rf", "svm", "mlp")
MODEL_TITLES = {"dt": "Decision tree (PCA)", "rf": "Random forest", "svm": "SVM (RBF)", "mlp": "MLP"}

DEFAULTS = {
    "input": {"csv": None, "synthetic": {"n": 21858, "seed": 7, "spec": None}},
    "seed": 7,
    "staging": {"aggregate": "min", "cutoffs": [-1.0, -2.0, -3.0]},
    "test_fraction": 0.2,
    "include_zscores": True,
    "models": list(MODELS),
    "pca": {"variance_target": 0.95},
    "tree": {"max_depth": None, "min_samples_split": 2},
    "forest": {"n_trees": 100, "feature_subset_size": None, "max_depth": None},
    "svm": {"sigma": None, "c": 1.0, "tolerance": 1e-3, "max_passes": 50, "cache_rows": 2000},
    "mlp": {"hidden": [100, 40, 20], "epochs": 100, "batch_size": 32, "learning_rate": 1e-3},
    "correlation": {"scope": "full", "filter": "all"},
    "ci_method": "wald",
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if key not in out:
            raise DomainError(f"unknown config key {key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict) and key != "input":
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    settings: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    out_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, d, out_dir=None):
        d = dict(d)
        out_dir = d.pop("out_dir", out_dir)
        cfg = cls(_merge(DEFAULTS, d), out_dir)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, out_dir=None):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), out_dir)

    def __getitem__(self, key):
        return self.settings[key]

    def validate(self):
        s = self.settings
        src = s["input"]
        if (src.get("csv") is None) == (src.get("synthetic") is None):
            raise DomainError("config needs exactly one input source: csv or synthetic")
        if src.get("synthetic") is not None:
            syn = src["synthetic"]
            if int(syn.get("n", 0)) < 1:
                raise DomainError("synthetic row count must be >= 1")
        if not 0.0 < float(s["test_fraction"]) < 1.0:
            raise DomainError("test_fraction must lie in (0, 1)")
        bad = [m for m in s["models"] if m not in MODELS]
        if bad or not s["models"]:
            raise DomainError(f"models must be a nonempty subset of {MODELS}, got {s['models']}")
        if len(set(s["models"])) != len(s["models"]):
            raise DomainError("models listed more than once")
        StagingPolicy(s["staging"]["aggregate"], tuple(float(c) for c in s["staging"]["cutoffs"]))
        if not 0.0 < float(s["pca"]["variance_target"]) <= 1.0:
            raise DomainError("pca variance_target must lie in (0, 1]")
        if int(s["forest"]["n_trees"]) < 1:
            raise DomainError("forest needs n_trees >= 1")
        if int(s["mlp"]["epochs"]) < 1 or int(s["mlp"]["batch_size"]) < 1:
            raise DomainError("mlp epochs and batch_size must be >= 1")
        if s["correlation"]["scope"] not in ("full", "train"):
            raise DomainError("correlation scope must be 'full' or 'train'")
        if s["ci_method"] not in ("wald", "wilson"):
            raise DomainError("ci_method must be 'wald' or 'wilson'")

    def canonical(self):
        """The settings as canonical JSON text (output directory excluded)."""
        return json.dumps(self.settings, sort_keys=True, separators=(",", ":"))

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


# --------------------------------------------------------------------------
# helpers

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, sort_keys=True, indent=1, allow_nan=False)
        fh.write("\n")


def load_dataset(cfg):
    src = cfg["input"]
    if src.get("csv") is not None:
        return parse_survey_csv(src["csv"])
    syn = src["synthetic"]
    spec = syn.get("spec")
    if isinstance(spec, str):
        spec = GeneratorSpec.from_file(spec)
    elif isinstance(spec, dict):
        spec = GeneratorSpec.from_dict(spec)
    return generate_synthetic(spec, n=int(syn["n"]), seed=int(syn["seed"]))


def _evaluate(true, pred, ci_method):
    cm = metrics.confusion(true, pred)
    return cm, metrics.metric_bundle(cm, ci_method)


# --------------------------------------------------------------------------
# model stages; each returns (predictions, stats, sidecar writers)

def _run_dt(cfg, train, test, rng, pca_model):
    t = cfg["tree"]
    z_train = pca.pca_transform(pca_model, train.matrix)
    z_test = pca.pca_transform(pca_model, test.matrix)
    tree = trees.fit_tree(z_train, trees.TreeParams(t["max_depth"], int(t["min_samples_split"])),
                          labels=train.labels)
    stats = dict(tree.stats(), input_width=int(z_train.shape[1]))
    return trees.predict_tree(tree, z_test), stats, {}


def _run_rf(cfg, train, test, rng, pca_model):
    f = cfg["forest"]
    params = trees.ForestParams(int(f["n_trees"]), f["feature_subset_size"],
                                trees.TreeParams(f["max_depth"]))
    forest = trees.fit_forest(train, params, rng)
    stats = dict(forest.stats(), input_width=train.n_features,
                 oob_curve_tail=[list(p) for p in forest.oob_curve[-10:]],
                 importances=dict(zip(train.feature_names, forest.importances.tolist())))

    def write_curve(path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_trees", "oob_error"])
            for n, e in forest.oob_curve:
                w.writerow([n, repr(e)])

    def write_importances(path):
        order = np.argsort(-forest.importances, kind="stable")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "importance"])
            for j in order:
                w.writerow([train.feature_names[j], repr(float(forest.importances[j]))])

    sidecars = {"rf_oob_curve.csv": write_curve, "rf_importances.csv": write_importances}
    return trees.predict_forest(forest, test.matrix), stats, sidecars


def _run_svm(cfg, train, test, rng, pca_model):
    s = cfg["svm"]
    sigma = s["sigma"] if s["sigma"] is not None else svm.default_sigma(train.n_features)
    model = svm.fit_multiclass(
        train, svm.RbfParams(float(sigma), float(s["c"])),
        svm.SolverParams(float(s["tolerance"]), int(s["max_passes"]), int(s["cache_rows"])))
    stats = dict(model.stats(), input_width=train.n_features)
    return svm.predict_svm(model, test.matrix), stats, {}


def _run_mlp(cfg, train, test, rng, pca_model):
    m = cfg["mlp"]
    arch = mlp.MlpArchitecture((train.n_features,) + tuple(int(w) for w in m["hidden"]) + (4,))
    model = mlp.train(train, test, arch, mlp.AdamConfig(learning_rate=float(m["learning_rate"])),
                      epochs=int(m["epochs"]), batch_size=int(m["batch_size"]), rng=rng)
    last = model.history[-1]
    stats = {"input_width": train.n_features, "widths": list(arch.widths),
             "layer_params": arch.layer_params(), "total_params": arch.n_params,
             "final": last, "epochs": len(model.history)}
    sidecars = {"mlp_history.csv": lambda p: mlp.write_history(model, p),
                "mlp_model.bin": lambda p: mlp.save_model(model, p)}
    return mlp.predict_mlp(model, test.matrix), stats, sidecars


STAGES = {"dt": _run_dt, "rf": _run_rf, "svm": _run_svm, "mlp": _run_mlp}


# --------------------------------------------------------------------------
# run

@dataclass
class RunResult:
    report: dict
    sidecars: dict  # filename -> callable(path)


def run_pipeline(cfg):
    """Execute the configured run in memory; nothing is written yet."""
    cfg.validate()
    master = Rng(int(cfg["seed"]))
    records = load_dataset(cfg)
    st = cfg["staging"]
    staging = StagingPolicy(st["aggregate"], tuple(float(c) for c in st["cutoffs"]))
    data = preprocess(records, default_schema(), staging, bool(cfg["include_zscores"]))
    train, test = split_train_test(data, float(cfg["test_fraction"]), master.fork("split").seed)
    logger.info("rows: %d parsed, %d dropped, %d train, %d test",
                data.provenance["rows_in"], data.provenance["rows_dropped"], len(train), len(test))

    sidecars = {}
    report = {
        "report_version": REPORT_VERSION,
        "config": json.loads(cfg.canonical()),
        "provenance": {
            "config_hash": cfg.digest(),
            "seed": int(cfg["seed"]),
            "source": data.provenance["source"],
            "rows_parsed": data.provenance["rows_in"],
            "rows_dropped": data.provenance["rows_dropped"],
            "rows_analyzed": data.provenance["rows_out"],
            "parse_warnings": data.provenance["parse_warnings"],
            "rows_train": len(train),
            "rows_test": len(test),
            "features": list(data.feature_names),
            "class_counts": {str(c): int(np.sum(data.labels == c)) for c in CLASS_NAMES},
        },
        "models": {},
    }

    pca_model = None
    if "dt" in cfg["models"]:
        pca_model = pca.pca_fit(train.matrix, float(cfg["pca"]["variance_target"]))
        report["pca"] = {"k": pca_model.k, "variance_target": float(cfg["pca"]["variance_target"]),
                         "cumulative_shares": pca_model.variance_shares.tolist(),
                         "eigenvalues": pca_model.all_eigenvalues.tolist()}
        scores = pca.pca_transform(pca_model, train.matrix)
        sidecars["pca_variance.csv"] = lambda p: pca.write_variance_curve(pca_model, p)
        sidecars["pca_scatter.csv"] = lambda p: pca.write_component_scatter(scores, p, labels=train.labels)

    for name in MODELS:
        if name not in cfg["models"]:
            continue
        t0 = time.perf_counter()
        pred, stats, extra = STAGES[name](cfg, train, test, master.fork(name), pca_model)
        cm, bundle = _evaluate(test.labels, pred, cfg["ci_method"])
        logger.info("%s: accuracy %.4f (%.1f s)", name, bundle.accuracy, time.perf_counter() - t0)
        report["models"][name] = {"title": MODEL_TITLES[name], "confusion": cm.to_list(),
                                  "metrics": bundle.to_dict(), "stats": stats}
        sidecars[f"confusion_{name}.csv"] = (lambda c: lambda p: metrics.write_confusion_csv(c, p))(cm)
        sidecars[f"metrics_{name}.csv"] = (lambda b: lambda p: metrics.write_metrics_csv(b, p))(bundle)
        sidecars.update(extra)

    corr_cfg = cfg["correlation"]
    corr_data = data if corr_cfg["scope"] == "full" else train
    table = correlation.correlation_table(corr_data, filter=corr_cfg["filter"])
    report["correlation"] = dict(table.to_dict(), scope=corr_cfg["scope"])
    sidecars["correlation.csv"] = lambda p: correlation.write_correlation_csv(table, p)
    sidecars["correlation.txt"] = lambda p: Path(p).write_text(correlation.render_table(table))
    return RunResult(report, sidecars)


def write_run(result, out_dir):
    """Write report and sidecars into a scratch directory, then move it into place.

    On any failure the scratch directory is removed, so ``out_dir`` never
    holds a partial run.
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not (out / REPORT_NAME).exists():
        raise DomainError(f"{out} exists and does not hold a previous run; refusing to replace it")
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{out.name}.partial-", dir=out.parent))
    os.chmod(scratch, 0o755)
    try:
        for name, writer in sorted(result.sidecars.items()):
            writer(str(scratch / name))
        dump_json(result.report, scratch / REPORT_NAME)
        if out.exists():
            old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old-", dir=out.parent))
            os.replace(out, old / out.name)
            os.replace(scratch, out)
            shutil.rmtree(old)
        else:
            os.replace(scratch, out)
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    return out / REPORT_NAME


def cmd_run(cfg):
    if not cfg.out_dir:
        raise DomainError("an output directory is required")
    return write_run(run_pipeline(cfg), cfg.out_dir)


# --------------------------------------------------------------------------
# compare

COMPARE_COLUMNS = (
    ("accuracy", max), ("precision", max), ("recall", max), ("f1", max),
    ("mcc", max), ("csi", max), ("error_rate", min),
)


def load_report(path):
    with open(path, encoding="utf-8") as fh:
        rep = json.load(fh)
    if rep.get("report_version") != REPORT_VERSION:
        raise ReportVersionError(
            f"{path}: report version {rep.get('report_version')!r}, expected {REPORT_VERSION}")
    return rep


@dataclass
class Comparison:
    columns: tuple
    rows: list  # (run label, model, {column: value})
    best: dict  # column -> row index

    def render(self):
        head = f"{'run':<28}{'model':<22}" + "".join(f"{c:>12}" for c in self.columns)
        lines = [head]
        for i, (label, model, vals) in enumerate(self.rows):
            cells = []
            for c in self.columns:
                mark = "*" if self.best[c] == i else " "
                cells.append(f"{100 * vals[c]:>11.2f}{mark}")
            lines.append(f"{label:<28}{model:<22}" + "".join(cells))
        lines.append("values in percent; * marks the best value per column (first wins ties)")
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "model"] + list(self.columns) + ["best_in"])
            for i, (label, model, vals) in enumerate(self.rows):
                best = ";".join(c for c in self.columns if self.best[c] == i)
                w.writerow([label, model] + [repr(vals[c]) for c in self.columns] + [best])


def compare_reports(paths, labels=None):
    if len(paths) < 2:
        raise DomainError("compare needs at least two reports")
    labels = labels or [str(p) for p in paths]
    rows = []
    for label, path in zip(labels, paths):
        rep = load_report(path)
        for name in MODELS:
            if name not in rep["models"]:
                continue
            m = rep["models"][name]["metrics"]
            vals = {"accuracy": m["accuracy"], "error_rate": m["error_rate"]}
            vals.update({k: m["macro"][k] for k in metrics.METRICS})
            rows.append((label, rep["models"][name]["title"], vals))
    columns = tuple(c for c, _ in COMPARE_COLUMNS)
    best = {}
    for c, pick in COMPARE_COLUMNS:
        target = pick(r[2][c] for r in rows)
        best[c] = next(i for i, r in enumerate(rows) if r[2][c] == target)
    return Comparison(columns, rows, best)
