"""Confusion matrices and per-class / aggregate classification metrics."""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

Z95 = 1.96
METRICS = ("precision", "recall", "f1", "mcc", "csi")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # (K, K); row = true class, column = predicted

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or np.any(c < 0):
            raise DomainError("confusion counts must be a square nonnegative matrix")
        c = c.astype(np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def k(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def correct(self):
        return int(np.trace(self.counts))

    def to_list(self):
        return self.counts.tolist()


def confusion(true, pred, k=4):
    t = np.asarray(true, dtype=np.int64).reshape(-1)
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    if t.shape != p.shape:
        raise DomainError(f"true and predicted lengths differ: {t.size} vs {p.size}")
    if t.size == 0:
        raise DomainError("nothing to tally")
    if min(t.min(), p.min()) < 1 or max(t.max(), p.max()) > k:
        raise DomainError(f"class codes must lie in 1..{k}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t - 1, p - 1), 1)
    return ConfusionMatrix(counts)


def binarize(cm, c):
    """(T_p, F_p, F_N, T_N) for class code ``c`` against the rest."""
    if not 1 <= int(c) <= cm.k:
        raise DomainError(f"class {c} outside 1..{cm.k}")
    i = int(c) - 1
    tp = int(cm.counts[i, i])
    fn = int(cm.counts[i, :].sum()) - tp
    fp = int(cm.counts[:, i].sum()) - tp
    tn = cm.total - tp - fn - fp
    return tp, fp, fn, tn


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def mcc(tp, fp, fn, tn):
    den = float(tp + fp) * float(tp + fn) * float(tn + fp) * float(tn + fn)
    if den <= 0:
        return 0.0
    return (float(tp) * tn - float(fp) * fn) / math.sqrt(den)


def class_metrics(tp, fp, fn, tn):
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1_score(precision, recall),
        "mcc": mcc(tp, fp, fn, tn),
        "csi": precision + recall - 1.0,
    }


def f1_score(precision, recall):
    s = precision + recall
    return 2.0 * precision * recall / s if s > 0 else 0.0


def accuracy_interval(p, n, method="wald"):
    """Two-sided 95% interval for a proportion, clipped to [0, 1]."""
    if n <= 0:
        raise DomainError("interval needs n >= 1")
    if method == "wald":
        half = Z95 * math.sqrt(p * (1.0 - p) / n)
        lo, hi = p - half, p + half
    elif method == "wilson":
        z2 = Z95 * Z95
        centre = (p + z2 / (2 * n)) / (1 + z2 / n)
        half = Z95 * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
        lo, hi = centre - half, centre + half
    else:
        raise DomainError(f"unknown interval method {method!r}")
    return max(0.0, min(lo, p)), min(1.0, max(hi, p))


@dataclass(frozen=True)
class MetricBundle:
    accuracy: float
    accuracy_ci: tuple
    per_class: dict  # class code -> {metric: value}
    macro: dict
    error_rate: float
    class_error_rates: dict
    n: int

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "accuracy_ci": list(self.accuracy_ci),
            "per_class": {str(c): dict(m) for c, m in self.per_class.items()},
            "macro": dict(self.macro),
            "error_rate": self.error_rate,
            "class_error_rates": {str(c): v for c, v in self.class_error_rates.items()},
            "n": self.n,
        }


def metric_bundle(cm, ci_method="wald"):
    n = cm.total
    if n == 0:
        raise DomainError("empty confusion matrix")
    acc = cm.correct / n
    per_class, class_err = {}, {}
    for c in range(1, cm.k + 1):
        tp, fp, fn, tn = binarize(cm, c)
        per_class[c] = class_metrics(tp, fp, fn, tn)
        class_err[c] = (fp + fn) / n
    macro = {m: float(np.mean([per_class[c][m] for c in per_class])) for m in METRICS}
    return MetricBundle(
        accuracy=acc,
        accuracy_ci=accuracy_interval(acc, n, ci_method),
        per_class=per_class,
        macro=macro,
        error_rate=1.0 - acc,
        class_error_rates=class_err,
        n=n,
    )


def write_confusion_csv(cm, path, labels=None):
    labels = labels or [str(c) for c in range(1, cm.k + 1)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred"] + list(labels))
        for lab, row in zip(labels, cm.counts.tolist()):
            w.writerow([lab] + row)


def write_metrics_csv(bundle, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class"] + list(METRICS) + ["error_rate"])
        for c, m in bundle.per_class.items():
            w.writerow([c] + [repr(m[k]) for k in METRICS] + [repr(bundle.class_error_rates[c])])
        w.writerow(["macro"] + [repr(bundle.macro[k]) for k in METRICS] + [repr(bundle.error_rate)])
