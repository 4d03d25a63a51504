"""Survey feature schema, CSV ingestion, encoding and malnutrition staging."""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SchemaError
from .numeric import Rng

logger = logging.getLogger(__name__)

ZSCORES = ("ZBMI", "WHZ2", "WAZ2", "HAZ2")
LABEL = "Mstatus"
CLASS_CODES = (1, 2, 3, 4)
CLASS_NAMES = {1: "well nourished", 2: "mild", 3: "moderate", 4: "severe"}


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "continuous" | "categorical"
    domain: tuple  # (low, high) for continuous, admissible codes for categorical
    role: str = "predictor"  # "zscore" | "predictor"
    description: str = ""

    def __post_init__(self):
        if self.kind not in ("continuous", "categorical"):
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.role not in ("zscore", "predictor"):
            raise SchemaError(f"{self.name}: unknown role {self.role!r}")
        if self.kind == "continuous" and (len(self.domain) != 2 or self.domain[0] > self.domain[1]):
            raise SchemaError(f"{self.name}: continuous domain must be (low, high)")

    def admits(self, value):
        if not math.isfinite(value):
            return False
        if self.kind == "continuous":
            return self.domain[0] <= value <= self.domain[1]
        return value == int(value) and int(value) in self.domain


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple

    def __post_init__(self):
        names = [f.name for f in self.features]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise SchemaError(f"duplicate feature names: {sorted(dupes)}")
        if LABEL in names:
            raise SchemaError(f"{LABEL} is derived and cannot be a schema feature")

    @property
    def names(self):
        return tuple(f.name for f in self.features)

    def __getitem__(self, name):
        for f in self.features:
            if f.name == name:
                return f
        raise KeyError(name)

    def __len__(self):
        return len(self.features)

    def predictor_names(self, include_zscores=True):
        return tuple(
            f.name for f in self.features if include_zscores or f.role != "zscore"
        )


_BINARY = (0, 1, 2)


def default_schema():
    """The 20-predictor survey schema, Z-scores included."""
    cat = lambda name, desc, codes=_BINARY: FeatureSpec(name, "categorical", codes, "predictor", desc)
    z = lambda name, lo, hi, desc: FeatureSpec(name, "continuous", (lo, hi), "zscore", desc)
    return FeatureSchema((
        FeatureSpec("UB2", "continuous", (0.0, 4.0), "predictor", "age of the child (years)"),
        cat("BD3", "whether child is still being breastfed"),
        cat("Windex5", "wealth index quintile", (1, 2, 3, 4, 5)),
        cat("melevel", "mother's education level", (0, 1, 2, 3)),
        z("ZBMI", -4.99, 4.98, "BMI-for-age Z score (WHO)"),
        z("WHZ2", -4.99, 4.86, "weight-for-height Z score (WHO)"),
        z("WAZ2", -5.66, 4.68, "weight-for-age Z score (WHO)"),
        z("HAZ2", -6.00, 5.86, "height-for-age Z score (WHO)"),
        cat("CA1", "diarrhea in last 2 weeks"),
        cat("CA3", "drank less or more during diarrhea"),
        cat("CA4", "ate less or more during diarrhea"),
        cat("CA5", "sought advice or treatment for diarrhea"),
        cat("CA7A/CA7B", "saline during diarrhea"),
        cat("CA7C/CA13B/CA13G", "medications during diarrhea"),
        cat("CA14/CA16/CA17", "illness with fever, cough and breathing"),
        cat("CA22/CA23L/CA23M/CA23N", "medications during cough"),
        cat("CA_OTHER", "other merged diarrhea/pneumonia indicator"),
        cat("HH6", "area of living"),
        cat("HH7", "division of the respondent"),
        cat("HL4", "sex of the child"),
    ))


# --------------------------------------------------------------------------
# staging

@dataclass(frozen=True)
class StagingPolicy:
    """How the four Z-scores collapse into one staging score.

    ``aggregate`` is ``"min"`` (worst of the four) or one Z-score name.
    ``cutoffs`` are the class boundaries, descending; a score equal to a
    cutoff stays in the less severe class.
    """

    aggregate: str = "min"
    cutoffs: tuple = (-1.0, -2.0, -3.0)

    def __post_init__(self):
        if self.aggregate != "min" and self.aggregate not in ZSCORES:
            raise DomainError(f"staging aggregate must be 'min' or one of {ZSCORES}")
        if list(self.cutoffs) != sorted(self.cutoffs, reverse=True) or len(self.cutoffs) != 3:
            raise DomainError("cutoffs must be three descending values")

    def score(self, z):
        """Staging score for an (n, 4) array ordered like ``ZSCORES``."""
        z = np.asarray(z, dtype=np.float64)
        if self.aggregate == "min":
            return z.min(axis=-1)
        return z[..., ZSCORES.index(self.aggregate)]


def stage_scores(scores, cutoffs=(-1.0, -2.0, -3.0)):
    s = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        raise DomainError("staging score must be finite")
    return 1 + np.sum(s[..., None] < np.asarray(cutoffs), axis=-1).astype(np.int64)


def label_mstatus(z, staging=StagingPolicy()):
    """Malnutrition class 1-4 from the four Z-scores.

    ``z`` is either a mapping keyed by Z-score name or a sequence ordered
    ``ZBMI, WHZ2, WAZ2, HAZ2``.
    """
    if isinstance(z, dict):
        z = [z[name] for name in ZSCORES]
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (4,):
        raise DomainError(f"expected four Z-scores, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise DomainError("Z-scores must be finite")
    return int(stage_scores(staging.score(z), staging.cutoffs))


# --------------------------------------------------------------------------
# records

@dataclass
class SurveyRecord:
    values: dict  # feature name -> float, absent when missing

    def get(self, name):
        return self.values.get(name)


class SurveyRecords(list):
    """List of records plus ingestion bookkeeping."""

    def __init__(self, records=(), n_warnings=0, source="memory"):
        super().__init__(records)
        self.n_warnings = n_warnings
        self.source = source


def _parse_cell(text):
    text = text.strip()
    if not text:
        return None
    return float(text)


def parse_survey_csv(path, schema=None):
    """Read survey rows; bad or out-of-domain cells become missing."""
    schema = schema or default_schema()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    records = []
    n_warnings = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        for name in schema.names:
            if name not in header:
                raise SchemaError(f"{path}: header is missing feature {name!r}")
        cols = {name: header.index(name) for name in schema.names}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            values = {}
            for spec in schema.features:
                j = cols[spec.name]
                cell = row[j] if j < len(row) else ""
                try:
                    v = _parse_cell(cell)
                except ValueError:
                    v = float("nan")
                if v is None:
                    continue
                if not spec.admits(v):
                    n_warnings += 1
                    logger.debug("line %d: %s=%r rejected", line_no, spec.name, cell)
                    continue
                values[spec.name] = v
            records.append(SurveyRecord(values))
    if n_warnings:
        logger.warning("%s: %d cell(s) unparseable or out of domain, treated as missing", path, n_warnings)
    return SurveyRecords(records, n_warnings=n_warnings, source=str(path))


def write_survey_csv(records, path, schema=None):
    schema = schema or default_schema()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema.names)
        for rec in records:
            w.writerow(["" if rec.get(n) is None else _fmt(rec.get(n), schema[n]) for n in schema.names])


def _fmt(value, spec):
    if spec.kind == "categorical":
        return str(int(value))
    return repr(float(value))


# --------------------------------------------------------------------------
# encoded data

@dataclass(frozen=True)
class EncodedDataset:
    feature_names: tuple
    matrix: np.ndarray
    labels: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if m.ndim != 2 or m.shape[1] != len(self.feature_names):
            raise DomainError("matrix columns must match feature_names")
        if m.shape[0] != y.shape[0]:
            raise DomainError("matrix rows must match label count")
        if not np.all(np.isfinite(m)):
            raise DomainError("encoded matrix contains missing values")
        m.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.matrix.shape[0]

    @property
    def n_features(self):
        return self.matrix.shape[1]

    def column(self, name):
        return self.matrix[:, self.feature_names.index(name)]

    def take(self, idx, note=None):
        prov = dict(self.provenance)
        if note:
            prov["subset"] = note
        return EncodedDataset(self.feature_names, self.matrix[idx], self.labels[idx], prov)

    def select(self, names):
        idx = [self.feature_names.index(n) for n in names]
        return EncodedDataset(tuple(names), self.matrix[:, idx], self.labels, dict(self.provenance))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(self.feature_names) + [LABEL])
            for row, lab in zip(self.matrix, self.labels):
                w.writerow([repr(float(v)) for v in row] + [int(lab)])


def read_encoded_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != LABEL:
            raise SchemaError(f"{path}: last column must be {LABEL}")
        rows = [r for r in reader if r]
    if not rows:
        return EncodedDataset(tuple(header[:-1]), np.empty((0, len(header) - 1)), np.empty(0, dtype=np.int64))
    data = np.array([[float(v) for v in r[:-1]] for r in rows])
    labels = np.array([int(r[-1]) for r in rows])
    return EncodedDataset(tuple(header[:-1]), data, labels, {"source": str(path)})


def preprocess(records, schema=None, staging=StagingPolicy(), include_zscores=True):
    """Encode records into a complete numeric matrix with Mstatus labels.

    Rows missing any Z-score or any continuous predictor are dropped; missing
    categorical predictors become code 0 ("no information").
    """
    schema = schema or default_schema()
    if len(records) == 0:
        raise DomainError("no records to preprocess")
    for z in ZSCORES:
        if z not in schema.names:
            raise SchemaError(f"schema lacks Z-score feature {z}")
    names = schema.predictor_names(include_zscores)
    required = [f.name for f in schema.features if f.kind == "continuous"]

    rows, zrows = [], []
    dropped = 0
    for rec in records:
        if any(rec.get(n) is None for n in required):
            dropped += 1
            continue
        rows.append([rec.get(n) if rec.get(n) is not None else 0.0 for n in names])
        zrows.append([rec.get(n) for n in ZSCORES])
    if not rows:
        raise DomainError(f"all {dropped} records dropped for missing Z-scores")
    labels = stage_scores(staging.score(np.array(zrows)), staging.cutoffs)
    provenance = {
        "source": getattr(records, "source", "memory"),
        "rows_in": len(records),
        "rows_dropped": dropped,
        "rows_out": len(rows),
        "parse_warnings": getattr(records, "n_warnings", 0),
        "staging": staging.aggregate,
    }
    return EncodedDataset(names, np.array(rows, dtype=np.float64), labels, provenance)


def split_train_test(data, test_fraction=0.2, seed=0):
    """Deterministic shuffled train/test partition."""
    if not 0.0 < test_fraction < 1.0:
        raise DomainError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = len(data)
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n_test < 1 or n_test > n - 1:
        raise DomainError(f"split of {n} rows at {test_fraction} leaves a side empty")
    perm = Rng(seed).shuffle(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return data.take(train_idx, "train"), data.take(test_idx, "test")

