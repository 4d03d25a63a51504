"""Synthetic survey records calibrated to the published feature moments.

Every row draws one latent "nutrition" factor ``L ~ N(0, 1)``. Each feature
mixes that factor with private noise using its loading ``a``::

    u = a * c * L + sqrt(1 - (a * c)**2) * e

where ``c`` is the global coupling strength. Continuous features are
``mean + sd * u`` clipped to their range; categorical features cut ``u`` at
its empirical quantiles at the cumulative category probabilities, so
category shares match their targets exactly and higher codes go with better
nutrition when ``a > 0``. The normal draws are moment-matched (sample mean 0,
SD 1) before mixing.
"""
import copy
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .numeric import Rng
from .schema import SurveyRecord, SurveyRecords, default_schema

# Z-score private noise (SD ~0.017) sits below the 2-decimal recording grid.
# Treatment/medication items only apply to the few children who were ill.
_RARE = {"0": 0.96, "1": 0.02, "2": 0.02}

DEFAULT_FEATURES = {
    "UB2": {"mean": 2.02, "sd": 1.41, "min": 0.0, "max": 4.0, "loading": 0.0, "decimals": 2},
    "BD3": {"probs": {"0": 0.4367, "1": 0.0966, "2": 0.4667}, "loading": 0.75},
    "Windex5": {"probs": {"1": 0.25, "2": 0.20, "3": 0.19, "4": 0.19, "5": 0.17}, "loading": 0.22},
    "melevel": {"probs": {"0": 0.08, "1": 0.33, "2": 0.41, "3": 0.18}, "loading": 0.18},
    "ZBMI": {"mean": -0.57, "sd": 1.17, "min": -4.99, "max": 4.98, "loading": 0.9999, "decimals": 2},
    "WHZ2": {"mean": -0.66, "sd": 1.16, "min": -4.99, "max": 4.86, "loading": 0.9999, "decimals": 2},
    "WAZ2": {"mean": -1.21, "sd": 1.10, "min": -5.66, "max": 4.68, "loading": 0.9999, "decimals": 2},
    "HAZ2": {"mean": -1.29, "sd": 1.32, "min": -6.00, "max": 5.86, "loading": 0.9999, "decimals": 2},
    "CA1": {"probs": {"0": 0.05, "1": 0.10, "2": 0.85}, "loading": 0.45},
    "CA3": {"probs": dict(_RARE), "loading": 0.0},
    "CA4": {"probs": dict(_RARE), "loading": 0.0},
    "CA5": {"probs": dict(_RARE), "loading": 0.0},
    "CA7A/CA7B": {"probs": dict(_RARE), "loading": 0.0},
    "CA7C/CA13B/CA13G": {"probs": dict(_RARE), "loading": 0.0},
    "CA14/CA16/CA17": {"probs": {"0": 0.05, "1": 0.35, "2": 0.60}, "loading": 0.0},
    "CA22/CA23L/CA23M/CA23N": {"probs": dict(_RARE), "loading": 0.0},
    "CA_OTHER": {"probs": dict(_RARE), "loading": 0.0},
    "HH6": {"probs": {"0": 0.0, "1": 0.75, "2": 0.25}, "loading": 0.0},
    "HH7": {"probs": {"0": 0.0, "1": 0.5, "2": 0.5}, "loading": 0.0},
    "HL4": {"probs": {"0": 0.0, "1": 0.51, "2": 0.49}, "loading": 0.0},
}


@dataclass
class GeneratorSpec:
    """Per-feature moments/probabilities, loadings and coupling strength."""

    features: dict
    coupling: float = 1.0

    @classmethod
    def default(cls):
        return cls(copy.deepcopy(DEFAULT_FEATURES), 1.0)

    @classmethod
    def from_dict(cls, d):
        base = copy.deepcopy(DEFAULT_FEATURES)
        for name, overrides in d.get("features", {}).items():
            if name in base and "probs" in overrides:
                base[name].pop("mean", None)
            base.setdefault(name, {}).update(overrides)
        spec = cls(base, float(d.get("coupling", 1.0)))
        spec.validate()
        return spec

    @classmethod
    def from_file(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return {"coupling": self.coupling, "features": copy.deepcopy(self.features)}

    def validate(self, schema=None):
        schema = schema or default_schema()
        if self.coupling < 0:
            raise DomainError("coupling strength must be >= 0")
        for spec in schema.features:
            if spec.name not in self.features:
                raise DomainError(f"generator spec lacks feature {spec.name}")
            f = self.features[spec.name]
            a = f.get("loading", 0.0) * self.coupling
            if abs(a) > 1:
                raise DomainError(f"{spec.name}: |loading * coupling| must be <= 1")
            if spec.kind == "continuous":
                if f["sd"] < 0:
                    raise DomainError(f"{spec.name}: sd must be >= 0")
                if f["min"] > f["max"]:
                    raise DomainError(f"{spec.name}: min > max")
            else:
                probs = f["probs"]
                if any(p < 0 for p in probs.values()):
                    raise DomainError(f"{spec.name}: negative category probability")
                if abs(sum(probs.values()) - 1.0) > 1e-9:
                    raise DomainError(f"{spec.name}: category probabilities must sum to 1")
                bad = [c for c in probs if int(c) not in spec.domain]
                if bad:
                    raise DomainError(f"{spec.name}: codes {bad} outside domain")

    def target_mean(self, name):
        f = self.features[name]
        if "probs" in f:
            return sum(int(c) * p for c, p in f["probs"].items())
        return f["mean"]

    def target_sd(self, name):
        f = self.features[name]
        if "probs" in f:
            mu = self.target_mean(name)
            return math.sqrt(sum(p * (int(c) - mu) ** 2 for c, p in f["probs"].items()))
        return f["sd"]


def _standardize(z):
    if z.size < 2:
        return z
    sd = z.std()
    return (z - z.mean()) / sd if sd > 0 else z - z.mean()


def _categorical(u, probs):
    """Codes by rank: the lowest share ``p0`` of ``u`` gets the lowest code, etc."""
    codes = sorted(probs, key=int)
    n = u.size
    bounds = np.floor(np.cumsum([probs[c] for c in codes]) * n + 0.5).astype(np.int64)
    bounds[-1] = n
    ranks = np.empty(n, dtype=np.int64)
    ranks[np.argsort(u, kind="stable")] = np.arange(n)
    idx = np.searchsorted(bounds, ranks, side="right")
    return np.asarray([int(c) for c in codes], dtype=np.float64)[idx]


def generate_columns(spec, n, seed, schema=None):
    """Column arrays keyed by feature name."""
    schema = schema or default_schema()
    if n < 1:
        raise DomainError(f"row count must be >= 1, got {n}")
    spec.validate(schema)
    rng = Rng(seed)
    latent = _standardize(rng.normal(n))
    cols = {}
    for fs in schema.features:
        f = spec.features[fs.name]
        a = f.get("loading", 0.0) * spec.coupling
        u = a * latent + math.sqrt(max(0.0, 1.0 - a * a)) * _standardize(rng.normal(n))
        if fs.kind == "continuous":
            x = np.clip(f["mean"] + f["sd"] * u, f["min"], f["max"])
            if f.get("decimals") is not None:
                x = np.clip(np.round(x, int(f["decimals"])), f["min"], f["max"])
            cols[fs.name] = x
        else:
            cols[fs.name] = _categorical(u, f["probs"])
    return cols


def generate_synthetic(spec=None, n=21858, seed=7, schema=None):
    """Complete synthetic survey records, deterministic in ``seed``."""
    schema = schema or default_schema()
    spec = spec or GeneratorSpec.default()
    cols = generate_columns(spec, n, seed, schema)
    names = schema.names
    matrix = np.column_stack([cols[name] for name in names])
    records = [SurveyRecord(dict(zip(names, row.tolist()))) for row in matrix]
    return SurveyRecords(records, source=f"synthetic(n={n}, seed={seed})")
