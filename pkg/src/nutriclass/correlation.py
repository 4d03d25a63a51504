"""Bivariate Pearson correlation against the stage label with two-tailed t tests."""
import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, NumericError
from .schema import LABEL

LEGEND_01 = "**Correlation is significant at the 0.01 level (2-tailed)."
LEGEND_05 = "*.Correlation is significant at the 0.05 level (2-tailed)."
CONSTANT_MARKER = "constant - undefined"


def pearson_r(x, y):
    a = np.asarray(x, dtype=np.float64).reshape(-1)
    b = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DomainError(f"vectors differ in length: {a.size} vs {b.size}")
    if a.size < 3:
        raise DomainError("correlation needs n >= 3")
    da = a - a.mean()
    db = b - b.mean()
    sxx = float(da @ da)
    syy = float(db @ db)
    if sxx == 0.0 or syy == 0.0:
        raise DomainError("correlation is undefined for a constant vector")
    # sqrt of each factor separately keeps the expression symmetric in x, y
    r = float(da @ db) / (math.sqrt(sxx) * math.sqrt(syy))
    return max(-1.0, min(1.0, r))


def _betacf(a, b, x, eps=1e-15, max_iter=500):
    """Continued fraction for the regularized incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise NumericError("incomplete beta continued fraction did not converge")


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise DomainError("betainc needs a, b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_tailed(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise DomainError("degrees of freedom must be positive")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def t_cdf(t, df):
    tail = 0.5 * t_sf_two_tailed(t, df)
    return 1.0 - tail if t >= 0 else tail


def two_tailed_p(r, n):
    if n < 3:
        raise DomainError("significance needs n >= 3")
    if not -1.0 <= r <= 1.0:
        raise DomainError(f"r must lie in [-1, 1], got {r}")
    if abs(r) >= 1.0:
        return 0.0
    df = n - 2
    t = r * math.sqrt(df) / math.sqrt(1.0 - r * r)
    return min(1.0, max(0.0, t_sf_two_tailed(t, df)))


def stars_for(p):
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


@dataclass(frozen=True)
class CorrelationRow:
    feature: str
    r: Optional[float]
    p_two_tailed: Optional[float]
    n: int
    stars: str = ""
    note: str = ""

    @property
    def defined(self):
        return self.r is not None

    def to_dict(self):
        return {"feature": self.feature, "r": self.r, "p": self.p_two_tailed, "n": self.n,
                "stars": self.stars, "note": self.note}


@dataclass(frozen=True)
class CorrelationTable:
    target: str
    rows: list
    filters: tuple = field(default_factory=tuple)

    @property
    def n(self):
        return self.rows[0].n if self.rows else 0

    def row(self, feature):
        for r in self.rows:
            if r.feature == feature:
                return r
        raise KeyError(feature)

    def to_dict(self):
        return {"target": self.target, "filters": list(self.filters),
                "rows": [r.to_dict() for r in self.rows]}


def correlation_table(data, target=LABEL, filter="all"):
    """One row per feature against ``target``, sorted by ascending r.

    ``filter="negative_significant"`` keeps rows with r < 0 and p < 0.05.
    Constant features keep a row with ``r = None`` and a marker note.
    """
    if filter not in ("all", "negative_significant"):
        raise DomainError(f"unknown filter {filter!r}")
    names = list(data.feature_names)
    if target == LABEL:
        y = np.asarray(data.labels, dtype=np.float64)
    elif target in names:
        y = np.asarray(data.column(target), dtype=np.float64)
    else:
        raise DomainError(f"target column {target!r} not present")
    n = y.shape[0]
    if n < 3:
        raise DomainError("correlation needs n >= 3")
    defined, undefined = [], []
    for j, name in enumerate(names):
        if name == target:
            continue
        x = np.asarray(data.matrix[:, j], dtype=np.float64)
        try:
            r = pearson_r(x, y)
        except DomainError:
            undefined.append(CorrelationRow(name, None, None, n, "", CONSTANT_MARKER))
            continue
        p = two_tailed_p(r, n)
        defined.append(CorrelationRow(name, r, p, n, stars_for(p)))
    if filter == "negative_significant":
        defined = [row for row in defined if row.r < 0 and row.p_two_tailed < 0.05]
        undefined = []
    # stable sort: equal r keeps schema order
    defined.sort(key=lambda row: row.r)
    filters = () if filter == "all" else (filter,)
    return CorrelationTable(target, defined + undefined, filters)


def write_correlation_csv(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "r", "p_two_tailed", "n", "stars", "note"])
        for row in table.rows:
            w.writerow([row.feature, "" if row.r is None else repr(row.r),
                        "" if row.p_two_tailed is None else repr(row.p_two_tailed),
                        row.n, row.stars, row.note])


def render_table(table, digits=3):
    """Plain-text layout: feature, r with stars, Sig. (2-tailed), N, then legends."""
    lines = [f"{'Feature':<24}{'Pearson r':>14}{'Sig. (2-tailed)':>18}{'N':>9}"]
    for row in table.rows:
        if row.r is None:
            lines.append(f"{row.feature:<24}{row.note:>32}{row.n:>9}")
            continue
        r = f"{row.r:.{digits}f}{row.stars}"
        lines.append(f"{row.feature:<24}{r:>14}{row.p_two_tailed:>18.{digits}f}{row.n:>9}")
    lines.append(LEGEND_01)
    lines.append(LEGEND_05)
    return "\n".join(lines) + "\n"
