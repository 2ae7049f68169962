"""Contingency-table and two-group statistics for dichotomized structure
features: odds ratio, Pearson chi-square, Student's t-test and Pearson
correlation with two-tailed p-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .special import chi2_sf, t_two_tailed_p


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 counts. Rows: feature <= cutoff / > cutoff; columns: e.g. benign / malignant."""

    t11: int
    t12: int
    t21: int
    t22: int

    def __post_init__(self):
        cells = (self.t11, self.t12, self.t21, self.t22)
        if any(c < 0 or c != int(c) for c in cells):
            raise ValueError(f"cells must be nonnegative integers, got {cells}")
        if sum(cells) < 1:
            raise ValueError("table must contain at least one observation")

    @classmethod
    def from_rows(cls, rows) -> "ContingencyTable":
        (t11, t12), (t21, t22) = rows
        return cls(int(t11), int(t12), int(t21), int(t22))

    @property
    def n(self) -> int:
        return self.t11 + self.t12 + self.t21 + self.t22

    def rows(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return (self.t11, self.t12), (self.t21, self.t22)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    df: float | None = None


class DegenerateTableError(ValueError):
    """A zero row or column makes the statistic undefined."""


def dichotomize(values, cutoff: float) -> tuple[int, int]:
    """Split values at a cutoff: (count <= cutoff, count > cutoff)."""
    values = list(values)
    if not values:
        raise ValueError("cannot dichotomize an empty list")
    n_low = sum(1 for v in values if v <= cutoff)
    return n_low, len(values) - n_low


def odds_ratio(table: ContingencyTable, haldane: bool = False) -> float:
    """Cross-product ratio (t11*t22)/(t12*t21).

    Returns +inf when only the denominator product vanishes; a table where
    both cross products are zero (any zero row or column) is degenerate and
    raises. ``haldane`` applies the 0.5-per-cell correction instead of
    returning +inf.
    """
    a, b, c, d = table.t11, table.t12, table.t21, table.t22
    if haldane:
        return ((a + 0.5) * (d + 0.5)) / ((b + 0.5) * (c + 0.5))
    num = a * d
    den = b * c
    if den == 0:
        if num == 0:
            raise DegenerateTableError(f"odds ratio undefined for table {table.rows()}")
        return math.inf
    return num / den


def chi_square_2x2(table: ContingencyTable) -> TestResult:
    """Pearson chi-square on a 2x2 table, 1 dof, without continuity correction."""
    a, b, c, d = table.t11, table.t12, table.t21, table.t22
    r1, r2 = a + b, c + d
    c1, c2 = a + c, b + d
    if 0 in (r1, r2, c1, c2):
        raise DegenerateTableError(f"chi-square undefined for table {table.rows()}")
    n = table.n
    stat = n * (a * d - b * c) ** 2 / (r1 * r2 * c1 * c2)
    return TestResult(statistic=stat, p_value=chi2_sf(stat, 1), df=1)


def t_test_two_sample(a, b, variant: str = "pooled") -> TestResult:
    """Two-sample Student's t-test, two-tailed.

    ``variant`` is "pooled" (equal-variance, the default) or "welch". When
    both samples have zero variance the statistic degenerates: equal means
    give p = 1, different means give an infinite statistic with p = 0.
    """
    a = [float(v) for v in a]
    b = [float(v) for v in b]
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 observations")
    if variant not in ("pooled", "welch"):
        raise ValueError(f"unknown variant {variant!r}")
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((v - ma) ** 2 for v in a) / (na - 1)
    vb = sum((v - mb) ** 2 for v in b) / (nb - 1)

    if variant == "pooled":
        df = na + nb - 2.0
        sp2 = ((na - 1) * va + (nb - 1) * vb) / df
        se2 = sp2 * (1.0 / na + 1.0 / nb)
    else:
        se2 = va / na + vb / nb
        if se2 > 0:
            df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
        else:
            df = na + nb - 2.0

    if se2 == 0:
        if ma == mb:
            return TestResult(statistic=0.0, p_value=1.0, df=df)
        return TestResult(statistic=math.copysign(math.inf, ma - mb), p_value=0.0, df=df)
    t = (ma - mb) / math.sqrt(se2)
    return TestResult(statistic=t, p_value=t_two_tailed_p(t, df), df=df)


def pearson_r(x, y) -> TestResult:
    """Pearson correlation with a two-tailed p-value via the t transform."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 paired observations")
    mx, my = sum(x) / n, sum(y) / n
    sxx = sum((v - mx) ** 2 for v in x)
    syy = sum((v - my) ** 2 for v in y)
    if sxx == 0 or syy == 0:
        raise ValueError("correlation undefined for a constant input")
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    r = sxy / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    df = n - 2
    if abs(r) == 1.0:
        return TestResult(statistic=r, p_value=0.0, df=df)
    t = r * math.sqrt(df / (1.0 - r * r))
    return TestResult(statistic=r, p_value=t_two_tailed_p(t, df), df=df)


def group_summary(values) -> tuple[float, float]:
    """Mean and sample SD of a group, for mean +/- SD reporting."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("empty group")
    n = len(values)
    m = sum(values) / n
    if n == 1:
        return m, 0.0
    sd = math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))
    return m, sd
