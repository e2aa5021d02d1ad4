"""Correlation, multicollinearity and one-way ANOVA.

Tail probabilities come from a regularized incomplete beta function evaluated
by continued fractions, so no special-function library is needed at runtime.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InputError, NumericalError

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAXITER = 10000

SIGNIFICANCE = 0.05


def _beta_cf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericalError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Parameters
    ----------
    a, b : float
        Positive shape parameters.
    x : float
        Upper integration limit in [0, 1].
    """
    if a <= 0 or b <= 0:
        raise InputError("betainc shape parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise InputError(f"betainc argument outside [0, 1]: {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the continued fraction converges fast only below the mean of the beta law
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def f_tail(f: float, d1: float, d2: float) -> float:
    """Upper-tail probability P(F > f) for an F(d1, d2) variate."""
    if d1 < 1 or d2 < 1:
        raise InputError(f"degrees of freedom must be >= 1, got ({d1}, {d2})")
    if f < 0 or math.isnan(f):
        raise InputError(f"F statistic must be non-negative, got {f}")
    if f == 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))


def t_two_tailed(t: float, df: float) -> float:
    """Two-tailed Student t probability P(|T| > |t|)."""
    if df < 1:
        raise InputError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def t_quantile(q: float, df: float) -> float:
    """Quantile of Student t with ``df`` degrees of freedom, by bisection."""
    if not 0.0 < q < 1.0:
        raise InputError(f"quantile level must lie in (0, 1), got {q}")
    if q == 0.5:
        return 0.0
    upper = q > 0.5
    tail = 2.0 * (1.0 - q if upper else q)
    lo, hi = 0.0, 1.0
    while t_two_tailed(hi, df) > tail:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_two_tailed(mid, df) > tail:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    t = 0.5 * (lo + hi)
    return t if upper else -t


def significance_stars(p: float) -> str:
    """Star code used in the ANOVA tables: 0.05, 0.01 and 0.001 cut-offs."""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


# -- correlation ---------------------------------------------------------------

def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InputError("pearson_r needs two 1-d samples of equal length")
    if x.size < 3:
        raise InputError(f"pearson_r needs at least 3 observations, got {x.size}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise InputError("zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def pearson_p(r: float, n: int) -> float:
    """Two-tailed p-value of a Pearson coefficient ``r`` from ``n`` pairs."""
    if n < 3:
        raise InputError(f"p-value of a correlation needs n >= 3, got {n}")
    if abs(r) > 1.0:
        raise InputError(f"correlation outside [-1, 1]: {r}")
    if abs(r) == 1.0:
        return 0.0
    df = n - 2
    t = r * math.sqrt(df / (1.0 - r * r))
    return t_two_tailed(t, df)


def vif(data) -> np.ndarray:
    """Variance inflation factor of every column.

    Each column is regressed (with intercept) on the remaining ones through
    the normal equations.  Perfect collinearity yields ``inf``.

    Parameters
    ----------
    data : array_like or StressMatrix
        n x p observations; objects with a ``data`` attribute are unwrapped.
    """
    x = np.asarray(getattr(data, "data", data), dtype=float)
    n, p = x.shape
    if p < 2:
        raise InputError("VIF needs at least two columns")
    if n <= p:
        raise InputError(f"VIF needs more rows than columns ({n} <= {p})")
    out = np.empty(p)
    for j in range(p):
        y = x[:, j]
        yc = y - y.mean()
        sst = float(yc @ yc)
        if sst == 0.0:
            raise InputError(f"zero variance in column {j}")
        a = np.column_stack([np.ones(n), np.delete(x, j, axis=1)])
        ata = a.T @ a
        aty = a.T @ y
        try:
            beta = np.linalg.solve(ata, aty)
        except np.linalg.LinAlgError:
            beta = np.linalg.lstsq(a, y, rcond=None)[0]
        resid = y - a @ beta
        unexplained = float(resid @ resid) / sst
        out[j] = math.inf if unexplained <= 1e-10 else 1.0 / unexplained
    return out


@dataclass(frozen=True)
class CorrelationReport:
    columns: tuple
    r_matrix: np.ndarray
    p_matrix: np.ndarray
    vif: np.ndarray
    flagged: tuple = field(default=())

    def pairs(self):
        """Yield ``(col_a, col_b, r, p, flagged)`` for the upper triangle."""
        cols = self.columns
        for i in range(len(cols)):
            for j in range(i + 1, len(cols)):
                p = float(self.p_matrix[i, j])
                yield cols[i], cols[j], float(self.r_matrix[i, j]), p, p < SIGNIFICANCE


def correlation_report(matrix) -> CorrelationReport:
    """Pairwise Pearson r and p plus VIF for every indicator column."""
    x = np.asarray(matrix.data, dtype=float)
    columns = tuple(matrix.columns)
    n, p = x.shape
    if n < 3:
        raise InputError(f"correlation needs at least 3 villages, got {n}")
    r = np.eye(p)
    pv = np.zeros((p, p))
    flagged = []
    for i in range(p):
        for j in range(i + 1, p):
            r[i, j] = r[j, i] = pearson_r(x[:, i], x[:, j])
            pv[i, j] = pv[j, i] = pearson_p(r[i, j], n)
            if pv[i, j] < SIGNIFICANCE:
                flagged.append((columns[i], columns[j]))
    return CorrelationReport(columns, r, pv, vif(x), tuple(flagged))


# -- ANOVA ---------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryGroup:
    label: str
    n: int
    mean: float
    sd: float

    @classmethod
    def from_sample(cls, label, values) -> "SummaryGroup":
        v = np.asarray(values, dtype=float)
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        return cls(label, int(v.size), float(v.mean()), sd)


@dataclass(frozen=True)
class AnovaResult:
    f: float
    df_between: int
    df_within: int
    p: float

    @property
    def stars(self) -> str:
        return significance_stars(self.p)

    @property
    def significant(self) -> bool:
        return self.p < SIGNIFICANCE


def _anova(ns, means, ss_within) -> AnovaResult:
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    k = ns.size
    total = ns.sum()
    if k < 2:
        raise InputError("ANOVA needs at least two groups")
    if total <= k:
        raise InputError(f"ANOVA needs more observations ({int(total)}) than groups ({k})")
    grand = float(ns @ means) / total
    ss_between = float(ns @ (means - grand) ** 2)
    df_b = k - 1
    df_w = int(total) - k
    if ss_within == 0.0:
        if ss_between == 0.0:
            raise NumericalError("zero within and between variance")
        return AnovaResult(math.inf, df_b, df_w, 0.0)
    f = (ss_between / df_b) / (ss_within / df_w)
    return AnovaResult(f, df_b, df_w, f_tail(f, df_b, df_w))


def anova_oneway(groups: Sequence[Sequence[float]]) -> AnovaResult:
    """One-way ANOVA on raw samples."""
    arrays = [np.asarray(g, dtype=float) for g in groups]
    if any(a.size < 1 for a in arrays):
        raise InputError("every ANOVA group needs at least one observation")
    means = [float(a.mean()) for a in arrays]
    ss_within = sum(float(((a - m) ** 2).sum()) for a, m in zip(arrays, means))
    return _anova([a.size for a in arrays], means, ss_within)


def anova_from_summary(groups: Sequence[SummaryGroup]) -> AnovaResult:
    """One-way ANOVA reconstructed from per-group n, mean and sample sd."""
    for g in groups:
        if g.n < 1:
            raise InputError(f"group {g.label!r} has n={g.n}; need n >= 1")
        if g.sd < 0:
            raise InputError(f"group {g.label!r} has negative sd")
    ss_within = sum((g.n - 1) * g.sd ** 2 for g in groups)
    return _anova([g.n for g in groups], [g.mean for g in groups], ss_within)


def pooled_mean_difference_ci(a: SummaryGroup, b: SummaryGroup, level: float = 0.95):
    """Pooled-variance confidence interval for ``a.mean - b.mean``."""
    df = a.n + b.n - 2
    if df < 1:
        raise InputError("confidence interval needs at least 3 observations")
    sp2 = ((a.n - 1) * a.sd ** 2 + (b.n - 1) * b.sd ** 2) / df
    half = t_quantile(0.5 + level / 2.0, df) * math.sqrt(sp2 * (1.0 / a.n + 1.0 / b.n))
    diff = a.mean - b.mean
    return diff - half, diff + half
