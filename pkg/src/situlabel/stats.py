"""Classification metrics and classifier-comparison tests.

Covers the confusion matrix / precision / recall / F1 metrics, Cochran's Q
over an N x L binary correctness matrix, the analogous one-way
repeated-measures F test, pairwise McNemar tests (exact binomial below 25
discordant pairs, continuity-corrected chi-square above), Bonferroni
adjustment, and the chi-square / F survival functions they need, built on
regularized incomplete gamma and beta functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "StatTestResult",
    "confusion",
    "accuracy_from_confusion",
    "precision_recall_f1",
    "correctness_matrix",
    "cochran_q",
    "rm_anova_f",
    "mcnemar",
    "bonferroni",
    "chi2_sf",
    "f_sf",
    "gammainc_upper",
    "betainc",
]

_EPS = np.finfo(float).eps
_MAX_ITER = 500


@dataclass(frozen=True)
class StatTestResult:
    """Outcome of one hypothesis test at significance level alpha."""

    test: str
    statistic: float
    df: tuple[float, ...]
    p: float
    alpha: float = 0.05
    p_adjusted: float | None = None
    degenerate: bool = False

    @property
    def significant(self) -> bool:
        p = self.p if self.p_adjusted is None else self.p_adjusted
        return p < self.alpha

    def adjusted(self, m: int) -> "StatTestResult":
        return StatTestResult(
            self.test, self.statistic, self.df, self.p, self.alpha,
            p_adjusted=min(1.0, m * self.p), degenerate=self.degenerate,
        )


# ---------------------------------------------------------------------------
# Special functions (series / continued fractions, double precision)
# ---------------------------------------------------------------------------


def _gamma_series(a: float, x: float) -> float:
    # regularized lower incomplete gamma P(a, x), series representation
    if x == 0.0:
        return 0.0
    gln = math.lgamma(a)
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - gln)


def _gamma_cf(a: float, x: float) -> float:
    # regularized upper incomplete gamma Q(a, x), continued fraction
    gln = math.lgamma(a)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-x + a * math.log(x) - gln) * h


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _gamma_series(a, x)))
    return min(1.0, max(0.0, _gamma_cf(a, x)))


def _beta_cf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta function (Lentz's method)
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        val = front * _beta_cf(a, b, x) / a
    else:
        val = 1.0 - front * _beta_cf(b, a, 1.0 - x) / b
    return min(1.0, max(0.0, val))


def chi2_sf(x: float, df: float) -> float:
    """Chi-square survival function P(X >= x) with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if x <= 0:
        return 1.0
    return gammainc_upper(df / 2.0, x / 2.0)


def f_sf(x: float, d1: float, d2: float) -> float:
    """F-distribution survival function P(F >= x) with (d1, d2) dof."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def confusion(preds, truth, n_classes: int = 3) -> np.ndarray:
    """Confusion matrix with rows = truth, columns = prediction."""
    preds = np.asarray(preds, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if preds.shape != truth.shape:
        raise ValueError("preds and truth must have equal length")
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (truth, preds), 1)
    return cm


def accuracy_from_confusion(cm: np.ndarray) -> float:
    total = int(cm.sum())
    return float(np.trace(cm)) / total if total else 0.0


def precision_recall_f1(cm: np.ndarray, cls: int) -> tuple[float, float, float]:
    """Per-class precision, recall and F1; zero when a denominator is zero."""
    tp = float(cm[cls, cls])
    fp = float(cm[:, cls].sum() - tp)
    fn = float(cm[cls, :].sum() - tp)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def correctness_matrix(truth, predictions_by_model: dict[str, np.ndarray]) -> np.ndarray:
    """N x L binary matrix: entry (i, j) marks model j correct on instance i."""
    truth = np.asarray(truth, dtype=int)
    cols = [np.asarray(p, dtype=int) == truth for p in predictions_by_model.values()]
    for name, col in zip(predictions_by_model, cols):
        if col.shape != truth.shape:
            raise ValueError(f"predictions for {name!r} have wrong length")
    return np.stack(cols, axis=1).astype(int)


# ---------------------------------------------------------------------------
# Comparison tests
# ---------------------------------------------------------------------------


def cochran_q(matrix, alpha: float = 0.05) -> StatTestResult:
    """Cochran's Q over an N x L correctness matrix, chi-square with L-1 dof.

    Unanimous rows (all 0 or all L) contribute nothing; if every row is
    unanimous the statistic is undefined and a degenerate (Q=0, p=1) result
    is returned.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("correctness matrix must be a non-empty N x L array")
    n, L = m.shape
    if L < 2:
        raise ValueError("need at least two classifiers")
    col_totals = m.sum(axis=0)
    row_totals = m.sum(axis=1)
    grand = m.sum()
    denom = L * grand - float(np.sum(row_totals**2))
    if denom == 0.0:
        return StatTestResult("cochran_q", 0.0, (L - 1,), 1.0, alpha, degenerate=True)
    q = (L - 1) * (L * float(np.sum(col_totals**2)) - grand**2) / denom
    return StatTestResult("cochran_q", q, (L - 1,), chi2_sf(q, L - 1), alpha)


def rm_anova_f(matrix, alpha: float = 0.05) -> StatTestResult:
    """One-way repeated-measures ANOVA on the 0/1 correctness entries.

    F = MS_classifiers / MS_residual with df1 = L-1, df2 = (L-1)(N-1).
    Zero residual variance is degenerate: p = 1 when the classifier effect is
    also zero, otherwise the statistic is infinite with p = 0.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("correctness matrix must be a non-empty N x L array")
    n, L = m.shape
    if n < 2 or L < 2:
        raise ValueError("need N >= 2 rows and L >= 2 classifiers")
    grand = m.mean()
    ss_subjects = L * float(np.sum((m.mean(axis=1) - grand) ** 2))
    ss_classifiers = n * float(np.sum((m.mean(axis=0) - grand) ** 2))
    ss_total = float(np.sum((m - grand) ** 2))
    ss_residual = ss_total - ss_subjects - ss_classifiers
    df1 = L - 1
    df2 = (L - 1) * (n - 1)
    ms_cls = ss_classifiers / df1
    ms_res = max(0.0, ss_residual) / df2
    if ms_res == 0.0:
        if ms_cls == 0.0:
            return StatTestResult("rm_anova_f", 0.0, (df1, df2), 1.0, alpha, degenerate=True)
        return StatTestResult("rm_anova_f", math.inf, (df1, df2), 0.0, alpha, degenerate=True)
    f = ms_cls / ms_res
    return StatTestResult("rm_anova_f", f, (df1, df2), f_sf(f, df1, df2), alpha)


def mcnemar(correct_a, correct_b, alpha: float = 0.05, exact_threshold: int = 25) -> StatTestResult:
    """McNemar's test on two binary correctness vectors.

    Uses the exact two-sided binomial p-value when the discordant count
    b + c is below exact_threshold, else the continuity-corrected chi-square
    statistic (|b - c| - 1)^2 / (b + c) with 1 dof.
    """
    a = np.asarray(correct_a, dtype=bool)
    b_vec = np.asarray(correct_b, dtype=bool)
    if a.shape != b_vec.shape:
        raise ValueError("correctness vectors must have equal length")
    b = int(np.sum(a & ~b_vec))
    c = int(np.sum(~a & b_vec))
    n = b + c
    if n == 0:
        return StatTestResult("mcnemar_exact", 0.0, (1,), 1.0, alpha, degenerate=True)
    if n < exact_threshold:
        k = min(b, c)
        tail = sum(math.comb(n, i) for i in range(k + 1)) / 2.0**n
        return StatTestResult("mcnemar_exact", float(k), (1,), min(1.0, 2.0 * tail), alpha)
    stat = (abs(b - c) - 1.0) ** 2 / n
    return StatTestResult("mcnemar_chi2", stat, (1,), chi2_sf(stat, 1), alpha)


def bonferroni(p_values, m: int | None = None) -> list[float]:
    """Bonferroni adjustment p' = min(1, m * p); m defaults to len(p_values)."""
    ps = list(p_values)
    if m is None:
        m = len(ps)
    if m < 1:
        raise ValueError("m must be at least 1")
    return [min(1.0, m * p) for p in ps]
