"""Classification metrics and statistical model-comparison machinery.

AUROC is the Mann-Whitney concordance computed from ranks, AUPRC is stepwise
average precision with ties entering together. Comparison across models uses
paired bootstrap resampling, one-way repeated-measures ANOVA with folds as
subjects, and paired t-tests with Benjamini-Yekutieli FDR adjustment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import DegenerateVarianceError, EvaluationError, MetricError

_VAR_EPS = 1e-24


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """P(score+ > score-) + 0.5 P(tie), via rank statistics."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("auroc undefined: only one class present")
    ranks = sps.rankdata(scores)
    return float((ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def auprc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Average precision; tied scores are grouped (all tied items enter together)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise MetricError("auprc undefined: no positive labels")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        group_tp = int((y[i:j] == 1).sum())
        tp += group_tp
        seen += j - i
        if group_tp:
            ap += group_tp * (tp / seen)
        i = j
    return float(ap / n_pos)


@dataclass(frozen=True)
class BootstrapResult:
    fold_matrix: np.ndarray   # (folds, models)
    point: np.ndarray         # (models,) metric on the full test set
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    fold_seeds: tuple[int, ...]
    redraws: int


def paired_bootstrap(model_outputs, labels, metric, folds: int, seed,
                     max_redraws_per_fold: int = 100) -> BootstrapResult:
    """Resample test indices with replacement; the same resample is applied to
    every model within a fold (pairing).

    ``metric(outputs[idx], labels[idx]) -> float`` may raise MetricError on a
    degenerate resample, in which case the fold is redrawn and counted. If more
    than 10% of folds needed redraws, the evaluation fails.
    """
    labels = np.asarray(labels)
    outputs = [np.asarray(o) for o in model_outputs]
    n = len(labels)
    for o in outputs:
        if o.shape[0] != n:
            raise MetricError("all models must be scored on identical test rows")
    ss = np.random.SeedSequence(seed)
    fold_seeds = tuple(int(s.generate_state(1)[0]) for s in ss.spawn(folds))
    point = np.array([metric(o, labels) for o in outputs])
    fold_matrix = np.empty((folds, len(outputs)))
    redraws = 0
    folds_redrawn = 0
    for f, fseed in enumerate(fold_seeds):
        rng = np.random.default_rng(fseed)
        attempts = 0
        while True:
            idx = rng.integers(0, n, size=n)
            try:
                vals = [metric(o[idx], labels[idx]) for o in outputs]
                break
            except MetricError:
                attempts += 1
                redraws += 1
                if attempts > max_redraws_per_fold:
                    raise EvaluationError(
                        f"fold {f}: metric still undefined after {attempts} redraws")
        if attempts:
            folds_redrawn += 1
        fold_matrix[f] = vals
    if folds_redrawn > 0.1 * folds:
        raise EvaluationError(
            f"metric undefined on {folds_redrawn}/{folds} folds before redraw")
    lo = np.percentile(fold_matrix, 2.5, axis=0)
    hi = np.percentile(fold_matrix, 97.5, axis=0)
    return BootstrapResult(fold_matrix, point, lo, hi, fold_seeds, redraws)


def rm_anova(fold_matrix: np.ndarray) -> tuple[float, int, int, float]:
    """One-way repeated-measures ANOVA with folds as subjects.

    Returns (F, df1, df2, p) with df1 = models-1, df2 = (models-1)(folds-1).
    """
    fm = np.asarray(fold_matrix, dtype=np.float64)
    n, k = fm.shape
    if k < 2 or n < 2:
        raise MetricError("rm_anova needs >= 2 models and >= 2 folds")
    grand = fm.mean()
    col_means = fm.mean(axis=0)
    row_means = fm.mean(axis=1)
    ss_models = n * np.sum((col_means - grand) ** 2)
    ss_subjects = k * np.sum((row_means - grand) ** 2)
    ss_total = np.sum((fm - grand) ** 2)
    ss_error = ss_total - ss_models - ss_subjects
    df1 = k - 1
    df2 = (k - 1) * (n - 1)
    if ss_models <= _VAR_EPS * max(1.0, abs(ss_total)):
        return 0.0, df1, df2, 1.0
    ms_error = ss_error / df2
    if ms_error <= _VAR_EPS * max(1.0, abs(ss_total)):
        raise DegenerateVarianceError("rm_anova: zero error variance")
    F = (ss_models / df1) / ms_error
    p = float(sps.f.sf(F, df1, df2))
    return float(F), df1, df2, p


def benjamini_yekutieli(pvals: np.ndarray) -> np.ndarray:
    """BY adjustment: p_(k) * m * c(m) / k, capped at 1, monotone in rank."""
    p = np.asarray(pvals, dtype=np.float64)
    m = len(p)
    if m == 0:
        return p.copy()
    c = np.sum(1.0 / np.arange(1, m + 1))
    order = np.argsort(p, kind="stable")
    ranked = p[order]
    adj = np.minimum(1.0, ranked * m * c / np.arange(1, m + 1))
    # enforce monotonicity from the largest rank down
    adj = np.minimum.accumulate(adj[::-1])[::-1]
    out = np.empty(m)
    out[order] = adj
    return out


@dataclass(frozen=True)
class PairResult:
    i: int
    j: int
    t: float | None
    df: int
    p_raw: float | None
    p_adjusted: float | None
    degenerate: bool


def paired_ttests_fdr(fold_matrix: np.ndarray) -> list[PairResult]:
    """Two-sided paired t-tests on per-fold differences for every model pair,
    with Benjamini-Yekutieli adjustment over the non-degenerate pairs."""
    fm = np.asarray(fold_matrix, dtype=np.float64)
    n, k = fm.shape
    if n < 2 or k < 2:
        raise MetricError("paired tests need >= 2 folds and >= 2 models")
    results = []
    raw = []
    for i in range(k):
        for j in range(i + 1, k):
            diff = fm[:, i] - fm[:, j]
            sd = diff.std(ddof=1)
            if sd <= 0:
                results.append(PairResult(i, j, None, n - 1, None, None, True))
                continue
            t = diff.mean() / (sd / np.sqrt(n))
            p = 2.0 * float(sps.t.sf(abs(t), n - 1))
            results.append(PairResult(i, j, float(t), n - 1, p, None, False))
            raw.append(p)
    adjusted = benjamini_yekutieli(np.array(raw))
    it = iter(adjusted)
    out = []
    for r in results:
        if r.degenerate:
            out.append(r)
        else:
            out.append(PairResult(r.i, r.j, r.t, r.df, r.p_raw, float(next(it)), False))
    return out
