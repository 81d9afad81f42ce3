"""ROC sweeps and per-label score summaries.

The ROC sweeps thresholds over the unique score values (predicted positive
means score >= threshold), so the curve starts at (0, 0) under an implicit
+inf threshold and ends at (1, 1). The trapezoid area under that curve is
exactly the Mann-Whitney statistic with ties counted half, which the tests
use as an independent oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube_io import PlumeMask, ScoreMap


@dataclass(frozen=True)
class RocCurve:
    thresholds: np.ndarray  # descending; leading +inf gives the (0, 0) point
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def _flat_values(obj, kind):
    if isinstance(obj, ScoreMap):
        return obj.values.reshape(-1)
    if isinstance(obj, PlumeMask):
        return obj.values.reshape(-1)
    arr = np.asarray(obj)
    if arr.ndim == 0:
        raise ValueError(f"{kind} must be array-like")
    return arr.reshape(-1)


def roc(scores, truth) -> RocCurve:
    """ROC curve and AUC of scores against boolean truth.

    Requires both classes present. Ties share a threshold point, which is
    what makes the trapezoid area equal the half-tie Mann-Whitney statistic.
    """
    s = np.asarray(_flat_values(scores, "scores"), dtype=np.float64)
    t = np.asarray(_flat_values(truth, "truth")).astype(bool)
    if s.shape != t.shape:
        raise ValueError(f"scores ({s.shape}) and truth ({t.shape}) differ in length")
    n_pos = int(t.sum())
    n_neg = t.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(f"need both classes in truth, got {n_pos} positive / {n_neg} negative")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    t_sorted = t[order]
    # collapse ties: keep the last index of each run of equal scores
    last = np.flatnonzero(np.diff(s_sorted) != 0.0)
    last = np.append(last, s.shape[0] - 1)
    tp = np.cumsum(t_sorted)[last]
    fp = np.cumsum(~t_sorted)[last]
    thresholds = np.concatenate([[np.inf], s_sorted[last]])
    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auc=auc)


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("threshold,fpr,tpr\n")
        for th, f, t in zip(curve.thresholds, curve.fpr, curve.tpr):
            # plain float repr round trips the value and avoids numpy's
            # np.float64(...) scalar repr
            fh.write(f"{float(th)!r},{float(f)!r},{float(t)!r}\n")


@dataclass(frozen=True)
class GroupSummary:
    """Boxplot statistics: quartiles, 1.5 IQR whiskers, and the outlier count."""

    count: int
    median: float
    q25: float
    q75: float
    whisker_lo: float
    whisker_hi: float
    n_outliers: int


def group_summary(scores, labels) -> dict:
    """Per-label GroupSummary over the scores; quartiles use linear interpolation."""
    s = np.asarray(_flat_values(scores, "scores"), dtype=np.float64)
    lab = np.asarray(labels).reshape(-1)
    if s.shape != lab.shape:
        raise ValueError(f"scores ({s.shape}) and labels ({lab.shape}) differ in length")
    out = {}
    for name in np.unique(lab):
        vals = s[lab == name]
        q25, med, q75 = np.percentile(vals, [25.0, 50.0, 75.0])
        reach = 1.5 * (q75 - q25)
        inside = vals[(vals >= q25 - reach) & (vals <= q75 + reach)]
        out[str(name)] = GroupSummary(
            count=int(vals.shape[0]),
            median=float(med),
            q25=float(q25),
            q75=float(q75),
            whisker_lo=float(inside.min()),
            whisker_hi=float(inside.max()),
            n_outliers=int(vals.shape[0] - inside.shape[0]),
        )
    return out
