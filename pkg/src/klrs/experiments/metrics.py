"""Classification and rank-error metrics, plus heuristics for choosing tau."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import DomainError, InfeasibleTargetError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn

    def mcc(self) -> float:
        """Matthews correlation; 0 when any marginal count is zero."""
        den = (self.tp + self.fp) * (self.tp + self.fn) * (self.tn + self.fp) * (self.tn + self.fn)
        if den == 0:
            return 0.0
        return (self.tp * self.tn - self.fp * self.fn) / math.sqrt(den)

    def f1(self) -> float:
        den = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / den if den else 0.0

    def accuracy(self) -> float:
        if self.total < 1:
            raise DomainError("no samples")
        return (self.tp + self.tn) / self.total


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    acc_pos: float
    acc_neg: float
    f1: float
    mcc: float
    rank_error_var: float
    rank_error_cvar: float
    alpha: float

    def to_dict(self):
        return asdict(self)


def confusion(pred, labels) -> ConfusionCounts:
    pred = np.asarray(pred).astype(bool)
    y = np.asarray(labels).astype(bool)
    return ConfusionCounts(int(np.sum(pred & y)), int(np.sum(~pred & ~y)),
                           int(np.sum(pred & ~y)), int(np.sum(~pred & y)))


def rank_errors(scores, labels) -> np.ndarray:
    """``h(x_-) - h(x_+)`` over every positive/negative pair."""
    s = np.asarray(scores, float)
    y = np.asarray(labels).astype(bool)
    if not y.any() or y.all():
        raise DomainError("rank errors need at least one positive and one negative")
    return (s[~y][:, None] - s[y][None, :]).ravel()


def value_at_risk(values, alpha: float) -> float:
    """Lower alpha-quantile ``min{a : P(v <= a) >= alpha}`` of an empirical sample."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    v = np.sort(np.asarray(values, float))
    k = max(int(math.ceil(alpha * v.size - 1e-9)), 1)
    return float(v[k - 1])


def conditional_value_at_risk(values, alpha: float) -> float:
    """Mean of the sample values at or above the alpha-VaR."""
    v = np.asarray(values, float)
    var = value_at_risk(v, alpha)
    return float(v[v >= var].mean())


def metrics_from_scores(scores, labels, threshold: float = 0.0, alpha: float = 0.9) -> MetricsReport:
    """Threshold metrics (positive when ``score >= threshold``) plus rank-error VaR/CVaR."""
    s = np.asarray(scores, float)
    y = np.asarray(labels).astype(int)
    cc = confusion(s >= threshold, y)
    n_pos, n_neg = cc.tp + cc.fn, cc.tn + cc.fp
    errs = rank_errors(s, y)
    return MetricsReport(
        acc=cc.accuracy(),
        acc_pos=cc.tp / n_pos,
        acc_neg=cc.tn / n_neg,
        f1=cc.f1(),
        mcc=cc.mcc(),
        rank_error_var=value_at_risk(errs, alpha),
        rank_error_cvar=conditional_value_at_risk(errs, alpha),
        alpha=alpha,
    )


def erm_stats(losses) -> dict:
    l = np.asarray(losses, float)
    return {"mean": float(l.mean()), "min": float(l.min()), "max": float(l.max()), "var": float(l.var())}


def select_tau(strategy: str, a: float, stats: dict) -> float:
    """Loss target from ERM loss statistics.

    ``scale_erm``: ``a * mean`` (a >= 1); ``minmax_mix``: ``a * max + (1 - a) * min``
    (a in [0, 1], must land at or above the mean); ``mean_plus_var``:
    ``mean + a * var`` (a >= 0).
    """
    if strategy == "scale_erm":
        if a < 1:
            raise DomainError("scale_erm needs a >= 1")
        return a * stats["mean"]
    if strategy == "minmax_mix":
        if not 0 <= a <= 1:
            raise DomainError("minmax_mix needs a in [0, 1]")
        tau = a * stats["max"] + (1 - a) * stats["min"]
        if tau < stats["mean"]:
            raise InfeasibleTargetError(f"tau={tau:g} is below the ERM loss {stats['mean']:g}; increase a")
        return tau
    if strategy == "mean_plus_var":
        if a < 0:
            raise DomainError("mean_plus_var needs a >= 0")
        return stats["mean"] + a * stats["var"]
    raise DomainError(f"unknown strategy {strategy!r}")
