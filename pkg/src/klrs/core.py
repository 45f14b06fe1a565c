"""Tilted risk and the quantities derived from it.

Every exp/log aggregation is done in max-shifted log space.  For losses with
``|l| / lam`` up to about 1e300 nothing overflows; the documented working range
is ``|l| / lam <= 1e6``, where results keep full double precision relative to
the loss scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import AbsoluteContinuityError, DomainError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability vector on a finite support."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if p.ndim != 1 or p.size == 0:
            raise DomainError("probability vector must be 1-D and nonempty")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, n: int) -> "DiscreteDistribution":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, w) -> "DiscreteDistribution":
        """Normalize nonnegative weights to a distribution."""
        w = np.asarray(w, dtype=float)
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("weights must be a nonempty finite nonnegative vector")
        s = w.sum()
        if s <= 0:
            raise DomainError("weights sum to zero")
        return cls(w / s)

    def __len__(self):
        return self.probs.size


@dataclass(frozen=True)
class LossVector:
    """Per-sample losses with an optional sampling distribution (uniform by default)."""

    losses: np.ndarray
    weights: DiscreteDistribution | None = None

    def __post_init__(self):
        l = np.asarray(self.losses, dtype=float).reshape(-1).copy()
        if l.size == 0:
            raise DomainError("loss vector is empty")
        if not np.all(np.isfinite(l)):
            raise DomainError("losses must be finite")
        l.setflags(write=False)
        object.__setattr__(self, "losses", l)
        w = self.weights
        if w is None:
            w = DiscreteDistribution.uniform(l.size)
        elif not isinstance(w, DiscreteDistribution):
            w = DiscreteDistribution(w)
        if len(w) != l.size:
            raise DomainError("weights and losses differ in length")
        object.__setattr__(self, "weights", w)

    @property
    def probs(self) -> np.ndarray:
        return self.weights.probs

    def mean(self) -> float:
        return float(np.dot(self.probs, self.losses))

    def var(self) -> float:
        d = self.losses - self.mean()
        return float(np.dot(self.probs, d * d))

    def max(self) -> float:
        return float(self.losses[self.probs > 0].max())


@dataclass(frozen=True)
class TiltConfig:
    lam: float
    tau: float

    def __post_init__(self):
        _check_lambda(self.lam)


def as_loss_vector(losses, weights=None) -> LossVector:
    if isinstance(losses, LossVector):
        if weights is not None:
            return LossVector(losses.losses, weights)
        return losses
    return LossVector(losses, weights)


def _check_lambda(lam):
    if not np.isfinite(lam) or lam <= 0:
        raise DomainError(f"lambda must be positive and finite, got {lam!r}")


def _log_probs(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def log_mean_exp(a, p) -> float:
    """log(sum_i p_i exp(a_i) / sum_i p_i), accurate when the result is near 0.

    When the shifted sum is close to one the value is formed as
    ``log1p(mean(expm1(.)))`` so that tiny exponents (e.g. huge tilts) keep
    their relative precision.
    """
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    mask = p > 0
    a, p = a[mask], p[mask] / p[mask].sum()
    m = float(np.max(a))
    if not np.isfinite(m):
        return m
    d = a - m
    s = float(np.dot(p, np.exp(d)))
    if s > 0.5:
        return m + float(np.log1p(np.dot(p, np.expm1(d))))
    return m + float(np.log(s))


def tilted_risk(lv, lam: float, weights=None) -> float:
    """Tilted risk ``lam * log E_w[exp(l / lam)]``.

    Accepts a :class:`LossVector` or an array of losses (plus optional weights).
    The result is clamped into ``[weighted mean, max loss]`` to remove
    last-bit rounding outside the mathematically valid range.
    """
    _check_lambda(lam)
    lv = as_loss_vector(lv, weights)
    val = lam * log_mean_exp(lv.losses / lam, lv.probs)
    return float(min(max(val, lv.mean()), lv.max()))


def normalized_surrogate(lv, cfg: TiltConfig, weights=None) -> np.ndarray:
    """Per-sample ``exp((l - tau) / lam)``.

    The weighted mean is <= 1 exactly when the tilted risk is <= tau.
    """
    _check_lambda(cfg.lam)
    lv = as_loss_vector(lv, weights)
    return np.exp((lv.losses - cfg.tau) / cfg.lam)


def log_surrogate_mean(lv, cfg: TiltConfig, weights=None) -> float:
    """log of the weighted surrogate mean; equals (tilted_risk - tau) / lam."""
    _check_lambda(cfg.lam)
    lv = as_loss_vector(lv, weights)
    return log_mean_exp((lv.losses - cfg.tau) / cfg.lam, lv.probs)


def worst_case_weights(lv, lam: float, weights=None) -> DiscreteDistribution:
    """Maximizer of ``E_Q[l] - lam * KL(Q || P)``: ``Q_i ∝ P_i exp(l_i / lam)``."""
    _check_lambda(lam)
    lv = as_loss_vector(lv, weights)
    a = lv.losses / lam + _log_probs(lv.probs)
    q = np.exp(a - np.max(a))
    return DiscreteDistribution(q / q.sum())


def mean_variance_approx(lv, lam: float, weights=None) -> float:
    """Large-lambda expansion: weighted mean + variance / (2 lam)."""
    _check_lambda(lam)
    lv = as_loss_vector(lv, weights)
    return lv.mean() + lv.var() / (2.0 * lam)


def kl_divergence(q, p) -> float:
    """KL(q || p) with the convention 0 log 0 = 0.

    Raises
    ------
    AbsoluteContinuityError
        If some ``q_i > 0`` has ``p_i == 0``.
    """
    q = q.probs if isinstance(q, DiscreteDistribution) else DiscreteDistribution(q).probs
    p = p.probs if isinstance(p, DiscreteDistribution) else DiscreteDistribution(p).probs
    if q.size != p.size:
        raise DomainError("distributions differ in length")
    mask = q > 0
    if np.any(p[mask] == 0):
        raise AbsoluteContinuityError("q is not absolutely continuous w.r.t. p")
    val = float(np.sum(q[mask] * np.log(q[mask] / p[mask])))
    return max(val, 0.0)


def laplace_smooth(counts) -> DiscreteDistribution:
    """Add-one estimate ``(N_k + 1) / (N + K)``."""
    c = np.asarray(counts)
    if c.ndim != 1 or c.size == 0:
        raise DomainError("counts must be a nonempty vector")
    if np.any(c < 0) or np.any(c != np.floor(c)):
        raise DomainError("counts must be nonnegative integers")
    c = c.astype(float)
    return DiscreteDistribution((c + 1.0) / (c.sum() + c.size))
