"""Confidence calculators for KL-RS solutions, with Monte-Carlo checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DiscreteDistribution, kl_divergence, laplace_smooth
from .exceptions import AbsoluteContinuityError, BoundVacuousError, DomainError

_EPS = 1e-14
_TINY = 1e-300


@dataclass(frozen=True)
class GuaranteeReport:
    kind: str
    inputs: dict = field(default_factory=dict)
    value: float = 0.0

    def to_dict(self):
        return {"kind": self.kind, "inputs": dict(self.inputs), "value": self.value}


def _clamp01(x):
    return min(max(float(x), 0.0), 1.0)


def tail_bound(lam: float, alpha: float) -> float:
    """Upper bound ``exp(-alpha / lam)`` on the empirical frequency of ``l >= tau + alpha``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    return _clamp01(math.exp(-alpha / lam))


def _gammainc_series(a, x, max_iter):
    term = total = 1.0 / a
    ap = a
    for _ in range(max_iter):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gammaincc_cf(a, x, max_iter):
    # modified Lentz for the continued fraction of Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``.

    Series below ``x = a + 1``, continued fraction above.  The iteration cap
    is 300 plus a term growing like ``sqrt(a)``, which the series needs when
    ``x`` is close to a large ``a``.
    """
    if a <= 0:
        raise DomainError("a must be positive")
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    max_iter = 300 + 20 * int(math.ceil(math.sqrt(a)))
    if x < a + 1.0:
        return _clamp01(_gammainc_series(a, x, max_iter))
    return _clamp01(1.0 - _gammaincc_cf(a, x, max_iter))


def chi2_cdf(dof: int, y: float) -> float:
    """CDF of the chi-squared distribution with ``dof`` degrees of freedom."""
    if int(dof) != dof or dof < 1:
        raise DomainError("dof must be a positive integer")
    if y < 0:
        raise DomainError("y must be nonnegative")
    return regularized_gamma_p(dof / 2.0, y / 2.0)


def asymptotic_discrete_confidence(K: int, N: int, r: float) -> float:
    """Limiting confidence ``chi2_{K-1}(2 N r)`` for a K-point true distribution."""
    if K < 2:
        raise DomainError("K must be at least 2")
    if N < 1 or r < 0:
        raise DomainError("need N >= 1 and r >= 0")
    return chi2_cdf(K - 1, 2.0 * N * r)


def default_k_cap(C, lam, N, r) -> int:
    if r <= 0:
        return 2
    return int(min(max(10 * math.ceil(N * C / (r * lam)), 2), 100_000))


def asymptotic_continuous_confidence(C: float, lam: float, N: int, r: float, K_cap: int | None = None):
    """``max_{2 <= K <= K_cap} chi2_{K-1}(max(0, 2Nr - 2NC/(K lam)))``.

    Returns
    -------
    (value, argmax_K)
        ``argmax_K`` is the smallest K attaining the maximum.

    The scan stops early once ``chi2_{K-1}(2Nr)``, an upper bound for every
    larger K, cannot beat the incumbent.
    """
    if not (C >= 0 and lam > 0 and N >= 1 and r >= 0):
        raise DomainError("need C >= 0, lam > 0, N >= 1, r >= 0")
    if K_cap is None:
        K_cap = default_k_cap(C, lam, N, r)
    if K_cap < 2:
        raise DomainError("K_cap must be >= 2")
    best, best_k = 0.0, 2
    ceiling = 2.0 * N * r
    for K in range(2, K_cap + 1):
        if chi2_cdf(K - 1, ceiling) <= best:
            break
        y = max(0.0, ceiling - 2.0 * N * C / (K * lam))
        v = chi2_cdf(K - 1, y)
        if v > best:
            best, best_k = v, K
    return best, best_k


def chernoff_confidence(K: int, N: int, r: float) -> float:
    """Chernoff lower bound ``1 - (m e^{1-m})^{(K-1)/2}``, ``m = 2Nr/(K-1)``.

    Raises BoundVacuousError when ``m < 1``; ``m == 1`` gives 0.
    """
    if K < 2 or N < 1 or r < 0:
        raise DomainError("need K >= 2, N >= 1, r >= 0")
    m = 2.0 * N * r / (K - 1)
    if m < 1.0:
        raise BoundVacuousError(f"Chernoff bound is vacuous for m={m:g} < 1")
    log_term = 0.5 * (K - 1) * (math.log(m) + 1.0 - m)
    return _clamp01(1.0 - math.exp(log_term))


def chernoff_sample_size(K: int, r: float, confidence: float, n_max: int = 10**12) -> int:
    """Smallest N with ``chernoff_confidence(K, N, r) >= confidence``."""
    if not 0 < confidence < 1:
        raise DomainError("confidence must lie in (0, 1)")
    if r <= 0:
        raise DomainError("r must be positive")

    def ok(n):
        try:
            return chernoff_confidence(K, n, r) >= confidence
        except BoundVacuousError:
            return False

    hi = 1
    while not ok(hi):
        hi *= 2
        if hi > n_max:
            raise DomainError("target confidence not reached below n_max")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def finite_sample_radius(K: int, N: int, delta: float, expected_kl: float) -> float:
    """Radius ``E[KL] + (6 sqrt(K log^5(4K/delta)) + 311)/N + 160K/N^{3/2}``."""
    if not 0 < delta < 1:
        raise DomainError("delta must lie in (0, 1)")
    if K < 1 or N < 1 or expected_kl < 0:
        raise DomainError("need K >= 1, N >= 1, expected_kl >= 0")
    head = 6.0 * math.sqrt(K * math.log(4.0 * K / delta) ** 5) + 311.0
    return expected_kl + head / N + 160.0 * K / N ** 1.5


def _trial_rngs(seed, trials):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(trials)]


def monte_carlo_expected_kl(p_true, N: int, trials: int, seed: int = 0) -> float:
    """Mean of ``KL(p_true || laplace_smooth(counts))`` over multinomial draws of size N."""
    if trials < 1:
        raise DomainError("trials must be >= 1")
    p = p_true if isinstance(p_true, DiscreteDistribution) else DiscreteDistribution(p_true)
    total = 0.0
    for rng in _trial_rngs(seed, trials):
        counts = rng.multinomial(N, p.probs)
        total += kl_divergence(p, laplace_smooth(counts))
    return total / trials


def validate_asymptotic_coverage(p_true, N: int, r: float, trials: int, seed: int = 0) -> float:
    """Fraction of trials whose empirical distribution satisfies ``KL(p_true || P_hat) <= r``.

    Trials where the empirical distribution misses a support point (infinite
    divergence) count as misses.
    """
    p = p_true if isinstance(p_true, DiscreteDistribution) else DiscreteDistribution(p_true)
    if np.any(p.probs <= 0):
        raise DomainError("every entry of p_true must be positive")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    hits = 0
    for rng in _trial_rngs(seed, trials):
        counts = rng.multinomial(N, p.probs)
        try:
            hits += kl_divergence(p, counts / N) <= r
        except AbsoluteContinuityError:
            pass
    return hits / trials
