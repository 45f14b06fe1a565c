"""Hierarchical KL-RS with separate fragilities for group and within-group shift.

The within-group fragility is found by bisection for each group fragility,
which in turn is chosen by golden-ratio search.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import DiscreteDistribution, LossVector, TiltConfig, log_mean_exp, log_surrogate_mean, tilted_risk
from .exceptions import DomainError, InfeasibleTargetError
from .models import Dataset, LossModel
from .solver import bisect_lambda, scaled_step, step_sizes

log = logging.getLogger(__name__)

GOLDEN_GAMMA = 0.382


@dataclass
class GroupedDataset:
    """Samples partitioned by group, with a distribution over groups."""

    groups: list
    group_weights: DiscreteDistribution | None = None

    def __post_init__(self):
        if len(self.groups) < 1:
            raise DomainError("need at least one group")
        if any(len(g) == 0 for g in self.groups):
            raise DomainError("every group must be nonempty")
        if self.group_weights is None:
            self.group_weights = DiscreteDistribution.from_weights([len(g) for g in self.groups])
        elif not isinstance(self.group_weights, DiscreteDistribution):
            self.group_weights = DiscreteDistribution(self.group_weights)
        if len(self.group_weights) != len(self.groups):
            raise DomainError("one weight per group required")

    @classmethod
    def from_dataset(cls, data: Dataset, weighting: str = "empirical") -> "GroupedDataset":
        """Split by ``data.group_ids``; ``weighting`` is 'empirical' or 'uniform'."""
        groups = data.split_groups()
        if weighting == "uniform":
            return cls(groups, DiscreteDistribution.uniform(len(groups)))
        if weighting != "empirical":
            raise DomainError(f"unknown weighting {weighting!r}")
        return cls(groups)

    @property
    def n_groups(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class HierConfig:
    tau: float
    w: float = 0.0
    epsilon: float = 1e-4
    lambda_min: float | None = None
    lambda_max: float | None = None
    lambda2_init: float = 1.0
    max_doublings: int = 60
    M1: int | None = None
    M2: int = 32
    sgd_steps: int = 500
    step_size: float = 0.05
    step_schedule: str = "inverse-t"
    seed: int = 0
    warm_start: bool = True
    clip_norm: float | None = 10.0
    gamma: float = GOLDEN_GAMMA

    def __post_init__(self):
        if self.w < 0:
            raise DomainError("w must be nonnegative")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.M2 < 1 or (self.M1 is not None and self.M1 < 1):
            raise DomainError("batch sizes must be >= 1")
        if self.sgd_steps < 1:
            raise DomainError("sgd_steps must be >= 1")
        if self.step_schedule not in ("constant", "inverse-t"):
            raise DomainError(f"unknown step schedule {self.step_schedule!r}")
        lo, hi = self.bracket
        if not 0 < lo < hi:
            raise DomainError("need 0 < lambda_min < lambda_max")

    @property
    def bracket(self):
        scale = max(abs(self.tau), 1e-12)
        lo = 1e-3 * scale if self.lambda_min is None else self.lambda_min
        hi = 1e3 * scale if self.lambda_max is None else self.lambda_max
        return lo, hi

    @property
    def lambda_floor(self) -> float:
        return 1e-8 * max(abs(self.tau), 1.0)

    def m1(self, n_groups: int) -> int:
        return min(n_groups, 8) if self.M1 is None else self.M1


@dataclass(frozen=True)
class HierSolveResult:
    theta_star: np.ndarray
    lambda1_star: float
    lambda2_star: float
    feasible: bool
    trace: tuple = ()


def _check_pos(*lams):
    for lam in lams:
        if not np.isfinite(lam) or lam <= 0:
            raise DomainError(f"lambda must be positive, got {lam!r}")


def _default_weights(group_losses, group_weights):
    if group_weights is None:
        return DiscreteDistribution.from_weights([len(LossVector(g).losses) for g in group_losses])
    if isinstance(group_weights, DiscreteDistribution):
        return group_weights
    return DiscreteDistribution(group_weights)


def hier_tilted_risk(group_losses, lambda1, lambda2, group_weights=None) -> float:
    """Nested tilted risk: tilt ``lambda1`` over per-group tilted risks at ``lambda2``.

    ``group_losses`` is a sequence of loss arrays (or LossVectors).  Group
    weights default to the group sizes.
    """
    _check_pos(lambda1, lambda2)
    gw = _default_weights(group_losses, group_weights)
    inner = np.array([tilted_risk(g, lambda2) for g in group_losses])
    return tilted_risk(inner, lambda1, gw)


def hier_log_statistic(group_losses, tau, lambda1, lambda2, group_weights=None) -> float:
    """log of ``E_g[(E_{z|g} exp((l - tau)/lambda2))^(lambda2/lambda1)]``.

    The statistic is <= 1 (log <= 0) exactly when the nested tilted risk is
    <= tau; in log form it equals ``(risk - tau) / lambda1``.
    """
    _check_pos(lambda1, lambda2)
    gw = _default_weights(group_losses, group_weights)
    rho = lambda2 / lambda1
    inner = np.array([log_surrogate_mean(g, TiltConfig(lambda2, tau)) for g in group_losses])
    return log_mean_exp(rho * inner, gw.probs)


def h_outer(x, lambda1, lambda2):
    """``x ** (lambda2 / lambda1)`` for ``x > 0``."""
    _check_pos(lambda1, lambda2)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("h is defined for positive x only")
    out = x ** (lambda2 / lambda1)
    return float(out) if out.ndim == 0 else out


def h_outer_grad(x, lambda1, lambda2):
    _check_pos(lambda1, lambda2)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("h is defined for positive x only")
    rho = lambda2 / lambda1
    out = rho * x ** (rho - 1.0)
    return float(out) if out.ndim == 0 else out


def group_klrs_risk(group_mean_losses, lam, group_weights=None) -> float:
    """Tilted risk of per-group mean losses (no within-group shift)."""
    return tilted_risk(group_mean_losses, lam, group_weights)


def _group_losses(model, theta, gdata):
    return [model.data_losses(theta, g) for g in gdata.groups]


def full_hier_log_statistic(model, theta, gdata, tau, lambda1, lambda2) -> float:
    return hier_log_statistic(_group_losses(model, theta, gdata), tau, lambda1, lambda2,
                              gdata.group_weights)


def hier_gradient(model, theta, gdata, tau, lambda1, lambda2, group_idx, group_w, within_idx):
    """Hierarchical mini-batch gradient as ``(direction, log_scale)``.

    Each sampled group contributes ``h'(fbar) * grad fbar`` where ``fbar`` is
    the within-batch surrogate mean.  Plugging the batch mean into ``h'``
    makes the estimator biased; the bias shrinks as the within-group batch
    grows.
    """
    rho = lambda2 / lambda1
    dirs, scales = [], []
    for g, idx in zip(group_idx, within_idx):
        data = gdata.groups[g]
        l = model.data_losses(theta, data, idx)
        G = model.data_grads(theta, data, idx)
        e = (l - tau) / lambda2
        m = float(np.max(e))
        p = np.exp(e - m)
        s = m + math.log(np.mean(p))              # log fbar
        dirs.append((p @ G) / len(l))             # grad fbar = exp(m) * d / lambda2
        scales.append((rho - 1.0) * s + m + math.log(rho / lambda2))
    scales = np.asarray(scales)
    c = float(np.max(scales))
    coef = np.asarray(group_w) * np.exp(scales - c)
    return coef @ np.vstack(dirs), c


def hier_feasibility(model: LossModel, gdata: GroupedDataset, lambda1, lambda2, cfg: HierConfig,
                     theta_init=None):
    """Feasibility of ``(lambda1, lambda2)``.

    SGD with hierarchical batches: ``M1`` groups drawn from the group
    weights (all groups, weighted, when ``M1 >= G``), then ``M2`` samples per
    group (the whole group when it is smaller).  The verdict uses the
    full-data statistic at the last iterate.

    Returns
    -------
    (feasible, theta, statistic)
    """
    _check_pos(lambda1, lambda2)
    theta = model.init_theta(gdata.groups[0]) if theta_init is None else np.array(theta_init, float)
    needs_steps = theta.size and max(
        float(np.max(l)) for l in _group_losses(model, theta, gdata)) > cfg.tau
    if needs_steps:
        rng = np.random.default_rng(cfg.seed)
        G = gdata.n_groups
        m1 = cfg.m1(G)
        probs = gdata.group_weights.probs
        for gamma in step_sizes(cfg):
            if m1 >= G:
                gidx, gw = np.arange(G), probs
            else:
                gidx = rng.choice(G, size=m1, replace=True, p=probs)
                gw = np.full(m1, 1.0 / m1)
            widx = []
            for g in gidx:
                n = len(gdata.groups[g])
                widx.append(None if cfg.M2 >= n else rng.choice(n, size=cfg.M2, replace=False))
            direction, ls = hier_gradient(model, theta, gdata, cfg.tau, lambda1, lambda2, gidx, gw, widx)
            theta = theta - scaled_step(direction, ls, gamma, cfg.clip_norm)
    stat = full_hier_log_statistic(model, theta, gdata, cfg.tau, lambda1, lambda2)
    return bool(stat <= 0.0), theta, float(np.exp(stat))


def solve_lambda2(model: LossModel, gdata: GroupedDataset, lambda1, cfg: HierConfig, theta_init=None):
    """Smallest feasible ``lambda2`` at fixed ``lambda1`` by doubling + bisection.

    Returns
    -------
    (lambda2, theta, trace)
    """
    _check_pos(lambda1)
    theta0 = model.init_theta(gdata.groups[0]) if theta_init is None else np.asarray(theta_init, float)
    state = {"last": theta0, "upper": None}

    def check(lam2):
        start = theta0
        if cfg.warm_start:
            start = state["upper"] if state["upper"] is not None else state["last"]
        ok, theta, stat = hier_feasibility(model, gdata, lambda1, lam2, cfg, start)
        state["last"] = theta
        if ok:
            state["upper"] = theta
        return ok, theta, stat

    lam2, theta, trace, _ = bisect_lambda(
        check, cfg.lambda2_init, cfg.epsilon, cfg.max_doublings, cfg.lambda_floor)
    return lam2, theta, tuple(trace)


def solve_hier(model: LossModel, gdata: GroupedDataset, cfg: HierConfig, theta_init=None) -> HierSolveResult:
    """Minimize ``lambda1 + w * H(lambda1)`` over the bracket by golden-ratio search.

    ``H(lambda1)`` is the smallest feasible ``lambda2``; it is infinite where
    no ``lambda2`` works.  Returns the best pair evaluated.
    """
    lo, hi = cfg.bracket
    gamma = cfg.gamma
    theta_cur = model.init_theta(gdata.groups[0]) if theta_init is None else np.asarray(theta_init, float)
    memo = {}
    trace = []
    best = {"obj": math.inf}

    def objective(lam1):
        nonlocal theta_cur
        if lam1 in memo:
            return memo[lam1]
        try:
            lam2, theta, _ = solve_lambda2(model, gdata, lam1, cfg, theta_cur)
        except InfeasibleTargetError:
            memo[lam1] = math.inf
            trace.append((lam1, math.inf, math.inf))
            return math.inf
        if cfg.warm_start:
            theta_cur = theta
        obj = lam1 + cfg.w * lam2
        memo[lam1] = obj
        trace.append((lam1, lam2, obj))
        if obj < best["obj"]:
            best.update(obj=obj, lam1=lam1, lam2=lam2, theta=theta)
        return obj

    while hi - lo >= cfg.epsilon:
        left = lo + gamma * (hi - lo)
        right = lo + (1.0 - gamma) * (hi - lo)
        if objective(left) <= objective(right):
            hi = right
        else:
            lo = left
        log.debug("golden bracket [%g, %g]", lo, hi)
    if not math.isfinite(best["obj"]):
        raise InfeasibleTargetError("no feasible lambda1 found in the search bracket")
    return HierSolveResult(best["theta"], best["lam1"], best["lam2"], True, tuple(trace))
