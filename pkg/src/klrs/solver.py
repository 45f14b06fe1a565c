"""Flat KL-RS: a surrogate-SGD feasibility oracle driven by doubling + bisection on lambda.

Also holds the ERM reference solve and the TERM comparison baseline.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import TiltConfig, log_surrogate_mean, worst_case_weights
from .exceptions import DomainError, InfeasibleTargetError
from .models import Dataset, LossModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    epsilon: float = 1e-4
    lambda_init: float = 1.0
    max_doublings: int = 60
    sgd_steps: int = 500
    batch_size: int = 32
    step_size: float = 0.05
    step_schedule: str = "inverse-t"
    seed: int = 0
    warm_start: bool = True
    # cap on the gradient norm of one step; None disables clipping
    clip_norm: float | None = 10.0
    erm_check: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if not self.lambda_init > 0:
            raise DomainError("lambda_init must be positive")
        if self.batch_size < 1 or self.sgd_steps < 1:
            raise DomainError("batch_size and sgd_steps must be >= 1")
        if not self.step_size > 0:
            raise DomainError("step_size must be positive")
        if self.step_schedule not in ("constant", "inverse-t"):
            raise DomainError(f"unknown step schedule {self.step_schedule!r}")
        if self.max_doublings < 0:
            raise DomainError("max_doublings must be nonnegative")

    @property
    def lambda_floor(self) -> float:
        return 1e-8 * max(abs(self.tau), 1.0)


@dataclass(frozen=True)
class TraceEntry:
    lam: float
    objective: float
    feasible: bool


@dataclass(frozen=True)
class SolveResult:
    theta_star: np.ndarray
    lambda_star: float
    feasible: bool
    trace: tuple = ()
    brackets: tuple = ()


def step_sizes(cfg) -> np.ndarray:
    """Step size per iteration; inverse-t uses ``g0 / (1 + t / T0)``, ``T0 = steps / 10``."""
    t = np.arange(cfg.sgd_steps, dtype=float)
    if cfg.step_schedule == "constant":
        return np.full(cfg.sgd_steps, cfg.step_size)
    t0 = max(cfg.sgd_steps / 10.0, 1.0)
    return cfg.step_size / (1.0 + t / t0)


def scaled_step(direction, log_scale, gamma, clip_norm):
    """Return ``gamma * exp(log_scale) * direction`` with optional norm clipping.

    Keeping the exponential scale in log form lets the surrogate gradient be
    formed without overflow even when ``(l - tau) / lam`` is large.
    """
    nrm = np.linalg.norm(direction)
    if nrm == 0 or not np.isfinite(log_scale):
        return np.zeros_like(direction)
    if clip_norm is not None and log_scale + np.log(nrm) > np.log(clip_norm):
        return gamma * clip_norm * direction / nrm
    return gamma * np.exp(log_scale) * direction


def _batches(rng, n, batch_size, steps):
    """Mini-batch indices per step; None means the full data set."""
    if batch_size >= n:
        return [None] * steps
    return [rng.choice(n, size=batch_size, replace=False) for _ in range(steps)]


def surrogate_gradient(model: LossModel, theta, data: Dataset, lam, tau, idx=None):
    """Mini-batch gradient of the surrogate mean as ``(direction, log_scale)``.

    The gradient equals ``exp(log_scale) * direction`` with per-sample terms
    ``(1/lam) * exp((l - tau)/lam) * grad l``.
    """
    l = model.data_losses(theta, data, idx)
    G = model.data_grads(theta, data, idx)
    e = (l - tau) / lam
    m = float(np.max(e))
    direction = (np.exp(e - m) @ G) / len(l)
    return direction, m - np.log(lam)


def full_surrogate_log_mean(model, theta, data, lam, tau) -> float:
    return log_surrogate_mean(model.data_losses(theta, data), TiltConfig(lam, tau))


def feasibility_check(model: LossModel, data: Dataset, lam: float, cfg: SolverConfig, theta_init=None):
    """Decide whether some theta brings the surrogate mean to <= 1 at ``lam``.

    Runs ``cfg.sgd_steps`` mini-batch steps on the surrogate mean from
    ``theta_init`` and evaluates the full-data mean at the last iterate.

    Returns
    -------
    (feasible, theta, surrogate_mean)
    """
    if not np.isfinite(lam) or lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    theta = model.init_theta(data) if theta_init is None else np.array(theta_init, dtype=float)
    log_mean = full_surrogate_log_mean(model, theta, data, lam, cfg.tau)
    if theta.size and np.max(model.data_losses(theta, data)) > cfg.tau:
        rng = np.random.default_rng(cfg.seed)
        gammas = step_sizes(cfg)
        for gamma, idx in zip(gammas, _batches(rng, len(data), cfg.batch_size, cfg.sgd_steps)):
            direction, ls = surrogate_gradient(model, theta, data, lam, cfg.tau, idx)
            theta = theta - scaled_step(direction, ls, gamma, cfg.clip_norm)
        log_mean = full_surrogate_log_mean(model, theta, data, lam, cfg.tau)
    return bool(log_mean <= 0.0), theta, float(np.exp(log_mean))


def bisect_lambda(check: Callable, lam0: float, eps: float, max_doublings: int, floor: float):
    """Doubling then bisection on a monotone feasibility oracle.

    ``check(lam)`` returns ``(feasible, payload, objective)``.  The lower
    bracket starts at 0 and is never evaluated below ``floor``.

    Returns
    -------
    (lam_upper, payload_upper, trace, brackets)
    """
    trace, brackets = [], []
    lo, lam = 0.0, max(lam0, floor)
    for k in range(max_doublings + 1):
        ok, payload, obj = check(lam)
        trace.append(TraceEntry(lam, obj, ok))
        if ok:
            break
        lo, lam = lam, 2.0 * lam
    else:
        raise InfeasibleTargetError(
            f"target infeasible after {max_doublings} doublings (last lambda {lo:g})")
    hi, best = lam, payload
    brackets.append((lo, hi))
    while hi - lo >= eps:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break  # bracket below float resolution
        if mid < floor:
            if hi <= floor:
                break
            mid = floor
        ok, payload, obj = check(mid)
        trace.append(TraceEntry(mid, obj, ok))
        if ok:
            hi, best = mid, payload
        else:
            lo = mid
        brackets.append((lo, hi))
        if mid == floor and ok:
            break
    return hi, best, trace, brackets


def erm_solve(model: LossModel, data: Dataset, cfg: SolverConfig, theta_init=None):
    """Mini-batch SGD on the mean loss; returns ``(theta, full-data mean loss)``."""
    theta = model.init_theta(data) if theta_init is None else np.array(theta_init, dtype=float)
    if theta.size:
        rng = np.random.default_rng(cfg.seed)
        for gamma, idx in zip(step_sizes(cfg), _batches(rng, len(data), cfg.batch_size, cfg.sgd_steps)):
            g = model.data_grads(theta, data, idx).mean(axis=0)
            theta = theta - scaled_step(g, 0.0, gamma, cfg.clip_norm)
    return theta, float(np.mean(model.data_losses(theta, data)))


def solve_klrs(model: LossModel, data: Dataset, cfg: SolverConfig, theta_init=None) -> SolveResult:
    """Minimize lambda subject to the tilted risk at lambda being at most tau."""
    theta0 = model.init_theta(data) if theta_init is None else np.asarray(theta_init, float)
    if cfg.erm_check:
        theta0, e0 = erm_solve(model, data, cfg, theta0)
        if cfg.tau <= e0:
            raise InfeasibleTargetError(f"tau={cfg.tau:g} does not exceed the ERM loss {e0:g}")
    state = {"last": theta0, "upper": None}

    def check(lam):
        start = theta0
        if cfg.warm_start:
            start = state["upper"] if state["upper"] is not None else state["last"]
        ok, theta, obj = feasibility_check(model, data, lam, cfg, start)
        state["last"] = theta
        if ok:
            state["upper"] = theta
        log.debug("lambda=%g surrogate=%g feasible=%s", lam, obj, ok)
        return ok, theta, obj

    lam, theta, trace, brackets = bisect_lambda(
        check, cfg.lambda_init, cfg.epsilon, cfg.max_doublings, cfg.lambda_floor)
    return SolveResult(theta, lam, True, tuple(trace), tuple(brackets))


def term_weights(model: LossModel, data: Dataset, theta, lam) -> np.ndarray:
    """Per-sample weights of the exact tilted-risk gradient (softmax of l/lam)."""
    return worst_case_weights(model.data_losses(theta, data), lam).probs


def term_baseline(model: LossModel, data: Dataset, lam: float, cfg: SolverConfig, theta_init=None):
    """Full-batch gradient descent on the tilted risk at fixed ``lam``.

    The gradient is ``sum_i q_i grad l_i`` with ``q`` the softmax weights, so
    no mini-batch estimate of the normalizer is involved.
    """
    if not np.isfinite(lam) or lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam!r}")
    theta = model.init_theta(data) if theta_init is None else np.array(theta_init, dtype=float)
    if not theta.size:
        return theta
    for gamma in step_sizes(cfg):
        g = term_weights(model, data, theta, lam) @ model.data_grads(theta, data)
        theta = theta - scaled_step(g, 0.0, gamma, cfg.clip_norm)
    return theta


def tail_exceedance(losses, tau, alpha) -> float:
    """Empirical fraction of samples with loss strictly above ``tau + alpha``."""
    return float(np.mean(np.asarray(losses) > tau + alpha))
