"""KL-RS PCA over subgroups with a projected-gradient feasibility oracle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DiscreteDistribution, TiltConfig, log_surrogate_mean
from ..exceptions import DomainError
from ..models import best_rank_residual, orthonormalize, pca_loss_grad, pca_reconstruction_loss, symmetric_eigh
from ..solver import SolverConfig, bisect_lambda, scaled_step, step_sizes


@dataclass(frozen=True)
class FairPCAResult:
    U: np.ndarray
    group_losses: np.ndarray
    lambda_star: float
    tau: float
    baseline_U: np.ndarray
    baseline_losses: np.ndarray
    trace: tuple = ()

    @property
    def gap(self) -> float:
        return float(self.group_losses.max() - self.group_losses.min())

    def average_loss(self, weights) -> float:
        return float(np.dot(weights, self.group_losses))


def standard_pca(groups, d: int) -> np.ndarray:
    """Top-d eigenvectors of the pooled second-moment matrix."""
    Y = np.vstack(groups)
    _, V = symmetric_eigh(Y.T @ Y)
    return V[:, :d].copy()


def group_losses(groups, U, residuals, normalize=True) -> np.ndarray:
    return np.array([pca_reconstruction_loss(Y, U, normalize=normalize, residual=r)
                     for Y, r in zip(groups, residuals)])


def fair_pca_run(groups, d: int, r: float, cfg: SolverConfig | None = None, normalize: bool = True) -> FairPCAResult:
    """Fair PCA through KL-RS with target ``tau = r * max + (1 - r) * min``.

    The max/min are the subgroup losses of standard PCA.  The projection is
    optimized by projected gradient on the normalized surrogate with a thin-QR
    retraction; ``cfg.tau`` is ignored and replaced by the derived target.
    """
    groups = [np.asarray(Y, float) for Y in groups]
    if not groups or any(Y.ndim != 2 or Y.shape[0] == 0 for Y in groups):
        raise DomainError("every group must be a nonempty a x n matrix")
    n = groups[0].shape[1]
    if any(Y.shape[1] != n for Y in groups):
        raise DomainError("groups differ in dimension")
    if not 1 <= d < n:
        raise DomainError("need 1 <= d < n")
    if not 0 <= r <= 1:
        raise DomainError("r must lie in [0, 1]")
    if np.linalg.matrix_rank(np.vstack(groups)) < d:
        raise DomainError("pooled data has rank below d")
    residuals = [best_rank_residual(Y, d) for Y in groups]
    weights = DiscreteDistribution.from_weights([Y.shape[0] for Y in groups])
    U0 = standard_pca(groups, d)
    base = group_losses(groups, U0, residuals, normalize)
    tau = float(r * base.max() + (1 - r) * base.min())
    cfg = SolverConfig(tau=tau) if cfg is None else cfg
    state = {"upper": None, "last": U0}

    def log_stat(U, lam):
        return log_surrogate_mean(group_losses(groups, U, residuals, normalize), TiltConfig(lam, tau), weights)

    def check(lam):
        U = U0
        if cfg.warm_start:
            U = state["upper"] if state["upper"] is not None else state["last"]
        losses = group_losses(groups, U, residuals, normalize)
        if losses.max() > tau:
            for gamma in step_sizes(cfg):
                e = (losses - tau) / lam
                m = float(e.max())
                coef = weights.probs * np.exp(e - m)
                G = sum(c * pca_loss_grad(Y, U, normalize=normalize) for c, Y in zip(coef, groups))
                step = scaled_step(G.ravel(), m - np.log(lam), gamma, cfg.clip_norm).reshape(U.shape)
                U = orthonormalize(U - step)
                losses = group_losses(groups, U, residuals, normalize)
        stat = log_stat(U, lam)
        state["last"] = U
        if stat <= 0:
            state["upper"] = U
        return bool(stat <= 0), U, float(np.exp(stat))

    lam, U, trace, _ = bisect_lambda(check, cfg.lambda_init, cfg.epsilon, cfg.max_doublings, cfg.lambda_floor)
    return FairPCAResult(U, group_losses(groups, U, residuals, normalize), lam, tau, U0, base, tuple(trace))


def gen_two_subspace_groups(sizes=(95, 5), n: int = 3, strong: float = 3.0, weak: float = 0.3, seed: int = 0):
    """Two groups whose dominant directions are orthogonal (axes 0 and 1)."""
    rng = np.random.default_rng(seed)
    out = []
    for j, a in enumerate(sizes):
        scale = np.full(n, weak)
        scale[j % n] = strong
        out.append(rng.normal(size=(a, n)) * scale[None, :])
    return out
