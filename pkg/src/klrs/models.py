"""Loss models with analytic gradients, plus a Jacobi eigensolver for PCA losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


@dataclass
class Dataset:
    """Samples as rows of ``features`` with optional labels and group ids."""

    features: np.ndarray
    labels: np.ndarray | None = None
    group_ids: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DomainError("features must be an N x F matrix")
        self.features = X
        n = X.shape[0]
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (n,):
                raise DomainError("labels must have one entry per row")
        if self.group_ids is not None:
            g = np.asarray(self.group_ids)
            if g.shape != (n,) or (n and (g.min() < 0 or np.any(g != np.floor(g)))):
                raise DomainError("group_ids must be nonnegative integers, one per row")
            self.group_ids = g.astype(int)

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.features[idx],
            None if self.labels is None else self.labels[idx],
            None if self.group_ids is None else self.group_ids[idx],
        )

    def split_groups(self) -> list["Dataset"]:
        """One Dataset per group id in ``0 .. max(group_ids)``."""
        if self.group_ids is None:
            raise DomainError("dataset has no group ids")
        return [self.subset(np.flatnonzero(self.group_ids == g))
                for g in range(int(self.group_ids.max()) + 1)]


class LossModel:
    """Per-sample loss ``l(theta, z)`` with analytic gradient.

    Subclasses implement the batched ``losses``/``grads`` on a feature matrix
    and optional target vector; the single-sample ``loss``/``grad`` wrap them.
    """

    def dim(self, data: Dataset) -> int:
        raise NotImplementedError

    def losses(self, theta, X, y=None) -> np.ndarray:
        raise NotImplementedError

    def grads(self, theta, X, y=None) -> np.ndarray:
        """Row ``i`` is the gradient of sample ``i``'s loss, shape (B, dim)."""
        raise NotImplementedError

    def init_theta(self, data: Dataset) -> np.ndarray:
        return np.zeros(self.dim(data))

    def loss(self, theta, x, y=None) -> float:
        return float(self.losses(theta, np.atleast_2d(x), None if y is None else np.atleast_1d(y))[0])

    def grad(self, theta, x, y=None) -> np.ndarray:
        return self.grads(theta, np.atleast_2d(x), None if y is None else np.atleast_1d(y))[0]

    def data_losses(self, theta, data: Dataset, idx=None) -> np.ndarray:
        X, y = data.features, data.labels
        if idx is not None:
            X = X[idx]
            y = None if y is None else y[idx]
        return self.losses(theta, X, y)

    def data_grads(self, theta, data: Dataset, idx=None) -> np.ndarray:
        X, y = data.features, data.labels
        if idx is not None:
            X = X[idx]
            y = None if y is None else y[idx]
        return self.grads(theta, X, y)


class FixedLossModel(LossModel):
    """Parameter-free model: the loss of a sample is its first feature."""

    def dim(self, data):
        return 0

    def losses(self, theta, X, y=None):
        return np.asarray(X, dtype=float)[:, 0].copy()

    def grads(self, theta, X, y=None):
        return np.zeros((np.asarray(X).shape[0], 0))


def point_estimation_loss(theta, z) -> float:
    theta, z = np.asarray(theta, float), np.asarray(z, float)
    if theta.shape != z.shape:
        raise DomainError("theta and z dimensions differ")
    d = theta - z
    return 0.5 * float(d @ d)


class PointEstimationModel(LossModel):
    """``l(theta, z) = 0.5 * ||theta - z||^2``; gradient ``theta - z``."""

    def dim(self, data):
        return data.n_features

    def losses(self, theta, X, y=None):
        d = np.asarray(theta, float)[None, :] - X
        if d.shape[1] != np.size(theta):
            raise DomainError("theta and z dimensions differ")
        return 0.5 * np.einsum("ij,ij->i", d, d)

    def grads(self, theta, X, y=None):
        if X.shape[1] != np.size(theta):
            raise DomainError("theta and z dimensions differ")
        return np.asarray(theta, float)[None, :] - X


def _softplus(t):
    # log(1 + exp(t)) without overflow
    return np.logaddexp(0.0, t)


def _sigmoid(t):
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class LogisticModel(LossModel):
    """Linear score ``w.x + b`` through a sigmoid with cross-entropy loss.

    ``theta = (w, b)``.  The loss is evaluated as
    ``softplus(s) - y * s``, which never takes ``log 0``.
    """

    def dim(self, data):
        return data.n_features + 1

    def scores(self, theta, X):
        theta = np.asarray(theta, float)
        return X @ theta[:-1] + theta[-1]

    def losses(self, theta, X, y=None):
        s = self.scores(theta, X)
        return _softplus(s) - np.asarray(y, float) * s

    def grads(self, theta, X, y=None):
        r = _sigmoid(self.scores(theta, X)) - np.asarray(y, float)
        return np.hstack([r[:, None] * X, r[:, None]])


def logistic_loss(theta, x, y) -> float:
    return LogisticModel().loss(theta, x, y)


class LeastSquaresModel(LossModel):
    """``0.5 * (theta.x - y)^2``."""

    def dim(self, data):
        return data.n_features

    def losses(self, theta, X, y=None):
        r = X @ np.asarray(theta, float) - np.asarray(y, float)
        return 0.5 * r * r

    def grads(self, theta, X, y=None):
        r = X @ np.asarray(theta, float) - np.asarray(y, float)
        return r[:, None] * X


def least_squares_loss(theta, x, y) -> float:
    return LeastSquaresModel().loss(theta, x, y)


MODELS = {
    "fixed": FixedLossModel,
    "point": PointEstimationModel,
    "logistic": LogisticModel,
    "least_squares": LeastSquaresModel,
}


# --------------------------------------------------------------------------
# symmetric eigensolver and PCA reconstruction loss

def symmetric_eigh(S, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||S||_F)``.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Eigenvalues sorted in descending order; eigenvectors in the columns.
    """
    A = np.array(S, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError("matrix must be square")
    if A.size and np.max(np.abs(A - A.T)) >= 1e-10:
        raise DomainError("matrix is not symmetric")
    n = A.shape[0]
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    stop = tol * max(1.0, np.linalg.norm(A))

    def off(M):
        return np.sqrt(max(np.sum(M * M) - np.sum(np.diag(M) ** 2), 0.0))

    for _ in range(max_sweeps):
        if off(A) < stop:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                diff = A[q, q] - A[p, p]
                if abs(apq) < 1e-300 * max(abs(diff), 1.0):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = diff / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def _check_orthonormal(U, tol=1e-8):
    U = np.asarray(U, float)
    if U.ndim != 2:
        raise DomainError("U must be an n x d matrix")
    if np.max(np.abs(U.T @ U - np.eye(U.shape[1]))) > tol:
        raise DomainError("U does not have orthonormal columns")
    return U


def best_rank_residual(Y, d: int) -> float:
    """``||Y - Y_d||_F^2`` for the optimal rank-d approximation ``Y_d``."""
    w, _ = symmetric_eigh(Y.T @ Y)
    return float(max(np.sum(w[d:]), 0.0))


def pca_reconstruction_loss(Y, U, *, normalize: bool = True, residual: float | None = None) -> float:
    """Excess reconstruction error of projecting the rows of ``Y`` onto span(U).

    ``(||Y - Y U U^T||_F^2 - ||Y - Y_d||_F^2) / a`` for ``a`` rows; pass
    ``normalize=False`` to drop the ``1/a``.  ``residual`` may be given to
    reuse a precomputed ``||Y - Y_d||_F^2``.
    """
    Y = np.asarray(Y, float)
    U = _check_orthonormal(U)
    if residual is None:
        residual = best_rank_residual(Y, U.shape[1])
    YU = Y @ U
    err = float(np.sum(Y * Y) - np.sum(YU * YU)) - residual
    return err / Y.shape[0] if normalize else err


def pca_loss_grad(Y, U, *, normalize: bool = True) -> np.ndarray:
    """Euclidean gradient of :func:`pca_reconstruction_loss` with respect to U."""
    Y = np.asarray(Y, float)
    g = -2.0 * (Y.T @ (Y @ U))
    return g / Y.shape[0] if normalize else g


def orthonormalize(U) -> np.ndarray:
    """Thin-QR retraction with a sign fix so the result is deterministic."""
    Q, R = np.linalg.qr(np.asarray(U, float))
    s = np.sign(np.diag(R))
    s[s == 0] = 1.0
    return Q * s[None, :]
