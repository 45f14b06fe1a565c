import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from klrs.exceptions import DomainError
from klrs.models import (
    Dataset,
    FixedLossModel,
    LeastSquaresModel,
    LogisticModel,
    PointEstimationModel,
    best_rank_residual,
    logistic_loss,
    orthonormalize,
    pca_loss_grad,
    pca_reconstruction_loss,
    point_estimation_loss,
    symmetric_eigh,
)


def central_diff(f, theta, h=1e-6):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def test_dataset_validation():
    with pytest.raises(DomainError):
        Dataset(np.zeros((3, 2)), labels=[1, 0])
    with pytest.raises(DomainError):
        Dataset(np.zeros((2, 2)), group_ids=[0, -1])
    d = Dataset(np.arange(6.0).reshape(3, 2), [0, 1, 0], [0, 1, 1])
    parts = d.split_groups()
    assert [len(p) for p in parts] == [1, 2]


def test_point_estimation_examples():
    assert point_estimation_loss([0, 0], [3, 4]) == 12.5
    m = PointEstimationModel()
    assert np.allclose(m.grad(np.array([1.0, 1.0]), np.array([0.0, 2.0])), [1.0, -1.0])
    with pytest.raises(DomainError):
        point_estimation_loss([0, 0], [1, 2, 3])


def test_logistic_examples():
    assert logistic_loss(np.zeros(3), np.array([1.0, 2.0]), 1) == pytest.approx(np.log(2))
    # no overflow for extreme scores
    v = logistic_loss(np.array([1e3, 0.0]), np.array([1.0]), 0)
    assert v == pytest.approx(1e3)


def test_fixed_model_is_parameter_free():
    m = FixedLossModel()
    d = Dataset(np.array([[0.3], [0.9]]))
    assert m.dim(d) == 0
    assert np.allclose(m.data_losses(np.zeros(0), d), [0.3, 0.9])


@pytest.mark.parametrize("model,with_y", [
    (PointEstimationModel(), False), (LogisticModel(), True), (LeastSquaresModel(), True)])
def test_gradients_match_finite_differences(model, with_y):
    rng = np.random.default_rng(1)
    X = rng.normal(size=(5, 3))
    y = rng.integers(0, 2, 5).astype(float) if isinstance(model, LogisticModel) else rng.normal(size=5)
    data = Dataset(X, y if with_y else None)
    for _ in range(20):
        theta = rng.normal(size=model.dim(data))
        G = model.data_grads(theta, data)
        for i in range(len(data)):
            fd = central_diff(lambda t: model.losses(t, X[i:i + 1], None if not with_y else y[i:i + 1])[0], theta)
            assert np.linalg.norm(G[i] - fd) <= 1e-6 * max(1.0, np.linalg.norm(fd))


def test_jacobi_known_matrix():
    w, V = symmetric_eigh([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(w, [3.0, 1.0], atol=1e-12)
    assert abs(abs(V[0, 0]) - 1 / np.sqrt(2)) < 1e-12


def test_jacobi_rejects_asymmetric():
    with pytest.raises(DomainError):
        symmetric_eigh([[1.0, 2.0], [0.0, 1.0]])


@given(st.integers(1, 7), st.integers(0, 10_000))
def test_jacobi_matches_numpy(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    S = A + A.T
    w, V = symmetric_eigh(S)
    assert np.all(np.diff(w) <= 1e-12)
    assert np.allclose(w, np.sort(np.linalg.eigvalsh(S))[::-1], atol=1e-9)
    assert np.allclose(S @ V, V * w[None, :], atol=1e-8)
    assert np.allclose(V.T @ V, np.eye(n), atol=1e-10)


def test_jacobi_tiny_offdiagonal():
    w, _ = symmetric_eigh([[1e10, 1e-300], [1e-300, -1e10]])
    assert np.allclose(w, [1e10, -1e10])


def test_pca_loss_zero_at_optimum_and_positive_elsewhere():
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(40, 3)) * np.array([3.0, 1.0, 0.3])
    _, V = symmetric_eigh(Y.T @ Y)
    assert abs(pca_reconstruction_loss(Y, V[:, :1])) < 1e-9
    assert pca_reconstruction_loss(Y, np.array([[0.0], [0.0], [1.0]])) > 0


def test_pca_grid_brute_force():
    # the best 1-d direction over a dense grid of unit vectors has (near) zero excess loss
    rng = np.random.default_rng(3)
    Y = rng.normal(size=(30, 2)) * np.array([2.0, 0.5])
    angles = np.linspace(0, np.pi, 20001)
    res = best_rank_residual(Y, 1)
    losses = [pca_reconstruction_loss(Y, np.array([[np.cos(a)], [np.sin(a)]]), residual=res) for a in angles]
    assert min(losses) >= -1e-9
    assert min(losses) < 1e-6
    assert best_rank_residual(Y, 1) == pytest.approx(np.linalg.svd(Y, compute_uv=False)[1] ** 2)


def test_pca_rejects_non_orthonormal():
    with pytest.raises(DomainError):
        pca_reconstruction_loss(np.ones((3, 2)), np.array([[1.0], [1.0]]))


def test_pca_gradient_fd():
    rng = np.random.default_rng(5)
    Y = rng.normal(size=(10, 4))
    U = orthonormalize(rng.normal(size=(4, 2)))
    G = pca_loss_grad(Y, U)

    def f(u):
        Uf = u.reshape(4, 2)
        YU = Y @ Uf
        # same objective without the orthonormality check
        return (np.sum(Y * Y) - np.sum(YU * YU)) / Y.shape[0]

    fd = central_diff(f, U.ravel()).reshape(4, 2)
    assert np.allclose(G, fd, atol=1e-6)


def test_orthonormalize_deterministic_sign():
    # R gets a positive diagonal, so the retraction keeps the direction of U
    U = orthonormalize(np.array([[-2.0], [0.0]]))
    assert np.allclose(U, [[-1.0], [0.0]])
    V = orthonormalize(np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]))
    assert np.allclose(V.T @ V, np.eye(2)) and V[0, 0] > 0 and V[1, 1] > 0
