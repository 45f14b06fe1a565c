import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from klrs.core import tilted_risk
from klrs.exceptions import DomainError, InfeasibleTargetError
from klrs.guarantees import tail_bound
from klrs.models import Dataset, FixedLossModel, LogisticModel, PointEstimationModel
from klrs.solver import (
    SolverConfig,
    bisect_lambda,
    erm_solve,
    feasibility_check,
    scaled_step,
    solve_klrs,
    surrogate_gradient,
    term_baseline,
    term_weights,
)


def fixed(losses):
    return Dataset(np.asarray(losses, float)[:, None])


def oracle_lambda(losses, tau):
    """Smallest lambda with tilted risk <= tau, by bracketing + bisection to machine precision."""
    lo, hi = 0.0, 1.0
    while tilted_risk(losses, hi) > tau:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tilted_risk(losses, mid) <= tau:
            hi = mid
        else:
            lo = mid
    return hi


def test_config_validation():
    with pytest.raises(DomainError):
        SolverConfig(tau=1.0, epsilon=0)
    with pytest.raises(DomainError):
        SolverConfig(tau=1.0, step_schedule="cosine")
    assert SolverConfig(tau=-5.0).lambda_floor == pytest.approx(5e-8)


def test_solve_two_point_example():
    res = solve_klrs(FixedLossModel(), fixed([0.0, 1.0]), SolverConfig(tau=0.7))
    assert res.feasible
    assert abs(res.lambda_star - 0.5552249) < 1e-4
    assert tilted_risk([0.0, 1.0], res.lambda_star) <= 0.7


def test_tau_at_or_below_erm_is_infeasible():
    with pytest.raises(InfeasibleTargetError):
        solve_klrs(FixedLossModel(), fixed([0.0, 1.0]), SolverConfig(tau=0.5))


def test_tau_above_max_gives_floor():
    res = solve_klrs(FixedLossModel(), fixed([0.0, 1.0]), SolverConfig(tau=2.0))
    assert res.lambda_star <= 1e-4


@given(st.lists(st.floats(0, 1), min_size=2, max_size=5), st.floats(0.2, 0.8))
def test_theta_free_matches_oracle(l, u):
    l = np.array(l)
    if l.max() - l.mean() < 1e-3:
        return
    tau = l.mean() + u * (l.max() - l.mean())
    res = solve_klrs(FixedLossModel(), fixed(l), SolverConfig(tau=tau))
    lam = oracle_lambda(l, tau)
    assert abs(res.lambda_star - lam) <= 1e-4 + 1e-12 * lam
    assert tilted_risk(l, res.lambda_star) <= tau


def test_bisect_lambda_bracket_invariant():
    calls = []

    def check(lam):
        calls.append(lam)
        return lam >= 3.3, lam, 0.0

    hi, payload, trace, brackets = bisect_lambda(check, 1.0, 1e-6, 60, 1e-8)
    assert 3.3 <= hi < 3.3 + 1e-6
    for lo, up in brackets:
        assert lo < 3.3 <= up
    assert [lo for lo, _ in brackets] == sorted(lo for lo, _ in brackets)


def test_bisect_lambda_gives_up():
    with pytest.raises(InfeasibleTargetError):
        bisect_lambda(lambda lam: (False, None, 1.0), 1.0, 1e-3, 5, 1e-8)


def test_surrogate_gradient_fd():
    rng = np.random.default_rng(2)
    data = Dataset(rng.normal(size=(6, 2)), rng.integers(0, 2, 6))
    m = LogisticModel()
    lam, tau = 0.7, 0.5
    for _ in range(20):
        theta = rng.normal(size=3)
        d, ls = surrogate_gradient(m, theta, data, lam, tau)
        g = math.exp(ls) * d

        def f(t):
            return float(np.mean(np.exp((m.data_losses(t, data) - tau) / lam)))

        fd = np.array([(f(theta + h) - f(theta - h)) / 2e-6 for h in np.eye(3) * 1e-6])
        assert np.linalg.norm(g - fd) <= 1e-4 * np.linalg.norm(fd)


def test_scaled_step_clips_without_overflow():
    s = scaled_step(np.array([3.0, 4.0]), 800.0, 0.1, 10.0)
    assert np.all(np.isfinite(s))
    assert np.linalg.norm(s) == pytest.approx(1.0)


def test_feasibility_check_skips_when_already_feasible():
    data = Dataset(np.array([[0.0, 0.0], [0.1, 0.0]]))
    ok, theta, mean = feasibility_check(PointEstimationModel(), data, 1.0, SolverConfig(tau=1.0),
                                        theta_init=np.zeros(2))
    assert ok and np.all(theta == 0) and mean <= 1


def test_erm_point_estimation_is_sample_mean():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    theta, e0 = erm_solve(PointEstimationModel(), Dataset(X),
                          SolverConfig(tau=0.0, batch_size=50, sgd_steps=500, step_size=0.5, step_schedule="constant"))
    assert np.allclose(theta, X.mean(axis=0), atol=1e-6)


def test_solver_deterministic():
    rng = np.random.default_rng(0)
    data = Dataset(rng.normal(size=(40, 2)))
    cfg = SolverConfig(tau=1.5, epsilon=1e-3, sgd_steps=100)
    a = solve_klrs(PointEstimationModel(), data, cfg)
    b = solve_klrs(PointEstimationModel(), data, cfg)
    assert a.lambda_star == b.lambda_star and np.array_equal(a.theta_star, b.theta_star)


def test_point_solve_feasible_and_tail_bound():
    rng = np.random.default_rng(4)
    data = Dataset(rng.normal(size=(60, 2)))
    m = PointEstimationModel()
    res = solve_klrs(m, data, SolverConfig(tau=1.6, epsilon=1e-3, batch_size=60, sgd_steps=300, step_size=0.1))
    l = m.data_losses(res.theta_star, data)
    assert tilted_risk(l, res.lambda_star) <= 1.6 + 1e-12
    for a in (0.16, 0.8, 1.6):
        assert np.mean(l >= 1.6 + a) <= tail_bound(res.lambda_star, a) + 1e-12


def test_term_weights_and_baseline():
    data = fixed([0.0, 1.0])
    q = term_weights(FixedLossModel(), data, np.zeros(0), 1.0)
    assert q[1] / q[0] == pytest.approx(math.e)
    # full-batch TERM on point estimation moves toward the larger-loss sample
    d = Dataset(np.array([[0.0], [0.0], [3.0]]))
    th = term_baseline(PointEstimationModel(), d, 0.5, SolverConfig(tau=0.0, sgd_steps=500, step_size=0.1))
    assert th[0] > 1.0
