"""End-to-end experiment drivers returning plain result rows."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..core import tilted_risk, worst_case_weights
from ..hierarchical import GroupedDataset, HierConfig, solve_hier
from ..models import Dataset, LogisticModel, PointEstimationModel
from ..solver import SolverConfig, erm_solve, solve_klrs
from .data import label_shift_proportions, label_shift_test_set
from .metrics import metrics_from_scores

TOY_TAU_FACTORS = (1.05, 1.15, 1.3, 1.45, 1.6)
TOY_SOLVER = dict(batch_size=100, sgd_steps=1000, step_size=0.1, epsilon=1e-3)


def loss_summary(losses) -> dict:
    l = np.asarray(losses, float)
    return {"mean": float(l.mean()), "max": float(l.max()), "var": float(l.var())}


def toy_tau_sweep(data: Dataset, tau_factors=TOY_TAU_FACTORS, seed: int = 0, **solver_kw):
    """Solve the point-estimation KL-RS for ``tau = factor * E0`` over a grid.

    Returns the ERM loss ``E0`` and one row per target with the solution,
    loss statistics and the worst-case mass on group 1 (the minority cluster).
    """
    model = PointEstimationModel()
    kw = {**TOY_SOLVER, **solver_kw, "seed": seed}
    _, e0 = erm_solve(model, data, SolverConfig(tau=0.0, **kw))
    rows = []
    for f in tau_factors:
        tau = float(f * e0)
        res = solve_klrs(model, data, SolverConfig(tau=tau, **kw))
        l = model.data_losses(res.theta_star, data)
        q = worst_case_weights(l, res.lambda_star).probs
        minority = float(q[data.group_ids == 1].sum()) if data.group_ids is not None else float("nan")
        rows.append({
            "tau": tau,
            "lambda_star": res.lambda_star,
            "theta": res.theta_star.tolist(),
            **loss_summary(l),
            "tilted_risk": tilted_risk(l, res.lambda_star),
            "minority_weight": minority,
            "result": res,
        })
    return e0, rows


def label_shift_experiment(train: Dataset, pos_pool: Dataset, neg_pool: Dataset, tau_factor: float,
                           kls=(0.0, 0.05, 0.1, 0.15, 0.2), test_size: int = 200, seed: int = 0,
                           **solver_kw):
    """Train ERM and KL-RS logistic models, then score test sets shifted toward positives."""
    model = LogisticModel()
    cfg = SolverConfig(tau=0.0, seed=seed, **solver_kw)
    theta_erm, e0 = erm_solve(model, train, cfg)
    res = solve_klrs(model, train, replace(cfg, tau=tau_factor * e0), theta_init=theta_erm)
    p = float(np.mean(train.labels))
    rows = []
    for k in kls:
        q = label_shift_proportions(p, k)
        test = label_shift_test_set(pos_pool, neg_pool, q, test_size, seed)
        row = {"kl": float(k), "pos_share": q}
        for name, th in (("erm", theta_erm), ("klrs", res.theta_star)):
            row[name] = metrics_from_scores(model.scores(th, test.features), test.labels).to_dict()
        rows.append(row)
    return {"e0": e0, "tau": tau_factor * e0, "result": res, "theta_erm": theta_erm, "rows": rows}


def per_class_accuracy(model: LogisticModel, theta, data: Dataset) -> dict:
    pred = (model.scores(theta, data.features) >= 0).astype(int)
    out = {}
    for k in np.unique(data.labels):
        m = data.labels == k
        out[int(k)] = float(np.mean(pred[m] == k))
    return out


def long_tail_experiment(train: Dataset, test: Dataset, tau_factor: float, weighting: str = "empirical",
                         erm_kw: dict | None = None, hier_kw: dict | None = None):
    """Group-level hierarchical KL-RS (groups = class labels) on a long-tailed binary set.

    ``erm_kw`` feeds the ERM warm start (:class:`SolverConfig` fields) and
    ``hier_kw`` the hierarchical solver (:class:`HierConfig` fields).
    """
    model = LogisticModel()
    tr = Dataset(train.features, train.labels, np.asarray(train.labels, int))
    theta_erm, e0 = erm_solve(model, tr, SolverConfig(tau=0.0, **(erm_kw or {})))
    gdata = GroupedDataset.from_dataset(tr, weighting)
    hc = HierConfig(tau=tau_factor * e0, **(hier_kw or {}))
    res = solve_hier(model, gdata, hc, theta_init=theta_erm)
    return {
        "e0": e0,
        "tau": hc.tau,
        "result": res,
        "theta_erm": theta_erm,
        "erm": per_class_accuracy(model, theta_erm, test),
        "klrs": per_class_accuracy(model, res.theta_star, test),
    }
