"""Command-line front end.

Every subcommand resolves its parameters as defaults < JSON config file <
flags, rejects unknown config keys before computing anything, and echoes the
resolved parameters into the report.  Exit codes: 0 success, 1 usage or data
error, 2 infeasible target.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import guarantees as gt
from .exceptions import DomainError, InfeasibleTargetError
from .experiments.data import (
    gen_binary_gaussian,
    gen_two_gaussian_toy,
    load_csv_dataset,
    long_tail_downsample,
    write_csv_dataset,
)
from .experiments.fairpca import fair_pca_run, gen_two_subspace_groups
from .experiments.harness import (
    TOY_SOLVER,
    TOY_TAU_FACTORS,
    label_shift_experiment,
    loss_summary,
    long_tail_experiment,
    toy_tau_sweep,
)
from .experiments.report import emit_report
from .hierarchical import GroupedDataset, HierConfig, solve_hier
from .models import MODELS
from .solver import SolverConfig, solve_klrs, tail_exceedance

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# parameter tables: (key, type, default, help)

def _floats(v):
    if isinstance(v, str):
        return tuple(float(x) for x in v.split(",") if x.strip())
    return tuple(float(x) for x in v)


def _names(v):
    if isinstance(v, str):
        return tuple(x.strip() for x in v.split(",") if x.strip())
    return tuple(str(x) for x in v)


def _bool(v):
    if isinstance(v, bool):
        return v
    if str(v).lower() in ("1", "true", "yes"):
        return True
    if str(v).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean, got {v!r}")


@dataclass(frozen=True)
class Param:
    key: str
    type: object
    default: object
    help: str


DATA = [
    Param("data", str, None, "input CSV path"),
    Param("features", _names, None, "comma-separated feature columns"),
    Param("label", str, None, "integer label column"),
    Param("group", str, None, "integer group column"),
]

SOLVER = [
    Param("epsilon", float, 1e-4, "bisection tolerance on lambda"),
    Param("lambda_init", float, 1.0, "first lambda tried by the doubling phase"),
    Param("max_doublings", int, 60, "cap on doublings before giving up"),
    Param("sgd_steps", int, 500, "SGD steps per feasibility check"),
    Param("batch_size", int, 32, "mini-batch size"),
    Param("step_size", float, 0.05, "initial step size"),
    Param("step_schedule", str, "inverse-t", "constant or inverse-t"),
    Param("clip_norm", float, 10.0, "gradient-norm clip (0 disables)"),
]

HIER = [
    Param("w", float, 0.0, "weight of lambda2 in the objective"),
    Param("epsilon", float, 1e-3, "tolerance for both searches"),
    Param("lambda_min", float, None, "lower end of the lambda1 bracket"),
    Param("lambda_max", float, None, "upper end of the lambda1 bracket"),
    Param("lambda2_init", float, 1.0, "first lambda2 tried"),
    Param("max_doublings", int, 60, "cap on lambda2 doublings"),
    Param("M1", int, None, "groups per batch"),
    Param("M2", int, 32, "samples per group per batch"),
    Param("sgd_steps", int, 200, "SGD steps per feasibility check"),
    Param("step_size", float, 0.05, "initial step size"),
    Param("step_schedule", str, "inverse-t", "constant or inverse-t"),
    Param("clip_norm", float, 10.0, "gradient-norm clip (0 disables)"),
    Param("weighting", str, "empirical", "group weights: empirical or uniform"),
]


def _with_defaults(params, **defaults):
    return [Param(p.key, p.type, defaults.get(p.key, p.default), p.help) for p in params]


COMMANDS = {
    "solve": ("flat KL-RS solve on a CSV dataset", DATA + [
        Param("model", str, "point", "loss model: " + ", ".join(sorted(MODELS))),
        Param("tau", float, None, "loss target"),
    ] + SOLVER),
    "hsolve": ("hierarchical KL-RS solve on a grouped CSV dataset", DATA + [
        Param("model", str, "point", "loss model: " + ", ".join(sorted(MODELS))),
        Param("tau", float, None, "loss target"),
    ] + HIER),
    "fairpca": ("fair PCA over groups (synthetic two-group data without --data)", DATA + [
        Param("d", int, 1, "target dimension"),
        Param("r", float, 0.5, "target mix between max and min subgroup loss"),
        Param("normalize", _bool, True, "normalize losses by group size"),
        Param("sizes", _floats, (95.0, 5.0), "synthetic group sizes"),
        Param("dim", int, 3, "synthetic ambient dimension"),
    ] + SOLVER),
    "labelshift": ("ERM vs KL-RS logistic regression under label shift", [
        Param("n_pos", int, 60, "training positives"),
        Param("n_neg", int, 240, "training negatives"),
        Param("pool_size", int, 400, "held-out pool size per class"),
        Param("dim", int, 2, "feature dimension"),
        Param("sep", float, 1.5, "class mean separation per axis"),
        Param("kls", _floats, (0.0, 0.05, 0.1, 0.15, 0.2), "target KL shifts"),
        Param("test_size", int, 200, "test set size"),
        Param("tau_factor", float, 1.2, "tau as a multiple of the ERM loss"),
    ] + SOLVER),
    "longtail": ("class-grouped KL-RS on geometrically downsampled data", [
        Param("n_per_class", int, 300, "samples per class before downsampling"),
        Param("rho", float, 0.05, "rarest/most common class size ratio"),
        Param("test_per_class", int, 500, "balanced test samples per class"),
        Param("dim", int, 2, "feature dimension"),
        Param("sep", float, 1.5, "class mean separation per axis"),
        Param("tau_factor", float, 1.3, "tau as a multiple of the ERM loss"),
    ] + _with_defaults(HIER, sgd_steps=100, epsilon=1e-2)),
    "toy": ("point-estimation tau sweep on the two-cluster toy data", [
        Param("tau_factors", _floats, TOY_TAU_FACTORS, "tau values as multiples of the ERM loss"),
        Param("dump_data", str, None, "also write the generated points to this CSV"),
    ] + _with_defaults(SOLVER, **TOY_SOLVER)),
    "guarantees": ("guarantee calculators (no dataset)", [
        Param("K", int, 2, "support size"),
        Param("N", int, 100, "sample size"),
        Param("r", float, 0.05, "KL radius"),
        Param("lam", float, None, "fragility lambda for the tail bound and continuous case"),
        Param("alpha", float, None, "tail-bound margin"),
        Param("C", float, None, "loss bound for the continuous case"),
        Param("delta", float, None, "failure probability for the finite-sample radius"),
        Param("expected_kl", float, None, "expected KL for the finite-sample radius"),
    ]),
}

GLOBAL_KEYS = ("seed",)


# --------------------------------------------------------------------------
# parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", metavar="JSON", help="JSON file of parameters (flags take precedence)")
    g.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    g.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    g.add_argument("--format", choices=("json", "csv"), default="json", help="report format")

    parser = _Parser(prog="klrs", description="KL robust satisficing solvers and experiments.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (help_, params) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_, description=help_, parents=[common])
        for p in params:
            dflt = ",".join(f"{x:g}" for x in p.default) if isinstance(p.default, tuple) else p.default
            sp.add_argument("--" + p.key.replace("_", "-"), dest=p.key, default=None,
                            metavar=p.key.upper(), help=f"{p.help} (default {dflt})")
    return parser


def resolve_config(args) -> dict:
    """Merge defaults, the config file and flags; validate types and keys."""
    params = {p.key: p for p in COMMANDS[args.command][1]}
    file_cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise DomainError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise DomainError(f"{args.config}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
        if not isinstance(file_cfg, dict):
            raise DomainError(f"{args.config}: top level must be an object")
        unknown = sorted(set(file_cfg) - set(params) - set(GLOBAL_KEYS))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    cfg = {}
    for key, p in params.items():
        raw = getattr(args, key)
        if raw is None:
            raw = file_cfg.get(key, p.default)
        try:
            cfg[key] = None if raw is None else p.type(raw)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {key}: {raw!r}") from None
    seed = args.seed if args.seed is not None else file_cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise UsageError(f"seed must be a nonnegative integer, got {seed!r}")
    cfg["seed"] = seed
    return cfg


def _pick(cfg, params):
    out = {p.key: cfg[p.key] for p in params if cfg.get(p.key) is not None}
    if out.get("clip_norm") == 0:
        out["clip_norm"] = None
    return out


def _solver_cfg(cfg, tau) -> SolverConfig:
    return SolverConfig(tau=tau, seed=cfg["seed"], **_pick(cfg, SOLVER))


def _hier_cfg(cfg, tau) -> HierConfig:
    kw = _pick(cfg, [p for p in HIER if p.key != "weighting"])
    return HierConfig(tau=tau, seed=cfg["seed"], **kw)


def _load(cfg, need_label=False, need_group=False):
    if not cfg.get("data"):
        raise UsageError("--data is required")
    if not cfg.get("features"):
        raise UsageError("--features is required")
    if need_label and not cfg.get("label"):
        raise UsageError("--label is required")
    if need_group and not cfg.get("group"):
        raise UsageError("--group is required")
    try:
        return load_csv_dataset(cfg["data"], cfg["features"], cfg.get("label"), cfg.get("group"))
    except FileNotFoundError:
        raise DomainError(f"data file not found: {cfg['data']}") from None


def _model(cfg):
    try:
        return MODELS[cfg["model"]]()
    except KeyError:
        raise UsageError(f"unknown model {cfg['model']!r}") from None


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required parameter(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _config_echo(command, cfg):
    return {"command": command, **{k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())}}


# --------------------------------------------------------------------------
# commands: each returns (report kwargs, exit code)

def cmd_solve(cfg):
    _require(cfg, "tau")
    model = _model(cfg)
    data = _load(cfg, need_label=cfg["model"] in ("logistic", "least_squares"))
    res = solve_klrs(model, data, _solver_cfg(cfg, cfg["tau"]))
    losses = model.data_losses(res.theta_star, data)
    metrics = {"losses": loss_summary(losses)}
    gts = {"tail_bound": [
        {"alpha": a * cfg["tau"], "bound": gt.tail_bound(res.lambda_star, a * cfg["tau"]),
         "exceedance": tail_exceedance(losses, cfg["tau"], a * cfg["tau"])}
        for a in (0.1, 0.5, 1.0)]} if cfg["tau"] > 0 else None
    return dict(result=res, metrics=metrics, guarantees=gts), EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_hsolve(cfg):
    _require(cfg, "tau")
    model = _model(cfg)
    data = _load(cfg, need_label=cfg["model"] in ("logistic", "least_squares"), need_group=True)
    gdata = GroupedDataset.from_dataset(data, cfg["weighting"])
    res = solve_hier(model, gdata, _hier_cfg(cfg, cfg["tau"]))
    metrics = {"group_losses": [loss_summary(model.data_losses(res.theta_star, g)) for g in gdata.groups]}
    return dict(result=res, metrics=metrics), EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_fairpca(cfg):
    if cfg.get("data"):
        data = _load(cfg, need_group=True)
        groups = [g.features for g in data.split_groups()]
    else:
        sizes = tuple(int(s) for s in cfg["sizes"])
        if any(s != f for s, f in zip(sizes, cfg["sizes"])):
            raise UsageError("sizes must be integers")
        groups = gen_two_subspace_groups(sizes, n=cfg["dim"], seed=cfg["seed"])
    solver = _solver_cfg(cfg, 0.0)
    res = fair_pca_run(groups, cfg["d"], cfg["r"], solver, cfg["normalize"])
    w = np.array([len(Y) for Y in groups], float)
    w /= w.sum()
    metrics = {
        "tau": res.tau,
        "group_losses": res.group_losses,
        "gap": res.gap,
        "average_loss": res.average_loss(w),
        "baseline_group_losses": res.baseline_losses,
    }
    result = {"theta": res.U, "lambda": res.lambda_star, "feasible": True}
    trace = [{"lambda": t.lam, "objective": t.objective, "feasible": t.feasible} for t in res.trace]
    return dict(result=result, metrics=metrics, extra={"trace": trace}), EXIT_OK


def cmd_labelshift(cfg):
    seed = cfg["seed"]
    train = gen_binary_gaussian(cfg["n_pos"], cfg["n_neg"], cfg["dim"], cfg["sep"], seed)
    pos_pool = gen_binary_gaussian(cfg["pool_size"], 0, cfg["dim"], cfg["sep"], seed + 1)
    neg_pool = gen_binary_gaussian(0, cfg["pool_size"], cfg["dim"], cfg["sep"], seed + 2)
    out = label_shift_experiment(train, pos_pool, neg_pool, cfg["tau_factor"], cfg["kls"], cfg["test_size"],
                                 seed, **_pick(cfg, SOLVER))
    metrics = {"erm_loss": out["e0"], "tau": out["tau"], "theta_erm": out["theta_erm"],
               "train_pos_share": cfg["n_pos"] / (cfg["n_pos"] + cfg["n_neg"]), "shifts": out["rows"]}
    rows = [{"kl": r["kl"], "pos_share": r["pos_share"],
             **{f"{m}_{k}": r[m][k] for m in ("erm", "klrs") for k in ("acc", "f1", "mcc", "rank_error_cvar")}}
            for r in out["rows"]]
    return dict(result=out["result"], metrics=metrics, rows=rows), EXIT_OK


def cmd_longtail(cfg):
    seed = cfg["seed"]
    n, dim, sep = cfg["n_per_class"], cfg["dim"], cfg["sep"]
    full = gen_binary_gaussian(n, n, dim, sep, seed)
    train = long_tail_downsample(full, cfg["rho"], seed)
    test = gen_binary_gaussian(cfg["test_per_class"], cfg["test_per_class"], dim, sep, seed + 1)
    hier_kw = _pick(cfg, [p for p in HIER if p.key != "weighting"])
    out = long_tail_experiment(train, test, cfg["tau_factor"], cfg["weighting"],
                               erm_kw={"seed": seed}, hier_kw={**hier_kw, "seed": seed})
    counts = {int(k): int(v) for k, v in zip(*np.unique(train.labels, return_counts=True))}
    metrics = {"erm_loss": out["e0"], "tau": out["tau"], "train_class_sizes": counts,
               "per_class_accuracy": {"erm": out["erm"], "klrs": out["klrs"]}}
    return dict(result=out["result"], metrics=metrics), EXIT_OK


def cmd_toy(cfg):
    data = gen_two_gaussian_toy(cfg["seed"])
    if cfg.get("dump_data"):
        write_csv_dataset(data, cfg["dump_data"], features=["x0", "x1"], label="label", group="group")
    kw = _pick(cfg, SOLVER)
    e0, rows = toy_tau_sweep(data, cfg["tau_factors"], cfg["seed"], **kw)
    sizes = [int(np.sum(data.group_ids == g)) for g in (0, 1)]
    sweep = [{k: v for k, v in r.items() if k != "result"} for r in rows]
    metrics = {"cluster_sizes": sizes, "erm_loss": e0, "sweep": sweep}
    trace = [{"tau": r["tau"], "lambda": r["lambda_star"], "objective": r["tilted_risk"], "feasible": True}
             for r in rows]
    csv_rows = [{k: v for k, v in r.items() if k not in ("result", "theta")} for r in rows]
    result = {"theta": [r["theta"] for r in rows], "lambda": [r["lambda_star"] for r in rows], "feasible": True}
    return dict(result=result, metrics=metrics, extra={"trace": trace}, rows=csv_rows), EXIT_OK


def cmd_guarantees(cfg):
    K, N, r = cfg["K"], cfg["N"], cfg["r"]
    out = {"chi2": gt.asymptotic_discrete_confidence(K, N, r)}
    try:
        out["chernoff"] = gt.chernoff_confidence(K, N, r)
    except DomainError as exc:
        out["chernoff"] = None
        out["chernoff_note"] = str(exc)
    if cfg["lam"] is not None and cfg["alpha"] is not None:
        out["tail_bound"] = gt.tail_bound(cfg["lam"], cfg["alpha"])
    if cfg["C"] is not None and cfg["lam"] is not None:
        value, k_star = gt.asymptotic_continuous_confidence(cfg["C"], cfg["lam"], N, r)
        out["continuous"] = {"value": value, "K": k_star}
    if cfg["delta"] is not None and cfg["expected_kl"] is not None:
        out["finite_sample_radius"] = gt.finite_sample_radius(K, N, cfg["delta"], cfg["expected_kl"])
    rows = [{"name": k, "value": v} for k, v in out.items() if isinstance(v, float)]
    if "continuous" in out:
        rows.append({"name": "continuous", "value": out["continuous"]["value"]})
    return dict(guarantees=out, rows=rows), EXIT_OK


HANDLERS = {
    "solve": cmd_solve, "hsolve": cmd_hsolve, "fairpca": cmd_fairpca, "labelshift": cmd_labelshift,
    "longtail": cmd_longtail, "toy": cmd_toy, "guarantees": cmd_guarantees,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args)
        payload, code = HANDLERS[args.command](cfg)
        text = emit_report(fmt=args.format, path=args.out, config=_config_echo(args.command, cfg), **payload)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except InfeasibleTargetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if args.out is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
