"""Synthetic data, resampling schedules and CSV I/O."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..core import kl_divergence
from ..exceptions import DegenerateClassError, DomainError
from ..models import Dataset

TOY_CLUSTERS = (
    # (size, mean, isotropic variance)
    (80, (-1.0, 2.0), 0.4),
    (20, (0.2, 0.2), 0.6),
)


def gen_two_gaussian_toy(seed: int = 0) -> Dataset:
    """100 planar points: 80 around (-1, 2) and 20 around (0.2, 0.2).

    ``group_ids`` marks the cluster (0 = majority, 1 = minority).
    """
    rng = np.random.default_rng(seed)
    pts, gid = [], []
    for g, (n, mean, var) in enumerate(TOY_CLUSTERS):
        pts.append(rng.multivariate_normal(mean, var * np.eye(2), size=n))
        gid.append(np.full(n, g))
    return Dataset(np.vstack(pts), None, np.concatenate(gid))


def _binary_kl(q, p):
    return kl_divergence([q, 1.0 - q], [p, 1.0 - p])


def label_shift_proportions(train_pos_frac: float, target_kl: float) -> float:
    """Positive share ``q > p`` whose binary KL from ``p`` equals ``target_kl``.

    Solved by bisection on ``(p, 1]`` down to float resolution.
    """
    p = float(train_pos_frac)
    if not 0 < p < 1:
        raise DomainError("train_pos_frac must lie in (0, 1)")
    if target_kl < 0:
        raise DomainError("target_kl must be nonnegative")
    if target_kl == 0:
        return p
    kmax = -math.log(p)
    if target_kl > kmax:
        raise DomainError(f"target_kl={target_kl:g} exceeds the reachable maximum {kmax:g}")
    lo, hi = p, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if _binary_kl(mid, p) < target_kl:
            lo = mid
        else:
            hi = mid
    return lo if abs(_binary_kl(lo, p) - target_kl) <= abs(_binary_kl(hi, p) - target_kl) else hi


def label_shift_test_set(pos_pool: Dataset, neg_pool: Dataset, q: float, size: int, seed: int = 0) -> Dataset:
    """Draw ``round(q * size)`` positives and the rest negatives without replacement."""
    n_pos = int(round(q * size))
    n_neg = size - n_pos
    if n_pos > len(pos_pool) or n_neg > len(neg_pool):
        raise DomainError("pools too small for the requested test set")
    rng = np.random.default_rng(seed)
    ip = rng.choice(len(pos_pool), size=n_pos, replace=False)
    ineg = rng.choice(len(neg_pool), size=n_neg, replace=False)
    X = np.vstack([pos_pool.features[ip], neg_pool.features[ineg]])
    y = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)])
    return Dataset(X, y)


def gen_binary_gaussian(n_pos: int, n_neg: int, dim: int = 2, sep: float = 1.5, seed: int = 0) -> Dataset:
    """Two isotropic Gaussian classes whose means differ by ``sep`` along every axis."""
    rng = np.random.default_rng(seed)
    Xp = rng.normal(loc=sep / 2, size=(n_pos, dim))
    Xn = rng.normal(loc=-sep / 2, size=(n_neg, dim))
    y = np.concatenate([np.ones(n_pos, dtype=int), np.zeros(n_neg, dtype=int)])
    return Dataset(np.vstack([Xp, Xn]), y)


def long_tail_sizes(class_sizes, rho: float) -> dict:
    """Target size per class id under the geometric schedule.

    Classes are ranked by size (descending, ties by id); rank ``c`` keeps
    ``floor(n_max * rho ** (c / (C - 1)))`` capped at its available count.
    """
    if not 0 < rho <= 1:
        raise DomainError("rho must lie in (0, 1]")
    ids = sorted(class_sizes, key=lambda k: (-class_sizes[k], k))
    C = len(ids)
    if C < 2:
        raise DomainError("need at least two classes")
    n_max = class_sizes[ids[0]]
    out = {}
    for c, k in enumerate(ids):
        # 1e-9 guards against results like 4.999999999 for exact products
        n = int(math.floor(n_max * rho ** (c / (C - 1)) + 1e-9))
        n = min(n, class_sizes[k])
        if n == 0:
            raise DegenerateClassError(f"class {k} would keep no samples")
        out[k] = n
    return out


def long_tail_downsample(data: Dataset, rho: float, seed: int = 0) -> Dataset:
    """Geometric per-class downsampling of a labeled dataset."""
    if data.labels is None:
        raise DomainError("dataset has no labels")
    labels = np.asarray(data.labels)
    classes, counts = np.unique(labels, return_counts=True)
    sizes = long_tail_sizes({int(k): int(n) for k, n in zip(classes, counts)}, rho)
    rng = np.random.default_rng(seed)
    keep = []
    for k in sorted(sizes):
        idx = np.flatnonzero(labels == k)
        keep.append(np.sort(rng.choice(idx, size=sizes[k], replace=False)))
    return data.subset(np.concatenate(keep))


# --------------------------------------------------------------------------
# CSV

def load_csv_dataset(path, features, label=None, group=None) -> Dataset:
    """Read a headed UTF-8 CSV into a Dataset.

    ``features`` lists the feature column names; ``label`` and ``group`` name
    optional integer columns.  Errors carry the file line number.
    """
    path = Path(path)
    features = list(features)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        wanted = features + [c for c in (label, group) if c is not None]
        for c in wanted:
            if c not in header:
                raise DomainError(f"{path}: unknown column {c!r}")
        cols = {c: header.index(c) for c in wanted}
        X, y, g = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise DomainError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            try:
                X.append([float(row[cols[c]]) for c in features])
                if label is not None:
                    y.append(_parse_int(row[cols[label]]))
                if group is not None:
                    g.append(_parse_int(row[cols[group]]))
            except ValueError as exc:
                raise DomainError(f"{path}:{line}: {exc}") from None
    X = np.array(X, dtype=float).reshape(len(X), len(features))
    return Dataset(X, np.array(y, dtype=int) if label is not None else None,
                   np.array(g, dtype=int) if group is not None else None)


def _parse_int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"expected an integer, got {s!r}")
    return int(v)


def write_csv_dataset(data: Dataset, path, features=None, label="label", group="group"):
    """Write a Dataset so that :func:`load_csv_dataset` reads it back exactly."""
    features = features or [f"x{i}" for i in range(data.n_features)]
    header = list(features)
    if data.labels is not None:
        header.append(label)
    if data.group_ids is not None:
        header.append(group)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(data)):
            row = [repr(float(v)) for v in data.features[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            if data.group_ids is not None:
                row.append(str(int(data.group_ids[i])))
            w.writerow(row)
    return features
