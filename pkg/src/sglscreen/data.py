"""Synthetic benchmark data, problem files, and the Elastic-Net reduction."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .exceptions import (GroupPartitionParseError, IndexOutOfRangeError,
                         ParseError, RaggedRowsError)
from .problem import GroupPartition, Problem

BINARY_MAGIC = b"SGLB"
_BINARY_HEADER = struct.Struct("<4sQQ")


@dataclass(frozen=True)
class SyntheticConfig:
    """Correlated Gaussian design with a sparse, group-sparse truth.

    ``normalize`` rescales the columns of X and y to unit norm after
    sampling; ``true_beta`` is rescaled so that the model still holds.
    """

    n: int = 100
    p: int = 10_000
    group_size: int = 10
    rho: float = 0.5
    gamma1: int = 10
    gamma2: int = 4
    noise_scale: float = 0.01
    seed: int = 0
    normalize: bool = True

    def __post_init__(self):
        if self.n < 1 or self.p < 1 or self.group_size < 1:
            raise ValueError("n, p and group_size must be positive")
        if self.p % self.group_size:
            raise ValueError(f"p={self.p} is not divisible by "
                             f"group_size={self.group_size}")
        if not 0 <= self.gamma1 <= self.p // self.group_size:
            raise ValueError(f"gamma1={self.gamma1} exceeds the "
                             f"{self.p // self.group_size} groups")
        if not 0 <= self.gamma2 <= self.group_size:
            raise ValueError(f"gamma2={self.gamma2} exceeds group_size")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")

    def to_dict(self):
        return asdict(self)


def ar1_design(rng: np.random.Generator, n: int, p: int,
               rho: float) -> np.ndarray:
    """Rows i.i.d. Gaussian with ``corr(X_i, X_j) = rho**|i - j|``."""
    g = rng.standard_normal((n, p))
    X = np.empty((n, p), order="F")
    X[:, 0] = g[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + c * g[:, j]
    return X


def generate_synthetic(config: SyntheticConfig):
    """Sample ``(problem, partition, true_beta)``; deterministic in the seed."""
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    X = ar1_design(rng, cfg.n, cfg.p, cfg.rho)

    n_groups = cfg.p // cfg.group_size
    perm = rng.permutation(cfg.p)
    groups = [np.sort(block) for block in perm.reshape(n_groups, -1)]
    partition = GroupPartition(groups, cfg.p)

    beta = np.zeros(cfg.p)
    for g in rng.choice(n_groups, size=cfg.gamma1, replace=False):
        coords = rng.choice(groups[g], size=cfg.gamma2, replace=False)
        xi = rng.uniform(-1.0, 1.0, size=cfg.gamma2)
        u = rng.uniform(0.5, 10.0, size=cfg.gamma2)
        beta[coords] = np.where(xi >= 0, 1.0, -1.0) * u

    y = X @ beta + cfg.noise_scale * rng.standard_normal(cfg.n)
    if cfg.normalize:
        col = np.linalg.norm(X, axis=0)
        col[col == 0] = 1.0
        X /= col
        beta *= col
        s = np.linalg.norm(y)
        if s > 0:
            y /= s
            beta /= s
    return Problem(X, y), partition, beta


def elastic_net_augment(problem: Problem, lambda2: float) -> Problem:
    """Stack ``sqrt(lambda2) * I`` under X and zeros under y.

    The plain objective on the result equals the objective with an extra
    ``lambda2 / 2 * ||beta||^2`` on the original data.
    """
    if lambda2 < 0:
        raise ValueError(f"lambda2 must be >= 0, got {lambda2}")
    p = problem.n_features
    X = np.vstack([problem.X, math.sqrt(lambda2) * np.eye(p)])
    y = np.concatenate([problem.y, np.zeros(p)])
    return Problem(X, y)


# ---------------------------------------------------------------------------
# files


def write_binary_matrix(path, X) -> None:
    """``SGLB`` magic, little-endian u64 rows and columns, row-major f64."""
    X = np.asarray(X, dtype="<f8")
    n, p = X.shape
    with open(path, "wb") as fh:
        fh.write(_BINARY_HEADER.pack(BINARY_MAGIC, n, p))
        fh.write(np.ascontiguousarray(X).tobytes())


def read_binary_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_BINARY_HEADER.size)
        if len(head) < _BINARY_HEADER.size:
            raise ParseError("truncated binary header", path)
        magic, n, p = _BINARY_HEADER.unpack(head)
        if magic != BINARY_MAGIC:
            raise ParseError("bad magic bytes", path)
        data = fh.read()
    if len(data) != 8 * n * p:
        raise ParseError(f"expected {n * p} doubles, found {len(data) / 8:g}",
                         path)
    return np.frombuffer(data, dtype="<f8").reshape(n, p).astype(float)


def _is_binary(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == BINARY_MAGIC


def _parse_float(token, path, line):
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", path, line) from None


def read_matrix_csv(path) -> np.ndarray:
    rows, width = [], None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise RaggedRowsError(
                    f"row has {len(row)} values, line 1 has {width}",
                    path, lineno)
            rows.append([_parse_float(c, path, lineno) for c in row])
    if not rows:
        raise ParseError("empty matrix file", path)
    return np.array(rows)


def read_vector_csv(path) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if "," in line:
                raise RaggedRowsError("expected one value per line",
                                      path, lineno)
            values.append(_parse_float(line, path, lineno))
    return np.array(values)


def read_groups(path, n_features: int) -> GroupPartition:
    """Parse ``i j k [| weight]`` lines into a partition."""
    groups, weights, owner = [], [], {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            idx_part, sep, w_part = text.partition("|")
            try:
                idx = [int(t) for t in idx_part.split()]
            except ValueError:
                raise ParseError("group indices must be integers",
                                 path, lineno) from None
            if not idx:
                raise GroupPartitionParseError("empty group", path, lineno)
            for j in idx:
                if not 0 <= j < n_features:
                    raise IndexOutOfRangeError(
                        f"feature index {j} outside [0, {n_features})",
                        path, lineno)
                if j in owner:
                    raise GroupPartitionParseError(
                        f"feature {j} already in the group on line "
                        f"{owner[j]}", path, lineno)
                owner[j] = lineno
            groups.append(idx)
            weights.append(_parse_float(w_part.strip(), path, lineno)
                           if sep and w_part.strip() else math.sqrt(len(idx)))
    missing = sorted(set(range(n_features)) - owner.keys())
    if missing:
        raise GroupPartitionParseError(
            f"features not in any group: {missing[:10]}", path)
    return GroupPartition(groups, n_features, weights)


def load_problem(x_path, y_path, groups_path):
    """Read ``(Problem, GroupPartition)`` from X (CSV or binary), y, groups."""
    X = read_binary_matrix(x_path) if _is_binary(x_path) else \
        read_matrix_csv(x_path)
    y = read_vector_csv(y_path)
    if y.shape[0] != X.shape[0]:
        raise ParseError(f"y has {y.shape[0]} values, X has {X.shape[0]} "
                         "rows", y_path)
    partition = read_groups(groups_path, X.shape[1])
    return Problem(X, y), partition


def save_problem(out_dir, problem: Problem, partition: GroupPartition,
                 binary: bool = False):
    """Write ``X.csv`` (or ``X.sglb``), ``y.csv`` and ``groups.txt``.

    Values are written with 17 significant digits so they reload exactly.
    Returns the three paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x_path = out / ("X.sglb" if binary else "X.csv")
    y_path = out / "y.csv"
    g_path = out / "groups.txt"
    if binary:
        write_binary_matrix(x_path, problem.X)
    else:
        np.savetxt(x_path, problem.X, delimiter=",", fmt="%.17g")
    np.savetxt(y_path, problem.y, fmt="%.17g")
    with open(g_path, "w") as fh:
        for g, w in zip(partition.groups, partition.weights):
            fh.write(" ".join(map(str, g.tolist())) + f" | {float(w)!r}\n")
    return x_path, y_path, g_path
