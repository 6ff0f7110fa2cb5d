"""Design data and group structure shared by every other module."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionError, PartitionError


class GroupPartition:
    """Disjoint, non-empty groups of feature indices covering ``range(n_features)``.

    Parameters
    ----------
    groups : sequence of int arrays
        Feature indices of every group, 0-based.
    n_features : int
        Number of features ``p``.
    weights : array, optional
        Nonnegative group weights ``w_g``. Defaults to ``sqrt(n_g)``.

    Notes
    -----
    ``order`` concatenates the groups so that, after ``X[:, order]``, group
    ``g`` occupies the contiguous slice ``starts[g]:starts[g + 1]``.
    """

    def __init__(self, groups: Iterable[Sequence[int]], n_features: int,
                 weights=None):
        groups = tuple(np.asarray(g, dtype=np.int64).ravel() for g in groups)
        if not groups:
            raise PartitionError("at least one group is required")
        seen = np.full(n_features, -1, dtype=np.int64)
        for k, g in enumerate(groups):
            if g.size == 0:
                raise PartitionError(f"group {k} is empty")
            if g.min() < 0 or g.max() >= n_features:
                raise PartitionError(
                    f"group {k} has an index outside [0, {n_features})")
            if np.unique(g).size != g.size:
                raise PartitionError(f"group {k} repeats an index")
            clash = seen[g] >= 0
            if clash.any():
                j = int(g[clash][0])
                raise PartitionError(
                    f"feature {j} belongs to groups {seen[j]} and {k}")
            seen[g] = k
        if (seen < 0).any():
            missing = np.flatnonzero(seen < 0)
            raise PartitionError(
                f"features not covered by any group: {missing[:10].tolist()}")

        sizes = np.array([g.size for g in groups], dtype=np.int64)
        if weights is None:
            weights = np.sqrt(sizes.astype(float))
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.shape != (len(groups),):
            raise DimensionError(
                f"expected {len(groups)} weights, got {weights.size}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise PartitionError("group weights must be finite and >= 0")

        self.groups = groups
        self.n_features = int(n_features)
        self.weights = weights
        self.sizes = sizes
        self.labels = seen
        self.order = np.concatenate(groups)
        self.starts = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    @classmethod
    def contiguous(cls, sizes: Sequence[int], weights=None) -> GroupPartition:
        """Consecutive blocks of the given sizes."""
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        groups = [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        return cls(groups, int(bounds[-1]), weights)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def is_contiguous(self) -> bool:
        return bool(np.array_equal(self.order, np.arange(self.n_features)))

    def with_weights(self, weights) -> GroupPartition:
        return GroupPartition(self.groups, self.n_features, weights)

    def penalty(self, tau: float):
        """Penalty parameters using this partition's weights."""
        from .penalty import PenaltyParams
        return PenaltyParams(tau, self.weights)

    def check_vector(self, v, name="vector") -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.n_features:
            raise DimensionError(
                f"{name} has shape {v.shape}, expected ({self.n_features},)")
        return v

    def __eq__(self, other):
        if not isinstance(other, GroupPartition):
            return NotImplemented
        return (self.n_features == other.n_features
                and len(self.groups) == len(other.groups)
                and all(np.array_equal(a, b)
                        for a, b in zip(self.groups, other.groups))
                and np.array_equal(self.weights, other.weights))

    __hash__ = None

    def __repr__(self):
        return (f"GroupPartition(n_groups={self.n_groups}, "
                f"n_features={self.n_features})")


@dataclass(frozen=True, eq=False)
class Problem:
    """Least-squares data ``(X, y)`` with cached norms.

    ``X`` is stored column-major so that column access is contiguous.
    """

    X: np.ndarray
    y: np.ndarray
    _spectral: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        X = np.asfortranarray(np.asarray(self.X, dtype=float))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float))
        if X.ndim != 2:
            raise DimensionError(f"X must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DimensionError(
                f"y has shape {y.shape}, expected ({X.shape[0]},)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @cached_property
    def col_norms(self) -> np.ndarray:
        return np.sqrt(np.einsum("ij,ij->j", self.X, self.X))

    @cached_property
    def xty(self) -> np.ndarray:
        return self.X.T @ self.y

    def spectral_norms(self, partition: GroupPartition) -> np.ndarray:
        """Spectral norm ``||X_g||_2`` of every group block (cached)."""
        self.check_partition(partition)
        key = (id(partition), partition.n_groups)
        cached = self._spectral.get(key)
        if cached is None or cached[0] is not partition:
            from .solver import spectral_norm
            norms = np.array([spectral_norm(self.X[:, g])
                              for g in partition.groups])
            cached = (partition, norms)
            self._spectral[key] = cached
        return cached[1]

    def check_partition(self, partition: GroupPartition) -> None:
        if partition.n_features != self.n_features:
            raise DimensionError(
                f"partition covers {partition.n_features} features, "
                f"X has {self.n_features}")

    def check_beta(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.n_features,):
            raise DimensionError(
                f"beta has shape {beta.shape}, expected ({self.n_features},)")
        return beta
