"""Dual points, duality gaps, safe spheres and the two-level screening tests."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DimensionError
from .penalty import (PenaltyParams, epsilon_norm_gradient, group_dual_norms,
                      group_norms, sgl_dual_norm, sgl_norm)
from .problem import GroupPartition, Problem


class SphereKind(str, enum.Enum):
    GAP = "gap"
    STATIC = "static"
    DYNAMIC = "dynamic"
    DST3 = "dst3"


@dataclass(frozen=True, eq=False)
class SafeSphere:
    """Ball ``B(center, radius)`` containing the dual optimum."""

    center: np.ndarray
    radius: float
    kind: SphereKind = SphereKind.GAP

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"sphere radius must be >= 0, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, float))
        object.__setattr__(self, "kind", SphereKind(self.kind))

    def contains(self, theta, slack: float = 0.0) -> bool:
        return bool(np.linalg.norm(np.asarray(theta) - self.center)
                    <= self.radius + slack)


@dataclass(frozen=True, eq=False)
class DualPoint:
    theta: np.ndarray
    dual_norm_value: float


@dataclass(frozen=True)
class GapReport:
    primal: float
    dual: float
    gap: float
    lam: float


@dataclass(frozen=True, eq=False)
class ActiveSet:
    """Group and feature masks of variables that are not screened out."""

    groups: np.ndarray
    features: np.ndarray

    @classmethod
    def full(cls, partition: GroupPartition) -> ActiveSet:
        return cls(np.ones(partition.n_groups, dtype=bool),
                   np.ones(partition.n_features, dtype=bool))

    @property
    def n_groups(self) -> int:
        return int(self.groups.sum())

    @property
    def n_features(self) -> int:
        return int(self.features.sum())

    def __eq__(self, other):
        if not isinstance(other, ActiveSet):
            return NotImplemented
        return (np.array_equal(self.groups, other.groups)
                and np.array_equal(self.features, other.features))

    __hash__ = None


# ---------------------------------------------------------------------------
# objectives


def primal_value(beta, problem: Problem, penalty: PenaltyParams,
                 partition: GroupPartition, lam: float) -> float:
    """``0.5 ||y - X beta||^2 + lam * Omega(beta)``."""
    beta = problem.check_beta(beta)
    problem.check_partition(partition)
    resid = problem.y - problem.X @ beta
    return 0.5 * float(resid @ resid) + lam * sgl_norm(beta, penalty, partition)


def dual_value(theta, y, lam: float) -> float:
    """``0.5 ||y||^2 - 0.5 lam^2 ||theta - y / lam||^2``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.shape != y.shape:
        raise DimensionError(
            f"theta has shape {theta.shape}, y has shape {y.shape}")
    d = theta - y / lam
    return 0.5 * float(y @ y) - 0.5 * lam * lam * float(d @ d)


def dual_point_from_residual(rho, lam: float, dual_norm: float) -> DualPoint:
    """Rescale a residual into the dual feasible set.

    ``dual_norm`` must be the dual norm of ``X^T rho``; the result is
    ``rho / max(lam, dual_norm)``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    denom = max(lam, dual_norm)
    return DualPoint(np.asarray(rho, dtype=float) / denom, dual_norm / denom)


def dual_point(beta, problem: Problem, penalty: PenaltyParams,
               partition: GroupPartition, lam: float) -> DualPoint:
    beta = problem.check_beta(beta)
    rho = problem.y - problem.X @ beta
    dn = sgl_dual_norm(problem.X.T @ rho, penalty, partition)
    return dual_point_from_residual(rho, lam, dn)


def gap_report(beta, theta, problem: Problem, penalty: PenaltyParams,
               partition: GroupPartition, lam: float) -> GapReport:
    p = primal_value(beta, problem, penalty, partition, lam)
    d = dual_value(theta, problem.y, lam)
    return GapReport(p, d, p - d, lam)


def gap_radius(report: GapReport) -> float:
    """``sqrt(2 * max(gap, 0)) / lam``."""
    return math.sqrt(2.0 * max(report.gap, 0.0)) / report.lam


def lambda_max(problem: Problem, penalty: PenaltyParams,
               partition: GroupPartition) -> float:
    """Smallest ``lam`` for which ``beta = 0`` is optimal."""
    problem.check_partition(partition)
    return sgl_dual_norm(problem.xty, penalty, partition)


# ---------------------------------------------------------------------------
# screening tests


def _sphere_bound(abs_max, st_norm, r_spec, tau):
    return np.where(abs_max > tau, st_norm + r_spec,
                    np.maximum(abs_max + r_spec - tau, 0.0))


def group_test(sphere: SafeSphere, Xg_theta_c, tau: float, w_g: float,
               spectral_norm_g: float) -> float:
    """Upper bound ``T_g`` of ``||ST_tau(X_g^T theta)||`` over the sphere.

    The group is screened when ``T_g < (1 - tau) * w_g``.
    """
    z = np.abs(np.asarray(Xg_theta_c, dtype=float))
    st = np.maximum(z - tau, 0.0)
    return float(_sphere_bound(z.max(), np.linalg.norm(st),
                               sphere.radius * spectral_norm_g, tau))


def feature_test(sphere: SafeSphere, Xj_theta_c: float, tau: float,
                 col_norm_j: float) -> bool:
    """True when the feature is certified zero."""
    return abs(Xj_theta_c) + sphere.radius * col_norm_j < tau


def group_test_values(xt_center, radius: float, tau: float,
                      partition: GroupPartition,
                      spectral_norms) -> np.ndarray:
    """:func:`group_test` for every group at once."""
    z = np.abs(partition.check_vector(xt_center, "xt_center"))[partition.order]
    heads = partition.starts[:-1]
    abs_max = np.maximum.reduceat(z, heads)
    st = np.maximum(z - tau, 0.0)
    st_norm = np.sqrt(np.add.reduceat(st * st, heads))
    return _sphere_bound(abs_max, st_norm, radius * np.asarray(spectral_norms),
                         tau)


def screen(xt_center, radius: float, penalty: PenaltyParams,
           partition: GroupPartition, col_norms, spectral_norms,
           current: Optional[ActiveSet] = None) -> ActiveSet:
    """Apply both tests given the correlations ``X^T theta_c``.

    Screening only removes variables: anything inactive in ``current`` stays
    inactive.
    """
    tau = penalty.tau
    if current is None:
        current = ActiveSet.full(partition)
    T = group_test_values(xt_center, radius, tau, partition, spectral_norms)
    groups = current.groups & ~(T < (1.0 - tau) * penalty.weights)
    feat_screened = (np.abs(xt_center) + radius * np.asarray(col_norms)) < tau
    features = current.features & ~feat_screened & groups[partition.labels]
    return ActiveSet(groups, features)


def apply_screening(sphere: SafeSphere, problem: Problem,
                    penalty: PenaltyParams, partition: GroupPartition,
                    current: Optional[ActiveSet] = None) -> ActiveSet:
    """Screen with a safe sphere; returns the surviving active set."""
    penalty.check(partition)
    xt = problem.X.T @ sphere.center
    return screen(xt, sphere.radius, penalty, partition, problem.col_norms,
                  problem.spectral_norms(partition), current)


def equicorrelation_sets(theta, problem: Problem, penalty: PenaltyParams,
                         partition: GroupPartition,
                         atol: float = 1e-7) -> ActiveSet:
    """Groups with ``||ST_tau(X_g^T theta)|| = (1 - tau) w_g`` and, inside
    them, features with ``|X_j^T theta| >= tau``; both up to ``atol``."""
    tau = penalty.tau
    xt = problem.X.T @ np.asarray(theta, dtype=float)
    st_norm = group_norms(np.maximum(np.abs(xt) - tau, 0.0), partition)
    groups = st_norm >= (1.0 - tau) * penalty.weights - atol
    features = (np.abs(xt) >= tau - atol) & groups[partition.labels]
    return ActiveSet(groups, features)


# ---------------------------------------------------------------------------
# reference spheres


@dataclass(frozen=True, eq=False)
class Dst3Direction:
    """Supporting hyperplane ``<theta, eta> = level`` of the constraint of the
    group attaining ``lambda_max``, taken at ``y / lambda_max``."""

    group: int
    eta: np.ndarray
    level: float
    eta_sq_norm: float
    eta_dot_y: float
    lam_max: float


def dst3_direction(problem: Problem, penalty: PenaltyParams,
                   partition: GroupPartition) -> Dst3Direction:
    terms = group_dual_norms(problem.xty, penalty, partition)
    g = int(np.argmax(terms))
    lam_max = float(terms[g])
    if lam_max <= 0:
        raise ValueError("DST3 needs lambda_max > 0 (y orthogonal to X)")
    ep = penalty.epsilon
    Xg = problem.X[:, partition.groups[g]]
    xi = problem.xty[partition.groups[g]] / lam_max
    eta = Xg @ epsilon_norm_gradient(xi, float(ep.eps[g]))
    sq = float(eta @ eta)
    if sq == 0.0:
        raise ValueError("degenerate DST3 direction (eta = 0)")
    return Dst3Direction(g, eta, float(ep.scale[g]), sq,
                         float(eta @ problem.y), lam_max)


@dataclass(frozen=True, eq=False)
class SphereContext:
    """Inputs of the reference spheres.

    ``theta`` (a dual feasible point) is needed by the dynamic and DST3
    spheres, ``dst3`` by DST3 only.
    """

    y: np.ndarray
    lam: float
    lam_max: float
    theta: Optional[np.ndarray] = None
    dst3: Optional[Dst3Direction] = None


def dst3_center_coef(ctx: SphereContext) -> float:
    """Coefficient ``c`` with ``theta_c = y / lam - c * eta``."""
    d = ctx.dst3
    return (d.eta_dot_y / ctx.lam - d.level) / d.eta_sq_norm


def reference_sphere(kind, ctx: SphereContext) -> SafeSphere:
    """Static, dynamic or DST3 safe sphere around ``y / lam``."""
    kind = SphereKind(kind)
    y = np.asarray(ctx.y, dtype=float)
    y_lam = y / ctx.lam
    if kind is SphereKind.STATIC:
        r = np.linalg.norm(y / ctx.lam_max - y_lam)
        return SafeSphere(y_lam, float(r), kind)
    if ctx.theta is None:
        raise ValueError(f"{kind.value} sphere needs a dual point")
    if kind is SphereKind.DYNAMIC:
        return SafeSphere(y_lam, float(np.linalg.norm(ctx.theta - y_lam)),
                          kind)
    if kind is SphereKind.DST3:
        if ctx.dst3 is None:
            raise ValueError("DST3 sphere needs a Dst3Direction")
        if ctx.lam > ctx.lam_max * (1 + 1e-12):
            raise ValueError("DST3 sphere requires lam <= lambda_max")
        center = y_lam - dst3_center_coef(ctx) * ctx.dst3.eta
        r2 = (np.sum((y_lam - ctx.theta) ** 2)
              - np.sum((y_lam - center) ** 2))
        return SafeSphere(center, math.sqrt(max(float(r2), 0.0)), kind)
    raise ValueError("the gap sphere is built from a duality gap, "
                     "use gap_sphere")


def gap_sphere(point: DualPoint, report: GapReport) -> SafeSphere:
    return SafeSphere(point.theta, gap_radius(report), SphereKind.GAP)
