"""Sparse-Group Lasso norm, its dual norm, and the epsilon-norm machinery.

The dual norm reduces, group by group, to the scalar root-finding problem

    find nu >= 0 such that  sum_i ST_{nu * alpha}(x_i)^2 = (nu * R)^2,

solved exactly by :func:`lambda_solver` with a partial sort of ``|x|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import DimensionError
from .problem import GroupPartition

# Relative width of the band around alpha^2 * j0 == R^2 handled by the
# linear branch of the root formula.
_LINEAR_BRANCH_RTOL = 1e-12
# Relative size of a negative discriminant that is treated as rounding.
_DISCRIMINANT_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PenaltyParams:
    """Mixing weight ``tau`` and per-group weights ``w_g``.

    The penalty is ``tau * ||beta||_1 + (1 - tau) * sum_g w_g ||beta_g||``.
    ``tau = 0`` together with a zero weight is rejected: the penalty is not a
    norm in that case.
    """

    tau: float
    weights: np.ndarray

    def __post_init__(self):
        tau = float(self.tau)
        weights = np.asarray(self.weights, dtype=float).ravel()
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {tau}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("group weights must be finite and >= 0")
        if tau == 0.0 and np.any(weights == 0):
            raise ValueError("tau = 0 with a zero group weight is not a norm")
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "weights", weights)

    def check(self, partition: GroupPartition) -> None:
        if self.weights.shape[0] != partition.n_groups:
            raise DimensionError(
                f"{self.weights.shape[0]} weights for "
                f"{partition.n_groups} groups")

    @property
    def epsilon(self) -> EpsilonParams:
        return EpsilonParams.from_penalty(self)


@dataclass(frozen=True, eq=False)
class EpsilonParams:
    """Per-group epsilon-norm parameters.

    ``eps_g = (1 - tau) w_g / (tau + (1 - tau) w_g)`` and
    ``scale_g = tau + (1 - tau) w_g``, so that the group's share of the
    penalty is ``scale_g * ||beta_g||^D_{eps_g}``.
    """

    eps: np.ndarray
    scale: np.ndarray

    @classmethod
    def from_penalty(cls, penalty: PenaltyParams) -> EpsilonParams:
        tau, w = penalty.tau, penalty.weights
        scale = tau + (1.0 - tau) * w
        eps = (1.0 - tau) * w / scale
        return cls(eps=eps, scale=scale)


# ---------------------------------------------------------------------------
# proximal operators


def soft_threshold(x, tau: float) -> np.ndarray:
    """Componentwise ``sign(x) * max(|x| - tau, 0)``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def group_soft_threshold(x, tau: float) -> np.ndarray:
    """Block shrinkage ``max(1 - tau / ||x||, 0) * x``; zero maps to zero."""
    x = np.asarray(x, dtype=float)
    nrm = np.linalg.norm(x)
    if nrm <= tau or nrm == 0.0:
        return np.zeros_like(x)
    return (1.0 - tau / nrm) * x


# ---------------------------------------------------------------------------
# Lambda(x, alpha, R)


@numba.njit(cache=True, nogil=True)
def _lambda_core(x, alpha, R):
    d = x.shape[0]
    if alpha == 0.0 and R == 0.0:
        return np.inf
    norm_inf = 0.0
    for i in range(d):
        a = abs(x[i])
        if a > norm_inf:
            norm_inf = a
    if norm_inf == 0.0:
        return 0.0
    if R == 0.0:
        return norm_inf / alpha
    # The root is positively homogeneous in x: work on x / ||x||_inf so that
    # squares neither underflow nor overflow.
    if alpha == 0.0:
        s2 = 0.0
        for i in range(d):
            t = x[i] / norm_inf
            s2 += t * t
        return norm_inf * math.sqrt(s2) / R

    # Any root satisfies nu >= ||x||_inf / (alpha + R), so coordinates below
    # alpha * ||x||_inf / (alpha + R) are thresholded to zero at the root.
    cutoff = alpha * norm_inf / (alpha + R)
    z = np.empty(d)
    n_kept = 0
    for i in range(d):
        a = abs(x[i])
        if a > cutoff:
            z[n_kept] = a / norm_inf
            n_kept += 1
    z = np.sort(z[:n_kept])[::-1]

    # With the m largest entries above the threshold, the left-hand side at
    # nu = z[m] / alpha equals alpha^2 * (S2/z[m]^2 - 2 S/z[m] + m); it is
    # increasing in m, and j0 is the first m whose value exceeds R^2/alpha^2.
    target = (R / alpha) ** 2
    s = 0.0
    s2 = 0.0
    j0 = n_kept
    for k in range(n_kept):
        s += z[k]
        s2 += z[k] * z[k]
        if k + 1 < n_kept:
            nxt = z[k + 1]
            bound = s2 / (nxt * nxt) - 2.0 * s / nxt + (k + 1)
            if target < bound:
                j0 = k + 1
                break

    a2j = alpha * alpha * j0
    r2 = R * R
    c = a2j - r2
    if abs(c) < 1e-12 * max(a2j, r2):
        return norm_inf * s2 / (2.0 * alpha * s)
    disc = (alpha * s) ** 2 - s2 * c
    if disc < 0.0:
        if -disc <= 1e-12 * (alpha * s) ** 2:
            disc = 0.0
        else:
            return np.nan
    # Smaller root of c nu^2 - 2 alpha S nu + S2 = 0, written without the
    # cancellation of (alpha S - sqrt(disc)) / c.
    return norm_inf * s2 / (alpha * s + math.sqrt(disc))


@numba.njit(cache=True, nogil=True)
def _group_lambdas(xi, starts, alpha, R):
    n_groups = starts.shape[0] - 1
    out = np.empty(n_groups)
    for g in range(n_groups):
        out[g] = _lambda_core(xi[starts[g]:starts[g + 1]], alpha[g], R[g])
    return out


def lambda_solver(x, alpha: float, R: float) -> float:
    """Unique ``nu >= 0`` with ``||ST_{nu*alpha}(x)||^2 = (nu*R)^2``.

    Parameters
    ----------
    x : array_like
        Input vector.
    alpha : float
        Threshold slope, in ``[0, 1]``.
    R : float
        Radius slope, ``>= 0``.

    Returns
    -------
    float
        The root. ``inf`` when ``alpha == R == 0``; ``0`` when ``x == 0``
        otherwise.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if R < 0:
        raise ValueError(f"R must be >= 0, got {R}")
    x = np.ascontiguousarray(x, dtype=float).ravel()
    return float(_lambda_core(x, float(alpha), float(R)))


# ---------------------------------------------------------------------------
# epsilon-norm


def epsilon_norm(x, eps: float) -> float:
    """Root ``nu`` of ``sum_i (|x_i| - (1 - eps) nu)_+^2 = (eps nu)^2``."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return lambda_solver(x, 1.0 - eps, eps)


def epsilon_dual_norm(x, eps: float) -> float:
    x = np.asarray(x, dtype=float)
    return eps * np.linalg.norm(x) + (1.0 - eps) * np.abs(x).sum()


def epsilon_decomposition(xi, eps: float):
    """Split ``xi`` into an l2 part and an l_inf part.

    Returns ``(xi_eps, xi_rest)`` with ``xi_eps = ST_{(1-eps)||xi||_eps}(xi)``
    and ``xi_rest = xi - xi_eps``. Then ``||xi_eps|| = eps ||xi||_eps`` and
    ``||xi_rest||_inf = (1 - eps) ||xi||_eps``.
    """
    xi = np.asarray(xi, dtype=float)
    nu = epsilon_norm(xi, eps)
    xi_eps = soft_threshold(xi, (1.0 - eps) * nu)
    return xi_eps, xi - xi_eps


def epsilon_norm_gradient(xi, eps: float) -> np.ndarray:
    """Gradient of the epsilon-norm at a nonzero ``xi``.

    For ``eps > 0`` this is ``xi_eps / ||xi_eps||^D_eps``. At ``eps = 0`` the
    norm is ``||.||_inf`` and the signed unit vector at the first maximal
    coordinate is returned (the gradient when the maximum is unique).
    """
    xi = np.asarray(xi, dtype=float)
    if not np.any(xi):
        raise ValueError("the epsilon-norm is not differentiable at 0")
    if eps == 0.0:
        grad = np.zeros_like(xi)
        j = int(np.argmax(np.abs(xi)))
        grad[j] = np.sign(xi[j])
        return grad
    xi_eps, _ = epsilon_decomposition(xi, eps)
    return xi_eps / epsilon_dual_norm(xi_eps, eps)


# ---------------------------------------------------------------------------
# Sparse-Group Lasso norm and dual norm


def group_norms(v, partition: GroupPartition) -> np.ndarray:
    """Euclidean norm of every group slice of ``v``."""
    v = partition.check_vector(v)
    sq = np.add.reduceat(v[partition.order] ** 2, partition.starts[:-1])
    return np.sqrt(sq)


def sgl_norm(beta, penalty: PenaltyParams, partition: GroupPartition) -> float:
    """``tau ||beta||_1 + (1 - tau) sum_g w_g ||beta_g||``."""
    penalty.check(partition)
    beta = partition.check_vector(beta, "beta")
    tau = penalty.tau
    return float(tau * np.abs(beta).sum()
                 + (1.0 - tau) * penalty.weights @ group_norms(beta, partition))


def group_dual_norms(xi, penalty: PenaltyParams,
                     partition: GroupPartition) -> np.ndarray:
    """Per-group terms ``Lambda(xi_g, 1 - eps_g, eps_g) / scale_g``."""
    penalty.check(partition)
    xi = partition.check_vector(xi, "xi")
    ep = penalty.epsilon
    lam = _group_lambdas(np.ascontiguousarray(xi[partition.order]),
                         partition.starts, 1.0 - ep.eps, ep.eps)
    return lam / ep.scale


def sgl_dual_norm(xi, penalty: PenaltyParams,
                  partition: GroupPartition) -> float:
    """Dual norm: the largest per-group term of :func:`group_dual_norms`."""
    return float(group_dual_norms(xi, penalty, partition).max())


def in_dual_ball(xi, penalty: PenaltyParams, partition: GroupPartition,
                 slack: float = 0.0) -> bool:
    """Membership test ``||ST_tau(xi_g)|| <= (1 - tau) w_g + slack`` for all g."""
    penalty.check(partition)
    st = soft_threshold(partition.check_vector(xi, "xi"), penalty.tau)
    bound = (1.0 - penalty.tau) * penalty.weights
    return bool(np.all(group_norms(st, partition) <= bound + slack))
