"""Block coordinate descent (ISTA-BC) with safe screening and warm-started paths."""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numba
import numpy as np

from . import screening as scr
from .penalty import (PenaltyParams, _group_lambdas, _lambda_core,
                      group_soft_threshold, soft_threshold)
from .problem import GroupPartition, Problem

logger = logging.getLogger(__name__)

_POWER_RTOL = 1e-10
_POWER_MAX_ITER = 1000
# Rounding guards for the screening spheres: relative error of a computed
# duality gap, and of X^T theta_c relative to ||y / lam||.
_GAP_ROUNDING = 8 * np.finfo(float).eps
_RADIUS_ROUNDING = 1e-12


class Rule(str, enum.Enum):
    GAP = "gap"
    STATIC = "static"
    DYNAMIC = "dynamic"
    DST3 = "dst3"
    NONE = "none"


@dataclass(frozen=True)
class SolverConfig:
    """Stopping and screening settings of one solve.

    ``tolerance`` is an absolute bound on the duality gap. ``max_passes``
    counts full cycles over the active groups; the gap is evaluated every
    ``gap_check_every`` passes.
    """

    tolerance: float = 1e-8
    max_passes: int = 50_000
    gap_check_every: int = 10
    rule: Rule = Rule.GAP

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.gap_check_every < 1:
            raise ValueError("gap_check_every must be >= 1")
        object.__setattr__(self, "rule", Rule(self.rule))


@dataclass(frozen=True)
class PathConfig:
    """Geometric grid ``lam_max * 10**(-delta * t / (T - 1))``, ``t < T``.

    ``explicit_lambdas`` overrides the grid when given.
    """

    num_points: int = 100
    delta: float = 3.0
    explicit_lambdas: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.explicit_lambdas is not None:
            lams = tuple(float(v) for v in self.explicit_lambdas)
            if not lams or min(lams) <= 0:
                raise ValueError("explicit lambdas must be positive")
            object.__setattr__(self, "explicit_lambdas", lams)
        elif self.num_points < 1:
            raise ValueError("num_points must be >= 1")
        elif not self.delta > 0:
            raise ValueError("delta must be > 0")

    def grid(self, lam_max: float) -> np.ndarray:
        if self.explicit_lambdas is not None:
            return np.array(self.explicit_lambdas)
        T = self.num_points
        if T == 1:
            return np.array([lam_max])
        return lam_max * 10.0 ** (-self.delta * np.arange(T) / (T - 1))


@dataclass(eq=False)
class SolveResult:
    beta: np.ndarray
    lam: float
    gap: float
    converged: bool
    passes_used: int
    gap_trace: List[Tuple[int, float]]
    screening_trace: List[Tuple[int, int, int]]
    wall_time: float
    theta: np.ndarray
    active_set: scr.ActiveSet
    primal: float = float("nan")
    dual: float = float("nan")


@dataclass(eq=False)
class PathResult:
    lambdas: np.ndarray
    results: List[SolveResult]
    lam_max: float
    wall_time: float = 0.0

    def __len__(self):
        return len(self.results)

    def __iter__(self):
        return iter(self.results)

    def __getitem__(self, i):
        return self.results[i]

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)


# ---------------------------------------------------------------------------
# block primitives


def spectral_norm(Xg) -> float:
    """Largest singular value of a block by power iteration on its Gram matrix."""
    Xg = np.asarray(Xg, dtype=float)
    if Xg.ndim == 1:
        Xg = Xg[:, None]
    n, k = Xg.shape
    A = Xg.T @ Xg if k <= n else Xg @ Xg.T
    if not np.any(A):
        return 0.0
    v = np.random.RandomState(0).standard_normal(A.shape[0])
    v /= np.linalg.norm(v)
    mu = 0.0
    for _ in range(_POWER_MAX_ITER):
        w = A @ v
        mu_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            break
        v = w / nrm
        if abs(mu_new - mu) <= _POWER_RTOL * mu_new:
            mu = mu_new
            break
        mu = mu_new
    else:
        # Clustered top eigenvalues; the block is small, finish exactly.
        mu = float(np.linalg.eigvalsh(A)[-1])
    return math.sqrt(max(mu, 0.0))


def block_lipschitz(Xg) -> float:
    """Block Lipschitz constant ``||X_g||_2^2`` of the least-squares gradient."""
    return spectral_norm(Xg) ** 2


def block_update(beta_g, grad_g, L_g: float, lam: float, tau: float,
                 w_g: float) -> np.ndarray:
    """Exact minimizer of the majorized objective on one block.

    ``GST_{(1-tau) w_g lam/L_g}(ST_{tau lam/L_g}(beta_g - grad_g / L_g))``.
    """
    if not L_g > 0:
        raise ValueError("L_g must be > 0")
    alpha = lam / L_g
    z = np.asarray(beta_g, float) - np.asarray(grad_g, float) / L_g
    return group_soft_threshold(soft_threshold(z, tau * alpha),
                                (1.0 - tau) * w_g * alpha)


@numba.njit(cache=True, nogil=True)
def _objective(beta, resid, starts, lam, tau, weights):
    l1 = 0.0
    grp = 0.0
    for g in range(starts.shape[0] - 1):
        s2 = 0.0
        for j in range(starts[g], starts[g + 1]):
            l1 += abs(beta[j])
            s2 += beta[j] * beta[j]
        grp += weights[g] * math.sqrt(s2)
    return 0.5 * np.dot(resid, resid) + lam * (tau * l1 + (1.0 - tau) * grp)


@numba.njit(cache=True, nogil=True, fastmath=True)
def _col_dot(X, j, v):
    acc = 0.0
    for i in range(v.shape[0]):
        acc += X[i, j] * v[i]
    return acc


@numba.njit(cache=True, nogil=True, fastmath=True)
def _col_axpy(X, j, a, v):
    for i in range(v.shape[0]):
        v[i] += a * X[i, j]


@numba.njit(cache=True, nogil=True)
def _cd_pass(X, beta, resid, starts, L, lam, tau, weights, group_active,
             feature_active, trace):
    """One cyclic pass over active groups; groups are contiguous in ``X``.

    When ``trace`` is non-empty the objective after each block update is
    written to it; the number of entries written is returned.
    """
    n_groups = starts.shape[0] - 1
    buf = np.empty(X.shape[1])
    n_traced = 0
    for g in range(n_groups):
        if not group_active[g] or L[g] == 0.0:
            continue
        s = starts[g]
        e = starts[g + 1]
        alpha = lam / L[g]
        thr = tau * alpha
        # gradient of the whole block at the current iterate
        sq = 0.0
        for j in range(s, e):
            z = 0.0
            if feature_active[j]:
                z = beta[j] + _col_dot(X, j, resid) / L[g]
                if z > thr:
                    z -= thr
                elif z < -thr:
                    z += thr
                else:
                    z = 0.0
            buf[j] = z
            sq += z * z
        nrm = math.sqrt(sq)
        gthr = (1.0 - tau) * weights[g] * alpha
        shrink = 0.0
        if nrm > gthr:
            shrink = 1.0 - gthr / nrm
        for j in range(s, e):
            new = shrink * buf[j]
            delta = new - beta[j]
            if delta != 0.0:
                _col_axpy(X, j, -delta, resid)
                beta[j] = new
        if n_traced < trace.shape[0]:
            trace[n_traced] = _objective(beta, resid, starts, lam, tau,
                                         weights)
            n_traced += 1
    return n_traced


@numba.njit(cache=True, nogil=True)
def _capped_dual_norm(xt, starts, alpha, R, scale, tau, weights, floor):
    # A group term is <= floor iff ||ST_{tau floor}(xt_g)|| <= (1-tau) w_g floor,
    # which is much cheaper than the root finding.
    best = floor
    thr = tau * floor
    for g in range(starts.shape[0] - 1):
        s = starts[g]
        e = starts[g + 1]
        sq = 0.0
        for j in range(s, e):
            a = abs(xt[j]) - thr
            if a > 0.0:
                sq += a * a
        bound = (1.0 - tau) * weights[g] * floor
        if sq <= bound * bound:
            continue
        v = _lambda_core(xt[s:e], alpha[g], R[g]) / scale[g]
        if v > best:
            best = v
    return best


@numba.njit(cache=True, nogil=True)
def _cd_passes(X, beta, resid, starts, L, lam, tau, weights, group_active,
               feature_active, n_passes):
    empty = np.empty(0)
    for _ in range(n_passes):
        _cd_pass(X, beta, resid, starts, L, lam, tau, weights, group_active,
                 feature_active, empty)


# ---------------------------------------------------------------------------
# solve


class Workspace:
    """Problem data laid out with contiguous groups, shared along a path."""

    def __init__(self, problem: Problem, penalty: PenaltyParams,
                 partition: GroupPartition):
        problem.check_partition(partition)
        penalty.check(partition)
        self.problem = problem
        self.penalty = penalty
        self.partition = partition
        order = partition.order
        self.order = order
        self.cpart = GroupPartition.contiguous(partition.sizes,
                                               partition.weights)
        self.cpenalty = PenaltyParams(penalty.tau, penalty.weights)
        self.X = np.asfortranarray(problem.X[:, order])
        self.y = problem.y
        self.cproblem = Problem(self.X, self.y)
        self.starts = self.cpart.starts
        self.spec = problem.spectral_norms(partition)
        self.L = self.spec ** 2
        self.col_norms = problem.col_norms[order]
        self.xty = problem.xty[order]
        ep = penalty.epsilon
        self.alpha = np.ascontiguousarray(1.0 - ep.eps)
        self.R = np.ascontiguousarray(ep.eps)
        self.scale = ep.scale
        self.weights = np.ascontiguousarray(penalty.weights)
        self.y_sq = float(self.y @ self.y)
        self.lam_max = self.dual_norm(self.xty)
        self._dst3 = None

    def dual_norm(self, xt) -> float:
        return float((_group_lambdas(xt, self.starts, self.alpha, self.R)
                      / self.scale).max())

    def capped_dual_norm(self, xt, floor: float) -> float:
        """``max(floor, dual_norm(xt))``, skipping groups inside the ball."""
        return _capped_dual_norm(xt, self.starts, self.alpha, self.R,
                                 self.scale, self.penalty.tau, self.weights,
                                 float(floor))

    @property
    def dst3(self):
        if self._dst3 is None:
            d = scr.dst3_direction(self.cproblem, self.cpenalty, self.cpart)
            self._dst3 = (d, self.X.T @ d.eta)
        return self._dst3

    def to_internal(self, beta) -> np.ndarray:
        return np.ascontiguousarray(
            self.problem.check_beta(beta)[self.order], dtype=float)

    def to_external(self, beta_c) -> np.ndarray:
        out = np.empty_like(beta_c)
        out[self.order] = beta_c
        return out

    def mask_to_external(self, mask_c) -> np.ndarray:
        out = np.empty_like(mask_c)
        out[self.order] = mask_c
        return out


def solve(problem: Problem, penalty: PenaltyParams, partition: GroupPartition,
          lam: float, init_beta=None, config: Optional[SolverConfig] = None,
          *, workspace: Optional[Workspace] = None,
          objective_trace: Optional[list] = None) -> SolveResult:
    """Solve the Sparse-Group Lasso at one ``lam`` from a warm start.

    Parameters
    ----------
    problem, penalty, partition
        Data, penalty parameters and groups.
    lam : float
        Regularization level, ``> 0``.
    init_beta : array, optional
        Starting point (zeros by default).
    config : SolverConfig, optional
    workspace : Workspace, optional
        Reused precomputations; built when omitted.
    objective_trace : list, optional
        When given, the primal objective before the first pass and after
        every block update is appended to it (slow, for diagnostics).

    Returns
    -------
    SolveResult
        ``converged`` is False when ``max_passes`` ran out before the gap
        reached ``tolerance``.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    config = config or SolverConfig()
    ws = workspace or Workspace(problem, penalty, partition)
    t0 = time.perf_counter()

    X, y, tau = ws.X, ws.y, penalty.tau
    beta = (np.zeros(problem.n_features) if init_beta is None
            else ws.to_internal(init_beta).copy())
    groups = ws.L > 0
    features = groups[ws.cpart.labels].copy()
    beta[~features] = 0.0
    active = scr.ActiveSet(groups, features)
    resid = y - X @ beta

    rule = config.rule
    if rule is Rule.DST3 and lam > ws.lam_max:
        # the DST3 hyperplane is only defined below lambda_max
        rule = Rule.DYNAMIC
    y_lam = y / lam
    y_lam_norm = float(np.linalg.norm(y_lam))
    xt_y_lam = ws.xty / lam
    ctx = scr.SphereContext(y, lam, ws.lam_max)
    if rule is Rule.STATIC:
        static_r = scr.reference_sphere(scr.SphereKind.STATIC, ctx).radius
    if rule is Rule.DST3:
        d3, xt_eta = ws.dst3
        ctx = scr.SphereContext(y, lam, ws.lam_max, dst3=d3)
        dst3_coef = scr.dst3_center_coef(ctx)
        dst3_center = y_lam - dst3_coef * d3.eta
        dst3_xt = xt_y_lam - dst3_coef * xt_eta
        dst3_offset = float(np.sum((y_lam - dst3_center) ** 2))

    tracing = objective_trace is not None
    trace_buf = np.empty(ws.cpart.n_groups if tracing else 0)
    if tracing:
        objective_trace.append(_objective(beta, resid, ws.starts, lam, tau,
                                          ws.weights))

    gap_trace, screening_trace = [], []
    passes = 0
    converged = False
    recheck = False
    while True:
        if (recheck or passes % config.gap_check_every == 0
                or passes >= config.max_passes):
            resid = y - X @ beta
            xtr = X.T @ resid
            denom = ws.capped_dual_norm(xtr, lam)
            theta = resid / denom
            primal = _objective(beta, resid, ws.starts, lam, tau, ws.weights)
            d = theta - y_lam
            dual = 0.5 * ws.y_sq - 0.5 * lam * lam * float(d @ d)
            gap = primal - dual
            gap_trace.append((passes, gap))
            converged = gap <= config.tolerance
            stopping = converged or passes >= config.max_passes
            if rule is not Rule.NONE:
                # also screen on the last check: its sphere is the tightest
                if rule is Rule.GAP:
                    xt_c = xtr / denom
                    # P - D carries a rounding error of order
                    # eps * (|P| + |D|); a zero radius would screen groups
                    # sitting on the boundary at the optimum.
                    slack = _GAP_ROUNDING * (abs(primal) + abs(dual))
                    radius = scr.gap_radius(
                        scr.GapReport(primal, dual, max(gap, 0.0) + slack,
                                      lam))
                elif rule is Rule.STATIC:
                    xt_c, radius = xt_y_lam, static_r
                elif rule is Rule.DYNAMIC:
                    xt_c = xt_y_lam
                    radius = float(np.linalg.norm(theta - y_lam))
                else:
                    xt_c = dst3_xt
                    r2 = float(np.sum((y_lam - theta) ** 2)) - dst3_offset
                    radius = math.sqrt(max(r2, 0.0))
                radius += _RADIUS_ROUNDING * y_lam_norm
                active = scr.screen(xt_c, radius, ws.cpenalty, ws.cpart,
                                    ws.col_norms, ws.spec, active)
                dropped = (beta != 0.0) & ~active.features
                if dropped.any():
                    beta[dropped] = 0.0
                    resid = y - X @ beta
                    if stopping:
                        # the reported gap must describe the returned beta
                        recheck = True
                        continue
            recheck = False
            screening_trace.append((passes, active.n_groups,
                                    active.n_features))
            if stopping:
                break
        if tracing:
            n_traced = _cd_pass(X, beta, resid, ws.starts, ws.L, lam, tau,
                                ws.weights, active.groups, active.features,
                                trace_buf)
            objective_trace.extend(trace_buf[:n_traced].tolist())
            passes += 1
        else:
            # run up to the next gap check in one call
            k = min(config.gap_check_every
                    - passes % config.gap_check_every,
                    config.max_passes - passes)
            _cd_passes(X, beta, resid, ws.starts, ws.L, lam, tau,
                       ws.weights, active.groups, active.features, k)
            passes += k

    if not converged:
        logger.warning("lambda=%.6g: gap %.3g > tol %.3g after %d passes",
                       lam, gap, config.tolerance, passes)
    return SolveResult(
        beta=ws.to_external(beta), lam=float(lam), gap=float(gap),
        converged=converged, passes_used=passes, gap_trace=gap_trace,
        screening_trace=screening_trace,
        wall_time=time.perf_counter() - t0, theta=theta,
        active_set=scr.ActiveSet(active.groups.copy(),
                                 ws.mask_to_external(active.features)),
        primal=float(primal), dual=float(dual))


def _zero_result(ws: Workspace, lam: float, rule: Rule) -> SolveResult:
    """Closed-form solution ``beta = 0``, ``theta = y / lam`` for lam >= lam_max.

    The gap is 0 there, and every rule's sphere collapses to ``{y / lam}``.
    """
    y = ws.y
    primal = 0.5 * float(y @ y)
    theta = y / lam
    dual = scr.dual_value(theta, y, lam)
    p = ws.problem.n_features
    groups = ws.L > 0
    features_c = groups[ws.cpart.labels]
    if rule is not Rule.NONE:
        radius = _RADIUS_ROUNDING * math.sqrt(ws.y_sq) / lam
        active = scr.screen(ws.xty / lam, radius, ws.cpenalty, ws.cpart,
                            ws.col_norms, ws.spec,
                            scr.ActiveSet(groups, features_c))
        groups, features_c = active.groups, active.features
    features = ws.mask_to_external(features_c)
    gap = primal - dual
    return SolveResult(
        beta=np.zeros(p), lam=float(lam), gap=gap, converged=True,
        passes_used=0, gap_trace=[(0, gap)],
        screening_trace=[(0, int(groups.sum()), int(features.sum()))],
        wall_time=0.0, theta=theta,
        active_set=scr.ActiveSet(groups, features), primal=primal, dual=dual)


def solve_path(problem: Problem, penalty: PenaltyParams,
               partition: GroupPartition,
               path_config: Optional[PathConfig] = None,
               config: Optional[SolverConfig] = None,
               warm_start: bool = True) -> PathResult:
    """Solve along a decreasing grid of ``lam``, warm-starting each point.

    Grid points at or above ``lambda_max`` get ``beta = 0`` without any
    pass over the data.
    """
    path_config = path_config or PathConfig()
    config = config or SolverConfig()
    t0 = time.perf_counter()
    ws = Workspace(problem, penalty, partition)
    lambdas = path_config.grid(ws.lam_max)
    results = []
    beta = np.zeros(problem.n_features)
    for lam in lambdas:
        if lam >= ws.lam_max:
            res = _zero_result(ws, float(lam), Rule(config.rule))
        else:
            res = solve(problem, penalty, partition, float(lam),
                        beta if warm_start else None, config, workspace=ws)
        results.append(res)
        beta = res.beta
    return PathResult(lambdas, results, ws.lam_max,
                      time.perf_counter() - t0)
