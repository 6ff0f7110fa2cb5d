"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; the full-scale
benchmark (criterion 7) takes several minutes.
"""

import math
import time

import numpy as np
import pytest

from sglscreen import (GroupPartition, PenaltyParams, Problem,
                       SyntheticConfig, elastic_net_augment,
                       epsilon_decomposition, epsilon_dual_norm, epsilon_norm,
                       epsilon_norm_gradient, generate_synthetic, lambda_max,
                       lambda_solver, sgl_dual_norm, solve, solve_path)
from sglscreen.penalty import group_norms, group_soft_threshold, soft_threshold
from sglscreen.screening import equicorrelation_sets
from sglscreen.solver import PathConfig, SolverConfig

from conftest import random_partition, small_instance
from oracles import bisection_lambda, fista_sgl, kkt_residual, objective

SEEDS = range(20)
TAUS = (0.0, 0.2, 0.5, 0.8, 1.0)
RULES = ("gap", "static", "dynamic", "dst3")


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance {number}: {'PASS' if ok else 'FAIL'} "
                  f"({detail})")
    return emit


@pytest.fixture(scope="module")
def references():
    """Gap-1e-12 unscreened paths on the 20 desk-scale instances."""
    out = {}
    start = time.perf_counter()
    for seed in SEEDS:
        prob, part, _ = small_instance(seed=seed)
        pen = part.penalty(0.2)
        ref = solve_path(prob, pen, part, PathConfig(20, 3.0),
                         SolverConfig(1e-12, rule="none", max_passes=500_000))
        out[seed] = (prob, part, pen, ref)
    return out, time.perf_counter() - start


# ---------------------------------------------------------------------------
# 1. Lambda solver


def test_lambda_solver_oracle(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 51))
        x = rng.standard_normal(d) * 10.0 ** rng.uniform(-4, 4, size=d)
        alpha = rng.uniform(1e-3, 1.0 - 1e-3)
        R = rng.uniform(1e-3, 2.0)
        nu = lambda_solver(x, alpha, R)
        want = bisection_lambda(x, alpha, R)
        worst = max(worst, abs(nu - want) / want)
    elapsed = time.perf_counter() - start

    # the four degenerate branches
    x = np.array([3.0, -4.0])
    branches = [
        lambda_solver(x, 0.0, 0.0) == math.inf,
        math.isclose(lambda_solver(x, 0.0, 2.0), 2.5, rel_tol=1e-15),
        math.isclose(lambda_solver(x, 0.5, 0.0), 8.0, rel_tol=1e-15),
        # alpha^2 j0 == R^2: the quadratic is linear
        math.isclose(lambda_solver([1.0, 0.99, 0.98, 0.97], 0.5, 1.0),
                     bisection_lambda([1.0, 0.99, 0.98, 0.97], 0.5, 1.0),
                     rel_tol=1e-12),
    ]
    ok = worst <= 1e-10 and all(branches) and elapsed < 5.0
    report(1, ok, f"max rel err {worst:.2e}, branches {sum(branches)}/4, "
                  f"{elapsed:.2f}s")
    assert worst <= 1e-10
    assert all(branches)
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2. dual-norm boundary


def test_dual_norm_boundary(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for tau in TAUS:
        for _ in range(40):
            part = random_partition(rng, int(rng.integers(5, 60)))
            weights = rng.uniform(0.2, 3.0, part.n_groups)
            pen = PenaltyParams(tau, weights)
            xi = rng.standard_normal(part.n_features) * \
                10.0 ** rng.uniform(-2, 2)
            D = sgl_dual_norm(xi, pen, part)
            if tau == 1.0:
                # the ball degenerates to the l_inf unit ball
                excess = np.abs(xi / D).max() - 1.0
            else:
                # feasible on every group, tight on at least one
                st = group_norms(soft_threshold(xi / D, tau), part)
                excess = (st - (1.0 - tau) * weights).max()
            worst = max(worst, abs(excess))
    ok = worst <= 1e-8
    report(2, ok, f"200 vectors, max boundary error {worst:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# 3. screening safety


def test_screening_safety(references, report):
    refs, ref_time = references
    start = time.perf_counter()
    violations = 0
    checked = 0
    for seed in SEEDS:
        prob, part, pen, ref = refs[seed]
        for rule in RULES:
            path = solve_path(prob, pen, part, PathConfig(20, 3.0),
                              SolverConfig(1e-8, rule=rule))
            for got, want in zip(path, ref):
                screened = ~got.active_set.features
                violations += int(np.count_nonzero(want.beta[screened]))
                checked += int(screened.sum())
    elapsed = ref_time + time.perf_counter() - start
    ok = violations == 0 and elapsed < 120
    report(3, ok, f"{violations} violations over {checked} screened "
                  f"variables, {elapsed:.0f}s")
    assert violations == 0
    assert elapsed < 120


# ---------------------------------------------------------------------------
# 4. equicorrelation convergence


def _sphere_width(res, spec):
    return math.sqrt(2.0 * max(res.gap, 0.0)) / res.lam * spec


def test_equicorrelation_convergence(references, report):
    # E is read off the reference dual point, whose distance to the dual
    # optimum is at most r_ref = sqrt(2 gap_ref) / lam. A point is generic
    # when every group margin (1-tau) w_g - ||ST(X_g^T theta)|| and every
    # feature margin tau - |X_j^T theta| inside E is either numerically tight
    # (<= TIGHT) or clears the band where neither the reference nor the GAP
    # sphere can decide it.
    TIGHT = 1e-9
    refs, _ = references
    tau = 0.2
    generic = equal = total = 0
    for seed in SEEDS:
        prob, part, pen, ref = refs[seed]
        path = solve_path(prob, pen, part, PathConfig(20, 3.0),
                          SolverConfig(1e-13, rule="gap",
                                       max_passes=500_000))
        spec = prob.spectral_norms(part).max()
        for got, want in zip(path, ref):
            total += 1
            t_ref = _sphere_width(want, spec)
            band = t_ref + 2.0 * _sphere_width(got, spec)
            xt = prob.X.T @ want.theta
            gm = (1.0 - tau) * part.weights - \
                group_norms(soft_threshold(xt, tau), part)
            E = equicorrelation_sets(want.theta, prob, pen, part,
                                     atol=t_ref + TIGHT)
            fm = (tau - np.abs(xt))[E.groups[part.labels]]
            if np.any((gm > TIGHT) & (gm <= band)) or \
                    np.any((fm > TIGHT) & (fm <= band)):
                continue
            generic += 1
            equal += got.active_set == E
    ok = generic >= total // 2 and equal == generic
    report(4, ok, f"{equal}/{generic} generic path points match "
                  f"({total - generic} of {total} excluded as degenerate)")
    assert generic >= total // 2
    assert equal == generic


# ---------------------------------------------------------------------------
# 5. lambda_max


def test_lambda_max(report):
    zero_ok = nonzero_ok = 0
    cases = 0
    for seed in range(10):
        for tau in TAUS:
            prob, part, _ = small_instance(seed=seed)
            pen = part.penalty(tau)
            lmax = lambda_max(prob, pen, part)
            at = solve(prob, pen, part, lmax)
            zero_ok += (not at.beta.any()) and at.gap_trace[0] == (0, 0.0)
            below = solve(prob, pen, part, 0.99 * lmax,
                          config=SolverConfig(1e-10))
            nonzero_ok += below.converged and bool(below.beta.any())
            cases += 1
    ok = zero_ok == cases and nonzero_ok == cases
    report(5, ok, f"beta=0 with gap 0 at lambda_max: {zero_ok}/{cases}; "
                  f"nonzero at 0.99 lambda_max: {nonzero_ok}/{cases}")
    assert ok


# ---------------------------------------------------------------------------
# 6. solver correctness


def test_solver_correctness(report):
    tau = 0.2
    # monotone descent over every block update
    prob, part, _ = small_instance(seed=3)
    pen = part.penalty(tau)
    lmax = lambda_max(prob, pen, part)
    rise = -math.inf
    for frac in (0.5, 0.1, 0.02):
        trace = []
        solve(prob, pen, part, frac * lmax, config=SolverConfig(1e-8),
              objective_trace=trace)
        rise = max(rise, float(np.diff(trace).max()))

    # dual feasibility form of the sub-differential inclusion at gap 1e-8,
    # and the full coordinate-wise residual at gap 1e-12
    kkt = full = 0.0
    for seed in range(5):
        prob, part, _ = small_instance(seed=seed)
        pen = part.penalty(tau)
        bound = (1.0 - tau) * part.weights
        for tol in (1e-8, 1e-12):
            for res in solve_path(prob, pen, part, PathConfig(20, 3.0),
                                  SolverConfig(tol)):
                assert res.gap <= tol
                st = group_norms(soft_threshold(prob.X.T @ res.theta, tau),
                                 part)
                kkt = max(kkt, float((st - bound).max()))
                if tol == 1e-12:
                    y_hat = prob.X @ res.beta + res.lam * res.theta
                    full = max(full, kkt_residual(prob.X, y_hat, res.beta,
                                                  res.lam, tau, part.weights,
                                                  part.groups))

    # orthogonal design
    rng = np.random.default_rng(5)
    sizes = [3, 2, 4, 1, 5]
    Q, _ = np.linalg.qr(rng.standard_normal((40, sum(sizes))))
    y = rng.standard_normal(40)
    opart = GroupPartition.contiguous(sizes)
    z = Q.T @ y
    orth = 0.0
    for tau_o in (0.0, 0.35, 1.0):
        pen_o = opart.penalty(tau_o)
        for frac in (0.8, 0.3, 0.05):
            lam = frac * lambda_max(Problem(Q, y), pen_o, opart)
            want = np.zeros(z.size)
            for g, w in zip(opart.groups, opart.weights):
                want[g] = group_soft_threshold(
                    soft_threshold(z[g], lam * tau_o),
                    lam * (1 - tau_o) * w)
            got = solve(Problem(Q, y), pen_o, opart, lam,
                        config=SolverConfig(1e-14))
            orth = max(orth, float(np.abs(got.beta - want).max()))

    ok = rise <= 1e-12 and kkt <= 1e-6 and full <= 1e-6 and orth <= 1e-8
    report(6, ok, f"max objective rise {rise:.1e}, KKT excess {kkt:.1e}, "
                  f"full residual {full:.1e}, orthogonal err {orth:.1e}")
    assert rise <= 1e-12
    assert kkt <= 1e-6 and full <= 1e-6
    assert orth <= 1e-8


# ---------------------------------------------------------------------------
# 7. effectiveness at scale


@pytest.mark.slow
def test_screening_effectiveness_at_scale(report):
    prob, part, _ = generate_synthetic(SyntheticConfig())
    pen = part.penalty(0.2)
    stats = {}
    start = time.perf_counter()
    for rule in ("none", "static", "dynamic", "dst3", "gap"):
        t0 = time.perf_counter()
        path = solve_path(prob, pen, part, PathConfig(100, 3.0),
                          SolverConfig(1e-8, rule=rule))
        elapsed = time.perf_counter() - t0
        frac = np.mean([t[2] / prob.n_features for r in path
                        for t in r.screening_trace])
        stats[rule] = (elapsed, frac, path.converged)
    total = time.perf_counter() - start
    gap_t, gap_f, _ = stats["gap"]
    speedup = stats["none"][0] / gap_t
    smallest = all(gap_f < stats[r][1] for r in ("static", "dynamic", "dst3"))
    converged = all(s[2] for s in stats.values())
    ok = smallest and speedup >= 2.0 and converged and total <= 900
    fracs = ", ".join(f"{r} {stats[r][1]:.3f}" for r in stats)
    report(7, ok, f"active fraction {fracs}; speedup vs none "
                  f"{speedup:.2f}x; {total:.0f}s")
    assert converged
    assert smallest
    assert speedup >= 2.0
    assert total <= 900


# ---------------------------------------------------------------------------
# 8. Elastic-Net reduction


def test_elastic_net_reduction(report):
    worst = 0.0
    for seed in range(5):
        prob, part, _ = small_instance(seed=seed, n=30, p=40, group_size=4,
                                       gamma1=2, gamma2=2)
        tau, lambda2 = (0.2, 0.5, 0.8, 0.0, 1.0)[seed], 0.1 * (seed + 1)
        pen = part.penalty(tau)
        aug = elastic_net_augment(prob, lambda2)
        lam = 0.1 * lambda_max(aug, pen, part)
        got = solve(aug, pen, part, lam, config=SolverConfig(1e-14))
        want = fista_sgl(prob.X, prob.y, lam, tau, part.weights, part.groups,
                         lambda2=lambda2, iters=200_000)
        f = lambda b: objective(prob.X, prob.y, b, lam, tau,  # noqa: E731
                                part.weights, part.groups, lambda2)
        assert f(got.beta) <= f(want) + 1e-10
        worst = max(worst, float(np.abs(got.beta - want).max()))
    ok = worst <= 1e-6
    report(8, ok, f"5 instances, max coefficient difference {worst:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 9. epsilon-norm lemmas


def test_epsilon_norm_lemmas(report):
    rng = np.random.default_rng(99)
    n = 500
    fails = {"decomposition": 0, "dual formula": 0, "gradient": 0,
             "euler": 0}

    def sample():
        d = int(rng.integers(1, 30))
        xi = rng.standard_normal(d) * 10.0 ** rng.uniform(-2, 2)
        return xi, rng.uniform(0.02, 0.98)

    for _ in range(n):
        xi, eps = sample()
        nu = epsilon_norm(xi, eps)
        a, b = epsilon_decomposition(xi, eps)
        good = (np.array_equal(a + b, xi)
                and math.isclose(np.linalg.norm(a), eps * nu, rel_tol=1e-9)
                and math.isclose(np.abs(b).max(), (1 - eps) * nu,
                                 rel_tol=1e-9)
                and math.isclose(np.linalg.norm(a) + np.abs(b).max(), nu,
                                 rel_tol=1e-9))
        fails["decomposition"] += not good

    for _ in range(n):
        # the sup of <xi, x> over the unit eps-ball is attained at
        # x = eps xi / ||xi|| + (1 - eps) sign(xi)
        xi, eps = sample()
        x = eps * xi / np.linalg.norm(xi) + (1 - eps) * np.sign(xi)
        dual = epsilon_dual_norm(xi, eps)
        good = (epsilon_norm(x, eps) <= 1 + 1e-10
                and math.isclose(xi @ x, dual, rel_tol=1e-10))
        for _ in range(5):
            v = rng.standard_normal(xi.size)
            good &= xi @ v <= dual * epsilon_norm(v, eps) * (1 + 1e-10)
        fails["dual formula"] += not good

    for _ in range(n):
        xi, eps = sample()
        grad = epsilon_norm_gradient(xi, eps)
        h = 1e-7 * np.linalg.norm(xi)
        fd = np.empty_like(xi)
        for j in range(xi.size):
            e = np.zeros_like(xi)
            e[j] = h
            fd[j] = (epsilon_norm(xi + e, eps) - epsilon_norm(xi - e, eps)) \
                / (2 * h)
        fails["gradient"] += not np.allclose(grad, fd, rtol=0, atol=1e-6)

    for _ in range(n):
        xi, eps = sample()
        grad = epsilon_norm_gradient(xi, eps)
        fails["euler"] += not math.isclose(grad @ xi, epsilon_norm(xi, eps),
                                           rel_tol=1e-10)

    ok = not any(fails.values())
    report(9, ok, ", ".join(f"{k} {n - v}/{n}" for k, v in fails.items()))
    assert ok, fails
