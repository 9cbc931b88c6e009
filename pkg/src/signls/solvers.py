"""Nonnegative least squares and its constrained/restricted variants.

Problems solved here, all sharing the data (X, Y):

  * min ||Y - X b||_2^2 over b >= 0                      (solve_nnls)
  * the same with an extra budget ||b||_1 <= lambda      (solve_l1_constrained_nnls)
  * the same restricted to a support S, b = 0 off S      (solve_oracle_nnls)
  * unconstrained least squares restricted to S          (solve_restricted_ols)

Two independent algorithms are provided and cross-checked in the tests: a
classical active-set method and an accelerated projected-gradient method
with a support-polish step. Convergence is always declared on KKT residuals,
never on objective stagnation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linalg import CoefficientVector, as_matrix, as_vector
from .qp import active_set_qp, project_orthant_l1

ACTIVE_SET = "active-set"
PROJECTED_GRADIENT = "projected-gradient"

# beta entries at or below this (relative) floor count as zero for supports
SUPPORT_FLOOR = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    """Solver knobs.

    kkt_tolerance is relative: the working absolute tolerance is
    ``kkt_tolerance * max(1, ||X^T Y||_inf)``. ``max_iterations`` of None
    resolves to 10 p for the active-set method and max(10 p, 1000) for
    projected gradient, which needs more but cheaper iterations.
    """

    kkt_tolerance: float = 1e-9
    max_iterations: Optional[int] = None
    algorithm: str = ACTIVE_SET

    def __post_init__(self):
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.algorithm not in (ACTIVE_SET, PROJECTED_GRADIENT):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")


@dataclass(frozen=True, eq=False)
class NnlsSolution:
    """A fitted coefficient vector plus its optimality evidence."""

    beta: CoefficientVector
    active_set: np.ndarray
    objective: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    algorithm: str
    rank_deficient: bool = False


@dataclass(frozen=True)
class KktReport:
    """Violation magnitudes of the first-order optimality conditions.

    stationarity: how far min_k g_k falls below zero.
    complementarity: max_k |beta_k * g_k|.
    feasibility: how far min_k beta_k falls below zero.
    """

    stationarity_violation: float
    complementarity_violation: float
    feasibility_violation: float
    tolerance: float
    passed: bool


def _problem_arrays(X, Y):
    Xa = as_matrix(X)
    Ya = as_vector(Y)
    if Xa.shape[0] != Ya.shape[0]:
        raise ValueError(f"X has {Xa.shape[0]} rows but Y has {Ya.shape[0]} entries")
    return Xa, Ya


def _absolute_tolerance(Xa, Ya, opts: SolverOptions) -> float:
    return opts.kkt_tolerance * max(1.0, float(np.max(np.abs(Xa.T @ Ya))))


def _support(beta: np.ndarray) -> np.ndarray:
    scale = max(1.0, float(np.max(beta)) if beta.size else 1.0)
    return np.flatnonzero(beta > SUPPORT_FLOOR * scale)


def _finish(Xa, Ya, beta, iterations, converged, algorithm, rank_deficient=False) -> NnlsSolution:
    beta = np.maximum(np.asarray(beta, dtype=float), 0.0)
    residual = Xa @ beta - Ya
    return NnlsSolution(
        beta=CoefficientVector(beta),
        active_set=_support(beta),
        objective=float(residual @ residual),
        gradient=Xa.T @ residual,
        iterations=iterations,
        converged=converged,
        algorithm=algorithm,
        rank_deficient=rank_deficient,
    )


def verify_kkt(X, Y, beta, tol: float = 1e-9) -> KktReport:
    """Check first-order optimality of ``beta`` for min ||Y - Xb||^2, b >= 0.

    The gradient convention is g = X^T(Xb - Y). At an optimum g >= 0,
    beta >= 0 and beta_k g_k = 0 for every k.
    """
    Xa, Ya = _problem_arrays(X, Y)
    b = as_vector(beta)
    g = Xa.T @ (Xa @ b - Ya)
    stationarity = max(0.0, -float(np.min(g)))
    complementarity = float(np.max(np.abs(b * g))) if b.size else 0.0
    feasibility = max(0.0, -float(np.min(b)))
    gscale = 1.0 + float(np.max(np.abs(g))) if g.size else 1.0
    passed = stationarity <= tol and feasibility <= tol and complementarity <= tol * gscale
    return KktReport(
        stationarity_violation=stationarity,
        complementarity_violation=complementarity,
        feasibility_violation=feasibility,
        tolerance=tol,
        passed=bool(passed),
    )


def _nnls_active_set(Xa, Ya, tol_abs, max_iter):
    """Lawson-Hanson style active-set iteration, lowest-index tie breaks."""
    n, p = Xa.shape
    G = Xa.T @ Xa
    c = Xa.T @ Ya
    beta = np.zeros(p)
    passive = np.zeros(p, dtype=bool)
    rank_deficient = False
    outer = 0
    while outer < max_iter:
        w = c - G @ beta
        w_masked = np.where(passive, -np.inf, w)
        best = float(np.max(w_masked))
        if best <= tol_abs:
            break
        outer += 1
        passive[int(np.argmax(w_masked))] = True
        for _ in range(p + 1):
            idx = np.flatnonzero(passive)
            z, _, rank, _ = np.linalg.lstsq(Xa[:, idx], Ya, rcond=None)
            if rank < idx.size:
                rank_deficient = True
            if float(np.min(z)) > 0.0:
                beta = np.zeros(p)
                beta[idx] = z
                break
            move = z - beta[idx]
            shrink = move < 0
            ratios = beta[idx][shrink] / (-move[shrink])
            alpha = min(1.0, float(np.min(ratios)))
            beta[idx] = np.maximum(beta[idx] + alpha * move, 0.0)
            # the blocking variable lands at zero analytically; 1e-12 relative
            # absorbs rounding without dropping small legitimate coordinates
            drop = idx[beta[idx] <= 1e-12 * max(1.0, float(np.max(beta)))]
            if drop.size == 0:
                drop = np.array([idx[int(np.argmin(beta[idx]))]])
            beta[drop] = 0.0
            passive[drop] = False
            if not np.any(passive):
                break
    g = G @ beta - c
    converged = float(np.min(g)) >= -tol_abs and float(np.max(np.abs(beta * g))) <= tol_abs * (
        1.0 + float(np.max(np.abs(g)))
    )
    return beta, outer, bool(converged), rank_deficient


def _polish_orthant(Xa, Ya, support, tol_abs):
    """Exact solve on a candidate support; accept only on a full KKT pass."""
    if support.size == 0:
        beta = np.zeros(Xa.shape[1])
    else:
        z, _, _, _ = np.linalg.lstsq(Xa[:, support], Ya, rcond=None)
        if float(np.min(z)) < 0.0:
            return None
        beta = np.zeros(Xa.shape[1])
        beta[support] = z
    g = Xa.T @ (Xa @ beta - Ya)
    if float(np.min(g)) < -tol_abs:
        return None
    if float(np.max(np.abs(beta * g))) > tol_abs * (1.0 + float(np.max(np.abs(g)))):
        return None
    return beta


def _polish_l1_boundary(Xa, Ya, support, radius, tol_abs):
    """Candidate support solve with the budget constraint held at equality.

    Solves min ||Y - X_S b||^2 subject to sum(b) = radius; accepts only when
    the multiplier is nonnegative, b >= 0, and off-support stationarity
    2 g_k + mu >= 0 holds, which together certify global optimality.
    """
    s = support.size
    if s == 0:
        return None
    G = Xa[:, support].T @ Xa[:, support]
    c = Xa[:, support].T @ Ya
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = 2.0 * G
    kkt[:s, s] = 1.0
    kkt[s, :s] = 1.0
    rhs = np.concatenate([2.0 * c, [radius]])
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    b_s, mu = sol[:s], float(sol[s])
    if mu < -tol_abs or float(np.min(b_s)) < -tol_abs:
        return None
    b_s = np.maximum(b_s, 0.0)
    total = float(b_s.sum())
    if total <= 0:
        return None
    b_s *= radius / total
    beta = np.zeros(Xa.shape[1])
    beta[support] = b_s
    g = Xa.T @ (Xa @ beta - Ya)
    if float(np.min(2.0 * g + mu)) < -tol_abs:
        return None
    if float(np.max(np.abs(beta * (2.0 * g + mu)))) > tol_abs * (1.0 + float(np.max(np.abs(2 * g + mu)))):
        return None
    return beta


def _capped_support_qp(G, c, beta, radius):
    """Exact capped-budget solve restricted to the current support.

    The linear term is absorbed by one extra coordinate pinned to one, so
    the restricted problem fits the equality-constrained QP solver. Returns
    the refined full-length vector, or None when the support is too large
    or the QP does not certify.
    """
    S = np.flatnonzero(beta > SUPPORT_FLOOR)
    k = S.size
    if k == 0 or k > 400:
        return None
    mass = float(beta[S].sum())
    if mass <= 0:
        return None
    Q = np.zeros((k + 1, k + 1))
    Q[:k, :k] = G[np.ix_(S, S)]
    Q[:k, k] = -c[S]
    Q[k, :k] = -c[S]
    A = np.zeros((2, k + 1))
    A[0, :k] = 1.0
    A[1, k] = 1.0
    rhs = np.array([radius, 1.0])
    x0 = np.concatenate([beta[S] * (radius / mass), [1.0]])
    res = active_set_qp(Q, A, rhs, x0, tol=1e-11)
    if not res.converged:
        return None
    out = np.zeros_like(beta)
    out[S] = np.maximum(res.x[:k], 0.0)
    return out


def _nnls_projected_gradient(Xa, Ya, tol_abs, max_iter, radius=None, x0=None):
    """FISTA over the orthant (or the l1-capped orthant) with adaptive restart.

    Every polish interval the current support is solved exactly; the polished
    point is returned as soon as it passes the full KKT check, which is what
    usually terminates the iteration. x0 only seeds the iteration; the
    certified optimum does not depend on it.
    """
    n, p = Xa.shape
    G = Xa.T @ Xa
    c = Xa.T @ Ya
    y_sq = float(Ya @ Ya)

    def objective(b):
        return float(b @ (G @ b)) - 2.0 * float(c @ b) + y_sq

    def project(v):
        if radius is None:
            return np.maximum(v, 0.0)
        return project_orthant_l1(v, radius)

    # spectral norm of X, not eigvalsh(G): SVD runs on the smaller dimension
    lip = 2.0 * max(float(np.linalg.norm(Xa, 2)) ** 2, 1e-30)
    step = 1.0 / lip

    def kkt_pass(b):
        # approximate KKT for min ||Y-Xb||^2 over {b >= 0, sum b <= radius}:
        # with multiplier mu for the budget, stationarity needs 2g + mu >= 0
        # with equality on the support, and mu = 0 off the boundary
        g2 = 2.0 * (G @ b - c)
        mu = 0.0
        if radius is not None and float(b.sum()) >= radius * (1.0 - 1e-10):
            on = b > SUPPORT_FLOOR
            if np.any(on):
                mu = max(0.0, -float(np.min(g2[on])))
        stationarity = float(np.min(g2 + mu)) if p else 0.0
        comp = float(np.max(b * np.abs(g2 + mu))) if p else 0.0
        scale = 1.0 + float(np.max(np.abs(g2))) if p else 1.0
        return stationarity >= -tol_abs and comp <= tol_abs * scale

    beta = project(np.zeros(p) if x0 is None else np.asarray(x0, dtype=float))
    beta_prev = beta
    yv = beta
    t = 1.0
    f_curr = objective(beta)
    polish_every = 10
    finisher_at = 50
    it = 0
    while it < max_iter:
        it += 1
        grad_y = 2.0 * (G @ yv - c)
        cand = project(yv - step * grad_y)
        f_cand = objective(cand)
        if f_cand > f_curr + 1e-18:
            # adaptive restart: drop momentum, retry plain projected step
            yv = beta
            t = 1.0
            grad_y = 2.0 * (G @ yv - c)
            cand = project(yv - step * grad_y)
            f_cand = objective(cand)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        yv = cand + ((t - 1.0) / t_next) * (cand - beta)
        beta_prev, beta, t = beta, cand, t_next
        moved = float(np.max(np.abs(beta - beta_prev))) if p else 0.0
        f_curr = min(f_curr, f_cand)
        if it % polish_every == 0 or moved <= 1e-14 * max(1.0, float(np.max(beta))):
            support = _support(beta)
            if radius is None or float(beta.sum()) < radius * (1.0 - 1e-10):
                polished = _polish_orthant(Xa, Ya, support, tol_abs)
                if polished is not None and (radius is None or polished.sum() <= radius * (1.0 + 1e-12)):
                    if radius is not None and polished.sum() > radius:
                        polished *= radius / polished.sum()
                    return polished, it, True
            if radius is not None:
                polished = _polish_l1_boundary(Xa, Ya, support, radius, tol_abs)
                if polished is not None:
                    return polished, it, True
            # polish can fail when the minimizer is not unique (rank-deficient
            # support); the raw iterate may still satisfy KKT directly
            if kkt_pass(beta):
                return beta, it, True
            if radius is not None and it >= finisher_at:
                finisher_at *= 2
                refined = _capped_support_qp(G, c, beta, radius)
                if refined is not None and kkt_pass(refined):
                    return refined, it, True
            if moved <= 1e-15 * max(1.0, float(np.max(beta))):
                break
    # last polish attempt in case the loop ended between polish intervals
    support = _support(beta)
    if radius is None:
        polished = _polish_orthant(Xa, Ya, support, tol_abs)
        if polished is not None:
            return polished, it, True
        return beta, it, kkt_pass(beta)
    polished = _polish_orthant(Xa, Ya, support, tol_abs)
    if polished is not None and polished.sum() <= radius * (1.0 + 1e-12):
        if polished.sum() > radius:
            polished *= radius / polished.sum()
        return polished, it, True
    polished = _polish_l1_boundary(Xa, Ya, support, radius, tol_abs)
    if polished is not None:
        return polished, it, True
    if kkt_pass(beta):
        return beta, it, True
    refined = _capped_support_qp(G, c, beta, radius)
    if refined is not None and kkt_pass(refined):
        return refined, it, True
    return beta, it, False


def solve_nnls(X, Y, opts: Optional[SolverOptions] = None) -> NnlsSolution:
    """Global minimizer of ||Y - X b||_2^2 over b >= 0."""
    opts = opts or SolverOptions()
    Xa, Ya = _problem_arrays(X, Y)
    p = Xa.shape[1]
    tol_abs = _absolute_tolerance(Xa, Ya, opts)
    if opts.algorithm == ACTIVE_SET:
        max_iter = opts.max_iterations if opts.max_iterations is not None else 10 * p
        beta, iters, converged, rankdef = _nnls_active_set(Xa, Ya, tol_abs, max_iter)
        return _finish(Xa, Ya, beta, iters, converged, ACTIVE_SET, rankdef)
    max_iter = opts.max_iterations if opts.max_iterations is not None else max(10 * p, 1000)
    beta, iters, converged = _nnls_projected_gradient(Xa, Ya, tol_abs, max_iter)
    return _finish(Xa, Ya, beta, iters, converged, PROJECTED_GRADIENT)


def solve_l1_constrained_nnls(X, Y, l1_bound: float, opts: Optional[SolverOptions] = None,
                              start=None) -> NnlsSolution:
    """Global minimizer of ||Y - X b||_2^2 over {b >= 0, ||b||_1 <= l1_bound}.

    start is an optional initialization hint (for example the unconstrained
    NNLS solution); it cannot change the certified minimizer.
    """
    if l1_bound < 0:
        raise ValueError("l1 bound must be nonnegative")
    opts = opts or SolverOptions()
    Xa, Ya = _problem_arrays(X, Y)
    p = Xa.shape[1]
    if l1_bound == 0.0:
        return _finish(Xa, Ya, np.zeros(p), 0, True, opts.algorithm)
    tol_abs = _absolute_tolerance(Xa, Ya, opts)
    max_iter = opts.max_iterations if opts.max_iterations is not None else max(10 * p, 1000)
    beta, iters, converged = _nnls_projected_gradient(Xa, Ya, tol_abs, max_iter, radius=l1_bound,
                                                      x0=start)
    if float(beta.sum()) > l1_bound:
        beta = beta * (l1_bound / float(beta.sum()))
    return _finish(Xa, Ya, beta, iters, converged, PROJECTED_GRADIENT)


def lambda_max(sol: NnlsSolution) -> float:
    """The l1 norm of an NNLS solution: budgets at or above it change nothing."""
    return float(np.sum(np.abs(sol.beta.values)))


def _check_support(S, p) -> np.ndarray:
    S = np.unique(np.asarray(S, dtype=int))
    if S.size == 0:
        raise ValueError("support set must be nonempty")
    if S.min() < 0 or S.max() >= p:
        raise ValueError(f"support indices must lie in [0, {p - 1}]")
    return S


def solve_restricted_ols(X, Y, S) -> CoefficientVector:
    """Unconstrained least squares on columns S, zero elsewhere.

    The result may have negative entries; that is the point of the
    coincidence check against the oracle solution.
    """
    Xa, Ya = _problem_arrays(X, Y)
    S = _check_support(S, Xa.shape[1])
    sub = Xa[:, S]
    z, _, rank, _ = np.linalg.lstsq(sub, Ya, rcond=None)
    if rank < S.size:
        raise ValueError(
            f"columns {S.tolist()} have rank {rank} < {S.size}; restricted OLS is not unique"
        )
    beta = np.zeros(Xa.shape[1])
    beta[S] = z
    return CoefficientVector(beta)


def solve_oracle_nnls(X, Y, S, opts: Optional[SolverOptions] = None) -> NnlsSolution:
    """NNLS restricted to the support S (coefficients off S pinned to zero)."""
    opts = opts or SolverOptions()
    Xa, Ya = _problem_arrays(X, Y)
    p = Xa.shape[1]
    S = _check_support(S, p)
    sub = solve_nnls(Xa[:, S], Ya, opts)
    beta = np.zeros(p)
    beta[S] = sub.beta.values
    residual = Xa @ beta - Ya
    return NnlsSolution(
        beta=CoefficientVector(beta),
        active_set=S[sub.active_set],
        objective=float(residual @ residual),
        gradient=Xa.T @ residual,
        iterations=sub.iterations,
        converged=sub.converged,
        algorithm=sub.algorithm,
        rank_deficient=sub.rank_deficient,
    )


def brute_force_nnls(X, Y) -> CoefficientVector:
    """Enumerate all supports; testing oracle, exact for p <= 12.

    A candidate survives when its restricted least-squares solution is
    nonnegative on the support and the gradient is nonnegative off it; the
    survivor with the smallest objective is the NNLS optimum.
    """
    Xa, Ya = _problem_arrays(X, Y)
    p = Xa.shape[1]
    if p > 12:
        raise ValueError("brute force capped at p = 12 columns")
    tol = 1e-9 * max(1.0, float(np.max(np.abs(Xa.T @ Ya))))
    best = None
    best_obj = np.inf
    for size in range(p + 1):
        for S in itertools.combinations(range(p), size):
            beta = np.zeros(p)
            if size:
                z, _, _, _ = np.linalg.lstsq(Xa[:, list(S)], Ya, rcond=None)
                if float(np.min(z)) < -tol:
                    continue
                beta[list(S)] = np.maximum(z, 0.0)
            g = Xa.T @ (Xa @ beta - Ya)
            if float(np.min(g)) < -tol:
                continue
            obj = float(np.sum((Ya - Xa @ beta) ** 2))
            if obj < best_obj - 1e-12 * max(1.0, best_obj):
                best, best_obj = beta, obj
    if best is None:
        # numerically no subset certified; fall back to the active-set solve
        best = solve_nnls(Xa, Ya).beta.values
    return CoefficientVector(best)
