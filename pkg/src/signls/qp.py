"""Small dense quadratic programs over the nonnegative orthant.

Standard form handled here:

    minimize    x^T Q x
    subject to  A x = b,  x >= 0

with Q symmetric positive semidefinite in the certified path. The primal
active-set method keeps a working set of free variables, solves the
equality-constrained subproblem by least squares, and moves between vertices
of the feasible region; with a lowest-index tie rule it terminates on convex
inputs. Indefinite Q is handled by a projected-gradient fallback that makes
no global claim.

Also hosts the simplex projection helpers shared with the solver module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class QpResult:
    """Outcome of one quadratic program.

    ``certified`` is set only when the KKT conditions were verified on the
    returned point and the objective is convex, so the point is a global
    minimizer up to the stated tolerances.
    """

    x: np.ndarray
    value: float
    multipliers: np.ndarray
    dual: np.ndarray
    iterations: int
    converged: bool
    certified: bool


def project_to_simplex(v, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) = total}."""
    v = np.asarray(v, dtype=float)
    if total <= 0:
        raise ValueError("simplex total must be positive")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - total
    k = np.arange(1, v.size + 1)
    mask = u - cumulative / k > 0
    rho = int(np.max(np.flatnonzero(mask))) + 1
    theta = cumulative[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


def project_orthant_l1(v, radius: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= radius}."""
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError("l1 radius must be nonnegative")
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= radius or radius == 0.0:
        return clipped if radius > 0 else np.zeros_like(v)
    return project_to_simplex(v, total=radius)


def _kkt_verified(Q, A, b, x, lam, tol: float) -> bool:
    scale = max(1.0, float(np.max(np.abs(Q @ x))) if x.size else 1.0)
    z = 2.0 * (Q @ x) - A.T @ lam
    if float(np.min(x)) < -tol:
        return False
    if float(np.max(np.abs(A @ x - b))) > tol * max(1.0, float(np.max(np.abs(b))) if b.size else 1.0):
        return False
    if float(np.min(z)) < -tol * scale:
        return False
    if float(np.max(np.abs(z * x))) > tol * scale:
        return False
    return True


def active_set_qp(
    Q,
    A,
    b,
    x0,
    tol: float = OPTIMALITY_TOL,
    max_iterations: Optional[int] = None,
    convex: bool = True,
) -> QpResult:
    """Minimize x^T Q x subject to A x = b, x >= 0 from a feasible start.

    Parameters
    ----------
    Q : (p, p) symmetric matrix.
    A : (m, p) equality constraint matrix.
    b : (m,) right-hand side.
    x0 : feasible starting point (x0 >= 0, A x0 = b).
    convex : declare Q positive semidefinite; only then can the result be
        certified as a global minimum.

    The equality-constrained subproblems are solved by least squares, which
    tolerates rank-deficient working sets. Entering and blocking variables
    are chosen by lowest index among ties.
    """
    Q = np.asarray(Q, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    x = np.array(x0, dtype=float, copy=True)
    p = Q.shape[0]
    m = A.shape[0]
    if A.shape[1] != p or b.shape[0] != m or x.shape[0] != p:
        raise ValueError("inconsistent QP dimensions")
    if float(np.min(x)) < -FEASIBILITY_TOL:
        raise ValueError("starting point violates x >= 0")
    bscale = max(1.0, float(np.max(np.abs(b))) if b.size else 1.0)
    if float(np.max(np.abs(A @ x - b))) > 1e-7 * bscale:
        raise ValueError("starting point violates the equality constraints")
    x = np.maximum(x, 0.0)
    if max_iterations is None:
        max_iterations = 50 * (p + m) + 100

    free = x > 0.0
    if not np.any(free):
        free = np.ones(p, dtype=bool)
    lam = np.zeros(m)
    iterations = 0
    converged = False
    while iterations < max_iterations:
        iterations += 1
        idx = np.flatnonzero(free)
        nf = idx.size
        kkt = np.zeros((nf + m, nf + m))
        kkt[:nf, :nf] = 2.0 * Q[np.ix_(idx, idx)]
        kkt[:nf, nf:] = -A[:, idx].T
        kkt[nf:, :nf] = A[:, idx]
        rhs = np.concatenate([np.zeros(nf), b])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        xt = np.zeros(p)
        xt[idx] = sol[:nf]
        lam = sol[nf:]
        target_feasible = nf == 0 or float(np.min(xt[idx])) >= -tol
        if target_feasible:
            x = np.maximum(xt, 0.0)
            z = 2.0 * (Q @ x) - A.T @ lam
            bound = np.flatnonzero(~free)
            if bound.size == 0:
                converged = True
                break
            zb = z[bound]
            scale = max(1.0, float(np.max(np.abs(Q @ x))))
            worst = float(np.min(zb))
            if worst >= -tol * scale:
                converged = True
                break
            enter = int(bound[int(np.argmin(zb))])
            free[enter] = True
        else:
            d = xt - x
            neg = idx[d[idx] < 0]
            ratios = x[neg] / (-d[neg])
            alpha = float(np.min(ratios))
            blockers = neg[ratios <= alpha * (1.0 + 1e-12)]
            blocker = int(np.min(blockers))
            x = np.maximum(x + min(alpha, 1.0) * d, 0.0)
            x[blocker] = 0.0
            free[blocker] = False
            if not np.any(free):
                # all variables pinned at zero; only feasible if b = 0
                free[blocker] = True
    value = float(x @ Q @ x)
    dual = 2.0 * (Q @ x) - A.T @ lam
    certified = bool(convex and converged and _kkt_verified(Q, A, b, x, lam, tol=1e-7))
    return QpResult(
        x=x,
        value=value,
        multipliers=lam,
        dual=dual,
        iterations=iterations,
        converged=converged,
        certified=certified,
    )


def _armijo_projected_descent(Q, x0, project, max_iterations: int = 2000) -> np.ndarray:
    """Local minimizer of x^T Q x over a convex set given its projector."""
    x = project(np.asarray(x0, dtype=float))
    step = 1.0 / max(1.0, float(np.linalg.norm(Q, 2)))
    value = float(x @ Q @ x)
    for _ in range(max_iterations):
        g = 2.0 * (Q @ x)
        t = step
        improved = False
        for _ in range(40):
            cand = project(x - t * g)
            cv = float(cand @ Q @ cand)
            drop = value - cv
            if drop > 1e-16 * max(1.0, abs(value)) and drop >= 1e-4 * t * float(g @ (x - cand)) - 1e-18:
                x, value = cand, cv
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    return x


def minimize_simplex_qp(Q, extra_starts=None, convex: bool = True) -> QpResult:
    """Minimize x^T Q x over the unit simplex {x >= 0, sum(x) = 1}.

    Multistart: the uniform vector plus every vertex, plus any caller starts.
    For convex Q each run is an exact active-set solve and the best KKT point
    is certified; for indefinite Q a vertex/edge scan seeds projected
    gradient descent and the result is a local minimum only.
    """
    Q = np.asarray(Q, dtype=float)
    p = Q.shape[0]
    ones = np.ones((1, p))
    b = np.array([1.0])
    starts = [np.full(p, 1.0 / p)]
    starts.extend(np.eye(p))
    if extra_starts is not None:
        for s in extra_starts:
            s = np.maximum(np.asarray(s, dtype=float), 0.0)
            t = s.sum()
            if t > 0:
                starts.append(s / t)
    if convex:
        best = None
        for s in starts:
            res = active_set_qp(Q, ones, b, s, convex=True)
            if best is None or res.value < best.value - 1e-15:
                best = res
        return best
    # indefinite path: closed-form scan of vertices and edges, then polish
    diag = np.diag(Q)
    best_x = np.zeros(p)
    best_x[int(np.argmin(diag))] = 1.0
    best_v = float(np.min(diag))
    for i in range(p):
        for j in range(i + 1, p):
            qii, qij, qjj = Q[i, i], Q[i, j], Q[j, j]
            den = qii - 2.0 * qij + qjj
            cands = [0.0, 1.0]
            if den > 0:
                cands.append(min(1.0, max(0.0, (qjj - qij) / den)))
            for t in cands:
                v = t * t * qii + 2 * t * (1 - t) * qij + (1 - t) * (1 - t) * qjj
                if v < best_v - 1e-15:
                    best_v = v
                    best_x = np.zeros(p)
                    best_x[i], best_x[j] = t, 1.0 - t
    starts.append(best_x)
    out = None
    out_v = np.inf
    for s in starts:
        x = _armijo_projected_descent(Q, s, project_to_simplex)
        v = float(x @ Q @ x)
        if v < out_v:
            out, out_v = x, v
    return QpResult(
        x=out,
        value=out_v,
        multipliers=np.zeros(1),
        dual=2.0 * (Q @ out),
        iterations=0,
        converged=True,
        certified=False,
    )
