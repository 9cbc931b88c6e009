"""Design-condition checkers for sign-constrained least squares.

Two quantities of a p-by-p symmetric matrix S govern recovery quality:

  * the orthant-restricted l1-eigenvalue
        min { b^T S b / ||b||_1^2 : b >= 0 },
    computed exactly as a quadratic program over the unit simplex;

  * the cone-restricted (compatibility) constant
        min { s * b^T S b / ||b||_1^2 : ||b_N||_1 <= L ||b_S||_1 },
    computed exactly at small p by sign-pattern enumeration, or replaced by
    a certified lower bound at larger p.

Three structural sufficient conditions (all entries positive; few negative
entries; block structure with weakly negative off-blocks) give quick lower
bounds on the first quantity without solving any program, and a transfer
report relates population and empirical values.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linalg import CoefficientVector, as_covariance
from .qp import active_set_qp, minimize_simplex_qp

PSD_TOL = 1e-10
EXACT_ENUMERATION = "exact-enumeration"
LOWER_BOUND = "lower-bound"
MAX_ENUMERATION_P = 16


@dataclass(frozen=True, eq=False)
class PositiveEigenvalueResult:
    """Value and witness of the orthant-restricted l1-eigenvalue.

    ``certified`` means the witness passed a KKT check of a convex program,
    so the value is the global minimum; uncertified values (indefinite
    input) are upper bounds on it.
    """

    nu: float
    minimizer: CoefficientVector
    certified: bool


@dataclass(frozen=True, eq=False)
class CompatibilityResult:
    phi_sq: float
    L: float
    S: np.ndarray
    method: str
    minimizer: CoefficientVector


@dataclass(frozen=True, eq=False)
class NegativeEntriesResult:
    """Outcome of the few-negative-entries check.

    ``negative_set`` collects every row that meets a negative entry;
    ``nu`` is present when both sub-conditions certify a positive value;
    ``restricted_exact`` is False when the restricted eigenvalue had to be
    replaced by its spectral lower bound (set larger than 16).
    """

    negative_set: np.ndarray
    nu: Optional[float]
    restricted_exact: bool


@dataclass(frozen=True)
class TransferReport:
    """Population-to-empirical transfer of the compatibility constant."""

    empirical_lower_bound: float
    delta_threshold: float
    guaranteed_half: bool


def _is_psd(M: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(M))))
    return float(np.linalg.eigvalsh(M)[0]) >= -PSD_TOL * scale


def positive_eigenvalue(Sigma) -> PositiveEigenvalueResult:
    """Minimize b^T S b / ||b||_1^2 over the nonnegative orthant.

    The ratio is invariant to positive scaling, so the minimum is taken over
    the unit simplex. Positive semidefinite input gives an exact, certified
    answer; indefinite input falls back to a vertex/edge scan plus projected
    gradient descent and is flagged uncertified.
    """
    M = as_covariance(Sigma)
    convex = _is_psd(M)
    res = minimize_simplex_qp(M, convex=convex)
    x = np.maximum(res.x, 0.0)
    total = float(x.sum())
    if total <= 0:
        raise RuntimeError("simplex minimizer degenerated to the zero vector")
    x = x / total
    nu = float(x @ M @ x)
    return PositiveEigenvalueResult(
        nu=nu,
        minimizer=CoefficientVector(x),
        certified=bool(convex and res.certified),
    )


def _check_support_set(S, p: int) -> np.ndarray:
    S = np.unique(np.asarray(S, dtype=int))
    if S.size == 0:
        raise ValueError("support set must be nonempty")
    if S.min() < 0 or S.max() >= p:
        raise ValueError(f"support indices must lie in [0, {p - 1}]")
    return S


def _cone_qp(M: np.ndarray, S: np.ndarray, L: float):
    """Minimize g^T M g over {g >= 0, sum g = 1, sum_N g <= L sum_S g}.

    The cone inequality gets a slack variable t >= 0, turning the problem
    into standard form with two equality rows. Feasible starts: each vertex
    e_k for k in S (slack L) and uniform mass on S.
    """
    p = M.shape[0]
    Q = np.zeros((p + 1, p + 1))
    Q[:p, :p] = M
    coeff = np.ones(p)
    coeff[S] = -L
    A = np.zeros((2, p + 1))
    A[0, :p] = 1.0
    A[1, :p] = coeff
    A[1, p] = 1.0
    b = np.array([1.0, 0.0])
    starts = []
    for k in S:
        x0 = np.zeros(p + 1)
        x0[k] = 1.0
        x0[p] = L
        starts.append(x0)
    uni = np.zeros(p + 1)
    uni[S] = 1.0 / S.size
    uni[p] = L
    starts.append(uni)
    best = None
    for x0 in starts:
        res = active_set_qp(Q, A, b, x0, convex=True)
        if best is None or res.value < best.value - 1e-15:
            best = res
    return best


def compatibility_constant_exact(Sigma, S, L: float) -> CompatibilityResult:
    """Exact cone-restricted constant by sign-pattern enumeration.

    Substituting b = diag(sigma) g with g >= 0 makes the objective convex
    for each fixed sigma; the cone and normalization constraints depend only
    on |b|, so minimizing over all 2^(p-1) patterns (global sign flip is
    free) and taking the smallest value is exact. Capped at p = 16.
    """
    M = as_covariance(Sigma)
    p = M.shape[0]
    if p > MAX_ENUMERATION_P:
        raise ValueError(
            f"p = {p} exceeds the enumeration cap {MAX_ENUMERATION_P}; "
            "use compatibility_lower_bound instead"
        )
    if L <= 0:
        raise ValueError("L must be positive")
    S = _check_support_set(S, p)
    s = S.size
    best_val = np.inf
    best_beta = None
    for bits in itertools.product((1.0, -1.0), repeat=p - 1):
        sigma = np.concatenate([[1.0], bits])
        Ms = M * np.outer(sigma, sigma)
        res = _cone_qp(Ms, S, L)
        if res.value < best_val - 1e-15:
            best_val = res.value
            best_beta = sigma * np.maximum(res.x[:p], 0.0)
    total = float(np.sum(np.abs(best_beta)))
    beta = best_beta / total
    phi_sq = s * float(beta @ M @ beta)
    return CompatibilityResult(
        phi_sq=phi_sq,
        L=float(L),
        S=S,
        method=EXACT_ENUMERATION,
        minimizer=CoefficientVector(beta),
    )


def compatibility_lower_bound(
    Sigma,
    S,
    L: float,
    reference_phi_sq: Optional[float] = None,
    delta: Optional[float] = None,
) -> CompatibilityResult:
    """Certified lower bound on the cone-restricted constant, any p.

    Combines (a) the spectral bound s * lambda_min / p from the norm
    inequality ||b||_2^2 >= ||b||_1^2 / p, and (b), when a reference value
    and an entrywise deviation delta are supplied, the transfer bound
    reference - (L+1) sqrt(delta s). The reported minimizer is a feasible
    witness (uniform on S), not an optimizer.
    """
    M = as_covariance(Sigma)
    p = M.shape[0]
    S = _check_support_set(S, p)
    s = S.size
    lam_min = float(np.linalg.eigvalsh(M)[0])
    bound = s * lam_min / p if lam_min >= 0 else s * lam_min
    if reference_phi_sq is not None and delta is not None:
        transfer = float(reference_phi_sq) - (L + 1.0) * float(np.sqrt(delta * s))
        bound = max(bound, transfer)
    witness = np.zeros(p)
    witness[S] = 1.0 / s
    return CompatibilityResult(
        phi_sq=float(bound),
        L=float(L),
        S=S,
        method=LOWER_BOUND,
        minimizer=CoefficientVector(witness),
    )


def strictly_positive_entries_bound(Sigma) -> Optional[float]:
    """If every entry of Sigma is strictly positive, the smallest entry is a
    valid lower bound on the orthant-restricted l1-eigenvalue."""
    M = as_covariance(Sigma)
    smallest = float(np.min(M))
    return smallest if smallest > 0.0 else None


def _signed_l1_eigenvalue_exact(M: np.ndarray) -> float:
    """min b^T M b / ||b||_1^2 over all signed b, by pattern enumeration.

    Only meaningful for PSD M (indefinite M makes the value negative, which
    the caller detects from the spectrum first).
    """
    a = M.shape[0]
    if a == 1:
        return float(M[0, 0])
    best = np.inf
    for bits in itertools.product((1.0, -1.0), repeat=a - 1):
        sigma = np.concatenate([[1.0], bits])
        Ms = M * np.outer(sigma, sigma)
        res = minimize_simplex_qp(Ms, convex=True)
        if res.value < best:
            best = res.value
    return float(best)


def few_negative_entries_bound(Sigma) -> NegativeEntriesResult:
    """Lower bound when negative entries are confined to a small index set.

    A = rows meeting a negative entry. Requires (1) entries at least 2 nu on
    the complement of A and (2) the unrestricted l1-eigenvalue of the A-block
    above 2 nu; returns nu = min(both)/2. Sets larger than 16 use the
    spectral lower bound lambda_min/|A| for (2) and are flagged.
    """
    M = as_covariance(Sigma)
    p = M.shape[0]
    rows_with_negative = np.any(M < 0.0, axis=1)
    A = np.flatnonzero(rows_with_negative)
    comp = np.flatnonzero(~rows_with_negative)
    if comp.size:
        m1 = float(np.min(M[np.ix_(comp, comp)]))
    else:
        m1 = np.inf
    restricted_exact = True
    if A.size == 0:
        # no negative entries anywhere: the split argument is not needed and
        # the plain minimum-entry bound applies without the factor 2
        nu = m1 if np.isfinite(m1) and m1 > 0.0 else None
        return NegativeEntriesResult(negative_set=A, nu=nu, restricted_exact=True)
    else:
        block = M[np.ix_(A, A)]
        lam_min = float(np.linalg.eigvalsh(block)[0])
        if lam_min < 0.0:
            # signed minimization reaches lam_min * ||v||_2^2 / ||v||_1^2 < 0
            m2 = lam_min
        elif A.size > MAX_ENUMERATION_P:
            m2 = lam_min / A.size
            restricted_exact = False
        else:
            m2 = _signed_l1_eigenvalue_exact(block)
    value = min(m1, m2)
    nu = value / 2.0 if value > 0.0 else None
    if nu is not None and not np.isfinite(nu):
        # both sets empty cannot happen (p >= 1); guard anyway
        nu = None
    return NegativeEntriesResult(negative_set=A, nu=nu, restricted_exact=restricted_exact)


def block_structure_bound(Sigma, blocks: Sequence[Sequence[int]], rho: float) -> Optional[float]:
    """Lower bound from a block partition with weakly negative off-blocks.

    Requires every entry at least -rho/p^2 and returns
    min_j value(block_j)/B - rho where value is the per-block
    orthant-restricted l1-eigenvalue; absent when negative or when the entry
    condition fails.
    """
    M = as_covariance(Sigma)
    p = M.shape[0]
    if rho <= 0:
        raise ValueError("rho must be positive")
    seen = np.zeros(p, dtype=bool)
    parts = []
    for block in blocks:
        idx = np.unique(np.asarray(block, dtype=int))
        if idx.size == 0:
            raise ValueError("empty block in partition")
        if idx.min() < 0 or idx.max() >= p:
            raise ValueError("block index out of range")
        if np.any(seen[idx]):
            raise ValueError("blocks overlap")
        seen[idx] = True
        parts.append(idx)
    if not np.all(seen):
        raise ValueError("blocks do not cover all indices")
    if float(np.min(M)) < -rho / p**2:
        return None
    B = len(parts)
    worst = np.inf
    for idx in parts:
        res = positive_eigenvalue(M[np.ix_(idx, idx)])
        worst = min(worst, res.nu)
    nu = worst / B - rho
    return float(nu) if nu >= 0.0 else None


def population_transfer(phi_population: float, delta: float, L: float, s: int) -> TransferReport:
    """Relate population and empirical compatibility values.

    ``phi_population`` is an asserted lower bound on the population constant
    (squared scale). The empirical constant is then at least
    phi_population - (L+1) sqrt(delta s); when delta stays below
    phi_population^2 / (4 (L+1)^2 s) the empirical constant keeps at least
    half the population bound.
    """
    if phi_population <= 0 or delta < 0 or L <= 0 or s < 1:
        raise ValueError("arguments must be positive (delta may be zero)")
    empirical = phi_population - (L + 1.0) * float(np.sqrt(delta * s))
    threshold = phi_population**2 / (4.0 * (L + 1.0) ** 2 * s)
    return TransferReport(
        empirical_lower_bound=float(empirical),
        delta_threshold=float(threshold),
        guaranteed_half=bool(delta <= threshold),
    )
