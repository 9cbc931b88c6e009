"""Dense matrix/vector containers shared by the solver and checker modules.

Conventions: rows are samples, columns are predictor variables. A design
matrix is "standardized" when every column has squared Euclidean norm equal
to the number of rows, which gives the associated covariance matrix
``n^{-1} X^T X`` a unit diagonal. Columns are not mean-centered unless
explicitly requested.

All containers are immutable after construction (the wrapped arrays are
copied and marked read-only), so they are safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# Default tolerances. Every operation that uses one accepts an override.
STANDARDIZE_RTOL = 1e-12
STANDARDIZED_FLAG_TOL = 1e-8
SYMMETRY_ATOL = 1e-12
GRAM_EIGENVALUE_TOL = 1e-8
UNIT_DIAGONAL_TOL = 1e-8


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """An n-by-p predictor matrix.

    Parameters
    ----------
    values : array_like, shape (n, p)
        One sample per row, one predictor per column.
    standardized : bool
        Set when every column satisfies ``||X_k||_2^2 == n`` (checked on
        construction to within ``STANDARDIZED_FLAG_TOL * n``).
    column_scales : ndarray, optional
        Multipliers applied to the original columns, retained so fitted
        coefficients can be mapped back: ``beta_original = scales * beta``.
    column_ids : ndarray, optional
        External identity of each column (used by the tomography module to
        remember which network node a column describes).
    """

    values: np.ndarray
    standardized: bool = False
    column_scales: Optional[np.ndarray] = None
    column_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        arr = _frozen_array(self.values, ndim=2)
        n, p = arr.shape
        if n < 1 or p < 1:
            raise ValueError("design matrix must have at least one row and one column")
        if self.standardized:
            sq = np.einsum("ij,ij->j", arr, arr)
            worst = float(np.max(np.abs(sq - n)))
            if worst > STANDARDIZED_FLAG_TOL * n:
                raise ValueError(
                    f"standardized flag set but a column has ||x||^2 off by {worst:.3g}"
                )
        object.__setattr__(self, "values", arr)
        if self.column_scales is not None:
            scales = _frozen_array(self.column_scales, ndim=1)
            if scales.shape != (p,):
                raise ValueError("column_scales length must equal the column count")
            object.__setattr__(self, "column_scales", scales)
        if self.column_ids is not None:
            ids = np.array(self.column_ids, copy=True)
            if ids.shape != (p,):
                raise ValueError("column_ids length must equal the column count")
            ids.setflags(write=False)
            object.__setattr__(self, "column_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def original_coefficients(self, beta) -> np.ndarray:
        """Map coefficients fitted on this matrix back to the pre-scaling columns."""
        b = np.asarray(beta, dtype=float)
        if self.column_scales is None:
            return b.copy()
        return self.column_scales * b


@dataclass(frozen=True, eq=False)
class ResponseVector:
    """The length-n observation vector paired with a design matrix."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=1))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """A p-by-p symmetric matrix, either empirical ``n^{-1} X^T X`` or population."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, ndim=2)
        p, q = arr.shape
        if p != q:
            raise ValueError("covariance matrix must be square")
        asym = float(np.max(np.abs(arr - arr.T))) if p else 0.0
        if asym > SYMMETRY_ATOL:
            raise ValueError(f"matrix is asymmetric by {asym:.3g} (> {SYMMETRY_ATOL})")
        object.__setattr__(self, "values", arr)

    @property
    def p(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """A length-p coefficient vector; ``support`` lists the nonzero indices."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, ndim=1))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.values) > 0)


@dataclass(frozen=True, eq=False)
class SignPattern:
    """Per-variable constraint direction, +1 (nonnegative) or -1 (nonpositive)."""

    signs: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.signs, ndim=1)
        if not np.all(np.abs(arr) == 1.0):
            raise ValueError("sign pattern entries must be +1 or -1")
        object.__setattr__(self, "signs", arr)

    @property
    def p(self) -> int:
        return self.signs.shape[0]


def as_matrix(X) -> np.ndarray:
    """Return the underlying 2-D float array of a DesignMatrix or array_like."""
    if isinstance(X, DesignMatrix):
        return X.values
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    return arr


def as_vector(v) -> np.ndarray:
    """Return the underlying 1-D float array of a vector container or array_like."""
    if isinstance(v, (ResponseVector, CoefficientVector)):
        return v.values
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D array, got shape {arr.shape}")
    return arr


def as_covariance(S) -> np.ndarray:
    if isinstance(S, CovarianceMatrix):
        return S.values
    return CovarianceMatrix(np.asarray(S, dtype=float)).values


def standardize_columns(X, center: bool = False, rtol: float = STANDARDIZE_RTOL) -> DesignMatrix:
    """Scale every column so its squared Euclidean norm equals the row count.

    Scaling factors are retained on the result (``column_scales``) so that
    coefficient estimates can be mapped back to the original column scale.
    Columns are mean-centered first only when ``center`` is set.

    Raises
    ------
    ValueError
        If any column has zero norm (naming the offending column).
    """
    dm = X if isinstance(X, DesignMatrix) else DesignMatrix(as_matrix(X))
    arr = dm.values
    n = dm.n
    if center:
        arr = arr - arr.mean(axis=0, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->j", arr, arr))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"column {int(zero[0])} has zero norm and cannot be standardized")
    scales = np.sqrt(n) / norms
    out = arr * scales
    # enforce the contract exactly: one corrective pass removes rounding drift
    sq = np.einsum("ij,ij->j", out, out)
    bad = np.abs(sq - n) > rtol * n
    if np.any(bad):
        fix = np.sqrt(n / sq[bad])
        out[:, bad] *= fix
        scales = scales.copy()
        scales[bad] *= fix
    prior = dm.column_scales if dm.column_scales is not None else np.ones(dm.p)
    return DesignMatrix(
        out,
        standardized=True,
        column_scales=prior * scales,
        column_ids=dm.column_ids,
    )


def covariance(
    X,
    gram_eig_tol: float = GRAM_EIGENVALUE_TOL,
    unit_diag_tol: float = UNIT_DIAGONAL_TOL,
) -> CovarianceMatrix:
    """Compute ``n^{-1} X^T X``, symmetric by construction.

    The upper triangle is computed and mirrored. Because the input is a real
    design matrix the result is validated to be positive semidefinite; for a
    standardized input the diagonal must be 1 and all entries in [-1, 1].
    """
    dm = X if isinstance(X, DesignMatrix) else DesignMatrix(as_matrix(X))
    arr = dm.values
    raw = arr.T @ arr / dm.n
    upper = np.triu(raw)
    sym = upper + np.triu(raw, 1).T
    eig_min = float(np.linalg.eigvalsh(sym)[0])
    if eig_min < -gram_eig_tol:
        raise ValueError(f"Gram-derived covariance has eigenvalue {eig_min:.3g} < -{gram_eig_tol}")
    if dm.standardized:
        diag_err = float(np.max(np.abs(np.diag(sym) - 1.0)))
        if diag_err > unit_diag_tol:
            raise ValueError(f"standardized design produced diagonal off by {diag_err:.3g}")
        if float(np.max(np.abs(sym))) > 1.0 + unit_diag_tol:
            raise ValueError("standardized design produced an entry outside [-1, 1]")
    return CovarianceMatrix(sym)


def apply_sign_pattern(X, pattern) -> DesignMatrix:
    """Multiply column k by ``signs[k]``.

    Solving nonnegative least squares on the result and flipping the signs
    back yields the sign-constrained solution of the original problem.
    """
    dm = X if isinstance(X, DesignMatrix) else DesignMatrix(as_matrix(X))
    signs = pattern.signs if isinstance(pattern, SignPattern) else SignPattern(np.asarray(pattern, dtype=float)).signs
    if signs.shape[0] != dm.p:
        raise ValueError(f"sign pattern length {signs.shape[0]} != column count {dm.p}")
    scales = dm.column_scales * signs if dm.column_scales is not None else None
    return DesignMatrix(
        dm.values * signs,
        standardized=dm.standardized,
        column_scales=scales,
        column_ids=dm.column_ids,
    )


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def load_matrix_csv(path) -> np.ndarray:
    """Read a comma-separated matrix, one sample per row.

    A single leading header row is skipped when its first token is not
    numeric. Ragged rows are rejected.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    if not _is_number(rows[0][0].strip()):
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: only a header row present")
    width = len(rows[0])
    data = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: ragged row {i} (expected {width} fields, got {len(row)})")
        try:
            data.append([float(cell) for cell in row])
        except ValueError as exc:
            raise ValueError(f"{path}: non-numeric value in row {i}: {exc}") from None
    return np.asarray(data, dtype=float)


def load_vector_csv(path) -> np.ndarray:
    """Read a single-column CSV into a 1-D array."""
    mat = load_matrix_csv(path)
    if mat.shape[1] != 1:
        raise ValueError(f"{path}: expected a single column, got {mat.shape[1]}")
    return mat[:, 0]


def save_matrix_csv(path, values, header: Optional[Sequence[str]] = None) -> None:
    values = getattr(values, "values", values)
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if header is not None:
            writer.writerow(list(header))
        for row in arr:
            writer.writerow([repr(float(v)) for v in row])


def save_vector_csv(path, values, header: Optional[str] = None) -> None:
    values = getattr(values, "values", values)
    arr = np.asarray(values, dtype=float).reshape(-1, 1)
    save_matrix_csv(path, arr, header=[header] if header is not None else None)
