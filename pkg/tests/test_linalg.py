import numpy as np
import pytest

from signls.linalg import (
    CoefficientVector,
    CovarianceMatrix,
    DesignMatrix,
    ResponseVector,
    SignPattern,
    apply_sign_pattern,
    covariance,
    load_matrix_csv,
    load_vector_csv,
    save_matrix_csv,
    save_vector_csv,
    standardize_columns,
)


def test_design_matrix_is_frozen_and_copied():
    raw = np.ones((3, 2))
    X = DesignMatrix(raw)
    raw[0, 0] = 7.0
    assert X.values[0, 0] == 1.0
    with pytest.raises(ValueError):
        X.values[0, 0] = 5.0
    assert X.n == 3 and X.p == 2


def test_design_matrix_rejects_nonfinite():
    with pytest.raises(ValueError):
        DesignMatrix(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        ResponseVector(np.array([1.0, np.inf]))


def test_standardized_flag_is_verified():
    n = 50
    rng = np.random.default_rng(0)
    raw = rng.standard_normal((n, 3))
    with pytest.raises(ValueError):
        DesignMatrix(raw, standardized=True)
    X = standardize_columns(raw)
    assert X.standardized
    norms = np.sum(X.values**2, axis=0)
    assert np.max(np.abs(norms - n)) < 1e-9 * n


def test_standardize_zero_column_named_in_error():
    raw = np.ones((4, 3))
    raw[:, 1] = 0.0
    with pytest.raises(ValueError, match="column 1"):
        standardize_columns(raw)


def test_standardize_records_scales_for_original_coefficients():
    rng = np.random.default_rng(1)
    raw = rng.uniform(0.5, 2.0, size=(30, 4))
    X = standardize_columns(raw)
    beta_std = rng.uniform(0.0, 1.0, size=4)
    back = X.original_coefficients(beta_std)
    # fitted values must be identical in either parameterization
    assert np.allclose(X.values @ beta_std, raw @ back, atol=1e-12)


def test_covariance_standardized_has_unit_diagonal():
    rng = np.random.default_rng(2)
    X = standardize_columns(rng.standard_normal((40, 5)))
    S = covariance(X)
    assert isinstance(S, CovarianceMatrix)
    assert np.max(np.abs(np.diag(S.values) - 1.0)) < 1e-10
    assert np.max(np.abs(S.values - S.values.T)) == 0.0


def test_covariance_rejects_asymmetry():
    M = np.array([[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(ValueError):
        CovarianceMatrix(M)


def test_coefficient_vector_support():
    b = CoefficientVector(np.array([0.0, 2.0, 0.0, 1e-30]))
    assert b.support.tolist() == [1, 3]
    # signed entries are allowed: restricted OLS and cone minimizers use this
    signed = CoefficientVector(np.array([1.0, -0.1]))
    assert signed.support.tolist() == [0, 1]


def test_sign_pattern_validation_and_application():
    with pytest.raises(ValueError):
        SignPattern(np.array([1.0, 0.0]))
    sp = SignPattern(np.array([1.0, -1.0]))
    X = DesignMatrix(np.array([[1.0, 2.0], [3.0, 4.0]]))
    flipped = apply_sign_pattern(X, sp)
    assert np.array_equal(flipped.values[:, 1], -X.values[:, 1])


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    M = rng.standard_normal((6, 4))
    path = tmp_path / "m.csv"
    save_matrix_csv(path, M)
    back = load_matrix_csv(path)
    assert np.array_equal(M, back)  # repr round-trips doubles exactly

    v = rng.standard_normal(5)
    vpath = tmp_path / "v.csv"
    save_vector_csv(vpath, v)
    assert np.array_equal(load_vector_csv(vpath), v)


def test_csv_header_detection(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("a,b\n1.5,2.5\n3.5,4.5\n")
    M = load_matrix_csv(path)
    assert M.shape == (2, 2) and M[0, 0] == 1.5


def test_csv_ragged_rows_rejected(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="row"):
        load_matrix_csv(path)


def test_vector_csv_requires_single_column(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("1,2\n3,4\n")
    with pytest.raises(ValueError):
        load_vector_csv(path)
