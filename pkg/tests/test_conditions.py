import numpy as np
import pytest

from signls.conditions import (
    block_structure_bound,
    compatibility_constant_exact,
    compatibility_lower_bound,
    few_negative_entries_bound,
    population_transfer,
    positive_eigenvalue,
    strictly_positive_entries_bound,
)


def angle_grid_compatibility(M, S, L, steps=200_000):
    """2-D grid oracle over directions; exact enough for 1e-4 checks."""
    assert M.shape == (2, 2)
    s = len(S)
    N = np.setdiff1d(np.arange(2), np.asarray(S))
    theta = np.linspace(0.0, np.pi, steps, endpoint=False)
    b = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cone = np.abs(b[:, N]).sum(axis=1) <= L * np.abs(b[:, np.asarray(S)]).sum(axis=1) + 1e-15
    b = b[cone]
    q = np.einsum("ij,jk,ik->i", b, M, b)
    l1 = np.abs(b).sum(axis=1)
    return float(np.min(s * q / l1**2))


def test_positive_eigenvalue_identity_and_ones():
    for p in range(2, 10):
        res = positive_eigenvalue(np.eye(p))
        assert abs(res.nu - 1.0 / p) < 1e-9
        assert res.certified
        ones = positive_eigenvalue(np.ones((p, p)))
        assert abs(ones.nu - 1.0) < 1e-9


def test_positive_eigenvalue_minimizer_invariants():
    rng = np.random.default_rng(0)
    for _ in range(10):
        B = rng.uniform(0.0, 1.0, size=(6, 5))
        M = B.T @ B
        res = positive_eigenvalue(M)
        x = res.minimizer.values
        assert abs(np.abs(x).sum() - 1.0) < 1e-9
        assert np.all(x >= -1e-12)
        assert abs(float(x @ M @ x) - res.nu) < 1e-10


def test_positive_eigenvalue_indefinite_diagnostic():
    M = np.array([[1.0, -2.0], [-2.0, 1.0]])
    res = positive_eigenvalue(M)
    # orthant minimum of an indefinite matrix with negative off-diagonal
    # entries: (.5,.5) gives (1 - 2)/2... value is (1+1-4)/4 = -0.5
    assert res.nu < 0.0
    assert not res.certified
    w = res.minimizer.values
    assert abs(float(w @ M @ w) - res.nu) < 1e-10


def test_compatibility_identity_2x2_known_value():
    res = compatibility_constant_exact(np.eye(2), np.array([0]), 1.0)
    assert abs(res.phi_sq - 0.5) < 1e-9
    ref = angle_grid_compatibility(np.eye(2), [0], 1.0)
    assert abs(res.phi_sq - ref) < 1e-4


def test_compatibility_full_support_identity():
    for p in (2, 3, 4):
        S = np.arange(p)
        res = compatibility_constant_exact(np.eye(p), S, 1.0)
        assert abs(res.phi_sq - 1.0) < 1e-9


def test_compatibility_monotone_in_L():
    rng = np.random.default_rng(1)
    B = rng.uniform(0.0, 1.0, size=(6, 4))
    M = B.T @ B + 0.1 * np.eye(4)
    S = np.array([0, 2])
    prev = np.inf
    for L in (0.5, 1.0, 2.0, 4.0):
        cur = compatibility_constant_exact(M, S, L).phi_sq
        assert cur <= prev + 1e-12
        prev = cur


def test_compatibility_grid_oracle_random_2x2():
    rng = np.random.default_rng(2)
    for _ in range(5):
        B = rng.uniform(0.1, 1.0, size=(3, 2))
        M = B.T @ B
        for S in ([0], [1]):
            for L in (0.7, 1.0, 2.5):
                res = compatibility_constant_exact(M, np.array(S), L)
                ref = angle_grid_compatibility(M, S, L)
                assert abs(res.phi_sq - ref) < 5e-4


def test_compatibility_minimizer_attains_value():
    rng = np.random.default_rng(3)
    B = rng.uniform(0.0, 1.0, size=(7, 5))
    M = B.T @ B + 0.05 * np.eye(5)
    S = np.array([1, 3])
    res = compatibility_constant_exact(M, S, 2.0)
    x = res.minimizer.values
    l1 = float(np.abs(x).sum())
    val = S.size * float(x @ M @ x) / l1**2
    assert abs(val - res.phi_sq) < 1e-8
    # cone membership
    N = np.setdiff1d(np.arange(5), S)
    assert np.abs(x[N]).sum() <= 2.0 * np.abs(x[S]).sum() + 1e-9


def test_compatibility_size_cap_names_fallback():
    M = np.eye(17)
    with pytest.raises(ValueError, match="compatibility_lower_bound"):
        compatibility_constant_exact(M, np.array([0]), 1.0)


def test_compatibility_lower_bound_never_exceeds_exact():
    rng = np.random.default_rng(4)
    for _ in range(10):
        B = rng.uniform(0.0, 1.0, size=(8, 5))
        M = B.T @ B + 0.1 * np.eye(5)
        S = np.array([0, 4])
        L = 1.5
        exact = compatibility_constant_exact(M, S, L).phi_sq
        lower = compatibility_lower_bound(M, S, L).phi_sq
        assert lower <= exact + 1e-10


def test_compatibility_lower_bound_transfer_route():
    res = compatibility_lower_bound(
        np.eye(4), np.array([0, 1]), 1.0, reference_phi_sq=1.0, delta=1.0 / 64.0
    )
    # reference - (L+1) sqrt(delta s) = 1 - 2 sqrt(1/32)
    expected = 1.0 - 2.0 * np.sqrt(2.0 / 64.0)
    assert res.phi_sq >= expected - 1e-12


def test_strictly_positive_entries():
    M = np.array([[1.0, 0.3], [0.3, 1.0]])
    assert abs(strictly_positive_entries_bound(M) - 0.3) < 1e-15
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert strictly_positive_entries_bound(Z) is None


def test_few_negative_entries_targeted():
    M = np.eye(4)
    M[0, 1] = M[1, 0] = -0.2
    M[2, 3] = M[3, 2] = 0.3
    res = few_negative_entries_bound(M)
    assert res.negative_set.tolist() == [0, 1]
    assert res.restricted_exact
    # m1 = min over {2,3} block = 0.3; m2 = signed value of the A-block
    exact = positive_eigenvalue(M).nu
    assert res.nu is not None
    assert res.nu <= exact + 1e-10


def test_few_negative_empty_set_degenerates_to_min_entry():
    M = np.array([[1.0, 0.4], [0.4, 1.0]])
    res = few_negative_entries_bound(M)
    assert res.negative_set.size == 0
    assert abs(res.nu - 0.4) < 1e-15


def test_few_negative_indefinite_block_fails():
    M = np.eye(3)
    M[0, 1] = M[1, 0] = -2.0  # A-block eigenvalues 1 +- 2: indefinite
    res = few_negative_entries_bound(M)
    assert res.nu is None


def test_block_structure_single_block():
    M = np.ones((4, 4))
    nu = block_structure_bound(M, [[0, 1, 2, 3]], 0.25)
    assert nu is not None and abs(nu - 0.75) < 1e-9


def test_block_structure_entry_condition():
    M = np.eye(4)
    M[0, 3] = M[3, 0] = -0.5  # violates entries >= -rho/p^2
    assert block_structure_bound(M, [[0, 1], [2, 3]], 0.1) is None


def test_block_structure_partition_validation():
    M = np.eye(4)
    with pytest.raises(ValueError):
        block_structure_bound(M, [[0, 1], [1, 2, 3]], 0.1)  # overlap
    with pytest.raises(ValueError):
        block_structure_bound(M, [[0, 1]], 0.1)  # not a cover


def test_population_transfer_worked_example():
    rep = population_transfer(1.0, 1.0 / 64.0, 1.0, 4)
    assert abs(rep.empirical_lower_bound - 0.5) < 1e-12
    assert abs(rep.delta_threshold - 1.0 / 64.0) < 1e-12
    assert rep.guaranteed_half


def test_population_transfer_threshold_quadratic():
    a = population_transfer(0.5, 1e-4, 1.0, 4).delta_threshold
    b = population_transfer(1.0, 1e-4, 1.0, 4).delta_threshold
    assert abs(b / a - 4.0) < 1e-9  # doubling phi quadruples the threshold


def test_examples_never_exceed_exact_value():
    # smaller version of the acceptance sweep (identical logic)
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = int(rng.integers(2, 7))
        B = rng.uniform(0.0, 1.0, size=(p + 2, p))
        M = B.T @ B
        exact = positive_eigenvalue(M)
        assert exact.certified
        v1 = strictly_positive_entries_bound(M)
        v2 = few_negative_entries_bound(M).nu
        v3 = block_structure_bound(M, [list(range(p))], 0.01)
        for v in (v1, v2, v3):
            if v is not None:
                assert v <= exact.nu + 1e-9
