"""Minimum-l1 simplex solver against hand cases and an independent LP oracle."""
import numpy as np
import pytest
from scipy.optimize import linprog

from splineinv.simplex import (
    LpProblem,
    LpStatus,
    refine_extreme_point,
    solve_l1_lp,
)


def _highs_l1(A, z, free=()):
    """Independent oracle: the same sign-split LP handed to scipy's HiGHS."""
    n = A.shape[1]
    costed = sorted(set(range(n)) - set(free))
    c = np.zeros(2 * n)
    c[[2 * j for j in costed]] = 1.0
    c[[2 * j + 1 for j in costed]] = 1.0
    Alp = np.empty((A.shape[0], 2 * n))
    Alp[:, 0::2] = A
    Alp[:, 1::2] = -A
    return linprog(
        c, A_eq=Alp, b_eq=z, bounds=[(0, None)] * (2 * n), method="highs"
    )


def test_single_row_split_evenly_weighted():
    r = solve_l1_lp(LpProblem(A=np.array([[1.0, 1.0]]), z=np.array([2.0])))
    assert r.status is LpStatus.OPTIMAL
    assert r.objective == pytest.approx(2.0, abs=1e-12)


def test_single_row_prefers_large_coefficient():
    r = solve_l1_lp(LpProblem(A=np.array([[1.0, 2.0]]), z=np.array([2.0])))
    assert r.objective == pytest.approx(1.0, abs=1e-12)
    assert r.a[1] == pytest.approx(1.0, abs=1e-12)


def test_two_by_two_unique_solution():
    A = np.array([[1.0, -1.0], [1.0, 1.0]])
    r = solve_l1_lp(LpProblem(A=A, z=np.array([0.0, 4.0])))
    assert r.objective == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(r.a, [2.0, 2.0], atol=1e-12)


def test_free_column_absorbs_everything():
    r = solve_l1_lp(
        LpProblem(
            A=np.array([[1.0, 1.0]]), z=np.array([3.0]), free_cols=frozenset({1})
        )
    )
    assert r.objective == pytest.approx(0.0, abs=1e-12)
    assert r.b[0] == pytest.approx(3.0, abs=1e-12)


def test_negative_rhs():
    r = solve_l1_lp(LpProblem(A=np.array([[2.0, 1.0]]), z=np.array([-4.0])))
    assert r.status is LpStatus.OPTIMAL
    assert r.objective == pytest.approx(2.0, abs=1e-12)
    assert r.a[0] == pytest.approx(-2.0, abs=1e-12)


def test_zero_rhs_gives_zero():
    r = solve_l1_lp(LpProblem(A=np.array([[1.0, 2.0]]), z=np.array([0.0])))
    assert r.status is LpStatus.OPTIMAL
    assert r.objective == 0.0


@pytest.mark.parametrize(
    "A, z",
    [
        (np.zeros((1, 2)), np.array([1.0])),  # zero row, nonzero rhs
        (np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0])),  # contradiction
        (np.array([[1.0], [1.0]]), np.array([1.0, 2.0])),  # tall inconsistent
    ],
)
def test_infeasible_systems(A, z):
    r = solve_l1_lp(LpProblem(A=A, z=z))
    assert r.status is LpStatus.INFEASIBLE


def test_consistent_duplicate_rows():
    A = np.array([[1.0, 2.0], [1.0, 2.0]])
    r = solve_l1_lp(LpProblem(A=A, z=np.array([2.0, 2.0])))
    assert r.status is LpStatus.OPTIMAL
    assert r.objective == pytest.approx(1.0, abs=1e-12)


def test_problem_validation():
    with pytest.raises(ValueError):
        LpProblem(A=np.ones(3), z=np.ones(3))
    with pytest.raises(ValueError):
        LpProblem(A=np.ones((2, 3)), z=np.ones(3))
    with pytest.raises(ValueError):
        LpProblem(A=np.ones((2, 3)), z=np.ones(2), free_cols=frozenset({3}))
    with pytest.raises(ValueError):
        LpProblem(A=np.full((1, 1), np.nan), z=np.ones(1))


def test_matches_highs_on_random_instances():
    rng = np.random.default_rng(13)
    for trial in range(60):
        m = int(rng.integers(1, 8))
        n = int(rng.integers(m, 14))
        A = rng.normal(size=(m, n))
        x0 = rng.normal(size=n) * (rng.random(n) < 0.5)
        z = A @ x0
        mine = solve_l1_lp(LpProblem(A=A, z=z))
        ref = _highs_l1(A, z)
        assert mine.status is LpStatus.OPTIMAL
        assert ref.status == 0
        assert mine.objective == pytest.approx(ref.fun, abs=1e-7 * (1 + abs(ref.fun)))
        resid = np.max(np.abs(A @ mine.a - z), initial=0.0)
        assert resid <= 1e-7 * (1 + np.max(np.abs(z), initial=0.0))


def test_free_columns_lower_cost_vs_highs():
    rng = np.random.default_rng(11)
    for trial in range(30):
        m = int(rng.integers(1, 7))
        n = int(rng.integers(max(m, 2), 12))
        A = rng.normal(size=(m, n))
        n_free = int(rng.integers(1, min(2, n) + 1))
        free = sorted(rng.choice(n, size=n_free, replace=False).tolist())
        z = A @ (rng.normal(size=n) * (rng.random(n) < 0.5))
        mine = solve_l1_lp(LpProblem(A=A, z=z, free_cols=frozenset(free)))
        ref = _highs_l1(A, z, free)
        assert mine.status is LpStatus.OPTIMAL and ref.status == 0
        assert mine.objective <= ref.fun + 1e-7 * (1 + abs(ref.fun))
        full = np.zeros(n)
        full[sorted(set(range(n)) - set(free))] = mine.a
        full[free] = mine.b
        resid = np.max(np.abs(A @ full - z), initial=0.0)
        assert resid <= 1e-7 * (1 + np.max(np.abs(z), initial=0.0))


def test_rank_deficient_but_consistent():
    # duplicated information must not be declared infeasible nor force
    # spurious weights
    rng = np.random.default_rng(23)
    B = rng.normal(size=(3, 8))
    A = np.vstack([B, B[0] + B[1], 2.0 * B[2]])
    x0 = np.zeros(8)
    x0[[1, 4]] = [1.5, -2.0]
    z = A @ x0
    r = solve_l1_lp(LpProblem(A=A, z=z))
    assert r.status is LpStatus.OPTIMAL
    assert r.objective <= np.abs(x0).sum() + 1e-9
    assert np.max(np.abs(A @ r.a - z)) <= 1e-7 * (1 + np.max(np.abs(z)))


def test_refine_keeps_measurements_and_reduces_support():
    rng = np.random.default_rng(17)
    for trial in range(30):
        m = int(rng.integers(2, 12))
        n = int(rng.integers(2 * m, 6 * m))
        H = rng.normal(size=(m, n))
        a_dense = rng.normal(size=n) * (rng.random(n) < 0.6)
        res = refine_extreme_point(H, a_dense)
        assert res.status is LpStatus.OPTIMAL
        scale = max(1.0, float(np.max(np.abs(res.a), initial=0.0)))
        nnz = int(np.sum(np.abs(res.a) > 1e-9 * scale))
        assert nnz <= m
        l1_before = float(np.abs(a_dense).sum())
        assert res.objective <= l1_before + 1e-9 * (1 + l1_before)
        drift = np.max(np.abs(H @ res.a - H @ a_dense), initial=0.0)
        assert drift <= 1e-7 * (1 + np.max(np.abs(H @ a_dense), initial=0.0))


def test_refine_is_fixed_point_on_vertices():
    # a solution that is already a sparse vertex keeps its l1 norm
    rng = np.random.default_rng(19)
    H = rng.normal(size=(5, 20))
    a_vertex = np.zeros(20)
    a_vertex[[2, 7, 11]] = [1.0, -2.0, 0.5]
    res = refine_extreme_point(H, a_vertex)
    assert res.objective <= 3.5 + 1e-9
    # measurements preserved implies the vertex cannot be improved past
    # the min-l1 certificate of the oracle
    ref = _highs_l1(H, H @ a_vertex)
    assert res.objective == pytest.approx(ref.fun, abs=1e-7)


def test_basis_columns_are_independent():
    rng = np.random.default_rng(29)
    H = rng.normal(size=(6, 25))
    a_dense = rng.normal(size=25)
    res = refine_extreme_point(H, a_dense)
    support = np.flatnonzero(
        np.abs(res.a) > 1e-9 * max(1.0, np.abs(res.a).max())
    )
    sub = H[:, support]
    assert np.linalg.matrix_rank(sub) == support.size
