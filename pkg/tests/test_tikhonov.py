"""Quadratic-route solver against an independent block-elimination oracle."""
import numpy as np
import pytest

from splineinv.measurements import assemble_tikhonov, ideal_sampling, windowed_fourier
from splineinv.operators import DERIVATIVE, SECOND_DERIVATIVE
from splineinv.tikhonov import eval_tikhonov, solve_tikhonov


def _random_system(rng, m, n0):
    """SPD-on-the-constraint V plus full-rank W, like the assembled ones."""
    B = rng.normal(size=(m, m))
    V = B @ B.T  # symmetric PSD is enough for the saddle system
    W = rng.normal(size=(m, n0))
    z = rng.normal(size=m)
    return V, W, z


def _oracle(V, W, z, lam):
    """Range-space elimination: solve for b first via the Schur complement."""
    m = z.size
    A = V + lam * np.eye(m)
    Ainv_W = np.linalg.solve(A, W)
    Ainv_z = np.linalg.solve(A, z)
    S = W.T @ Ainv_W
    b = np.linalg.solve(S, W.T @ Ainv_z)
    a = Ainv_z - Ainv_W @ b
    return a, b


def test_matches_schur_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = rng.integers(3, 12)
        n0 = rng.integers(1, 3)
        V, W, z = _random_system(rng, int(m), int(n0))
        lam = float(10.0 ** rng.uniform(-4, 2))
        sol = solve_tikhonov(V, W, z, lam)
        a_ref, b_ref = _oracle(V, W, z, lam)
        scale = 1.0 + np.linalg.norm(np.concatenate([a_ref, b_ref]))
        assert np.linalg.norm(sol.a - a_ref) <= 1e-9 * scale
        assert np.linalg.norm(sol.b - b_ref) <= 1e-9 * scale


def test_orthogonality_invariant():
    rng = np.random.default_rng(1)
    for _ in range(20):
        V, W, z = _random_system(rng, 9, 2)
        sol = solve_tikhonov(V, W, z, 0.37)
        defect = np.max(np.abs(W.T @ sol.a))
        assert defect <= 1e-8 * (1.0 + np.linalg.norm(sol.a))


def test_residual_equals_lam_a():
    # first block row gives z - (V a + W b) = lam * a exactly
    rng = np.random.default_rng(2)
    V, W, z = _random_system(rng, 8, 2)
    sol = solve_tikhonov(V, W, z, 0.5)
    assert sol.residual == pytest.approx(0.5 * np.linalg.norm(sol.a), rel=1e-9)
    assert sol.reg_value == pytest.approx(float(sol.a @ V @ sol.a))


def test_minimizes_objective():
    # perturbing the coefficients never lowers the regularized objective
    rng = np.random.default_rng(3)
    V, W, z = _random_system(rng, 7, 1)
    lam = 0.2
    sol = solve_tikhonov(V, W, z, lam)

    def objective(a, b):
        # native-space objective restricted to the kernel expansion:
        # data misfit + lam * a^T V a, with a constrained to ker W^T
        r = z - (V @ a + W @ b)
        return float(r @ r + lam * a @ V @ a)

    base = objective(sol.a, sol.b)
    for _ in range(20):
        da = rng.normal(size=7) * 1e-3
        da -= W @ np.linalg.lstsq(W, da, rcond=None)[0]
        db = rng.normal(size=1) * 1e-3
        assert objective(sol.a + da, sol.b + db) >= base - 1e-12


def test_input_validation():
    V = np.eye(3)
    W = np.ones((3, 1))
    z = np.zeros(3)
    with pytest.raises(ValueError):
        solve_tikhonov(V, W, z, 0.0)
    with pytest.raises(ValueError):
        solve_tikhonov(V, W, z, -1.0)
    with pytest.raises(ValueError):
        solve_tikhonov(V, W, np.zeros(4), 1.0)
    with pytest.raises(ValueError):
        solve_tikhonov(V, np.zeros((3, 2)), z, 1.0)  # rank-deficient W


def test_interpolates_as_lam_vanishes():
    # with sample measurements the reconstruction approaches the data
    pts = np.array([0.1, 0.35, 0.6, 0.9])
    model = ideal_sampling(pts, 1.0)
    V, W = assemble_tikhonov(model, SECOND_DERIVATIVE)
    z = np.array([1.0, -0.5, 0.25, 2.0])
    sol = solve_tikhonov(V, W, z, 1e-10)
    vals = eval_tikhonov(sol, model, SECOND_DERIVATIVE, pts)
    np.testing.assert_allclose(vals, z, atol=1e-6)


def test_eval_matches_measurements():
    # measuring the reconstruction reproduces V a + W b for sampling models
    pts = np.array([0.2, 0.5, 0.8])
    model = ideal_sampling(pts, 1.0)
    for op in (DERIVATIVE, SECOND_DERIVATIVE):
        V, W = assemble_tikhonov(model, op)
        z = np.array([0.3, -1.2, 0.7])
        sol = solve_tikhonov(V, W, z, 0.05)
        vals = eval_tikhonov(sol, model, op, pts)
        np.testing.assert_allclose(vals, V @ sol.a + W @ sol.b, atol=1e-10)


def test_fourier_route_end_to_end():
    model = windowed_fourier(np.linspace(0.0, 6.0, 4), 1.0)
    V, W = assemble_tikhonov(model, DERIVATIVE)
    rng = np.random.default_rng(4)
    z = rng.normal(size=model.n_measurements)
    sol = solve_tikhonov(V, W, z, 0.1)
    a_ref, b_ref = _oracle(V, W, z, 0.1)
    np.testing.assert_allclose(sol.a, a_ref, atol=1e-9)
    x = np.linspace(0.0, 1.0, 5)
    vals = eval_tikhonov(sol, model, DERIVATIVE, x)
    assert vals.shape == (5,) and np.all(np.isfinite(vals))
