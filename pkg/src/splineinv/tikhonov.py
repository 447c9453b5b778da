"""Quadratic (L2-regularized) reconstruction.

The minimizer of ||z - measurements(f)||^2 + lam * ||L f||_L2^2 over the
native space of L is a finite sum of the M kernel basis functions plus a
null-space polynomial.  Its coefficients solve one symmetric indefinite
block system

    [ V + lam I   W ] [a]   [z]
    [    W^T      0 ] [b] = [0]

whose second block row enforces the orthogonality W^T a = 0.  The system
is solved by a pivoted dense factorization; it is nonsingular for every
lam > 0 whenever W has full column rank.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .measurements import MeasurementModel, tikhonov_basis
from .operators import OperatorSpec, nullspace_eval

__all__ = ["TikhonovSolution", "solve_tikhonov", "eval_tikhonov"]


@dataclass
class TikhonovSolution:
    """Coefficients of the quadratic reconstruction.

    ``a`` weights the kernel basis functions, ``b`` the null-space
    monomials.  ``residual`` is ||z - (V a + W b)||_2, which equals
    lam * ||a||_2 at the solution; ``reg_value`` is the quadratic form
    a^T V a, the squared seminorm of the reconstruction.
    """

    a: np.ndarray
    b: np.ndarray
    lam: float
    residual: float
    reg_value: float


def solve_tikhonov(
    V: np.ndarray, W: np.ndarray, z: np.ndarray, lam: float
) -> TikhonovSolution:
    """Solve the regularized interpolation system for one weight lam > 0.

    Raises ValueError for lam <= 0 (the unregularized limit needs a
    different formulation) and WellPosedness-style errors when W is rank
    deficient or the factorization fails.
    """
    V = np.asarray(V, dtype=float)
    W = np.asarray(W, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    if V.shape != (m, m):
        raise ValueError(f"V must be {m}x{m}, got {V.shape}")
    if W.ndim != 2 or W.shape[0] != m:
        raise ValueError(f"W must have {m} rows, got shape {W.shape}")
    n0 = W.shape[1]
    if not (np.isfinite(lam) and lam > 0.0):
        raise ValueError("regularization weight must be positive and finite")
    if np.linalg.matrix_rank(W) < n0:
        raise ValueError("W is rank deficient; the problem is not well posed")

    K = np.zeros((m + n0, m + n0))
    K[:m, :m] = V + lam * np.eye(m)
    K[:m, m:] = W
    K[m:, :m] = W.T
    rhs = np.concatenate([z, np.zeros(n0)])
    try:
        sol = linalg.solve(K, rhs, assume_a="sym")
    except linalg.LinAlgError as exc:
        raise ValueError(f"block system is singular: {exc}") from exc
    a, b = sol[:m], sol[m:]
    if not np.all(np.isfinite(sol)):
        raise ValueError("block solve produced non-finite coefficients")

    residual = float(np.linalg.norm(z - (V @ a + W @ b)))
    reg_value = float(a @ V @ a)
    ortho = float(np.max(np.abs(W.T @ a))) if n0 else 0.0
    if ortho > 1e-8 * (1.0 + float(np.linalg.norm(a))):
        raise ValueError(
            f"orthogonality defect {ortho:.2e} indicates a failed solve"
        )
    return TikhonovSolution(
        a=a, b=b, lam=float(lam), residual=residual, reg_value=reg_value
    )


def eval_tikhonov(
    sol: TikhonovSolution,
    model: MeasurementModel,
    op: OperatorSpec,
    x,
) -> np.ndarray:
    """Evaluate the quadratic reconstruction at scalar or array ``x``."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    pts = np.atleast_1d(arr)
    vals = tikhonov_basis(model, op, pts) @ sol.a
    vals = vals + nullspace_eval(op, sol.b, pts)
    return float(vals[0]) if scalar else vals.reshape(arr.shape)
