"""Linear measurement functionals and system-matrix assembly.

Two measurement families are supported on the working interval [0, T]:

* ideal sampling: z_m = f(x_m);
* windowed Fourier sampling: for each pulsation w the pair
  integral of f(x) cos(w x) dx and minus the integral of f(x) sin(w x) dx
  over [0, T], i.e. the real and imaginary parts of the complex
  coefficient integral of f(x) exp(-i w x).  Rows are stored interleaved
  (real then imaginary per pulsation); a zero pulsation contributes only
  its real row because the imaginary one vanishes identically.

All spline measurements and all system matrices are closed-form.  The
only numerical quadrature in the package is (a) measuring an arbitrary
callable and (b) the outer integral of the Fourier-case quadratic-basis
Gram matrix, both with absolute tolerance 1e-10.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from .operators import OperatorKind, OperatorSpec, green_LstarL
from .splines import DenseSignal, SplineSignal

__all__ = [
    "MeasurementKind",
    "MeasurementModel",
    "WellPosednessError",
    "QuadratureError",
    "ideal_sampling",
    "windowed_fourier",
    "power_exp_integral",
    "measure",
    "assemble_tikhonov",
    "assemble_gtv",
    "tikhonov_basis",
    "SystemMatrices",
]

_QUAD_ABS_TOL = 1e-10
_QUAD_LIMIT = 2**14


class WellPosednessError(ValueError):
    """Measurement set cannot see the null space (rank-deficient W)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class MeasurementKind(Enum):
    IDEAL_SAMPLING = "sampling"
    WINDOWED_FOURIER = "fourier"


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Description of the M linear functionals applied to the signal.

    Use the ``ideal_sampling`` / ``windowed_fourier`` factories rather
    than the constructor.  ``domain`` is the right end T of [0, T]; for
    Fourier measurements it coincides with the integration window.
    """

    kind: MeasurementKind
    domain: float
    sample_points: np.ndarray | None = None
    pulsations: np.ndarray | None = None

    @property
    def n_measurements(self) -> int:
        if self.kind is MeasurementKind.IDEAL_SAMPLING:
            return self.sample_points.size
        return len(self.fourier_rows())

    def fourier_rows(self) -> list[tuple[float, bool]]:
        """Row layout as (pulsation, is_imaginary_part) pairs."""
        if self.kind is not MeasurementKind.WINDOWED_FOURIER:
            raise ValueError("not a Fourier measurement model")
        rows: list[tuple[float, bool]] = []
        for w in self.pulsations:
            rows.append((float(w), False))
            if w != 0.0:
                rows.append((float(w), True))
        return rows


def ideal_sampling(points, domain: float) -> MeasurementModel:
    """Point-sampling measurements at the given locations in [0, domain]."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    domain = float(domain)
    if pts.ndim != 1 or pts.size == 0:
        raise ValueError("need a non-empty 1-d array of sample points")
    if not np.all(np.isfinite(pts)) or not np.isfinite(domain) or domain <= 0:
        raise ValueError("sample points and domain must be finite, domain > 0")
    if np.any(pts < 0.0) or np.any(pts > domain):
        raise ValueError("sample points must lie in [0, domain]")
    if pts.size > 1 and np.min(np.diff(np.sort(pts))) <= 1e-12:
        raise ValueError("sample points closer than 1e-12 are ill posed")
    return MeasurementModel(
        kind=MeasurementKind.IDEAL_SAMPLING, domain=domain, sample_points=pts
    )


def windowed_fourier(pulsations, window: float) -> MeasurementModel:
    """Fourier-coefficient measurements over the window [0, window]."""
    w = np.atleast_1d(np.asarray(pulsations, dtype=float))
    window = float(window)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("need a non-empty 1-d array of pulsations")
    if not np.all(np.isfinite(w)) or not np.isfinite(window) or window <= 0:
        raise ValueError("pulsations and window must be finite, window > 0")
    if np.unique(w).size != w.size:
        raise ValueError("pulsations must be pairwise distinct")
    return MeasurementModel(
        kind=MeasurementKind.WINDOWED_FOURIER, domain=window, pulsations=w
    )


def power_exp_integral(p: int, omega, a, b, c=0.0) -> np.ndarray:
    """Closed form of the integral of (y - c)^p exp(-i omega y) over [a, b].

    All of ``omega, a, b, c`` broadcast; the result has the broadcast
    shape.  Zero pulsations fall back to the plain monomial antiderivative;
    nonzero ones use the integration-by-parts recursion in p.
    """
    if p < 0:
        raise ValueError("power p must be >= 0")
    omega, a, b, c = np.broadcast_arrays(
        np.asarray(omega, dtype=float),
        np.asarray(a, dtype=float),
        np.asarray(b, dtype=float),
        np.asarray(c, dtype=float),
    )
    nz = omega != 0.0
    # zero-pulsation branch: ((b-c)^(p+1) - (a-c)^(p+1)) / (p+1)
    poly = ((b - c) ** (p + 1) - (a - c) ** (p + 1)) / (p + 1)
    # nonzero branch, computed everywhere with a safe divisor
    jw = 1j * np.where(nz, omega, 1.0)
    ea = np.exp(-jw * a)
    eb = np.exp(-jw * b)
    da = a - c
    db = b - c
    cur = (ea - eb) / jw
    for q in range(1, p + 1):
        cur = (da**q * ea - db**q * eb) / jw + (q / jw) * cur
    return np.where(nz, cur, poly.astype(complex))


def _stack_fourier_rows(model: MeasurementModel, coeffs: np.ndarray) -> np.ndarray:
    """Turn complex per-pulsation data into stacked real measurement rows.

    ``coeffs`` has shape (n_pulsations, ...); output (M, ...).
    """
    rows = []
    for i, w in enumerate(model.pulsations):
        rows.append(coeffs[i].real)
        if w != 0.0:
            rows.append(coeffs[i].imag)
    return np.stack(rows, axis=0)


def _fourier_measure_spline(model: MeasurementModel, s: SplineSignal) -> np.ndarray:
    T = model.domain
    w = np.asarray(model.pulsations, dtype=float)
    coeffs = np.zeros(w.size, dtype=complex)
    if s.n_knots:
        lo = np.clip(s.knots, 0.0, T)
        if s.op.kind is OperatorKind.D:
            atom = power_exp_integral(0, w[:, None], lo[None, :], T)
        else:
            atom = power_exp_integral(
                1, w[:, None], lo[None, :], T, c=s.knots[None, :]
            )
        coeffs += atom @ s.weights
    for n, bn in enumerate(s.b):
        if bn != 0.0:
            coeffs += bn * power_exp_integral(n, w, 0.0, T).ravel()
    return _stack_fourier_rows(model, coeffs)


def _quad_measure_callable(model: MeasurementModel, f) -> np.ndarray:
    T = model.domain
    out = np.empty(model.n_measurements)
    for m, (w, is_imag) in enumerate(model.fourier_rows()):
        if is_imag:
            integrand = lambda x: -f(x) * np.sin(w * x)  # noqa: B023
        else:
            integrand = lambda x: f(x) * np.cos(w * x)  # noqa: B023
        val, err = integrate.quad(
            integrand, 0.0, T, epsabs=_QUAD_ABS_TOL, epsrel=0.0, limit=_QUAD_LIMIT
        )
        if err > 100 * _QUAD_ABS_TOL:
            raise QuadratureError(
                f"Fourier row at pulsation {w} reached error {err:.2e}"
            )
        out[m] = val
    return out


def measure(model: MeasurementModel, f) -> np.ndarray:
    """Apply all measurement functionals to a signal.

    ``f`` may be a SplineSignal or DenseSignal (closed forms are used) or
    any callable accepting float arrays (sampled directly, or integrated
    by adaptive quadrature in the Fourier case).
    """
    if model.kind is MeasurementKind.IDEAL_SAMPLING:
        pts = model.sample_points
        if isinstance(f, (SplineSignal, DenseSignal)):
            return np.asarray(f(pts), dtype=float)
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape != pts.shape:
            vals = np.array([float(f(x)) for x in pts])
        return vals
    if isinstance(f, DenseSignal):
        f = f.as_spline()
    if isinstance(f, SplineSignal):
        return _fourier_measure_spline(model, f)
    return _quad_measure_callable(model, f)


def _nullspace_matrix(model: MeasurementModel, op: OperatorSpec) -> np.ndarray:
    """Measurements of the null-space monomials, one column per degree."""
    if model.kind is MeasurementKind.IDEAL_SAMPLING:
        x = model.sample_points
        return np.column_stack([x**n for n in range(op.nullspace_dim)])
    w = np.asarray(model.pulsations, dtype=float)
    cols = [
        _stack_fourier_rows(model, power_exp_integral(n, w, 0.0, model.domain))
        for n in range(op.nullspace_dim)
    ]
    return np.column_stack(cols)


def _check_nullspace_rank(W: np.ndarray, op: OperatorSpec) -> None:
    if np.linalg.matrix_rank(W) < op.nullspace_dim:
        raise WellPosednessError(
            "measurements cannot distinguish the null-space polynomials "
            f"(rank of the {W.shape} null-space measurement matrix is below "
            f"{op.nullspace_dim})"
        )


def tikhonov_basis(model: MeasurementModel, op: OperatorSpec, x) -> np.ndarray:
    """Evaluate the M quadratic-route basis functions at points ``x``.

    Each basis function is the kernel green_LstarL convolved with one
    measurement functional.  Returns an array of shape (len(x), M).
    """
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    if model.kind is MeasurementKind.IDEAL_SAMPLING:
        return green_LstarL(op, pts[:, None] - model.sample_points[None, :])
    T = model.domain
    w = np.asarray(model.pulsations, dtype=float)
    if op.kind is OperatorKind.D:
        p, scale = 1, -0.5
    else:
        p, scale = 3, 1.0 / 12.0
    s = np.clip(pts, 0.0, T)
    # split the convolution integral at y = x: |x - y|^p with sign handling
    left = power_exp_integral(
        p, w[None, :], 0.0, s[:, None], c=pts[:, None]
    )
    right = power_exp_integral(
        p, w[None, :], s[:, None], T, c=pts[:, None]
    )
    phi = scale * ((-1.0) ** p * left + right)
    # rows interleave (re, im); basis value for an im row is the im part
    return _stack_fourier_rows(model, phi.T).T


def assemble_tikhonov(
    model: MeasurementModel, op: OperatorSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrix V and null-space measurement matrix W for the quadratic route.

    V[m, n] is the m-th measurement of the n-th basis function; W[m, n]
    the m-th measurement of the n-th null-space monomial.  V is exactly
    symmetrized before returning.  Raises WellPosednessError when W is
    rank deficient.
    """
    W = _nullspace_matrix(model, op)
    _check_nullspace_rank(W, op)
    if model.kind is MeasurementKind.IDEAL_SAMPLING:
        x = model.sample_points
        V = green_LstarL(op, x[:, None] - x[None, :])
    else:
        T = model.domain
        rows = model.fourier_rows()
        w_rows = np.array([w for w, _ in rows])
        imag_row = np.array([is_imag for _, is_imag in rows])

        def integrand(x: float) -> np.ndarray:
            h = np.where(imag_row, -np.sin(w_rows * x), np.cos(w_rows * x))
            phi = tikhonov_basis(model, op, np.array([x]))[0]
            return np.outer(h, phi)

        V, err, info = integrate.quad_vec(
            integrand,
            0.0,
            T,
            epsabs=_QUAD_ABS_TOL,
            epsrel=1e-12,
            norm="max",
            limit=_QUAD_LIMIT,
            full_output=True,
        )
        if not info.success:
            raise QuadratureError(
                f"Gram-matrix quadrature did not converge (error {err:.2e})"
            )
        V = 0.5 * (V + V.T)
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(W))):
        raise ValueError("assembled matrices contain non-finite entries")
    return V, W


def assemble_gtv(
    model: MeasurementModel, op: OperatorSpec, n_grid: int, delta: float
) -> tuple[np.ndarray, np.ndarray]:
    """Dictionary matrix P and null-space matrix Q for the sparse route.

    The dictionary holds measurements of the causal atoms placed on the
    uniform grid tau_n = n * delta, n = 0 .. n_grid - 1.  The grid must
    tile the domain: n_grid * delta == domain up to 1e-12.
    """
    n_grid = int(n_grid)
    delta = float(delta)
    if n_grid <= 0 or not delta > 0.0:
        raise ValueError("need n_grid >= 1 and delta > 0")
    if abs(n_grid * delta - model.domain) > 1e-12:
        raise ValueError(
            f"grid does not tile the domain: {n_grid} * {delta} != {model.domain}"
        )
    taus = np.arange(n_grid) * delta
    if model.kind is MeasurementKind.IDEAL_SAMPLING:
        diff = model.sample_points[:, None] - taus[None, :]
        if op.kind is OperatorKind.D:
            P = (diff >= 0.0).astype(float)
        else:
            P = np.maximum(diff, 0.0)
    else:
        w = np.asarray(model.pulsations, dtype=float)
        if op.kind is OperatorKind.D:
            atom = power_exp_integral(0, w[:, None], taus[None, :], model.domain)
        else:
            atom = power_exp_integral(
                1, w[:, None], taus[None, :], model.domain, c=taus[None, :]
            )
        P = _stack_fourier_rows(model, atom)
    Q = _nullspace_matrix(model, op)
    _check_nullspace_rank(Q, op)
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
        raise ValueError("assembled matrices contain non-finite entries")
    return P, Q


@dataclass
class SystemMatrices:
    """Container for the discretized systems, mainly for inspection dumps."""

    V: np.ndarray | None = None
    W: np.ndarray | None = None
    P: np.ndarray | None = None
    Q: np.ndarray | None = None

    def validate(self) -> None:
        for name in ("V", "W", "P", "Q"):
            mat = getattr(self, name)
            if mat is not None and not np.all(np.isfinite(mat)):
                raise ValueError(f"matrix {name} contains non-finite entries")
        if self.V is not None and not np.allclose(self.V, self.V.T, atol=1e-12):
            raise ValueError("V must be symmetric")
        if self.W is not None and self.Q is not None and self.W.shape == self.Q.shape:
            if not np.array_equal(self.W, self.Q):
                raise ValueError("W and Q must agree entry-wise")
