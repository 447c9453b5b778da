"""Signal representations.

``SplineSignal`` is the parametric form produced by both reconstruction
routes: a finite sum of shifted causal Green's atoms plus a null-space
polynomial.  ``DenseSignal`` holds a sampled path (used for rough ground
truths such as random walks) and converts to a piecewise-linear
``SplineSignal`` when closed-form measurements are needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import SECOND_DERIVATIVE, OperatorKind, OperatorSpec

__all__ = [
    "SplineSignal",
    "DenseSignal",
    "eval_spline",
    "gtv_seminorm",
    "canonicalize",
    "sparsity_index",
]


def sparsity_index(a, rtol: float = 1e-9) -> int:
    """Number of entries of ``a`` larger than rtol * max(1, ||a||_inf).

    This is the shared counting convention for reporting the sparsity of
    innovation weight vectors.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0
    thresh = rtol * max(1.0, float(np.max(np.abs(a))))
    return int(np.count_nonzero(np.abs(a) > thresh))


@dataclass(eq=False)
class SplineSignal:
    """Nonuniform spline: sum_k weights[k] * rho(x - knots[k]) + poly(x).

    ``rho`` is the causal Green's atom of ``op`` and ``poly`` is the
    null-space polynomial with ascending-degree coefficients ``b``.
    ``domain`` is the right end T of the working interval [0, T]; knots may
    lie anywhere on the real line but reconstructions keep them in [0, T].
    """

    op: OperatorSpec
    knots: np.ndarray
    weights: np.ndarray
    b: np.ndarray
    domain: float

    def __post_init__(self) -> None:
        self.knots = np.atleast_1d(np.asarray(self.knots, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.knots.ndim != 1 or self.weights.ndim != 1:
            raise ValueError("knots and weights must be one-dimensional")
        if self.knots.shape != self.weights.shape:
            raise ValueError(
                f"knots ({self.knots.shape}) and weights ({self.weights.shape}) "
                "must have matching length"
            )
        if self.b.shape != (self.op.nullspace_dim,):
            raise ValueError(
                f"expected {self.op.nullspace_dim} null-space coefficients, "
                f"got shape {self.b.shape}"
            )
        self.domain = float(self.domain)
        if not self.domain > 0.0:
            raise ValueError("domain length must be positive")
        if not (
            np.all(np.isfinite(self.knots))
            and np.all(np.isfinite(self.weights))
            and np.all(np.isfinite(self.b))
        ):
            raise ValueError("spline parameters must be finite")

    @property
    def n_knots(self) -> int:
        return self.knots.size

    def __call__(self, x):
        return eval_spline(self, x)


def eval_spline(s: SplineSignal, x):
    """Evaluate a spline at scalar or array ``x``."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    pts = np.atleast_1d(arr).ravel()
    out = np.asarray(
        np.polynomial.polynomial.polyval(pts, s.b), dtype=float
    ).copy()
    if s.n_knots:
        diff = pts[:, None] - s.knots[None, :]
        if s.op.kind is OperatorKind.D:
            atoms = (diff >= 0.0).astype(float)
        else:
            atoms = np.maximum(diff, 0.0)
        out += atoms @ s.weights
    return float(out[0]) if scalar else out.reshape(arr.shape)


def gtv_seminorm(s: SplineSignal) -> float:
    """Total-variation seminorm of L{s}: the l1 norm of the knot weights."""
    return float(np.sum(np.abs(s.weights)))


def canonicalize(s: SplineSignal, merge_tol: float = 0.0) -> SplineSignal:
    """Sort knots, merge clusters closer than ``merge_tol``, drop zeros.

    Knots whose consecutive gaps are all <= merge_tol are merged into a
    single knot at their weight-less mean with the summed weight.  Weights
    below 1e-9 * max(1, ||a||_inf) after merging are removed.
    """
    order = np.argsort(s.knots, kind="stable")
    knots = s.knots[order]
    weights = s.weights[order]

    merged_t: list[float] = []
    merged_a: list[float] = []
    i = 0
    while i < knots.size:
        j = i + 1
        while j < knots.size and knots[j] - knots[j - 1] <= merge_tol:
            j += 1
        merged_t.append(float(np.mean(knots[i:j])))
        merged_a.append(float(np.sum(weights[i:j])))
        i = j

    t = np.asarray(merged_t)
    a = np.asarray(merged_a)
    if a.size:
        thresh = 1e-9 * max(1.0, float(np.max(np.abs(a))))
        keep = np.abs(a) > thresh
        t, a = t[keep], a[keep]
    return SplineSignal(op=s.op, knots=t, weights=a, b=s.b.copy(), domain=s.domain)


@dataclass(eq=False)
class DenseSignal:
    """Signal known through samples on a grid; evaluates by interpolation."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ValueError("grid must be one-dimensional with >= 2 points")
        if self.grid.shape != self.values.shape:
            raise ValueError("grid and values must have matching shape")
        if np.any(np.diff(self.grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if not (np.all(np.isfinite(self.grid)) and np.all(np.isfinite(self.values))):
            raise ValueError("grid and values must be finite")

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        out = np.interp(arr, self.grid, self.values)
        return float(out) if arr.ndim == 0 else out

    def as_spline(self) -> SplineSignal:
        """Exact piecewise-linear representation as a second-order spline.

        Knots sit at the interior grid points (plus the left end) with
        slope-change weights, so closed-form measurement formulas apply to
        sampled paths as well.  Matches ``__call__`` on [grid[0], grid[-1]].
        """
        slopes = np.diff(self.values) / np.diff(self.grid)
        weights = np.empty_like(slopes)
        weights[0] = slopes[0]
        weights[1:] = np.diff(slopes)
        b = np.array([self.values[0], 0.0])
        return SplineSignal(
            op=SECOND_DERIVATIVE,
            knots=self.grid[:-1].copy(),
            weights=weights,
            b=b,
            domain=float(self.grid[-1]),
        )
