"""Spline-admissible regularization operators.

Two operators are supported: the first derivative D and the second
derivative D2.  Each one carries three pieces of structure used throughout
the package:

* a causal Green's function ``green_L`` (unit step for D, one-sided ramp
  for D2) whose shifts are the atoms of the sparse reconstruction
  dictionary;
* the radial Green's function ``green_LstarL`` of the normal operator
  L*L, whose shifts are the basis of the quadratic (Tikhonov)
  reconstruction;
* a monomial basis of the finite-dimensional null space (constants for D,
  affine functions for D2).

Sign convention: ``green_LstarL`` is the true Green's function of L*L, so
the quadratic form a^T V a built from it is the squared L2 norm of L
applied to the reconstruction.  For D this is -|x|/2 (note the sign: the
normal operator of D is -D2), for D2 it is |x|^3 / 12.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .splines import SplineSignal

__all__ = [
    "OperatorKind",
    "OperatorSpec",
    "DERIVATIVE",
    "SECOND_DERIVATIVE",
    "OperatorMismatchError",
    "operator_from_name",
    "green_L",
    "green_LstarL",
    "nullspace_basis",
    "nullspace_eval",
    "apply_L_to_spline",
]


class OperatorMismatchError(ValueError):
    """Raised when a signal built for one operator is used with another."""


class OperatorKind(Enum):
    D = "D"
    D2 = "D2"


@dataclass(frozen=True)
class OperatorSpec:
    """Differential operator of order 1 or 2 together with its metadata.

    Attributes
    ----------
    kind : OperatorKind
        Which operator this is.
    order : int
        Order of the derivative.
    nullspace_dim : int
        Dimension of the null space (equal to the order for D and D2).
    """

    kind: OperatorKind
    order: int
    nullspace_dim: int

    def __post_init__(self) -> None:
        expected = {OperatorKind.D: 1, OperatorKind.D2: 2}[self.kind]
        if self.order != expected:
            raise ValueError(
                f"operator {self.kind.value} has order {expected}, got {self.order}"
            )
        if self.nullspace_dim != expected:
            raise ValueError(
                f"operator {self.kind.value} has null-space dimension {expected}, "
                f"got {self.nullspace_dim}"
            )

    @property
    def name(self) -> str:
        return self.kind.value


DERIVATIVE = OperatorSpec(OperatorKind.D, order=1, nullspace_dim=1)
SECOND_DERIVATIVE = OperatorSpec(OperatorKind.D2, order=2, nullspace_dim=2)

_BY_NAME = {"D": DERIVATIVE, "D2": SECOND_DERIVATIVE}


def operator_from_name(name: str) -> OperatorSpec:
    """Look up an operator by its string name ("D" or "D2")."""
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ValueError(
            f"unknown operator {name!r}; expected one of {sorted(_BY_NAME)}"
        ) from None


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def green_L(op: OperatorSpec, x):
    """Causal Green's function of the operator.

    Unit step 1_{x >= 0} for D, one-sided ramp max(x, 0) for D2.  The step
    is right-continuous: green_L(D, 0.0) == 1.0.  Accepts scalars or
    arrays; returns a float for scalar input.
    """
    arr, scalar = _as_array(x)
    if op.kind is OperatorKind.D:
        out = (arr >= 0.0).astype(float)
    else:
        out = np.maximum(arr, 0.0)
    return float(out) if scalar else out


def green_LstarL(op: OperatorSpec, x):
    """Radial Green's function of the normal operator L*L.

    -|x|/2 for D (normal operator -D2) and |x|^3 / 12 for D2 (normal
    operator D4).  These are the basis kernels of the quadratic
    reconstruction; their conditional positive-definiteness is what makes
    the regularized normal equations solvable for every positive
    regularization weight.
    """
    arr, scalar = _as_array(x)
    if op.kind is OperatorKind.D:
        out = -0.5 * np.abs(arr)
    else:
        out = np.abs(arr) ** 3 / 12.0
    return float(out) if scalar else out


def nullspace_basis(op: OperatorSpec) -> list[np.ndarray]:
    """Monomial coefficient vectors spanning the null space.

    Coefficients are in ascending-degree order, so [1.0] is the constant
    function and [0.0, 1.0] is the identity.
    """
    if op.kind is OperatorKind.D:
        return [np.array([1.0])]
    return [np.array([1.0]), np.array([0.0, 1.0])]


def nullspace_eval(op: OperatorSpec, coeffs, x):
    """Evaluate the null-space component sum_n coeffs[n] * p_n(x).

    Because the basis consists of the monomials 1, x, ... this is a plain
    polynomial evaluation with ascending-degree coefficients.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (op.nullspace_dim,):
        raise ValueError(
            f"expected {op.nullspace_dim} null-space coefficients, "
            f"got shape {coeffs.shape}"
        )
    arr, scalar = _as_array(x)
    out = np.polynomial.polynomial.polyval(arr, coeffs)
    return float(out) if scalar else np.asarray(out, dtype=float)


def apply_L_to_spline(op: OperatorSpec, s: "SplineSignal") -> list[tuple[float, float]]:
    """Innovation of a spline: locations and weights of the Dirac train L{s}.

    The null-space part of the signal is annihilated, so only the knot
    sequence survives.  Weights that are exactly zero are dropped.
    """
    if s.op != op:
        raise OperatorMismatchError(
            f"signal was built for operator {s.op.name}, not {op.name}"
        )
    return [
        (float(t), float(a))
        for t, a in zip(s.knots, s.weights)
        if a != 0.0
    ]
