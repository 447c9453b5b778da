"""Random ground-truth signals and measurement noise.

Two innovation models drive the generators: impulsive (Poisson) trains
with Gaussian amplitudes, yielding exact sparse splines, and Gaussian
white noise, yielding dense random walks (integrated once or twice).  In
both cases the raw signal is projected so that it is compactly supported
on [0, domain]: the projection removes the least-norm innovation
component needed to close the endpoint values (and, for second-order
signals, the endpoint slope).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import OperatorKind, OperatorSpec
from .splines import DenseSignal, SplineSignal

__all__ = [
    "ImpulsivePoisson",
    "GaussianWhite",
    "ProcessConfig",
    "project_weights",
    "generate_sparse_process",
    "generate_gaussian_process",
    "add_noise",
]

_MAX_DRAWS = 1000


@dataclass(frozen=True)
class ImpulsivePoisson:
    """Impulse-train innovation: fixed count or Poisson-distributed count."""

    count: int | None = None
    rate: float | None = None
    amplitude_std: float = 1.0

    def __post_init__(self) -> None:
        if (self.count is None) == (self.rate is None):
            raise ValueError("give exactly one of count or rate")
        if self.count is not None and self.count <= 0:
            raise ValueError("count must be positive")
        if self.rate is not None and not self.rate > 0:
            raise ValueError("rate must be positive")
        if not self.amplitude_std >= 0:
            raise ValueError("amplitude_std must be >= 0")


@dataclass(frozen=True)
class GaussianWhite:
    """White-noise innovation sampled on a uniform grid of target step."""

    std: float = 1.0
    grid_step: float = 0.01

    def __post_init__(self) -> None:
        if not self.std >= 0:
            raise ValueError("std must be >= 0")
        if not self.grid_step > 0:
            raise ValueError("grid_step must be positive")


@dataclass(frozen=True)
class ProcessConfig:
    op: OperatorSpec
    innovation: ImpulsivePoisson | GaussianWhite
    domain: float
    seed: int

    def __post_init__(self) -> None:
        if not self.domain > 0:
            raise ValueError("domain must be positive")


def project_weights(op: OperatorSpec, knots, weights) -> np.ndarray:
    """Least-norm correction making an impulse train compactly supported.

    Removes the component of ``weights`` seen by the moment constraints
    (sum of weights for D; sum and first moment for D2), which is exactly
    what forces the corresponding causal spline to vanish beyond the last
    knot.
    """
    knots = np.asarray(knots, dtype=float)
    w = np.asarray(weights, dtype=float)
    if knots.shape != w.shape or knots.ndim != 1:
        raise ValueError("knots and weights must be 1-d with matching length")
    n0 = op.nullspace_dim
    if w.size < n0 + 1:
        raise ValueError(
            f"need at least {n0 + 1} impulses to satisfy {n0} moment constraints"
        )
    if op.kind is OperatorKind.D:
        C = np.ones((1, w.size))
    else:
        C = np.vstack([np.ones(w.size), knots])
    correction = C.T @ np.linalg.solve(C @ C.T, C @ w)
    return w - correction


def generate_sparse_process(cfg: ProcessConfig) -> SplineSignal:
    """Draw a compactly supported sparse spline on [0, domain]."""
    if not isinstance(cfg.innovation, ImpulsivePoisson):
        raise TypeError("generate_sparse_process needs an ImpulsivePoisson innovation")
    inn = cfg.innovation
    n0 = cfg.op.nullspace_dim
    rng = np.random.default_rng(cfg.seed)
    if inn.count is not None:
        if inn.count < n0 + 1:
            raise ValueError(
                f"count must be >= {n0 + 1} for operator {cfg.op.name}"
            )
        k = inn.count
    else:
        k = 0
        for _ in range(_MAX_DRAWS):
            k = int(rng.poisson(inn.rate * cfg.domain))
            if k >= n0 + 1:
                break
        else:
            raise RuntimeError(
                "could not draw an impulse count compatible with the operator"
            )
    for _ in range(_MAX_DRAWS):
        knots = np.sort(rng.uniform(0.0, cfg.domain, size=k))
        if k == 1 or np.min(np.diff(knots)) > 1e-12:
            break
    else:
        raise RuntimeError("could not draw distinct impulse locations")
    raw = rng.normal(0.0, inn.amplitude_std, size=k)
    weights = project_weights(cfg.op, knots, raw)
    return SplineSignal(
        op=cfg.op,
        knots=knots,
        weights=weights,
        b=np.zeros(n0),
        domain=cfg.domain,
    )


def generate_gaussian_process(cfg: ProcessConfig) -> DenseSignal:
    """Draw a compactly supported random walk (D) or integrated walk (D2).

    The white innovation is accumulated on a uniform grid whose step is
    the largest value <= grid_step that tiles the domain exactly.  The
    accumulated path is then closed: for D a straight line through the
    endpoints is removed, for D2 the cubic matching endpoint values and
    slopes, so the signal and (for D2) its slope vanish at both ends.
    """
    if not isinstance(cfg.innovation, GaussianWhite):
        raise TypeError("generate_gaussian_process needs a GaussianWhite innovation")
    inn = cfg.innovation
    rng = np.random.default_rng(cfg.seed)
    n_steps = max(int(np.ceil(cfg.domain / inn.grid_step)), 1)
    h = cfg.domain / n_steps
    x = np.linspace(0.0, cfg.domain, n_steps + 1)
    w = inn.std * np.sqrt(h) * rng.standard_normal(n_steps)
    if cfg.op.kind is OperatorKind.D:
        s = np.concatenate([[0.0], np.cumsum(w)])
        s = s - (x / cfg.domain) * s[-1]
    else:
        slope = np.concatenate([[0.0], np.cumsum(w)])
        s = np.concatenate([[0.0], np.cumsum(slope[:-1] * h)])
        # remove the cubic with p(0)=0, p'(0)=0, p(T)=s_T, p'(T)=slope_T
        t = x / cfg.domain
        sT = s[-1]
        dT = slope[-1] * cfg.domain
        p = (3.0 * t**2 - 2.0 * t**3) * sT + (t**3 - t**2) * dT
        s = s - p
    s[-1] = 0.0  # exact endpoint (correction already cancels to rounding)
    return DenseSignal(grid=x, values=s)


def add_noise(z, snr_db: float, seed: int, exact: bool = True) -> np.ndarray:
    """Additive white Gaussian noise at a prescribed signal-to-noise ratio.

    ``snr_db = inf`` returns an unchanged copy.  With ``exact`` the noise
    vector is rescaled so the realized ratio matches exactly; otherwise
    only its expected power does.
    """
    z = np.asarray(z, dtype=float)
    if np.isinf(snr_db) and snr_db > 0:
        return z.copy()
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    norm = float(np.linalg.norm(z))
    if norm == 0.0:
        raise ValueError("cannot set a finite SNR on an all-zero measurement")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal(z.shape)
    target = norm * 10.0 ** (-snr_db / 20.0)
    if exact:
        gn = float(np.linalg.norm(g))
        while gn == 0.0:  # pragma: no cover - essentially impossible
            g = rng.standard_normal(z.shape)
            gn = float(np.linalg.norm(g))
        return z + g * (target / gn)
    return z + g * (target / np.sqrt(z.size))
