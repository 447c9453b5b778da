"""l1-regularized least squares solved with FISTA.

Minimizes F(a) = ||y - H a||_2^2 + lam * ||a||_1 (no 1/2 on the data
term).  The gradient of the smooth part is 2 H^T (H a - y) with Lipschitz
constant 2 * lammax(H^T H), so the proximal step is a soft threshold at
lam / L.  The accelerated scheme has the usual O(1/t^2) objective decay.

Also hosts the null-space reduction used by the sparse pipeline: the
projector onto the orthogonal complement of range(Q) and the recovery of
the polynomial coefficients once the sparse weights are fixed.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

try:  # optional compiled inner loop; the numpy path below is the reference
    from numba import njit as _njit
except ImportError:  # pragma: no cover - exercised only without numba
    _njit = None

from .splines import sparsity_index

__all__ = [
    "LassoProblem",
    "LassoResult",
    "soft_threshold",
    "lasso_objective",
    "kkt_violation",
    "power_iteration_lipschitz",
    "fista",
    "build_projector",
    "recover_b",
]


def soft_threshold(v, t: float):
    """Componentwise shrinkage sign(v) * max(|v| - t, 0)."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass(frozen=True, eq=False)
class LassoProblem:
    """Data of one l1 problem: matrix H, target y, weight lam, Lipschitz L.

    ``lipschitz`` must dominate 2 * lammax(H^T H); use
    ``power_iteration_lipschitz`` to compute it.
    """

    H: np.ndarray
    y: np.ndarray
    lam: float
    lipschitz: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).ravel())
        if self.H.ndim != 2:
            raise ValueError("H must be a matrix")
        if self.y.shape != (self.H.shape[0],):
            raise ValueError(
                f"y has shape {self.y.shape}, expected ({self.H.shape[0]},)"
            )
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.y))):
            raise ValueError("H and y must be finite")
        if not np.any(self.H):
            raise ValueError("H must be nonzero")
        if not (np.isfinite(self.lam) and self.lam >= 0.0):
            raise ValueError("lam must be finite and >= 0")
        if not (np.isfinite(self.lipschitz) and self.lipschitz > 0.0):
            raise ValueError("lipschitz must be finite and > 0")
        # cheap lower-bound sanity check: L >= 2 * max column norm^2
        col_max = float(np.max(np.sum(self.H**2, axis=0)))
        if self.lipschitz < 2.0 * col_max * (1.0 - 1e-9):
            raise ValueError(
                f"lipschitz {self.lipschitz:.6e} is below the column-norm "
                f"lower bound {2.0 * col_max:.6e}"
            )


@dataclass
class LassoResult:
    a: np.ndarray
    objective: float
    iterations: int
    converged: bool
    sparsity: int
    trace: list[float] = field(default_factory=list)


def lasso_objective(prob: LassoProblem, a) -> float:
    a = np.asarray(a, dtype=float)
    r = prob.y - prob.H @ a
    return float(r @ r + prob.lam * np.sum(np.abs(a)))


def kkt_violation(prob: LassoProblem, a) -> float:
    """Max violation of the subgradient optimality conditions at ``a``.

    On the support, 2 H^T (H a - y) + lam * sign(a) must vanish; off the
    support, |2 H^T (H a - y)| must not exceed lam.
    """
    a = np.asarray(a, dtype=float)
    g = 2.0 * (prob.H.T @ (prob.H @ a - prob.y))
    on = a != 0.0
    viol = 0.0
    if np.any(on):
        viol = float(np.max(np.abs(g[on] + prob.lam * np.sign(a[on]))))
    if np.any(~on):
        viol = max(viol, float(np.max(np.maximum(np.abs(g[~on]) - prob.lam, 0.0))))
    return viol


def power_iteration_lipschitz(
    H: np.ndarray,
    rel_tol: float = 1e-10,
    max_iter: int = 10000,
    seed: int = 0,
) -> float:
    """2 * lammax(H^T H) estimated by power iteration on H^T H.

    Deterministic for a fixed seed.  The estimate converges monotonically
    from below; iteration stops when the Rayleigh quotient is stationary
    to ``rel_tol``.
    """
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or not np.any(H):
        raise ValueError("H must be a nonzero matrix")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(H.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    flat = 0
    for _ in range(max_iter):
        u = H @ v
        w = H.T @ u
        nw = np.linalg.norm(w)
        if nw == 0.0:  # v in the null space; restart
            v = rng.standard_normal(H.shape[1])
            v /= np.linalg.norm(v)
            continue
        lam_new = float(u @ u)  # Rayleigh quotient for unit v
        v = w / nw
        flat = flat + 1 if abs(lam_new - lam) <= rel_tol * max(lam_new, 1e-300) else 0
        lam = lam_new
        if flat >= 3:
            break
    return 2.0 * lam


if _njit is not None:

    @_njit(cache=True, fastmath=True)
    def _mv(A, x, out):  # pragma: no cover - compiled
        m, n = A.shape
        for i in range(m):
            s = 0.0
            for j in range(n):
                s += A[i, j] * x[j]
            out[i] = s

    @_njit(cache=True, fastmath=True)
    def _dot(u, v):  # pragma: no cover - compiled
        s = 0.0
        for i in range(u.shape[0]):
            s += u[i] * v[i]
        return s

    @_njit(cache=True)
    def _fista_loop(
        H, Ht, y, lam, L, x, x_prev, eps_rel, max_iter, sparsity_limit, trace, record
    ):  # pragma: no cover - compiled twin of the numpy loop in fista()
        m, n = H.shape
        gscale = 2.0 / L
        thresh = lam / L
        r_x = np.empty(m)
        r_prev = np.empty(m)
        r_v = np.empty(m)
        v = np.empty(n)
        g = np.empty(n)
        _mv(H, x, r_x)
        for i in range(m):
            r_x[i] -= y[i]
            r_prev[i] = r_x[i]
            r_v[i] = r_x[i]
        l1 = 0.0
        for j in range(n):
            x_prev[j] = x[j]
            v[j] = x[j]
            l1 += abs(x[j])
        obj = _dot(r_x, r_x) + lam * l1
        if record:
            trace[0] = obj
        win = np.zeros(10)
        wlen = 0
        wpos = 0
        t = 1.0
        converged = 0
        it = 0
        for it in range(1, max_iter + 1):
            _mv(Ht, r_v, g)
            for j in range(n):
                wj = v[j] - gscale * g[j]
                aw = abs(wj) - thresh
                if aw <= 0.0:
                    aw = 0.0
                x_prev[j] = aw if wj >= 0.0 else -aw
            xt = x
            x = x_prev
            x_prev = xt
            rt = r_prev
            r_prev = r_x
            r_x = rt
            _mv(H, x, r_x)
            for i in range(m):
                r_x[i] -= y[i]
            t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_next
            l1 = 0.0
            for j in range(n):
                v[j] = x[j] + beta * (x[j] - x_prev[j])
                l1 += abs(x[j])
            for i in range(m):
                r_v[i] = r_x[i] + beta * (r_x[i] - r_prev[i])
            t = t_next
            prev_obj = obj
            obj = _dot(r_x, r_x) + lam * l1
            if not np.isfinite(obj):
                return x, it, -1
            if record:
                trace[it] = obj
            win[wpos] = abs(obj - prev_obj)
            wpos += 1
            if wpos == 10:
                wpos = 0
            if wlen < 10:
                wlen += 1
            if wlen == 10:
                span = 0.0
                for k in range(10):
                    span += win[k]
                bound = abs(obj)
                if bound < 1.0:
                    bound = 1.0
                if span <= eps_rel * bound:
                    ok = True
                    if sparsity_limit >= 0:
                        amax = 0.0
                        for j in range(n):
                            aj = abs(x[j])
                            if aj > amax:
                                amax = aj
                        floor = 1.0 if amax < 1.0 else amax
                        nz = 0
                        st = 1e-9 * floor
                        for j in range(n):
                            if abs(x[j]) > st:
                                nz += 1
                        ok = nz <= sparsity_limit
                    if ok:
                        converged = 1
                        break
        return x, it, converged


def fista(
    prob: LassoProblem,
    a0: np.ndarray | None = None,
    eps_rel: float = 1e-10,
    max_iter: int = 200000,
    sparsity_target: int | None = None,
    record_trace: bool = False,
) -> LassoResult:
    """Accelerated proximal gradient descent on the l1 objective.

    Stops when the objective is relatively stationary over a 10-iteration
    window (and, if ``sparsity_target`` is set, the iterate is at least
    that sparse), or at ``max_iter`` with ``converged=False``.  Supports
    warm starts through ``a0``.

    The residual H a - y is carried through the momentum combination, so
    each iteration costs two matrix-vector products (the gradient at the
    extrapolated point and the fresh residual at the new iterate); the
    vector intermediates live in preallocated buffers.  When numba is
    importable the same loop runs as a compiled kernel.
    """
    n = prob.H.shape[1]
    if a0 is None:
        a = np.zeros(n)
    else:
        a = np.asarray(a0, dtype=float).copy()
        if a.shape != (n,):
            raise ValueError(f"a0 has shape {a.shape}, expected ({n},)")
    H = np.ascontiguousarray(prob.H)
    Ht = np.ascontiguousarray(H.T)
    y = np.ascontiguousarray(prob.y)
    lam = prob.lam
    L = prob.lipschitz

    if _njit is not None:
        trace_buf = np.empty(max_iter + 1) if record_trace else np.empty(1)
        limit = -1 if sparsity_target is None else int(sparsity_target)
        a_fin, it, flag = _fista_loop(
            H, Ht, y, lam, L, a, a.copy(), eps_rel, max_iter, limit,
            trace_buf, record_trace,
        )
        if flag == -1:
            raise RuntimeError(f"objective became non-finite at iteration {it}")
        return LassoResult(
            a=a_fin,
            objective=lasso_objective(prob, a_fin),
            iterations=it,
            converged=flag == 1,
            sparsity=sparsity_index(a_fin),
            trace=[float(o) for o in trace_buf[: it + 1]] if record_trace else [],
        )

    gscale = 2.0 / L  # folds the gradient's factor 2 and the 1/L step
    thresh = prob.lam / L
    m = H.shape[0]

    x = a
    x_prev = x.copy()
    r_x = H @ x - y  # residual at the iterate
    r_prev = r_x.copy()
    v = x.copy()  # extrapolated point
    r_v = r_x.copy()
    grad = np.empty(n)
    w = np.empty(n)
    mag = np.empty(n)
    dx = np.empty(n)
    dr = np.empty(m)
    t = 1.0
    window: deque[float] = deque(maxlen=10)
    obj = float(r_x @ r_x) + lam * float(np.sum(np.abs(x)))
    trace = [obj] if record_trace else []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        np.matmul(Ht, r_v, out=grad)
        grad *= gscale
        np.subtract(v, grad, out=w)
        # soft threshold at lam / L: copysign(max(|w| - thresh, 0), w)
        np.abs(w, out=mag)
        mag -= thresh
        np.maximum(mag, 0.0, out=mag)
        x, x_prev = x_prev, x
        r_x, r_prev = r_prev, r_x
        np.copysign(mag, w, out=x)
        np.matmul(H, x, out=r_x)
        r_x -= y
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        np.subtract(x, x_prev, out=dx)
        dx *= beta
        np.add(x, dx, out=v)
        np.subtract(r_x, r_prev, out=dr)
        dr *= beta
        np.add(r_x, dr, out=r_v)
        t = t_next
        prev_obj = obj
        # mag still holds max(|w| - thresh, 0), which is exactly |x|
        obj = float(r_x @ r_x) + lam * float(mag.sum())
        if not np.isfinite(obj):
            raise RuntimeError(f"objective became non-finite at iteration {it}")
        if record_trace:
            trace.append(obj)
        window.append(abs(obj - prev_obj))
        if len(window) == window.maxlen:
            span = sum(window)
            if span <= eps_rel * max(1.0, abs(obj)):
                if sparsity_target is None or sparsity_index(x) <= sparsity_target:
                    converged = True
                    break
    a = x
    return LassoResult(
        a=a,
        objective=lasso_objective(prob, a),
        iterations=it,
        converged=converged,
        sparsity=sparsity_index(a),
        trace=trace,
    )


def build_projector(Q: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the complement of range(Q).

    Symmetric and idempotent to machine precision.  Raises ValueError when
    Q is rank deficient.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2:
        raise ValueError("Q must be a matrix")
    if np.linalg.matrix_rank(Q) < Q.shape[1]:
        raise ValueError("Q is rank deficient")
    U, _ = np.linalg.qr(Q)
    proj = np.eye(Q.shape[0]) - U @ U.T
    return 0.5 * (proj + proj.T)


def recover_b(
    Q: np.ndarray, z: np.ndarray, P: np.ndarray, a: np.ndarray
) -> np.ndarray:
    """Least-squares polynomial coefficients once the sparse weights are set.

    Solves min_b ||z - P a - Q b||_2, the closed-form completion of the
    reduced l1 problem.
    """
    Q = np.asarray(Q, dtype=float)
    if np.linalg.matrix_rank(Q) < Q.shape[1]:
        raise ValueError("Q is rank deficient")
    resid = np.asarray(z, dtype=float) - np.asarray(P, dtype=float) @ np.asarray(
        a, dtype=float
    )
    b, *_ = np.linalg.lstsq(Q, resid, rcond=None)
    return b
