"""Dense two-phase primal simplex for minimum-l1 problems.

Solves   min ||a||_1   s.t.  A [a; b] = z   with optional cost-free
columns b (the polynomial part of the sparse reconstruction).  Every
signed variable is split into a nonnegative pair (columns A_j and -A_j);
costed pairs get the column's scale-adjusted unit cost on both halves,
free pairs get zero cost.  Rows and columns are equilibrated before the
tableau is built, which keeps pivot elements near unit magnitude even
when atom columns span several decades.

Phase 1 minimizes the sum of artificial variables; rows whose artificial
cannot be driven out afterwards are redundant and get dropped.  Pricing
is by steepest reduced cost (fast on the heavily degenerate dictionaries
this package produces) and falls back to Bland's least-index rule once
the objective stalls, so termination does not rely on luck; a pivot cap
backstops both phases.  The leaving row comes from a two-pass ratio
test: among rows within tolerance of the minimal ratio, the largest
pivot element wins.  Accumulated pivot roundoff is purged by
refactorizing the tableau from the original data every few dozen pivots
and again before any optimality or unboundedness claim is trusted, so
the returned point is the exact basic solution of the final basis.

Because a basic solution has at most one basic variable per row, the
returned weight vector has at most M nonzero entries: this solver is
what turns a dense l1 minimizer into an extreme point of its solution
set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

__all__ = [
    "LpStatus",
    "LpProblem",
    "LpResult",
    "solve_l1_lp",
    "refine_extreme_point",
]

PIVOT_TOL = 1e-10  # reduced-cost significance
PIVOT_ADMIT = 1e-9  # smallest acceptable pivot element
RATIO_SLACK = 1e-9  # near-tie window of the two-pass ratio test
FEAS_TOL = 1e-8
RAY_COST_TOL = 1e-7  # reduced cost needed to trust an unbounded ray
RANK_RTOL = 1e-8  # relative singular-value cutoff for row-rank reduction
RHS_JITTERS = (0.0, 1e-10, 3e-9)  # anti-degeneracy restart ladder


class _StallError(RuntimeError):
    """The walk stopped improving the objective: a degenerate plateau."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LpProblem:
    """min sum of |x_j| over costed columns subject to A x = z.

    ``free_cols`` lists columns of A that carry no cost (they may take any
    sign and any magnitude).
    """

    A: np.ndarray
    z: np.ndarray
    free_cols: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float).ravel())
        object.__setattr__(self, "free_cols", frozenset(int(j) for j in self.free_cols))
        if self.A.ndim != 2:
            raise ValueError("A must be a matrix")
        if self.z.shape != (self.A.shape[0],):
            raise ValueError(
                f"z has shape {self.z.shape}, expected ({self.A.shape[0]},)"
            )
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.z))):
            raise ValueError("A and z must be finite")
        if self.free_cols and (
            min(self.free_cols) < 0 or max(self.free_cols) >= self.A.shape[1]
        ):
            raise ValueError("free_cols out of range")


@dataclass
class LpResult:
    """Solution split back into costed weights ``a`` and free part ``b``.

    ``basis`` holds the original column indices that ended up basic;
    ``objective`` is ||a||_1.
    """

    status: LpStatus
    a: np.ndarray
    b: np.ndarray
    objective: float
    basis: list[int] = field(default_factory=list)
    iterations: int = 0


class _Tableau:
    """Dense simplex tableau: body | rhs with the cost row appended last.

    The constructor's (body, rhs, cost) triple is kept aside so the
    tableau can be refactorized, i.e. recomputed exactly for the current
    basis, at any time.
    """

    REFRESH_EVERY = 64

    def __init__(
        self,
        body: np.ndarray,
        rhs: np.ndarray,
        cost: np.ndarray,
        pair_limit: int = 0,
    ):
        self.body0 = np.array(body, dtype=float)
        self.rhs0 = np.array(rhs, dtype=float)
        self.cost0 = np.array(cost, dtype=float)
        # columns below pair_limit come in sign-split twin pairs (2k, 2k+1)
        self.pair_limit = pair_limit
        m, n = self.body0.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = body
        self.T[:m, n] = rhs
        self.T[m, :n] = cost
        self.basis = [-1] * m  # column index basic in each row
        self.iterations = 0

    @property
    def m(self) -> int:
        return self.T.shape[0] - 1

    @property
    def n(self) -> int:
        return self.T.shape[1] - 1

    def price_out(self) -> None:
        """Make reduced costs of basic columns zero."""
        for i, j in enumerate(self.basis):
            c = self.T[-1, j]
            if c != 0.0:
                self.T[-1] -= c * self.T[i]

    def pivot(self, row: int, col: int) -> None:
        self.T[row] /= self.T[row, col]
        factors = self.T[:, col].copy()
        factors[row] = 0.0
        self.T -= np.outer(factors, self.T[row])
        self.T[:, col] = 0.0
        self.T[row, col] = 1.0
        self.basis[row] = col
        self.iterations += 1

    def refresh(self) -> bool:
        """Refactorize: rebuild the tableau exactly for the current basis.

        Drift between refactorizations can leave a basic variable with a
        negative exact value.  For sign-split columns that has an exact
        repair: the twin column is the negation, costs the same, and
        carries the value with positive sign, so swap the basis entry.
        """
        if self.m == 0:
            return True
        basis = np.asarray(self.basis)
        swaps = 0
        while True:
            B = self.body0[:, basis]
            try:
                X = np.linalg.solve(B, np.c_[self.body0, self.rhs0])
            except np.linalg.LinAlgError:
                return False
            if not np.all(np.isfinite(X)):
                return False
            neg = (X[:, self.n] < -1e-9) & (basis < self.pair_limit)
            if not neg.any() or swaps >= 4:
                break
            twins = basis[neg] ^ 1
            if np.isin(twins, basis).any():
                break  # twin already basic: swapping would repeat a column
            basis[neg] = twins
            swaps += 1
        self.basis = [int(j) for j in basis]
        cB = self.cost0[basis]
        self.T[: self.m, :] = X
        self.T[-1, : self.n] = self.cost0 - cB @ X[:, : self.n]
        self.T[-1, self.n] = -float(cB @ X[:, self.n])
        # the exact vertex can sit a hair outside the cone; clamp roundoff
        rhs = self.T[: self.m, self.n]
        rhs[(rhs < 0.0) & (rhs > -1e-9)] = 0.0
        return True

    def _leaving_row(self, col: np.ndarray) -> int:
        """Two-pass ratio test: minimal ratio, then most stable pivot."""
        rhs = np.maximum(self.T[: self.m, self.n], 0.0)
        admit = col > PIVOT_ADMIT
        if not admit.any():
            return -1
        ratios = np.where(admit, rhs / np.where(admit, col, 1.0), np.inf)
        theta = float(np.min(ratios))
        near = admit & (ratios <= theta + RATIO_SLACK * (1.0 + theta))
        cand = np.flatnonzero(near)
        return int(cand[np.argmax(col[cand])])

    def _stalled_entering(self, costs: np.ndarray) -> tuple[int, int, bool]:
        """Largest-improvement pricing for degenerate plateaus.

        Dantzig pricing keeps entering the most negative reduced costs,
        but on a degenerate plateau those columns are blocked at a zero
        step and the walk churns.  Here every improving column is priced
        by the progress an actual pivot would make (reduced cost times
        ratio-test step) and the best mover enters.  When nothing moves,
        the least-index zero-step pivot keeps the basis walking (Bland's
        rule), which still drains the plateau eventually.
        """
        m, n = self.m, self.n
        cand = np.flatnonzero(costs < -PIVOT_TOL)
        if cand.size == 0:
            return -1, -1, False
        cols = self.T[:m, cand]
        admit = cols > PIVOT_ADMIT
        pivotable = admit.any(axis=0)
        if not pivotable.all():
            if np.any(costs[cand[~pivotable]] < -RAY_COST_TOL):
                return -1, -1, True  # improving column with no blocker
            cand = cand[pivotable]
            if cand.size == 0:
                return -1, -1, False
            cols = cols[:, pivotable]
            admit = admit[:, pivotable]
        rhs = np.maximum(self.T[:m, n], 0.0)
        ratios = np.where(admit, rhs[:, None] / np.where(admit, cols, 1.0), np.inf)
        theta = ratios.min(axis=0)
        gain = -costs[cand] * theta
        best = int(np.argmax(gain))
        obj = -self.T[-1, n]
        if gain[best] > 1e-12 * (1.0 + abs(obj)):
            j = int(cand[best])
        else:
            j = int(cand[0])
        return j, self._leaving_row(self.T[:m, j]), False

    def run(self, max_iter: int) -> LpStatus:
        """Pivot to optimality: Dantzig pricing; once the objective
        stalls, largest-improvement pricing with a least-index fallback.
        """
        bland = False
        stall = 0
        stall_limit = 10 * (self.m + 10)
        last_obj = -self.T[-1, self.n]
        since_refresh = 0
        while self.iterations < max_iter:
            if since_refresh >= self.REFRESH_EVERY:
                self.refresh()
                since_refresh = 0
            costs = self.T[-1, : self.n]
            entering = leaving = -1
            suspect_ray = False
            if bland:
                entering, leaving, suspect_ray = self._stalled_entering(costs)
            else:
                for j in np.argsort(costs):
                    if costs[j] >= -PIVOT_TOL:
                        break  # sorted scan: nothing improving remains
                    row = self._leaving_row(self.T[: self.m, j])
                    if row >= 0:
                        entering, leaving = int(j), row
                        break
                    if costs[j] < -RAY_COST_TOL:
                        suspect_ray = True
                        break
                    # pivot-less column with roundoff-level cost: skip
            if suspect_ray:
                # only trust a descent ray in a freshly refactorized tableau
                if since_refresh > 0 and self.refresh():
                    since_refresh = 0
                    continue
                return LpStatus.UNBOUNDED
            if entering < 0:
                return LpStatus.OPTIMAL
            self.pivot(leaving, entering)
            since_refresh += 1
            obj = -self.T[-1, self.n]
            if obj < last_obj - 1e-12 * (1.0 + abs(obj)):
                stall = 0
                last_obj = obj
            else:
                stall += 1
                if stall > stall_limit:
                    bland = True  # degenerate plateau: switch to least-index
                if stall > 10 * stall_limit:
                    # even least-index pricing is churning: on ill-conditioned
                    # dictionaries the equilibrated cost row carries several
                    # decades of scale, and roundoff there flips reduced-cost
                    # signs faster than Bland's rule can drain the plateau.
                    # Give up early so the caller can restart perturbed.
                    raise _StallError(
                        f"no objective progress over {stall} pivots"
                    )
        raise RuntimeError(f"simplex did not terminate within {max_iter} pivots")

    def run_verified(self, max_iter: int) -> LpStatus:
        """Run, then refactorize and resume until optimality is exact."""
        for _ in range(50):
            status = self.run(max_iter)
            if status is not LpStatus.OPTIMAL:
                return status
            if not self.refresh():
                return status  # singular refactorization; keep the tableau
            costs = self.T[-1, : self.n]
            if not np.any(costs < -1e-7 * np.maximum(1.0, np.abs(self.cost0))):
                return status
            # drift hid an improving column; keep pivoting on exact data
        raise RuntimeError("simplex kept finding improving columns after refresh")


def _drop_rows(tab: _Tableau, rows: list[int]) -> _Tableau:
    keep = [i for i in range(tab.m) if i not in rows]
    new = _Tableau.__new__(_Tableau)
    new.T = np.vstack([tab.T[keep], tab.T[-1:]])
    new.basis = [tab.basis[i] for i in keep]
    new.iterations = tab.iterations
    new.body0 = tab.body0[keep]
    new.rhs0 = tab.rhs0[keep]
    new.cost0 = tab.cost0
    new.pair_limit = tab.pair_limit
    return new


def solve_l1_lp(prob: LpProblem, max_iter: int = 200000) -> LpResult:
    """Two-phase simplex on the sign-split, equilibrated l1 problem.

    The first attempt runs on the exact data.  If it stalls on a
    degenerate plateau (or walks out its pivot budget), the solve is
    restarted with a tiny graded perturbation of the right-hand side,
    which makes the vertices simple so every pivot moves; the
    perturbation is removed and the point re-optimized on the exact data
    before anything is returned, so the result never depends on it.
    """
    last_error: RuntimeError | None = None
    for salt, jitter in enumerate(RHS_JITTERS):
        try:
            return _solve_l1_core(prob, max_iter, jitter=jitter, salt=salt)
        except RuntimeError as exc:
            last_error = exc
    assert last_error is not None
    raise last_error


def _solve_l1_core(
    prob: LpProblem, max_iter: int, jitter: float, salt: int
) -> LpResult:
    A = prob.A.copy()
    z = prob.z.copy()
    m, n_orig = A.shape

    # drop all-zero rows up front; an inconsistent zero row means infeasible
    zero_rows = np.where(np.max(np.abs(A), axis=1) == 0.0)[0] if m else np.array([])
    if zero_rows.size:
        if np.any(np.abs(z[zero_rows]) > FEAS_TOL):
            return LpResult(
                status=LpStatus.INFEASIBLE,
                a=np.zeros(0),
                b=np.zeros(0),
                objective=np.nan,
            )
        keep = np.setdiff1d(np.arange(m), zero_rows)
        A, z = A[keep], z[keep]
        m = A.shape[0]

    costed = sorted(set(range(n_orig)) - prob.free_cols)
    free = sorted(prob.free_cols)
    if m == 0:
        return LpResult(
            status=LpStatus.OPTIMAL,
            a=np.zeros(len(costed)),
            b=np.zeros(len(free)),
            objective=0.0,
        )

    # reduce to full row rank: dependent rows (the projected dictionaries
    # always have some) would otherwise admit numerically singular bases.
    # Directions weaker than RANK_RTOL cannot be enforced in double
    # precision without amplifying data roundoff into macroscopic weights,
    # so they are left out; the final feasibility check still measures the
    # returned point against the full original system.  A z-component
    # along an exactly null direction, however, is true inconsistency.
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > sv[0] * RANK_RTOL)) if sv[0] > 0.0 else 0
    if rank < m:
        ztol = FEAS_TOL * (1.0 + float(np.max(np.abs(z), initial=0.0)))
        comp = U.T @ z
        null = sv <= sv[0] * 1e-14
        outside = float(np.max(np.abs(z - U @ comp), initial=0.0))
        if outside > ztol or np.any(null & (np.abs(comp) > ztol)):
            return LpResult(
                status=LpStatus.INFEASIBLE,
                a=np.zeros(0),
                b=np.zeros(0),
                objective=np.nan,
            )
        A = sv[:rank, None] * Vt[:rank]
        z = comp[:rank]
        m = rank
        if m == 0:
            return LpResult(
                status=LpStatus.OPTIMAL,
                a=np.zeros(len(costed)),
                b=np.zeros(len(free)),
                objective=0.0,
            )

    # equilibrate rows, then normalize signs so the rhs is nonnegative
    row_scale = np.maximum(np.max(np.abs(A), axis=1), np.abs(z))
    row_scale[row_scale == 0.0] = 1.0
    A = A / row_scale[:, None]
    z = z / row_scale
    flip = z < 0.0
    A[flip] *= -1.0
    z[flip] *= -1.0

    z_exact = z
    if jitter > 0.0:
        # graded positive offsets break primal degeneracy: with distinct
        # right-hand sides the basic feasible solutions are simple with
        # probability one, so the walk cannot cycle on a plateau of tied
        # vertices.  The offsets are removed (and the point re-optimized
        # against the exact data) before extraction.
        rng = np.random.default_rng(7654321 + salt)
        z_exact = z.copy()
        z = z + jitter * (1.0 + float(np.max(z, initial=0.0))) * rng.uniform(
            0.5, 1.5, size=m
        )

    # equilibrate columns; the cost absorbs the scale so the objective is
    # still the l1 norm of the original variables
    col_scale = np.max(np.abs(A), axis=0)
    col_scale[col_scale == 0.0] = 1.0
    A = A / col_scale[None, :]

    # sign-split columns: x_j = pos_j - neg_j, both >= 0
    body = np.empty((m, 2 * n_orig))
    body[:, 0::2] = A
    body[:, 1::2] = -A
    cost = np.empty(2 * n_orig)
    cost[0::2] = 1.0 / col_scale
    cost[1::2] = 1.0 / col_scale
    for j in prob.free_cols:
        cost[2 * j] = 0.0
        cost[2 * j + 1] = 0.0
    cost_exact = cost
    if jitter > 0.0:
        # tilt the costs a hair (same tilt on both halves of a pair, so
        # the objective stays a weighted l1 norm): alternate optima stop
        # being exact ties, which is the other half of the degeneracy.
        tilt = 1.0 + rng.uniform(0.0, 1e3 * jitter, size=n_orig)
        cost = cost * np.repeat(tilt, 2)

    # phase 1: artificial basis
    n_struct = 2 * n_orig
    phase1_body = np.hstack([body, np.eye(m)])
    phase1_cost = np.concatenate([np.zeros(n_struct), np.ones(m)])
    tab = _Tableau(phase1_body, z, phase1_cost, pair_limit=n_struct)
    tab.basis = list(range(n_struct, n_struct + m))
    tab.price_out()
    status = tab.run_verified(max_iter)
    if status is not LpStatus.OPTIMAL:
        # phase 1 objective is bounded below by 0, so only OPTIMAL can occur
        raise RuntimeError("phase 1 failed to terminate at an optimum")
    art_mass = sum(
        abs(float(tab.T[i, tab.n]))
        for i, j in enumerate(tab.basis)
        if j >= n_struct
    )
    if art_mass > FEAS_TOL:
        return LpResult(
            status=LpStatus.INFEASIBLE,
            a=np.zeros(0),
            b=np.zeros(0),
            objective=np.nan,
            iterations=tab.iterations,
        )

    # drive leftover artificials out of the basis; rows that cannot pivot
    # on any structural column are redundant and get dropped
    redundant: list[int] = []
    for i in range(tab.m):
        if tab.basis[i] >= n_struct:
            row = tab.T[i, :n_struct]
            j = int(np.argmax(np.abs(row)))  # largest pivot for stability
            if abs(row[j]) > PIVOT_ADMIT:
                tab.pivot(i, j)
            else:
                redundant.append(i)
    if redundant:
        tab = _drop_rows(tab, redundant)

    # phase 2: strip the artificial columns, restore the true costs, and
    # refactorize so the phase starts from exact data
    tab.T = np.hstack([tab.T[:, :n_struct], tab.T[:, -1:]])
    tab.body0 = tab.body0[:, :n_struct]
    tab.cost0 = cost
    if not tab.refresh():
        tab.T[-1, :] = 0.0
        tab.T[-1, :n_struct] = cost
        tab.price_out()
    status = tab.run_verified(max_iter)
    if (
        jitter > 0.0
        and status is LpStatus.OPTIMAL
        and tab.rhs0.shape == z_exact.shape
    ):
        # swap the exact data back in and re-verify: the perturbed
        # optimum's basis is a warm start, so this settles in a handful
        # of pivots and the returned point is a vertex of the
        # unperturbed problem.
        tab.rhs0 = z_exact
        tab.cost0 = cost_exact
        tab.refresh()
        status = tab.run_verified(max_iter)
    if status is LpStatus.UNBOUNDED:
        return LpResult(
            status=status,
            a=np.zeros(0),
            b=np.zeros(0),
            objective=np.nan,
            iterations=tab.iterations,
        )

    # read the split variables back out and undo the column scaling; the
    # final refactorization already made this the exact basic solution
    x = np.zeros(n_struct)
    for i, j in enumerate(tab.basis):
        x[j] = max(tab.T[i, tab.n], 0.0)
    signed = (x[0::2] - x[1::2]) / col_scale
    a = signed[costed]
    b = signed[free]
    basis_cols = sorted({j // 2 for j in tab.basis})
    if free:
        # free variables cost nothing and the row-rank reduction leaves
        # them loose along the dropped directions; refit them against the
        # original system so the returned point fits z as well as it can
        target = prob.z - prob.A[:, costed] @ a
        b = np.linalg.lstsq(prob.A[:, free], target, rcond=None)[0]
        signed[free] = b
    resid = float(np.max(np.abs(prob.A @ signed - prob.z), initial=0.0))
    if resid > FEAS_TOL * (1.0 + float(np.max(np.abs(prob.z), initial=0.0))):
        raise RuntimeError(
            f"simplex returned an infeasible point (residual {resid:.2e})"
        )
    return LpResult(
        status=LpStatus.OPTIMAL,
        a=a,
        b=b,
        objective=float(np.sum(np.abs(a))),
        basis=basis_cols,
        iterations=tab.iterations,
    )


def refine_extreme_point(
    H: np.ndarray, a_dense: np.ndarray, max_iter: int = 200000
) -> LpResult:
    """Sparsify an l1 minimizer without changing what it measures.

    Solves min ||a||_1 subject to H a = H a_dense.  When ``a_dense``
    minimizes an l1-regularized least-squares objective, the result is an
    extreme point of its solution set: same measurements, same (or lower)
    l1 norm, at most rank(H) nonzero weights.
    """
    H = np.asarray(H, dtype=float)
    a_dense = np.asarray(a_dense, dtype=float).ravel()
    if H.shape[1] != a_dense.size:
        raise ValueError(
            f"H has {H.shape[1]} columns but a_dense has {a_dense.size} entries"
        )
    target = H @ a_dense
    return solve_l1_lp(LpProblem(A=H, z=target), max_iter=max_iter)
