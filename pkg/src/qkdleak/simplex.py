"""Small dense LP solver: bounded-variable primal simplex with Bland's rule.

Problems have the form

    optimise  c . x
    subject to  row_lo <= A x <= row_hi,   x_lo <= x <= x_hi

with every bound finite.  Rows are turned into equalities ``A x - s = 0``
with bounded slacks ``s``; Phase I drives a set of artificial variables to
zero, Phase II optimises ``c``.  Each iteration re-solves the basis system
from the original data, so roundoff does not accumulate across pivots.  The
dual objective reported alongside the optimum is the weak-duality bound
built from the final basis multipliers, giving a certificate of optimality.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class LpInfeasibleError(RuntimeError):
    """The constraint set admits no point (within the feasibility tolerance)."""


class LpIterationError(RuntimeError):
    pass


class LpNumericalError(RuntimeError):
    """The final basis does not reproduce a feasible point to tolerance."""


@dataclass
class LpProblem:
    c: np.ndarray
    A: np.ndarray
    row_lo: np.ndarray
    row_hi: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray
    maximize: bool = False
    names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.row_lo = np.asarray(self.row_lo, dtype=float)
        self.row_hi = np.asarray(self.row_hi, dtype=float)
        self.x_lo = np.asarray(self.x_lo, dtype=float)
        self.x_hi = np.asarray(self.x_hi, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.x_lo.shape != (n,) or self.x_hi.shape != (n,):
            raise ValueError("LpProblem: variable vectors must match A's column count")
        if self.row_lo.shape != (m,) or self.row_hi.shape != (m,):
            raise ValueError("LpProblem: row bounds must match A's row count")
        if np.any(self.x_lo > self.x_hi) or np.any(self.row_lo > self.row_hi):
            raise LpInfeasibleError("LpProblem: a lower bound exceeds its upper bound")
        for arr in (self.x_lo, self.x_hi, self.row_lo, self.row_hi):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LpProblem: all bounds must be finite")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dump(self) -> str:
        """Plain-text tableau: header, objective, variable bounds, one line per row."""
        m, n = self.A.shape
        out = io.StringIO()
        out.write("# qkdleak-lp 1\n")
        out.write(f"sense {'max' if self.maximize else 'min'}\n")
        out.write(f"vars {n}\nrows {m}\n")
        if self.names:
            out.write("names " + " ".join(self.names) + "\n")
        out.write("c " + " ".join(repr(float(v)) for v in self.c) + "\n")
        out.write("x_lo " + " ".join(repr(float(v)) for v in self.x_lo) + "\n")
        out.write("x_hi " + " ".join(repr(float(v)) for v in self.x_hi) + "\n")
        for k in range(m):
            vals = " ".join(repr(float(v)) for v in self.A[k])
            out.write(f"row {float(self.row_lo[k])!r} {float(self.row_hi[k])!r} {vals}\n")
        return out.getvalue()

    @classmethod
    def load(cls, text: str) -> "LpProblem":
        fields_: dict[str, list[str]] = {}
        rows = []
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, *vals = line.split()
            if key == "row":
                rows.append([float(v) for v in vals])
            else:
                fields_[key] = vals
        n = int(fields_["vars"][0])
        A = np.array([r[2:] for r in rows]).reshape(len(rows), n)
        return cls(
            c=np.array(fields_["c"], dtype=float), A=A,
            row_lo=np.array([r[0] for r in rows]), row_hi=np.array([r[1] for r in rows]),
            x_lo=np.array(fields_["x_lo"], dtype=float), x_hi=np.array(fields_["x_hi"], dtype=float),
            maximize=fields_["sense"][0] == "max", names=fields_.get("names", []),
        )


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    dual_objective: float
    iterations: int
    row_duals: np.ndarray
    status: str = "optimal"

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)


STALL_LIMIT = 50  # consecutive degenerate pivots before strict Bland tie-breaking


def _simplex(M: np.ndarray, cost: np.ndarray, lo: np.ndarray, hi: np.ndarray,
             basis: list[int], at_upper: np.ndarray, tol: float, pivot_tol: float,
             max_iter: int) -> tuple[np.ndarray, list[int], np.ndarray, np.ndarray, int]:
    """Minimise ``cost . z`` s.t. ``M z = 0``, ``lo <= z <= hi`` from a feasible basis.

    The entering column is always the lowest-index improving one.  Ties in
    the ratio test go to the largest pivot for numerical stability, except
    during a long degenerate run, where the lowest variable index wins so
    that Bland's anti-cycling guarantee applies.
    """
    m, ntot = M.shape
    it = 0
    stall = 0
    while True:
        nonbasic = np.ones(ntot, dtype=bool)
        nonbasic[basis] = False
        z = np.where(at_upper, hi, lo)
        z[basis] = 0.0
        B = M[:, basis]
        zb = np.linalg.solve(B, -M[:, nonbasic] @ z[nonbasic])
        z[basis] = zb
        y = np.linalg.solve(B.T, cost[basis])
        d = cost - M.T @ y
        span = hi - lo
        movable = nonbasic & (span > 0)
        # Price by the objective change a full move could make, not the raw slope.
        dw = d * np.maximum(np.where(np.isfinite(span), span, 1.0), 1.0)
        cand = np.flatnonzero(movable & ((~at_upper & (dw < -tol)) | (at_upper & (dw > tol))))
        if cand.size == 0:
            return z, basis, at_upper, y, it
        it += 1
        if it > max_iter:
            raise LpIterationError(f"simplex: no convergence after {max_iter} iterations")
        j = int(cand[0])
        direction = -1.0 if at_upper[j] else 1.0
        w = np.linalg.solve(B, M[:, j]) * direction
        # z_B(theta) = z_B - theta * w
        bidx = np.asarray(basis)
        ratio = np.full(m, np.inf)
        dec, inc = w > pivot_tol, w < -pivot_tol
        ratio[dec] = np.maximum(zb[dec] - lo[bidx[dec]], 0.0) / w[dec]
        ratio[inc] = np.maximum(hi[bidx[inc]] - zb[inc], 0.0) / -w[inc]
        theta_min = float(ratio.min())
        if hi[j] - lo[j] <= theta_min:
            at_upper[j] = not at_upper[j]
            stall = 0
            continue
        tied = np.flatnonzero(ratio <= theta_min + 1e-12 * max(1.0, theta_min))
        stall = stall + 1 if theta_min == 0.0 else 0
        if stall > STALL_LIMIT:
            leave = int(tied[np.argmin(bidx[tied])])
        else:
            leave = int(tied[np.argmax(np.abs(w[tied]))])
        i = basis[leave]
        at_upper[i] = w[leave] < 0
        basis[leave] = j
        at_upper[j] = False


def _equilibrate(A: np.ndarray, passes: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Ruiz max-norm scaling: factors ``r, s`` with ``diag(r) A diag(s)`` rows/columns peaking near 1."""
    m, n = A.shape
    r, s = np.ones(m), np.ones(n)
    absA = np.abs(A)
    for _ in range(passes):
        B = absA * r[:, None] * s[None, :]
        rmax, cmax = B.max(axis=1), B.max(axis=0)
        r /= np.sqrt(np.where(rmax > 0, rmax, 1.0))
        s /= np.sqrt(np.where(cmax > 0, cmax, 1.0))
    return r, s


def solve_lp(problem: LpProblem, tol: float = 1e-10, pivot_tol: float = 1e-12,
             feas_tol: float = 1e-9, max_iter: int = 20000) -> LpResult:
    """Solve ``problem``; raises :class:`LpInfeasibleError` when it has no feasible point.

    The constraint matrix is equilibrated before pivoting; ``feas_tol`` applies
    to the total constraint violation in the caller's row units.
    """
    m, n = problem.A.shape
    rs, cs = _equilibrate(problem.A)
    A = problem.A * rs[:, None] * cs[None, :]
    row_lo, row_hi = problem.row_lo * rs, problem.row_hi * rs
    x_lo, x_hi = problem.x_lo / cs, problem.x_hi / cs
    c = (-problem.c if problem.maximize else problem.c) * cs
    c_scale = float(np.abs(c).max()) or 1.0
    c = c / c_scale

    # Variables: x (n), slacks s (m), artificials a (m).
    ax = A @ x_lo
    s0 = np.clip(ax, row_lo, row_hi)
    resid = s0 - ax  # need A x - s + D a = 0  ->  D a = s0 - A x0
    sign = np.where(resid >= 0, 1.0, -1.0)
    M = np.hstack([A, -np.eye(m), np.diag(sign)])
    lo = np.concatenate([x_lo, row_lo, np.zeros(m)])
    hi = np.concatenate([x_hi, row_hi, np.full(m, np.inf)])
    hi_phase1 = hi.copy()
    hi_phase1[n + m:] = np.abs(resid) + 1.0
    at_upper = np.zeros(n + 2 * m, dtype=bool)
    basis = list(range(n + m, n + 2 * m))
    for k in range(m):
        # Rows already satisfied at the start put their slack in the basis; the
        # others start on an artificial with the slack at the bound it touches.
        if resid[k] == 0.0:
            basis[k] = n + k
            hi_phase1[n + m + k] = 0.0
        else:
            at_upper[n + k] = s0[k] >= row_hi[k] > row_lo[k]
    cost1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    z, basis, at_upper, _, it1 = _simplex(M, cost1, lo, hi_phase1, basis, at_upper, tol, pivot_tol, max_iter)
    infeas = float(np.sum(z[n + m:] / rs))
    if infeas > feas_tol:
        raise LpInfeasibleError(f"LP infeasible: residual constraint violation {infeas:.3e}")
    hi2 = hi.copy()
    hi2[n + m:] = 0.0
    at_upper[n + m:] = False
    cost = np.concatenate([c, np.zeros(2 * m)])
    z, basis, at_upper, y, it2 = _simplex(M, cost, lo, hi2, basis, at_upper, tol, pivot_tol, max_iter)
    x = z[:n] * cs
    violation = max(float(np.max(problem.x_lo - x)), float(np.max(x - problem.x_hi)),
                    float(np.max(problem.row_lo - problem.A @ x)), float(np.max(problem.A @ x - problem.row_hi)), 0.0)
    if violation > feas_tol:
        raise LpNumericalError(f"final point violates constraints by {violation:.3e}")
    x = np.clip(x, problem.x_lo, problem.x_hi)
    d = cost - M.T @ y
    dual = float(np.sum(np.minimum(d * lo, d * hi2))) * c_scale
    primal = float(problem.c @ x)
    y = y * rs * c_scale
    if problem.maximize:
        dual = -dual
        y = -y
    return LpResult(x=x, objective=primal, dual_objective=dual, iterations=it1 + it2, row_duals=y)
