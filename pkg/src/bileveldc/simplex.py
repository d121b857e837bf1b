"""Dense bounded-variable revised simplex returning vertex solutions.

Rows carry activity bounds (row_lb <= a'x <= row_ub); every structural
variable must have finite bounds.  Internally each row gets a slack column
(A x - s = 0, s in [row_lb, row_ub]) so the all-slack basis is always
available as a start.  Phase 1 minimizes the sum of bound violations of the
basic variables, phase 2 prices by largest reduced cost and falls back to
Bland's rule after a streak of degenerate pivots.  The basis inverse is kept
explicitly and refreshed periodically; the final basic system is polished by
iterative refinement.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9
COST_TOL = 1e-9
PIVOT_TOL = 1e-11
_DEGEN_STREAK = 25
_REFACTOR_EVERY = 64

_AT_LB, _AT_UB, _FREE, _BASIC = 0, 1, 2, 3


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    row_lb: np.ndarray
    row_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        m = self.A.shape[0]
        self.row_lb = np.asarray(self.row_lb, dtype=float).reshape(m)
        self.row_ub = np.asarray(self.row_ub, dtype=float).reshape(m)
        self.lb = np.asarray(self.lb, dtype=float).reshape(n)
        self.ub = np.asarray(self.ub, dtype=float).reshape(n)
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise ValueError("structural variables need finite bounds")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")


@dataclass
class LPResult:
    status: str            # optimal | infeasible | unbounded | stalled
    x: np.ndarray | None
    y: np.ndarray | None
    objective: float | None
    dual_objective: float | None = None
    basis: dict | None = None
    iterations: int = 0


def solve_lp(lp: LinearProgram, warm_basis=None, max_pivots=None) -> LPResult:
    """Solve an LP to a vertex; optimal results carry a certifying basis."""
    sign = 1.0 if lp.sense == "min" else -1.0
    n, m = lp.c.shape[0], lp.A.shape[0]
    N = n + m
    A = np.hstack([lp.A, -np.eye(m)]) if m else np.zeros((0, n))
    c = np.concatenate([sign * lp.c, np.zeros(m)])
    lo = np.concatenate([lp.lb, lp.row_lb])
    hi = np.concatenate([lp.ub, lp.row_ub])
    if max_pivots is None:
        max_pivots = 20000 + 200 * N

    stat = np.empty(N, dtype=np.int8)
    x = np.zeros(N)
    for j in range(N):
        if np.isfinite(lo[j]) and (abs(lo[j]) <= abs(hi[j]) or not np.isfinite(hi[j])):
            stat[j], x[j] = _AT_LB, lo[j]
        elif np.isfinite(hi[j]):
            stat[j], x[j] = _AT_UB, hi[j]
        else:
            stat[j], x[j] = _FREE, 0.0

    basis = np.arange(n, N)
    if warm_basis is not None and len(warm_basis) == m and \
            len(set(warm_basis)) == m and all(0 <= j < N for j in warm_basis):
        basis = np.asarray(list(warm_basis), dtype=int)

    def factor(bset):
        B = A[:, bset]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(Binv)):
            return None
        return Binv

    Binv = factor(basis) if m else np.zeros((0, 0))
    if Binv is None:
        basis = np.arange(n, N)
        Binv = factor(basis)
    stat[basis] = _BASIC

    def recompute_basics():
        xn = x.copy()
        xn[basis] = 0.0
        if m:
            x[basis] = -Binv @ (A @ xn)

    recompute_basics()

    pivots = 0
    degen_streak = 0
    bland = False
    cnorm = 1.0 + np.max(np.abs(c), initial=0.0)
    ctol = COST_TOL * cnorm

    while True:
        if pivots >= max_pivots:
            return LPResult(status="stalled", x=None, y=None, objective=None,
                            iterations=pivots)

        below = x[basis] < lo[basis] - FEAS_TOL
        above = x[basis] > hi[basis] + FEAS_TOL
        phase1 = bool(np.any(below) or np.any(above))
        cost = np.zeros(N)
        if phase1:
            cost[basis[below]] = -1.0
            cost[basis[above]] = 1.0
            tol_d = COST_TOL
        else:
            cost = c
            tol_d = ctol

        y = Binv.T @ cost[basis] if m else np.zeros(0)
        d = cost - A.T @ y if m else cost.copy()

        enter_lo = (stat == _AT_LB) & (d < -tol_d)
        enter_hi = (stat == _AT_UB) & (d > tol_d)
        enter_fr = (stat == _FREE) & (np.abs(d) > tol_d)
        cand = np.nonzero(enter_lo | enter_hi | enter_fr)[0]

        if cand.size == 0:
            if phase1:
                return LPResult(status="infeasible", x=None, y=None,
                                objective=None, iterations=pivots)
            break

        if bland:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        sigma = 1.0 if (stat[j] == _AT_LB or (stat[j] == _FREE and d[j] < 0)) else -1.0

        w = Binv @ A[:, j] if m else np.zeros(0)
        rate = -sigma * w       # change of each basic per unit step

        # ratio test: basics block at the bound they move toward; in phase 1
        # an infeasible basic only blocks at the bound it is violating
        t_best = np.inf
        leave_pos, leave_bound = -1, 0.0
        cand_pos, cand_t, cand_bound = [], [], []
        for p in range(m):
            i = basis[p]
            delta = rate[p]
            if abs(delta) <= PIVOT_TOL:
                continue
            xi = x[i]
            if phase1 and xi < lo[i] - FEAS_TOL:
                if delta > 0:
                    tp, bnd = (lo[i] - xi) / delta, lo[i]
                else:
                    continue
            elif phase1 and xi > hi[i] + FEAS_TOL:
                if delta < 0:
                    tp, bnd = (hi[i] - xi) / delta, hi[i]
                else:
                    continue
            else:
                if delta > 0:
                    if not np.isfinite(hi[i]):
                        continue
                    tp, bnd = (hi[i] - xi) / delta, hi[i]
                else:
                    if not np.isfinite(lo[i]):
                        continue
                    tp, bnd = (lo[i] - xi) / delta, lo[i]
            tp = max(tp, 0.0)
            cand_pos.append(p)
            cand_t.append(tp)
            cand_bound.append(bnd)

        if cand_t:
            t_best = min(cand_t)

        t_self = np.inf
        if stat[j] != _FREE and np.isfinite(lo[j]) and np.isfinite(hi[j]):
            t_self = hi[j] - lo[j]

        if not np.isfinite(min(t_best, t_self)):
            if phase1:
                return LPResult(status="stalled", x=None, y=None,
                                objective=None, iterations=pivots)
            return LPResult(status="unbounded", x=None, y=None,
                            objective=None, iterations=pivots)

        if t_self <= t_best + FEAS_TOL and t_self <= t_best * (1 + 1e-12):
            # bound flip, basis unchanged
            t = t_self
            x[j] += sigma * t
            if m:
                x[basis] += rate * t
            stat[j] = _AT_UB if stat[j] == _AT_LB else _AT_LB
            pivots += 1
            degen_streak = 0
        else:
            t = t_best
            near = [k for k, tp in enumerate(cand_t) if tp <= t + 1e-9]
            if bland:
                k_sel = min(near, key=lambda k: basis[cand_pos[k]])
            else:
                k_sel = max(near, key=lambda k: abs(rate[cand_pos[k]]))
            leave_pos = cand_pos[k_sel]
            leave_bound = cand_bound[k_sel]
            t = max(cand_t[k_sel], 0.0)

            x[j] += sigma * t
            x[basis] += rate * t
            i_out = basis[leave_pos]
            x[i_out] = leave_bound
            stat[i_out] = _AT_LB if leave_bound == lo[i_out] else _AT_UB
            stat[j] = _BASIC

            col = w.copy()
            piv = col[leave_pos]
            if abs(piv) < PIVOT_TOL:
                return LPResult(status="stalled", x=None, y=None,
                                objective=None, iterations=pivots)
            Binv[leave_pos, :] /= piv
            others = np.arange(m) != leave_pos
            Binv[others, :] -= np.outer(col[others], Binv[leave_pos, :])
            basis[leave_pos] = j

            pivots += 1
            if t <= FEAS_TOL:
                degen_streak += 1
                if degen_streak >= _DEGEN_STREAK:
                    bland = True
            else:
                degen_streak = 0
                bland = False

            if pivots % _REFACTOR_EVERY == 0:
                fresh = factor(basis)
                if fresh is None:
                    return LPResult(status="stalled", x=None, y=None,
                                    objective=None, iterations=pivots)
                Binv = fresh
                recompute_basics()

    # optimal: polish the basic system and duals with one refinement pass
    if m:
        B = A[:, basis]
        xn = x.copy()
        xn[basis] = 0.0
        rhs = -(A @ xn)
        xb = np.linalg.solve(B, rhs)
        xb += np.linalg.solve(B, rhs - B @ xb)
        x[basis] = xb
        y = np.linalg.solve(B.T, c[basis])
        y += np.linalg.solve(B.T, c[basis] - B.T @ y)
        d = c - A.T @ y
    else:
        y = np.zeros(0)
        d = c.copy()

    obj = float(c[:n] @ x[:n])
    at_lb = stat == _AT_LB
    at_ub = stat == _AT_UB
    dual_obj = float(d[at_lb] @ x[at_lb] + d[at_ub] @ x[at_ub])
    return LPResult(
        status="optimal",
        x=sign * x[:n] if sign < 0 else x[:n].copy(),
        y=sign * y,
        objective=sign * obj,
        dual_objective=sign * dual_obj,
        basis={"columns": basis.tolist(), "status": stat.copy()},
        iterations=pivots,
    )


def conic_violations(conic_rows, point, tol=1e-7):
    """Per-group Lorentz violations ||zbar|| - z0 at z = T v - r (clipped at 0)."""
    v = np.asarray(point, dtype=float)
    out = []
    for T, r in conic_rows:
        z = T @ v - r
        out.append(max(float(np.linalg.norm(z[1:]) - z[0]), 0.0))
    return out


def outer_approximate(conic_rows, point, tol=1e-7):
    """Supporting-hyperplane rows for Lorentz groups violated at ``point``.

    Each group is (T, r) meaning T v - r in Q.  For a violated group the
    subgradient cut z0 >= (zbar/||zbar||)'zbar is returned as a linear
    >= row over v; at the cone apex (zbar = 0) the coordinate bounds
    z0 >= 0 and z0 >= +-z_i are emitted instead.
    """
    v = np.asarray(point, dtype=float)
    rows = []
    for T, r in conic_rows:
        z = T @ v - r
        zbar = z[1:]
        nrm = float(np.linalg.norm(zbar))
        if z[0] >= nrm - tol:
            continue
        if nrm > tol:
            u = zbar / nrm
            row = T[0] - u @ T[1:]
            rhs = float(r[0] - u @ r[1:])
            rows.append((row, rhs))
        else:
            rows.append((T[0].copy(), float(r[0])))
            for i in range(1, T.shape[0]):
                rows.append((T[0] - T[i], float(r[0] - r[i])))
                rows.append((T[0] + T[i], float(r[0] + r[i])))
    return rows
