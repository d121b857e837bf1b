"""Primal-dual interior-point solver for second-order cone programs.

Standard form:

    minimize    c'x
    subject to  A x = b,   x in K,

where K = R^nf x R^nl_+ x Q^d1 x ... x Q^dk and Q^d is the Lorentz cone
{(z0, zbar) in R^d : z0 >= ||zbar||}.  The solver runs a Nesterov-Todd
scaled Mehrotra predictor-corrector on the homogeneous self-dual embedding,
so primal/dual infeasibility is detected through certificate rays rather
than by divergence.  All linear algebra is dense; the intended problems are
small (a few hundred rows).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs

DEFAULT_TOL = 1e-8
MAX_ITER = 100
_REG = 1e-10          # static primal-dual KKT regularization
_STEP_BACK = 0.99


def lorentz_project(v):
    """Euclidean projection onto the Lorentz cone (closed form)."""
    v = np.asarray(v, dtype=float)
    t, w = v[0], v[1:]
    r = float(np.linalg.norm(w))
    if r <= t:
        return v.copy()
    if r <= -t:
        return np.zeros_like(v)
    scale = (t + r) / 2.0
    out = np.empty_like(v)
    out[0] = scale
    out[1:] = scale * w / r
    return out


@dataclass
class ConeProgram:
    """Conic problem data; variables ordered [free | nonneg | Lorentz blocks]."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    n_free: int = 0
    n_nonneg: int = 0
    lorentz_dims: tuple = ()
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.lorentz_dims = tuple(int(d) for d in self.lorentz_dims)
        if any(d < 1 for d in self.lorentz_dims):
            raise ValueError("Lorentz blocks need dimension >= 1")
        n = self.n_free + self.n_nonneg + sum(self.lorentz_dims)
        if self.c.shape != (n,) or self.A.shape != (self.b.shape[0], n):
            raise ValueError("cone program dimensions are inconsistent")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    @property
    def n_vars(self):
        return self.n_free + self.n_nonneg + sum(self.lorentz_dims)


@dataclass
class ConicResult:
    status: str                 # optimal | infeasible | unbounded | max_iter
    x: np.ndarray | None
    y: np.ndarray | None
    s: np.ndarray | None
    objective: float | None
    residuals: dict
    iterations: int
    certificate: dict | None = None
    trace: list = field(default_factory=list)


class _Cones:
    """Layout and Jordan-algebra helpers for the cone part of the variables."""

    def __init__(self, n_free, n_nonneg, dims):
        self.nf = n_free
        self.nl = n_nonneg
        self.dims = tuple(dims)
        self.blocks = []
        start = n_nonneg
        for d in self.dims:
            self.blocks.append((start, d))
            start += d
        self.cone_dim = start
        self.deg = self.nl + len(self.dims)

    def unit(self):
        e = np.zeros(self.cone_dim)
        e[:self.nl] = 1.0
        for start, _ in self.blocks:
            e[start] = 1.0
        return e

    def min_eig(self, u):
        vals = [np.inf]
        if self.nl:
            vals.append(float(np.min(u[:self.nl])))
        for start, d in self.blocks:
            blk = u[start:start + d]
            vals.append(float(blk[0] - np.linalg.norm(blk[1:])))
        return min(vals)

    def prod(self, u, v):
        """Jordan product u o v blockwise."""
        out = np.empty(self.cone_dim)
        out[:self.nl] = u[:self.nl] * v[:self.nl]
        for start, d in self.blocks:
            ub, vb = u[start:start + d], v[start:start + d]
            out[start] = ub @ vb
            out[start + 1:start + d] = ub[0] * vb[1:] + vb[0] * ub[1:]
        return out

    def pairing(self, u, v):
        """Euclidean pairing over the cone part (>= 0 for u, v in K)."""
        return float(u @ v)

    def max_step(self, u, du):
        """Largest step with u + alpha*du in K, assuming u interior."""
        alpha = np.inf
        if self.nl:
            neg = du[:self.nl] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-u[:self.nl][neg] / du[:self.nl][neg])))
        for start, d in self.blocks:
            ub, db = u[start:start + d], du[start:start + d]
            a = db[0] ** 2 - db[1:] @ db[1:]
            bq = 2.0 * (ub[0] * db[0] - ub[1:] @ db[1:])
            cq = max(ub[0] ** 2 - ub[1:] @ ub[1:], 0.0)
            roots = []
            if abs(a) < 1e-300:
                if bq < 0:
                    roots.append(-cq / bq)
            else:
                disc = bq * bq - 4.0 * a * cq
                if disc >= 0.0:
                    sq = np.sqrt(disc)
                    roots.extend([(-bq - sq) / (2 * a), (-bq + sq) / (2 * a)])
            pos = [r for r in roots if r > 1e-14]
            if pos:
                alpha = min(alpha, min(pos))
        return alpha


def _lorentz_mvec(a, bvec, u):
    """v -> M(wbar) v with wbar = (a, bvec), a^2 - ||bvec||^2 = 1."""
    bu = bvec @ u[1:]
    out = np.empty_like(u)
    out[0] = a * u[0] + bu
    out[1:] = u[0] * bvec + u[1:] + (bu / (1.0 + a)) * bvec
    return out


class _Scaling:
    """Nesterov-Todd scaling W with W^2 s = x and lambda = W s = W^-1 x."""

    def __init__(self, cones: _Cones, x, s):
        self.cones = cones
        if cones.nl and (np.any(x[:cones.nl] <= 0) or np.any(s[:cones.nl] <= 0)):
            raise FloatingPointError("orthant iterate left the interior")
        self.w_orth = np.sqrt(x[:cones.nl] / s[:cones.nl]) if cones.nl else np.zeros(0)
        self.blocks = []
        for start, d in cones.blocks:
            u, v = x[start:start + d], s[start:start + d]
            det_u = u[0] ** 2 - u[1:] @ u[1:]
            det_v = v[0] ** 2 - v[1:] @ v[1:]
            if not (np.isfinite(det_u) and np.isfinite(det_v)
                    and det_u > 0 and det_v > 0 and u[0] > 0 and v[0] > 0):
                raise FloatingPointError("Lorentz iterate left the interior")
            du = np.sqrt(det_u)
            dv = np.sqrt(det_v)
            ubar, vbar = u / du, v / dv
            gamma = np.sqrt((1.0 + ubar @ vbar) / 2.0)
            wbar = np.empty(d)
            wbar[0] = (ubar[0] + vbar[0]) / (2.0 * gamma)
            wbar[1:] = (ubar[1:] - vbar[1:]) / (2.0 * gamma)
            eta = np.sqrt(du / dv)
            self.blocks.append((eta, wbar))

    def lam(self, s):
        return self.mult_w(s)

    def mult_w(self, u):
        out = np.empty_like(u)
        nl = self.cones.nl
        out[:nl] = self.w_orth * u[:nl]
        for (start, d), (eta, wbar) in zip(self.cones.blocks, self.blocks):
            out[start:start + d] = eta * _lorentz_mvec(wbar[0], wbar[1:],
                                                       u[start:start + d])
        return out

    def mult_winv(self, u):
        out = np.empty_like(u)
        nl = self.cones.nl
        out[:nl] = u[:nl] / self.w_orth
        for (start, d), (eta, wbar) in zip(self.cones.blocks, self.blocks):
            out[start:start + d] = _lorentz_mvec(wbar[0], -wbar[1:],
                                                 u[start:start + d]) / eta
        return out

    def winv2_dense(self):
        """Dense W^-2 over the cone part (block diagonal)."""
        n = self.cones.cone_dim
        D = np.zeros((n, n))
        nl = self.cones.nl
        if nl:
            D[np.arange(nl), np.arange(nl)] = 1.0 / self.w_orth ** 2
        for (start, d), (eta, wbar) in zip(self.cones.blocks, self.blocks):
            v = np.empty(d)
            v[0], v[1:] = wbar[0], -wbar[1:]     # J wbar
            blk = 2.0 * np.outer(v, v)
            blk[np.arange(1, d), np.arange(1, d)] += 1.0
            blk[0, 0] -= 1.0
            D[start:start + d, start:start + d] = blk / eta ** 2
        return D

    def right_mult_w(self, Acols):
        """A_C W for a matrix with cone-space columns (W symmetric).

        Uses the rank-one structure of the Lorentz scaling, so the cost is
        linear in the block size."""
        out = np.empty_like(Acols)
        nl = self.cones.nl
        out[:, :nl] = Acols[:, :nl] * self.w_orth
        for (start, d), (eta, wbar) in zip(self.cones.blocks, self.blocks):
            a, bvec = wbar[0], wbar[1:]
            X0 = Acols[:, start]
            X1 = Acols[:, start + 1:start + d]
            X1b = X1 @ bvec
            out[:, start] = eta * (a * X0 + X1b)
            out[:, start + 1:start + d] = eta * (
                np.outer(X0 + X1b / (1.0 + a), bvec) + X1)
        return out

    def mult_w2(self, z):
        """W^2 z in one pass per block: W^2 = eta^2 (2 wbar wbar' - J)."""
        out = np.empty_like(z)
        nl = self.cones.nl
        out[:nl] = z[:nl] * self.w_orth ** 2
        for (start, d), (eta, wbar) in zip(self.cones.blocks, self.blocks):
            zb = z[start:start + d]
            wz = wbar @ zb
            out[start:start + d] = 2.0 * wz * wbar
            out[start] -= zb[0]
            out[start + 1:start + d] += zb[1:]
            out[start:start + d] *= eta ** 2
        return out

    def lam_div(self, lam, dvec):
        """Solve lam o u = dvec for u."""
        out = np.empty_like(dvec)
        nl = self.cones.nl
        out[:nl] = dvec[:nl] / lam[:nl]
        for start, d in self.cones.blocks:
            lb, db = lam[start:start + d], dvec[start:start + d]
            det = lb[0] ** 2 - lb[1:] @ lb[1:]
            lbd = lb[1:] @ db[1:]
            out[start] = (lb[0] * db[0] - lbd) / det
            out[start + 1:start + d] = (
                (lbd / lb[0] - db[0]) * lb[1:] / det + db[1:] / lb[0])
        return out


class _KKT:
    """Reusable buffer for [[D+reg, -A'], [A, reg]]; only the D block
    changes between interior-point iterations.  LAPACK getrf/getrs are
    called directly to keep the per-iteration overhead small."""

    def __init__(self, A, nf):
        m, n = A.shape
        self.A = A
        self.n, self.m, self.nf = n, m, nf
        self.K = np.zeros((n + m, n + m))
        self.K[:n, n:] = -A.T
        self.K[n:, :n] = A
        self.idx = np.arange(n + m)
        self.work = np.empty_like(self.K, order="F")
        self._getrf, self._getrs = get_lapack_funcs(
            ("getrf", "getrs"), (self.work,))

    def factor(self, D, reg=_REG):
        n, m, nf = self.n, self.m, self.nf
        K = self.K
        K[nf:n, nf:n] = D
        K[self.idx, self.idx] = reg
        if D.shape[0]:
            K[self.idx[nf:n], self.idx[nf:n]] += np.diagonal(D)
        np.copyto(self.work, K)
        self.lu, self.piv, info = self._getrf(self.work, overwrite_a=True)
        self.D = D
        if info != 0 or not np.all(np.isfinite(self.lu)):
            raise FloatingPointError("KKT factorization failed")

    def solve(self, r1, r2):
        n, nf = self.n, self.nf
        A, D = self.A, self.D
        rhs = np.concatenate([r1, r2])
        if not np.all(np.isfinite(rhs)):
            raise FloatingPointError("KKT rhs overflow")
        sol, _ = self._getrs(self.lu, self.piv, rhs)
        for _ in range(2):
            u, v = sol[:n], sol[n:]
            res1 = r1 + A.T @ v
            res1[nf:] -= D @ u[nf:]
            res2 = r2 - A @ u
            if max(np.abs(res1).max(initial=0.0),
                   np.abs(res2).max(initial=0.0)) < 1e-13 * (1.0 + np.abs(rhs).max()):
                break
            dsol, _ = self._getrs(self.lu, self.piv,
                                  np.concatenate([res1, res2]))
            sol = sol + dsol
        return sol[:n], sol[n:]


class _KKTCondensed:
    """Normal-equations form of the augmented system.

    The scaled cone block is eliminated, leaving the system
    [[reg, -A_F'], [A_F, A_C W^2 A_C' + reg]] over (free vars, equalities);
    solutions are refined against the full augmented system and the cone
    part is recovered as W^2 (r_C + A_C' v).  Degradation is flagged so the
    caller can fall back to the unreduced factorization.
    """

    def __init__(self, A, nf):
        m, n = A.shape
        self.m, self.n, self.nf = m, n, nf
        self.AF = A[:, :nf]
        self.AC = A[:, nf:]
        k = nf + m
        self.K = np.zeros((k, k))
        self.K[:nf, nf:] = -self.AF.T
        self.K[nf:, :nf] = self.AF
        self.idx = np.arange(k)
        self.work = np.empty_like(self.K, order="F")
        self._getrf, self._getrs = get_lapack_funcs(
            ("getrf", "getrs"), (self.work,))
        self.degraded = False

    def factor(self, scal, reg=_REG):
        self.scal = scal
        nf, m = self.nf, self.m
        B = scal.right_mult_w(self.AC)
        self.K[nf:, nf:] = B @ B.T
        self.K[self.idx[:nf], self.idx[:nf]] = reg
        self.K[self.idx[nf:], self.idx[nf:]] += reg
        self.B = B
        np.copyto(self.work, self.K)
        self.lu, self.piv, info = self._getrf(self.work, overwrite_a=True)
        if info != 0 or not np.all(np.isfinite(self.lu)):
            raise FloatingPointError("condensed KKT factorization failed")

    def solve(self, r1, r2):
        """Solve the augmented system through the condensed factorization.

        The cone part is recovered as u_C = W^2 (r_C + A_C' v), which
        satisfies its block row to roundoff, so refinement only tracks the
        free rows and the equality rows."""
        nf = self.nf
        if not (np.all(np.isfinite(r1)) and np.all(np.isfinite(r2))):
            raise FloatingPointError("KKT rhs overflow")
        pF, pC = r1[:nf], r1[nf:]
        u = np.empty(self.n)
        uF = np.zeros(nf)
        v = np.zeros(self.m)
        res1F = pF
        res2 = r2 - self.B @ self.scal.mult_w(pC)
        scale = 1.0 + max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
        for _ in range(3):
            sol, _ = self._getrs(self.lu, self.piv,
                                 np.concatenate([res1F, res2]))
            uF = uF + sol[:nf]
            v = v + sol[nf:]
            u[nf:] = self.scal.mult_w2(pC + self.AC.T @ v)
            res1F = pF + self.AF.T @ v
            res2 = r2 - (self.AF @ uF + self.AC @ u[nf:])
            err = max(np.abs(res1F).max(initial=0.0),
                      np.abs(res2).max(initial=0.0))
            if err < 1e-12 * scale:
                break
        u[:nf] = uF
        if err > 1e-8 * scale:
            self.degraded = True
        return u, v


def _quiet(fn):
    """Overflow inside a diverging iteration is expected and handled; keep
    numpy from warning about it."""
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return fn(*args, **kwargs)
    return wrapped


@_quiet
def solve_conic(cp: ConeProgram, tol=DEFAULT_TOL, max_iter=MAX_ITER,
                record_trace=False) -> ConicResult:
    """Solve a cone program on the homogeneous self-dual embedding.

    Optimal results certify primal/dual residuals and relative gap <= tol;
    infeasible/unbounded results carry an approximate certificate ray.  When
    the iteration cap is hit, the best scaled iterate is returned with
    status "max_iter" and the caller decides what to do with it.

    The loop aims one decade below tol and settles for tol when progress
    stops, so reported objectives are comfortably inside the contract.
    """
    target = 0.1 * tol
    sign = 1.0 if cp.sense == "min" else -1.0
    c0 = sign * cp.c
    A0, b0 = cp.A, cp.b
    m, n = A0.shape
    nf = cp.n_free
    cones = _Cones(nf, cp.n_nonneg, cp.lorentz_dims)

    # row equilibration of the equalities (cones are untouched by it)
    row_scale = np.maximum(np.max(np.abs(A0), axis=1, initial=0.0), np.abs(b0))
    row_scale = np.where(row_scale > 0, row_scale, 1.0)
    A = A0 / row_scale[:, None]
    b = b0 / row_scale

    bnorm = 1.0 + np.max(np.abs(b0), initial=0.0)
    cnorm = 1.0 + np.max(np.abs(c0), initial=0.0)

    x = np.zeros(n)
    s = np.zeros(n)
    x[nf:] = cones.unit()
    s[nf:] = cones.unit()
    y = np.zeros(m)
    tau, kappa = 1.0, 1.0
    deg = cones.deg + 1

    def scaled_metrics():
        xh = x / tau
        yh = (y / row_scale) / tau
        sh = s / tau
        pres = np.max(np.abs(A0 @ xh - b0), initial=0.0) / bnorm
        dres = np.max(np.abs(A0.T @ yh + sh - c0), initial=0.0) / cnorm
        pobj, dobj = c0 @ xh, b0 @ yh
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return xh, yh, sh, pres, dres, gap, pobj

    best = None
    best_it = 0
    trace = []
    mu0 = (cones.pairing(x[nf:], s[nf:]) + tau * kappa) / deg
    kkt_cond = _KKTCondensed(A, nf)
    kkt_aug = None
    use_cond = True
    it = 0
    for it in range(1, max_iter + 1):
        if not (np.isfinite(tau) and np.isfinite(kappa)
                and np.all(np.isfinite(x)) and np.all(np.isfinite(y))
                and np.all(np.isfinite(s))):
            break
        xh, yh, sh, pres, dres, gap, pobj = scaled_metrics()
        mu = (cones.pairing(x[nf:], s[nf:]) + tau * kappa) / deg
        if record_trace:
            trace.append({"mu": mu, "pres": pres, "dres": dres, "gap": gap,
                          "pairing": cones.pairing(x[nf:], s[nf:]) + tau * kappa})
        score = max(pres, dres, gap)
        if np.isfinite(score) and (best is None or score < best[0]):
            best = (score, xh.copy(), yh.copy(), sh.copy(),
                    {"primal": pres, "dual": dres, "gap": gap},
                    sign * pobj)
            best_it = it
        if pres <= target and dres <= target and gap <= target:
            return ConicResult(status="optimal", x=xh, y=yh, s=sh,
                               objective=sign * pobj,
                               residuals={"primal": pres, "dual": dres, "gap": gap},
                               iterations=it - 1, trace=trace)

        if mu <= 1e-4 * mu0 or tau <= 1e-3:
            by = b0 @ (y / row_scale)
            if by > 0:
                yc = (y / row_scale) / by
                sc = s / by
                cert_res = np.max(np.abs(A0.T @ yc + sc), initial=0.0) / cnorm
                if cert_res <= tol:
                    return ConicResult(status="infeasible", x=None, y=yc, s=sc,
                                       objective=None,
                                       residuals={"certificate": cert_res},
                                       iterations=it - 1,
                                       certificate={"y": yc, "s": sc}, trace=trace)
            cx = c0 @ x
            if cx < 0:
                xc = x / (-cx)
                cert_res = np.max(np.abs(A0 @ xc), initial=0.0) / bnorm
                if cert_res <= tol:
                    status = "unbounded" if cp.sense == "min" else "unbounded"
                    return ConicResult(status=status, x=xc, y=None, s=None,
                                       objective=None,
                                       residuals={"certificate": cert_res},
                                       iterations=it - 1,
                                       certificate={"x": xc}, trace=trace)

        if it - best_it > 15 or tau <= 1e-12 * max(1.0, kappa):
            break

        rp = A @ x - b * tau
        rd = -A.T @ y + c0 * tau - s
        rg = b @ y - c0 @ x - kappa

        try:
            scal = _Scaling(cones, x[nf:], s[nf:])
            lam = scal.lam(s[nf:])
            solver = None
            if use_cond:
                try:
                    kkt_cond.factor(scal)
                    solver = kkt_cond
                except FloatingPointError:
                    use_cond = False
            if solver is None:
                if kkt_aug is None:
                    kkt_aug = _KKT(A, nf)
                D = scal.winv2_dense()
                try:
                    kkt_aug.factor(D)
                except FloatingPointError:
                    kkt_aug.factor(D, reg=1e-8)
                solver = kkt_aug

            u1, v1 = solver.solve(-c0, b)
            denom = kappa / tau + (b @ v1 - c0 @ u1)
            if not np.isfinite(denom) or abs(denom) < 1e-14:
                break

            def newton(eta, dc, dtk):
                ld = scal.lam_div(lam, dc)
                r1 = -eta * rd
                r1[nf:] += scal.mult_winv(ld)
                u2, v2 = solver.solve(r1, -eta * rp)
                dtau = ((-eta * rg + dtk / tau) - (b @ v2 - c0 @ u2)) / denom
                dx = u2 + dtau * u1
                dy = v2 + dtau * v1
                ds = np.zeros(n)
                ds[nf:] = scal.mult_winv(ld - scal.mult_winv(dx[nf:]))
                dkap = (dtk - kappa * dtau) / tau
                return dx, dy, ds, dtau, dkap

            def boundary(dx, ds, dtau, dkap):
                alpha = min(cones.max_step(x[nf:], dx[nf:]),
                            cones.max_step(s[nf:], ds[nf:]))
                if dtau < 0:
                    alpha = min(alpha, -tau / dtau)
                if dkap < 0:
                    alpha = min(alpha, -kappa / dkap)
                return alpha

            # predictor
            dc = -cones.prod(lam, lam)
            dx_a, dy_a, ds_a, dtau_a, dkap_a = newton(1.0, dc, -tau * kappa)
            alpha_a = min(1.0, boundary(dx_a, ds_a, dtau_a, dkap_a))
            mu_aff = (cones.pairing(x[nf:] + alpha_a * dx_a[nf:],
                                    s[nf:] + alpha_a * ds_a[nf:])
                      + (tau + alpha_a * dtau_a) * (kappa + alpha_a * dkap_a)) / deg
            sigma = float(np.clip((max(mu_aff, 0.0) / mu) ** 3, 0.0, 1.0))

            # corrector
            eta = 1.0 - sigma
            corr = cones.prod(scal.mult_winv(dx_a[nf:]), scal.mult_w(ds_a[nf:]))
            dc = sigma * mu * cones.unit() - cones.prod(lam, lam) - corr
            dtk = sigma * mu - tau * kappa - dtau_a * dkap_a
            dx, dy, ds, dtau, dkap = newton(eta, dc, dtk)
            alpha = min(1.0, _STEP_BACK * boundary(dx, ds, dtau, dkap))
        except (FloatingPointError, ValueError, np.linalg.LinAlgError):
            break
        if alpha <= 1e-9:
            break
        if use_cond and kkt_cond.degraded:
            use_cond = False

        x += alpha * dx
        y += alpha * dy
        s += alpha * ds
        tau += alpha * dtau
        kappa += alpha * dkap

    score, xh, yh, sh, res, pobj = best
    status = "optimal" if score <= tol else "max_iter"
    return ConicResult(status=status, x=xh, y=yh, s=sh, objective=pobj,
                       residuals=res, iterations=it, trace=trace)


def cone_program_from_lp(c, A_rows, rhs, lb, ub, sense="min"):
    """Encode an LP with >= rows and finite variable bounds as a cone program.

    Variables: [x (free) | row slacks | lower slacks | upper slacks], with
    equalities  A x - s_row = rhs,  x - s_lb = lb,  x + s_ub = ub.
    """
    c = np.asarray(c, dtype=float)
    A_rows = np.asarray(A_rows, dtype=float).reshape(-1, c.shape[0])
    rhs = np.asarray(rhs, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    n = c.shape[0]
    m = A_rows.shape[0]
    if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
        raise ValueError("cone encoding needs finite variable bounds")
    ncols = n + m + 2 * n
    A = np.zeros((m + 2 * n, ncols))
    b = np.empty(m + 2 * n)
    A[:m, :n] = A_rows
    A[:m, n:n + m] = -np.eye(m)
    b[:m] = rhs
    A[m:m + n, :n] = np.eye(n)
    A[m:m + n, n + m:n + m + n] = -np.eye(n)
    b[m:m + n] = lb
    A[m + n:, :n] = np.eye(n)
    A[m + n:, n + m + n:] = np.eye(n)
    b[m + n:] = ub
    cfull = np.zeros(ncols)
    cfull[:n] = c
    return ConeProgram(c=cfull, A=A, b=b, n_free=n, n_nonneg=m + 2 * n,
                       lorentz_dims=(), sense=sense)
