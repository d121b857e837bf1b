"""Disjunctive cut engine.

For a follower candidate yhat, any bilevel-feasible point lies in the
disjunction

    D1(yhat): a'x <= f - b'yhat - 1     or     D2(yhat): q(y) <= q(yhat).

D2 is lifted to one Lorentz constraint Dt y - ct in Q.  Valid inequalities
alpha'x + beta'y >= tau for the convex hull of either branch intersected
with the current relaxation P correspond to multiplier solutions of the
cut-generating cone program; maximizing the violation tau - alpha'x* -
beta'y* under an l2 multiplier normalization yields a separating cut
whenever one exists.  The separation procedure feeds follower candidates
to the cut generator either at the follower optimum (strategy O) or
greedily along improving incumbents (strategy G).
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .conic import ConeProgram, lorentz_project, solve_conic
from .follower import FollowerQuery, solve_follower
from .model import Instance, Point, evaluate_q

EPS_VIOLATION = 1e-6
MAX_CGLP_CUT_ROWS = 20   # cut rows carried into the bar system of one CGLP

_uid_counter = itertools.count(1)


@dataclass
class Disjunction:
    a: np.ndarray
    d1_rhs: float               # D1 is a'x <= d1_rhs
    D_tilde: np.ndarray         # (n3 + 2, n2)
    c_tilde: np.ndarray         # (n3 + 2,)
    q_hat: float
    y_hat: np.ndarray


@dataclass
class Cut:
    alpha: np.ndarray
    beta: np.ndarray
    tau: float
    scope: str                  # "global" | "local"
    violation_at_source: float
    uid: int = 0
    multiplier_norm: float = 0.0
    origin: str = ""            # "integer" | "fractional"
    source_point: np.ndarray | None = None
    node_lb: np.ndarray | None = None
    node_ub: np.ndarray | None = None

    def row(self):
        return np.concatenate([self.alpha, self.beta])


@dataclass
class CGLPDescription:
    n1: int
    n2: int
    Mbar: np.ndarray
    Nbar: np.ndarray
    hbar: np.ndarray
    conic_Tx: np.ndarray        # stacked Lorentz rows, x part (mt, n1)
    conic_Ty: np.ndarray
    conic_r: np.ndarray
    cone_dims: tuple
    x_star: np.ndarray
    y_star: np.ndarray
    at_root: bool
    disj: Disjunction | None = None
    node_lb: np.ndarray | None = None
    node_ub: np.ndarray | None = None


def build_disjunction(inst: Instance, y_hat) -> Disjunction:
    """Closed forms of D1 and the Lorentz lift of D2 for an integer yhat."""
    y_hat = np.asarray(y_hat, dtype=float)
    if np.any(np.abs(y_hat - np.round(y_hat)) > 1e-9):
        raise ValueError("disjunction requires an integer follower candidate")
    q_hat = evaluate_q(inst, y_hat)
    D_tilde = np.vstack([-inst.g / 2.0, inst.V, inst.g / 2.0])
    c_tilde = np.concatenate([[(-1.0 - q_hat) / 2.0],
                              np.zeros(inst.V.shape[0]),
                              [(-1.0 + q_hat) / 2.0]])
    d1_rhs = float(inst.f - inst.b @ y_hat - 1.0)
    return Disjunction(a=inst.a.astype(float), d1_rhs=d1_rhs,
                       D_tilde=D_tilde, c_tilde=c_tilde,
                       q_hat=q_hat, y_hat=y_hat)


def lift_membership(disj: Disjunction, y, tol=0.0) -> bool:
    """Check Dt y - ct in Q, i.e. q(y) <= q(yhat) through the lift."""
    z = disj.D_tilde @ np.asarray(y, dtype=float) - disj.c_tilde
    return bool(z[0] >= np.linalg.norm(z[1:]) - tol)


def cglp_description(relax, point: Point, node_lb=None, node_ub=None,
                     local_cuts=(), at_root=None,
                     max_cut_rows=MAX_CGLP_CUT_ROWS) -> CGLPDescription:
    """Bar system of the current P (leader rows, linking row, cuts, follower
    polyhedron rows, node bound rows) plus the exact conic rows.

    When the pools hold more than ``max_cut_rows`` cuts, only the ones with
    the smallest slack at the separation point are kept.  Dropping rows
    relaxes P, so every cut of the resulting CGLP stays valid; on binary
    instances integer points remain extreme (they are box vertices), so the
    separation guarantee is unaffected.
    """
    node_lb = relax.lb if node_lb is None else np.asarray(node_lb, dtype=float)
    node_ub = relax.ub if node_ub is None else np.asarray(node_ub, dtype=float)
    cuts = list(relax.global_cuts) + list(local_cuts)
    if len(cuts) > max_cut_rows:
        v = point.v
        slack = np.array([c.row() @ v - c.tau for c in cuts])
        keep = np.argsort(slack, kind="stable")[:max_cut_rows]
        cuts = [cuts[i] for i in sorted(keep)]
    Mbar, Nbar, hbar = relax.bar_system(cuts=cuts, lb=node_lb, ub=node_ub)
    if relax.conic:
        Tx = np.vstack([T[:, :relax.n1] for T, _ in relax.conic])
        Ty = np.vstack([T[:, relax.n1:] for T, _ in relax.conic])
        r = np.concatenate([r for _, r in relax.conic])
        dims = tuple(T.shape[0] for T, _ in relax.conic)
    else:
        Tx = np.zeros((0, relax.n1))
        Ty = np.zeros((0, relax.n2))
        r = np.zeros(0)
        dims = ()
    if at_root is None:
        at_root = (not local_cuts and np.all(node_lb == relax.lb)
                   and np.all(node_ub == relax.ub))
    return CGLPDescription(n1=relax.n1, n2=relax.n2, Mbar=Mbar, Nbar=Nbar,
                           hbar=hbar, conic_Tx=Tx, conic_Ty=Ty, conic_r=r,
                           cone_dims=dims, x_star=point.x.copy(),
                           y_star=point.y.copy(), at_root=bool(at_root),
                           node_lb=node_lb.copy(), node_ub=node_ub.copy())


def assemble_cgsocp(desc: CGLPDescription):
    """Cone program of the cut generator with the l2 normalization.

    Variables: free (alpha, beta, tau), nonnegative (pibar_1, pibar_2,
    sigma+ = -sigma, slacks of the two tau rows), Lorentz (pitilde_1,
    pitilde_2, rho, and the normalization block zeta with zeta_0 = 1 and
    zeta_rest pinned to the stacked multipliers).
    """
    disj = desc.disj
    if disj is None:
        raise ValueError("description carries no disjunction")
    n1, n2 = desc.n1, desc.n2
    p = desc.Mbar.shape[0]
    mt = desc.conic_Tx.shape[0]
    zdim = disj.D_tilde.shape[0]
    nmult = 2 * p + 2 * mt + 1 + zdim
    nf = n1 + n2 + 1
    nl = 2 * p + 3
    dims = tuple(desc.cone_dims) * 2 + (zdim, 1 + nmult)

    ncols = nf + nl + 2 * mt + zdim + 1 + nmult
    i_alpha = slice(0, n1)
    i_beta = slice(n1, n1 + n2)
    i_tau = n1 + n2
    i_pi1 = slice(nf, nf + p)
    i_pi2 = slice(nf + p, nf + 2 * p)
    i_sig = nf + 2 * p
    i_s5 = nf + 2 * p + 1
    i_s6 = nf + 2 * p + 2
    i_pt1 = slice(nf + nl, nf + nl + mt)
    i_pt2 = slice(nf + nl + mt, nf + nl + 2 * mt)
    i_rho = slice(nf + nl + 2 * mt, nf + nl + 2 * mt + zdim)
    i_zeta = slice(nf + nl + 2 * mt + zdim, ncols)

    mrows = 2 * (n1 + n2) + 2 + 1 + nmult
    A = np.zeros((mrows, ncols))
    b = np.zeros(mrows)
    r = 0
    # alpha' = pibar_1' Mbar + pitilde_1' Mtilde + sigma a'
    A[r:r + n1, i_alpha] = -np.eye(n1)
    A[r:r + n1, i_pi1] = desc.Mbar.T
    A[r:r + n1, i_pt1] = desc.conic_Tx.T
    A[r:r + n1, i_sig] = -disj.a
    r += n1
    # alpha' = pibar_2' Mbar + pitilde_2' Mtilde
    A[r:r + n1, i_alpha] = -np.eye(n1)
    A[r:r + n1, i_pi2] = desc.Mbar.T
    A[r:r + n1, i_pt2] = desc.conic_Tx.T
    r += n1
    # beta' = pibar_1' Nbar + pitilde_1' Ntilde
    A[r:r + n2, i_beta] = -np.eye(n2)
    A[r:r + n2, i_pi1] = desc.Nbar.T
    A[r:r + n2, i_pt1] = desc.conic_Ty.T
    r += n2
    # beta' = pibar_2' Nbar + pitilde_2' Ntilde + rho' Dtilde
    A[r:r + n2, i_beta] = -np.eye(n2)
    A[r:r + n2, i_pi2] = desc.Nbar.T
    A[r:r + n2, i_pt2] = desc.conic_Ty.T
    A[r:r + n2, i_rho] = disj.D_tilde.T
    r += n2
    # tau <= pibar_1' hbar + pitilde_1' htilde + sigma (f - 1 - b'yhat)
    A[r, i_tau] = -1.0
    A[r, i_pi1] = desc.hbar
    A[r, i_pt1] = desc.conic_r
    A[r, i_sig] = -disj.d1_rhs
    A[r, i_s5] = -1.0
    r += 1
    # tau <= pibar_2' hbar + pitilde_2' htilde + rho' ctilde
    A[r, i_tau] = -1.0
    A[r, i_pi2] = desc.hbar
    A[r, i_pt2] = desc.conic_r
    A[r, i_rho] = disj.c_tilde
    A[r, i_s6] = -1.0
    r += 1
    # normalization block: zeta_0 = 1, zeta_rest = stacked multipliers
    z0 = i_zeta.start
    A[r, z0] = 1.0
    b[r] = 1.0
    r += 1
    mult_cols = (list(range(i_pi1.start, i_pi1.stop))
                 + list(range(i_pi2.start, i_pi2.stop))
                 + list(range(i_pt1.start, i_pt1.stop))
                 + list(range(i_pt2.start, i_pt2.stop))
                 + [i_sig]
                 + list(range(i_rho.start, i_rho.stop)))
    for k, col in enumerate(mult_cols):
        A[r + k, z0 + 1 + k] = 1.0
        A[r + k, col] = -1.0
    r += nmult

    c = np.zeros(ncols)
    c[i_tau] = 1.0
    c[i_alpha] = -desc.x_star
    c[i_beta] = -desc.y_star
    cp = ConeProgram(c=c, A=A, b=b, n_free=nf, n_nonneg=nl,
                     lorentz_dims=dims, sense="max")
    index = {"alpha": i_alpha, "beta": i_beta, "tau": i_tau,
             "pi1": i_pi1, "pi2": i_pi2, "sigma": i_sig,
             "pt1": i_pt1, "pt2": i_pt2, "rho": i_rho,
             "mult_cols": mult_cols}
    return cp, index


def _project_lorentz_blocks(v, dims):
    out = v.copy()
    start = 0
    for d in dims:
        out[start:start + d] = lorentz_project(out[start:start + d])
        start += d
    return out


def _recover_cut(xsol, desc: CGLPDescription, index):
    """Rebuild a provably valid (alpha, beta, tau) from the multipliers.

    The multipliers are projected onto their cones, the cut coefficients are
    recomputed from the multiplier identities of both disjunction sides, and
    tau absorbs the residual mismatch between the two sides over the node
    box.  The result is valid for the disjunction up to floating-point dot
    products, independently of how accurately the CG-SOCP was solved.
    """
    disj = desc.disj
    pi1 = np.maximum(xsol[index["pi1"]], 0.0)
    pi2 = np.maximum(xsol[index["pi2"]], 0.0)
    sig = max(float(xsol[index["sigma"]]), 0.0)     # sigma = -sig <= 0
    pt1 = _project_lorentz_blocks(xsol[index["pt1"]], desc.cone_dims)
    pt2 = _project_lorentz_blocks(xsol[index["pt2"]], desc.cone_dims)
    rho = lorentz_project(xsol[index["rho"]])
    alpha1 = desc.Mbar.T @ pi1 + desc.conic_Tx.T @ pt1 - sig * disj.a
    alpha2 = desc.Mbar.T @ pi2 + desc.conic_Tx.T @ pt2
    beta1 = desc.Nbar.T @ pi1 + desc.conic_Ty.T @ pt1
    beta2 = desc.Nbar.T @ pi2 + desc.conic_Ty.T @ pt2 + disj.D_tilde.T @ rho
    tau1 = float(desc.hbar @ pi1 + desc.conic_r @ pt1 - sig * disj.d1_rhs)
    tau2 = float(desc.hbar @ pi2 + desc.conic_r @ pt2 + disj.c_tilde @ rho)
    # side 2 certifies alpha2'x + beta2'y >= tau2; shifting to the side-1
    # coefficients costs the minimum of the difference over the node box
    dal = np.concatenate([alpha1 - alpha2, beta1 - beta2])
    lo, hi = desc.node_lb, desc.node_ub
    shift = float(np.minimum(dal * lo, dal * hi).sum())
    tau = min(tau1, tau2 + shift)
    mult_norm = float(np.sqrt(pi1 @ pi1 + pi2 @ pi2 + sig * sig
                              + pt1 @ pt1 + pt2 @ pt2 + rho @ rho))
    return alpha1, beta1, tau, mult_norm


def extract_cut(result, desc: CGLPDescription, index, eps=EPS_VIOLATION,
                origin="") -> Cut | None:
    """Turn a CG-SOCP solution into a cut when it is significantly violated.

    The cut is rebuilt from cone-projected multipliers, so its validity does
    not rest on the solver tolerance; a solution is usable even when the
    solver stopped early, as long as the recovered violation clears eps.
    """
    if result.x is None:
        return None
    alpha, beta, tau, mult_norm = _recover_cut(result.x, desc, index)
    violation = tau - float(alpha @ desc.x_star) - float(beta @ desc.y_star)
    if violation <= eps:
        return None
    scope = "global" if desc.at_root else "local"
    return Cut(alpha=alpha, beta=beta, tau=tau, scope=scope,
               violation_at_source=violation, uid=next(_uid_counter),
               multiplier_norm=mult_norm, origin=origin,
               source_point=np.concatenate([desc.x_star, desc.y_star]),
               node_lb=None if desc.at_root else desc.node_lb,
               node_ub=None if desc.at_root else desc.node_ub)


@dataclass
class SeparationOutcome:
    cut: Cut | None = None
    follower_status: str = ""
    phi: float | None = None
    q_star: float = np.nan
    t_follower: float = 0.0
    t_cgsocp: float = 0.0
    n_cgsocp: int = 0


def separate(inst: Instance, point: Point, desc: CGLPDescription,
             strategy="O", eps=EPS_VIOLATION, origin="integer") -> SeparationOutcome:
    """Try to find a significantly violated disjunctive cut at ``point``.

    Strategy O solves the follower to optimality under the upper cutoff
    q(y*) and runs one CG-SOCP on the optimal candidate; strategy G runs a
    CG-SOCP on every improving incumbent streamed out of the follower
    search and returns the first significantly violated cut.
    """
    if strategy not in ("O", "G"):
        raise ValueError("strategy must be 'O' or 'G'")
    out = SeparationOutcome(q_star=evaluate_q(inst, point.y))

    def try_candidate(y_hat):
        t0 = time.perf_counter()
        desc.disj = build_disjunction(inst, y_hat)
        cp, index = assemble_cgsocp(desc)
        # recovered cuts are valid regardless of the solve accuracy, so the
        # CG-SOCP may run loose; integer points get one precise retry before
        # a separation failure is surfaced
        res = solve_conic(cp, tol=1e-7)
        cut = extract_cut(res, desc, index, eps=eps, origin=origin)
        if cut is None and origin == "integer" and res.status != "optimal":
            res = solve_conic(cp, tol=1e-8, max_iter=300)
            cut = extract_cut(res, desc, index, eps=eps, origin=origin)
        out.t_cgsocp += time.perf_counter() - t0
        out.n_cgsocp += 1
        return cut

    t_start = time.perf_counter()
    if strategy == "O":
        fres = solve_follower(inst, FollowerQuery(x_star=point.x,
                                                  cutoff=out.q_star))
        out.follower_status = fres.status
        out.t_follower = time.perf_counter() - t_start
        if fres.status == "optimal":
            out.phi = fres.phi
            out.cut = try_candidate(fres.best_y)
    else:
        hit = {}

        def sink(y_hat, q):
            cut = try_candidate(y_hat)
            if cut is not None:
                hit["cut"] = cut
                return True
            return False

        fres = solve_follower(inst, FollowerQuery(x_star=point.x,
                                                  cutoff=out.q_star,
                                                  mode="stream"), sink)
        out.follower_status = fres.status
        out.t_follower = time.perf_counter() - t_start - out.t_cgsocp
        out.cut = hit.get("cut")
        if fres.status == "optimal":
            out.phi = fres.phi
    return out
