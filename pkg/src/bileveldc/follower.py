"""Follower oracle: minimize q(y) over integer y with a'x* + b'y >= f.

A small branch and bound over continuous relaxations.  Each node relaxation
handles the quadratic objective through its epigraph q(y) <= t written as a
Lorentz block and is solved by the conic interior-point engine; branching
and node selection reuse the tree rules of the generic engine.  In stream
mode every strictly improving incumbent below the cutoff is handed to the
sink in discovery order, and the sink may abort the search early.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .bnb import most_fractional
from .conic import ConeProgram, solve_conic
from .model import Instance, evaluate_q, linking_rhs

PRUNE_TOL = 1e-9
FEAS_TOL = 1e-7
INT_TOL = 1e-6
LEAF_ENUM_LIMIT = 1024   # boxes at most this large are fathomed by enumeration


@dataclass
class FollowerQuery:
    x_star: np.ndarray
    cutoff: float = np.inf           # exclusive upper bound on acceptable q
    mode: str = "to_optimality"      # to_optimality | stream

    def __post_init__(self):
        self.x_star = np.asarray(self.x_star, dtype=float)
        if self.mode not in ("to_optimality", "stream"):
            raise ValueError("mode must be 'to_optimality' or 'stream'")


@dataclass
class FollowerResult:
    status: str                      # optimal | no_better_than_cutoff | infeasible | aborted
    phi: float | None
    best_y: np.ndarray | None
    nodes: int = 0


def _epigraph_relaxation(inst: Instance, rhs, lb, ub):
    """Cone program for min q(y) over the node box intersected with the
    linking row and the follower polyhedron; fixed coordinates are folded
    into the right-hand sides."""
    n2, n3 = inst.n2, inst.V.shape[0]
    act = lb < ub
    fix = ~act
    yfix = lb[fix]
    k = int(act.sum())
    p = inst.Y_C.shape[0]
    b_act = inst.b[act].astype(float)
    V_act, V_fix = inst.V[:, act], inst.V[:, fix]
    g_act, g_fix = inst.g[act], inst.g[fix]
    C_act = inst.Y_C[:, act] if p else np.zeros((0, k))
    C_fix = inst.Y_C[:, fix] if p else np.zeros((0, 0))

    nf = k + 1                       # y_act, t
    nl = 1 + 2 * k + p               # s_link, s_lb, s_ub, s_Y
    zdim = n3 + 2
    ncols = nf + nl + zdim
    mrows = 1 + 2 * k + p + zdim
    A = np.zeros((mrows, ncols))
    bvec = np.zeros(mrows)
    iy, it = slice(0, k), k
    isl = nf
    islb = slice(nf + 1, nf + 1 + k)
    isub = slice(nf + 1 + k, nf + 1 + 2 * k)
    isy = slice(nf + 1 + 2 * k, nf + nl)
    iz = slice(nf + nl, ncols)

    r = 0
    A[r, iy] = b_act
    A[r, isl] = -1.0
    bvec[r] = rhs - float(inst.b[fix] @ yfix)
    r += 1
    A[r:r + k, iy] = np.eye(k)
    A[r:r + k, islb] = -np.eye(k)
    bvec[r:r + k] = lb[act]
    r += k
    A[r:r + k, iy] = np.eye(k)
    A[r:r + k, isub] = np.eye(k)
    bvec[r:r + k] = ub[act]
    r += k
    if p:
        A[r:r + p, iy] = C_act
        A[r:r + p, isy] = -np.eye(p)
        bvec[r:r + p] = inst.Y_u - C_fix @ yfix
        r += p
    # epigraph lift: z = (  (1 + t - g'y)/2,  V y,  (1 - t + g'y)/2  ) in Q
    z0, zmid, zlast = r, slice(r + 1, r + 1 + n3), r + 1 + n3
    A[z0, nf + nl] = 1.0
    A[z0, iy] = g_act / 2.0
    A[z0, it] = -0.5
    bvec[z0] = 0.5 - float(g_fix @ yfix) / 2.0
    A[zmid, nf + nl + 1:nf + nl + 1 + n3] = np.eye(n3)
    A[zmid, iy] = -V_act
    bvec[zmid] = V_fix @ yfix
    A[zlast, nf + nl + 1 + n3] = 1.0
    A[zlast, iy] = -g_act / 2.0
    A[zlast, it] = 0.5
    bvec[zlast] = 0.5 + float(g_fix @ yfix) / 2.0

    c = np.zeros(ncols)
    c[it] = 1.0
    cp = ConeProgram(c=c, A=A, b=bvec, n_free=nf, n_nonneg=nl,
                     lorentz_dims=(zdim,))
    return cp, act


def _node_feasible(inst, rhs, lb, ub):
    """Exact continuous feasibility of the node (guards against spurious
    infeasibility certificates at nodes without a strict interior)."""
    if float(np.maximum(inst.b * lb, inst.b * ub).sum()) < rhs - FEAS_TOL:
        return False
    if not inst.Y_C.shape[0]:
        return True
    from .simplex import LinearProgram, solve_lp
    n2 = inst.n2
    A = np.vstack([inst.b[None, :].astype(float), inst.Y_C])
    row_lb = np.concatenate([[rhs], inst.Y_u])
    lp = LinearProgram(c=np.zeros(n2), A=A, row_lb=row_lb,
                       row_ub=np.full(A.shape[0], np.inf), lb=lb, ub=ub)
    return solve_lp(lp).status == "optimal"


def _integer_candidate(inst, rhs, y):
    """Exact feasibility and value of a rounded integer response."""
    yr = np.round(y)
    if float(inst.b @ yr) < rhs - FEAS_TOL:
        return None
    if inst.Y_C.shape[0] and np.any(inst.Y_C @ yr < inst.Y_u - FEAS_TOL):
        return None
    return yr, evaluate_q(inst, yr)


def _box_lattice(lb, ub):
    axes = [np.arange(int(lo), int(hi) + 1) for lo, hi in zip(lb, ub)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1).astype(float)


class _Incumbents:
    """Best response found so far plus the streaming sink."""

    def __init__(self, cutoff, sink):
        self.cutoff = cutoff
        self.sink = sink
        self.best_q = np.inf
        self.best_y = None

    def limit(self):
        return min(self.cutoff, self.best_q)

    def improve(self, y, q):
        self.best_q, self.best_y = q, np.asarray(y, dtype=float).copy()
        return self.sink is not None and bool(self.sink(self.best_y.copy(), q))


def _enumerate_box(inst, rhs, lb, ub, inc: _Incumbents):
    """Fathom a small box exactly: visit every feasible lattice point whose
    value strictly improves on the running limit, in lattice order.

    Returns True when the sink asked to abort.
    """
    ys = _box_lattice(lb, ub)
    feas = ys @ inst.b.astype(float) >= rhs - FEAS_TOL
    if inst.Y_C.shape[0]:
        feas &= np.all(ys @ inst.Y_C.T >= inst.Y_u - FEAS_TOL, axis=1)
    if not np.any(feas):
        return False
    w = ys @ inst.V.T
    q = np.einsum("ij,ij->i", w, w) + ys @ inst.g
    for i in np.nonzero(feas & (q < inc.limit() - PRUNE_TOL))[0]:
        if q[i] < inc.limit() - PRUNE_TOL:
            if inc.improve(ys[i], float(q[i])):
                return True
    return False


def solve_follower(inst: Instance, query: FollowerQuery,
                   incumbent_sink=None) -> FollowerResult:
    """Enumeration-based follower solve with cutoff pruning.

    Nodes whose box holds at most LEAF_ENUM_LIMIT lattice points are
    fathomed by exact enumeration; larger boxes are bounded by the epigraph
    relaxation and split on the most fractional coordinate.
    """
    n1, n2 = inst.n1, inst.n2
    rhs = linking_rhs(inst, query.x_star)
    lb0 = inst.lb[n1:].astype(float)
    ub0 = inst.ub[n1:].astype(float)

    inc = _Incumbents(query.cutoff, incumbent_sink)
    pruned_by_value = False
    nodes = 0
    heap, plunge = [], []
    seq = 0
    plunge.append((-np.inf, lb0, ub0))

    def aborted():
        return FollowerResult(status="aborted", phi=inc.best_q,
                              best_y=inc.best_y, nodes=nodes)

    while heap or plunge:
        bound, lb, ub = plunge.pop() if plunge else heapq.heappop(heap)[2]
        if bound >= inc.limit() - PRUNE_TOL:
            pruned_by_value = True
            continue
        nodes += 1

        # cheap relaxation of the linking row over the box
        max_link = float(np.maximum(inst.b * lb, inst.b * ub).sum())
        if max_link < rhs - FEAS_TOL:
            continue

        if np.prod(ub - lb + 1.0) <= LEAF_ENUM_LIMIT:
            if _enumerate_box(inst, rhs, lb, ub, inc):
                return aborted()
            continue

        cp, act = _epigraph_relaxation(inst, rhs, lb, ub)
        # bounds only steer pruning at integer granularity, so the node
        # relaxation may run at a loose tolerance; values of integer points
        # are always recomputed exactly
        res = solve_conic(cp, tol=1e-6)
        if res.status == "infeasible":
            if not _node_feasible(inst, rhs, lb, ub):
                continue
            # spurious certificate at a node without strict interior
            y = (lb + ub) / 2.0
            node_bound = bound
            res = None
        elif res.status == "optimal":
            tval = res.objective
            if tval >= inc.limit() - PRUNE_TOL:
                pruned_by_value = True
                continue
            y = lb.copy()
            y[act] = res.x[:int(act.sum())]
            node_bound = tval
        else:
            # solver hit its cap: keep the parent bound and force branching
            y = lb.copy()
            y[act] = np.clip(res.x[:int(act.sum())], lb[act], ub[act])
            node_bound = bound

        j = most_fractional(y, np.ones(n2, dtype=bool))
        if j < 0 and res is not None and res.status == "optimal":
            cand = _integer_candidate(inst, rhs, y)
            if cand is not None:
                yr, q = cand
                if q < inc.limit() - PRUNE_TOL and inc.improve(yr, q):
                    return aborted()
                continue
            j = int(np.argmax(lb < ub))   # rounded point infeasible: split
        elif j < 0:
            j = int(np.argmax(lb < ub))

        lo_ub, hi_lb = np.floor(y[j]), np.ceil(y[j])
        if lo_ub == hi_lb:                # integral coordinate, split mid-box
            lo_ub = np.floor((lb[j] + ub[j]) / 2.0)
            hi_lb = lo_ub + 1.0
        for new_lb, new_ub, to_plunge in (
                (lb, np.where(np.arange(n2) == j, lo_ub, ub), True),
                (np.where(np.arange(n2) == j, hi_lb, lb), ub, False)):
            child = (node_bound, new_lb.astype(float), new_ub.astype(float))
            if to_plunge:
                plunge.append(child)
            else:
                seq += 1
                heapq.heappush(heap, (node_bound, seq, child))

    if inc.best_y is not None:
        return FollowerResult(status="optimal", phi=inc.best_q,
                              best_y=inc.best_y, nodes=nodes)
    if pruned_by_value or np.isfinite(query.cutoff):
        return FollowerResult(status="no_better_than_cutoff", phi=None,
                              best_y=None, nodes=nodes)
    return FollowerResult(status="infeasible", phi=None, best_y=None,
                          nodes=nodes)


def phi(inst: Instance, x_star) -> float:
    """Follower value function; +inf when the follower is infeasible."""
    res = solve_follower(inst, FollowerQuery(x_star=x_star))
    return res.phi if res.status == "optimal" else np.inf
