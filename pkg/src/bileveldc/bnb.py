"""Best-bound branch and bound over LP relaxations with callback hooks.

Node relaxations are LPs over the bar rows plus accumulated cuts; Lorentz
rows of the relaxation are enforced lazily by outer approximation inside the
node LP loop (the OA rows are valid for the cone, hence global).  Callbacks
may reject integer points with violated cuts, which triggers a node
re-solve; fractional cuts are capped per node before branching is forced.
With empty callbacks this is a plain MISOCP solver for the relaxation.

Node selection is best-bound with depth-first plunging: one child of every
branching goes onto a LIFO stack that is emptied before the heap is popped.
Cuts returned by callbacks land in the global pool or in the node-local
pool (inherited by descendants) according to their scope.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .model import Point, PolyhedralRelaxation
from .simplex import LinearProgram, solve_lp, outer_approximate

INT_TOL = 1e-6
PRUNE_TOL = 1e-9
_DUP_TOL = 1e-7
_SAFETY_ROUNDS = 10000


class EngineError(RuntimeError):
    """Unrecoverable numerical or contract failure inside the tree search."""


@dataclass
class Node:
    lb: np.ndarray
    ub: np.ndarray
    local_cuts: list
    depth: int
    bound: float
    basis: list | None = None       # basis tokens from the parent LP
    seq: int = 0

    def is_root_scope(self, relax: PolyhedralRelaxation) -> bool:
        return (not self.local_cuts
                and bool(np.all(self.lb == relax.lb))
                and bool(np.all(self.ub == relax.ub)))


@dataclass
class Callbacks:
    on_integer_solution: object = None
    on_fractional_solution: object = None


@dataclass
class BBLimits:
    time_limit: float | None = None
    fractional_cut_rounds: int = 50
    tailoff_rel: float = 1e-4     # branch when a cut round moves the node
    collect_stats: bool = False   # bound by less than this (relative)


@dataclass
class BBResult:
    status: str                     # optimal | infeasible | time_limit
    v: np.ndarray | None
    value: float | None
    bound: float
    nodes: int
    root_value: float | None = None
    root_bound: float | None = None
    bound_pairs: list = field(default_factory=list)


def most_fractional(v, integer_mask, tol=INT_TOL):
    """Index of the most fractional integer coordinate (ties: smallest
    index), or -1 when all integer coordinates are integral within tol."""
    v = np.asarray(v, dtype=float)
    frac = np.abs(v - np.round(v))
    frac[~np.asarray(integer_mask, dtype=bool)] = 0.0
    j = int(np.argmax(frac))
    return j if frac[j] > tol else -1


def branch(node: Node, point, integer_mask=None):
    """Split on the most fractional coordinate; floor child first."""
    v = point.v if isinstance(point, Point) else np.asarray(point, dtype=float)
    mask = np.ones(v.shape[0], dtype=bool) if integer_mask is None else integer_mask
    j = most_fractional(v, mask)
    if j < 0:
        raise ValueError("branch() called on an integral point")
    lo = Node(lb=node.lb.copy(), ub=node.ub.copy(),
              local_cuts=list(node.local_cuts), depth=node.depth + 1,
              bound=node.bound, basis=node.basis)
    hi = Node(lb=node.lb.copy(), ub=node.ub.copy(),
              local_cuts=list(node.local_cuts), depth=node.depth + 1,
              bound=node.bound, basis=node.basis)
    lo.ub[j] = np.floor(v[j])
    hi.lb[j] = np.ceil(v[j])
    return lo, hi


def _cut_vector(cut):
    return np.concatenate([np.asarray(cut.alpha, dtype=float),
                           np.asarray(cut.beta, dtype=float),
                           [float(cut.tau)]])


def is_duplicate_cut(cut, pool):
    """Near-duplicate test on the l2-normalized (alpha, beta, tau) vector."""
    vec = _cut_vector(cut)
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        return True
    vec = vec / nrm
    for other in pool:
        ovec = _cut_vector(other)
        onrm = np.linalg.norm(ovec)
        if onrm == 0:
            continue
        if np.max(np.abs(vec - ovec / onrm)) <= _DUP_TOL:
            return True
    return False


def solve_bb(relax: PolyhedralRelaxation, callbacks: Callbacks | None = None,
             limits: BBLimits | None = None) -> BBResult:
    """Explore the relaxation tree; returns incumbent and proven bound."""
    cb = callbacks or Callbacks()
    lim = limits or BBLimits()
    t0 = time.perf_counter()
    nv = relax.n_vars
    mask = relax.integer_mask

    def out_of_time():
        return lim.time_limit is not None and time.perf_counter() - t0 >= lim.time_limit

    def build_lp(node: Node):
        blocks, rhs, tokens = [], [], []
        if relax.leader_A.shape[0]:
            blocks.append(relax.leader_A)
            rhs.extend(relax.leader_rhs)
            tokens.extend(("core", i) for i in range(relax.leader_A.shape[0]))
        blocks.append(relax.link_row[None, :])
        rhs.append(relax.link_rhs)
        tokens.append(("link", 0))
        if relax.y_A.shape[0]:
            blocks.append(relax.y_A)
            rhs.extend(relax.y_rhs)
            tokens.extend(("yrow", i) for i in range(relax.y_A.shape[0]))
        for cut in relax.global_cuts:
            blocks.append(np.concatenate([cut.alpha, cut.beta])[None, :])
            rhs.append(cut.tau)
            tokens.append(("cut", cut.uid))
        for cut in node.local_cuts:
            blocks.append(np.concatenate([cut.alpha, cut.beta])[None, :])
            rhs.append(cut.tau)
            tokens.append(("cut", cut.uid))
        for i, (row, r) in enumerate(relax.oa_rows):
            blocks.append(np.asarray(row)[None, :])
            rhs.append(r)
            tokens.append(("oa", i))
        A = np.vstack(blocks)
        row_lb = np.asarray(rhs, dtype=float)
        lp = LinearProgram(c=relax.obj, A=A, row_lb=row_lb,
                           row_ub=np.full(A.shape[0], np.inf),
                           lb=node.lb, ub=node.ub)
        return lp, tokens

    def warm_columns(tokens, node):
        if node.basis is None:
            return None
        pos = {tok: nv + i for i, tok in enumerate(tokens)}
        cols, seen = [], set()
        for tok in node.basis:
            if isinstance(tok, tuple) and tok[0] == "v":
                cols.append(tok[1])
                seen.add(("v", tok[1]))
            elif tok in pos:
                cols.append(pos[tok])
                seen.add(tok)
            else:
                return None
        for tok, col in pos.items():
            if tok not in seen and len(cols) < len(tokens):
                cols.append(col)
        return cols if len(cols) == len(tokens) else None

    def basis_tokens(lpres, tokens):
        if lpres.basis is None:
            return None
        out = []
        for col in lpres.basis["columns"]:
            out.append(("v", col) if col < nv else tokens[col - nv])
        return out

    zstar, vstar = np.inf, None
    heap, plunge = [], []
    seq = 0
    root = Node(lb=relax.lb.copy(), ub=relax.ub.copy(), local_cuts=[],
                depth=0, bound=-np.inf, seq=seq)
    plunge.append(root)
    nodes = 0
    timed_out = False
    root_value = root_bound = None
    first_branch_seen = False
    bound_pairs = []

    while heap or plunge:
        if out_of_time():
            timed_out = True
            break
        node = plunge.pop() if plunge else heapq.heappop(heap)[2]
        if node.bound >= zstar - PRUNE_TOL:
            continue

        nodes += 1
        frac_rounds = 0
        rounds = 0
        node_val = None
        frac_stalled = False
        val_at_last_cut = None
        while True:
            rounds += 1
            if rounds > _SAFETY_ROUNDS:
                raise EngineError("node cut loop exceeded the safety cap")
            if out_of_time():
                timed_out = True
                break
            lp, tokens = build_lp(node)
            lpres = solve_lp(lp, warm_basis=warm_columns(tokens, node))
            if lpres.status == "stalled":
                lpres = solve_lp(lp)
            if lpres.status == "infeasible":
                node_val = None
                break
            if lpres.status != "optimal":
                raise EngineError(f"node LP ended with status {lpres.status}")
            v = lpres.x
            node_val = lpres.objective
            if lim.collect_stats and np.isfinite(node.bound):
                bound_pairs.append((node.bound, node_val))
            if node_val >= zstar - PRUNE_TOL:
                break
            oa = outer_approximate(relax.conic, v)
            if oa:
                relax.oa_rows.extend(oa)
                node.basis = basis_tokens(lpres, tokens)
                continue

            j = most_fractional(v, mask)
            if j < 0:
                vr = v.copy()
                vr[mask] = np.round(vr[mask])
                val_int = float(relax.obj @ vr)
                point = Point.from_v(vr, relax.n1)
                decision = (cb.on_integer_solution(point, node)
                            if cb.on_integer_solution else None)
                if decision:
                    placed = _place_cuts(decision, relax, node, vr)
                    if placed == 0:
                        raise EngineError(
                            "integer point rejected but every cut was a duplicate")
                    node.basis = basis_tokens(lpres, tokens)
                    continue
                if val_int < zstar - PRUNE_TOL:
                    zstar, vstar = val_int, vr
                break
            else:
                if (cb.on_fractional_solution and not frac_stalled
                        and frac_rounds < lim.fractional_cut_rounds):
                    if val_at_last_cut is not None and \
                            node_val - val_at_last_cut < lim.tailoff_rel * (1.0 + abs(node_val)):
                        frac_stalled = True
                    else:
                        point = Point.from_v(v, relax.n1)
                        cuts = cb.on_fractional_solution(point, node)
                        if cuts:
                            placed = _place_cuts(cuts, relax, node, v)
                            frac_rounds += 1
                            if placed:
                                val_at_last_cut = node_val
                                node.basis = basis_tokens(lpres, tokens)
                                continue
                # branch
                node.basis = basis_tokens(lpres, tokens)
                node.bound = node_val
                lo, hi = branch(node, v, mask)
                if not first_branch_seen:
                    first_branch_seen = True
                    root_bound = node_val
                    root_value = zstar if np.isfinite(zstar) else None
                vj = v[most_fractional(v, mask)]
                first, second = ((lo, hi) if vj - np.floor(vj) <= 0.5 else (hi, lo))
                seq += 1
                second.seq = seq
                heapq.heappush(heap, (second.bound, seq, second))
                seq += 1
                first.seq = seq
                plunge.append(first)
                break
        if timed_out:
            break

    open_bounds = [entry[2].bound for entry in heap] + [nd.bound for nd in plunge]
    if timed_out:
        lb = min(open_bounds) if open_bounds else (zstar if np.isfinite(zstar) else -np.inf)
        status = "time_limit"
    else:
        lb = zstar if np.isfinite(zstar) else np.inf
        status = "optimal" if np.isfinite(zstar) else "infeasible"
    if root_bound is None:
        root_bound = lb
        root_value = zstar if np.isfinite(zstar) else None
    if root_value is None and np.isfinite(zstar):
        root_value = zstar
    return BBResult(status=status, v=vstar,
                    value=zstar if np.isfinite(zstar) else None,
                    bound=lb, nodes=nodes,
                    root_value=root_value, root_bound=root_bound,
                    bound_pairs=bound_pairs)


def _place_cuts(cuts, relax, node, v):
    """Route cuts to the global or node-local pool; returns how many landed."""
    placed = 0
    for cut in cuts:
        row = np.concatenate([cut.alpha, cut.beta])
        if row @ v >= cut.tau:
            raise EngineError("callback returned a cut not violated by the point")
        pool = relax.global_cuts if cut.scope == "global" else node.local_cuts
        if not is_duplicate_cut(cut, pool):
            pool.append(cut)
            placed += 1
    return placed
