"""Random covering instances, JSON file I/O, and the brute-force oracle.

The generator follows the quadratic bilevel covering scheme: integer entries
of c, d, M, N, a, b drawn uniformly from [0, 99], h and f set to a quarter
of the corresponding row sums (floored to keep the data integral), V drawn
from [0, 9] with g = 0, all variables binary, no upper-level conic rows.

The oracle is pure enumeration and shares no code path with the solvers.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .model import Instance, InstanceFormatError, Point, instance_from_json_dict

ORACLE_GUARD = 2 ** 24
_VALUE_TOL = 1e-9


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    m1: int
    seed: int

    def __post_init__(self):
        if self.n < 2 or self.n % 2:
            raise ValueError("n must be even and >= 2")
        if self.m1 not in (0, 1):
            raise ValueError("m1 must be 0 or 1")


def generate(cfg: GeneratorConfig) -> Instance:
    """Deterministic covering instance for a config.

    Stream: Philox4x64 keyed with (seed, attempt); draws in the order
    c, d, M (row-major), N, a, b, V (row-major) via Generator.integers.
    The rare draw where the all-ones follower response is not feasible for
    x = 0 (or where the linking row is all zero) is discarded and the
    attempt counter bumped, keeping generation reproducible.
    """
    n1 = n2 = cfg.n // 2
    for attempt in range(100):
        rng = np.random.Generator(np.random.Philox(key=[cfg.seed, attempt]))
        c = rng.integers(0, 100, size=n1).astype(float)
        d = rng.integers(0, 100, size=n2).astype(float)
        M = rng.integers(0, 100, size=(cfg.m1, n1)).astype(float)
        N = rng.integers(0, 100, size=(cfg.m1, n2)).astype(float)
        a = rng.integers(0, 100, size=n1)
        b = rng.integers(0, 100, size=n2)
        V = rng.integers(0, 10, size=(n2, n2)).astype(float)
        h = np.floor((M.sum(axis=1) + N.sum(axis=1)) / 4.0)
        f = int((int(a.sum()) + int(b.sum())) // 4)
        if b.sum() < f:        # all-ones follower response must stay feasible
            continue
        if a.sum() + b.sum() == 0:
            continue
        return Instance(
            n1=n1, n2=n2, c=c, d=d, M=M, N=N, h=h,
            Mt=np.zeros((0, n1)), Nt=np.zeros((0, n2)), ht=np.zeros(0),
            cones_K=(), a=a, b=b, f=f, V=V, g=np.zeros(n2),
            Y_C=np.zeros((0, n2)), Y_u=np.zeros(0),
            lb=np.zeros(cfg.n, dtype=np.int64),
            ub=np.ones(cfg.n, dtype=np.int64),
        )
    raise RuntimeError("generator failed to produce an admissible instance")


@dataclass
class OracleResult:
    status: str                      # optimal | infeasible
    value: float | None
    point: Point | None
    bilevel_feasible_points: list | None = None


def _lattice(lb, ub):
    ranges = [range(int(lo), int(hi) + 1) for lo, hi in zip(lb, ub)]
    return itertools.product(*ranges)


def count_lattice_points(inst: Instance) -> int:
    widths = (inst.ub - inst.lb + 1).astype(object)
    total = 1
    for w in widths:
        total *= int(w)
    return total


def brute_force_solve(inst: Instance, collect_feasible=False,
                      guard=ORACLE_GUARD) -> OracleResult:
    """Enumerate the bilevel-feasible set and return the optimistic optimum.

    The enumeration computes Phi(x) for every integer leader decision,
    keeps the follower responses attaining it, filters by the leader rows,
    conic rows and the follower polyhedron, and minimizes c'x + d'y.
    """
    if count_lattice_points(inst) > guard:
        raise ValueError(f"instance exceeds the {guard} lattice-point guard")
    n1, n2 = inst.n1, inst.n2
    ys = np.array(list(_lattice(inst.lb[n1:], inst.ub[n1:])), dtype=float)
    ys = ys.reshape(-1, n2)
    keep = np.ones(len(ys), dtype=bool)
    if inst.Y_C.shape[0]:
        keep &= np.all(ys @ inst.Y_C.T >= inst.Y_u - _VALUE_TOL, axis=1)
    ys = ys[keep]
    q_all = np.einsum("ij,ij->i", ys @ inst.V.T, ys @ inst.V.T) + ys @ inst.g
    link_y = ys @ inst.b.astype(float)
    d_all = ys @ inst.d

    best_val, best_pair = np.inf, None
    feasible_pts = [] if collect_feasible else None
    for x_tuple in _lattice(inst.lb[:n1], inst.ub[:n1]):
        x = np.array(x_tuple, dtype=float)
        rhs = inst.f - float(inst.a @ x)
        mask = link_y >= rhs - _VALUE_TOL
        if not np.any(mask):
            continue
        phi = float(np.min(q_all[mask]))
        opt = mask & (q_all <= phi + _VALUE_TOL)
        cand = np.nonzero(opt)[0]
        if inst.m1:
            lead = inst.M @ x
            cand = cand[np.all(ys[cand] @ inst.N.T + lead >= inst.h - _VALUE_TOL,
                               axis=1)]
        if inst.mt and cand.size:
            zx = inst.Mt @ x
            kept = []
            for idx in cand:
                z = zx + inst.Nt @ ys[idx] - inst.ht
                ok = True
                off = 0
                for k in inst.cones_K:
                    blk = z[off:off + k]
                    if blk[0] < np.linalg.norm(blk[1:]) - _VALUE_TOL:
                        ok = False
                        break
                    off += k
                if ok:
                    kept.append(idx)
            cand = np.asarray(kept, dtype=int)
        if cand.size == 0:
            continue
        if collect_feasible:
            feasible_pts.extend(Point(x.copy(), ys[idx].copy()) for idx in cand)
        vals = float(inst.c @ x) + d_all[cand]
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best_pair = Point(x.copy(), ys[cand[k]].copy())

    if best_pair is None:
        return OracleResult(status="infeasible", value=None, point=None,
                            bilevel_feasible_points=feasible_pts)
    return OracleResult(status="optimal", value=best_val, point=best_pair,
                        bilevel_feasible_points=feasible_pts)


def write_instance(inst: Instance, path):
    with open(path, "w") as fh:
        json.dump(inst.to_json_dict(), fh)
        fh.write("\n")


def read_instance(path) -> Instance:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceFormatError(
                f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: "
                f"{exc.msg}") from exc
    try:
        return instance_from_json_dict(doc)
    except InstanceFormatError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc
