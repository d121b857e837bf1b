"""Data model for integer bilevel programs with a second-order-cone upper
level and a convex-quadratic integer lower level.

An :class:`Instance` bundles the leader data (linear objective, linear rows,
Lorentz rows), the single linking row a'x + b'y >= f, and the follower data
(quadratic objective, extra polyhedron rows, bounds).  The follower objective
is q(y) = ||V y||^2 + g'y; the Gram factor V is stored instead of R = V'V so
the quadratic form stays positive semidefinite by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL_FEAS = 1e-7   # constraint and value-function feasibility
TOL_INT = 1e-6    # integrality

INSTANCE_FIELDS = (
    "n1", "n2", "c", "d", "M", "N", "h", "Mt", "Nt", "ht", "cones_K",
    "a", "b", "f", "V", "g", "Y_C", "Y_u", "lb", "ub",
)


def _freeze(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Instance:
    """All problem data of one bilevel instance.

    Shapes: c (n1,), d (n2,), M (m1, n1), N (m1, n2), h (m1,), Mt (mt, n1),
    Nt (mt, n2), ht (mt,), a (n1,), b (n2,), V (n3, n2), g (n2,),
    Y_C (p, n2), Y_u (p,), lb/ub (n1+n2,).  cones_K partitions the mt
    Lorentz rows into blocks.
    """

    n1: int
    n2: int
    c: np.ndarray
    d: np.ndarray
    M: np.ndarray
    N: np.ndarray
    h: np.ndarray
    Mt: np.ndarray
    Nt: np.ndarray
    ht: np.ndarray
    cones_K: tuple
    a: np.ndarray
    b: np.ndarray
    f: int
    V: np.ndarray
    g: np.ndarray
    Y_C: np.ndarray
    Y_u: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        for name in ("c", "d", "M", "N", "h", "Mt", "Nt", "ht", "V", "g",
                     "Y_C", "Y_u"):
            object.__setattr__(self, name,
                               _freeze(np.asarray(getattr(self, name), dtype=float)))
        for name in ("a", "b", "lb", "ub"):
            object.__setattr__(self, name,
                               _freeze(np.asarray(getattr(self, name), dtype=np.int64)))
        object.__setattr__(self, "cones_K", tuple(int(k) for k in self.cones_K))
        object.__setattr__(self, "f", int(self.f))

    @property
    def n(self):
        return self.n1 + self.n2

    @property
    def m1(self):
        return self.M.shape[0]

    @property
    def mt(self):
        return self.Mt.shape[0]

    def is_binary(self):
        return bool(np.all(self.lb == 0) and np.all(self.ub == 1))

    def to_json_dict(self):
        """Serialize to the dense row-major JSON schema."""
        return {
            "n1": self.n1, "n2": self.n2,
            "c": self.c.tolist(), "d": self.d.tolist(),
            "M": self.M.tolist(), "N": self.N.tolist(), "h": self.h.tolist(),
            "Mt": self.Mt.tolist(), "Nt": self.Nt.tolist(), "ht": self.ht.tolist(),
            "cones_K": list(self.cones_K),
            "a": self.a.tolist(), "b": self.b.tolist(), "f": self.f,
            "V": self.V.tolist(), "g": self.g.tolist(),
            "Y_C": self.Y_C.tolist(), "Y_u": self.Y_u.tolist(),
            "lb": self.lb.tolist(), "ub": self.ub.tolist(),
        }


class InstanceFormatError(ValueError):
    """Raised when an instance document violates the JSON schema."""


def _require(cond, msg):
    if not cond:
        raise InstanceFormatError(msg)


def instance_from_json_dict(doc):
    """Build an :class:`Instance` from a parsed JSON document.

    Unknown fields are rejected, missing fields are reported by name, and
    integer-typed fields (a, b, f, lb, ub) must hold integers.
    """
    _require(isinstance(doc, dict), "instance document must be a JSON object")
    unknown = set(doc) - set(INSTANCE_FIELDS)
    _require(not unknown, f"unknown field(s): {sorted(unknown)}")
    missing = [k for k in INSTANCE_FIELDS if k not in doc]
    _require(not missing, f"missing field(s): {missing}")

    n1, n2 = doc["n1"], doc["n2"]
    _require(isinstance(n1, int) and isinstance(n2, int) and n1 >= 0 and n2 >= 0,
             "n1 and n2 must be nonnegative integers")
    _require(isinstance(doc["f"], int), "field 'f' must be an integer")

    def vector(name, size, integral=False):
        val = doc[name]
        _require(isinstance(val, list) and len(val) == size,
                 f"field '{name}' must be a list of length {size}")
        for i, entry in enumerate(val):
            _require(isinstance(entry, (int, float)) and not isinstance(entry, bool),
                     f"field '{name}'[{i}] must be a number")
            if integral:
                _require(isinstance(entry, int) or float(entry).is_integer(),
                         f"field '{name}'[{i}] must be an integer")
        return np.asarray(val, dtype=np.int64 if integral else float)

    def matrix(name, rows, cols):
        val = doc[name]
        _require(isinstance(val, list), f"field '{name}' must be a list of rows")
        if rows is not None:
            _require(len(val) == rows, f"field '{name}' must have {rows} rows")
        out = []
        for i, row in enumerate(val):
            _require(isinstance(row, list) and len(row) == cols,
                     f"field '{name}' row {i} must be a list of length {cols}")
            for j, entry in enumerate(row):
                _require(isinstance(entry, (int, float)) and not isinstance(entry, bool),
                         f"field '{name}'[{i}][{j}] must be a number")
            out.append(row)
        return np.asarray(out, dtype=float).reshape(len(val), cols)

    M = matrix("M", None, n1)
    N = matrix("N", M.shape[0], n2)
    Mt = matrix("Mt", None, n1)
    Nt = matrix("Nt", Mt.shape[0], n2)
    cones = doc["cones_K"]
    _require(isinstance(cones, list) and all(isinstance(k, int) for k in cones),
             "field 'cones_K' must be a list of integers")
    V = matrix("V", None, n2)
    _require(V.shape[0] <= n2, "field 'V' must have at most n2 rows")
    Y_C = matrix("Y_C", None, n2)
    return Instance(
        n1=n1, n2=n2,
        c=vector("c", n1), d=vector("d", n2),
        M=M, N=N, h=vector("h", M.shape[0]),
        Mt=Mt, Nt=Nt, ht=vector("ht", Mt.shape[0]),
        cones_K=cones,
        a=vector("a", n1, integral=True), b=vector("b", n2, integral=True),
        f=doc["f"], V=V, g=vector("g", n2),
        Y_C=Y_C, Y_u=vector("Y_u", Y_C.shape[0]),
        lb=vector("lb", n1 + n2, integral=True),
        ub=vector("ub", n1 + n2, integral=True),
    )


@dataclass
class Point:
    """A candidate leader/follower pair."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)

    @property
    def v(self):
        return np.concatenate([self.x, self.y])

    @staticmethod
    def from_v(v, n1):
        v = np.asarray(v, dtype=float)
        return Point(v[:n1], v[n1:])


@dataclass
class FeasibilityVerdict:
    hpr_feasible: bool
    integral: bool
    follower_optimal: bool
    phi: float | None = None


def validate_instance(inst: Instance):
    """Return the list of violated structural invariants (empty iff admissible)."""
    report = []
    n1, n2 = inst.n1, inst.n2
    if inst.c.shape != (n1,) or inst.d.shape != (n2,):
        report.append("objective dimension mismatch")
    if inst.M.shape[1] != n1 or inst.N.shape[1] != n2 or \
            inst.M.shape[0] != inst.N.shape[0] or inst.h.shape != (inst.M.shape[0],):
        report.append("leader row dimension mismatch")
    if inst.Mt.shape[1] != n1 or inst.Nt.shape[1] != n2 or \
            inst.Mt.shape[0] != inst.Nt.shape[0] or inst.ht.shape != (inst.Mt.shape[0],):
        report.append("conic row dimension mismatch")
    if sum(inst.cones_K) != inst.mt or any(k < 1 for k in inst.cones_K):
        report.append("cone dimensions do not partition the conic rows")
    if inst.a.shape != (n1,) or inst.b.shape != (n2,):
        report.append("linking row dimension mismatch")
    elif not (np.any(inst.a != 0) or np.any(inst.b != 0)):
        report.append("zero linking row")
    if inst.V.shape[1] != n2 or inst.V.shape[0] > n2:
        report.append("quadratic factor dimension mismatch (need n3 <= n2)")
    if inst.g.shape != (n2,):
        report.append("linear follower cost dimension mismatch")
    if inst.Y_C.shape[1] != n2 or inst.Y_u.shape != (inst.Y_C.shape[0],):
        report.append("follower polyhedron dimension mismatch")
    if inst.lb.shape != (n1 + n2,) or inst.ub.shape != (n1 + n2,):
        report.append("bound dimension mismatch")
    else:
        if not (np.all(np.isfinite(inst.lb)) and np.all(np.isfinite(inst.ub))):
            report.append("unbounded variable")
        if np.any(inst.lb > inst.ub):
            report.append("empty variable bound interval")
    return report


def evaluate_q(inst: Instance, y):
    """Follower objective q(y) = ||V y||^2 + g'y."""
    y = np.asarray(y, dtype=float)
    if y.shape != (inst.n2,):
        raise ValueError(f"y has shape {y.shape}, expected ({inst.n2},)")
    w = inst.V @ y
    return float(w @ w + inst.g @ y)


def linking_rhs(inst: Instance, x):
    """Right-hand side f - a'x of the follower's linking constraint."""
    return float(inst.f - inst.a @ np.asarray(x, dtype=float))


@dataclass
class PolyhedralRelaxation:
    """Mutable description of the set P kept during a solve.

    The bar system (leader rows, linking row, accumulated cuts, follower
    polyhedron rows, bound rows) is materialized on demand; conic rows are
    kept exactly and outer-approximated only inside the LP loop.  Cut pools
    live here (global) and on tree nodes (local).
    """

    n1: int
    n2: int
    obj: np.ndarray
    leader_A: np.ndarray
    leader_rhs: np.ndarray
    link_row: np.ndarray
    link_rhs: float
    y_A: np.ndarray
    y_rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    conic: list            # [(T, r)]: T v - r in a Lorentz cone of dim T.shape[0]
    integer_mask: np.ndarray
    global_cuts: list = field(default_factory=list)
    oa_rows: list = field(default_factory=list)   # [(row, rhs)] global OA cuts

    @property
    def n_vars(self):
        return self.n1 + self.n2

    @property
    def n_linear_rows(self):
        """Rows of the bar system with global bounds and no cuts."""
        return (self.leader_A.shape[0] + 1 + self.y_A.shape[0]
                + 2 * self.n_vars)

    def bound_rows(self, lb=None, ub=None):
        """Bound rows v_i >= lb_i and -v_i >= -ub_i as one >= system."""
        lb = self.lb if lb is None else lb
        ub = self.ub if ub is None else ub
        n = self.n_vars
        eye = np.eye(n)
        A = np.vstack([eye, -eye])
        rhs = np.concatenate([np.asarray(lb, dtype=float),
                              -np.asarray(ub, dtype=float)])
        return A, rhs

    def bar_system(self, cuts=(), lb=None, ub=None):
        """Stacked (Mbar, Nbar, hbar) in the order: leader rows, linking row,
        cuts, follower polyhedron rows, bound rows."""
        cut_A = np.array([np.concatenate([c.alpha, c.beta]) for c in cuts],
                         dtype=float).reshape(len(cuts), self.n_vars)
        cut_rhs = np.array([c.tau for c in cuts], dtype=float)
        bA, brhs = self.bound_rows(lb, ub)
        A = np.vstack([self.leader_A, self.link_row[None, :], cut_A, self.y_A, bA])
        rhs = np.concatenate([self.leader_rhs, [self.link_rhs], cut_rhs,
                              self.y_rhs, brhs])
        return A[:, :self.n1], A[:, self.n1:], rhs


def build_hpr(inst: Instance) -> PolyhedralRelaxation:
    """High-point relaxation: drop the value-function constraint, keep
    leader rows, the linking row, conic rows, follower polyhedron and bounds."""
    n1, n2 = inst.n1, inst.n2
    leader_A = np.hstack([inst.M, inst.N]) if inst.m1 else np.zeros((0, n1 + n2))
    link = np.concatenate([inst.a, inst.b]).astype(float)
    y_A = (np.hstack([np.zeros((inst.Y_C.shape[0], n1)), inst.Y_C])
           if inst.Y_C.shape[0] else np.zeros((0, n1 + n2)))
    conic = []
    offset = 0
    for k in inst.cones_K:
        T = np.hstack([inst.Mt[offset:offset + k], inst.Nt[offset:offset + k]])
        conic.append((T, inst.ht[offset:offset + k].copy()))
        offset += k
    return PolyhedralRelaxation(
        n1=n1, n2=n2,
        obj=np.concatenate([inst.c, inst.d]),
        leader_A=leader_A, leader_rhs=inst.h.copy(),
        link_row=link, link_rhs=float(inst.f),
        y_A=y_A, y_rhs=inst.Y_u.copy(),
        lb=inst.lb.astype(float), ub=inst.ub.astype(float),
        conic=conic,
        integer_mask=np.ones(n1 + n2, dtype=bool),
    )


def hpr_feasible(inst: Instance, point: Point, tol=TOL_FEAS):
    """Check leader rows, conic rows, linking row, polyhedron and bounds."""
    x, y = point.x, point.y
    v = point.v
    if np.any(v < inst.lb - tol) or np.any(v > inst.ub + tol):
        return False
    if inst.m1 and np.any(inst.M @ x + inst.N @ y < inst.h - tol):
        return False
    if inst.a @ x + inst.b @ y < inst.f - tol:
        return False
    if inst.Y_C.shape[0] and np.any(inst.Y_C @ y < inst.Y_u - tol):
        return False
    if inst.mt:
        z = inst.Mt @ x + inst.Nt @ y - inst.ht
        offset = 0
        for k in inst.cones_K:
            blk = z[offset:offset + k]
            if blk[0] < np.linalg.norm(blk[1:]) - tol:
                return False
            offset += k
    return True


def check_bilevel_feasible(inst: Instance, point: Point, phi,
                           tol_feas=TOL_FEAS, tol_int=TOL_INT):
    """Classify a point given the follower value phi = Phi(point.x)."""
    feas = hpr_feasible(inst, point, tol_feas)
    integral = bool(np.all(np.abs(point.v - np.round(point.v)) <= tol_int))
    follower_opt = (feas and integral
                    and evaluate_q(inst, point.y) <= phi + tol_feas)
    return FeasibilityVerdict(hpr_feasible=feas, integral=integral,
                              follower_optimal=follower_opt, phi=phi)
