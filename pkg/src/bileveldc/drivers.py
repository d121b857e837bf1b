"""Top-level solution methods: branch-and-cut and the binary cutting plane.

Branch-and-cut runs the generic tree engine on the high-point relaxation
and separates disjunctive cuts at integer node solutions (settings I-O and
I-G) and optionally at fractional ones as well (IF-O, IF-G).  Cuts found at
the root are globally valid, all others are node-local.  The cutting-plane
method (CP-O, CP-G) repeatedly solves the relaxation to integer optimality
and cuts the optimum until it is bilevel feasible; it requires an all-binary
instance.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .bnb import BBLimits, Callbacks, is_duplicate_cut, solve_bb
from .cuts import EPS_VIOLATION, cglp_description, separate
from .model import Instance, Point, build_hpr, validate_instance

SETTING_NAMES = ("I-O", "IF-O", "I-G", "IF-G", "CP-O", "CP-G")


class SeparationMissError(RuntimeError):
    """An integer bilevel-infeasible vertex admitted no significantly
    violated cut; this contradicts the separation guarantee and is never
    silently accepted."""


class DataError(RuntimeError):
    """Instance data violates a precondition (e.g. follower infeasible for
    an integer leader decision inside the relaxation)."""


@dataclass
class SolverSettings:
    method: str = "bnc"                  # bnc | cutting_plane
    separate_fractional: bool = False    # I vs IF
    strategy: str = "O"                  # O | G
    eps: float = EPS_VIOLATION
    time_limit_seconds: float = 600.0
    seed: int | None = None

    @staticmethod
    def from_name(name: str, **overrides) -> "SolverSettings":
        if name not in SETTING_NAMES:
            raise ValueError(f"unknown setting {name!r}; pick one of {SETTING_NAMES}")
        base, strategy = name.rsplit("-", 1)
        return SolverSettings(
            method="cutting_plane" if base == "CP" else "bnc",
            separate_fractional=(base == "IF"),
            strategy=strategy,
            **overrides,
        )

    @property
    def name(self) -> str:
        if self.method == "cutting_plane":
            return f"CP-{self.strategy}"
        return f"{'IF' if self.separate_fractional else 'I'}-{self.strategy}"


@dataclass
class SolveReport:
    status: str
    x: np.ndarray | None
    y: np.ndarray | None
    value: float | None
    lower_bound: float
    t: float
    Gap: float
    RGap: float
    Nodes: int
    nICut: int
    nFCut: int
    tF: float
    tS: float
    cp_iterations: int | None = None
    audit: dict = field(default_factory=dict)

    def to_json_dict(self):
        doc = {
            "status": self.status,
            "value": self.value,
            "x": None if self.x is None else self.x.tolist(),
            "y": None if self.y is None else self.y.tolist(),
            "t": self.t, "Gap": self.Gap, "RGap": self.RGap,
            "Nodes": self.Nodes, "nICut": self.nICut, "nFCut": self.nFCut,
            "tF": self.tF, "tS": self.tS,
        }
        if self.cp_iterations is not None:
            doc["cp_iterations"] = self.cp_iterations
        return doc

    def to_json(self):
        return json.dumps(self.to_json_dict())


def compute_gaps(z_star, lb, z_root=None, lb_root=None):
    """Optimality and root gaps per the 100 (z* - LB) / z* convention.

    With no incumbent the gap is 100 by convention; |z*| is used in the
    denominator for negative optima and 0/0 counts as closed.
    """
    if z_star is None or not np.isfinite(z_star):
        return 100.0, 100.0
    z_root = z_star if z_root is None else z_root
    lb_root = lb if lb_root is None else lb_root
    den = abs(z_star)

    def one(upper, lower):
        if not np.isfinite(lower):
            return 100.0
        if den == 0.0:
            return 0.0 if abs(upper - lower) <= 1e-9 else 100.0
        return float(np.clip(100.0 * (upper - lower) / den, 0.0, 100.0))

    return one(z_star, lb), one(z_root, lb_root)


def solve(inst: Instance, settings: SolverSettings) -> SolveReport:
    """Validate and dispatch to the configured method."""
    problems = validate_instance(inst)
    if problems:
        raise DataError("invalid instance: " + "; ".join(problems))
    if settings.method == "cutting_plane":
        return solve_cutting_plane(inst, settings)
    return solve_branch_and_cut(inst, settings)


def solve_branch_and_cut(inst: Instance, settings: SolverSettings) -> SolveReport:
    relax = build_hpr(inst)
    t0 = time.perf_counter()
    stats = {"nICut": 0, "nFCut": 0, "tF": 0.0, "tS": 0.0,
             "cuts": [], "theorem1_checks": 0}

    def on_integer(point: Point, node):
        desc = cglp_description(relax, point, node.lb, node.ub, node.local_cuts)
        out = separate(inst, point, desc, strategy=settings.strategy,
                       eps=settings.eps, origin="integer")
        stats["tF"] += out.t_follower
        stats["tS"] += out.t_cgsocp
        if out.cut is not None:
            stats["nICut"] += 1
            stats["cuts"].append(out.cut)
            stats["theorem1_checks"] += 1
            return [out.cut]
        if out.follower_status == "optimal":
            raise SeparationMissError(
                f"no cut with violation > {settings.eps} at the integer "
                f"bilevel-infeasible vertex x={point.x}, y={point.y}")
        if out.follower_status == "infeasible":
            raise DataError(
                "follower infeasible for an integer leader decision that is "
                "feasible in the relaxation")
        return None    # no better follower response: bilevel feasible

    def on_fractional(point: Point, node):
        desc = cglp_description(relax, point, node.lb, node.ub, node.local_cuts)
        out = separate(inst, point, desc, strategy=settings.strategy,
                       eps=settings.eps, origin="fractional")
        stats["tF"] += out.t_follower
        stats["tS"] += out.t_cgsocp
        if out.cut is not None:
            stats["nFCut"] += 1
            stats["cuts"].append(out.cut)
            return [out.cut]
        return None

    callbacks = Callbacks(
        on_integer_solution=on_integer,
        on_fractional_solution=on_fractional if settings.separate_fractional else None,
    )
    bb = solve_bb(relax, callbacks,
                  BBLimits(time_limit=settings.time_limit_seconds))
    elapsed = time.perf_counter() - t0
    gap, rgap = compute_gaps(bb.value, bb.bound, bb.root_value, bb.root_bound)
    point = Point.from_v(bb.v, inst.n1) if bb.v is not None else None
    return SolveReport(
        status=bb.status,
        x=point.x if point else None, y=point.y if point else None,
        value=bb.value, lower_bound=bb.bound, t=elapsed,
        Gap=gap, RGap=rgap, Nodes=bb.nodes,
        nICut=stats["nICut"], nFCut=stats["nFCut"],
        tF=stats["tF"], tS=stats["tS"],
        audit={"cuts": stats["cuts"],
               "theorem1_checks": stats["theorem1_checks"],
               "global_cuts": list(relax.global_cuts)},
    )


def solve_cutting_plane(inst: Instance, settings: SolverSettings) -> SolveReport:
    if not inst.is_binary():
        raise DataError("the cutting-plane method requires an all-binary instance")
    relax = build_hpr(inst)
    t0 = time.perf_counter()
    stats = {"nICut": 0, "tF": 0.0, "tS": 0.0, "cuts": [],
             "theorem1_checks": 0}
    cp_values = []
    nodes_total = 0
    incumbent = None
    status = "optimal"
    lb = -np.inf

    while True:
        remaining = settings.time_limit_seconds - (time.perf_counter() - t0)
        if remaining <= 0:
            status = "time_limit"
            break
        bb = solve_bb(relax, None, BBLimits(time_limit=remaining))
        nodes_total += bb.nodes
        if bb.status == "time_limit":
            status = "time_limit"
            lb = max(lb, bb.bound)
            break
        if bb.status == "infeasible":
            status = "infeasible"
            break
        cp_values.append(bb.value)
        lb = max(lb, bb.value) if np.isfinite(lb) else bb.value
        point = Point.from_v(bb.v, inst.n1)
        desc = cglp_description(relax, point)      # root scope: cuts are global
        out = separate(inst, point, desc, strategy=settings.strategy,
                       eps=settings.eps, origin="integer")
        stats["tF"] += out.t_follower
        stats["tS"] += out.t_cgsocp
        if out.cut is None:
            if out.follower_status == "optimal":
                raise SeparationMissError(
                    f"no cut with violation > {settings.eps} at the "
                    f"cutting-plane iterate x={point.x}, y={point.y}")
            if out.follower_status == "infeasible":
                raise DataError(
                    "follower infeasible for an integer leader decision that "
                    "is feasible in the relaxation")
            incumbent = point
            break
        stats["nICut"] += 1
        stats["cuts"].append(out.cut)
        stats["theorem1_checks"] += 1
        if is_duplicate_cut(out.cut, relax.global_cuts):
            raise SeparationMissError("cutting plane produced a duplicate cut")
        relax.global_cuts.append(out.cut)

    elapsed = time.perf_counter() - t0
    value = cp_values[-1] if incumbent is not None else None
    final_lb = value if incumbent is not None else lb
    z_root = value
    lb_root = cp_values[0] if cp_values else final_lb
    gap, rgap = compute_gaps(value, final_lb, z_root, lb_root)
    return SolveReport(
        status=status if incumbent is not None or status != "optimal" else "optimal",
        x=incumbent.x if incumbent else None,
        y=incumbent.y if incumbent else None,
        value=value, lower_bound=final_lb, t=elapsed,
        Gap=gap, RGap=rgap, Nodes=nodes_total,
        nICut=stats["nICut"], nFCut=0,
        tF=stats["tF"], tS=stats["tS"],
        cp_iterations=len(cp_values),
        audit={"cuts": stats["cuts"], "cp_values": cp_values,
               "theorem1_checks": stats["theorem1_checks"],
               "global_cuts": list(relax.global_cuts)},
    )
