"""Branch-and-bound for mixed 0-1 linear programs on top of the dense simplex.

Branching picks the most fractional binary (ties to the lowest index),
the search is depth-first with a best-bound node pulled every 64 nodes,
and the nearer rounding of the branching variable is explored first.
All tie-breaking is by index, so repeated solves are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .lp import MAX, MIN, LpProblem, LpSolution, LpStatus, LpTolerances, solve_lp


class MilpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node_limit"


class MilpError(Exception):
    pass


_BEST_BOUND_EVERY = 64


@dataclass(frozen=True, eq=False)
class MilpProblem:
    lp: LpProblem
    binary_indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(j) for j in self.binary_indices)
        n = self.lp.num_cols
        for j in idx:
            if not 0 <= j < n:
                raise MilpError(f"binary index {j} out of range for {n} variables")
            if self.lp.lower[j] < -1e-9 or self.lp.upper[j] > 1.0 + 1e-9:
                raise MilpError(f"binary variable {j} must have bounds within [0, 1]")
        if len(set(idx)) != len(idx):
            raise MilpError("duplicate binary indices")
        object.__setattr__(self, "binary_indices", idx)


@dataclass
class MilpSolution:
    status: MilpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    best_bound: float | None = None
    node_count: int = 0
    gap: float = float("inf")
    duals: np.ndarray | None = None
    fixed_lp: LpSolution | None = None
    bound_history: list[tuple[int, float]] = field(default_factory=list)


def _with_bounds(lp: LpProblem, lower, upper) -> LpProblem:
    return LpProblem(lp.sense, lp.cost, lp.a, lp.row_senses, lp.rhs, lower, upper)


def _relative_gap(obj, bound):
    if obj is None or bound is None:
        return float("inf")
    return abs(obj - bound) / max(1.0, abs(obj))


def solve_milp(
    problem: MilpProblem,
    gap: float = 0.0,
    node_limit: int = 200_000,
    tol: LpTolerances | None = None,
    int_tol: float = 1e-6,
    want_duals: bool = True,
) -> MilpSolution:
    """Solve to the requested relative gap; optimal solves also return the
    duals of the LP with binaries fixed to the incumbent."""
    tol = tol or LpTolerances()
    lp0 = problem.lp
    binaries = problem.binary_indices
    sgn = 1.0 if lp0.sense == MIN else -1.0  # work with min-sense values internally

    if not binaries:
        sol = solve_lp(lp0, tol)
        if sol.status == LpStatus.OPTIMAL:
            return MilpSolution(
                MilpStatus.OPTIMAL, sol.x, sol.objective, sol.objective, 1, 0.0,
                duals=sol.duals, fixed_lp=sol,
            )
        status = MilpStatus.INFEASIBLE if sol.status == LpStatus.INFEASIBLE else MilpStatus.UNBOUNDED
        return MilpSolution(status, node_count=1)

    incumbent_val = None  # min-sense
    incumbent_x = None
    # nodes: (node_id, bound_min, lower, upper); bound is the parent LP value
    nodes = [(0, -np.inf, lp0.lower.copy(), lp0.upper.copy())]
    next_id = 1
    processed = 0
    history: list[tuple[int, float]] = []

    def global_bound():
        vals = [b for _, b, _, _ in nodes]
        if incumbent_val is not None:
            vals.append(incumbent_val)
        return min(vals) if vals else incumbent_val

    while nodes:
        if processed >= node_limit:
            break
        if processed and processed % _BEST_BOUND_EVERY == 0:
            pick = min(range(len(nodes)), key=lambda i: (nodes[i][1], nodes[i][0]))
        else:
            pick = len(nodes) - 1
        node_id, node_bound, lo, hi = nodes.pop(pick)
        processed += 1

        if incumbent_val is not None and node_bound >= incumbent_val - max(
            1e-9, gap * max(1.0, abs(incumbent_val))
        ):
            continue

        sol = solve_lp(_with_bounds(lp0, lo, hi), tol)
        if sol.status == LpStatus.INFEASIBLE:
            continue
        if sol.status == LpStatus.UNBOUNDED:
            # only reachable at the root: children are restrictions of it
            return MilpSolution(MilpStatus.UNBOUNDED, node_count=processed)
        val = sgn * sol.objective
        if incumbent_val is not None and val >= incumbent_val - max(
            1e-9, gap * max(1.0, abs(incumbent_val))
        ):
            continue

        frac = np.array([min(sol.x[j] - np.floor(sol.x[j]), np.ceil(sol.x[j]) - sol.x[j]) for j in binaries])
        fractional = [k for k, f in enumerate(frac) if f > int_tol]
        if not fractional:
            x = sol.x.copy()
            for j in binaries:
                x[j] = round(x[j])
            if incumbent_val is None or val < incumbent_val - 1e-12:
                incumbent_val = val
                incumbent_x = x
            gb = global_bound()
            history.append((processed, sgn * gb if gb is not None else np.nan))
            continue

        k = max(fractional, key=lambda i: (frac[i], -i))
        j = binaries[k]
        lo_up, hi_up = lo.copy(), hi.copy()
        lo_up[j] = 1.0
        lo_dn, hi_dn = lo.copy(), hi.copy()
        hi_dn[j] = 0.0
        first_up = sol.x[j] >= 0.5
        children = [
            (next_id, val, lo_up, hi_up),
            (next_id + 1, val, lo_dn, hi_dn),
        ]
        next_id += 2
        if first_up:
            children.reverse()  # LIFO pop explores the nearest rounding first
        nodes.extend(children)
        gb = global_bound()
        history.append((processed, sgn * gb if gb is not None else np.nan))

    bound = global_bound()
    hit_limit = bool(nodes) and processed >= node_limit
    if incumbent_val is None:
        if hit_limit:
            return MilpSolution(MilpStatus.NODE_LIMIT, node_count=processed, bound_history=history)
        return MilpSolution(MilpStatus.INFEASIBLE, node_count=processed, bound_history=history)

    obj = sgn * incumbent_val
    bound_back = sgn * bound
    rel = _relative_gap(obj, bound_back)
    status = MilpStatus.NODE_LIMIT if (hit_limit and rel > gap + 1e-12) else MilpStatus.OPTIMAL

    result = MilpSolution(
        status, incumbent_x, obj, bound_back, processed, rel, bound_history=history
    )
    if want_duals and status == MilpStatus.OPTIMAL:
        lo = lp0.lower.copy()
        hi = lp0.upper.copy()
        for j in binaries:
            lo[j] = hi[j] = incumbent_x[j]
        fixed = solve_lp(_with_bounds(lp0, lo, hi), tol)
        if fixed.status == LpStatus.OPTIMAL:
            result.duals = fixed.duals
            result.fixed_lp = fixed
            result.x = fixed.x  # optimal continuous completion consistent with the duals
            for j in binaries:
                result.x[j] = incumbent_x[j]
    return result
