"""Outer loop: master problem, feasibility phase, optimality phase, pool growth.

Per iteration the master yields a lower bound and a candidate first
stage. The worst-case expected infeasibility of that candidate is
computed first; only when it is (numerically) zero does the optimality
oracle run and the upper bound move. Pools grow by the screened supports
of the oracle outputs while the oracles warm-start from the full column
pools, so bounds are monotone and the incumbent is always almost surely
feasible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .build import LinearModel
from .lp import MIN
from .milp import MilpStatus, solve_milp
from .master import (
    DUAL_SINGLE_LEVEL,
    OPT_ONLY,
    MasterModel,
    ScenarioPools,
    build_master,
    solve_master,
)
from .model import (
    MixedIntegerMomentAmbiguity,
    MomentAmbiguity,
    Scenario,
    Tolerances,
    TwoStageProblem,
    WassersteinAmbiguity,
    dedup_add,
)
from .pricing import FEASIBILITY, OPTIMALITY, default_pricer, psp_solve, psp_wasserstein_solve
from .wcev import PmpInfeasibleError, QCache, WcevResult, oracle1_bruteforce, oracle2_cg

ORACLE_CG = "cg"
ORACLE_BRUTEFORCE = "bruteforce"

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_ITERATION_LIMIT = "iteration_limit"
STATUS_TIME_LIMIT = "time_limit"


class CcgError(Exception):
    pass


class RequiresFeasibleRecourseError(CcgError):
    pass


class OracleFailureError(CcgError):
    pass


@dataclass
class IterationRecord:
    t: int
    lb: float
    ub: float
    gap: float
    eta_f: float
    eta_o: float
    pool_o: int
    pool_f: int
    cuts: int
    wall_ms: float


@dataclass
class SolveState:
    lb: float = -np.inf
    ub: float = np.inf
    t: int = 0
    pools: ScenarioPools = field(default_factory=ScenarioPools)
    incumbent_x: np.ndarray | None = None
    trace: list[IterationRecord] = field(default_factory=list)
    generated: list[Scenario] = field(default_factory=list)  # pricing output only

    def gap(self) -> float:
        if not np.isfinite(self.ub) or not np.isfinite(self.lb):
            return np.inf
        return max(self.ub - self.lb, 0.0) / max(1.0, abs(self.ub))


@dataclass
class CcgResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    lb: float
    ub: float
    state: SolveState
    iterations: int


@dataclass
class CcgOptions:
    variant: str = DUAL_SINGLE_LEVEL
    pool_policy: str = OPT_ONLY
    warm_start: bool = True
    max_iterations: int = 200
    time_limit: float | None = None
    eta_lb: float = 0.0
    pricer: object = None
    record_wall: bool = False  # keep traces bit-stable unless timing is requested


def _tol_met(state: SolveState, tol: Tolerances) -> bool:
    budget = max(tol.outer_tol, tol.outer_rel * max(1.0, abs(state.ub)))
    return state.ub - state.lb <= budget


def _fresh_feasible_x(problem: TwoStageProblem, visited: list[np.ndarray],
                      tol: Tolerances) -> np.ndarray | None:
    """min f1 over X minus already-visited binary patterns (no-good cuts)."""
    fs = problem.first_stage
    model = LinearModel(MIN)
    x = [model.add_var(fs.lower[j], fs.upper[j], fs.cost[j],
                       binary=j in set(fs.binary_indices)) for j in range(fs.num_vars)]
    for i in range(fs.a.shape[0]):
        model.add_row({x[j]: fs.a[i, j] for j in range(fs.num_vars) if fs.a[i, j] != 0.0},
                      fs.row_senses[i], float(fs.rhs[i]))
    for xv in visited:
        row = {}
        rhs = 1.0
        for j in fs.binary_indices:
            if xv[j] > 0.5:
                row[x[j]] = -1.0
                rhs -= 1.0
            else:
                row[x[j]] = 1.0
        model.add_row(row, ">=", rhs)
    sol = solve_milp(model.build_milp(), tol=tol.lp(), int_tol=tol.int_tol, want_duals=False)
    if sol.status != MilpStatus.OPTIMAL:
        return None
    return np.array([sol.x[j] for j in x])


def _first_stage_cost(problem: TwoStageProblem, x: np.ndarray) -> float:
    return float(problem.first_stage.cost @ x)


def _run_wcev(problem, x, target, tol, oracle, options, pool_init):
    """Dispatch one worst-case expectation solve to the chosen oracle."""
    amb = problem.ambiguity
    if oracle == ORACLE_CG:
        pricer = options.pricer or default_pricer()
        try:
            return oracle2_cg(problem, x, target, pool_init=pool_init, tol=tol, pricer=pricer)
        except PmpInfeasibleError:
            # warm pool cannot support any distribution under this x: restart
            # from scratch (feasibility supports seed the optimality pool)
            return oracle2_cg(problem, x, target, pool_init=None, tol=tol, pricer=pricer)
    if oracle != ORACLE_BRUTEFORCE:
        raise OracleFailureError(f"unknown oracle {oracle!r}")
    q = QCache(problem, x, target, tol)
    if isinstance(amb, MomentAmbiguity):
        return oracle1_bruteforce(q, amb, problem.space, tol=tol)
    if isinstance(amb, MixedIntegerMomentAmbiguity):
        best = None
        for z in amb.enumerate_z():
            res = oracle1_bruteforce(q, amb.moment_for_z(z), problem.space, tol=tol)
            if best is None or res.value > best.value + 1e-12:
                best = res
                best.z_star = z
        return best
    raise OracleFailureError("the brute-force oracle handles moment-type ambiguity sets only")


def _update_pools_after_feasibility(state: SolveState, problem, res: WcevResult, tol):
    pools = state.pools
    if isinstance(problem.ambiguity, WassersteinAmbiguity):
        n = problem.ambiguity.num_samples
        if pools.per_sample_feasibility is None:
            pools.per_sample_feasibility = [[] for _ in range(n)]
            pools.warm_per_sample_feasibility = [[] for _ in range(n)]
        for i in range(n):
            for s in res.per_sample_dists[i].scenarios:
                dedup_add(pools.per_sample_feasibility[i], s, tol.dedup_tol)
            for s in res.per_sample_pools[i]:
                dedup_add(pools.warm_per_sample_feasibility[i], s, tol.dedup_tol)
    for s in res.distribution.scenarios:
        dedup_add(pools.feasibility, s, tol.dedup_tol)
    for s in res.pool:
        dedup_add(pools.warm_feasibility, s, tol.dedup_tol)
    state.generated.extend(res.generated)
    if res.z_star is not None:
        pools.add_z(res.z_star, "feasibility")


def _update_pools_after_optimality(state: SolveState, problem, res: WcevResult, tol):
    pools = state.pools
    if isinstance(problem.ambiguity, WassersteinAmbiguity):
        n = problem.ambiguity.num_samples
        if pools.per_sample_optimality is None:
            pools.per_sample_optimality = [[] for _ in range(n)]
            pools.warm_per_sample_optimality = [[] for _ in range(n)]
        for i in range(n):
            for s in res.per_sample_dists[i].scenarios:
                dedup_add(pools.per_sample_optimality[i], s, tol.dedup_tol)
            for s in res.per_sample_pools[i]:
                dedup_add(pools.warm_per_sample_optimality[i], s, tol.dedup_tol)
    for s in res.distribution.scenarios:
        dedup_add(pools.optimality, s, tol.dedup_tol)
    for s in res.pool:
        dedup_add(pools.warm_optimality, s, tol.dedup_tol)
    state.generated.extend(res.generated)
    if res.z_star is not None:
        pools.add_z(res.z_star, "optimality")


def _warm_init(state: SolveState, problem, target, options):
    if not options.warm_start:
        return None
    pools = state.pools
    if isinstance(problem.ambiguity, WassersteinAmbiguity):
        warm = (pools.warm_per_sample_optimality if target == OPTIMALITY
                else pools.warm_per_sample_feasibility)
        return [list(pl) for pl in warm] if warm else None
    warm = pools.warm_optimality if target == OPTIMALITY else pools.warm_feasibility
    return list(warm) if warm else None


def solve_ccg_dro(problem: TwoStageProblem, tol: Tolerances | None = None,
                  oracle: str = ORACLE_CG, options: CcgOptions | None = None) -> CcgResult:
    """Full two-stage solve; the returned incumbent is almost surely feasible.

    Status is ``infeasible`` when the master runs out of first-stage
    candidates (every x has a positive worst-case expected infeasibility),
    and ``iteration_limit`` / ``time_limit`` return the best bounds found.
    """
    tol = tol or Tolerances()
    options = options or CcgOptions()
    state = SolveState()
    started = time.perf_counter()
    visited: list[np.ndarray] = []
    feas_scale = 1.0 + float(np.abs(problem.recourse.b2).max(initial=0.0))
    feas_eps = tol.feas_eps * feas_scale

    status = STATUS_ITERATION_LIMIT
    for it in range(1, options.max_iterations + 1):
        state.t = it
        iter_start = time.perf_counter()
        master = build_master(problem, state.pools, options.variant, options.pool_policy,
                              options.eta_lb, tol)
        msol = solve_master(master, tol)
        if msol.status == MilpStatus.INFEASIBLE:
            status = STATUS_INFEASIBLE
            break
        if msol.status == MilpStatus.UNBOUNDED:
            x_star = _fresh_feasible_x(problem, visited, tol)
            if x_star is None:
                status = STATUS_INFEASIBLE
                break
        elif msol.status == MilpStatus.OPTIMAL:
            state.lb = max(state.lb, msol.objective)
            x_star = msol.x
        else:
            raise CcgError(f"master ended with status {msol.status}")
        visited.append(x_star)

        if problem.recourse_always_feasible:
            eta_f = 0.0
        else:
            fres = _run_wcev(problem, x_star, FEASIBILITY, tol, oracle, options,
                             _warm_init(state, problem, FEASIBILITY, options))
            eta_f = fres.value
        if eta_f <= feas_eps:
            try:
                ores = _run_wcev(problem, x_star, OPTIMALITY, tol, oracle, options,
                                 _warm_init(state, problem, OPTIMALITY, options))
            except PmpInfeasibleError as exc:
                raise OracleFailureError(f"optimality oracle failed: {exc}") from exc
            eta_o = ores.value + max(ores.v_star, 0.0)  # rigorous upper side
            _update_pools_after_optimality(state, problem, ores, tol)
            ub_cand = _first_stage_cost(problem, x_star) + eta_o
            if ub_cand < state.ub - 1e-9:
                state.ub = ub_cand
                state.incumbent_x = x_star.copy()
        else:
            _update_pools_after_feasibility(state, problem, fres, tol)
            eta_o = np.inf

        wall = (time.perf_counter() - iter_start) * 1000.0 if options.record_wall else 0.0
        state.trace.append(IterationRecord(
            t=it, lb=state.lb, ub=state.ub, gap=state.gap(), eta_f=eta_f,
            eta_o=eta_o if np.isfinite(eta_o) else np.inf,
            pool_o=len(state.pools.optimality), pool_f=len(state.pools.feasibility),
            cuts=0, wall_ms=wall,
        ))
        if _tol_met(state, tol):
            status = STATUS_OPTIMAL
            break
        if options.time_limit is not None and time.perf_counter() - started > options.time_limit:
            status = STATUS_TIME_LIMIT
            break

    objective = state.ub if np.isfinite(state.ub) else None
    return CcgResult(status, state.incumbent_x, objective, state.lb, state.ub, state,
                     iterations=state.t)


def _master_beta_values(master: MasterModel, msol) -> np.ndarray | float | None:
    if master.beta_o is None or msol.milp is None or msol.milp.x is None:
        return None
    if isinstance(master.beta_o, list):
        return np.array([msol.milp.x[j] for j in master.beta_o])
    return float(msol.milp.x[master.beta_o])


def solve_basic_ccg(problem: TwoStageProblem, tol: Tolerances | None = None,
                    options: CcgOptions | None = None) -> CcgResult:
    """Classical column-and-constraint generation: one worst-case scenario per
    iteration (one per empirical sample for Wasserstein sets), priced with the
    master's own dual multipliers. Requires feasible recourse everywhere."""
    tol = tol or Tolerances()
    options = options or CcgOptions()
    if not problem.recourse_always_feasible:
        raise RequiresFeasibleRecourseError(
            "basic C&CG has no feasibility phase; use solve_ccg_dro for capacitated models"
        )
    amb = problem.ambiguity
    if not isinstance(amb, (MomentAmbiguity, WassersteinAmbiguity)):
        raise CcgError("basic C&CG supports moment and Wasserstein ambiguity sets")

    state = SolveState()
    started = time.perf_counter()
    status = STATUS_ITERATION_LIMIT
    for it in range(1, options.max_iterations + 1):
        state.t = it
        iter_start = time.perf_counter()
        master = build_master(problem, state.pools, options.variant, options.pool_policy,
                              options.eta_lb, tol)
        msol = solve_master(master, tol)
        if msol.status == MilpStatus.INFEASIBLE:
            status = STATUS_INFEASIBLE
            break
        if msol.status != MilpStatus.OPTIMAL:
            raise CcgError(f"master ended with status {msol.status}")
        state.lb = max(state.lb, msol.objective)
        x_star = msol.x
        f1 = _first_stage_cost(problem, x_star)

        if isinstance(amb, MomentAmbiguity):
            beta = _master_beta_values(master, msol)
            if beta is None:
                beta = np.zeros(amb.num_rows)
            res = psp_solve(problem, x_star, OPTIMALITY, (0.0, beta), problem.space, amb, tol)
            ub_cand = f1 + res.v_star + float(amb.gamma @ beta)
            new_scenarios = [res.scenario]
        else:
            beta = _master_beta_values(master, msol)
            beta = 0.0 if beta is None else float(beta)
            n = amb.num_samples
            if state.pools.per_sample_optimality is None:
                state.pools.per_sample_optimality = [[] for _ in range(n)]
            alphas = np.zeros(n)
            total = 0.0
            new_scenarios = []
            for i in range(n):
                r = psp_wasserstein_solve(problem, x_star, OPTIMALITY, (alphas, beta), i,
                                          problem.space, amb, tol)
                total += r.v_star
                new_scenarios.append((i, r.scenario))
            ub_cand = f1 + total + amb.radius * beta

        if ub_cand < state.ub - 1e-9:
            state.ub = ub_cand
            state.incumbent_x = x_star.copy()

        if isinstance(amb, MomentAmbiguity):
            for s in new_scenarios:
                dedup_add(state.pools.optimality, s, tol.dedup_tol)
        else:
            for i, s in new_scenarios:
                dedup_add(state.pools.per_sample_optimality[i], s, tol.dedup_tol)
                dedup_add(state.pools.optimality, s, tol.dedup_tol)

        wall = (time.perf_counter() - iter_start) * 1000.0 if options.record_wall else 0.0
        state.trace.append(IterationRecord(
            t=it, lb=state.lb, ub=state.ub, gap=state.gap(), eta_f=0.0,
            eta_o=state.ub - f1 if np.isfinite(state.ub) else np.inf,
            pool_o=len(state.pools.optimality), pool_f=0, cuts=0, wall_ms=wall,
        ))
        if _tol_met(state, tol):
            status = STATUS_OPTIMAL
            break
        if options.time_limit is not None and time.perf_counter() - started > options.time_limit:
            status = STATUS_TIME_LIMIT
            break

    objective = state.ub if np.isfinite(state.ub) else None
    return CcgResult(status, state.incumbent_x, objective, state.lb, state.ub, state,
                     iterations=state.t)
