"""Benders-dual baselines: recourse replicas replaced by accumulated dual cuts.

The master keeps the dual-side rows of the single-level form but ties each
pooled scenario's value variable to Benders cuts built from recourse-LP
duals instead of a full replica. The enhanced mode prices scenarios with
the worst-case-expectation oracles (adding one cut per support scenario
per iteration, plus feasibility cuts from the slack-LP duals); the basic
mode generates a single cut per iteration from the classical subproblem.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .build import LinearModel
from .lp import LE, GE, MIN
from .milp import MilpStatus, solve_milp
from .ccg import (
    CcgError,
    CcgOptions,
    CcgResult,
    IterationRecord,
    ORACLE_CG,
    RequiresFeasibleRecourseError,
    SolveState,
    STATUS_INFEASIBLE,
    STATUS_ITERATION_LIMIT,
    STATUS_OPTIMAL,
    STATUS_TIME_LIMIT,
    _first_stage_cost,
    _run_wcev,
    _tol_met,
    _warm_init,
)
from .model import (
    MomentAmbiguity,
    Scenario,
    Tolerances,
    TwoStageProblem,
    WassersteinAmbiguity,
    dedup_add,
    evaluate_feasibility_recourse,
    evaluate_recourse,
)
from .pricing import FEASIBILITY, OPTIMALITY, psp_solve, psp_wasserstein_solve

MODE_BASIC = "basic"
MODE_DRO = "dro"

OPTIMALITY_CUT = "optimality"
FEASIBILITY_CUT = "feasibility"


@dataclass(frozen=True)
class BendersCut:
    scenario: Scenario
    pi: tuple[float, ...]
    kind: str
    sample: int | None = None  # Wasserstein: which empirical sample the row binds to

    def key(self):
        return (self.kind, self.sample, tuple(np.round(self.scenario.array, 9)),
                tuple(np.round(self.pi, 9)))


def _check_cut(problem: TwoStageProblem, cut: BendersCut):
    rc = problem.recourse
    pi = np.array(cut.pi)
    if np.any(pi < -1e-6):
        raise CcgError("Benders cut with a negative dual multiplier")
    limit = np.zeros(rc.num_vars) if cut.kind == FEASIBILITY_CUT else rc.c2
    if np.any(rc.b_matrix.T @ pi > limit + 1e-6):
        raise CcgError("Benders cut dual is not feasible for the recourse dual polytope")
    if cut.kind == FEASIBILITY_CUT and np.any(pi > 1.0 + 1e-6):
        raise CcgError("feasibility-cut duals must lie in [0, 1]")


@dataclass
class _BendersPools:
    # (scenario, sample) keys with accumulated cuts
    opt_scenarios: list[tuple[Scenario, int | None]] = field(default_factory=list)
    feas_scenarios: list[tuple[Scenario, int | None]] = field(default_factory=list)
    cuts: list[BendersCut] = field(default_factory=list)
    seen: set = field(default_factory=set)

    def add_cut(self, problem, cut: BendersCut, dedup_tol: float) -> bool:
        if cut.key() in self.seen:
            return False
        _check_cut(problem, cut)
        self.seen.add(cut.key())
        self.cuts.append(cut)
        store = self.opt_scenarios if cut.kind == OPTIMALITY_CUT else self.feas_scenarios
        for s, i in store:
            if i == cut.sample and np.max(np.abs(s.array - cut.scenario.array), initial=0.0) <= dedup_tol:
                return True
        store.append((cut.scenario, cut.sample))
        return True


def _build_benders_master(problem: TwoStageProblem, pools: _BendersPools, eta_lb: float,
                          tol: Tolerances):
    amb = problem.ambiguity
    model = LinearModel(MIN)
    fs = problem.first_stage
    x = [model.add_var(fs.lower[j], fs.upper[j], fs.cost[j],
                       binary=j in set(fs.binary_indices), label=f"x[{j}]")
         for j in range(fs.num_vars)]
    for i in range(fs.a.shape[0]):
        model.add_row({x[j]: fs.a[i, j] for j in range(fs.num_vars) if fs.a[i, j] != 0.0},
                      fs.row_senses[i], float(fs.rhs[i]))
    eta = model.add_var(eta_lb, np.inf, 1.0, label="eta")
    rc = problem.recourse

    def scenario_value_var(lb):
        return model.add_var(lb, np.inf, 0.0)

    eta_vars: dict = {}

    def cut_row(var, cut: BendersCut):
        pi = np.array(cut.pi)
        row = {var: 1.0}
        for j in range(fs.num_vars):
            coef = float(pi @ rc.a2[:, j])
            if coef != 0.0:
                row[x[j]] = row.get(x[j], 0.0) + coef
        rhs = float(pi @ (rc.b2 - rc.h @ cut.scenario.array))
        model.add_row(row, GE, rhs)

    beta_o_vars = None
    if isinstance(amb, MomentAmbiguity):
        if pools.opt_scenarios:
            alpha_o = model.add_var(-np.inf, np.inf, label="alpha_o")
            beta_o = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_o")
            beta_o_vars = beta_o
            row = {eta: 1.0, alpha_o: -1.0}
            for i, b in enumerate(beta_o):
                row[b] = -float(amb.gamma[i])
            model.add_row(row, GE, 0.0)
            for s, _ in pools.opt_scenarios:
                var = scenario_value_var(eta_lb)
                eta_vars[(OPTIMALITY_CUT, None, s.values)] = var
                psi = amb.psi_values(s)
                row = {alpha_o: 1.0, var: -1.0}
                for i, b in enumerate(beta_o):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
        if pools.feas_scenarios:
            alpha_f = model.add_var(-np.inf, np.inf, label="alpha_f")
            beta_f = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_f")
            row = {alpha_f: 1.0}
            for i, b in enumerate(beta_f):
                row[b] = float(amb.gamma[i])
            model.add_row(row, LE, 0.0)
            for s, _ in pools.feas_scenarios:
                var = scenario_value_var(0.0)
                eta_vars[(FEASIBILITY_CUT, None, s.values)] = var
                psi = amb.psi_values(s)
                row = {alpha_f: 1.0, var: -1.0}
                for i, b in enumerate(beta_f):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
    elif isinstance(amb, WassersteinAmbiguity):
        n = amb.num_samples
        opt_by_sample = [[s for s, i in pools.opt_scenarios if i == k] for k in range(n)]
        feas_by_sample = [[s for s, i in pools.feas_scenarios if i == k] for k in range(n)]
        if all(opt_by_sample[k] for k in range(n)):
            alpha_o = model.add_vars(n, -np.inf, np.inf, label="alpha_o")
            beta_o = model.add_var(0.0, np.inf, label="beta_o")
            beta_o_vars = beta_o
            row = {eta: 1.0, beta_o: -amb.radius}
            for a in alpha_o:
                row[a] = -1.0
            model.add_row(row, GE, 0.0)
            for k in range(n):
                anchor, w = amb.empirical[k]
                for s in opt_by_sample[k]:
                    var = eta_vars.get((OPTIMALITY_CUT, None, s.values))
                    if var is None:
                        var = scenario_value_var(eta_lb)
                        eta_vars[(OPTIMALITY_CUT, None, s.values)] = var
                    model.add_row({alpha_o[k]: 1.0, beta_o: w * amb.distance(s, anchor),
                                   var: -w}, GE, 0.0)
        if any(feas_by_sample[k] for k in range(n)) and all(
            feas_by_sample[k] or opt_by_sample[k] for k in range(n)
        ):
            alpha_f = model.add_vars(n, -np.inf, np.inf, label="alpha_f")
            beta_f = model.add_var(0.0, np.inf, label="beta_f")
            row = {beta_f: amb.radius}
            for a in alpha_f:
                row[a] = 1.0
            model.add_row(row, LE, 0.0)
            for k in range(n):
                anchor, w = amb.empirical[k]
                pool_k = feas_by_sample[k] or [anchor]
                for s in pool_k:
                    var = eta_vars.get((FEASIBILITY_CUT, None, s.values))
                    if var is None:
                        var = scenario_value_var(0.0)
                        eta_vars[(FEASIBILITY_CUT, None, s.values)] = var
                    model.add_row({alpha_f[k]: 1.0, beta_f: w * amb.distance(s, anchor),
                                   var: -w}, GE, 0.0)
    else:
        raise CcgError("Benders supports moment and Wasserstein ambiguity sets")

    for cut in pools.cuts:
        var = eta_vars.get((cut.kind, None, cut.scenario.values))
        if var is not None:
            cut_row(var, cut)

    return model, x, eta, beta_o_vars


def _optimality_cuts_at(problem, x, scenarios, sample=None):
    cuts = []
    for s in scenarios:
        res = evaluate_recourse(problem, x, s)
        if not res.feasible:
            continue
        cuts.append(BendersCut(s, tuple(res.duals), OPTIMALITY_CUT, sample))
    return cuts


def solve_benders(problem: TwoStageProblem, tol: Tolerances | None = None,
                  mode: str = MODE_DRO, options: CcgOptions | None = None) -> CcgResult:
    """Benders decomposition; ``mode`` picks the scenario source.

    ``dro`` prices whole worst-case supports with the expectation oracles
    and adds one cut per support scenario (plus feasibility cuts when the
    candidate is not almost surely feasible); ``basic`` adds a single cut
    per iteration from the classical single-scenario subproblem and
    requires recourse feasibility everywhere.
    """
    tol = tol or Tolerances()
    options = options or CcgOptions()
    amb = problem.ambiguity
    if mode not in (MODE_BASIC, MODE_DRO):
        raise CcgError(f"unknown Benders mode {mode!r}")
    if mode == MODE_BASIC and not problem.recourse_always_feasible:
        raise RequiresFeasibleRecourseError("basic Benders has no feasibility handling")

    pools = _BendersPools()
    state = SolveState()
    started = time.perf_counter()
    status = STATUS_ITERATION_LIMIT
    feas_scale = 1.0 + float(np.abs(problem.recourse.b2).max(initial=0.0))
    feas_eps = tol.feas_eps * feas_scale

    for it in range(1, options.max_iterations + 1):
        state.t = it
        iter_start = time.perf_counter()
        model, x_vars, eta_var, beta_vars = _build_benders_master(problem, pools,
                                                                  options.eta_lb, tol)
        msol = solve_milp(model.build_milp(), tol=tol.lp(), int_tol=tol.int_tol,
                          want_duals=False)
        if msol.status == MilpStatus.INFEASIBLE:
            status = STATUS_INFEASIBLE
            break
        if msol.status != MilpStatus.OPTIMAL:
            raise CcgError(f"Benders master ended with status {msol.status}")
        state.lb = max(state.lb, msol.objective)
        x_star = np.array([msol.x[j] for j in x_vars])
        f1 = _first_stage_cost(problem, x_star)
        eta_f = 0.0

        if mode == MODE_DRO:
            if not problem.recourse_always_feasible:
                fres = _run_wcev(problem, x_star, FEASIBILITY, tol, ORACLE_CG, options,
                                 _warm_init(state, problem, FEASIBILITY, options))
                eta_f = fres.value
            if eta_f > feas_eps:
                for s in fres.distribution.scenarios:
                    res = evaluate_feasibility_recourse(problem, x_star, s, tol)
                    pools.add_cut(problem, BendersCut(s, tuple(np.clip(res.duals, 0.0, 1.0)),
                                                      FEASIBILITY_CUT), tol.dedup_tol)
                    dedup_add(state.pools.feasibility, s, tol.dedup_tol)
                for s in fres.pool:
                    dedup_add(state.pools.warm_feasibility, s, tol.dedup_tol)
            else:
                ores = _run_wcev(problem, x_star, OPTIMALITY, tol, ORACLE_CG, options,
                                 _warm_init(state, problem, OPTIMALITY, options))
                if isinstance(amb, WassersteinAmbiguity):
                    n = amb.num_samples
                    if state.pools.warm_per_sample_optimality is None:
                        state.pools.warm_per_sample_optimality = [[] for _ in range(n)]
                    for i in range(n):
                        for s in ores.per_sample_dists[i].scenarios:
                            for cut in _optimality_cuts_at(problem, x_star, [s]):
                                pools.add_cut(problem, BendersCut(cut.scenario, cut.pi,
                                                                  OPTIMALITY_CUT, i),
                                              tol.dedup_tol)
                        for s in ores.per_sample_pools[i]:
                            dedup_add(state.pools.warm_per_sample_optimality[i], s, tol.dedup_tol)
                else:
                    for cut in _optimality_cuts_at(problem, x_star, ores.distribution.scenarios):
                        pools.add_cut(problem, cut, tol.dedup_tol)
                    for s in ores.pool:
                        dedup_add(state.pools.warm_optimality, s, tol.dedup_tol)
                for s in ores.distribution.scenarios:
                    dedup_add(state.pools.optimality, s, tol.dedup_tol)
                ub_cand = f1 + ores.value + max(ores.v_star, 0.0)
                if ub_cand < state.ub - 1e-9:
                    state.ub = ub_cand
                    state.incumbent_x = x_star.copy()
        else:  # basic: one classical subproblem, one cut
            if isinstance(amb, MomentAmbiguity):
                beta = (np.array([msol.x[j] for j in beta_vars])
                        if beta_vars is not None else np.zeros(amb.num_rows))
                res = psp_solve(problem, x_star, OPTIMALITY, (0.0, beta), problem.space,
                                amb, tol)
                ub_cand = f1 + res.v_star + float(amb.gamma @ beta)
                for cut in _optimality_cuts_at(problem, x_star, [res.scenario]):
                    pools.add_cut(problem, cut, tol.dedup_tol)
                dedup_add(state.pools.optimality, res.scenario, tol.dedup_tol)
            else:
                beta = float(msol.x[beta_vars]) if beta_vars is not None else 0.0
                n = amb.num_samples
                total = 0.0
                for i in range(n):
                    r = psp_wasserstein_solve(problem, x_star, OPTIMALITY,
                                              (np.zeros(n), beta), i, problem.space, amb, tol)
                    total += r.v_star
                    for cut in _optimality_cuts_at(problem, x_star, [r.scenario]):
                        pools.add_cut(problem, BendersCut(cut.scenario, cut.pi,
                                                          OPTIMALITY_CUT, i), tol.dedup_tol)
                    dedup_add(state.pools.optimality, r.scenario, tol.dedup_tol)
                ub_cand = f1 + total + amb.radius * beta
            if ub_cand < state.ub - 1e-9:
                state.ub = ub_cand
                state.incumbent_x = x_star.copy()

        wall = (time.perf_counter() - iter_start) * 1000.0 if options.record_wall else 0.0
        state.trace.append(IterationRecord(
            t=it, lb=state.lb, ub=state.ub, gap=state.gap(), eta_f=eta_f,
            eta_o=state.ub - f1 if np.isfinite(state.ub) else np.inf,
            pool_o=len(state.pools.optimality), pool_f=len(state.pools.feasibility),
            cuts=len(pools.cuts), wall_ms=wall,
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
