"""Worst-case expected value over an ambiguity set, for a fixed first stage.

Two routes are provided. The brute-force oracle enumerates candidate
supports of at most m+1 scenarios and solves the probability LP on each,
which is exact for finite candidate sets (discrete spaces, or box spaces
restricted to their vertices). The column-generation oracle alternates a
pool-restricted probability LP with a pricing subproblem, growing the
pool until no scenario has a positive reduced cost.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .build import LinearModel
from .lp import EQ, LE, MAX, LpProblem, LpStatus, solve_lp
from .milp import MilpProblem
from .model import (
    BinaryCardinalitySpace,
    BoxSpace,
    DiscreteDistribution,
    MixedIntegerMomentAmbiguity,
    MomentAmbiguity,
    Scenario,
    Tolerances,
    WassersteinAmbiguity,
    dedup_add,
    evaluate_feasibility_recourse,
    evaluate_recourse,
)
from .pricing import FEASIBILITY, OPTIMALITY, default_pricer

SCREEN_TOL = 1e-9  # probability below which a column is dropped from reported supports


class WcevError(Exception):
    pass


class PmpInfeasibleError(WcevError):
    """The pool cannot support any distribution in the ambiguity set."""


class EnumerationCapExceededError(WcevError):
    pass


class IterationLimitError(WcevError):
    pass


class InfeasibleAmbiguityError(WcevError):
    """No distribution over the sample space satisfies the ambiguity constraints."""


@dataclass
class WcevResult:
    value: float
    distribution: DiscreteDistribution
    alpha: object  # scalar for moment sets, one value per sample for Wasserstein
    beta: object   # vector for moment sets, scalar radius dual for Wasserstein
    pool: list[Scenario]
    iterations: int
    v_star: float
    generated: list[Scenario] = field(default_factory=list)
    per_sample_pools: list[list[Scenario]] | None = None
    per_sample_dists: list[DiscreteDistribution] | None = None
    z_star: np.ndarray | None = None
    stalled: bool = False
    trace: list[tuple[float, float]] = field(default_factory=list)  # (eta, v) per iteration


class QCache:
    """Lazily evaluated recourse values for one (x, target) pair.

    Returns None for scenarios whose recourse is infeasible (only possible
    for the optimality target); those carry zero probability in every
    admissible distribution once the feasibility phase has passed, so the
    oracles simply exclude them from probability columns.
    """

    def __init__(self, problem, x, target, tol: Tolerances):
        self.problem = problem
        self.x = np.asarray(x, dtype=float)
        self.target = target
        self.tol = tol
        self.cache: dict[Scenario, float | None] = {}

    def __call__(self, s: Scenario) -> float | None:
        if s not in self.cache:
            if self.target == FEASIBILITY:
                self.cache[s] = evaluate_feasibility_recourse(self.problem, self.x, s, self.tol).value
            else:
                res = evaluate_recourse(self.problem, self.x, s, self.tol)
                self.cache[s] = res.value if res.feasible else None
        return self.cache[s]

    def __getitem__(self, s: Scenario) -> float:
        v = self(s)
        if v is None:
            raise KeyError(f"recourse infeasible at {s}")
        return v


def _q_lookup(problem, x, target, cache_dict, tol):
    qc = QCache(problem, x, target, tol)
    qc.cache = cache_dict
    return qc


def _q_of(qvals, s: Scenario):
    if callable(qvals):
        return qvals(s)
    return qvals.get(s) if hasattr(qvals, "get") else qvals[s]


def pmp_build(pool, qvals, ambiguity) -> LpProblem:
    """Pool-restricted probability LP: max sum q_j p_j over the ambiguity rows.

    For Wasserstein sets the pool is one scenario list per empirical
    sample; rows are the per-sample convexity constraints followed by the
    single radius row.
    """
    if isinstance(ambiguity, MomentAmbiguity):
        n = len(pool)
        if n == 0:
            raise PmpInfeasibleError("empty pool")
        cost = np.array([_q_of(qvals, s) for s in pool], dtype=float)
        a = np.vstack([np.ones(n)] + [[float(ambiguity.psi[i] @ s.array) for s in pool]
                                      for i in range(ambiguity.num_rows)])
        senses = (EQ,) + (LE,) * ambiguity.num_rows
        rhs = np.concatenate([[1.0], ambiguity.gamma])
        return LpProblem.build(MAX, cost, a, senses, rhs)
    if isinstance(ambiguity, WassersteinAmbiguity):
        pools = pool
        if len(pools) != ambiguity.num_samples:
            raise WcevError("need one pool per empirical sample")
        cols = [(i, s) for i, pl in enumerate(pools) for s in pl]
        n = len(cols)
        if n == 0:
            raise PmpInfeasibleError("empty pools")
        weights = [w for _, w in ambiguity.empirical]
        cost = np.array([weights[i] * _q_of(qvals, s) for i, s in cols])
        a = np.zeros((ambiguity.num_samples + 1, n))
        for j, (i, s) in enumerate(cols):
            a[i, j] = 1.0
            a[ambiguity.num_samples, j] = weights[i] * ambiguity.distance(s, ambiguity.empirical[i][0])
        senses = (EQ,) * ambiguity.num_samples + (LE,)
        rhs = np.concatenate([np.ones(ambiguity.num_samples), [ambiguity.radius]])
        return LpProblem.build(MAX, cost, a, senses, rhs)
    raise WcevError(f"pmp_build does not handle {type(ambiguity).__name__}")


def pmp_mixed_integer_build(pool, qvals, ambiguity: MixedIntegerMomentAmbiguity):
    """Pool MILP over (p, z): max sum q p s.t. Psi-rows with z-shifted budgets."""
    model = LinearModel(MAX)
    scen = list(pool)
    p = model.add_vars(len(scen), 0.0, 1.0, label="p")
    z = model.add_vars(ambiguity.z_dimension, 0.0, 1.0, binary=True, label="z")
    for j, s in enumerate(scen):
        model.set_cost(p[j], float(_q_of(qvals, s)))
    model.add_row({pj: 1.0 for pj in p}, EQ, 1.0)
    for i in range(ambiguity.num_rows):
        row = {p[j]: float(ambiguity.psi[i] @ s.array) for j, s in enumerate(scen)}
        for k in range(ambiguity.z_dimension):
            if ambiguity.gamma_z[i, k] != 0.0:
                row[z[k]] = -float(ambiguity.gamma_z[i, k])
        model.add_row(row, LE, float(ambiguity.gamma0[i]))
    for krow in range(ambiguity.z_a.shape[0]):
        row = {z[k]: float(ambiguity.z_a[krow, k]) for k in range(ambiguity.z_dimension)
               if ambiguity.z_a[krow, k] != 0.0}
        model.add_row(row, ambiguity.z_senses[krow], float(ambiguity.z_rhs[krow]))
    return model.build_milp(), {"p": p, "z": z, "scenarios": scen}


def _space_candidates(space, cap):
    if isinstance(space, BoxSpace):
        return list(space.vertices(cap=cap))
    if isinstance(space, BinaryCardinalitySpace):
        return list(space.members(cap=cap))
    raise WcevError(f"unsupported sample space {type(space).__name__}")


def seed_pool(space, ambiguity: MomentAmbiguity, tol: Tolerances, cap: int = 2 ** 12):
    """Initial columns making the pool LP feasible.

    The centroid (box) or all-zero point (binary space) is used when it
    satisfies the moment rows; otherwise a max-slack LP over the candidate
    set picks a small support, and its infeasibility certifies an empty
    ambiguity set (psi is affine, so means over candidates span the hull).
    """
    center = space.centroid()
    if np.all(ambiguity.psi_values(center) <= ambiguity.gamma + 1e-9):
        return [center]
    candidates = _space_candidates(space, cap)
    n = len(candidates)
    cost = np.zeros(n + 1)
    cost[n] = 1.0
    a = np.zeros((1 + ambiguity.num_rows, n + 1))
    a[0, :n] = 1.0
    for i in range(ambiguity.num_rows):
        for j, s in enumerate(candidates):
            a[1 + i, j] = float(ambiguity.psi[i] @ s.array)
        a[1 + i, n] = 1.0
    senses = (EQ,) + (LE,) * ambiguity.num_rows
    rhs = np.concatenate([[1.0], ambiguity.gamma])
    lower = np.zeros(n + 1)
    lower[n] = -np.inf
    lp = LpProblem(MAX, cost, a, senses, rhs, lower, np.full(n + 1, np.inf))
    sol = solve_lp(lp, tol.lp())
    if sol.status != LpStatus.OPTIMAL or sol.objective < -tol.feas_tol:
        raise InfeasibleAmbiguityError("no distribution over the sample space fits the moment rows")
    seeds = [candidates[j] for j in range(n) if sol.x[j] > SCREEN_TOL]
    return seeds or [candidates[int(np.argmax(sol.x[:n]))]]


def oracle1_bruteforce(qvals, ambiguity: MomentAmbiguity, space, cap: int = 2 ** 16,
                       tol: Tolerances | None = None) -> WcevResult:
    """Exact WCEV for finite candidate sets by support enumeration.

    Every support of size at most m+1 is tried with a probability LP
    (supports that cannot beat the incumbent are skipped, which does not
    change the outcome since an LP value never exceeds its largest q).
    """
    tol = tol or Tolerances()
    if not isinstance(ambiguity, MomentAmbiguity):
        raise WcevError("the brute-force oracle handles moment ambiguity sets")
    candidates = _space_candidates(space, cap)
    cand = [(s, v) for s in candidates if (v := _q_of(qvals, s)) is not None]
    if not cand:
        raise InfeasibleAmbiguityError("no usable candidate scenarios")
    m = ambiguity.num_rows
    max_support = min(m + 1, len(cand))
    total = sum(comb(len(cand), r) for r in range(1, max_support + 1))
    if total > cap:
        raise EnumerationCapExceededError(f"{total} supports exceed the cap {cap}")

    psi_cols = {s: ambiguity.psi_values(s) for s, _ in cand}
    order = sorted(range(len(cand)), key=lambda j: (-cand[j][1], j))
    cand = [cand[j] for j in order]

    best = None
    solved = 0
    # feasible singletons first: value is q itself, no LP needed
    for s, v in cand:
        solved += 1
        if np.all(psi_cols[s] <= ambiguity.gamma + 1e-9):
            if best is None or v > best[0] + 1e-12:
                duals = np.zeros(1 + m)
                duals[0] = v
                best = (v, [s], np.array([1.0]), duals)
    for r in range(2, max_support + 1):
        for combo in itertools.combinations(range(len(cand)), r):
            solved += 1
            ub = max(cand[j][1] for j in combo)
            if best is not None and ub <= best[0] + 1e-12:
                continue
            support = [cand[j][0] for j in combo]
            q = np.array([cand[j][1] for j in combo])
            a = np.vstack([np.ones(r)] + [[psi_cols[s][i] for s in support] for i in range(m)])
            lp = LpProblem.build(MAX, q, a, (EQ,) + (LE,) * m, np.concatenate([[1.0], ambiguity.gamma]))
            sol = solve_lp(lp, tol.lp())
            if sol.status != LpStatus.OPTIMAL:
                continue
            if best is None or sol.objective > best[0] + 1e-12:
                best = (sol.objective, support, sol.x.copy(), sol.duals.copy())
    if best is None:
        raise InfeasibleAmbiguityError("every candidate support was infeasible")
    value, support, probs, duals = best
    keep = probs > SCREEN_TOL
    scen = tuple(s for s, k in zip(support, keep) if k)
    pr = probs[keep]
    pr = pr / pr.sum()
    assert len(scen) <= m + 1
    dist = DiscreteDistribution(scen, tuple(pr))
    return WcevResult(
        value=float(value), distribution=dist, alpha=float(duals[0]),
        beta=np.maximum(duals[1:], 0.0), pool=list(support), iterations=solved,
        v_star=0.0,
    )


def oracle2_cg(problem, x, target, ambiguity=None, pool_init=None,
               tol: Tolerances | None = None, pricer=None,
               iteration_limit: int = 500) -> WcevResult:
    """Column-generation WCEV for the given first stage and target.

    ``target`` selects the recourse cost (optimality) or the minimal-slack
    infeasibility measure (feasibility). The returned value is an
    eps-underestimate of the true WCEV, with the final pricing value
    bounding the gap from above.
    """
    tol = tol or Tolerances()
    pricer = pricer or default_pricer()
    ambiguity = ambiguity if ambiguity is not None else problem.ambiguity
    if isinstance(ambiguity, MomentAmbiguity):
        return _cg_moment(problem, x, target, ambiguity, pool_init, tol, pricer, iteration_limit)
    if isinstance(ambiguity, WassersteinAmbiguity):
        return _cg_wasserstein(problem, x, target, ambiguity, pool_init, tol, pricer, iteration_limit)
    if isinstance(ambiguity, MixedIntegerMomentAmbiguity):
        from .pricing import hybrid_cg_mixed_integer

        return hybrid_cg_mixed_integer(problem, x, target, ambiguity, pool_init, tol, pricer,
                                       iteration_limit)
    raise WcevError(f"unsupported ambiguity {type(ambiguity).__name__}")


def _screen(scenarios, probs):
    keep = probs > SCREEN_TOL
    scen = tuple(s for s, k in zip(scenarios, keep) if k)
    pr = probs[keep]
    return DiscreteDistribution(scen, tuple(pr / pr.sum()))


def _cg_moment(problem, x, target, ambiguity, pool_init, tol, pricer, iteration_limit):
    q = QCache(problem, x, target, tol)
    pool: list[Scenario] = []
    for s in pool_init or []:
        dedup_add(pool, s, tol.dedup_tol)
    if not pool:
        pool = seed_pool(problem.space, ambiguity, tol)
    generated: list[Scenario] = []
    trace: list[tuple[float, float]] = []
    stalled = False

    for it in range(1, iteration_limit + 1):
        active = [s for s in pool if q(s) is not None]
        if not active:
            raise PmpInfeasibleError("every pool scenario has infeasible recourse")
        lp = pmp_build(active, q, ambiguity)
        sol = solve_lp(lp, tol.lp())
        if sol.status == LpStatus.INFEASIBLE:
            raise PmpInfeasibleError("pool cannot support a distribution in the ambiguity set")
        if sol.status != LpStatus.OPTIMAL:  # pragma: no cover - simplex on a bounded polytope
            raise WcevError(f"pool LP ended with status {sol.status}")
        eta = sol.objective
        alpha = float(sol.duals[0])
        beta = np.maximum(sol.duals[1:], 0.0)
        res = pricer.price_moment(problem, x, target, alpha, beta, problem.space, ambiguity, tol)
        trace.append((eta, res.v_star))
        eps = tol.cg_eps * (1.0 + abs(eta))
        if res.v_star <= eps:
            break
        if not dedup_add(pool, res.scenario, tol.dedup_tol):
            warnings.warn("column generation stalled on a duplicate scenario", stacklevel=2)
            stalled = True
            break
        generated.append(res.scenario)
    else:
        raise IterationLimitError(f"no convergence within {iteration_limit} iterations")

    dist = _screen(active, sol.x)
    return WcevResult(
        value=float(eta), distribution=dist, alpha=alpha, beta=beta, pool=list(pool),
        iterations=it, v_star=max(res.v_star, 0.0), generated=generated,
        stalled=stalled, trace=trace,
    )


def _cg_wasserstein(problem, x, target, ambiguity, pool_init, tol, pricer, iteration_limit):
    q = QCache(problem, x, target, tol)
    n_samples = ambiguity.num_samples
    pools: list[list[Scenario]] = [[] for _ in range(n_samples)]
    if pool_init:
        if len(pool_init) != n_samples or not all(isinstance(p, (list, tuple)) for p in pool_init):
            raise WcevError("Wasserstein pool_init must be one scenario list per sample")
        for i, pl in enumerate(pool_init):
            for s in pl:
                dedup_add(pools[i], s, tol.dedup_tol)
    for i, (anchor, _) in enumerate(ambiguity.empirical):
        if not any(np.max(np.abs(anchor.array - s.array), initial=0.0) <= tol.dedup_tol for s in pools[i]):
            pools[i].insert(0, anchor)

    generated: list[Scenario] = []
    trace: list[tuple[float, float]] = []
    stalled = False

    for it in range(1, iteration_limit + 1):
        actives = []
        for i, pl in enumerate(pools):
            act = [s for s in pl if q(s) is not None]
            if not act:
                raise PmpInfeasibleError(
                    f"sample {i} has no feasible pool scenario; empirical point infeasible"
                )
            actives.append(act)
        lp = pmp_build(actives, q, ambiguity)
        sol = solve_lp(lp, tol.lp())
        if sol.status != LpStatus.OPTIMAL:
            raise PmpInfeasibleError(f"pool LP ended with status {sol.status}")
        eta = sol.objective
        alphas = sol.duals[:n_samples].copy()
        beta = max(float(sol.duals[n_samples]), 0.0)
        eps = tol.cg_eps * (1.0 + abs(eta))

        results = [
            pricer.price_wasserstein(problem, x, target, alphas, beta, i, problem.space,
                                     ambiguity, tol)
            for i in range(n_samples)
        ]
        v_star = max(r.v_star for r in results)
        trace.append((eta, v_star))
        if v_star <= eps:
            break
        added = False
        for i, r in enumerate(results):
            if r.v_star > eps and dedup_add(pools[i], r.scenario, tol.dedup_tol):
                generated.append(r.scenario)
                added = True
        if not added:
            warnings.warn("column generation stalled on duplicate scenarios", stacklevel=2)
            stalled = True
            break
    else:
        raise IterationLimitError(f"no convergence within {iteration_limit} iterations")

    # conditional distributions per sample, then the merged screened law
    per_sample = []
    offset = 0
    for i, pl in enumerate(actives):
        probs = sol.x[offset:offset + len(pl)]
        offset += len(pl)
        per_sample.append(_screen(pl, probs))
    merged_s: list[Scenario] = []
    merged_p: list[float] = []
    for i, dist_i in enumerate(per_sample):
        w = ambiguity.empirical[i][1]
        for s, pr in zip(dist_i.scenarios, dist_i.probabilities):
            mass = w * pr
            for k, t in enumerate(merged_s):
                if np.max(np.abs(t.array - s.array), initial=0.0) <= tol.dedup_tol:
                    merged_p[k] += mass
                    break
            else:
                merged_s.append(s)
                merged_p.append(mass)
    merged = _screen(merged_s, np.array(merged_p))

    return WcevResult(
        value=float(eta), distribution=merged, alpha=alphas, beta=beta,
        pool=[s for pl in pools for s in pl], iterations=it,
        v_star=max(v_star, 0.0), generated=generated,
        per_sample_pools=pools, per_sample_dists=per_sample,
        stalled=stalled, trace=trace,
    )
