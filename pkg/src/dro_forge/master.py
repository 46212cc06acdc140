"""Main master problems of the outer loop, as MILPs over scenario pools.

The default form is the big-M-free single level obtained by dualizing the
pool-restricted inner maximizations: one recourse replica per pooled
scenario, dual-side variables (alpha, beta) per cutting-plane block, and
the feasibility block policing the artificial slacks of every scenario
that can carry probability. A big-M variant with per-block replicas is
kept for comparison. Masters are relaxations: their optimum lower-bounds
the robust optimum and grows as pools grow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .build import LinearModel
from .lp import EQ, GE, LE, MIN
from .milp import MilpSolution, MilpStatus, solve_milp
from .model import (
    MixedIntegerMomentAmbiguity,
    MomentAmbiguity,
    Scenario,
    Tolerances,
    TwoStageProblem,
    WassersteinAmbiguity,
    dedup_add,
)

BIG_M = "big-m"
DUAL_SINGLE_LEVEL = "dual-single-level"
OPT_ONLY = "opt-only"
MERGED = "merged"


class MasterError(Exception):
    pass


@dataclass
class ScenarioPools:
    """Screened pools feeding the master, plus full pools for warm starts."""

    optimality: list[Scenario] = field(default_factory=list)
    feasibility: list[Scenario] = field(default_factory=list)
    warm_optimality: list[Scenario] = field(default_factory=list)
    warm_feasibility: list[Scenario] = field(default_factory=list)
    per_sample_optimality: list[list[Scenario]] | None = None
    per_sample_feasibility: list[list[Scenario]] | None = None
    warm_per_sample_optimality: list[list[Scenario]] | None = None
    warm_per_sample_feasibility: list[list[Scenario]] | None = None
    z_optimality: list[np.ndarray] = field(default_factory=list)
    z_feasibility: list[np.ndarray] = field(default_factory=list)

    def merged(self, dedup_tol: float = 1e-7) -> list[Scenario]:
        out: list[Scenario] = []
        for s in list(self.feasibility) + list(self.optimality):
            dedup_add(out, s, dedup_tol)
        return out

    def merged_per_sample(self, n_samples: int, dedup_tol: float = 1e-7) -> list[list[Scenario]]:
        opt = self.per_sample_optimality or [[] for _ in range(n_samples)]
        fea = self.per_sample_feasibility or [[] for _ in range(n_samples)]
        out = []
        for i in range(n_samples):
            pool: list[Scenario] = []
            for s in list(fea[i]) + list(opt[i]):
                dedup_add(pool, s, dedup_tol)
            out.append(pool)
        return out

    def merged_z(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for z in list(self.z_feasibility) + list(self.z_optimality):
            if not any(np.array_equal(z, w) for w in out):
                out.append(z)
        return out

    def add_z(self, z: np.ndarray, kind: str):
        target = self.z_optimality if kind == "optimality" else self.z_feasibility
        if not any(np.array_equal(z, w) for w in target):
            target.append(np.asarray(z, dtype=float))


@dataclass
class MasterModel:
    milp: object
    x_vars: list[int]
    eta_var: int
    replica_scenarios: list[Scenario]
    eta_o_vars: dict[int, int] = field(default_factory=dict)  # replica idx -> var
    eta_f_vars: dict[int, int] = field(default_factory=dict)
    alpha_o: object = None
    beta_o: object = None
    alpha_f: object = None
    beta_f: object = None


@dataclass
class MasterSolution:
    status: MilpStatus
    x: np.ndarray | None
    objective: float | None  # the lower bound w
    eta: float | None
    milp: MilpSolution | None


def _add_first_stage(model: LinearModel, problem: TwoStageProblem) -> list[int]:
    fs = problem.first_stage
    x = [
        model.add_var(fs.lower[j], fs.upper[j], fs.cost[j],
                      binary=j in set(fs.binary_indices), label=f"x[{j}]")
        for j in range(fs.num_vars)
    ]
    for i in range(fs.a.shape[0]):
        row = {x[j]: fs.a[i, j] for j in range(fs.num_vars) if fs.a[i, j] != 0.0}
        model.add_row(row, fs.row_senses[i], float(fs.rhs[i]))
    return x


def _add_replica(model: LinearModel, problem: TwoStageProblem, x_vars, s: Scenario,
                 with_slacks: bool, tag: str):
    rc = problem.recourse
    y = model.add_vars(rc.num_vars, 0.0, np.inf, label=f"y{tag}")
    ytil = model.add_vars(rc.num_rows, 0.0, np.inf, label=f"yt{tag}") if with_slacks else []
    rhs = rc.b2 - rc.h @ s.array
    for r in range(rc.num_rows):
        row = {y[c]: rc.b_matrix[r, c] for c in range(rc.num_vars) if rc.b_matrix[r, c] != 0.0}
        if with_slacks:
            row[ytil[r]] = 1.0
        for j in range(len(x_vars)):
            if rc.a2[r, j] != 0.0:
                row[x_vars[j]] = row.get(x_vars[j], 0.0) + rc.a2[r, j]
        model.add_row(row, GE, float(rhs[r]))
    return y, ytil


def _eta_value_rows(model, problem, y, ytil, big_m_penalty):
    """eta variable tied to the replica cost (optionally big-M penalized slacks)."""
    rc = problem.recourse
    eta = model.add_var(-np.inf, np.inf, 0.0, label="eta_scen")
    row = {eta: 1.0}
    for c in range(rc.num_vars):
        if rc.c2[c] != 0.0:
            row[y[c]] = -float(rc.c2[c])
    if big_m_penalty:
        for v in ytil:
            row[v] = row.get(v, 0.0) - big_m_penalty
    model.add_row(row, EQ, 0.0)
    return eta


def _eta_slack_rows(model, ytil):
    eta = model.add_var(-np.inf, np.inf, 0.0, label="eta_feas")
    row = {eta: 1.0}
    for v in ytil:
        row[v] = -1.0
    model.add_row(row, EQ, 0.0)
    return eta


def mmp_build(problem: TwoStageProblem, pools: ScenarioPools,
              variant: str = DUAL_SINGLE_LEVEL, pool_policy: str = OPT_ONLY,
              eta_lb: float = 0.0, tol: Tolerances | None = None) -> MasterModel:
    """Moment-set master over the current pools.

    With empty pools this is the bare first-stage problem with eta at its
    lower bound. The optimality cutting plane is indexed by the optimality
    pool alone (default) or by the merged pool; the feasibility plane
    always covers the merged pool so that every scenario able to carry
    probability has its artificial slacks policed.
    """
    tol = tol or Tolerances()
    amb = problem.ambiguity
    if not isinstance(amb, MomentAmbiguity):
        raise MasterError("mmp_build expects a moment ambiguity set")
    model = LinearModel(MIN)
    x_vars = _add_first_stage(model, problem)
    eta = model.add_var(eta_lb, np.inf, 1.0, label="eta")

    merged = pools.merged(tol.dedup_tol)
    opt_pool = list(pools.optimality) if pool_policy == OPT_ONLY else merged
    use_slacks = not problem.recourse_always_feasible

    master = MasterModel(None, x_vars, eta, merged)
    if not merged:
        master.milp = model.build_milp()
        return master

    if variant == DUAL_SINGLE_LEVEL:
        replicas = {}
        for idx, s in enumerate(merged):
            y, ytil = _add_replica(model, problem, x_vars, s, use_slacks, f"[{idx}]")
            replicas[idx] = (y, ytil)
        if opt_pool:
            alpha_o = model.add_var(-np.inf, np.inf, label="alpha_o")
            beta_o = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_o")
            row = {eta: 1.0, alpha_o: -1.0}
            for i, b in enumerate(beta_o):
                row[b] = -float(amb.gamma[i])
            model.add_row(row, GE, 0.0)
            for idx, s in enumerate(merged):
                if not _in_pool(s, opt_pool, tol.dedup_tol):
                    continue
                y, ytil = replicas[idx]
                eta_o = _eta_value_rows(model, problem, y, ytil, 0.0)
                master.eta_o_vars[idx] = eta_o
                row = {alpha_o: 1.0, eta_o: -1.0}
                psi = amb.psi_values(s)
                for i, b in enumerate(beta_o):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
            master.alpha_o, master.beta_o = alpha_o, beta_o
        if use_slacks:
            alpha_f = model.add_var(-np.inf, np.inf, label="alpha_f")
            beta_f = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_f")
            row = {alpha_f: 1.0}
            for i, b in enumerate(beta_f):
                row[b] = float(amb.gamma[i])
            model.add_row(row, LE, 0.0)
            for idx, s in enumerate(merged):
                y, ytil = replicas[idx]
                eta_f = _eta_slack_rows(model, ytil)
                master.eta_f_vars[idx] = eta_f
                row = {alpha_f: 1.0, eta_f: -1.0}
                psi = amb.psi_values(s)
                for i, b in enumerate(beta_f):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
            master.alpha_f, master.beta_f = alpha_f, beta_f
    elif variant == BIG_M:
        if opt_pool:
            alpha_o = model.add_var(-np.inf, np.inf, label="alpha_o")
            beta_o = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_o")
            row = {eta: 1.0, alpha_o: -1.0}
            for i, b in enumerate(beta_o):
                row[b] = -float(amb.gamma[i])
            model.add_row(row, GE, 0.0)
            for idx, s in enumerate(merged):
                if not _in_pool(s, opt_pool, tol.dedup_tol):
                    continue
                y, ytil = _add_replica(model, problem, x_vars, s, use_slacks, f"o[{idx}]")
                eta_o = _eta_value_rows(model, problem, y, ytil, tol.big_m if use_slacks else 0.0)
                master.eta_o_vars[idx] = eta_o
                row = {alpha_o: 1.0, eta_o: -1.0}
                psi = amb.psi_values(s)
                for i, b in enumerate(beta_o):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
            master.alpha_o, master.beta_o = alpha_o, beta_o
        if use_slacks:
            alpha_f = model.add_var(-np.inf, np.inf, label="alpha_f")
            beta_f = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_f")
            row = {alpha_f: 1.0}
            for i, b in enumerate(beta_f):
                row[b] = float(amb.gamma[i])
            model.add_row(row, LE, 0.0)
            for idx, s in enumerate(merged):
                y, ytil = _add_replica(model, problem, x_vars, s, True, f"f[{idx}]")
                eta_f = _eta_slack_rows(model, ytil)
                master.eta_f_vars[idx] = eta_f
                row = {alpha_f: 1.0, eta_f: -1.0}
                psi = amb.psi_values(s)
                for i, b in enumerate(beta_f):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
            master.alpha_f, master.beta_f = alpha_f, beta_f
    else:
        raise MasterError(f"unknown master variant {variant!r}")

    master.milp = model.build_milp()
    return master


def _in_pool(s: Scenario, pool, dedup_tol) -> bool:
    return any(np.max(np.abs(s.array - t.array), initial=0.0) <= dedup_tol for t in pool)


def mmp_wasserstein_build(problem: TwoStageProblem, pools: ScenarioPools,
                          variant: str = DUAL_SINGLE_LEVEL, pool_policy: str = OPT_ONLY,
                          eta_lb: float = 0.0, tol: Tolerances | None = None) -> MasterModel:
    """Wasserstein master: per-sample alpha blocks and a single radius dual.

    Scenario-to-sample distances are constants here, so both cutting-plane
    blocks stay linear. A block is added only once every sample owns at
    least one pooled scenario (otherwise its inner problem is vacuous).
    """
    tol = tol or Tolerances()
    amb = problem.ambiguity
    if not isinstance(amb, WassersteinAmbiguity):
        raise MasterError("mmp_wasserstein_build expects a Wasserstein ambiguity set")
    if variant not in (DUAL_SINGLE_LEVEL, BIG_M):
        raise MasterError(f"unknown master variant {variant!r}")
    n = amb.num_samples
    model = LinearModel(MIN)
    x_vars = _add_first_stage(model, problem)
    eta = model.add_var(eta_lb, np.inf, 1.0, label="eta")

    merged_ps = pools.merged_per_sample(n, tol.dedup_tol)
    opt_ps = (pools.per_sample_optimality or [[] for _ in range(n)]) if pool_policy == OPT_ONLY else merged_ps
    use_slacks = not problem.recourse_always_feasible

    # replicas keyed by unique scenario across samples
    uniq: list[Scenario] = []
    for pl in merged_ps:
        for s in pl:
            dedup_add(uniq, s, tol.dedup_tol)
    master = MasterModel(None, x_vars, eta, uniq)
    if not uniq:
        master.milp = model.build_milp()
        return master

    replicas = {}
    for idx, s in enumerate(uniq):
        y, ytil = _add_replica(model, problem, x_vars, s, use_slacks, f"[{idx}]")
        replicas[idx] = (y, ytil)

    def rep_index(s):
        for idx, t in enumerate(uniq):
            if np.max(np.abs(s.array - t.array), initial=0.0) <= tol.dedup_tol:
                return idx
        raise MasterError("scenario missing from replica set")

    if all(opt_ps[i] for i in range(n)):
        alpha_o = model.add_vars(n, -np.inf, np.inf, label="alpha_o")
        beta_o = model.add_var(0.0, np.inf, label="beta_o")
        row = {eta: 1.0, beta_o: -amb.radius}
        for a in alpha_o:
            row[a] = -1.0
        model.add_row(row, GE, 0.0)
        for i in range(n):
            anchor, w = amb.empirical[i]
            for s in opt_ps[i]:
                idx = rep_index(s)
                if idx not in master.eta_o_vars:
                    y, ytil = replicas[idx]
                    if variant == BIG_M and use_slacks:
                        y, ytil = _add_replica(model, problem, x_vars, s, True, f"o[{idx}]")
                        master.eta_o_vars[idx] = _eta_value_rows(model, problem, y, ytil, tol.big_m)
                    else:
                        master.eta_o_vars[idx] = _eta_value_rows(model, problem, y, ytil, 0.0)
                eta_o = master.eta_o_vars[idx]
                dist = amb.distance(s, anchor)
                model.add_row({alpha_o[i]: 1.0, beta_o: w * dist, eta_o: -w}, GE, 0.0)
        master.alpha_o, master.beta_o = alpha_o, beta_o

    if use_slacks and all(merged_ps[i] for i in range(n)):
        alpha_f = model.add_vars(n, -np.inf, np.inf, label="alpha_f")
        beta_f = model.add_var(0.0, np.inf, label="beta_f")
        row = {beta_f: amb.radius}
        for a in alpha_f:
            row[a] = 1.0
        model.add_row(row, LE, 0.0)
        for i in range(n):
            anchor, w = amb.empirical[i]
            for s in merged_ps[i]:
                idx = rep_index(s)
                if idx not in master.eta_f_vars:
                    y, ytil = replicas[idx]
                    master.eta_f_vars[idx] = _eta_slack_rows(model, ytil)
                eta_f = master.eta_f_vars[idx]
                dist = amb.distance(s, anchor)
                model.add_row({alpha_f[i]: 1.0, beta_f: w * dist, eta_f: -w}, GE, 0.0)
        master.alpha_f, master.beta_f = alpha_f, beta_f

    master.milp = model.build_milp()
    return master


def mmp_mixed_integer_build(problem: TwoStageProblem, pools: ScenarioPools,
                            variant: str = DUAL_SINGLE_LEVEL, pool_policy: str = OPT_ONLY,
                            eta_lb: float = 0.0, tol: Tolerances | None = None) -> MasterModel:
    """Mixed-integer-ambiguity master: one dual block per pooled z vector."""
    tol = tol or Tolerances()
    amb = problem.ambiguity
    if not isinstance(amb, MixedIntegerMomentAmbiguity):
        raise MasterError("mmp_mixed_integer_build expects a mixed-integer moment set")
    if variant not in (DUAL_SINGLE_LEVEL, BIG_M):
        raise MasterError(f"unknown master variant {variant!r}")
    model = LinearModel(MIN)
    x_vars = _add_first_stage(model, problem)
    eta = model.add_var(eta_lb, np.inf, 1.0, label="eta")

    merged = pools.merged(tol.dedup_tol)
    opt_pool = list(pools.optimality) if pool_policy == OPT_ONLY else merged
    zs = pools.merged_z()
    use_slacks = not problem.recourse_always_feasible
    master = MasterModel(None, x_vars, eta, merged)
    if not merged or not zs:
        master.milp = model.build_milp()
        return master

    replicas = {}
    for idx, s in enumerate(merged):
        y, ytil = _add_replica(model, problem, x_vars, s, use_slacks, f"[{idx}]")
        replicas[idx] = (y, ytil)
        if _in_pool(s, opt_pool, tol.dedup_tol):
            master.eta_o_vars[idx] = _eta_value_rows(model, problem, y, ytil, 0.0)
        if use_slacks:
            master.eta_f_vars[idx] = _eta_slack_rows(model, ytil)

    master.alpha_o, master.beta_o = [], []
    master.alpha_f, master.beta_f = [], []
    for z in zs:
        gamma = amb.gamma0 + amb.gamma_z @ z
        alpha_o = model.add_var(-np.inf, np.inf, label="alpha_o_z")
        beta_o = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_o_z")
        row = {eta: 1.0, alpha_o: -1.0}
        for i, b in enumerate(beta_o):
            row[b] = -float(gamma[i])
        model.add_row(row, GE, 0.0)
        for idx, s in enumerate(merged):
            if idx not in master.eta_o_vars:
                continue
            psi = amb.psi @ s.array
            row = {alpha_o: 1.0, master.eta_o_vars[idx]: -1.0}
            for i, b in enumerate(beta_o):
                if psi[i] != 0.0:
                    row[b] = float(psi[i])
            model.add_row(row, GE, 0.0)
        master.alpha_o.append(alpha_o)
        master.beta_o.append(beta_o)
        if use_slacks:
            alpha_f = model.add_var(-np.inf, np.inf, label="alpha_f_z")
            beta_f = model.add_vars(amb.num_rows, 0.0, np.inf, label="beta_f_z")
            row = {alpha_f: 1.0}
            for i, b in enumerate(beta_f):
                row[b] = float(gamma[i])
            model.add_row(row, LE, 0.0)
            for idx, s in enumerate(merged):
                psi = amb.psi @ s.array
                row = {alpha_f: 1.0, master.eta_f_vars[idx]: -1.0}
                for i, b in enumerate(beta_f):
                    if psi[i] != 0.0:
                        row[b] = float(psi[i])
                model.add_row(row, GE, 0.0)
            master.alpha_f.append(alpha_f)
            master.beta_f.append(beta_f)

    master.milp = model.build_milp()
    return master


def build_master(problem: TwoStageProblem, pools: ScenarioPools,
                 variant: str = DUAL_SINGLE_LEVEL, pool_policy: str = OPT_ONLY,
                 eta_lb: float = 0.0, tol: Tolerances | None = None) -> MasterModel:
    amb = problem.ambiguity
    if isinstance(amb, MomentAmbiguity):
        return mmp_build(problem, pools, variant, pool_policy, eta_lb, tol)
    if isinstance(amb, WassersteinAmbiguity):
        return mmp_wasserstein_build(problem, pools, variant, pool_policy, eta_lb, tol)
    return mmp_mixed_integer_build(problem, pools, variant, pool_policy, eta_lb, tol)


def solve_master(master: MasterModel, tol: Tolerances | None = None, gap: float = 0.0,
                 node_limit: int = 200_000) -> MasterSolution:
    tol = tol or Tolerances()
    sol = solve_milp(master.milp, gap=gap, node_limit=node_limit, tol=tol.lp(),
                     int_tol=tol.int_tol, want_duals=False)
    if sol.status not in (MilpStatus.OPTIMAL, MilpStatus.NODE_LIMIT) or sol.x is None:
        return MasterSolution(sol.status, None, None, None, sol)
    x = np.array([sol.x[j] for j in master.x_vars])
    eta = float(sol.x[master.eta_var])
    return MasterSolution(sol.status, x, sol.objective, eta, sol)
