"""Brute-force reference computations kept independent of the solver paths."""

import itertools

import numpy as np

from dro_forge.lp import EQ, GE, LE, MAX


def lp_vertex_enumeration(problem, tol=1e-9):
    """Optimal value of a small LP by enumerating basic points.

    All variables must have finite bounds (the feasible set is then a
    polytope, so an optimum sits at a vertex). Returns None when no
    feasible vertex exists.
    """
    m, n = problem.a.shape
    assert np.all(np.isfinite(problem.lower)) and np.all(np.isfinite(problem.upper))

    constraints = []  # (row, value, always_active)
    for i in range(m):
        constraints.append((problem.a[i], float(problem.rhs[i]), problem.row_senses[i] == EQ))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        constraints.append((e, float(problem.lower[j]), False))
        if problem.upper[j] > problem.lower[j] + tol:
            constraints.append((e.copy(), float(problem.upper[j]), False))

    forced = [k for k, c in enumerate(constraints) if c[2]]
    optional = [k for k, c in enumerate(constraints) if not c[2]]
    if len(forced) > n:
        pick_sets = itertools.combinations(forced, n)
    else:
        pick_sets = (
            tuple(forced) + rest
            for rest in itertools.combinations(optional, n - len(forced))
        )

    best = None
    best_x = None
    scale = 1.0 + max(
        float(np.abs(problem.rhs).max(initial=0.0)),
        float(np.abs(problem.upper).max(initial=0.0)),
        float(np.abs(problem.lower).max(initial=0.0)),
    )
    for picks in pick_sets:
        mat = np.array([constraints[k][0] for k in picks])
        vec = np.array([constraints[k][1] for k in picks])
        try:
            x = np.linalg.solve(mat, vec)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        if _feasible(problem, x, tol * scale):
            val = float(problem.cost @ x)
            if best is None or (val > best if problem.sense == MAX else val < best):
                best, best_x = val, x
    return (best, best_x) if best is not None else (None, None)


def _feasible(problem, x, tol):
    if np.any(x < problem.lower - tol) or np.any(x > problem.upper + tol):
        return False
    if problem.num_rows == 0:
        return True
    ax = problem.a @ x
    for i, s in enumerate(problem.row_senses):
        if s == LE and ax[i] > problem.rhs[i] + tol:
            return False
        if s == GE and ax[i] < problem.rhs[i] - tol:
            return False
        if s == EQ and abs(ax[i] - problem.rhs[i]) > tol:
            return False
    return True


def milp_binary_enumeration(problem, solve_lp_fn, tol=1e-9):
    """Optimal value of a small MILP by enumerating every binary assignment."""
    from dro_forge.lp import LpProblem, LpStatus

    base = problem.lp
    best = None
    best_x = None
    for bits in itertools.product((0.0, 1.0), repeat=len(problem.binary_indices)):
        lower = base.lower.copy()
        upper = base.upper.copy()
        ok = True
        for j, v in zip(problem.binary_indices, bits):
            if v < base.lower[j] - tol or v > base.upper[j] + tol:
                ok = False
                break
            lower[j] = upper[j] = v
        if not ok:
            continue
        fixed = LpProblem(base.sense, base.cost, base.a, base.row_senses, base.rhs, lower, upper)
        sol = solve_lp_fn(fixed)
        if sol.status != LpStatus.OPTIMAL:
            continue
        val = sol.objective
        if best is None or (val > best if base.sense == MAX else val < best):
            best, best_x = val, sol.x
    return best, best_x


def dro_enumeration(problem, oracle1_fn, qcache_cls, tolerances, feas_eps=1e-6):
    """Ground-truth two-stage DRO optimum for tiny instances.

    Enumerates first-stage binary assignments (continuous first-stage
    variables are completed by an LP; the recourse may couple only to the
    binaries), evaluates the worst-case expectation with the brute-force
    oracle, and skips assignments whose worst-case infeasibility measure
    is positive. Returns (best_value, best_x) or (None, None) when every
    assignment fails the feasibility check.
    """
    from dro_forge.lp import MIN, LpProblem, LpStatus
    from dro_forge.milp import MilpProblem as _MP
    from dro_forge.model import MixedIntegerMomentAmbiguity

    fs = problem.first_stage
    cont = [j for j in range(fs.num_vars) if j not in set(fs.binary_indices)]
    assert np.all(problem.recourse.a2[:, cont] == 0.0), "oracle needs binary-only coupling"

    best = None
    best_x = None
    for bits in itertools.product((0.0, 1.0), repeat=len(fs.binary_indices)):
        lower = fs.lower.copy()
        upper = fs.upper.copy()
        for j, v in zip(fs.binary_indices, bits):
            lower[j] = upper[j] = v
        lp = LpProblem(MIN, fs.cost, fs.a, fs.row_senses, fs.rhs, lower, upper)
        from dro_forge.lp import solve_lp as _solve

        sol = _solve(lp)
        if sol.status != LpStatus.OPTIMAL:
            continue
        x = sol.x
        amb = problem.ambiguity
        if isinstance(amb, MixedIntegerMomentAmbiguity):
            moment_sets = [amb.moment_for_z(z) for z in amb.enumerate_z()]
        else:
            moment_sets = [amb]
        qf = qcache_cls(problem, x, "feasibility", tolerances)
        eta_f = max(oracle1_fn(qf, m, problem.space).value for m in moment_sets)
        if eta_f > feas_eps:
            continue
        qo = qcache_cls(problem, x, "optimality", tolerances)
        eta_o = max(oracle1_fn(qo, m, problem.space).value for m in moment_sets)
        total = float(fs.cost @ x) + eta_o
        if best is None or total < best - 1e-12:
            best, best_x = total, x
    return best, best_x


def wasserstein_wcev_enumeration(problem, x, target):
    """Exact Wasserstein WCEV on finite spaces: one LP over every candidate
    scenario per empirical sample (conditional form), no column generation."""
    from dro_forge.lp import EQ, LE, MAX, LpProblem, LpStatus, solve_lp
    from dro_forge.model import evaluate_feasibility_recourse, evaluate_recourse

    amb = problem.ambiguity
    space = problem.space
    candidates = list(space.members()) if hasattr(space, "members") else list(space.vertices())

    def q_of(s):
        if target == "feasibility":
            return evaluate_feasibility_recourse(problem, x, s).value
        res = evaluate_recourse(problem, x, s)
        return res.value if res.feasible else None

    qs = {s: q_of(s) for s in candidates}
    cols = [(i, s) for i in range(amb.num_samples) for s in candidates if qs[s] is not None]
    n = len(cols)
    cost = np.zeros(n)
    a = np.zeros((amb.num_samples + 1, n))
    for j, (i, s) in enumerate(cols):
        w = amb.empirical[i][1]
        cost[j] = w * qs[s]
        a[i, j] = 1.0
        a[amb.num_samples, j] = w * amb.distance(s, amb.empirical[i][0])
    senses = (EQ,) * amb.num_samples + (LE,)
    rhs = np.concatenate([np.ones(amb.num_samples), [amb.radius]])
    sol = solve_lp(LpProblem.build(MAX, cost, a, senses, rhs))
    if sol.status != LpStatus.OPTIMAL:
        return None
    return sol.objective


def dro_enumeration_wasserstein(problem, feas_eps=1e-6):
    """Ground truth for tiny Wasserstein instances on finite sample spaces."""
    from dro_forge.lp import MIN, LpProblem, LpStatus, solve_lp

    fs = problem.first_stage
    cont = [j for j in range(fs.num_vars) if j not in set(fs.binary_indices)]
    assert np.all(problem.recourse.a2[:, cont] == 0.0)
    best = None
    best_x = None
    for bits in itertools.product((0.0, 1.0), repeat=len(fs.binary_indices)):
        lower = fs.lower.copy()
        upper = fs.upper.copy()
        for j, v in zip(fs.binary_indices, bits):
            lower[j] = upper[j] = v
        sol = solve_lp(LpProblem(MIN, fs.cost, fs.a, fs.row_senses, fs.rhs, lower, upper))
        if sol.status != LpStatus.OPTIMAL:
            continue
        x = sol.x
        eta_f = wasserstein_wcev_enumeration(problem, x, "feasibility")
        if eta_f is None or eta_f > feas_eps:
            continue
        eta_o = wasserstein_wcev_enumeration(problem, x, "optimality")
        total = float(fs.cost @ x) + eta_o
        if best is None or total < best - 1e-12:
            best, best_x = total, x
    return best, best_x
