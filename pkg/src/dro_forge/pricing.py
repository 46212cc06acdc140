"""Pricing subproblems: new-scenario generation for the column-generation oracles.

The max-min reduced-cost problem is reformulated through the dual of the
recourse LP. Bilinear scenario-times-dual terms are linearized exactly by
restricting box scenarios to candidate grid points (vertices; plus the
empirical anchor for Wasserstein pricing) encoded with binaries, and
applying McCormick envelopes to the binary-continuous products. Every
result is re-verified against a direct recourse evaluation at the chosen
scenario before it is returned.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .build import LinearModel
from .lp import GE, LE, EQ, MAX
from .milp import MilpStatus, solve_milp
from .model import (
    BinaryCardinalitySpace,
    BoxSpace,
    L1,
    L2,
    MixedIntegerMomentAmbiguity,
    MomentAmbiguity,
    Scenario,
    Tolerances,
    WassersteinAmbiguity,
    evaluate_feasibility_recourse,
    evaluate_recourse,
)

OPTIMALITY = "optimality"
FEASIBILITY = "feasibility"


class PricingError(Exception):
    pass


class DualUnboundedError(PricingError):
    """Recourse infeasible at the priced scenario: the feasibility phase was skipped."""


class BigMViolationWarning(UserWarning):
    pass


@dataclass
class PricingResult:
    scenario: Scenario
    v_star: float            # reduced cost recomputed from a direct recourse solve
    model_value: float       # objective reported by the pricing MILP / enumeration
    z_star: np.ndarray | None = None
    q_value: float | None = None
    pi: np.ndarray | None = None


@dataclass
class _XiTerm:
    coord: int
    var: int
    delta: float
    norm_step: float  # contribution of this term to ||xi - anchor||


def _encode_xi(model: LinearModel, space, anchor: np.ndarray | None):
    """Binary encoding xi = base + sum(delta_t * s_t) over candidate grid points.

    Without an anchor, box coordinates run between their two bounds. With
    an anchor (Wasserstein pricing) each coordinate takes one of up to
    three levels {low, anchor, high}, which is exact for maximizing a
    convex function minus an L1 distance from the anchor.
    """
    terms: list[_XiTerm] = []
    if isinstance(space, BoxSpace):
        lo = np.array(space.lower)
        hi = np.array(space.upper)
        if anchor is None:
            base = lo.copy()
            for k in range(space.dimension):
                width = hi[k] - lo[k]
                if width > 0:
                    s = model.add_var(0.0, 1.0, binary=True, label=f"s[{k}]")
                    terms.append(_XiTerm(k, s, width, width))
        else:
            base = np.clip(anchor, lo, hi)
            for k in range(space.dimension):
                group = []
                for level in (lo[k], hi[k]):
                    delta = level - base[k]
                    if abs(delta) > 1e-12:
                        s = model.add_var(0.0, 1.0, binary=True, label=f"s[{k}]")
                        group.append(s)
                        terms.append(_XiTerm(k, s, delta, abs(delta)))
                if len(group) == 2:
                    model.add_row({group[0]: 1.0, group[1]: 1.0}, LE, 1.0)
        return base, terms
    if isinstance(space, BinaryCardinalitySpace):
        base = np.zeros(space.dimension) if anchor is None else np.round(np.clip(anchor, 0.0, 1.0))
        row = {}
        for k in range(space.dimension):
            s = model.add_var(0.0, 1.0, binary=True, label=f"s[{k}]")
            delta = 1.0 - 2.0 * base[k]  # flip away from the base point
            terms.append(_XiTerm(k, s, delta, 1.0))
            row[s] = delta
        model.add_row(row, LE, space.max_ones - float(base.sum()))
        return base, terms
    raise PricingError(f"unsupported sample space {type(space).__name__}")


def _xi_from(base, terms, x_sol, kind):
    xi = base.copy()
    for t in terms:
        if x_sol[t.var] > 0.5:
            xi[t.coord] += t.delta
    if kind == "binary":
        xi = np.round(xi)
    return Scenario(tuple(xi), kind)


def _mccormick(model: LinearModel, s_var: int, t_var: int, big_m: float) -> int:
    y = model.add_var(0.0, big_m)
    model.add_row({y: 1.0, s_var: -big_m}, LE, 0.0)
    model.add_row({y: 1.0, t_var: -1.0}, LE, 0.0)
    model.add_row({y: 1.0, t_var: -1.0, s_var: -big_m}, GE, -big_m)
    return y


def _recourse_dual_block(model: LinearModel, problem, x, target, m_pi):
    """Variables/rows for  max (b2 - A2 x - H xi)^T pi  over the dual polytope."""
    rc = problem.recourse
    if target == FEASIBILITY:
        c2_eff = np.zeros(rc.num_vars)
        m_pi = 1.0  # duals of the L1 slack problem live in [0, 1]
    else:
        c2_eff = rc.c2
        if m_pi is None:
            m_pi = max(1.0, 2.0 * float(np.abs(rc.c2).max(initial=0.0)))
    pi = model.add_vars(rc.num_rows, lb=0.0, ub=m_pi, label="pi")
    bt = rc.b_matrix.T
    for col in range(rc.num_vars):
        row = {pi[r]: bt[col, r] for r in range(rc.num_rows) if bt[col, r] != 0.0}
        model.add_row(row, LE, float(c2_eff[col]))
    rhsx = rc.b2 - rc.a2 @ np.asarray(x, dtype=float)
    return pi, rhsx, m_pi


def _true_reduced_cost(problem, x, target, scenario, tol):
    if target == FEASIBILITY:
        res = evaluate_feasibility_recourse(problem, x, scenario, tol)
        return res.value, res.duals
    res = evaluate_recourse(problem, x, scenario, tol)
    if not res.feasible:
        raise DualUnboundedError(
            "recourse infeasible at priced scenario; run the feasibility phase first"
        )
    return res.value, res.duals


def _verify(problem, x, target, scenario, alpha_term, model_value, tol, pis, m_pi):
    q, duals = _true_reduced_cost(problem, x, target, scenario, tol)
    v_true = q - alpha_term(scenario)
    if pis is not None and m_pi > 0 and float(np.max(pis, initial=0.0)) >= 0.99 * m_pi:
        warnings.warn(
            f"pricing dual within 1% of its bound {m_pi}; consider a larger m_pi",
            BigMViolationWarning,
            stacklevel=3,
        )
    scale = 1.0 + abs(v_true) + abs(model_value)
    if abs(v_true - model_value) > 1e-6 * scale:
        raise PricingError(
            f"pricing self-check failed: model {model_value}, recomputed {v_true}"
        )
    return v_true, q


def psp_solve(problem, x, target, shadow, space, ambiguity: MomentAmbiguity,
              tol: Tolerances | None = None, m_pi: float | None = None) -> PricingResult:
    """max over Xi of (recourse value) - alpha - beta . psi(xi), as a MILP."""
    tol = tol or Tolerances()
    alpha, beta = float(shadow[0]), np.asarray(shadow[1], dtype=float).reshape(-1)
    if np.any(beta < -1e-7):
        raise PricingError("negative beta passed to pricing (duals of <= rows must be >= 0)")
    beta = np.maximum(beta, 0.0)

    model = LinearModel(MAX)
    base, terms = _encode_xi(model, space, None)
    pi, rhsx, m_pi = _recourse_dual_block(model, problem, x, target, m_pi)
    h = problem.recourse.h

    const = -alpha - float(beta @ (ambiguity.psi @ base))
    for r, v in enumerate(rhsx - h @ base):
        model.set_cost(pi[r], float(v))
    beta_psi = beta @ ambiguity.psi
    for t in terms:
        coeff = -float(beta_psi[t.coord]) * t.delta
        for r in range(h.shape[0]):
            hr = h[r, t.coord]
            if hr != 0.0:
                y = _mccormick(model, t.var, pi[r], m_pi)
                model.set_cost(y, -hr * t.delta)
        model.set_cost(t.var, coeff)

    milp = model.build_milp()
    sol = solve_milp(milp, tol=tol.lp(), int_tol=tol.int_tol, want_duals=False)
    if sol.status != MilpStatus.OPTIMAL:
        raise PricingError(f"pricing MILP ended with status {sol.status}")
    kind = "binary" if isinstance(space, BinaryCardinalitySpace) else "continuous"
    scenario = _xi_from(base, terms, sol.x, kind)
    model_value = sol.objective + const
    pis = np.array([sol.x[j] for j in pi])

    def alpha_term(s):
        return alpha + float(beta @ (ambiguity.psi @ s.array))

    v_true, q = _verify(problem, x, target, scenario, alpha_term, model_value, tol, pis,
                        m_pi if target == OPTIMALITY else 0.0)
    return PricingResult(scenario, v_true, model_value, q_value=q, pi=pis)


def psp_wasserstein_solve(problem, x, target, shadow, sample_index, space,
                          ambiguity: WassersteinAmbiguity, tol: Tolerances | None = None,
                          m_pi: float | None = None) -> PricingResult:
    """Per-sample pricing  max p_e (value - beta ||xi_e - xi||) - alpha_i."""
    tol = tol or Tolerances()
    alphas, beta = shadow
    alpha_i = float(np.asarray(alphas).reshape(-1)[sample_index])
    beta = float(beta)
    if beta < -1e-7:
        raise PricingError("negative radius dual passed to Wasserstein pricing")
    beta = max(beta, 0.0)
    anchor_s, weight = ambiguity.empirical[sample_index]
    anchor = anchor_s.array

    if ambiguity.norm == L2 and isinstance(space, BoxSpace):
        return _price_by_enumeration(problem, x, target, alpha_i, beta, weight, anchor_s,
                                     space, ambiguity, tol)

    model = LinearModel(MAX)
    base, terms = _encode_xi(model, space, anchor)
    pi, rhsx, m_pi = _recourse_dual_block(model, problem, x, target, m_pi)
    h = problem.recourse.h

    base_norm = float(np.abs(base - anchor).sum())  # zero unless the anchor sat outside the box
    const = -alpha_i - weight * beta * base_norm
    for r, v in enumerate(rhsx - h @ base):
        model.set_cost(pi[r], weight * float(v))
    for t in terms:
        for r in range(h.shape[0]):
            hr = h[r, t.coord]
            if hr != 0.0:
                y = _mccormick(model, t.var, pi[r], m_pi)
                model.set_cost(y, -weight * hr * t.delta)
        model.set_cost(t.var, -weight * beta * t.norm_step)

    milp = model.build_milp()
    sol = solve_milp(milp, tol=tol.lp(), int_tol=tol.int_tol, want_duals=False)
    if sol.status != MilpStatus.OPTIMAL:
        raise PricingError(f"pricing MILP ended with status {sol.status}")
    kind = "binary" if isinstance(space, BinaryCardinalitySpace) else "continuous"
    scenario = _xi_from(base, terms, sol.x, kind)
    model_value = sol.objective + const
    pis = np.array([sol.x[j] for j in pi])

    q, _ = _true_reduced_cost(problem, x, target, scenario, tol)
    v_true = weight * (q - beta * ambiguity.distance(scenario, anchor_s)) - alpha_i
    if float(np.max(pis, initial=0.0)) >= 0.99 * m_pi and target == OPTIMALITY:
        warnings.warn(
            f"pricing dual within 1% of its bound {m_pi}; consider a larger m_pi",
            BigMViolationWarning,
            stacklevel=2,
        )
    scale = 1.0 + abs(v_true) + abs(model_value)
    if abs(v_true - model_value) > 1e-6 * scale:
        raise PricingError(
            f"wasserstein pricing self-check failed: model {model_value}, recomputed {v_true}"
        )
    return PricingResult(scenario, v_true, model_value, q_value=q, pi=pis)


def _candidate_scenarios(space, extra=(), cap=2 ** 20):
    if isinstance(space, BoxSpace):
        pool = list(space.vertices(cap=cap))
    else:
        pool = list(space.members(cap=cap))
    for s in extra:
        if all(np.max(np.abs(s.array - t.array), initial=0.0) > 1e-12 for t in pool):
            pool.append(s)
    return pool


def _price_by_enumeration(problem, x, target, alpha_i, beta, weight, anchor_s, space,
                          ambiguity, tol):
    # exact on the candidate set; used for the L2 norm where no linear encoding exists
    best = None
    for s in _candidate_scenarios(space, extra=(anchor_s,)):
        if target == FEASIBILITY:
            q = evaluate_feasibility_recourse(problem, x, s, tol).value
        else:
            res = evaluate_recourse(problem, x, s, tol)
            if not res.feasible:
                raise DualUnboundedError(
                    "recourse infeasible at priced scenario; run the feasibility phase first"
                )
            q = res.value
        val = weight * (q - beta * ambiguity.distance(s, anchor_s)) - alpha_i
        if best is None or val > best[0] + 1e-12:
            best = (val, s, q)
    val, s, q = best
    return PricingResult(s, val, val, q_value=q)


class MilpPricer:
    """Default pricing backend: dualized recourse + binarized scenarios."""

    def __init__(self, m_pi: float | None = None):
        self.m_pi = m_pi

    def price_moment(self, problem, x, target, alpha, beta, space, ambiguity, tol):
        return psp_solve(problem, x, target, (alpha, beta), space, ambiguity, tol, self.m_pi)

    def price_wasserstein(self, problem, x, target, alphas, beta, i, space, ambiguity, tol):
        return psp_wasserstein_solve(problem, x, target, (alphas, beta), i, space, ambiguity,
                                     tol, self.m_pi)


class EnumerationPricer:
    """Prices by direct evaluation over the finite candidate set; exact for
    discrete spaces and for box spaces with affine psi, and independent of
    the duality/linearization chain (useful as a cross-check)."""

    def __init__(self, cap: int = 2 ** 16):
        self.cap = cap

    def price_moment(self, problem, x, target, alpha, beta, space, ambiguity, tol):
        best = None
        beta = np.maximum(np.asarray(beta, dtype=float).reshape(-1), 0.0)
        for s in _candidate_scenarios(space, cap=self.cap):
            if target == FEASIBILITY:
                q = evaluate_feasibility_recourse(problem, x, s, tol).value
            else:
                res = evaluate_recourse(problem, x, s, tol)
                if not res.feasible:
                    raise DualUnboundedError(
                        "recourse infeasible at priced scenario; run the feasibility phase first"
                    )
                q = res.value
            val = q - alpha - float(beta @ ambiguity.psi_values(s))
            if best is None or val > best[0] + 1e-12:
                best = (val, s, q)
        val, s, q = best
        return PricingResult(s, val, val, q_value=q)

    def price_wasserstein(self, problem, x, target, alphas, beta, i, space, ambiguity, tol):
        anchor_s, weight = ambiguity.empirical[i]
        alpha_i = float(np.asarray(alphas).reshape(-1)[i])
        return _price_by_enumeration(problem, x, target, alpha_i, max(float(beta), 0.0),
                                     weight, anchor_s, space, ambiguity, tol)


def default_pricer() -> MilpPricer:
    return MilpPricer()


def psp_mixed_integer_solve(problem, x, target, pool, qvals, ambiguity: MixedIntegerMomentAmbiguity,
                            incumbent_eta: float, tol: Tolerances | None = None,
                            m_pi: float | None = None, m_beta: float | None = None) -> PricingResult:
    """Bilevel pricing over (xi, z): the inner pool LP is replaced by its KKT
    system with big-M complementary slackness, yielding one MILP."""
    tol = tol or Tolerances()
    n = len(pool)
    if n == 0:
        raise PricingError("mixed-integer pricing needs a nonempty pool")
    q = np.array([float(qvals[s]) for s in pool])
    spool = np.array([[float(ambiguity.psi[i] @ s.array) for s in pool]
                      for i in range(ambiguity.num_rows)])  # (m, n)
    m_rows = ambiguity.num_rows
    qz = ambiguity.z_dimension

    if m_beta is None:
        m_beta = max(10.0, 10.0 * float(np.abs(q).max(initial=0.0)))
    psi_span = float(np.abs(spool).max(initial=0.0)) * m_rows
    alpha_lo = float(q.min()) - m_beta * psi_span - 1.0
    alpha_hi = float(q.max()) + m_beta * psi_span + 1.0
    m_rc = alpha_hi - alpha_lo + 2.0 * m_beta * psi_span + 2.0
    gamma_hi = ambiguity.gamma0 + np.maximum(ambiguity.gamma_z, 0.0).sum(axis=1)
    m_slack = np.maximum(gamma_hi - spool.min(axis=1, initial=0.0), 0.0) + 1.0

    model = LinearModel(MAX)
    p = model.add_vars(n, 0.0, 1.0, label="p")
    slack = [model.add_var(0.0, float(m_slack[i]), label=f"slack[{i}]") for i in range(m_rows)]
    alpha_hat = model.add_var(alpha_lo, alpha_hi, label="alpha")
    beta_hat = model.add_vars(m_rows, 0.0, m_beta, label="beta")
    rc = model.add_vars(n, 0.0, m_rc, label="rc")
    w = model.add_vars(m_rows, 0.0, 1.0, binary=True, label="w")
    v = model.add_vars(n, 0.0, 1.0, binary=True, label="v")
    z = model.add_vars(qz, 0.0, 1.0, binary=True, label="z")

    model.add_row({p[j]: 1.0 for j in range(n)}, EQ, 1.0)
    for i in range(m_rows):
        row = {p[j]: spool[i, j] for j in range(n)}
        row[slack[i]] = 1.0
        for k in range(qz):
            if ambiguity.gamma_z[i, k] != 0.0:
                row[z[k]] = -ambiguity.gamma_z[i, k]
        model.add_row(row, EQ, float(ambiguity.gamma0[i]))
    for j in range(n):
        row = {alpha_hat: 1.0, rc[j]: -1.0}
        for i in range(m_rows):
            if spool[i, j] != 0.0:
                row[beta_hat[i]] = spool[i, j]
        model.add_row(row, EQ, float(q[j]))
    for i in range(m_rows):
        model.add_row({beta_hat[i]: 1.0, w[i]: -m_beta}, LE, 0.0)
        model.add_row({slack[i]: 1.0, w[i]: float(m_slack[i])}, LE, float(m_slack[i]))
    for j in range(n):
        model.add_row({p[j]: 1.0, v[j]: -1.0}, LE, 0.0)
        model.add_row({rc[j]: 1.0, v[j]: m_rc}, LE, m_rc)
    for krow in range(ambiguity.z_a.shape[0]):
        row = {z[k]: float(ambiguity.z_a[krow, k]) for k in range(qz)
               if ambiguity.z_a[krow, k] != 0.0}
        model.add_row(row, ambiguity.z_senses[krow], float(ambiguity.z_rhs[krow]))

    base, terms = _encode_xi(model, problem.space, None)
    pi, rhsx, m_pi = _recourse_dual_block(model, problem, x, target, m_pi)
    h = problem.recourse.h

    # reduced-cost expression: Q(xi) - alpha - sum_i beta_i (Psi xi)_i
    obj = {}
    for r, val in enumerate(rhsx - h @ base):
        obj[pi[r]] = float(val)
    obj[alpha_hat] = -1.0
    psi_base = ambiguity.psi @ base
    for i in range(m_rows):
        if psi_base[i] != 0.0:
            obj[beta_hat[i]] = obj.get(beta_hat[i], 0.0) - float(psi_base[i])
    for t in terms:
        for r in range(h.shape[0]):
            hr = h[r, t.coord]
            if hr != 0.0:
                y = _mccormick(model, t.var, pi[r], m_pi)
                obj[y] = obj.get(y, 0.0) - hr * t.delta
        for i in range(m_rows):
            coeff = float(ambiguity.psi[i, t.coord]) * t.delta
            if coeff != 0.0:
                y = _mccormick(model, t.var, beta_hat[i], m_beta)
                obj[y] = obj.get(y, 0.0) - coeff
    for var, coef in obj.items():
        model.set_cost(var, coef)

    # valid inequality: pool value + new reduced cost must reach the incumbent
    cut = {p[j]: float(q[j]) for j in range(n)}
    for var, coef in obj.items():
        cut[var] = cut.get(var, 0.0) + coef
    model.add_row(cut, GE, float(incumbent_eta) - 1e-7 * (1.0 + abs(incumbent_eta)))

    milp = model.build_milp()
    sol = solve_milp(milp, tol=tol.lp(), int_tol=tol.int_tol, want_duals=False)
    if sol.status == MilpStatus.INFEASIBLE:
        # the incumbent cut removed every improving column: pricing is done
        centroid = pool[0]
        return PricingResult(centroid, -np.inf, -np.inf)
    if sol.status != MilpStatus.OPTIMAL:
        raise PricingError(f"mixed-integer pricing MILP ended with status {sol.status}")

    kind = "binary" if isinstance(problem.space, BinaryCardinalitySpace) else "continuous"
    scenario = _xi_from(base, terms, sol.x, kind)
    z_star = np.round(np.array([sol.x[j] for j in z]))
    beta_star = np.array([sol.x[j] for j in beta_hat])
    alpha_star = float(sol.x[alpha_hat])
    pis = np.array([sol.x[j] for j in pi])
    model_value = float(sum(model._cost[j] * sol.x[j] for j in obj))

    if float(np.max(beta_star, initial=0.0)) >= 0.99 * m_beta or (
        target == OPTIMALITY and float(np.max(pis, initial=0.0)) >= 0.99 * m_pi
    ):
        warnings.warn(
            "mixed-integer pricing dual within 1% of its big-M bound",
            BigMViolationWarning,
            stacklevel=2,
        )

    qv, _ = _true_reduced_cost(problem, x, target, scenario, tol)
    v_true = qv - alpha_star - float(beta_star @ (ambiguity.psi @ scenario.array))
    scale = 1.0 + abs(v_true) + abs(model_value)
    if abs(v_true - model_value) > 1e-6 * scale:
        raise PricingError(
            f"mixed-integer pricing self-check failed: model {model_value}, recomputed {v_true}"
        )
    return PricingResult(scenario, v_true, model_value, z_star=z_star, q_value=qv, pi=pis)


def hybrid_cg_mixed_integer(problem, x, target, ambiguity: MixedIntegerMomentAmbiguity,
                            pool_init=None, tol: Tolerances | None = None, pricer=None,
                            iteration_limit: int = 200):
    """Alternate plain column generation on P(z) with bilevel pricing over z.

    For the current z the moment-set CG runs until its reduced cost hits
    zero; the bilevel pricing MILP then looks for a (xi, z) pair that can
    still improve the pool-restricted value. The loop ends when none
    exists, and the pool MILP value over all z is returned.
    """
    from .model import dedup_add
    from .wcev import (
        InfeasibleAmbiguityError,
        PmpInfeasibleError,
        QCache,
        WcevResult,
        _cg_moment,
        _screen,
        pmp_mixed_integer_build,
        seed_pool,
    )

    tol = tol or Tolerances()
    pricer = pricer or default_pricer()
    q = QCache(problem, x, target, tol)
    pool: list[Scenario] = []
    for s in pool_init or []:
        dedup_add(pool, s, tol.dedup_tol)

    z_list = ambiguity.enumerate_z()
    z_cur = None
    if not pool:
        for z in z_list:
            try:
                for s in seed_pool(problem.space, ambiguity.moment_for_z(z), tol):
                    dedup_add(pool, s, tol.dedup_tol)
                z_cur = z
                break
            except InfeasibleAmbiguityError:
                continue
        if z_cur is None:
            raise InfeasibleAmbiguityError("no z admits a distribution over the sample space")

    generated: list[Scenario] = []
    switches = 0
    total_inner = 0
    for _ in range(iteration_limit):
        if z_cur is not None:
            try:
                inner = _cg_moment(problem, x, target, ambiguity.moment_for_z(z_cur), pool,
                                   tol, pricer, iteration_limit)
                total_inner += inner.iterations
                for s in inner.pool:
                    dedup_add(pool, s, tol.dedup_tol)
                generated.extend(inner.generated)
            except PmpInfeasibleError:
                pass  # this z cannot be supported by the pool; the pool MILP picks another

        active = [s for s in pool if q(s) is not None]
        if not active:
            raise PmpInfeasibleError("every pool scenario has infeasible recourse")
        milp_prob, pvars = pmp_mixed_integer_build(active, q, ambiguity)
        sol = solve_milp(milp_prob, tol=tol.lp(), int_tol=tol.int_tol, want_duals=False)
        if sol.status == MilpStatus.INFEASIBLE:
            raise PmpInfeasibleError("pool cannot support a distribution for any z")
        if sol.status != MilpStatus.OPTIMAL:
            raise PricingError(f"pool MILP over z ended with status {sol.status}")
        eta = sol.objective
        z_star = np.round(np.array([sol.x[j] for j in pvars["z"]]))
        probs = np.array([sol.x[j] for j in pvars["p"]])

        res = psp_mixed_integer_solve(problem, x, target, active, q, ambiguity, eta, tol)
        eps = tol.cg_eps * (1.0 + abs(eta))
        done = res.v_star <= eps
        if not done and not dedup_add(pool, res.scenario, tol.dedup_tol):
            warnings.warn("mixed-integer CG stalled on a duplicate scenario", stacklevel=2)
            done = True
        if done:
            dist = _screen(active, probs)
            return WcevResult(
                value=float(eta), distribution=dist, alpha=None, beta=None,
                pool=list(pool), iterations=total_inner + switches,
                v_star=max(res.v_star, 0.0), generated=generated, z_star=z_star,
                stalled=res.v_star > eps,
            )
        generated.append(res.scenario)
        z_cur = res.z_star
        switches += 1
    raise PricingError("mixed-integer CG iteration limit reached")
