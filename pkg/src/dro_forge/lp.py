"""Dense two-phase simplex returning primal solutions and dual prices.

General bounds are normalized to shifted nonnegative variables (finite
upper bounds become explicit rows), right-hand sides are scaled
nonnegative, and the resulting equality system is solved by a revised
simplex that keeps an explicit basis inverse. Dantzig pricing runs until
a degeneracy budget is exhausted, then Bland's rule takes over to rule
out cycling.

Dual prices follow the shadow-price convention: ``duals[i]`` is the
marginal change of the reported objective per unit of ``rhs[i]``, so
duals of ``<=`` rows in a maximization problem are nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

MIN = "min"
MAX = "max"
LE = "<="
EQ = "="
GE = ">="

_SENSES = (MIN, MAX)
_ROW_SENSES = (LE, EQ, GE)

_REFACTOR_EVERY = 60


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class LpError(Exception):
    pass


class DimensionMismatchError(LpError):
    pass


class NumericalBreakdownError(LpError):
    pass


@dataclass(frozen=True)
class LpTolerances:
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    pivot_tol: float = 1e-10
    max_iterations: int = 0  # 0 selects an automatic budget


@dataclass(frozen=True, eq=False)
class LpProblem:
    """Dense LP in the form  opt c.x  s.t.  A x (<=,=,>=) b,  l <= x <= u."""

    sense: str
    cost: np.ndarray
    a: np.ndarray
    row_senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise DimensionMismatchError(f"unknown objective sense {self.sense!r}")
        cost = np.asarray(self.cost, dtype=float).reshape(-1)
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2:
            if a.size == 0:
                a = np.zeros((0, cost.size))
            elif a.size % max(cost.size, 1) == 0 and cost.size:
                a = a.reshape((-1, cost.size))
            else:
                raise DimensionMismatchError("constraint matrix shape does not match the cost vector")
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        senses = tuple(self.row_senses)
        m, n = a.shape
        if cost.size != n:
            raise DimensionMismatchError(f"cost has {cost.size} entries for {n} columns")
        if rhs.size != m or len(senses) != m:
            raise DimensionMismatchError(f"{m} rows but {rhs.size} rhs / {len(senses)} senses")
        if lower.size != n or upper.size != n:
            raise DimensionMismatchError("bound vectors do not match variable count")
        for s in senses:
            if s not in _ROW_SENSES:
                raise DimensionMismatchError(f"unknown row sense {s!r}")
        if np.any(lower > upper + 1e-12):
            raise DimensionMismatchError("lower bound above upper bound")
        if not (np.all(np.isfinite(cost)) and np.all(np.isfinite(a)) and np.all(np.isfinite(rhs))):
            raise DimensionMismatchError("cost, matrix and rhs must be finite")
        for name, arr in (("cost", cost), ("a", a), ("rhs", rhs), ("lower", lower), ("upper", upper)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "row_senses", senses)

    @property
    def num_rows(self) -> int:
        return self.a.shape[0]

    @property
    def num_cols(self) -> int:
        return self.a.shape[1]

    @classmethod
    def build(cls, sense, cost, a, row_senses, rhs, lower=None, upper=None) -> "LpProblem":
        """Construct with the usual LP defaults l=0, u=+inf."""
        cost = np.asarray(cost, dtype=float).reshape(-1)
        n = cost.size
        if lower is None:
            lower = np.zeros(n)
        if upper is None:
            upper = np.full(n, np.inf)
        a = np.asarray(a, dtype=float)
        if a.size == 0:
            a = np.zeros((len(tuple(row_senses)), n))
        elif a.ndim == 1:
            a = a.reshape(1, -1)
        return cls(sense, cost, a, tuple(row_senses), rhs, lower, upper)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basis: tuple[int, ...] | None = None
    farkas: np.ndarray | None = None
    ray: np.ndarray | None = None
    iterations: int = 0


# variable transform kinds
_SHIFT = 0   # x = l + t
_MIRROR = 1  # x = u - t
_SPLIT = 2   # x = t+ - t-


class _CompForm:
    """min c.t  s.t.  E t = b, t >= 0, built from an LpProblem."""

    def __init__(self, problem: LpProblem):
        m, n = problem.a.shape
        self.problem = problem
        self.sign = 1.0 if problem.sense == MIN else -1.0

        self.var_map = []  # per original var: (kind, col[, col2]) with shift constant
        cols = []          # structural columns of the row space (original rows only)
        costs = []
        rhs = problem.rhs.astype(float).copy()
        bound_specs = []   # (structural col index, width) rows t <= width

        for j in range(n):
            lj, uj = problem.lower[j], problem.upper[j]
            aj = problem.a[:, j] if m else np.zeros(0)
            cj = self.sign * problem.cost[j]
            if np.isfinite(lj):
                k = len(cols)
                cols.append(aj.copy())
                costs.append(cj)
                rhs -= aj * lj
                self.var_map.append((_SHIFT, k, lj))
                if np.isfinite(uj):
                    bound_specs.append((k, uj - lj))
            elif np.isfinite(uj):
                k = len(cols)
                cols.append(-aj)
                costs.append(-cj)
                rhs -= aj * uj
                self.var_map.append((_MIRROR, k, uj))
            else:
                k = len(cols)
                cols.append(aj.copy())
                costs.append(cj)
                cols.append(-aj)
                costs.append(-cj)
                self.var_map.append((_SPLIT, k, k + 1))

        n_t = len(cols)
        m_total = m + len(bound_specs)
        body = np.zeros((m_total, n_t))
        if n_t and m:
            body[:m, :] = np.column_stack(cols)
        b_full = np.concatenate([rhs, np.array([w for _, w in bound_specs], dtype=float)])
        senses = list(problem.row_senses) + [LE] * len(bound_specs)
        for r, (k, _) in enumerate(bound_specs):
            body[m + r, k] = 1.0

        # scale rows to nonnegative rhs
        self.row_flip = np.ones(m_total)
        neg = b_full < 0
        self.row_flip[neg] = -1.0
        body[neg] *= -1.0
        b_full[neg] *= -1.0
        flip_sense = {LE: GE, GE: LE, EQ: EQ}
        senses = [flip_sense[s] if f < 0 else s for s, f in zip(senses, self.row_flip)]

        # slack / surplus columns; +1 slacks double as the initial basis
        slack_cols = []
        slack_of_row = {}
        for r, s in enumerate(senses):
            if s == LE:
                slack_of_row[r] = n_t + len(slack_cols)
                slack_cols.append((r, 1.0))
            elif s == GE:
                slack_cols.append((r, -1.0))
        n_s = len(slack_cols)
        self.n_struct = n_t + n_s

        # artificials on rows without a +1 slack
        art_rows = [r for r in range(m_total) if r not in slack_of_row]
        n_a = len(art_rows)

        E = np.zeros((m_total, self.n_struct + n_a))
        E[:, :n_t] = body
        for k, (r, coef) in enumerate(slack_cols):
            E[r, n_t + k] = coef
        for k, r in enumerate(art_rows):
            E[r, self.n_struct + k] = 1.0
        self.E = np.asfortranarray(E)
        self.b = b_full
        self.n_t = n_t
        self.n_art = n_a
        self.cost_struct = np.concatenate([np.array(costs, dtype=float), np.zeros(n_s)])
        self.m_orig = m
        self.bound_specs = bound_specs

        basis = np.empty(m_total, dtype=int)
        for r in range(m_total):
            basis[r] = slack_of_row.get(r, -1)
        nxt = self.n_struct
        for r in art_rows:
            basis[r] = nxt
            nxt += 1
        self.basis0 = basis

    def x_from_t(self, t: np.ndarray) -> np.ndarray:
        x = np.zeros(self.problem.num_cols)
        for j, spec in enumerate(self.var_map):
            if spec[0] == _SHIFT:
                x[j] = spec[2] + t[spec[1]]
            elif spec[0] == _MIRROR:
                x[j] = spec[2] - t[spec[1]]
            else:
                x[j] = t[spec[1]] - t[spec[2]]
        return x

    def dx_from_dt(self, dt: np.ndarray) -> np.ndarray:
        dx = np.zeros(self.problem.num_cols)
        for j, spec in enumerate(self.var_map):
            if spec[0] == _SHIFT:
                dx[j] = dt[spec[1]]
            elif spec[0] == _MIRROR:
                dx[j] = -dt[spec[1]]
            else:
                dx[j] = dt[spec[1]] - dt[spec[2]]
        return dx

    def orig_duals(self, y_comp: np.ndarray) -> np.ndarray:
        m = self.m_orig
        return self.sign * self.row_flip[:m] * y_comp[:m]


def _refactor(E, basis):
    B = E[:, basis]
    try:
        return np.linalg.inv(B)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdownError("singular basis during refactorization") from exc


class _Unbounded(Exception):
    def __init__(self, entering, direction):
        self.entering = entering
        self.direction = direction


def _simplex(E, b, c, basis, allowed, tol: LpTolerances):
    """Core loop: min c.t over E t = b, t >= 0 starting from a feasible basis.

    Returns (basis, B_inv, iterations). Raises _Unbounded for a feasible
    ray and NumericalBreakdownError when the pivot budget runs out.
    """
    m, n = E.shape
    if m == 0:
        return basis, np.zeros((0, 0)), 0
    B_inv = _refactor(E, basis)
    budget = tol.max_iterations or (2000 + 200 * (m + n))
    bland_after = 3 * (m + n)
    degenerate = 0
    bland = False
    mask_base = allowed.copy()

    for it in range(budget):
        if it and it % _REFACTOR_EVERY == 0:
            B_inv = _refactor(E, basis)
        xb = B_inv @ b
        y = c[basis] @ B_inv
        rc = c - y @ E
        rc[basis] = 0.0
        cand = mask_base & (rc < -tol.opt_tol)
        if not cand.any():
            return basis, B_inv, it
        if bland:
            e = int(np.flatnonzero(cand)[0])
        else:
            scored = np.where(cand, rc, np.inf)
            e = int(np.argmin(scored))
        d = B_inv @ E[:, e]
        pos = d > tol.pivot_tol
        if not pos.any():
            dt = np.zeros(n)
            dt[e] = 1.0
            dt[basis] = -d
            raise _Unbounded(e, dt)
        ratios = np.where(pos, xb / np.where(pos, d, 1.0), np.inf)
        rmin = max(float(ratios.min()), 0.0)
        tie = pos & (ratios <= rmin + 1e-12)
        tie_rows = np.flatnonzero(tie)
        r = int(tie_rows[np.argmin(basis[tie_rows])])
        if rmin <= 1e-12:
            degenerate += 1
            if degenerate > bland_after:
                bland = True
        piv = d[r]
        if piv <= tol.pivot_tol:
            raise NumericalBreakdownError("pivot below pivot_tol after Bland fallback")
        row_r = B_inv[r] / piv
        d_adj = d.copy()
        d_adj[r] = 0.0
        B_inv -= np.outer(d_adj, row_r)
        B_inv[r] = row_r
        basis[r] = e
    raise NumericalBreakdownError(f"simplex iteration budget {budget} exhausted")


def _drive_out_artificials(comp: _CompForm, basis, B_inv, tol: LpTolerances):
    """Pivot zero-level artificials out of the basis; drop redundant rows."""
    E, b = comp.E, comp.b
    keep = np.ones(E.shape[0], dtype=bool)
    changed = False
    for r in range(E.shape[0]):
        if basis[r] < comp.n_struct:
            continue
        w = B_inv[r] @ E[:, : comp.n_struct]
        pivots = np.flatnonzero(np.abs(w) > 1e-9)
        pivots = [j for j in pivots if j not in set(basis.tolist())]
        if pivots:
            e = int(pivots[0])
            piv = w[e]
            row_r = B_inv[r] / piv
            d = B_inv @ E[:, e]
            d_adj = d.copy()
            d_adj[r] = 0.0
            B_inv -= np.outer(d_adj, row_r)
            B_inv[r] = row_r
            basis[r] = e
        else:
            keep[r] = False
            changed = True
    if changed:
        comp.E = np.asfortranarray(comp.E[keep])
        comp.b = comp.b[keep]
        comp._kept_rows = np.flatnonzero(keep)
        basis = basis[keep]
        B_inv = _refactor(comp.E, basis)
    else:
        comp._kept_rows = np.arange(E.shape[0])
    return basis, B_inv


def solve_lp(problem: LpProblem, tol: LpTolerances | None = None) -> LpSolution:
    """Solve a dense LP; statuses are optimal / infeasible / unbounded.

    Optimal solutions carry primal values, the objective in the problem's
    own sense, row duals (shadow prices) and per-variable reduced costs.
    Infeasible problems carry a Farkas-style row multiplier, unbounded
    ones a feasible improving ray.
    """
    tol = tol or LpTolerances()
    comp = _CompForm(problem)
    n_c = comp.E.shape[1]
    basis = comp.basis0.copy()
    iterations = 0

    if comp.E.shape[0] == 0:
        # no rows at all: each shifted variable sits at zero unless improving
        if np.any(comp.cost_struct[: comp.n_t] < -tol.opt_tol):
            j = int(np.argmin(comp.cost_struct[: comp.n_t]))
            dt = np.zeros(n_c)
            dt[j] = 1.0
            return LpSolution(status=LpStatus.UNBOUNDED, ray=comp.dx_from_dt(dt[: comp.n_t]))
        t = np.zeros(comp.n_t)
        x = comp.x_from_t(t)
        return LpSolution(
            status=LpStatus.OPTIMAL, x=x, objective=float(problem.cost @ x),
            duals=np.zeros(0), reduced_costs=problem.cost.copy(), basis=(),
        )

    # phase 1
    if comp.n_art:
        c1 = np.zeros(n_c)
        c1[comp.n_struct:] = 1.0
        allowed = np.ones(n_c, dtype=bool)
        try:
            basis, B_inv, it1 = _simplex(comp.E, comp.b, c1, basis, allowed, tol)
        except _Unbounded as exc:  # pragma: no cover - phase 1 is bounded below by 0
            raise NumericalBreakdownError("phase-1 reported unbounded") from exc
        iterations += it1
        xb = B_inv @ comp.b
        art_level = float(c1[basis] @ xb)
        scale = 1.0 + float(np.abs(comp.b).max(initial=0.0))
        if art_level > tol.feas_tol * scale:
            y1 = c1[basis] @ B_inv
            m = comp.m_orig
            farkas = comp.row_flip[:m] * y1[:m]
            return LpSolution(status=LpStatus.INFEASIBLE, farkas=farkas, iterations=iterations)
        basis, B_inv = _drive_out_artificials(comp, basis, B_inv, tol)
    else:
        B_inv = _refactor(comp.E, basis)

    # phase 2
    c2 = np.zeros(comp.E.shape[1])
    c2[: comp.n_struct] = comp.cost_struct
    allowed = np.zeros(comp.E.shape[1], dtype=bool)
    allowed[: comp.n_struct] = True
    try:
        basis, B_inv, it2 = _simplex(comp.E, comp.b, c2, basis, allowed, tol)
    except _Unbounded as exc:
        ray = comp.dx_from_dt(exc.direction[: comp.n_t])
        return LpSolution(status=LpStatus.UNBOUNDED, ray=ray, iterations=iterations)
    iterations += it2

    xb = B_inv @ comp.b
    t = np.zeros(comp.E.shape[1])
    t[basis] = np.maximum(xb, 0.0)
    x = comp.x_from_t(t[: comp.n_t])
    y_comp_kept = c2[basis] @ B_inv
    kept = getattr(comp, "_kept_rows", np.arange(comp.E.shape[0]))
    y_comp = np.zeros(len(comp.row_flip))
    y_comp[kept] = y_comp_kept
    duals = comp.orig_duals(y_comp)
    reduced = problem.cost - problem.a.T @ duals if problem.num_rows else problem.cost.copy()
    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        objective=float(problem.cost @ x),
        duals=duals,
        reduced_costs=reduced,
        basis=tuple(int(v) for v in basis),
        iterations=iterations,
    )


def primal_residual(problem: LpProblem, x: np.ndarray) -> float:
    """Largest violation of rows and bounds at x."""
    res = 0.0
    if problem.num_rows:
        ax = problem.a @ x
        for i, s in enumerate(problem.row_senses):
            if s == LE:
                res = max(res, float(ax[i] - problem.rhs[i]))
            elif s == GE:
                res = max(res, float(problem.rhs[i] - ax[i]))
            else:
                res = max(res, abs(float(ax[i] - problem.rhs[i])))
    lo = problem.lower - x
    hi = x - problem.upper
    res = max(res, float(np.max(lo, initial=0.0)), float(np.max(hi, initial=0.0)))
    return res


def dual_objective(problem: LpProblem, sol: LpSolution) -> float:
    """y.b plus bound-dual contributions; matches the primal objective at optimality."""
    val = float(sol.duals @ problem.rhs) if problem.num_rows else 0.0
    rc = sol.reduced_costs
    sgn = 1.0 if problem.sense == MIN else -1.0
    for j in range(problem.num_cols):
        r = sgn * rc[j]
        if r > 0 and np.isfinite(problem.lower[j]):
            val += rc[j] * problem.lower[j]
        elif r < 0 and np.isfinite(problem.upper[j]):
            val += rc[j] * problem.upper[j]
    return val
