"""Problem and ambiguity-set data model shared by all algorithms.

Everything here is immutable after construction; scenario identity is
exact tuple equality while approximate deduplication (L-infinity within
``dedup_tol``) is applied wherever pools are grown.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .lp import GE, MIN, LpProblem, LpStatus, LpTolerances, solve_lp

CONTINUOUS = "continuous"
BINARY = "binary"

L1 = "l1"
L2 = "l2"


class ModelValidationError(Exception):
    pass


@dataclass(frozen=True)
class Tolerances:
    """Numeric knobs used across the solver stack.

    ``cg_eps`` is a relative pricing tolerance: column generation stops
    once the best reduced cost drops below cg_eps * (1 + |incumbent|).
    ``outer_tol`` is the absolute gap target of the outer loop and
    ``outer_rel`` an optional relative one (both are honored).
    """

    cg_eps: float = 1e-6
    outer_tol: float = 1e-6
    outer_rel: float = 0.0
    feas_eps: float = 1e-6
    big_m: float = 1e4
    feas_tol: float = 1e-7
    opt_tol: float = 1e-7
    int_tol: float = 1e-6
    pivot_tol: float = 1e-10
    dedup_tol: float = 1e-7

    def lp(self) -> LpTolerances:
        return LpTolerances(self.feas_tol, self.opt_tol, self.pivot_tol)

    def __post_init__(self):
        for name in ("cg_eps", "outer_tol", "feas_eps", "big_m", "feas_tol",
                     "opt_tol", "int_tol", "pivot_tol", "dedup_tol"):
            if getattr(self, name) <= 0:
                raise ModelValidationError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class Scenario:
    values: tuple[float, ...]
    kind: str = CONTINUOUS

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if self.kind not in (CONTINUOUS, BINARY):
            raise ModelValidationError(f"unknown scenario kind {self.kind!r}")
        if self.kind == BINARY:
            for v in vals:
                if min(abs(v), abs(v - 1.0)) > 1e-6:
                    raise ModelValidationError("binary scenario has non 0/1 coordinate")
            vals = tuple(round(v) * 1.0 for v in vals)
        object.__setattr__(self, "values", vals)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.values)

    def __len__(self):
        return len(self.values)


def scenario_distance(a: Scenario, b: Scenario) -> float:
    return float(np.max(np.abs(a.array - b.array), initial=0.0))


def dedup_add(pool: list[Scenario], s: Scenario, dedup_tol: float) -> bool:
    """Append s unless an L-infinity neighbor within dedup_tol already exists."""
    for existing in pool:
        if scenario_distance(existing, s) <= dedup_tol:
            return False
    pool.append(s)
    return True


@dataclass(frozen=True)
class BoxSpace:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ModelValidationError("box bounds differ in length")
        if any(l > u for l, u in zip(lo, hi)):
            raise ModelValidationError("box has lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def vertex_count(self) -> int:
        return 2 ** sum(1 for l, u in zip(self.lower, self.upper) if u > l)

    def vertices(self, cap: int | None = None):
        """Deterministic vertex stream (lexicographic low/high per coordinate)."""
        if cap is not None and self.vertex_count > cap:
            raise ModelValidationError(
                f"box has {self.vertex_count} vertices, above the cap {cap}"
            )
        ranges = [(l,) if u <= l else (l, u) for l, u in zip(self.lower, self.upper)]
        for combo in itertools.product(*ranges):
            yield Scenario(combo, CONTINUOUS)

    def centroid(self) -> Scenario:
        return Scenario(tuple((l + u) / 2.0 for l, u in zip(self.lower, self.upper)))

    def contains(self, s: Scenario, tol: float = 1e-7) -> bool:
        v = s.array
        return bool(np.all(v >= np.array(self.lower) - tol) and np.all(v <= np.array(self.upper) + tol))


@dataclass(frozen=True)
class BinaryCardinalitySpace:
    dimension: int
    max_ones: int

    def __post_init__(self):
        if not (0 <= self.max_ones <= self.dimension):
            raise ModelValidationError("need 0 <= max_ones <= dimension")

    @property
    def size(self) -> int:
        from math import comb

        return sum(comb(self.dimension, r) for r in range(self.max_ones + 1))

    def members(self, cap: int | None = None):
        if cap is not None and self.size > cap:
            raise ModelValidationError(f"{self.size} members exceed the cap {cap}")
        for r in range(self.max_ones + 1):
            for ones in itertools.combinations(range(self.dimension), r):
                v = [0.0] * self.dimension
                for i in ones:
                    v[i] = 1.0
                yield Scenario(tuple(v), BINARY)

    def centroid(self) -> Scenario:
        return Scenario((0.0,) * self.dimension, BINARY)

    def contains(self, s: Scenario, tol: float = 1e-6) -> bool:
        v = s.array
        if np.any(np.minimum(np.abs(v), np.abs(v - 1.0)) > tol):
            return False
        return float(v.sum()) <= self.max_ones + tol


SampleSpace = BoxSpace | BinaryCardinalitySpace


@dataclass(frozen=True)
class DiscreteDistribution:
    scenarios: tuple[Scenario, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        scen = tuple(self.scenarios)
        probs = tuple(float(p) for p in self.probabilities)
        if len(scen) != len(probs):
            raise ModelValidationError("scenario and probability counts differ")
        if any(p < -1e-12 for p in probs):
            raise ModelValidationError("negative probability")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ModelValidationError(f"probabilities sum to {sum(probs)}, not 1")
        for i in range(len(scen)):
            for j in range(i + 1, len(scen)):
                if scenario_distance(scen[i], scen[j]) <= 1e-7:
                    raise ModelValidationError("duplicate scenarios in distribution")
        object.__setattr__(self, "scenarios", scen)
        object.__setattr__(self, "probabilities", probs)

    def expectation(self, fn) -> float:
        return float(sum(p * fn(s) for s, p in zip(self.scenarios, self.probabilities)))

    @property
    def support_size(self) -> int:
        return len(self.scenarios)


@dataclass(frozen=True)
class MomentAmbiguity:
    """E[psi_i(xi)] <= gamma_i with affine psi_i(xi) = Psi[i] . xi."""

    psi: np.ndarray  # (m, n_xi)
    gamma: np.ndarray  # (m,)

    def __post_init__(self):
        psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        gamma = np.asarray(self.gamma, dtype=float).reshape(-1)
        if psi.shape[0] != gamma.size:
            raise ModelValidationError("psi rows and gamma length differ")
        if psi.shape[0] < 1:
            raise ModelValidationError("moment set needs at least one row")
        psi.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "gamma", gamma)

    @property
    def num_rows(self) -> int:
        return self.psi.shape[0]

    def psi_values(self, s: Scenario) -> np.ndarray:
        return self.psi @ s.array


@dataclass(frozen=True)
class WassersteinAmbiguity:
    empirical: tuple[tuple[Scenario, float], ...]
    radius: float
    norm: str = L1

    def __post_init__(self):
        emp = tuple((s, float(w)) for s, w in self.empirical)
        if not emp:
            raise ModelValidationError("empty empirical set")
        if self.norm not in (L1, L2):
            raise ModelValidationError(f"unsupported norm {self.norm!r}")
        if self.radius <= 0:
            raise ModelValidationError("radius must be positive")
        total = sum(w for _, w in emp)
        if abs(total - 1.0) > 1e-9 or any(w <= 0 for _, w in emp):
            raise ModelValidationError("empirical weights must be positive and sum to 1")
        object.__setattr__(self, "empirical", emp)

    @property
    def num_samples(self) -> int:
        return len(self.empirical)

    def distance(self, a: Scenario, b: Scenario) -> float:
        d = a.array - b.array
        if self.norm == L1:
            return float(np.abs(d).sum())
        return float(np.sqrt((d * d).sum()))


@dataclass(frozen=True)
class MixedIntegerMomentAmbiguity:
    """E[Psi xi] <= gamma0 + Gamma z over binary z restricted to Z.

    Z is given by linear rows  z_a @ z (sense) z_rhs  on z in {0, 1}^q.
    """

    psi: np.ndarray          # (m, n_xi)
    gamma0: np.ndarray       # (m,)
    gamma_z: np.ndarray      # (m, q)
    z_a: np.ndarray          # (k, q)
    z_senses: tuple[str, ...]
    z_rhs: np.ndarray        # (k,)

    def __post_init__(self):
        psi = np.atleast_2d(np.asarray(self.psi, dtype=float))
        gamma0 = np.asarray(self.gamma0, dtype=float).reshape(-1)
        gamma_z = np.atleast_2d(np.asarray(self.gamma_z, dtype=float))
        z_a = np.atleast_2d(np.asarray(self.z_a, dtype=float)) if np.size(self.z_a) else np.zeros((0, gamma_z.shape[1]))
        z_rhs = np.asarray(self.z_rhs, dtype=float).reshape(-1)
        if psi.shape[0] != gamma0.size or gamma_z.shape[0] != gamma0.size:
            raise ModelValidationError("inconsistent moment rows")
        if z_a.shape[0] != z_rhs.size or len(self.z_senses) != z_rhs.size:
            raise ModelValidationError("inconsistent Z description")
        if z_a.shape[0] and z_a.shape[1] != gamma_z.shape[1]:
            raise ModelValidationError("Z constraint width differs from z dimension")
        for arr in (psi, gamma0, gamma_z, z_a, z_rhs):
            arr.setflags(write=False)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "gamma0", gamma0)
        object.__setattr__(self, "gamma_z", gamma_z)
        object.__setattr__(self, "z_a", z_a)
        object.__setattr__(self, "z_rhs", z_rhs)
        object.__setattr__(self, "z_senses", tuple(self.z_senses))
        if not self.enumerate_z(cap=2 ** 20):
            raise ModelValidationError("Z is empty")

    @property
    def num_rows(self) -> int:
        return self.psi.shape[0]

    @property
    def z_dimension(self) -> int:
        return self.gamma_z.shape[1]

    def z_feasible(self, z: np.ndarray) -> bool:
        if self.z_a.shape[0] == 0:
            return True
        vals = self.z_a @ z
        for v, s, r in zip(vals, self.z_senses, self.z_rhs):
            if s == "<=" and v > r + 1e-9:
                return False
            if s == ">=" and v < r - 1e-9:
                return False
            if s == "=" and abs(v - r) > 1e-9:
                return False
        return True

    def enumerate_z(self, cap: int = 2 ** 16) -> list[np.ndarray]:
        q = self.z_dimension
        if 2 ** q > cap:
            raise ModelValidationError(f"2^{q} z-vectors exceed the cap {cap}")
        out = []
        for bits in itertools.product((0.0, 1.0), repeat=q):
            z = np.array(bits)
            if self.z_feasible(z):
                out.append(z)
        return out

    def moment_for_z(self, z: np.ndarray) -> MomentAmbiguity:
        return MomentAmbiguity(self.psi, self.gamma0 + self.gamma_z @ z)


AmbiguitySpec = MomentAmbiguity | WassersteinAmbiguity | MixedIntegerMomentAmbiguity


@dataclass(frozen=True, eq=False)
class FirstStage:
    """Feasible set X: linear rows over mixed binary/continuous variables."""

    cost: np.ndarray
    a: np.ndarray
    row_senses: tuple[str, ...]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    binary_indices: tuple[int, ...]

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float).reshape(-1)
        a = np.atleast_2d(np.asarray(self.a, dtype=float)) if np.size(self.a) else np.zeros((0, cost.size))
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if a.shape != (rhs.size, cost.size) or len(self.row_senses) != rhs.size:
            raise ModelValidationError("inconsistent first-stage dimensions")
        if lower.size != cost.size or upper.size != cost.size:
            raise ModelValidationError("inconsistent first-stage bounds")
        for arr in (cost, a, rhs, lower, upper):
            arr.setflags(write=False)
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "row_senses", tuple(self.row_senses))
        object.__setattr__(self, "binary_indices", tuple(int(j) for j in self.binary_indices))

    @property
    def num_vars(self) -> int:
        return self.cost.size


@dataclass(frozen=True, eq=False)
class Recourse:
    """min c2.y  s.t.  B y >= b2 - A2 x - H xi,  y >= 0."""

    c2: np.ndarray
    b_matrix: np.ndarray  # (m_r, n_y)
    b2: np.ndarray        # (m_r,)
    a2: np.ndarray        # (m_r, n_x)
    h: np.ndarray         # (m_r, n_xi)

    def __post_init__(self):
        c2 = np.asarray(self.c2, dtype=float).reshape(-1)
        bm = np.atleast_2d(np.asarray(self.b_matrix, dtype=float))
        b2 = np.asarray(self.b2, dtype=float).reshape(-1)
        a2 = np.atleast_2d(np.asarray(self.a2, dtype=float))
        h = np.atleast_2d(np.asarray(self.h, dtype=float))
        m_r = bm.shape[0]
        if bm.shape[1] != c2.size or b2.size != m_r or a2.shape[0] != m_r or h.shape[0] != m_r:
            raise ModelValidationError("inconsistent recourse dimensions")
        for arr in (c2, bm, b2, a2, h):
            arr.setflags(write=False)
        object.__setattr__(self, "c2", c2)
        object.__setattr__(self, "b_matrix", bm)
        object.__setattr__(self, "b2", b2)
        object.__setattr__(self, "a2", a2)
        object.__setattr__(self, "h", h)

    @property
    def num_rows(self) -> int:
        return self.b_matrix.shape[0]

    @property
    def num_vars(self) -> int:
        return self.c2.size

    def rhs_for(self, x: np.ndarray, s: Scenario) -> np.ndarray:
        return self.b2 - self.a2 @ x - self.h @ s.array


@dataclass(frozen=True, eq=False)
class TwoStageProblem:
    first_stage: FirstStage
    recourse: Recourse
    space: SampleSpace
    ambiguity: AmbiguitySpec
    recourse_always_feasible: bool = False
    name: str = ""

    def __post_init__(self):
        fs, rc = self.first_stage, self.recourse
        if rc.a2.shape[1] != fs.num_vars:
            raise ModelValidationError("recourse A2 width differs from first-stage variables")
        n_xi = self.space.dimension if isinstance(self.space, BoxSpace) else self.space.dimension
        if rc.h.shape[1] != n_xi:
            raise ModelValidationError("recourse H width differs from the sample-space dimension")
        _check_recourse_bounded(rc)

    @property
    def xi_dimension(self) -> int:
        return self.recourse.h.shape[1]


def _check_recourse_bounded(rc: Recourse):
    """Reject models whose recourse can be unbounded below (needs Q > -inf)."""
    if np.all(rc.c2 >= 0):
        return
    # dual feasibility {pi >= 0 : B^T pi <= c2} nonempty certifies boundedness
    m_r = rc.num_rows
    probe = LpProblem.build(
        MIN,
        np.zeros(m_r),
        rc.b_matrix.T,
        tuple(["<="] * rc.num_vars),
        rc.c2,
    )
    sol = solve_lp(probe)
    if sol.status != LpStatus.OPTIMAL:
        raise ModelValidationError(
            "recourse objective can be unbounded below for some right-hand side"
        )


@dataclass
class RecourseResult:
    feasible: bool
    value: float | None
    y: np.ndarray | None = None
    duals: np.ndarray | None = None  # recourse-row duals pi (>= 0)


def evaluate_recourse(problem: TwoStageProblem, x: np.ndarray, s: Scenario,
                      tol: Tolerances | None = None) -> RecourseResult:
    """Q(x, xi): optimal recourse cost, with infeasibility as a status."""
    tol = tol or Tolerances()
    rc = problem.recourse
    lp = LpProblem.build(
        MIN, rc.c2, rc.b_matrix, tuple([GE] * rc.num_rows), rc.rhs_for(np.asarray(x, dtype=float), s)
    )
    sol = solve_lp(lp, tol.lp())
    if sol.status == LpStatus.INFEASIBLE:
        return RecourseResult(False, None)
    if sol.status != LpStatus.OPTIMAL:
        raise ModelValidationError("recourse LP unbounded; model violates boundedness")
    return RecourseResult(True, sol.objective, sol.x, sol.duals)


def evaluate_feasibility_recourse(problem: TwoStageProblem, x: np.ndarray, s: Scenario,
                                  tol: Tolerances | None = None) -> RecourseResult:
    """Minimal L1 slack making the recourse system feasible; 0 iff Q is finite."""
    tol = tol or Tolerances()
    rc = problem.recourse
    m_r, n_y = rc.num_rows, rc.num_vars
    cost = np.concatenate([np.zeros(n_y), np.ones(m_r)])
    a = np.hstack([rc.b_matrix, np.eye(m_r)])
    lp = LpProblem.build(
        MIN, cost, a, tuple([GE] * m_r), rc.rhs_for(np.asarray(x, dtype=float), s)
    )
    sol = solve_lp(lp, tol.lp())
    if sol.status != LpStatus.OPTIMAL:  # pragma: no cover - always feasible and bounded
        raise ModelValidationError("feasibility recourse failed to solve")
    return RecourseResult(True, max(sol.objective, 0.0), sol.x[:n_y], sol.duals)
