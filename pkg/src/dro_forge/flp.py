"""Facility-location testbed: seeded generators and two-stage encodings.

Sites are seeded uniform points on the [0, 100] square with Euclidean
unit service costs (synthetic stand-ins for the classical reliability
data sets). Random demand lives in a box around the nominal demand;
random disruptions knock out up to k of the opened facilities. Each
instance carries one of four ambiguity descriptions: first-moment budget,
Wasserstein ball (L1 or L2) around an empirical sample, or a mixed 0-1
moment set whose budget shifts with binary switches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    BinaryCardinalitySpace,
    BoxSpace,
    FirstStage,
    MixedIntegerMomentAmbiguity,
    ModelValidationError,
    MomentAmbiguity,
    Recourse,
    Scenario,
    TwoStageProblem,
    WassersteinAmbiguity,
)

VARIANT_DEMAND = "d"
VARIANT_DISRUPTION = "u"
AMB_MOMENT = "moment"
AMB_WASSERSTEIN = "wass"
AMB_WASSERSTEIN_L2 = "wass_l2"
AMB_MIXED_INTEGER = "mip"

_AMBIGUITIES = (AMB_MOMENT, AMB_WASSERSTEIN, AMB_WASSERSTEIN_L2, AMB_MIXED_INTEGER)


class InvalidSpecError(Exception):
    pass


@dataclass(frozen=True, eq=False)
class FlInstance:
    name: str
    seed: int
    variant: str
    capacitated: bool
    ambiguity_kind: str
    coords: np.ndarray          # (n, 2)
    cost: np.ndarray            # (n, n), zero diagonal
    demand: np.ndarray          # nominal demand per client
    fixed_cost: np.ndarray      # per facility
    capacity: np.ndarray        # per facility (may be inf)
    p: int
    rho: float
    demand_lower: np.ndarray | None = None
    demand_upper: np.ndarray | None = None
    k: int | None = None
    moment_bound: np.ndarray | None = None
    empirical: tuple | None = None     # ((values tuple, weight), ...)
    radius: float | None = None
    norm: str = "l1"
    mi_lower: np.ndarray | None = None
    mi_upper: np.ndarray | None = None
    mi_theta: float | None = None
    mi_z0: int | None = None

    def __post_init__(self):
        n = self.cost.shape[0]
        if self.cost.shape != (n, n) or np.any(np.abs(np.diag(self.cost)) > 1e-12):
            raise InvalidSpecError("service cost must be square with a zero diagonal")
        if np.any(self.cost < 0) or np.any(np.abs(self.cost - self.cost.T) > 1e-9):
            raise InvalidSpecError("service cost must be symmetric nonnegative")
        if not 1 <= self.p <= n:
            raise InvalidSpecError("facility count p must lie in [1, n]")
        if self.k is not None and not 0 <= self.k <= self.p - 1:
            raise InvalidSpecError("disruption budget k must satisfy k <= p - 1")
        if np.any(self.capacity <= 0):
            raise InvalidSpecError("capacities must be positive")

    @property
    def n_sites(self) -> int:
        return self.cost.shape[0]


def generate_instance(n_sites: int, seed: int, variant: str = VARIANT_DEMAND,
                      capacitated: bool = False, ambiguity: str = AMB_MOMENT,
                      p: int | None = None, k: int | None = None, r_frac: float = 0.65,
                      n_samples: int = 5, radius: float | None = None,
                      rho: float = 0.5, demand_box: tuple[float, float] = (0.5, 1.5),
                      mi_lower: float = 0.4, mi_upper: float = 0.8, mi_theta: float = 0.4,
                      mi_z0: int = 2) -> FlInstance:
    """Deterministic instance per seed; every random draw comes from one stream."""
    if n_sites < 2:
        raise InvalidSpecError("need at least two sites")
    if variant not in (VARIANT_DEMAND, VARIANT_DISRUPTION):
        raise InvalidSpecError(f"unknown variant {variant!r}")
    if ambiguity not in _AMBIGUITIES:
        raise InvalidSpecError(f"unknown ambiguity kind {ambiguity!r}")
    if ambiguity == AMB_MIXED_INTEGER and variant != VARIANT_DISRUPTION:
        raise InvalidSpecError("the mixed-integer ambiguity set is defined on disruptions")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 100.0, size=(n_sites, 2))
    diff = coords[:, None, :] - coords[None, :, :]
    cost = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(cost, 0.0)
    demand = rng.integers(5, 26, size=n_sites).astype(float)
    fixed = rng.uniform(50.0, 150.0, size=n_sites)
    if p is None:
        p = max(2, n_sites // 3)
    if not 1 <= p <= n_sites:
        raise InvalidSpecError("facility count p out of range")
    if variant == VARIANT_DISRUPTION:
        if k is None:
            k = max(1, min(p - 1, 2))
        if not 0 <= k <= p - 1:
            raise InvalidSpecError("disruption budget k must satisfy k <= p - 1")

    if capacitated:
        # capacity: total nominal demand of a random number of nearest sites
        cap = np.zeros(n_sites)
        hi = max(2, math.ceil(n_sites / 3))
        for j in range(n_sites):
            m_j = int(rng.integers(2, hi + 1))
            order = np.argsort(cost[j])
            cap[j] = demand[order[:m_j]].sum()
    else:
        cap = np.full(n_sites, np.inf)

    lo_f, hi_f = demand_box
    d_lower = lo_f * demand
    d_upper = hi_f * demand

    moment_bound = None
    empirical = None
    rad = None
    norm = "l1"
    mi = {}
    if ambiguity == AMB_MOMENT:
        if variant == VARIANT_DEMAND:
            v = rng.uniform(-0.5, 0.5, size=n_sites)
            moment_bound = demand * (1.0 + r_frac * v)
        else:
            v = rng.uniform(0.0, 1.0, size=n_sites)
            moment_bound = r_frac * v
    elif ambiguity in (AMB_WASSERSTEIN, AMB_WASSERSTEIN_L2):
        norm = "l2" if ambiguity == AMB_WASSERSTEIN_L2 else "l1"
        samples = []
        if variant == VARIANT_DEMAND:
            for _ in range(n_samples):
                samples.append(tuple(rng.uniform(d_lower, d_upper)))
            rad = radius if radius is not None else 2.0
        else:
            for _ in range(n_samples):
                u = np.zeros(n_sites)
                ones = rng.integers(0, k + 1)
                idx = rng.choice(n_sites, size=ones, replace=False)
                u[idx] = 1.0
                samples.append(tuple(u))
            rad = radius if radius is not None else 0.5
        empirical = tuple((s, 1.0 / n_samples) for s in samples)
    else:
        mi = dict(mi_lower=np.full(n_sites, mi_lower), mi_upper=np.full(n_sites, mi_upper),
                  mi_theta=mi_theta, mi_z0=mi_z0)

    tag = f"fl-{variant}-{'cap' if capacitated else 'uncap'}-{ambiguity}-n{n_sites}-s{seed}"
    return FlInstance(
        name=tag, seed=seed, variant=variant, capacitated=capacitated,
        ambiguity_kind=ambiguity, coords=coords, cost=cost, demand=demand,
        fixed_cost=fixed, capacity=cap, p=p, rho=rho,
        demand_lower=d_lower if variant == VARIANT_DEMAND else None,
        demand_upper=d_upper if variant == VARIANT_DEMAND else None,
        k=k if variant == VARIANT_DISRUPTION else None,
        moment_bound=moment_bound, empirical=empirical, radius=rad, norm=norm, **mi,
    )


def encode(instance: FlInstance) -> TwoStageProblem:
    """Two-stage form: open facilities and allocate nominal demand now, ship
    after the randomness lands; the recourse carries the scenario coupling."""
    n = instance.n_sites
    c = instance.cost
    d_bar = instance.demand
    n_alloc = n * n
    n_x = n + n_alloc  # y then x_ij (client-major)

    if instance.variant == VARIANT_DEMAND:
        big_f = float(instance.demand_upper.sum())
    else:
        big_f = float(d_bar.sum())
    cap_eff = np.where(np.isfinite(instance.capacity), instance.capacity, big_f)

    # first stage: sum_j x_ij >= dbar_i; sum_j y_j = p; sum_i x_ij <= F_j y_j
    rows, senses, rhs = [], [], []
    for i in range(n):
        row = np.zeros(n_x)
        row[n + i * n: n + (i + 1) * n] = 1.0
        rows.append(row)
        senses.append(">=")
        rhs.append(d_bar[i])
    row = np.zeros(n_x)
    row[:n] = 1.0
    rows.append(row)
    senses.append("=")
    rhs.append(float(instance.p))
    for j in range(n):
        row = np.zeros(n_x)
        row[n + j::n][:n] = 0.0
        for i in range(n):
            row[n + i * n + j] = 1.0
        row[j] = -cap_eff[j]
        rows.append(row)
        senses.append("<=")
        rhs.append(0.0)
    fs_cost = np.concatenate([instance.fixed_cost, instance.rho * c.reshape(-1)])
    first = FirstStage(
        cost=fs_cost, a=np.array(rows), row_senses=tuple(senses), rhs=np.array(rhs),
        lower=np.zeros(n_x), upper=np.concatenate([np.ones(n), np.full(n_alloc, np.inf)]),
        binary_indices=tuple(range(n)),
    )

    # recourse: ship w_ij after the scenario materializes
    n_w = n * n
    b_rows, b2, a2, h = [], [], [], []
    n_xi = n
    for i in range(n):  # demand rows
        row = np.zeros(n_w)
        row[i * n: (i + 1) * n] = 1.0
        b_rows.append(row)
        a2.append(np.zeros(n_x))
        hrow = np.zeros(n_xi)
        if instance.variant == VARIANT_DEMAND:
            b2.append(0.0)
            hrow[i] = -1.0
        else:
            b2.append(d_bar[i])
        h.append(hrow)
    for j in range(n):  # opening-linked capacity rows
        row = np.zeros(n_w)
        for i in range(n):
            row[i * n + j] = -1.0
        b_rows.append(row)
        b2.append(0.0)
        arow = np.zeros(n_x)
        arow[j] = cap_eff[j]
        a2.append(arow)
        h.append(np.zeros(n_xi))
    if instance.variant == VARIANT_DISRUPTION:
        for j in range(n):  # survival rows: sum_i w_ij <= F_j (1 - u_j)
            row = np.zeros(n_w)
            for i in range(n):
                row[i * n + j] = -1.0
            b_rows.append(row)
            b2.append(-cap_eff[j])
            a2.append(np.zeros(n_x))
            hrow = np.zeros(n_xi)
            hrow[j] = -cap_eff[j]
            h.append(hrow)
    recourse = Recourse((1.0 - instance.rho) * c.reshape(-1), np.array(b_rows),
                        np.array(b2), np.array(a2), np.array(h))

    if instance.variant == VARIANT_DEMAND:
        space = BoxSpace(tuple(instance.demand_lower), tuple(instance.demand_upper))
    else:
        space = BinaryCardinalitySpace(n, instance.k)

    kind = instance.ambiguity_kind
    if kind == AMB_MOMENT:
        ambiguity = MomentAmbiguity(np.eye(n), instance.moment_bound)
    elif kind in (AMB_WASSERSTEIN, AMB_WASSERSTEIN_L2):
        scen_kind = "continuous" if instance.variant == VARIANT_DEMAND else "binary"
        emp = tuple((Scenario(v, scen_kind), w) for v, w in instance.empirical)
        ambiguity = WassersteinAmbiguity(emp, instance.radius, instance.norm)
    else:
        q = n
        ambiguity = MixedIntegerMomentAmbiguity(
            psi=np.vstack([np.eye(q), -np.eye(q)]),
            gamma0=np.concatenate([instance.mi_upper, -instance.mi_lower]),
            gamma_z=np.vstack([-instance.mi_theta * np.eye(q), instance.mi_theta * np.eye(q)]),
            z_a=np.ones((1, q)),
            z_senses=(">=",),
            z_rhs=[float(instance.mi_z0)],
        )

    if instance.variant == VARIANT_DEMAND:
        always = not instance.capacitated or bool(cap_eff.min() >= instance.demand_upper.sum())
    else:
        # k <= p-1 leaves one opened facility alive; uncapacitated survivors
        # can absorb everything
        always = not instance.capacitated
    return TwoStageProblem(first, recourse, space, ambiguity,
                           recourse_always_feasible=always, name=instance.name)
