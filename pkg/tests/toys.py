"""Small hand-checkable problem builders shared across test modules."""

import numpy as np

from dro_forge.model import (
    BinaryCardinalitySpace,
    BoxSpace,
    FirstStage,
    MomentAmbiguity,
    Recourse,
    Scenario,
    TwoStageProblem,
)


def trivial_first_stage(n=1):
    return FirstStage(
        cost=np.zeros(n), a=np.zeros((0, n)), row_senses=(), rhs=[],
        lower=np.zeros(n), upper=np.ones(n), binary_indices=tuple(range(n)),
    )


def affine_q_problem(slopes, space, ambiguity):
    """Q(x, xi) = sum_i slopes_i * xi_i via  min sum y, y_i >= slopes_i xi_i."""
    slopes = np.asarray(slopes, dtype=float)
    assert np.all(slopes >= 0)
    n = slopes.size
    recourse = Recourse(
        c2=np.ones(n),
        b_matrix=np.eye(n),
        b2=np.zeros(n),
        a2=np.zeros((n, 1)),
        h=-np.diag(slopes),
    )
    return TwoStageProblem(trivial_first_stage(1), recourse, space, ambiguity,
                           recourse_always_feasible=True)


def two_point_toy(gamma=0.3):
    """Xi = {0, 1}, Q = 10 xi, moment row E[xi] <= gamma."""
    space = BinaryCardinalitySpace(1, 1)
    amb = MomentAmbiguity(np.eye(1), [gamma])
    return affine_q_problem([10.0], space, amb)


def tiny_fl_problem(capacities, costs=None, demands=(3.0, 1.0), rho=0.0,
                    space=None, ambiguity=None, fixed_costs=None):
    """Two clients / |capacities| facilities; recourse ships under random demand."""
    n_i = len(demands)
    n_j = len(capacities)
    c = np.array(costs if costs is not None else [[0.0, 2.0], [2.0, 0.0]], dtype=float)
    n_y = n_i * n_j
    rows, b2, a2, h = [], [], [], []
    for i in range(n_i):
        row = np.zeros(n_y)
        for j in range(n_j):
            row[i * n_j + j] = 1.0
        rows.append(row)
        b2.append(0.0)
        a2.append(np.zeros(n_j))
        hrow = np.zeros(n_i)
        hrow[i] = -1.0
        h.append(hrow)
    for j in range(n_j):
        row = np.zeros(n_y)
        for i in range(n_i):
            row[i * n_j + j] = -1.0
        rows.append(row)
        b2.append(0.0)
        arow = np.zeros(n_j)
        arow[j] = capacities[j]
        a2.append(arow)
        h.append(np.zeros(n_i))
    recourse = Recourse((1.0 - rho) * c.reshape(-1), np.array(rows), b2, np.array(a2), np.array(h))
    first = FirstStage(
        cost=np.zeros(n_j) if fixed_costs is None else np.asarray(fixed_costs, dtype=float),
        a=np.ones((1, n_j)),
        row_senses=(">=",),
        rhs=[1.0],
        lower=np.zeros(n_j),
        upper=np.ones(n_j),
        binary_indices=tuple(range(n_j)),
    )
    if space is None:
        space = BoxSpace(tuple(0.5 * d for d in demands), tuple(1.5 * d for d in demands))
    if ambiguity is None:
        ambiguity = MomentAmbiguity(np.eye(n_i), np.array(demands))
    # the first stage only guarantees one open facility, so feasibility for
    # every x needs the smallest capacity to cover the worst-case total demand
    if isinstance(space, BoxSpace):
        always = bool(min(capacities) >= sum(space.upper))
    else:
        always = bool(min(capacities) >= sum(demands))
    return TwoStageProblem(first, recourse, space, ambiguity,
                           recourse_always_feasible=always)


def random_feasible_recourse_problem(rng, n_xi=2, n_y=3, m_r=3, discrete=True, m_amb=2,
                                     gamma_slack=0.4):
    """Random two-stage toy whose recourse is feasible for every (x, xi)."""
    base = rng.uniform(-1.0, 1.0, size=(m_r, n_y))
    b_matrix = np.hstack([base, np.eye(m_r)])  # slack block keeps it feasible
    c2 = np.concatenate([rng.uniform(0.2, 2.0, size=n_y), rng.uniform(3.0, 6.0, size=m_r)])
    b2 = rng.uniform(-1.0, 1.0, size=m_r)
    a2 = rng.uniform(-0.5, 0.5, size=(m_r, 1))
    h = rng.uniform(-1.5, 1.5, size=(m_r, n_xi))
    recourse = Recourse(c2, b_matrix, b2, a2, h)
    if discrete:
        k = int(rng.integers(1, n_xi + 1))
        space = BinaryCardinalitySpace(n_xi, k)
        mean_cap = k / 2.0
    else:
        lo = rng.uniform(0.0, 0.5, size=n_xi)
        hi = lo + rng.uniform(0.5, 1.5, size=n_xi)
        space = BoxSpace(tuple(lo), tuple(hi))
        mean_cap = float(np.mean(hi))
    psi = rng.uniform(0.0, 1.0, size=(m_amb, n_xi))
    centroid = space.centroid().array
    gamma = psi @ centroid + gamma_slack * rng.uniform(0.2, 1.0, size=m_amb)
    amb = MomentAmbiguity(psi, gamma)
    problem = TwoStageProblem(trivial_first_stage(1), recourse, space, amb,
                              recourse_always_feasible=True)
    return problem
