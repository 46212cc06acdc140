import numpy as np
import pytest

from dro_forge.lp import (
    EQ,
    GE,
    LE,
    MAX,
    MIN,
    DimensionMismatchError,
    LpProblem,
    LpStatus,
    dual_objective,
    primal_residual,
    solve_lp,
)

from oracles import lp_vertex_enumeration


def test_pmp_style_lp():
    # max 10 p1  s.t. p1 + p2 = 1, p1 <= 0.3, p >= 0
    # Enumerating the three basic feasible points (p1 in {0, 0.3}) gives 3.0.
    prob = LpProblem.build(MAX, [10.0, 0.0], [[1.0, 1.0], [1.0, 0.0]], (EQ, LE), [1.0, 0.3])
    sol = solve_lp(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-9)
    assert sol.x == pytest.approx([0.3, 0.7], abs=1e-9)
    assert sol.duals == pytest.approx([0.0, 10.0], abs=1e-9)


def test_feasibility_only_lp():
    prob = LpProblem.build(MIN, [0.0], [[1.0]], (EQ,), [1.0])
    sol = solve_lp(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.0, abs=1e-12)
    assert sol.x == pytest.approx([1.0])


def test_unbounded_ray():
    prob = LpProblem.build(MAX, [1.0], np.zeros((0, 1)), (), [])
    sol = solve_lp(prob)
    assert sol.status == LpStatus.UNBOUNDED
    assert sol.ray is not None and sol.ray[0] > 0


def test_infeasible_with_farkas():
    prob = LpProblem.build(MIN, [0.0], [[1.0], [1.0]], (LE, GE), [1.0, 2.0])
    sol = solve_lp(prob)
    assert sol.status == LpStatus.INFEASIBLE
    assert sol.farkas is not None


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        LpProblem.build(MIN, [1.0, 2.0], [[1.0]], (LE,), [1.0])
    with pytest.raises(DimensionMismatchError):
        LpProblem(MIN, [1.0], [[1.0]], (LE,), [1.0], [2.0], [1.0])


def test_free_and_mirrored_variables():
    # min x + y with x free, y <= 5: x pinned by x >= -3 row, y runs to its bound.
    prob = LpProblem(
        MIN,
        [1.0, 1.0],
        [[1.0, 0.0]],
        (GE,),
        [-3.0],
        [-np.inf, -np.inf],
        [np.inf, 5.0],
    )
    sol = solve_lp(prob)
    assert sol.status == LpStatus.UNBOUNDED  # y has no lower bound

    prob2 = LpProblem(MIN, [1.0, -1.0], [[1.0, 0.0]], (GE,), [-3.0], [-np.inf, 0.0], [np.inf, 5.0])
    sol2 = solve_lp(prob2)
    assert sol2.status == LpStatus.OPTIMAL
    assert sol2.x == pytest.approx([-3.0, 5.0])


def test_transportation_duals():
    # two supplies (10, 20), two demands (15, 15), costs [[1,2],[2,1]]
    a = [
        [1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0],
        [1.0, 0.0, 1.0, 0.0],
        [0.0, 1.0, 0.0, 1.0],
    ]
    prob = LpProblem.build(MIN, [1.0, 2.0, 2.0, 1.0], a, (EQ, EQ, EQ, EQ), [10.0, 20.0, 15.0, 15.0])
    sol = solve_lp(prob)
    assert sol.status == LpStatus.OPTIMAL
    # x00=10, x10=5, x11=15 by inspection
    assert sol.objective == pytest.approx(35.0)
    # shadow prices reproduce the objective
    assert dual_objective(prob, sol) == pytest.approx(sol.objective, abs=1e-7)


def _random_problem(rng, bounded=True):
    n = rng.integers(2, 7)
    m = rng.integers(1, 6)
    a = rng.uniform(-2.0, 2.0, size=(m, n))
    senses = tuple(rng.choice([LE, GE, EQ], size=m, p=[0.5, 0.3, 0.2]))
    x0 = rng.uniform(0.0, 2.0, size=n)  # anchor point keeps most instances feasible
    rhs = a @ x0 + rng.uniform(-0.5, 1.0, size=m) * [1 if s == LE else -1 if s == GE else 0 for s in senses]
    cost = rng.uniform(-3.0, 3.0, size=n)
    lower = np.zeros(n)
    upper = np.full(n, 6.0 if bounded else np.inf)
    sense = MIN if rng.random() < 0.5 else MAX
    return LpProblem(sense, cost, a, senses, rhs, lower, upper)


def test_randomized_against_vertex_enumeration():
    rng = np.random.default_rng(20240611)
    solved = 0
    for _ in range(120):
        prob = _random_problem(rng)
        expected, _ = lp_vertex_enumeration(prob)
        sol = solve_lp(prob)
        if expected is None:
            assert sol.status == LpStatus.INFEASIBLE
            continue
        solved += 1
        assert sol.status == LpStatus.OPTIMAL
        assert sol.objective == pytest.approx(expected, abs=1e-8 * (1 + abs(expected)))
    assert solved >= 60


def test_optimal_certificates_on_random_instances():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(80):
        prob = _random_problem(rng)
        sol = solve_lp(prob)
        if sol.status != LpStatus.OPTIMAL:
            continue
        checked += 1
        scale = 1.0 + abs(sol.objective)
        # primal feasibility
        assert primal_residual(prob, sol.x) <= 1e-7 * scale
        # strong duality including bound duals
        assert abs(sol.objective - dual_objective(prob, sol)) <= 1e-6 * scale
        # complementary slackness row by row
        ax = prob.a @ sol.x
        for i, s in enumerate(prob.row_senses):
            if s == EQ:
                continue
            slack = abs(ax[i] - prob.rhs[i])
            assert slack * abs(sol.duals[i]) <= 1e-5 * scale
        # dual sign of <= rows in a max problem
        if prob.sense == MAX:
            for i, s in enumerate(prob.row_senses):
                if s == LE:
                    assert sol.duals[i] >= -1e-7
    assert checked >= 40


def test_degenerate_lp_does_not_cycle():
    # Beale's cycling example; optimum -0.05 at x = (0.04, 0, 1, 0)
    a = [
        [0.25, -60.0, -1.0 / 25.0, 9.0],
        [0.5, -90.0, -1.0 / 50.0, 3.0],
        [0.0, 0.0, 1.0, 0.0],
    ]
    prob = LpProblem.build(MIN, [-0.75, 150.0, -0.02, 6.0], a, (LE, LE, LE), [0.0, 0.0, 1.0])
    sol = solve_lp(prob)
    assert sol.status == LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-0.05, abs=1e-9)
