import numpy as np
import pytest

from dro_forge.lp import EQ, GE, LE, MAX, MIN, LpProblem, solve_lp
from dro_forge.milp import MilpError, MilpProblem, MilpStatus, solve_milp

from oracles import milp_binary_enumeration


def _binary_problem(sense, cost, a, senses, rhs, n_cont=0):
    n = len(cost)
    lower = np.zeros(n)
    upper = np.ones(n)
    upper[len(cost) - n_cont :] = np.inf
    lp = LpProblem(sense, cost, a, senses, rhs, lower, upper)
    return MilpProblem(lp, tuple(range(n - n_cont)))


def test_rounding_forced():
    prob = _binary_problem(MAX, [1.0, 1.0], [[1.0, 1.0]], (LE,), [1.5])
    sol = solve_milp(prob)
    assert sol.status == MilpStatus.OPTIMAL
    assert sol.objective == pytest.approx(1.0)


def test_pick_the_larger_branch():
    # max 10 z + 3 (1 - z) = 3 + 7z
    prob = _binary_problem(MAX, [7.0], np.zeros((0, 1)), (), [])
    sol = solve_milp(prob)
    assert sol.objective + 3.0 == pytest.approx(10.0)
    assert sol.x[0] == pytest.approx(1.0)


def test_small_knapsack():
    # enumerate the 8 assignments by hand: best is b = c = 1 -> 9
    prob = _binary_problem(MAX, [6.0, 5.0, 4.0], [[3.0, 2.0, 2.0]], (LE,), [4.0])
    sol = solve_milp(prob)
    assert sol.status == MilpStatus.OPTIMAL
    assert sol.objective == pytest.approx(9.0)
    assert sol.x == pytest.approx([0.0, 1.0, 1.0])


def test_infeasible():
    prob = _binary_problem(MIN, [1.0], [[1.0], [1.0]], (GE, LE), [0.6, 0.4])
    sol = solve_milp(prob)
    assert sol.status == MilpStatus.INFEASIBLE


def test_invalid_binary_bounds():
    lp = LpProblem(MIN, [1.0], np.zeros((0, 1)), (), [], [0.0], [2.0])
    with pytest.raises(MilpError):
        MilpProblem(lp, (0,))


def test_duals_from_fixed_relaxation():
    # one binary gate y, one continuous x <= 10 y, max 3x - 5y
    lp = LpProblem(
        MAX,
        [-5.0, 3.0],
        [[-10.0, 1.0]],
        (LE,),
        [0.0],
        [0.0, 0.0],
        [1.0, np.inf],
    )
    sol = solve_milp(MilpProblem(lp, (0,)))
    assert sol.status == MilpStatus.OPTIMAL
    assert sol.objective == pytest.approx(25.0)
    assert sol.duals is not None
    # with y fixed at 1 the row x <= 10 has shadow price 3
    assert sol.duals[0] == pytest.approx(3.0)


def _random_milp(rng):
    n_bin = int(rng.integers(2, 9))
    n_cont = int(rng.integers(0, 3))
    n = n_bin + n_cont
    m = int(rng.integers(1, 5))
    a = rng.uniform(-3.0, 3.0, size=(m, n))
    senses = tuple(rng.choice([LE, GE], size=m, p=[0.7, 0.3]))
    anchor = rng.uniform(0.0, 1.0, size=n)
    slack = rng.uniform(0.2, 1.5, size=m)
    rhs = a @ anchor + np.where([s == LE for s in senses], slack, -slack)
    cost = rng.uniform(-5.0, 5.0, size=n)
    lower = np.zeros(n)
    upper = np.concatenate([np.ones(n_bin), np.full(n_cont, 3.0)])
    sense = MIN if rng.random() < 0.5 else MAX
    lp = LpProblem(sense, cost, a, senses, rhs, lower, upper)
    return MilpProblem(lp, tuple(range(n_bin)))


def test_randomized_against_binary_enumeration():
    rng = np.random.default_rng(42)
    agree = 0
    for _ in range(60):
        prob = _random_milp(rng)
        expected, _ = milp_binary_enumeration(prob, solve_lp)
        sol = solve_milp(prob)
        if expected is None:
            assert sol.status == MilpStatus.INFEASIBLE
            continue
        assert sol.status == MilpStatus.OPTIMAL
        assert sol.objective == pytest.approx(expected, abs=1e-6 * (1 + abs(expected)))
        for j in prob.binary_indices:
            assert abs(sol.x[j] - round(sol.x[j])) <= 1e-6
        assert sol.gap <= 1e-9
        agree += 1
    assert agree >= 40


def test_bound_monotone_and_node_limit():
    rng = np.random.default_rng(3)
    prob = _random_milp(rng)
    sol = solve_milp(prob)
    if sol.status == MilpStatus.OPTIMAL and len(sol.bound_history) > 1:
        bounds = [b for _, b in sol.bound_history if np.isfinite(b)]
        if prob.lp.sense == MAX:
            assert all(b1 >= b2 - 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
        else:
            assert all(b1 <= b2 + 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
    limited = solve_milp(prob, node_limit=1)
    assert limited.status in (MilpStatus.NODE_LIMIT, MilpStatus.OPTIMAL, MilpStatus.INFEASIBLE)
