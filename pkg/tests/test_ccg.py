import numpy as np
import pytest

from dro_forge.ccg import (
    CcgOptions,
    RequiresFeasibleRecourseError,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    solve_basic_ccg,
    solve_ccg_dro,
)
from dro_forge.model import (
    BinaryCardinalitySpace,
    BoxSpace,
    MixedIntegerMomentAmbiguity,
    MomentAmbiguity,
    Scenario,
    Tolerances,
    WassersteinAmbiguity,
)
from dro_forge.wcev import QCache, oracle1_bruteforce, oracle2_cg

from oracles import dro_enumeration, dro_enumeration_wasserstein
from toys import tiny_fl_problem

TOL = Tolerances()


def _check_monotone(trace):
    lbs = [r.lb for r in trace if np.isfinite(r.lb)]
    ubs = [r.ub for r in trace if np.isfinite(r.ub)]
    assert all(a <= b + 1e-9 for a, b in zip(lbs, lbs[1:]))
    assert all(a >= b - 1e-9 for a, b in zip(ubs, ubs[1:]))


def test_uncapacitated_moment_matches_enumeration():
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0),
                              space=BoxSpace((1.0, 0.5), (4.0, 1.5)),
                              ambiguity=MomentAmbiguity(np.eye(2), [3.0, 1.2]))
    res = solve_ccg_dro(problem, TOL)
    assert res.status == STATUS_OPTIMAL
    truth, _ = dro_enumeration(problem, oracle1_bruteforce, QCache, TOL)
    assert res.objective == pytest.approx(truth, abs=1e-6 * (1 + abs(truth)))
    # no feasibility pool on an always-feasible instance
    assert len(res.state.pools.feasibility) == 0
    _check_monotone(res.state.trace)


def test_capacitated_with_genuine_infeasibility():
    problem = tiny_fl_problem((3.0, 6.0), fixed_costs=(0.5, 2.0),
                              space=BoxSpace((1.0, 0.5), (4.0, 1.0)),
                              ambiguity=MomentAmbiguity(np.eye(2), [3.5, 0.9]))
    res = solve_ccg_dro(problem, TOL)
    assert res.status == STATUS_OPTIMAL
    truth, tx = dro_enumeration(problem, oracle1_bruteforce, QCache, TOL)
    assert res.objective == pytest.approx(truth, abs=1e-6 * (1 + abs(truth)))
    # feasibility cuts were needed to reject the cheap-but-small facility
    assert len(res.state.pools.feasibility) >= 1
    # returned incumbent is almost surely feasible: fresh feasibility solve is ~0
    fres = oracle2_cg(problem, res.x, "feasibility", tol=TOL)
    assert fres.value <= TOL.feas_eps * 10
    _check_monotone(res.state.trace)


def test_provably_infeasible_instance():
    problem = tiny_fl_problem((1.0, 1.0), fixed_costs=(1.0, 1.0),
                              space=BoxSpace((0.5, 0.5), (4.0, 1.0)),
                              ambiguity=MomentAmbiguity(np.eye(2), [4.0, 1.0]))
    res = solve_ccg_dro(problem, TOL)
    assert res.status == STATUS_INFEASIBLE
    assert res.x is None


def test_iterations_bounded_by_first_stage_count():
    problem = tiny_fl_problem((3.0, 6.0), fixed_costs=(0.5, 2.0),
                              space=BoxSpace((1.0, 0.5), (4.0, 1.0)),
                              ambiguity=MomentAmbiguity(np.eye(2), [3.5, 0.9]))
    res = solve_ccg_dro(problem, TOL)
    # |X| = 3 feasible facility patterns (at least one open)
    assert res.iterations <= 3 + 1


def test_vertex_iteration_bound_on_boxes():
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0),
                              space=BoxSpace((1.0, 0.5), (4.0, 1.5)),
                              ambiguity=MomentAmbiguity(np.eye(2), [3.0, 1.2]))
    res = solve_ccg_dro(problem, TOL)
    assert res.iterations <= problem.space.vertex_count
    assert res.state.generated  # pricing produced at least one scenario
    for s in res.state.generated:
        lo, hi = np.array(problem.space.lower), np.array(problem.space.upper)
        v = s.array
        assert (np.minimum(np.abs(v - lo), np.abs(v - hi)) <= 1e-7).all()


def test_basic_ccg_agrees_and_iterates_more():
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0),
                              space=BoxSpace((1.0, 0.5), (4.0, 1.5)),
                              ambiguity=MomentAmbiguity(np.eye(2), [3.0, 1.2]))
    dro = solve_ccg_dro(problem, TOL)
    basic = solve_basic_ccg(problem, TOL)
    assert basic.status == STATUS_OPTIMAL
    assert basic.objective == pytest.approx(dro.objective, abs=2 * TOL.outer_tol * (1 + abs(dro.objective)) + 1e-6)
    assert basic.iterations >= dro.iterations
    _check_monotone(basic.state.trace)


def test_basic_ccg_rejects_capacitated():
    problem = tiny_fl_problem((3.0, 6.0))
    with pytest.raises(RequiresFeasibleRecourseError):
        solve_basic_ccg(problem, TOL)


def test_single_scenario_space_converges_fast():
    space = BoxSpace((2.0, 1.0), (2.0, 1.0))  # a single point
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0), space=space,
                              ambiguity=MomentAmbiguity(np.eye(2), [2.0, 1.0]))
    res = solve_ccg_dro(problem, TOL)
    basic = solve_basic_ccg(problem, TOL)
    assert res.iterations <= 2 and basic.iterations <= 2
    assert res.objective == pytest.approx(basic.objective, abs=1e-6)


def test_wasserstein_ccg_matches_enumeration():
    space = BinaryCardinalitySpace(2, 1)
    emp = ((Scenario((0.0, 0.0), "binary"), 0.5), (Scenario((1.0, 0.0), "binary"), 0.5))
    amb = WassersteinAmbiguity(emp, radius=0.25)
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0), demands=(3.0, 1.0),
                              space=space, ambiguity=amb)
    # recourse couples disruption u to capacity rows: reuse the demand-box recourse
    # shape by treating u as demand shift is wrong; instead solve as-is: H maps u
    # into demand rows, which still yields a valid two-stage instance.
    res = solve_ccg_dro(problem, TOL)
    assert res.status == STATUS_OPTIMAL
    truth, _ = dro_enumeration_wasserstein(problem)
    assert res.objective == pytest.approx(truth, abs=1e-6 * (1 + abs(truth)))
    basic = solve_basic_ccg(problem, TOL)
    assert basic.objective == pytest.approx(truth, abs=2 * TOL.outer_tol * (1 + abs(truth)) + 1e-6)


def test_mixed_integer_ccg_matches_enumeration():
    space = BinaryCardinalitySpace(2, 1)
    amb = MixedIntegerMomentAmbiguity(
        psi=np.eye(2), gamma0=np.array([0.7, 0.7]), gamma_z=np.array([[-0.5, 0.0], [0.0, -0.5]]),
        z_a=np.ones((1, 2)), z_senses=(">=",), z_rhs=[1.0],
    )
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0), demands=(3.0, 1.0),
                              space=space, ambiguity=amb)
    res = solve_ccg_dro(problem, TOL)
    assert res.status == STATUS_OPTIMAL
    truth, _ = dro_enumeration(problem, oracle1_bruteforce, QCache, TOL)
    assert res.objective == pytest.approx(truth, abs=1e-6 * (1 + abs(truth)))


def test_bruteforce_oracle_path():
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 3.0),
                              space=BinaryCardinalitySpace(2, 1),
                              ambiguity=MomentAmbiguity(np.eye(2), [0.4, 0.4]))
    a = solve_ccg_dro(problem, TOL, oracle="cg")
    b = solve_ccg_dro(problem, TOL, oracle="bruteforce")
    assert a.objective == pytest.approx(b.objective, abs=1e-6 * (1 + abs(a.objective)))
