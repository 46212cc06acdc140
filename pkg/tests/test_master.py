import numpy as np
import pytest

from dro_forge.milp import MilpStatus
from dro_forge.master import (
    BIG_M,
    DUAL_SINGLE_LEVEL,
    MERGED,
    OPT_ONLY,
    ScenarioPools,
    build_master,
    mmp_build,
    mmp_mixed_integer_build,
    mmp_wasserstein_build,
    solve_master,
)
from dro_forge.model import (
    BinaryCardinalitySpace,
    BoxSpace,
    MixedIntegerMomentAmbiguity,
    MomentAmbiguity,
    Scenario,
    Tolerances,
    TwoStageProblem,
    WassersteinAmbiguity,
)
from dro_forge.pricing import OPTIMALITY
from dro_forge.wcev import QCache, oracle1_bruteforce, oracle2_cg

from oracles import dro_enumeration
from toys import random_feasible_recourse_problem, tiny_fl_problem, two_point_toy

B0 = Scenario((0.0,), "binary")
B1 = Scenario((1.0,), "binary")


def test_empty_pools_is_first_stage_only():
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(4.0, 7.0))
    master = mmp_build(problem, ScenarioPools())
    sol = solve_master(master)
    assert sol.status == MilpStatus.OPTIMAL
    assert sol.eta == pytest.approx(0.0)
    assert sol.objective == pytest.approx(4.0)  # open the cheaper facility


def test_single_scenario_shape():
    problem = two_point_toy()
    pools = ScenarioPools(optimality=[B1])
    master = mmp_build(problem, pools)
    milp = master.milp
    # vars: x(1) + eta + replica y(1) + eta_o + alpha_o + beta_o(1)
    assert milp.lp.num_cols == 6
    # rows: replica row + eta_o tie + eta-vs-dual row + per-scenario dual row
    assert milp.lp.num_rows == 4


def test_converged_pool_reproduces_wcev():
    problem = two_point_toy(gamma=0.3)
    res = oracle2_cg(problem, np.zeros(1), OPTIMALITY, pool_init=[B0])
    pools = ScenarioPools(optimality=list(res.distribution.scenarios))
    sol = solve_master(mmp_build(problem, pools))
    assert sol.status == MilpStatus.OPTIMAL
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def test_master_is_relaxation_and_monotone():
    rng = np.random.default_rng(17)
    tol = Tolerances()
    for _ in range(8):
        problem = random_feasible_recourse_problem(rng, n_xi=2)
        truth, _ = dro_enumeration(problem, oracle1_bruteforce, QCache, tol)
        candidates = list(problem.space.members())
        vals = []
        for k in (1, 2, len(candidates)):
            pools = ScenarioPools(optimality=candidates[:k])
            sol = solve_master(mmp_build(problem, pools))
            assert sol.status == MilpStatus.OPTIMAL
            vals.append(sol.objective)
            assert sol.objective <= truth + 1e-6 * (1 + abs(truth))
        assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


def test_big_m_agrees_with_dual_single_level():
    rng = np.random.default_rng(23)
    for _ in range(6):
        problem = random_feasible_recourse_problem(rng, n_xi=2)
        candidates = list(problem.space.members())
        pools = ScenarioPools(optimality=candidates[:2], feasibility=candidates[2:3])
        a = solve_master(mmp_build(problem, pools, variant=DUAL_SINGLE_LEVEL, pool_policy=MERGED))
        b = solve_master(mmp_build(problem, pools, variant=BIG_M, pool_policy=MERGED))
        assert a.objective == pytest.approx(b.objective, abs=1e-6 * (1 + abs(a.objective)))


def test_capacitated_feasibility_block_cuts_infeasible_x():
    # one facility too small: opening only it must be cut off once the
    # demanding scenario enters the feasibility pool
    problem = tiny_fl_problem((2.0, 6.0), fixed_costs=(0.0, 10.0),
                              space=BoxSpace((0.0, 0.0), (4.0, 1.0)),
                              ambiguity=MomentAmbiguity(np.eye(2), [4.0, 1.0]))
    bad = Scenario((4.0, 1.0))
    pools = ScenarioPools(feasibility=[bad])
    sol = solve_master(mmp_build(problem, pools))
    assert sol.status == MilpStatus.OPTIMAL
    # facility 1 alone cannot serve demand 5 > 2; master must open facility 2
    assert sol.x[1] == pytest.approx(1.0)


def test_wasserstein_master_shapes_and_saa_collapse():
    emp = ((Scenario((2.0, 1.0)), 0.5), (Scenario((3.0, 1.5)), 0.5))
    amb = WassersteinAmbiguity(emp, radius=1e-9)
    problem = tiny_fl_problem((100.0, 100.0), fixed_costs=(1.0, 1.0),
                              space=BoxSpace((0.0, 0.0), (4.5, 1.5)), ambiguity=amb)
    pools = ScenarioPools(
        per_sample_optimality=[[emp[0][0]], [emp[1][0]]],
        per_sample_feasibility=[[], []],
    )
    master = mmp_wasserstein_build(problem, pools)
    sol = solve_master(master)
    assert sol.status == MilpStatus.OPTIMAL
    # radius ~ 0: eta equals the SAA over the two empirical scenarios for the
    # best single facility; facility 1 serves (2,1)/(3,1.5) at cost 2*1=2 / 2*1.5=3
    # opening both facilities costs 2 and drops service to zero: eta = 0
    assert sol.objective == pytest.approx(2.0, abs=1e-6)


def test_wasserstein_single_sample_shape():
    emp = ((Scenario((1.0,)), 1.0),)
    amb = WassersteinAmbiguity(emp, radius=0.5)
    space = BoxSpace((0.0,), (2.0,))
    from toys import affine_q_problem

    problem = affine_q_problem([3.0], space, amb)
    pools = ScenarioPools(per_sample_optimality=[[emp[0][0]]])
    master = mmp_wasserstein_build(problem, pools)
    sol = solve_master(master)
    assert sol.status == MilpStatus.OPTIMAL
    # eta >= alpha_1 + r beta and alpha_1 >= p eta_o with eta_o = Q(1) = 3
    assert sol.objective == pytest.approx(3.0, abs=1e-7)


def _mi_ambiguity():
    return MixedIntegerMomentAmbiguity(
        psi=np.eye(1), gamma0=np.array([0.6]), gamma_z=np.array([[-0.4]]),
        z_a=np.zeros((0, 1)), z_senses=(), z_rhs=[],
    )


def test_mixed_integer_master_singleton_matches_moment():
    amb = _mi_ambiguity()
    from toys import affine_q_problem

    problem = affine_q_problem([10.0], BinaryCardinalitySpace(1, 1), amb)
    pools = ScenarioPools(optimality=[B0, B1])
    pools.add_z(np.array([1.0]), "optimality")
    sol = solve_master(mmp_mixed_integer_build(problem, pools))

    plain = affine_q_problem([10.0], BinaryCardinalitySpace(1, 1),
                             MomentAmbiguity(np.eye(1), [0.2]))
    msol = solve_master(mmp_build(plain, ScenarioPools(optimality=[B0, B1])))
    assert sol.objective == pytest.approx(msol.objective, abs=1e-7)


def test_mixed_integer_master_full_pools_reach_enumeration():
    amb = _mi_ambiguity()
    from toys import affine_q_problem

    problem = affine_q_problem([10.0], BinaryCardinalitySpace(1, 1), amb)
    pools = ScenarioPools(optimality=[B0, B1])
    for z in amb.enumerate_z():
        pools.add_z(z, "optimality")
    sol = solve_master(mmp_mixed_integer_build(problem, pools))
    truth, _ = dro_enumeration(problem, oracle1_bruteforce, QCache, Tolerances())
    assert sol.objective == pytest.approx(truth, abs=1e-7)


def test_mixed_integer_master_empty_z_unconstrained():
    amb = _mi_ambiguity()
    from toys import affine_q_problem

    problem = affine_q_problem([10.0], BinaryCardinalitySpace(1, 1), amb)
    pools = ScenarioPools(optimality=[B1])
    sol = solve_master(mmp_mixed_integer_build(problem, pools))
    assert sol.objective == pytest.approx(0.0)
