import numpy as np
import pytest

from cranalloc import draw_channels, oracles, standard_scenario
from cranalloc.baselines import exhaustive_global
from cranalloc.dual import (FIXED, TDD, SolverOptions, dual_value, multiplier_bounds,
                            run_algorithm1, solve_sc, solve_tdd, subgradient,
                            subproblem_dl, subproblem_ul)
from cranalloc.rates import check_feasibility
from cranalloc.subproblems import Problem
from cranalloc.validation import random_prices


def test_empty_set_has_zero_value(small_problem):
    z = random_prices(small_problem, np.random.default_rng(0))
    assert subproblem_ul(small_problem, 0, 0, (), z) == (0.0, 0.0)
    v, pd = subproblem_dl(small_problem, 0, 0, (), z)
    assert v == 0.0 and not pd.any()


def test_huge_fronthaul_price_idles_every_sc(small_problem):
    z = random_prices(small_problem, np.random.default_rng(1))
    z[small_problem.K + small_problem.M:] = 1e9
    for n in range(small_problem.N):
        _, rrhs, _, pu, pd, value = solve_sc(small_problem, n, z)
        assert rrhs == () and value == 0.0 and pu == 0.0 and not pd.any()


def test_vectorized_selection_matches_nested_loops(small_problem):
    rng = np.random.default_rng(2)
    for _ in range(10):
        z = random_prices(small_problem, rng)
        for n in range(small_problem.N):
            v_ref, k_ref, s_ref, y_ref = oracles.brute_force_sc(small_problem, n, z)
            k, rrhs, y, _, _, v = solve_sc(small_problem, n, z)
            assert v == pytest.approx(v_ref, rel=1e-9, abs=1e-12)
            if s_ref:
                assert (k, rrhs, y) == (k_ref, s_ref, y_ref)


def test_dual_function_is_convex_along_segments(small_problem):
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b = random_prices(small_problem, rng), random_prices(small_problem, rng)
        ga, _ = dual_value(small_problem, a)
        gb, _ = dual_value(small_problem, b)
        gm, _ = dual_value(small_problem, 0.5 * (a + b))
        assert gm <= 0.5 * (ga + gb) + 1e-9 * abs(gm)


def test_dual_at_huge_prices_is_the_budget_charge(small_problem):
    z = np.full(small_problem.dim, 1e9)
    g, batch = dual_value(small_problem, z)
    assert not batch.mask.any()
    levels = np.concatenate([small_problem.scn.Pu, small_problem.scn.Pr,
                             small_problem.scn.C.astype(float)])
    assert g == pytest.approx(z @ levels)


def test_subgradient_inequality(small_problem):
    rng = np.random.default_rng(4)
    for _ in range(20):
        z, z2 = random_prices(small_problem, rng), random_prices(small_problem, rng)
        g, batch = dual_value(small_problem, z)
        g2, _ = dual_value(small_problem, z2)
        assert g2 >= g + subgradient(small_problem, batch) @ (z2 - z) - 1e-9 * abs(g)
    g, batch = dual_value(small_problem, z)
    assert g + subgradient(small_problem, batch) @ (z - z) == g


def test_subgradient_at_idle_point_is_the_budget_levels(small_problem):
    _, batch = dual_value(small_problem, np.full(small_problem.dim, 1e9))
    scn = small_problem.scn
    assert np.allclose(subgradient(small_problem, batch),
                       np.concatenate([scn.Pu, scn.Pr, scn.C.astype(float)]))


def test_multiplier_bounds_contain_solution():
    scn = standard_scenario(K=2, M=2, N=8, C=4, seed=5)
    prob = Problem(scn, draw_channels(scn))
    rep = run_algorithm1(scn, prob.chan)
    assert rep.converged
    assert np.all(rep.z <= multiplier_bounds(prob) * (1 + 1e-9))


def test_weak_duality_and_small_gap_at_sixteen_scs():
    gaps = []
    for seed in range(3):
        scn = standard_scenario(K=2, M=4, N=16, C=16, seed=seed)
        rep = run_algorithm1(scn, draw_channels(scn))
        assert rep.converged
        assert rep.primal_value <= rep.dual_bound + 1e-6
        gaps.append((rep.dual_bound - rep.primal_value) / rep.dual_bound)
    assert np.mean(gaps) <= 0.02


def test_dual_bound_dominates_exhaustive():
    for seed in range(3):
        scn = standard_scenario(K=2, M=2, N=2, C=1, seed=seed)
        chan = draw_channels(scn)
        exact = exhaustive_global(scn, chan).primal_value
        rep = run_algorithm1(scn, chan)
        assert exact <= rep.dual_bound + 1e-6
        assert rep.primal_value >= 0.98 * exact


def test_run_is_deterministic():
    scn = standard_scenario(K=2, M=2, N=6, seed=8)
    chan = draw_channels(scn)
    a, b = run_algorithm1(scn, chan), run_algorithm1(scn, chan)
    assert a.primal_value == b.primal_value and a.iters == b.iters
    assert np.array_equal(a.allocation.x, b.allocation.x)


def test_fixed_mode_respects_the_pin():
    scn = standard_scenario(K=2, M=2, N=6, seed=9)
    pin = np.array([0, 1, 0, 1, 1, 0])
    rep = run_algorithm1(scn, draw_channels(scn), FIXED, y_pin=pin)
    assert rep.allocation.y.tolist() == pin.tolist()
    assert check_feasibility(rep.allocation, scn).ok


def test_fixed_mode_without_pin_rejected():
    scn = standard_scenario(K=1, M=1, N=2)
    with pytest.raises(ValueError):
        run_algorithm1(scn, draw_channels(scn), FIXED)


def test_tdd_uses_one_direction():
    scn = standard_scenario(K=2, M=2, N=6, seed=10)
    rep = run_algorithm1(scn, draw_channels(scn), TDD)
    assert rep.mode == TDD
    assert len(set(rep.allocation.y.tolist())) == 1


def test_tdd_with_zero_uplink_weight_picks_downlink():
    scn = standard_scenario(K=2, M=2, N=4, seed=11, w=0.0)
    rep = solve_tdd(scn, draw_channels(scn))
    assert not rep.allocation.y.any()
    assert rep.ul_rate == 0.0 and rep.dl_rate > 0


def test_flexible_dominates_tdd():
    scn = standard_scenario(K=2, M=2, N=6, C=6, seed=12)
    chan = draw_channels(scn)
    assert run_algorithm1(scn, chan).primal_value >= run_algorithm1(scn, chan, TDD).primal_value - 1e-6


def test_trace_file_written(tmp_path):
    scn = standard_scenario(K=1, M=2, N=3, seed=13)
    path = tmp_path / "trace.csv"
    rep = run_algorithm1(scn, draw_channels(scn), options=SolverOptions(trace_path=str(path)))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("iter,g,min_g,lower")
    assert len(lines) == len(rep.trace) + 1


def test_iteration_cap_reports_nonconvergence():
    scn = standard_scenario(K=2, M=2, N=8, seed=14)
    rep = run_algorithm1(scn, draw_channels(scn), options=SolverOptions(iter_max=5))
    assert not rep.converged and rep.iters <= 5
    assert check_feasibility(rep.allocation, scn).ok
