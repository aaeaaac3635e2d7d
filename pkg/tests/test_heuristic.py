import numpy as np
import pytest

from cranalloc import draw_channels, standard_scenario
from cranalloc.baselines import exhaustive_global
from cranalloc.dual import dual_value, run_algorithm1, run_algorithm2
from cranalloc.heuristic import greedy_sets, heuristic_select, solve_heuristic
from cranalloc.subproblems import HEURISTIC, Problem
from cranalloc.validation import random_prices


def _prob(**kw):
    scn = standard_scenario(**kw)
    return Problem(scn, draw_channels(scn))


def test_single_rrh_selection_is_exact():
    prob = _prob(K=3, M=1, N=5, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = random_prices(prob, rng)
        g_exact, _ = dual_value(prob, z)
        g_heur, _ = dual_value(prob, z, selector=HEURISTIC)
        assert g_heur == pytest.approx(g_exact, rel=1e-12)


def test_huge_fronthaul_price_gives_empty_sets():
    prob = _prob(K=2, M=3, N=4, seed=1)
    z = random_prices(prob, np.random.default_rng(1))
    z[prob.K + prob.M:] = 1e9
    for y in (0, 1):
        mask, value, _, _ = greedy_sets(prob, z, y)
        assert not mask.any() and not value.any()


def test_greedy_value_never_exceeds_exhaustive():
    prob = _prob(K=2, M=4, N=6, seed=2)
    rng = np.random.default_rng(2)
    for _ in range(10):
        z = random_prices(prob, rng)
        exact = dual_value(prob, z)[1].value
        greedy = solve_heuristic(prob, z).value
        assert np.all(greedy <= exact + 1e-12)


def test_history_is_nondecreasing():
    prob = _prob(K=2, M=4, N=6, seed=3)
    z = random_prices(prob, np.random.default_rng(3))
    for y in (0, 1):
        hist = greedy_sets(prob, z, y)[3]
        assert len(hist) == prob.M + 1
        for a, b in zip(hist, hist[1:]):
            assert np.all(b >= a)


def test_vectorized_greedy_matches_scalar_walk():
    prob = _prob(K=2, M=4, N=5, seed=4)
    rng = np.random.default_rng(4)
    for _ in range(5):
        z = random_prices(prob, rng)
        for y in (0, 1):
            mask, value, _, _ = greedy_sets(prob, z, y)
            for n in range(prob.N):
                for k in range(prob.K):
                    rrhs, _, v, evals = heuristic_select(prob, n, k, y, z)
                    assert evals == prob.M
                    assert tuple(np.flatnonzero(mask[n, k])) == rrhs
                    assert value[n, k] == pytest.approx(v, rel=1e-9, abs=1e-12)


def test_sorting_and_solve_counters():
    prob = _prob(K=2, M=4, N=6, seed=5)
    rng = np.random.default_rng(5)
    E = prob.N * prob.K
    for _ in range(4):
        before = prob.counters.power_solves
        solve_heuristic(prob, random_prices(prob, rng))
        assert prob.counters.power_solves - before <= 2 * prob.M * E
    # one sort per (SC, user) and direction for the whole problem
    assert prob.counters.sorts == 2 * E


def test_algorithm2_equals_algorithm1_with_one_rrh():
    scn = standard_scenario(K=3, M=1, N=6, C=6, seed=6)
    chan = draw_channels(scn)
    a1, a2 = run_algorithm1(scn, chan), run_algorithm2(scn, chan)
    assert a2.primal_value == pytest.approx(a1.primal_value, rel=1e-6)


def test_algorithm2_close_to_exhaustive_on_tiny_instances():
    for seed in range(3):
        scn = standard_scenario(K=2, M=2, N=2, C=2, seed=seed)
        chan = draw_channels(scn)
        assert run_algorithm2(scn, chan).primal_value >= 0.95 * exhaustive_global(scn, chan).primal_value


def test_single_rrh_restriction_rejected():
    from cranalloc.subproblems import Restrictions
    prob = _prob(K=1, M=2, N=2, seed=7)
    with pytest.raises(ValueError):
        greedy_sets(prob, np.ones(prob.dim), 0, Restrictions(single_rrh=np.ones((1, 2), bool)))
