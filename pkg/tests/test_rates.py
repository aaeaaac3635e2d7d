import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranalloc import draw_channels, standard_scenario
from cranalloc.rates import (Allocation, check_feasibility, direction_rates, dl_rate,
                             quantization_noise, total_throughput, ul_rate)


def test_quantization_multiplier_at_ten_bits():
    # 3 * 2**-20 per unit of received power
    assert quantization_noise(1.0, 1.0, 0.0, 10) == 2.86102294921875e-6


def test_ul_rate_unit_snr_without_quantization():
    assert ul_rate([1, 0], 1.0, [2.0, 5.0], 2.0, np.inf) == pytest.approx(1.0)


def test_ul_rate_mrc_sums_branch_snrs():
    assert ul_rate([1, 1], 1.0, [1.0, 2.0], 1.0, np.inf) == pytest.approx(2.0)


def test_ul_rate_quantization_lowers_rate():
    ideal = ul_rate([1], 1.0, [100.0], 1.0, np.inf)
    coarse = ul_rate([1], 1.0, [100.0], 1.0, 2)
    assert coarse < ideal
    # closed value: snr = 100 / (1 + 3/16 * 101)
    assert coarse == pytest.approx(math.log2(1 + 100 / (1 + 3 / 16 * 101)))


def test_dl_rate_coherent_combining():
    # amplitudes add: (1 + 1)^2 / 1 = 4
    assert dl_rate([1, 1], [1.0, 1.0], [1.0, 1.0], 1.0) == pytest.approx(math.log2(5.0))
    assert dl_rate([1, 0], [1.0, 1.0], [1.0, 1.0], 1.0) == pytest.approx(1.0)


def _random_allocation(scn, rng):
    K, M, N = scn.K, scn.M, scn.N
    a = Allocation.empty(K, M, N)
    a.y[:] = rng.integers(0, 2, N)
    for n in range(N):
        k = int(rng.integers(K))
        s = rng.integers(0, 2, M)
        a.x[k, :, n] = s
        if a.y[n]:
            a.pu[k, n] = 0.001 * s.any()
        else:
            a.pd[:, n] = 0.01 * s
    return a


def test_total_throughput_is_sum_of_link_rates():
    scn = standard_scenario(K=2, M=2, N=6, seed=1, w=1.5)
    chan = draw_channels(scn)
    a = _random_allocation(scn, np.random.default_rng(0))
    expected = 0.0
    for n in range(scn.N):
        for k in range(scn.K):
            if not a.x[k, :, n].any():
                continue
            if a.y[n]:
                expected += 1.5 * ul_rate(a.x[k, :, n], a.pu[k, n], chan.gu[k, :, n], scn.sigma2, scn.beta)
            else:
                expected += dl_rate(a.x[k, :, n], a.pd[:, n], chan.gd[k, :, n], scn.sigma2)
    assert total_throughput(a, chan, scn) == pytest.approx(expected, rel=1e-12)
    ul, dl = direction_rates(a, chan, scn)
    assert 1.5 * ul + dl == pytest.approx(expected, rel=1e-12)


def test_allocation_json_roundtrip():
    scn = standard_scenario(K=2, M=3, N=4, seed=2)
    a = _random_allocation(scn, np.random.default_rng(1))
    b = Allocation.from_json(a.to_json())
    for f in ("x", "y", "pu", "pd"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_serving_user_marks_idle():
    a = Allocation.empty(2, 1, 3)
    a.x[1, 0, 2] = 1
    assert a.serving_user().tolist() == [-1, -1, 1]


def test_empty_allocation_is_feasible():
    scn = standard_scenario(K=2, M=2, N=4)
    assert check_feasibility(Allocation.empty(2, 2, 4), scn).ok


def test_one_percent_budget_overshoot_detected():
    scn = standard_scenario(K=1, M=1, N=2, C=2)
    a = Allocation.empty(1, 1, 2)
    a.y[:] = 1
    a.x[0, 0, :] = 1
    a.pu[0, :] = scn.Pu[0] * 1.01 / 2
    rep = check_feasibility(a, scn)
    assert rep.kinds() == {"budget-ul"}
    assert rep.violations[0].magnitude == pytest.approx(0.01)


def test_exclusivity_violation_detected():
    scn = standard_scenario(K=2, M=2, N=1, C=1)
    a = Allocation.empty(2, 2, 1)
    a.x[0, 0, 0] = a.x[1, 1, 0] = 1
    assert "exclusivity" in check_feasibility(a, scn).kinds()


def test_fronthaul_and_duplex_power_detected():
    scn = standard_scenario(K=1, M=1, N=3, C=2)
    a = Allocation.empty(1, 1, 3)
    a.x[0, 0, :] = 1
    a.y[:] = 0
    a.pu[0, 0] = 0.001  # UL power on a DL SC
    kinds = check_feasibility(a, scn).kinds()
    assert {"fronthaul", "duplex-power"} <= kinds


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        check_feasibility(Allocation.empty(1, 1, 1), standard_scenario(K=2, M=2, N=2))


@given(st.floats(1e-6, 1.0), st.floats(1e-6, 1.0), st.floats(1e-3, 1e3), st.integers(1, 16))
def test_ul_rate_monotone_in_power(p1, p2, g, beta):
    lo, hi = sorted((p1, p2))
    assert ul_rate([1], lo, [g], 1.0, beta) <= ul_rate([1], hi, [g], 1.0, beta) + 1e-15


@given(st.integers(1, 15), st.floats(1e-3, 1e3))
def test_ul_rate_monotone_in_bits(beta, g):
    assert ul_rate([1], 1.0, [g], 1.0, beta) <= ul_rate([1], 1.0, [g], 1.0, beta + 1) + 1e-15


@given(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=4))
def test_adding_an_rrh_never_hurts(gains):
    m = len(gains)
    fewer = [1] * (m - 1) + [0]
    assert ul_rate(fewer, 0.1, gains, 1.0, 8) <= ul_rate([1] * m, 0.1, gains, 1.0, 8)
    assert dl_rate(fewer, [0.1] * m, gains, 1.0) <= dl_rate([1] * m, [0.1] * m, gains, 1.0)
