import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranalloc.scenario import (D_MIN, ChannelRealization, Scenario, dbm_to_watt, distances,
                                draw_channels, noise_per_sc, standard_scenario, path_loss,
                                place_nodes, watt_to_dbm)


def test_positions_inside_square():
    for seed in range(5):
        users, rrhs = place_nodes(standard_scenario(seed=seed))
        pts = np.vstack([users, rrhs])
        assert pts.min() >= 0.0 and pts.max() <= 500.0


def test_colocated_nodes_are_clamped_to_one_metre():
    d = distances(np.array([[10.0, 10.0]]), np.array([[10.0, 10.0]]))
    assert d[0, 0] == D_MIN == 1.0


def test_placement_is_deterministic():
    a = place_nodes(standard_scenario(seed=7))
    b = place_nodes(standard_scenario(seed=7))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_path_loss_power_law():
    assert path_loss(20.0, 2e9, 3.0) / path_loss(10.0, 2e9, 3.0) == pytest.approx(2.0 ** -3)


def test_free_space_anchor_at_one_metre():
    expected = (299_792_458.0 / (4 * math.pi * 2e9)) ** 2
    assert path_loss(1.0, 2e9, 3.0) == pytest.approx(expected, rel=1e-12)
    assert 10 * math.log10(expected) == pytest.approx(-38.46, abs=0.01)


def test_small_scale_fading_has_unit_mean():
    scn = Scenario.from_config({"K": 1, "M": 1, "N": 100_000, "seed": 3})
    users = np.array([[0.0, 0.0]])
    rrhs = np.array([[10.0, 0.0]])
    chan = draw_channels(scn, positions=(users, rrhs))
    fading = chan.gu[0, 0] / path_loss(10.0, scn.carrier_hz, scn.pathloss_exp)
    assert abs(fading.mean() - 1.0) < 0.02
    # 3-sigma band of the exponential sample mean
    assert abs(fading.mean() - 1.0) < 3.0 / math.sqrt(fading.size)


def test_channels_reproducible_and_slot_dependent():
    scn = standard_scenario(K=3, M=2, N=8, seed=11)
    a, b = draw_channels(scn, 0), draw_channels(scn, 0)
    assert a.tobytes() == b.tobytes()
    c = draw_channels(scn, 1)
    assert not np.array_equal(a.gu, c.gu)
    assert np.array_equal(a.positions_users, c.positions_users)


def test_ul_and_dl_draws_are_independent():
    chan = draw_channels(standard_scenario(K=2, M=2, N=16, seed=2))
    assert not np.allclose(chan.gu, chan.gd, rtol=1e-3, atol=0.0)


def test_gains_strictly_positive():
    chan = draw_channels(standard_scenario(seed=5))
    assert np.all(chan.gu > 0) and np.all(np.isfinite(chan.gu))
    assert np.all(chan.gd > 0) and np.all(np.isfinite(chan.gd))


def test_noise_per_sc_matches_arithmetic():
    scn = standard_scenario(N=64)
    assert scn.sc_bandwidth_hz == 156_250.0
    expected_mw = 10 ** ((-174 + 10 * math.log10(156_250.0)) / 10)
    assert noise_per_sc(scn) == pytest.approx(expected_mw / 1000.0, rel=1e-12)
    assert expected_mw == pytest.approx(6.22e-13, rel=1e-3)


def test_halving_n_doubles_noise():
    assert noise_per_sc(standard_scenario(N=32)) == pytest.approx(2 * noise_per_sc(standard_scenario(N=64)))


def test_infinite_negative_psd_rejected():
    with pytest.raises(ValueError, match="noise"):
        Scenario.from_config({"K": 1, "M": 1, "N": 1, "noise_psd_dbm_hz": -math.inf})


@pytest.mark.parametrize("bad", [{"K": 0}, {"C": 0}, {"C": 65}, {"Pu": -1.0}, {"beta": 0},
                                 {"w": -0.5}, {"area_side": 0.0}])
def test_invariants_rejected(bad):
    cfg = {"K": 2, "M": 2, "N": 64}
    cfg.update(bad)
    with pytest.raises(ValueError):
        Scenario.from_config(cfg)


def test_unknown_config_key_rejected():
    with pytest.raises(ValueError, match="unknown"):
        Scenario.from_config({"K": 1, "M": 1, "N": 1, "bogus": 3})


def test_dbm_conversion_roundtrip():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(23.0) == pytest.approx(0.199526, rel=1e-5)
    assert watt_to_dbm(dbm_to_watt(17.5)) == pytest.approx(17.5)


def test_config_roundtrip():
    scn = standard_scenario(K=3, M=2, N=8, seed=4, w=1.3)
    again = Scenario.from_config(scn.to_config())
    assert again.to_config() == scn.to_config()


def test_csv_roundtrip_is_exact():
    chan = draw_channels(standard_scenario(K=2, M=2, N=3, seed=9))
    back = ChannelRealization.from_csv(chan.to_csv(), chan.positions_users, chan.positions_rrhs)
    assert back.tobytes() == chan.tobytes()


def test_nearest_rrh_breaks_ties_low():
    chan = ChannelRealization(np.ones((1, 2, 1)), np.ones((1, 2, 1)),
                              np.array([[5.0, 0.0]]), np.array([[0.0, 0.0], [10.0, 0.0]]))
    assert chan.nearest_rrh().tolist() == [0]


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 4), st.integers(1, 4), st.integers(1, 6))
def test_any_seed_gives_valid_channels(seed, K, M, N):
    scn = Scenario.from_config({"K": K, "M": M, "N": N, "C": 1, "seed": seed})
    chan = draw_channels(scn)
    assert chan.gu.shape == (K, M, N)
    assert np.all(chan.gu > 0) and np.all(chan.gd > 0)
