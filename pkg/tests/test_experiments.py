import csv
import math
from pathlib import Path

import numpy as np
import pytest

from cranalloc.experiments import (ExperimentSpec, duplex_pin, run_rate_region, run_sweep,
                                   solve_scheme)
from cranalloc.scenario import standard_scenario, draw_channels

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _spec(**kw):
    base = dict(scenario={"K": 2, "M": 2, "N": 4, "C": 2}, sweep_var="C", values=[2],
                schemes=["alg1"], seeds=[0])
    base.update(kw)
    return ExperimentSpec(**base)


def test_one_cell_gives_a_data_row_and_a_mean_row(tmp_path):
    out = tmp_path / "s.csv"
    rows = run_sweep(_spec(out=str(out)))
    assert len(rows) == 2
    assert rows[0]["status"] == "ok" and rows[1]["seed"] == "mean"
    assert rows[1]["throughput"] == pytest.approx(rows[0]["throughput"])
    with open(out) as fh:
        assert len(list(csv.DictReader(fh))) == 2


def test_sweep_is_deterministic():
    a = run_sweep(_spec(seeds=[0, 1]))
    b = run_sweep(_spec(seeds=[0, 1]))
    assert [r["throughput"] for r in a] == [r["throughput"] for r in b]


def test_threaded_sweep_keeps_row_order():
    spec = _spec(seeds=[0, 1], values=[1, 2], schemes=["alg2", "epa"])
    serial = run_sweep(spec)
    threaded = run_sweep(spec, threads=2)
    key = [(r["value"], r["scheme"], r["seed"]) for r in serial]
    assert key == [(r["value"], r["scheme"], r["seed"]) for r in threaded]
    assert [r["throughput"] for r in serial] == [r["throughput"] for r in threaded]


def test_throughput_grows_with_fronthaul_cap():
    rows = run_sweep(_spec(scenario={"K": 2, "M": 2, "N": 4}, values=[1, 2, 4], seeds=[0, 1]))
    means = [r["throughput"] for r in rows if r["seed"] == "mean"]
    assert means[0] <= means[1] + 1e-6 <= means[2] + 2e-6


def test_c_tied_to_n():
    spec = _spec(scenario={"K": 1, "M": 1, "C": "N"}, sweep_var="N", values=[1, 3])
    assert spec.scenario_for(3, 0).C.tolist() == [3]


def test_failed_cell_is_recorded_and_the_sweep_continues():
    spec = _spec(scenario={"K": 8, "M": 4, "N": 16}, sweep_var="C", values=[8],
                 schemes=["exhaustive", "epa"])
    rows = run_sweep(spec)
    assert rows[0]["status"].startswith("error") and math.isnan(rows[0]["throughput"])
    assert rows[1]["status"] == "mean of 0/1"
    assert rows[2]["status"] == "ok"


def test_bits_per_second_scaling():
    plain = run_sweep(_spec())[0]["throughput"]
    scaled = run_sweep(_spec(bits_per_sec=True))[0]["throughput"]
    assert scaled == pytest.approx(plain * 10e6 / 4)


@pytest.mark.parametrize("bad", [dict(sweep_var="beta"), dict(values=[]), dict(seeds=[]),
                                 dict(schemes=["magic"]), dict(mode="half"),
                                 dict(values=[0])])
def test_invalid_specs_rejected(bad):
    with pytest.raises(ValueError):
        _spec(**bad)


def test_default_pin_splits_the_band():
    assert duplex_pin(_spec(), 4).tolist() == [0, 0, 1, 1]
    assert duplex_pin(_spec(y_pin=1), 3).tolist() == [1, 1, 1]


def test_exhaustive_only_in_flexible_mode():
    scn = standard_scenario(K=1, M=1, N=1, C=1)
    with pytest.raises(ValueError):
        solve_scheme("exhaustive", scn, draw_channels(scn), "tdd")


def test_rate_region_extremes_and_monotonicity():
    spec = _spec(scenario={"K": 2, "M": 2, "N": 4, "C": 4}, sweep_var="w",
                 values=[0.0, 0.5, 1.0, 2.0, 50.0], schemes=["alg2"], seeds=[0])
    rows = [r for r in run_rate_region(spec) if r["seed"] == "mean"]
    ul = [r["ul_rate"] for r in rows]
    dl = [r["dl_rate"] for r in rows]
    assert ul[0] == 0.0 and dl[-1] == 0.0
    assert all(b >= a for a, b in zip(ul, ul[1:]))
    assert all(b <= a for a, b in zip(dl, dl[1:]))


def test_rate_region_needs_weight_sweep():
    with pytest.raises(ValueError):
        run_rate_region(_spec())


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_load(path):
    import yaml
    data = yaml.safe_load(path.read_text())
    if "sweep" in data or "sweep_var" in data:
        ExperimentSpec.load(path)
    else:
        from cranalloc.scenario import Scenario
        Scenario.from_config(data["scenario"])
