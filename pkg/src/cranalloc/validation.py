"""Oracle batteries behind ``cranalloc validate``.

Each suite runs fixed-seed checks of the engine against the slow reference
solvers in :mod:`cranalloc.oracles` or against structural contracts, and
returns ``(name, ok, detail)`` triples.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from . import oracles, power
from .baselines import asa_blocks, asa_solve, epa_solve, exhaustive_global, nrs_solve
from .dual import (FIXED, TDD, dual_value, run_algorithm1, run_algorithm2, subgradient)
from .rates import check_feasibility
from .scenario import draw_channels, standard_scenario
from .subproblems import Problem

Check = tuple[str, bool, str]

CLOSED_FORM_RTOL = 1e-6
WATERFILL_RTOL = 1e-12
SUBGRADIENT_RTOL = 1e-9
DUALITY_ATOL = 1e-6
COINCIDENCE_RTOL = 1e-6


# --------------------------------------------------------------------------
# random instances shared with the test-suite


def random_ul_case(rng: np.random.Generator) -> dict:
    """A single-RRH UL power problem with an interior or boundary optimum."""
    sigma2 = 10.0 ** rng.uniform(-14, -11)
    return {"w": rng.uniform(0.2, 3.0), "lam": 10.0 ** rng.uniform(-1, 2),
            "g": sigma2 * 10.0 ** rng.uniform(-1, 5), "sigma2": sigma2,
            "beta": int(rng.integers(2, 13))}


def random_dl_case(rng: np.random.Generator, m: int) -> dict:
    """A DL power problem on ``m`` serving RRHs."""
    sigma2 = 10.0 ** rng.uniform(-14, -11)
    return {"mu": 10.0 ** rng.uniform(-1, 1, m), "gains": sigma2 * 10.0 ** rng.uniform(-1, 4, m),
            "sigma2": sigma2}


def _rel_shortfall(best: float, got: float) -> float:
    """How far ``got`` falls below ``best``, relative; negative if above."""
    return (best - got) / max(abs(best), 1e-12)


# --------------------------------------------------------------------------
# suites


def closed_forms(seeds: int = 100) -> list[Check]:
    """Single-RRH UL and multi-RRH DL closed forms against the oracles."""
    rng = np.random.default_rng(20240)
    worst_ul = worst_dl = worst_wf = -np.inf
    for _ in range(seeds):
        c = random_ul_case(rng)
        eta = power.eta_of(c["beta"])
        p = float(power.ul_power_closed_form(c["w"], c["lam"], c["g"], c["sigma2"], c["beta"]))
        v = float(oracles.ul_lagrangian(p, c["w"], c["lam"], c["g"], c["sigma2"], eta))
        _, v_grid = oracles.ul_grid_oracle(c["w"], c["lam"], c["g"], c["sigma2"], eta,
                                           c["w"] / (c["lam"] * math.log(2.0)))
        worst_ul = max(worst_ul, _rel_shortfall(v_grid, v))

        m = int(rng.integers(1, 4))
        d = random_dl_case(rng, m)
        mask = np.ones(m, dtype=bool)
        pd = power.dl_power_closed_form(d["mu"], d["gains"], mask, d["sigma2"])
        v = oracles.dl_lagrangian(pd, d["mu"], d["gains"], d["sigma2"])
        _, v_pg = oracles.dl_projected_gradient_oracle(d["mu"], d["gains"], d["sigma2"])
        worst_dl = max(worst_dl, _rel_shortfall(v_pg, v))

        d1 = random_dl_case(rng, 1)
        p1 = power.dl_power_closed_form(d1["mu"], d1["gains"], np.ones(1, bool), d1["sigma2"])[0]
        wf = max(1.0 / (d1["mu"][0] * math.log(2.0)) - d1["sigma2"] / d1["gains"][0], 0.0)
        worst_wf = max(worst_wf, abs(p1 - wf) / max(wf, 1e-300) if wf else abs(p1))
    return [
        ("ul-closed-form-vs-grid", worst_ul <= CLOSED_FORM_RTOL,
         f"worst relative shortfall {worst_ul:.2e} over {seeds} cases"),
        ("dl-closed-form-vs-projected-gradient", worst_dl <= CLOSED_FORM_RTOL,
         f"worst relative shortfall {worst_dl:.2e} over {seeds} cases"),
        ("dl-single-rrh-water-filling", worst_wf <= WATERFILL_RTOL,
         f"worst relative deviation {worst_wf:.2e}"),
    ]


def random_prices(prob: Problem, rng: np.random.Generator) -> np.ndarray:
    """Positive multipliers spread a few decades around the natural scale."""
    scn = prob.scn
    base = np.concatenate([prob.N / scn.Pu, prob.N / scn.Pr, np.ones(prob.M)])
    return base * 10.0 ** rng.uniform(-1.5, 1.5, prob.dim)


def subgradients(seeds: int = 100) -> list[Check]:
    """``g(z') >= g(z) + s(z).(z' - z)`` on random pairs of prices."""
    scn = standard_scenario(K=2, M=2, N=4, seed=3)
    prob = Problem(scn, draw_channels(scn))
    rng = np.random.default_rng(7)
    worst = np.inf
    for _ in range(seeds):
        z, z2 = random_prices(prob, rng), random_prices(prob, rng)
        g, batch = dual_value(prob, z)
        g2, _ = dual_value(prob, z2)
        slack = g2 - g - subgradient(prob, batch) @ (z2 - z)
        worst = min(worst, slack / abs(g))
    return [("subgradient-inequality", worst >= -SUBGRADIENT_RTOL,
             f"min relative slack {worst:.2e} over {seeds} pairs")]


def duality(seeds: int = 5) -> list[Check]:
    """Weak duality and the two independent exhaustive searches agree."""
    out = []
    for seed in range(seeds):
        scn = standard_scenario(K=2, M=2, N=2, C=2, seed=seed)
        chan = draw_channels(scn)
        exact = exhaustive_global(scn, chan)
        rep = run_algorithm1(scn, chan)
        ref = oracles.exhaustive_oracle(scn, chan)
        out.append((f"weak-duality[seed={seed}]", exact.primal_value <= rep.dual_bound + DUALITY_ATOL,
                    f"exhaustive {exact.primal_value:.6f} <= dual bound {rep.dual_bound:.6f}"))
        rel = abs(exact.primal_value - ref) / ref
        out.append((f"exhaustive-vs-nested-loops[seed={seed}]", rel <= 1e-6,
                    f"{exact.primal_value:.8f} vs {ref:.8f} (rel {rel:.1e})"))
    return out


def _all_reports(scn, chan):
    pin = (np.arange(scn.N) >= scn.N // 2).astype(int)
    yield "alg1", run_algorithm1(scn, chan)
    yield "alg2", run_algorithm2(scn, chan)
    yield "alg1-fixed", run_algorithm1(scn, chan, FIXED, y_pin=pin)
    yield "alg1-tdd", run_algorithm1(scn, chan, TDD)
    yield "epa", epa_solve(scn, chan)
    yield "asa", asa_solve(scn, chan)
    yield "nrs", nrs_solve(scn, chan)


def feasibility(seeds: int = 3) -> list[Check]:
    """Every scheme and duplex mode returns a feasible allocation."""
    out = []
    for seed in range(seeds):
        scn = standard_scenario(K=3, M=3, N=8, seed=seed)
        chan = draw_channels(scn)
        for name, rep in _all_reports(scn, chan):
            fr = check_feasibility(rep.allocation, scn)
            out.append((f"{name}[seed={seed}]", fr.ok,
                        "no violations" if fr.ok else "; ".join(map(str, fr.violations[:3]))))
        scn = standard_scenario(K=2, M=2, N=2, C=1, seed=seed)
        fr = check_feasibility(exhaustive_global(scn, draw_channels(scn)).allocation, scn)
        out.append((f"exhaustive[seed={seed}]", fr.ok, "no violations" if fr.ok else str(fr.violations[0])))
    return out


def baselines(seeds: int = 3) -> list[Check]:
    """Structural contracts of the benchmark schemes."""
    owner = asa_blocks(10, 3)
    out = [("asa-blocks", owner.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2, 0],
            f"N=10, K=3 -> {owner.tolist()}")]
    for seed in range(seeds):
        scn = standard_scenario(K=3, M=3, N=8, seed=seed)
        chan = draw_channels(scn)
        epa = epa_solve(scn, chan)
        a = epa.allocation
        ul_ok = np.allclose(a.pu[a.pu > 0], np.repeat(scn.Pu, scn.N).reshape(scn.K, scn.N)[a.pu > 0] / scn.N)
        dl_ok = np.allclose(a.pd[a.pd > 0], (scn.Pr / scn.C)[:, None].repeat(scn.N, 1)[a.pd > 0])
        out.append((f"epa-powers[seed={seed}]", bool(ul_ok and dl_ok), "P/N per UL SC, P/C per DL SC"))
        nrs = nrs_solve(scn, chan).allocation
        sizes = nrs.x.sum(axis=1)  # (K, N)
        nearest = chan.nearest_rrh()
        only_nearest = all(set(np.flatnonzero(nrs.x[k, :, n])) <= {nearest[k]}
                           for k in range(scn.K) for n in range(scn.N))
        out.append((f"nrs-single-nearest[seed={seed}]", bool(sizes.max() <= 1 and only_nearest),
                    f"max set size {int(sizes.max())}"))
        asa = asa_solve(scn, chan).allocation
        users = asa.x.any(axis=1)  # (K, N)
        blocks = asa_blocks(scn.N, scn.K)
        owned = all(not users[k, n] or blocks[n] == k for k in range(scn.K) for n in range(scn.N))
        out.append((f"asa-owner[seed={seed}]", owned, "every served SC belongs to its block owner"))

        one_user = standard_scenario(K=1, M=3, N=8, seed=seed)
        ch1 = draw_channels(one_user)
        ref, got = run_algorithm1(one_user, ch1).primal_value, asa_solve(one_user, ch1).primal_value
        out.append((f"asa-equals-alg1-at-K=1[seed={seed}]",
                    abs(ref - got) <= COINCIDENCE_RTOL * ref, f"{got:.8f} vs {ref:.8f}"))
        one_rrh = standard_scenario(K=3, M=1, N=8, C=8, seed=seed)
        ch2 = draw_channels(one_rrh)
        ref, got = run_algorithm1(one_rrh, ch2).primal_value, nrs_solve(one_rrh, ch2).primal_value
        out.append((f"nrs-equals-alg1-at-M=1[seed={seed}]",
                    abs(ref - got) <= COINCIDENCE_RTOL * ref, f"{got:.8f} vs {ref:.8f}"))
    return out


SUITES: dict[str, Callable[..., list[Check]]] = {
    "closed-forms": closed_forms,
    "subgradients": subgradients,
    "duality": duality,
    "feasibility": feasibility,
    "baselines": baselines,
}


def run_suite(name: str, seeds: int | None = None) -> list[Check]:
    """Run one suite; ``seeds`` overrides its default case count."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    fn = SUITES[name]
    checks = fn() if seeds is None else fn(seeds)
    return [(n, bool(ok), detail) for n, ok, detail in checks]
