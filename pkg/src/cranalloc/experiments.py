"""Parameter sweeps and rate-region runs producing tidy CSV tables."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import baselines
from .dual import FIXED, FLEXIBLE, MODES, SolveReport, SolverOptions, run_algorithm1
from .rates import check_feasibility
from .scenario import Scenario, draw_channels, watt_to_dbm
from .subproblems import EXHAUSTIVE, HEURISTIC

log = logging.getLogger(__name__)

SWEEP_VARS = ("N", "C", "Pu_dbm", "K", "M", "w")
SCHEMES = ("alg1", "alg2", "epa", "asa", "nrs", "exhaustive")

ROW_FIELDS = ("sweep_var", "value", "scheme", "mode", "K", "M", "N", "C", "Pu_dbm", "Pr_dbm",
              "w", "seed", "throughput", "ul_rate", "dl_rate", "dual_bound", "gap", "iters",
              "wall_ms", "status")
REGION_FIELDS = ("w", "seed", "ul_rate", "dl_rate", "source_w")


@dataclass
class ExperimentSpec:
    """One sweep: a scenario template, one swept parameter and its values,
    the schemes and seeds to run, the duplex mode and the output path.

    In the template ``C: N`` ties the SC cap to the (possibly swept) ``N``.
    """

    scenario: dict
    sweep_var: str
    values: list
    schemes: list = field(default_factory=lambda: ["alg1"])
    seeds: list = field(default_factory=lambda: [0])
    mode: str = FLEXIBLE
    out: str | None = None
    y_pin: Any = None
    solver: dict = field(default_factory=dict)
    bits_per_sec: bool = False

    def __post_init__(self):
        if self.sweep_var not in SWEEP_VARS:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARS}, got {self.sweep_var!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if not self.seeds:
            raise ValueError("sweep needs at least one seed")
        if not self.schemes:
            raise ValueError("sweep needs at least one scheme")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ValueError(f"unknown schemes {sorted(unknown)}; choose from {SCHEMES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for v in self.values:  # fail early on out-of-range values
            self.scenario_for(v, self.seeds[0])

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        sweep = d.pop("sweep", None)
        if sweep is not None:
            d.setdefault("sweep_var", sweep["var"])
            d.setdefault("values", sweep["values"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(yaml.safe_load(fh))

    def scenario_for(self, value, seed: int) -> Scenario:
        cfg = dict(self.scenario)
        cfg[self.sweep_var] = value
        cfg["seed"] = int(seed)
        if self.sweep_var == "N" and "C" not in self.scenario:
            cfg.pop("C", None)  # keep the default C = N / 2 tied to N
        if cfg.get("C") == "N":  # every RRH may serve every SC
            cfg["C"] = cfg["N"]
        return Scenario.from_config(cfg)

    def solver_options(self) -> SolverOptions:
        return SolverOptions(**self.solver)


def duplex_pin(spec: ExperimentSpec, N: int):
    """Duplex pin for fixed FDD; by default the lower half of the band is
    downlink and the upper half uplink."""
    if spec.y_pin is None:
        return (np.arange(N) >= N // 2).astype(int)
    return np.broadcast_to(np.asarray(spec.y_pin, dtype=int), (N,))


def solve_scheme(scheme: str, scn: Scenario, chan, mode: str = FLEXIBLE, y_pin=None,
                 options: SolverOptions | None = None) -> SolveReport:
    """Dispatch one scheme under one duplex mode."""
    if scheme == "exhaustive":
        if mode != FLEXIBLE:
            raise ValueError("exhaustive search runs in flexible mode only")
        return baselines.exhaustive_global(scn, chan)
    if scheme in ("alg1", "alg2"):
        selector = EXHAUSTIVE if scheme == "alg1" else HEURISTIC
        return run_algorithm1(scn, chan, mode, selector, y_pin, options)
    fn = {"epa": baselines.epa_solve, "asa": baselines.asa_solve,
          "nrs": baselines.nrs_solve}[scheme]
    return fn(scn, chan, mode, y_pin, options)


def _run_cell(spec: ExperimentSpec, value, seed, scheme) -> dict:
    scn = spec.scenario_for(value, seed)
    row = {"sweep_var": spec.sweep_var, "value": value, "scheme": scheme, "mode": spec.mode,
           "K": scn.K, "M": scn.M, "N": scn.N, "C": int(scn.C[0]),
           "Pu_dbm": round(float(watt_to_dbm(scn.Pu[0])), 6),
           "Pr_dbm": round(float(watt_to_dbm(scn.Pr[0])), 6), "w": float(scn.w[0]),
           "seed": seed}
    t0 = time.perf_counter()
    try:
        chan = draw_channels(scn)
        pin = duplex_pin(spec, scn.N) if spec.mode == FIXED else None
        rep = solve_scheme(scheme, scn, chan, spec.mode, pin, spec.solver_options())
        report = check_feasibility(rep.allocation, scn)
        if not report.ok:
            raise RuntimeError(f"infeasible allocation: {report.violations[:3]}")
        scale = scn.sc_bandwidth_hz if spec.bits_per_sec else 1.0
        row.update(throughput=rep.primal_value * scale, ul_rate=rep.ul_rate * scale,
                   dl_rate=rep.dl_rate * scale, dual_bound=rep.dual_bound * scale,
                   gap=rep.gap, iters=rep.iters, status="ok")
    except Exception as exc:  # recorded as a failed row; the sweep continues
        log.warning("cell %s=%s seed=%s scheme=%s failed: %s", spec.sweep_var, value, seed,
                    scheme, exc)
        row.update(throughput=math.nan, ul_rate=math.nan, dl_rate=math.nan,
                   dual_bound=math.nan, gap=math.nan, iters=0, status=f"error: {exc}")
    row["wall_ms"] = (time.perf_counter() - t0) * 1e3
    return row


def _mean_row(rows: list[dict]) -> dict:
    out = dict(rows[0])
    out["seed"] = "mean"
    ok = [r for r in rows if r["status"] == "ok"]
    for key in ("throughput", "ul_rate", "dl_rate", "dual_bound", "gap", "iters", "wall_ms"):
        vals = [float(r[key]) for r in ok]
        out[key] = float(np.mean(vals)) if vals else math.nan
    out["status"] = f"mean of {len(ok)}/{len(rows)}"
    return out


def run_sweep(spec: ExperimentSpec, threads: int = 1,
              progress: Callable[[dict], None] | None = None) -> list[dict]:
    """Run every (value, seed, scheme) cell; returns data rows followed, per
    (value, scheme), by a seed-average row. Rows keep cell order whatever
    the thread count."""
    cells = [(v, s, sch) for v in spec.values for sch in spec.schemes for s in spec.seeds]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda c: _run_cell(spec, *c), cells))
    else:
        rows = []
        for c in cells:
            rows.append(_run_cell(spec, *c))
            if progress:
                progress(rows[-1])
    table = []
    per = len(spec.seeds)
    for i in range(0, len(rows), per):
        group = rows[i:i + per]
        table.extend(group)
        table.append(_mean_row(group))
    if spec.out:
        write_csv(table, spec.out, ROW_FIELDS)
    return table


def write_csv(rows: list[dict], path, fields) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _fmt(r.get(k)) for k in fields})


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 10)) if math.isfinite(v) else "nan"
    return v


def write_json(rows: list[dict], path) -> None:
    Path(path).write_text(json.dumps(rows, indent=1, default=float))


# --------------------------------------------------------------------------
# rate region


def run_rate_region(spec: ExperimentSpec, scheme: str | None = None) -> list[dict]:
    """Unweighted UL and DL sum rates as the uniform UL weight varies.

    For each seed all allocations found along the ``w`` grid are pooled and,
    for every ``w``, the pooled allocation maximizing ``w * UL + DL`` is
    reported. Every pooled allocation is feasible for the same channel, so
    this only improves each point and makes the traced boundary monotone.
    Returns per-seed rows followed by one seed-average row per ``w``.
    """
    if spec.sweep_var != "w":
        raise ValueError("the rate region sweeps the uplink weight w")
    scheme = scheme or (spec.schemes[0] if spec.schemes else "alg2")
    grid = [float(v) for v in spec.values]
    per_seed: list[list[dict]] = []
    for seed in spec.seeds:
        pool: list[tuple[float, float, float]] = []  # (ul, dl, w it was computed for)
        for w in grid:
            scn = spec.scenario_for(w, seed)
            chan = draw_channels(scn)
            pin = duplex_pin(spec, scn.N) if spec.mode == FIXED else None
            rep = solve_scheme(scheme, scn, chan, spec.mode, pin, spec.solver_options())
            if not check_feasibility(rep.allocation, scn).ok:
                raise RuntimeError(f"infeasible allocation at w={w}, seed={seed}")
            pool.append(_canonical(pool, rep.ul_rate, rep.dl_rate, w))
        rows = []
        for w in grid:
            rows.append(dict(zip(("w", "seed", "ul_rate", "dl_rate", "source_w"),
                                 (w, seed) + _pick(pool, w))))
        per_seed.append(rows)
    table = [r for rows in per_seed for r in rows]
    for i, w in enumerate(grid):
        table.append({"w": w, "seed": "mean",
                      "ul_rate": float(np.mean([rows[i]["ul_rate"] for rows in per_seed])),
                      "dl_rate": float(np.mean([rows[i]["dl_rate"] for rows in per_seed])),
                      "source_w": ""})
    if spec.out:
        write_csv(table, spec.out, REGION_FIELDS)
    return table


def _canonical(pool, ul, dl, w, rtol=1e-9):
    """Reuse the rates of a pooled point that differs only by rounding, so the
    same allocation found at two weights compares as an exact tie."""
    for u, d, _ in pool:
        if math.isclose(u, ul, rel_tol=rtol, abs_tol=1e-12) and \
                math.isclose(d, dl, rel_tol=rtol, abs_tol=1e-12):
            return u, d, w
    return ul, dl, w


def _pick(pool, w, rtol=1e-12):
    """Pooled point maximizing ``w * ul + dl``.

    Near-ties go to the larger UL rate for ``w > 0`` and the smaller one for
    ``w = 0``; the chosen UL rate is then nondecreasing in ``w``.
    """
    vals = np.array([w * u + d for u, d, _ in pool])
    best = vals.max()
    tied = [i for i, v in enumerate(vals) if v >= best - rtol * max(abs(best), 1.0)]
    if w > 0:
        i = max(tied, key=lambda j: (pool[j][0], pool[j][1]))
    else:
        i = min(tied, key=lambda j: (pool[j][0], -pool[j][1]))
    return pool[i][0], pool[i][1], pool[i][2]
