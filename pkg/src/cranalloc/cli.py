"""Command-line entry point: ``cranalloc run|sweep|region|validate``."""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .dual import FIXED, MODES
from .experiments import (REGION_FIELDS, SCHEMES, ExperimentSpec, duplex_pin, run_rate_region,
                          run_sweep, solve_scheme, write_csv)
from .scenario import Scenario, draw_channels

OUT_ENV = "CRANALLOC_OUT"


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "results")) / name


def _load_yaml(path) -> dict:
    with open(path) as fh:
        return yaml.safe_load(fh) or {}


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more logging.")
def main(verbose):
    """Joint UL/DL resource allocation experiments."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False),
              help="YAML file with a 'scenario' mapping (and optional 'scheme', 'solver').")
@click.option("--scheme", type=click.Choice(SCHEMES), default=None)
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="JSON report path (default: $CRANALLOC_OUT/run.json).")
@click.option("--trace", type=click.Path(dir_okay=False), default=None,
              help="Write the per-iteration dual trace as CSV.")
@click.option("--bits-per-sec", is_flag=True, help="Scale rates by the SC bandwidth.")
@click.option("--threads", type=int, default=1, help="Accepted for symmetry; a single solve is sequential.")
def run(spec_path, scheme, mode, seed, out, trace, bits_per_sec, threads):
    """Solve one instance and print a summary."""
    cfg = _load_yaml(spec_path) if spec_path else {}
    scen_cfg = dict(cfg.get("scenario", {}))
    if seed is not None:
        scen_cfg["seed"] = seed
    scn = Scenario.from_config(scen_cfg)
    scheme = scheme or cfg.get("scheme", "alg1")
    mode = mode or cfg.get("mode", "flexible")
    solver = dict(cfg.get("solver", {}))
    if trace:
        solver["trace_path"] = trace
    spec_like = ExperimentSpec(scenario=scen_cfg, sweep_var="w", values=[float(scn.w[0])],
                               schemes=[scheme], mode=mode, y_pin=cfg.get("y_pin"),
                               solver=solver)
    chan = draw_channels(scn)
    pin = duplex_pin(spec_like, scn.N) if mode == FIXED else None
    rep = solve_scheme(scheme, scn, chan, mode, pin, spec_like.solver_options())
    summary = rep.summary()
    if bits_per_sec:
        bw = scn.sc_bandwidth_hz
        for key in ("throughput", "ul_rate", "dl_rate", "dual_bound"):
            summary[key] *= bw
    summary["scenario"] = scn.to_config()
    summary["allocation"] = rep.allocation.to_dict()
    path = Path(out) if out else _default_out("run.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=1, default=_json_default))
    click.echo(f"{scheme} [{mode}] throughput={summary['throughput']:.6g} "
               f"ul={summary['ul_rate']:.6g} dl={summary['dl_rate']:.6g} "
               f"dual_bound={summary['dual_bound']:.6g} iters={rep.iters} -> {path}")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _spec_from(path, mode, out, bits_per_sec, name) -> ExperimentSpec:
    spec = ExperimentSpec.from_dict(_load_yaml(path))
    if mode:
        spec.mode = mode
    spec.out = out or spec.out or str(_default_out(name))
    if bits_per_sec:
        spec.bits_per_sec = True
    return spec


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--bits-per-sec", is_flag=True)
def sweep(spec_path, out, mode, threads, bits_per_sec):
    """Run a parameter sweep described by a YAML experiment spec."""
    spec = _spec_from(spec_path, mode, out, bits_per_sec, "sweep.csv")

    def progress(row):
        click.echo(f"{spec.sweep_var}={row['value']} seed={row['seed']} {row['scheme']}: "
                   f"{row['throughput']:.6g} ({row['status']})", err=True)

    rows = run_sweep(spec, threads=threads, progress=progress)
    for r in rows:
        if r["seed"] == "mean":
            click.echo(f"{spec.sweep_var}={r['value']:<8} {r['scheme']:<10} "
                       f"throughput={r['throughput']:.6g}")
    click.echo(f"wrote {len(rows)} rows to {spec.out}")


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--threads", type=int, default=1, help="Accepted for symmetry; runs sequentially.")
@click.option("--bits-per-sec", is_flag=True)
def region(spec_path, out, mode, threads, bits_per_sec):
    """Trace the UL/DL rate region over a grid of uplink weights."""
    spec = _spec_from(spec_path, mode, out, bits_per_sec, "region.csv")
    rows = run_rate_region(spec)
    scale = 1.0
    if spec.bits_per_sec:
        scale = spec.scenario_for(spec.values[0], spec.seeds[0]).sc_bandwidth_hz
        for r in rows:
            r["ul_rate"] *= scale
            r["dl_rate"] *= scale
        write_csv(rows, spec.out, REGION_FIELDS)
    for r in rows:
        if r["seed"] == "mean":
            click.echo(f"w={r['w']:<6g} ul={r['ul_rate']:.6g} dl={r['dl_rate']:.6g}")
    click.echo(f"wrote {len(rows)} rows to {spec.out}")


@main.command()
@click.argument("suite")
@click.option("--seeds", type=int, default=None, help="Override the suite's seed count.")
def validate(suite, seeds):
    """Run an oracle suite: closed-forms, subgradients, duality, feasibility, baselines."""
    from .validation import SUITES, run_suite
    if suite not in SUITES:
        raise click.BadParameter(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}",
                                 param_hint="SUITE")
    results = run_suite(suite, seeds)
    failed = 0
    for name, ok, detail in results:
        click.echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    click.echo(f"{suite}: {len(results) - failed}/{len(results)} checks passed")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":  # pragma: no cover
    main()
