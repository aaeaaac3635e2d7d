"""Dual decomposition driver.

The coupled problem is relaxed with prices on the per-user UL budgets
(``lam``), the per-RRH DL budgets (``mu``) and the per-RRH SC caps
(``nu``). For fixed prices it splits into independent per-SC problems; the
dual function is minimized with the central-cut ellipsoid method and a
feasible allocation is recovered from the visited per-SC patterns.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .ellipsoid import DualState, clip_to_box, ellipsoid_step
from .power import LN2
from . import power
from .rates import Allocation, direction_rates, total_throughput
from .recovery import RecoveryError, recover_primal
from .scenario import ChannelRealization, Scenario
from .subproblems import (EXHAUSTIVE, Problem, Restrictions, ScBatch, solve_all,
                          split_z)

log = logging.getLogger(__name__)

FLEXIBLE = "flexible"
FIXED = "fixed"
TDD = "tdd"
MODES = (FLEXIBLE, FIXED, TDD)

BOX_WEIGHT = 0.9  # share of the ellipsoid's own form when clipping to the box

TRACE_FIELDS = ("iter", "g", "min_g", "lower", "width", "resid_ul", "resid_dl", "resid_sc",
                "recovered")


@dataclass
class SolverOptions:
    """Knobs of the dual iteration.

    With ``per_axis`` the initial ellipsoid has semi-axes
    ``radius_factor * sqrt(n) * bound_i`` where ``bound_i`` is an a-priori
    bound on the optimal multiplier (see :func:`multiplier_bounds`), so it
    provably contains the dual optimum for ``radius_factor >= 1``. Otherwise
    it is the ball of radius ``radius_factor * max(center)``.

    The iteration stops once ``min g`` is within ``eps_conv * (1 + |min g|)``
    of a certified lower bound on the dual optimum.
    """

    iter_max: int = 20000
    eps_conv: float = 1e-5
    radius_factor: float = 1.0
    per_axis: bool = True
    recovery_window: int = 8
    trace_path: str | None = None


@dataclass
class SolveReport:
    allocation: Allocation
    dual_bound: float
    primal_value: float
    iters: int
    converged: bool
    scheme: str = "alg1"
    mode: str = FLEXIBLE
    z: np.ndarray | None = None
    wall_ms: float = 0.0
    ul_rate: float = 0.0
    dl_rate: float = 0.0
    inner_converged: bool = True
    trace: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        if not np.isfinite(self.dual_bound):
            return float("nan")
        return (self.dual_bound - self.primal_value) / max(self.primal_value, 1e-12)

    def summary(self) -> dict:
        return {"scheme": self.scheme, "mode": self.mode, "throughput": self.primal_value,
                "ul_rate": self.ul_rate, "dl_rate": self.dl_rate,
                "dual_bound": self.dual_bound, "gap": self.gap, "iters": self.iters,
                "converged": self.converged, "wall_ms": self.wall_ms}

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=TRACE_FIELDS)
        writer.writeheader()
        writer.writerows(self.trace)
        return buf.getvalue()


# --------------------------------------------------------------------------
# single-SC building blocks


def subproblem_ul(prob: Problem, n: int, k: int, rrh_set, z):
    """UL per-SC Lagrangian for user ``k`` served by ``rrh_set`` on SC ``n``.

    Returns ``(value, power)``; the empty set gives ``(0, 0)``.
    """
    lam, _, nu = split_z(z, prob.K, prob.M)
    mask = _set_mask(rrh_set, prob.M)
    if not mask.any():
        return 0.0, 0.0
    g = np.where(mask, prob.gu[n, k], 0.0)
    w = float(prob.scn.w[k])
    p = float(power.ul_optimal_power(w, lam[k], g, mask, prob.sigma2, prob.eta,
                                     prob.p_cap[k]))
    rate = np.log1p(power.ul_sum_sinr(p, g, prob.sigma2, prob.eta)) / LN2
    return float(w * rate - lam[k] * p - nu[mask].sum()), p


def subproblem_dl(prob: Problem, n: int, k: int, rrh_set, z):
    """DL per-SC Lagrangian; returns ``(value, powers)`` with length-M powers."""
    _, mu, nu = split_z(z, prob.K, prob.M)
    mask = _set_mask(rrh_set, prob.M)
    if not mask.any():
        return 0.0, np.zeros(prob.M)
    g = prob.gd[n, k]
    pd = power.dl_power_closed_form(mu, g, mask, prob.sigma2)
    rate = power.dl_rate_of_powers(pd, g, mask, prob.sigma2)
    return float(rate - (mu * pd).sum() - nu[mask].sum()), pd


def solve_sc(prob: Problem, n: int, z, selector: str = EXHAUSTIVE):
    """Best ``(k, rrh_set, y, pu, pd, value)`` on SC ``n`` at prices ``z``."""
    batch = solve_all(prob, z, None, selector)
    mask = batch.mask[n]
    rrhs = tuple(int(m) for m in np.flatnonzero(mask))
    k = int(batch.k[n]) if mask.any() else 0
    y = int(batch.y[n])
    return k, rrhs, y, float(batch.pu[n]), batch.pd[n].copy(), float(batch.value[n])


def _set_mask(rrh_set, M: int) -> np.ndarray:
    mask = np.zeros(M, dtype=bool)
    mask[list(rrh_set)] = True
    return mask


# --------------------------------------------------------------------------
# dual function


def constraint_levels(prob: Problem) -> np.ndarray:
    scn = prob.scn
    return np.concatenate([scn.Pu, scn.Pr, scn.C.astype(float)])


def dual_value(prob: Problem, z, restr: Restrictions | None = None,
               selector: str = EXHAUSTIVE):
    """``g(z) = sum_n L_n*(z) + lam.Pu + mu.Pr + nu.C``; returns ``(g, batch)``."""
    z = np.maximum(np.asarray(z, dtype=float), 0.0)
    batch = solve_all(prob, z, restr, selector)
    g = float(batch.value.sum() + z @ constraint_levels(prob))
    return g, batch


def subgradient(prob: Problem, batch: ScBatch) -> np.ndarray:
    """Budget slack at the per-SC maximizers: a subgradient of ``g``."""
    ul, dl, cnt = batch.usage(prob.K, prob.M)
    return constraint_levels(prob) - np.concatenate([ul, dl, cnt])


# --------------------------------------------------------------------------
# driver


def initial_center(prob: Problem) -> np.ndarray:
    """Prices at which budget-sized per-SC powers emerge."""
    scn = prob.scn
    return np.concatenate([prob.N / scn.Pu, prob.N / scn.Pr, np.ones(prob.M)])


def multiplier_bounds(prob: Problem) -> np.ndarray:
    """Upper bounds on the optimal multipliers.

    Some SC carries at least ``P/N`` of every used budget, and the marginal
    rate per watt on it is at most ``w / (ln2 p)``; this bounds ``lam`` and
    ``mu``. A SC-cap price never exceeds the best single-SC rate.
    """
    scn = prob.scn
    wmax = np.maximum(scn.w, 1.0)
    lam = wmax * prob.N / (scn.Pu * LN2)
    mu = prob.N / (scn.Pr * LN2)
    snr_ul = (prob.gu * scn.Pu[None, :, None]).sum(axis=-1) / prob.sigma2
    amp = np.sqrt(prob.gd * scn.Pr).sum(axis=-1)
    snr_dl = amp ** 2 / prob.sigma2
    rate = max(float((wmax * np.log2(1.0 + snr_ul)).max()), float(np.log2(1.0 + snr_dl).max()))
    return np.concatenate([lam, mu, np.full(prob.M, rate)])


def mode_restrictions(prob: Problem, mode: str, y_pin=None,
                      base: Restrictions | None = None) -> Restrictions:
    base = base or Restrictions()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == FLEXIBLE:
        return base
    if y_pin is None:
        raise ValueError(f"mode {mode!r} needs a duplex pin")
    pin = np.broadcast_to(np.asarray(y_pin, dtype=int), (prob.N,))
    allowed = np.zeros((prob.N, 2), dtype=bool)
    allowed[np.arange(prob.N), pin] = True
    if base.allowed_y is not None:
        allowed &= np.asarray(base.allowed_y, dtype=bool)
    return Restrictions(allowed, base.allowed_k, base.single_rrh, base.fixed_power)


def _active_axes(prob: Problem, restr: Restrictions) -> np.ndarray:
    """Multipliers updated by the ellipsoid; only ``nu`` under fixed powers."""
    if restr.fixed_power:
        return np.arange(prob.K + prob.M, prob.dim)
    return np.arange(prob.dim)


def run_dual(prob: Problem, restr: Restrictions | None = None, selector: str = EXHAUSTIVE,
             options: SolverOptions | None = None, *, scheme: str = "alg1",
             mode: str = FLEXIBLE) -> SolveReport:
    """Ellipsoid minimization of the dual followed by primal recovery."""
    restr = restr or Restrictions()
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    axes = _active_axes(prob, restr)
    full_center = initial_center(prob)
    if restr.fixed_power:
        full_center[: prob.K + prob.M] = 0.0
    center = full_center[axes]
    upper = multiplier_bounds(prob)[axes]  # the optimum lies in [0, upper]
    if opts.per_axis:
        radius = opts.radius_factor * np.sqrt(len(axes)) * upper
    else:
        radius = opts.radius_factor * center.max()
    state = DualState.ball(center, radius)
    # squared semi-axis beyond which the ellipsoid is pulled back to the box:
    # four times the semi-axes of the ellipsoid circumscribing the box
    box_extent = 16.0 * len(axes) * (upper / 2.0) ** 2

    def embed(sub):
        z = np.zeros(prob.dim)
        z[axes] = np.maximum(sub, 0.0)
        return z

    levels = constraint_levels(prob)
    best_g, lower = np.inf, -np.inf
    best_z = embed(center)
    best_batch = None
    recent: dict[bytes, tuple[ScBatch, np.ndarray, int]] = {}
    trace = []
    converged = False
    while state.iter < opts.iter_max:
        # feasibility cuts keep the center inside the multiplier box; the
        # most violated side is cut first
        below = -state.center
        above = (state.center - upper) / upper
        i, j = int(np.argmax(below)), int(np.argmax(above))
        if below[i] > 0 or above[j] > 0:
            cut = np.zeros(len(axes))
            if below[i] > 0:
                cut[i] = -1.0
            else:
                cut[j] = 1.0
            state = ellipsoid_step(state, cut)
            continue
        z = embed(state.center)
        g, batch = dual_value(prob, z, restr, selector)
        sub = subgradient(prob, batch)
        cut = sub[axes]
        width = state.width(cut)
        # g(z*) >= g + cut . (z* - center), bounded over the ellipsoid and
        # over the box; both contain the optimum
        box_drop = np.minimum(-cut * state.center, cut * (upper - state.center)).sum()
        lower = max(lower, g - width, g + box_drop)
        if g < best_g:
            best_g, best_z, best_batch = g, z, batch
        key = batch.pattern_key()
        recent.pop(key, None)
        recent[key] = (batch, z, len(trace))
        while len(recent) > opts.recovery_window:
            recent.pop(next(iter(recent)))
        resid = -sub / np.maximum(levels, 1e-300)
        trace.append({"iter": state.iter, "g": g, "min_g": best_g, "lower": lower,
                      "width": width,
                      "resid_ul": float(resid[:prob.K].max(initial=0.0)),
                      "resid_dl": float(resid[prob.K:prob.K + prob.M].max(initial=0.0)),
                      "resid_sc": float(resid[prob.K + prob.M:].max(initial=0.0)),
                      "recovered": ""})
        if best_g - lower <= opts.eps_conv * (1.0 + abs(best_g)) or not np.any(cut):
            converged = True
            break
        state = ellipsoid_step(state, cut)
        if np.any(np.diag(state.shape) > box_extent):
            state = clip_to_box(state, 0.0, upper, BOX_WEIGHT)

    candidates = list(recent.values())
    if best_batch is not None and best_batch.pattern_key() not in recent:
        candidates.append((best_batch, best_z, None))
    best_alloc, best_val, inner_ok = None, -np.inf, True
    for batch, z, row in candidates:
        try:
            alloc, ok = recover_primal(prob, batch, z, restr)
        except RecoveryError as exc:  # pragma: no cover - diagnostic path
            log.warning("recovery failed: %s", exc)
            continue
        val = total_throughput(alloc, prob.chan, prob.scn)
        if row is not None:
            trace[row]["recovered"] = val
        if val > best_val:
            best_alloc, best_val, inner_ok = alloc, val, ok
    if best_alloc is None:
        best_alloc = Allocation.empty(prob.K, prob.M, prob.N)
        if mode != FLEXIBLE and restr.allowed_y is not None:
            best_alloc.y[:] = np.argmax(restr.allowed_y, axis=1)
        best_val = 0.0
    ul, dl = direction_rates(best_alloc, prob.chan, prob.scn)
    report = SolveReport(best_alloc, best_g, best_val, state.iter, converged, scheme, mode,
                         best_z, (time.perf_counter() - t0) * 1e3, ul, dl, inner_ok, trace)
    if opts.trace_path:
        with open(opts.trace_path, "w", newline="") as fh:
            fh.write(report.trace_csv())
    return report


def run_algorithm1(scn: Scenario, chan: ChannelRealization, mode: str = FLEXIBLE,
                   selector: str = EXHAUSTIVE, y_pin=None,
                   options: SolverOptions | None = None,
                   restrictions: Restrictions | None = None,
                   scheme: str | None = None) -> SolveReport:
    """Dual decomposition with the given per-SC selector.

    ``mode`` is ``"flexible"`` (free duplex per SC), ``"fixed"`` (duplex
    pinned by ``y_pin``) or ``"tdd"`` (all SCs share one direction; both
    directions are tried).
    """
    scheme = scheme or ("alg1" if selector == EXHAUSTIVE else "alg2")
    if mode == TDD:
        return solve_tdd(scn, chan, selector, options, restrictions, scheme)
    prob = Problem(scn, chan)
    restr = mode_restrictions(prob, mode, y_pin, restrictions)
    report = run_dual(prob, restr, selector, options, scheme=scheme, mode=mode)
    if mode == FIXED:
        report.allocation.y[:] = np.broadcast_to(np.asarray(y_pin, dtype=np.int8), (prob.N,))
    return report


def run_algorithm2(scn: Scenario, chan: ChannelRealization, mode: str = FLEXIBLE, y_pin=None,
                   options: SolverOptions | None = None) -> SolveReport:
    from .subproblems import HEURISTIC
    return run_algorithm1(scn, chan, mode, HEURISTIC, y_pin, options)


def solve_tdd(scn: Scenario, chan: ChannelRealization, selector: str = EXHAUSTIVE,
              options: SolverOptions | None = None,
              restrictions: Restrictions | None = None, scheme: str = "alg1") -> SolveReport:
    """Best of the all-uplink and all-downlink slot (downlink wins ties)."""
    best = None
    for direction in (0, 1):
        rep = run_algorithm1(scn, chan, FIXED, selector, direction, options, restrictions,
                             scheme)
        if best is None or rep.primal_value > best.primal_value:
            best = rep
    best.mode = TDD
    return best
