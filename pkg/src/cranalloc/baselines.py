"""Reference schemes: the global exhaustive optimum for tiny instances and
the three benchmark schemes (equal power, average SC assignment, nearest
RRH)."""

from __future__ import annotations

import itertools
import time

import numpy as np

from .dual import FLEXIBLE, SolveReport, SolverOptions, mode_restrictions, run_dual
from .rates import check_feasibility, direction_rates, total_throughput
from .recovery import build_allocation, dl_powers_joint, ul_user_powers
from .scenario import ChannelRealization, Scenario
from .subproblems import EXHAUSTIVE, Problem, Restrictions

ENUMERATION_CAP = 10 ** 7


class EnumerationTooLarge(ValueError):
    pass


def enumeration_size(scn: Scenario) -> int:
    """Number of joint discrete points ``(2**(M+1) K)**N``."""
    return (2 ** (scn.M + 1) * scn.K) ** scn.N


def exhaustive_global(scn: Scenario, chan: ChannelRealization,
                      cap: int = ENUMERATION_CAP) -> SolveReport:
    """Global optimum by enumerating every per-SC (direction, user, RRH set).

    Each joint discrete point that respects the SC caps gets its exact
    optimal powers (per-user UL and joint DL convex solves). Idle SCs are
    enumerated once rather than once per (direction, user).

    Raises
    ------
    EnumerationTooLarge
        If ``(2**(M+1) K)**N`` exceeds ``cap``.
    """
    size = enumeration_size(scn)
    if size > cap:
        raise EnumerationTooLarge(
            f"exhaustive search needs {size:.3e} points (K={scn.K}, M={scn.M}, N={scn.N}); "
            f"cap is {cap:.0e}")
    t0 = time.perf_counter()
    prob = Problem(scn, chan)
    K, N = prob.K, prob.N
    subsets = prob.subsets
    # an empty RRH set is the same idle SC whatever the user and direction
    idle = int(np.flatnonzero(~subsets.any(axis=1))[0])
    per_sc = [(0, 0, idle)] + [(y, k, s) for y in (0, 1) for k in range(K)
                               for s in range(len(subsets)) if s != idle]
    best_val, best = -np.inf, None
    for choice in itertools.product(per_sc, repeat=N):
        y = np.array([c[0] for c in choice], dtype=np.int8)
        k = np.array([c[1] for c in choice])
        mask = subsets[[c[2] for c in choice]]
        if np.any(mask.sum(axis=0) > scn.C):
            continue
        val, pu, pd = _exact_value(prob, k, mask, y)
        if val > best_val + 1e-12:
            best_val, best = val, (k, mask, y, pu, pd)
    k, mask, y, pu, pd = best
    alloc = build_allocation(prob, k, mask, y, pu, pd)
    value = total_throughput(alloc, chan, scn)
    ul, dl = direction_rates(alloc, chan, scn)
    return SolveReport(alloc, np.nan, value, int(size), True, "exhaustive", FLEXIBLE, None,
                       (time.perf_counter() - t0) * 1e3, ul, dl)


def _exact_value(prob: Problem, k, mask, y):
    active = mask.any(axis=1)
    pu = np.zeros((prob.K, prob.N))
    pd = np.zeros((prob.M, prob.N))
    total = 0.0
    ul = active & (y == 1)
    for user in range(prob.K):
        ns = np.flatnonzero(ul & (k == user))
        if len(ns):
            p, v = ul_user_powers(prob, user, ns, mask[ns])
            pu[user, ns] = p
            total += v
    dl = np.flatnonzero(active & (y == 0))
    if len(dl):
        p, v, _ = dl_powers_joint(prob, dl, k[dl], mask[dl])
        pd[:, dl] = p.T
        total += v
    return total, pu, pd


# --------------------------------------------------------------------------
# benchmark schemes


def _solve(prob: Problem, restr: Restrictions, scheme: str, mode: str, y_pin,
           options: SolverOptions | None, selector: str = EXHAUSTIVE) -> SolveReport:
    if mode == "tdd":
        best = None
        for direction in (0, 1):
            rep = _solve(prob, restr, scheme, "fixed", direction, options, selector)
            if best is None or rep.primal_value > best.primal_value:
                best = rep
        best.mode = "tdd"
        return best
    full = mode_restrictions(prob, mode, y_pin, restr)
    return run_dual(prob, full, selector, options, scheme=scheme, mode=mode)


def epa_solve(scn: Scenario, chan: ChannelRealization, mode: str = FLEXIBLE, y_pin=None,
              options: SolverOptions | None = None) -> SolveReport:
    """Equal power allocation: ``P_k/N`` per UL SC and ``P_m/C_m`` per DL SC;
    users, RRH sets and directions come from SC-cap prices alone."""
    prob = Problem(scn, chan)
    return _solve(prob, Restrictions(fixed_power=True), "epa", mode, y_pin, options)


def asa_blocks(N: int, K: int) -> np.ndarray:
    """SC-to-user map: contiguous blocks of ``N // K`` SCs in index order,
    leftover SCs dealt round-robin starting from user 0."""
    if K > N:
        raise ValueError(f"average assignment needs K <= N (K={K}, N={N})")
    size = N // K
    owner = np.empty(N, dtype=int)
    owner[: size * K] = np.repeat(np.arange(K), size)
    owner[size * K:] = np.arange(N - size * K) % K
    return owner


def asa_solve(scn: Scenario, chan: ChannelRealization, mode: str = FLEXIBLE, y_pin=None,
              options: SolverOptions | None = None) -> SolveReport:
    """Average SC assignment; direction, RRH sets and powers optimized."""
    prob = Problem(scn, chan)
    owner = asa_blocks(scn.N, scn.K)
    allowed = np.zeros((scn.N, scn.K), dtype=bool)
    allowed[np.arange(scn.N), owner] = True
    return _solve(prob, Restrictions(allowed_k=allowed), "asa", mode, y_pin, options)


def nrs_solve(scn: Scenario, chan: ChannelRealization, mode: str = FLEXIBLE, y_pin=None,
              options: SolverOptions | None = None) -> SolveReport:
    """Nearest-RRH selection: every user is served only by its closest RRH."""
    prob = Problem(scn, chan)
    nearest = chan.nearest_rrh()
    single = np.zeros((scn.K, scn.M), dtype=bool)
    single[np.arange(scn.K), nearest] = True
    return _solve(prob, Restrictions(single_rrh=single), "nrs", mode, y_pin, options)


def check_report(report: SolveReport, scn: Scenario) -> None:
    """Raise if a scheme returned an infeasible allocation."""
    fr = check_feasibility(report.allocation, scn)
    if not fr.ok:
        raise AssertionError(f"{report.scheme}: infeasible allocation: {fr.violations[:3]}")
