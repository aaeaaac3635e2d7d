"""Greedy sorted-channel RRH selection (the low-complexity heuristic).

For a fixed user and direction on a SC, RRHs are visited in descending
order of that user's channel gain and kept only if adding them strictly
raises the subproblem value. This replaces the ``2**M`` subset sweep with
at most M power solves per (SC, user, direction).
"""

from __future__ import annotations

import numpy as np

from . import power
from .power import LN2
from .subproblems import (Problem, Restrictions, ScBatch, _apply_restrictions, dl_powers,
                          dl_values, finalize, split_z, ul_values)

GREEDY_TOL = 1e-12


def _layout(prob: Problem, y: int):
    """Channel-only arrays of the greedy pass, built once per direction.

    The descending gain order never changes across dual iterations, so each
    (SC, user) column is sorted exactly once per problem.
    """
    lay = prob.greedy_layouts.get(y)
    if lay is None:
        gains = prob.gu if y == 1 else prob.gd
        N, K, M = gains.shape
        E = N * K
        flat = gains.reshape(E, M)
        order = np.argsort(-flat, axis=-1, kind="stable")
        prob.counters.sorts += E
        users = np.tile(np.arange(K), N)
        rows = np.arange(E)
        ranked = flat[rows[:, None], order]  # gains in visiting order
        lay = (flat, order, ranked, users, rows)
        prob.greedy_layouts[y] = lay
    return lay


def greedy_sets(prob: Problem, z, y: int, restr: Restrictions | None = None):
    """Greedy RRH sets for every (SC, user) in direction ``y``.

    Returns ``(mask, value, pu, history)`` where ``mask`` is (N, K, M),
    ``value`` and ``pu`` are (N, K) and ``history`` is the list of value
    arrays ``V^1 .. V^{M+1}``.
    """
    restr = restr or Restrictions()
    if restr.single_rrh is not None:
        raise ValueError("single-RRH restrictions need the exhaustive selector")
    lam, mu, nu = split_z(z, prob.K, prob.M)
    flat, order, ranked, users, rows = _layout(prob, y)
    N, K, M = prob.N, prob.K, prob.M
    E = N * K
    w = prob.scn.w[users]
    mask = np.zeros((E, M), dtype=bool)
    value = np.zeros(E)
    pu = np.zeros(E)
    history = [value.reshape(N, K).copy()]
    nu_cost = np.zeros(E)
    if y == 1:
        lam_u = np.maximum(lam[users], power.EPS_MULT)
        cap_u = prob.p_cap[users]
    else:
        # B grows by one term per added RRH
        b = np.zeros(E)
        b_terms = ranked / (prob.sigma2 * np.maximum(mu, power.EPS_MULT)[order])
    for l in range(M):
        solves = E
        m_l = order[:, l]
        cost = nu_cost + nu[m_l]
        cand = mask.copy()
        cand[rows, m_l] = True
        if y == 1:
            if restr.fixed_power:
                p = prob.epa_pu[users]
                g = np.where(cand, flat, 0.0)
            elif l == 0:
                p = np.minimum(power._ul_closed_form(w, lam_u, ranked[:, 0], prob.sigma2,
                                                     prob.eta), cap_u)
                g = np.where(cand, flat, 0.0)
            else:
                g = np.where(cand, flat, 0.0)
                # quantization noise only lowers the SINR, so noise-free
                # water-filling on the total gain bounds the value; skip the
                # solve where even that bound cannot beat the current set
                a_over_g = prob.sigma2 * (1.0 + prob.eta) / g.sum(axis=-1)
                p_ub = np.maximum(w / (lam_u * LN2) - a_over_g, 0.0)
                v_ub = w * np.log1p(p_ub / a_over_g) / LN2 - lam_u * p_ub
                live = v_ub - cost > value + GREEDY_TOL
                p = np.zeros(E)
                p[live] = power.ul_optimal_power(w[live], lam_u[live], g[live], cand[live],
                                                 prob.sigma2, prob.eta, cap_u[live])
                solves = int(live.sum())
            v = w * np.log1p(power.ul_sum_sinr(p, g, prob.sigma2, prob.eta)) / LN2
            if not restr.fixed_power:
                v = v - lam_u * p
            if solves < E:
                v = np.where(live, v, -np.inf)
        else:
            p = pu
            if restr.fixed_power:
                v = power.dl_rate_of_powers(prob.epa_pd, np.where(cand, flat, 0.0), cand,
                                            prob.sigma2)
            else:
                b_cand = b + b_terms[:, l]
                v = power.dl_lagrangian_value(b_cand)
        v = v - cost
        prob.counters.power_solves += solves
        keep = v > value + GREEDY_TOL
        mask[keep] = cand[keep]
        nu_cost = np.where(keep, cost, nu_cost)
        if y == 0 and not restr.fixed_power:
            b = np.where(keep, b_cand, b)
        value = np.where(keep, v, value)
        pu = np.where(keep, p, pu)
        history.append(value.reshape(N, K).copy())
    return mask.reshape(N, K, M), value.reshape(N, K), pu.reshape(N, K), history


def solve_heuristic(prob: Problem, z, restr: Restrictions | None = None) -> ScBatch:
    """Per-SC maximization with greedy RRH sets; same tie rules as the
    exhaustive selector (y = 0, then lowest user)."""
    restr = restr or Restrictions()
    m0, v0, _, _ = greedy_sets(prob, z, 0, restr)
    m1, v1, p1, _ = greedy_sets(prob, z, 1, restr)
    table = np.stack([v0, v1], axis=1)  # (N, 2, K)
    table = _apply_restrictions(prob, table, restr, with_sets=False)
    N, _, K = table.shape
    flat = table.reshape(N, -1)
    best = np.argmax(flat, axis=1)
    y, k = np.unravel_index(best, (2, K))
    n = np.arange(N)
    mask = np.where((y == 1)[:, None], m1[n, k], m0[n, k])
    batch = finalize(prob, z, y.astype(np.int8), k, mask, p1[n, k], restr)
    batch.value = flat[n, best]
    return batch


def heuristic_select(prob: Problem, n: int, k: int, y: int, z):
    """Greedy selection for one (SC, user, direction).

    Returns ``(rrh_set, powers, value, evaluations)``; ``powers`` is the UL
    power (scalar) for ``y = 1`` or the length-M DL power vector for ``y = 0``.
    """
    gains = (prob.gu if y == 1 else prob.gd)[n, k]
    order = np.argsort(-gains, kind="stable")
    mask = np.zeros(prob.M, dtype=bool)
    value, pu = 0.0, 0.0
    evaluations = 0
    for m in order:
        cand = mask.copy()
        cand[m] = True
        v, p = _single_value(prob, z, n, k, y, cand)
        evaluations += 1
        if v > value + GREEDY_TOL:
            mask, value, pu = cand, v, p
    powers = pu if y == 1 else dl_powers(prob, z, n, k, mask)
    return tuple(int(m) for m in np.flatnonzero(mask)), powers, value, evaluations


def _single_value(prob: Problem, z, n, k, y, mask):
    full = np.zeros((prob.N, prob.K, prob.M), dtype=bool)
    full[n, k] = mask
    if y == 1:
        v, p = ul_values(prob, z, full)
        return float(v[n, k]), float(p[n, k])
    v = dl_values(prob, z, full)
    return float(v[n, k]), 0.0
