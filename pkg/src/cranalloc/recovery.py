"""Turning a per-SC discrete pattern into a feasible allocation.

With the user/RRH/duplex pattern fixed the power problem is convex and
separates into one problem per user (uplink, coupled only through that
user's budget) and one joint downlink problem (RRHs coupled through shared
SCs). Both are solved through their duals:

* uplink: the single price of each user is found by root bracketing on
  ``sum_n p_n(lam) = P_k``;
* downlink: the smooth dual in ``log mu`` is minimized with L-BFGS.

Finally every budget is met with equality by a per-node rescale.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy import optimize

from . import power
from .power import LN2
from .rates import Allocation, check_feasibility
from .subproblems import Problem, Restrictions, ScBatch, split_z

log = logging.getLogger(__name__)

BUDGET_MATCH_RTOL = 1e-3
INNER_MAXITER = 500


class RecoveryError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# exact power allocation for a fixed pattern


def ul_user_powers(prob: Problem, k: int, ns, masks, lam_hint: float | None = None):
    """Optimal UL powers of user ``k`` over its UL SCs ``ns`` with sets ``masks``.

    Returns ``(p, weighted_rate)``; the budget is used with equality.
    """
    ns = np.asarray(ns, dtype=int)
    masks = np.asarray(masks, dtype=bool).reshape(len(ns), prob.M)
    w = float(prob.scn.w[k])
    budget = float(prob.scn.Pu[k])
    if len(ns) == 0:
        return np.zeros(0), 0.0
    if w == 0.0:
        return np.zeros(len(ns)), 0.0
    gains = prob.gu[ns, k, :]
    cap = prob.p_cap[k]

    def powers(theta):
        return power.ul_optimal_power(w, math.exp(theta), gains, masks, prob.sigma2,
                                      prob.eta, cap)

    def excess(theta):
        return powers(theta).sum() - budget

    a = prob.sigma2 * (1.0 + prob.eta)
    lam_zero = w * np.max(np.where(masks, gains, 0.0).sum(axis=1)) / (a * LN2)
    hi = math.log(2.0 * lam_zero)
    lo = math.log(lam_hint) if lam_hint and lam_hint < lam_zero else hi - 5.0
    for _ in range(200):
        if excess(lo) > 0:
            break
        lo -= 5.0
    else:
        raise RecoveryError(f"could not bracket the UL price of user {k}")
    theta = optimize.brentq(excess, lo, hi, xtol=1e-13, maxiter=500)
    p = powers(theta)
    total = p.sum()
    if total > 0:
        p = p * (budget / total)
    rate = power.ul_sum_sinr(p, np.where(masks, gains, 0.0), prob.sigma2, prob.eta)
    return p, float(w * np.log1p(rate).sum() / LN2)


def dl_powers_joint(prob: Problem, ns, ks, masks, mu_hint=None):
    """Optimal DL powers over SCs ``ns`` served to users ``ks`` by sets ``masks``.

    Returns ``(pd, rate, converged)`` with ``pd`` of shape (len(ns), M).
    ``converged`` reports whether the dual met every budget within 0.1%
    before the final rescale.
    """
    ns = np.asarray(ns, dtype=int)
    ks = np.asarray(ks, dtype=int)
    M = prob.M
    masks = np.asarray(masks, dtype=bool).reshape(len(ns), M)
    if len(ns) == 0:
        return np.zeros((0, M)), 0.0, True
    gains = np.where(masks, prob.gd[ns, ks, :], 0.0)
    budget = prob.scn.Pr
    involved = masks.any(axis=0)
    sigma2 = prob.sigma2

    if mu_hint is None:
        mu0 = prob.N / budget
    else:
        mu0 = np.clip(np.asarray(mu_hint, dtype=float), 1e-9 * prob.N / budget, None)
    theta0 = np.log(mu0[involved])

    def unpack(theta):
        mu = np.ones(M)
        mu[involved] = np.exp(theta)
        return mu

    def dual(theta):
        mu = unpack(theta)
        b = power.dl_b_value(mu, gains, masks, sigma2)
        pd = power.dl_power_closed_form(mu, gains, masks, sigma2)
        val = power.dl_lagrangian_value(b).sum() + (mu * budget)[involved].sum()
        grad = (mu * (budget - pd.sum(axis=0)))[involved]
        return val, grad

    res = optimize.minimize(dual, theta0, jac=True, method="L-BFGS-B",
                            options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-13})
    mu = unpack(res.x)
    pd = power.dl_power_closed_form(mu, gains, masks, sigma2)
    used = pd.sum(axis=0)
    converged = bool(np.all(np.abs(used[involved] - budget[involved])
                            <= BUDGET_MATCH_RTOL * budget[involved]))
    if not converged:
        log.debug("DL inner dual missed budgets: %s", used[involved] / budget[involved])
    for m in np.flatnonzero(involved):
        if used[m] > 0:
            pd[:, m] *= budget[m] / used[m]
        else:
            # degenerate start: spread the budget evenly over the RRH's SCs
            pd[masks[:, m], m] = budget[m] / masks[:, m].sum()
    rate = power.dl_rate_of_powers(pd, gains, masks, sigma2).sum()
    return pd, float(rate), converged


def optimal_powers(prob: Problem, k, mask, y, z_hint=None):
    """Exact power allocation for a fixed pattern; returns ``(pu, pd, converged)``
    with ``pu`` (K, N) and ``pd`` (M, N)."""
    K, M, N = prob.K, prob.M, prob.N
    active = mask.any(axis=1)
    lam = mu = None
    if z_hint is not None:
        lam, mu, _ = split_z(z_hint, K, M)
    pu = np.zeros((K, N))
    ul = active & (y == 1)
    for user in range(K):
        ns = np.flatnonzero(ul & (k == user))
        if len(ns):
            hint = float(lam[user]) if lam is not None and lam[user] > 0 else None
            pu[user, ns], _ = ul_user_powers(prob, user, ns, mask[ns], hint)
    pd = np.zeros((M, N))
    dl = np.flatnonzero(active & (y == 0))
    converged = True
    if len(dl):
        p, _, converged = dl_powers_joint(prob, dl, k[dl], mask[dl], mu)
        pd[:, dl] = p.T
    return pu, pd, converged


def fixed_powers(prob: Problem, k, mask, y):
    """Equal power allocation: ``P_k/N`` per UL SC and ``P_m/C_m`` per DL SC."""
    K, M, N = prob.K, prob.M, prob.N
    active = mask.any(axis=1)
    pu = np.zeros((K, N))
    ul = np.flatnonzero(active & (y == 1))
    pu[k[ul], ul] = prob.epa_pu[k[ul]]
    pd = np.zeros((M, N))
    dl = active & (y == 0)
    pd[:, dl] = np.where(mask[dl], prob.epa_pd, 0.0).T
    return pu, pd


# --------------------------------------------------------------------------
# fronthaul repair


def sc_objective(prob: Problem, z, n, k, y, masks, fixed_power: bool = False):
    """Per-SC objective contribution (weighted UL or DL rate) with powers
    re-optimized at multipliers ``z``; vectorized over entries."""
    lam, mu, _ = split_z(z, prob.K, prob.M)
    n = np.atleast_1d(n)
    k = np.atleast_1d(k)
    masks = np.atleast_2d(masks)
    y = np.broadcast_to(np.atleast_1d(y), n.shape)
    out = np.zeros(n.shape)
    up = y == 1
    if np.any(up):
        g = np.where(masks[up], prob.gu[n[up], k[up]], 0.0)
        w = prob.scn.w[k[up]]
        if fixed_power:
            p = np.where(masks[up].any(axis=1), prob.epa_pu[k[up]], 0.0)
        else:
            p = power.ul_optimal_power(w, lam[k[up]], g, masks[up], prob.sigma2,
                                       prob.eta, prob.p_cap[k[up]])
        out[up] = w * np.log1p(power.ul_sum_sinr(p, g, prob.sigma2, prob.eta)) / LN2
    down = ~up
    if np.any(down):
        g = prob.gd[n[down], k[down]]
        if fixed_power:
            pd = np.where(masks[down], prob.epa_pd, 0.0)
        else:
            pd = power.dl_power_closed_form(mu, g, masks[down], prob.sigma2)
        out[down] = power.dl_rate_of_powers(pd, g, masks[down], prob.sigma2)
    return out


def enforce_fronthaul(prob: Problem, k, mask, y, z, fixed_power: bool = False):
    """Drop RRHs from SCs until every RRH serves at most ``C_m`` SCs.

    Each removal takes the SC where losing the RRH costs the least
    objective (powers re-optimized at ``z``); ties go to the lowest SC.
    """
    mask = np.array(mask, dtype=bool, copy=True)
    cap = prob.scn.C
    for m in range(prob.M):
        while mask[:, m].sum() > cap[m]:
            ns = np.flatnonzero(mask[:, m])
            reduced = mask[ns].copy()
            reduced[:, m] = False
            before = sc_objective(prob, z, ns, k[ns], y[ns], mask[ns], fixed_power)
            after = sc_objective(prob, z, ns, k[ns], y[ns], reduced, fixed_power)
            mask[ns[np.argmin(before - after)], m] = False
    return mask


def build_allocation(prob: Problem, k, mask, y, pu, pd) -> Allocation:
    K, M, N = prob.K, prob.M, prob.N
    x = np.zeros((K, M, N), dtype=np.int8)
    active = np.flatnonzero(mask.any(axis=1))
    for n in active:
        x[k[n], mask[n], n] = 1
    return Allocation(x, np.asarray(y, dtype=np.int8), pu, pd)


def recover_primal(prob: Problem, batch: ScBatch, z, restr: Restrictions | None = None):
    """Feasible allocation from a per-SC pattern.

    Returns ``(allocation, inner_converged)``. Fixed-power schemes skip the
    power re-optimization.
    """
    restr = restr or Restrictions()
    k = np.asarray(batch.k)
    y = np.asarray(batch.y, dtype=np.int8)
    mask = enforce_fronthaul(prob, k, batch.mask, y, z, restr.fixed_power)
    if restr.fixed_power:
        pu, pd = fixed_powers(prob, k, mask, y)
        converged = True
    else:
        pu, pd, converged = optimal_powers(prob, k, mask, y, z)
    alloc = build_allocation(prob, k, mask, y, pu, pd)
    report = check_feasibility(alloc, prob.scn)
    if not report.ok:
        raise RecoveryError("recovered allocation infeasible: "
                            + "; ".join(map(str, report.violations[:5])))
    return alloc, converged
