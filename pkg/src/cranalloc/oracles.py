"""Slow reference solvers used by the validation suites and tests.

The power oracles and the global exhaustive oracle work from the rate
formulas directly with dense grids, projected gradients or SLSQP and share
no code with the engine. The per-SC brute force reuses only the scalar
per-SC subproblems and replaces the vectorized selection by plain loops.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import optimize

LOG2E = 1.0 / math.log(2.0)


def ul_lagrangian(p, w, lam, gains, sigma2, eta):
    """``w log2(1 + sum_m p g / (sigma2 (1 + eta) + eta p g)) - lam p`` on a grid of ``p``."""
    p = np.asarray(p, dtype=float)
    s = np.zeros_like(p)
    for g in np.atleast_1d(gains):
        pg = p * g
        s += pg / (sigma2 * (1.0 + eta) + eta * pg)
    return w * np.log1p(s) * LOG2E - lam * p


def ul_grid_oracle(w, lam, gains, sigma2, eta, p_max, points=10 ** 6):
    """Best UL power on a uniform grid of ``points`` values in ``[0, p_max]``,
    refined by a second grid around the winner. Returns ``(p, value)``."""
    grid = np.linspace(0.0, p_max, points)
    vals = ul_lagrangian(grid, w, lam, gains, sigma2, eta)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    fine = np.linspace(lo, hi, 2001)
    fvals = ul_lagrangian(fine, w, lam, gains, sigma2, eta)
    j = int(np.argmax(fvals))
    if fvals[j] >= vals[i]:
        return float(fine[j]), float(fvals[j])
    return float(grid[i]), float(vals[i])


def dl_lagrangian(p, mu, gains, sigma2):
    """``log2(1 + (sum sqrt(p g))^2 / sigma2) - mu . p`` for one power vector."""
    p = np.maximum(np.asarray(p, dtype=float), 0.0)
    amp = np.sqrt(p * gains).sum()
    return float(np.log1p(amp ** 2 / sigma2) * LOG2E - (mu * p).sum())


def dl_projected_gradient_oracle(mu, gains, sigma2, iters=20000, tol=1e-14):
    """Maximize the DL per-SC Lagrangian over ``p >= 0`` by projected
    gradient ascent with backtracking, in units where the powers are O(1).

    ``mu`` and ``gains`` hold the serving RRHs only. Returns ``(p, value)``.
    """
    mu = np.asarray(mu, dtype=float)
    gains = np.asarray(gains, dtype=float)
    scale = 1.0 / (mu.max() * math.log(2.0))  # natural power scale
    q = np.full(mu.shape, scale / len(mu))

    def f(x):
        return dl_lagrangian(x, mu, gains, sigma2)

    def grad(x):
        x = np.maximum(x, 1e-300)
        amp = np.sqrt(x * gains).sum()
        d = 0.5 * np.sqrt(gains / x) * 2 * amp / sigma2
        return d / (1.0 + amp ** 2 / sigma2) * LOG2E - mu

    step = scale ** 2
    val = f(q)
    for _ in range(iters):
        gvec = grad(q)
        while True:
            cand = np.maximum(q + step * gvec, 0.0)
            cval = f(cand)
            if cval >= val - 1e-16 or step < 1e-300:
                break
            step *= 0.5
        improved = cval - val
        q, val = cand, cval
        step *= 2.0
        if 0 <= improved <= tol * max(abs(val), 1.0):
            break
    return q, val


def brute_force_sc(prob, n: int, z):
    """Best (value, k, rrh_set, y) on SC ``n`` by nested loops over every
    user, RRH subset and direction of the scalar per-SC subproblems.

    Ties keep the first candidate in the order y = 0 before y = 1, lower
    user first, lexicographically smaller set first.
    """
    from .dual import subproblem_dl, subproblem_ul  # scalar per-SC values
    K, M = prob.K, prob.M
    subsets = sorted(itertools.chain.from_iterable(
        itertools.combinations(range(M), r) for r in range(M + 1)))
    best = None
    for y in (0, 1):
        for k in range(K):
            for s in subsets:
                v = subproblem_ul(prob, n, k, s, z)[0] if y else subproblem_dl(prob, n, k, s, z)[0]
                if best is None or v > best[0]:
                    best = (v, k, s, y)
    return best


def _rates(pu, pd, pattern, gu, gd, sigma2, eta, w):
    total = 0.0
    for n, (y, k, s) in enumerate(pattern):
        if not s:
            continue
        if y == 1:
            sinr = sum(pu[n] * gu[k, m, n] / (sigma2 * (1 + eta) + eta * pu[n] * gu[k, m, n])
                       for m in s)
            total += w[k] * math.log2(1.0 + sinr)
        else:
            amp = sum(math.sqrt(max(pd[m, n], 0.0) * gd[k, m, n]) for m in s)
            total += math.log2(1.0 + amp ** 2 / sigma2)
    return total


def exhaustive_oracle(scn, chan):
    """Global optimum of a tiny instance by nested loops over every per-SC
    (direction, user, RRH set) and SLSQP on the powers of each pattern.

    Independent of the engine's power solvers; meant for K = M = N = 2.
    Returns the best throughput.
    """
    K, M, N = scn.K, scn.M, scn.N
    eta = 0.0 if np.isinf(scn.beta) else 3.0 * 2.0 ** (-2 * scn.beta)
    sigma2 = scn.sigma2
    subsets = [s for r in range(M + 1) for s in itertools.combinations(range(M), r)]
    choices = [(y, k, s) for y in (0, 1) for k in range(K) for s in subsets]
    best = 0.0
    for pattern in itertools.product(choices, repeat=N):
        load = np.zeros(M, dtype=int)
        for _, _, s in pattern:
            load[list(s)] += 1
        if np.any(load > scn.C):
            continue
        best = max(best, _pattern_optimum(pattern, scn, chan, sigma2, eta))
    return best


def _pattern_optimum(pattern, scn, chan, sigma2, eta):
    K, M, N = scn.K, scn.M, scn.N
    ul_vars = [n for n, (y, _, s) in enumerate(pattern) if y == 1 and s]
    dl_vars = [(m, n) for n, (y, _, s) in enumerate(pattern) if y == 0 and s for m in s]
    nv = len(ul_vars) + len(dl_vars)
    if nv == 0:
        return 0.0
    # work in units of each budget so variables are O(1)
    unit = np.array([scn.Pu[pattern[n][1]] for n in ul_vars]
                    + [scn.Pr[m] for m, _ in dl_vars])

    def unpack(x):
        pu = np.zeros(N)
        pd = np.zeros((M, N))
        for i, n in enumerate(ul_vars):
            pu[n] = x[i] * unit[i]
        for j, (m, n) in enumerate(dl_vars):
            pd[m, n] = x[len(ul_vars) + j] * unit[len(ul_vars) + j]
        return pu, pd

    def neg(x):
        pu, pd = unpack(np.maximum(x, 0.0))
        return -_rates(pu, pd, pattern, chan.gu, chan.gd, sigma2, eta, scn.w)

    cons = []
    for k in range(K):
        idx = [i for i, n in enumerate(ul_vars) if pattern[n][1] == k]
        if idx:
            cons.append({"type": "ineq", "fun": lambda x, idx=idx: 1.0 - x[idx].sum()})
    for m in range(M):
        idx = [len(ul_vars) + j for j, (mm, _) in enumerate(dl_vars) if mm == m]
        if idx:
            cons.append({"type": "ineq", "fun": lambda x, idx=idx: 1.0 - x[idx].sum()})
    # feasible start: split every budget evenly over its variables
    x0 = np.zeros(nv)
    counts_u = {}
    for n in ul_vars:
        counts_u[pattern[n][1]] = counts_u.get(pattern[n][1], 0) + 1
    counts_d = {}
    for m, _ in dl_vars:
        counts_d[m] = counts_d.get(m, 0) + 1
    for i, n in enumerate(ul_vars):
        x0[i] = 1.0 / counts_u[pattern[n][1]]
    for j, (m, _) in enumerate(dl_vars):
        x0[len(ul_vars) + j] = 1.0 / counts_d[m]
    best = -neg(x0)
    res = optimize.minimize(neg, x0, method="SLSQP", bounds=[(0.0, 1.0)] * nv,
                            constraints=cons, options={"ftol": 1e-13, "maxiter": 500})
    if res.success or np.isfinite(res.fun):
        x = np.clip(res.x, 0.0, 1.0)
        ok = all(c["fun"](x) >= -1e-9 for c in cons)
        if ok:
            best = max(best, -neg(x))
    return best
