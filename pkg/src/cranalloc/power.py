"""Per-subcarrier power subproblems.

Uplink: maximize ``w * R_u(p) - lam * p`` over ``p >= 0``. With one serving
RRH the maximizer is a closed form; with several it is found numerically
(the objective is concave in ``p``), either by golden-section search or by a
faster safeguarded Newton solve used inside the dual iterations.

Downlink: maximize ``R_d(p) - sum_m mu_m p_m`` over ``p >= 0``; the
maximizer is a closed form for any serving set.

All functions broadcast over leading axes; the RRH axis is always last.
"""

from __future__ import annotations

import math

import numpy as np

LN2 = math.log(2.0)
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0

EPS_MULT = 1e-12
TOL_P = 1e-9
CAP_FACTOR = 10.0


def eta_of(beta) -> float:
    """Quantization-noise factor ``3 * 2**(-2 beta)`` (0 for ``beta = inf``)."""
    return 0.0 if np.isinf(beta) else 3.0 * 2.0 ** (-2.0 * float(beta))


# --------------------------------------------------------------------------
# uplink


def ul_sum_sinr(p, gains, sigma2, eta):
    """``sum_m p g_m / (sigma2 (1 + eta) + eta p g_m)``; zero gains drop out."""
    p = np.asarray(p, dtype=float)[..., None]
    pg = p * gains
    return (pg / (sigma2 * (1.0 + eta) + eta * pg)).sum(axis=-1)


def ul_objective(p, w, lam, gains, sigma2, eta):
    """UL per-SC Lagrangian ``w log2(1 + S(p)) - lam p`` (no fronthaul price)."""
    return w * np.log1p(ul_sum_sinr(p, gains, sigma2, eta)) / LN2 - lam * np.asarray(p)


def ul_objective_derivative(p, w, lam, gains, sigma2, eta):
    p = np.asarray(p, dtype=float)
    a = sigma2 * (1.0 + eta)
    pg = p[..., None] * gains
    s = (pg / (a + eta * pg)).sum(axis=-1)
    ds = (gains * a / (a + eta * pg) ** 2).sum(axis=-1)
    return w * ds / (LN2 * (1.0 + s)) - lam


def ul_power_closed_form(w, lam, g, sigma2, beta=None, *, eta=None):
    """Optimal UL power with a single serving RRH.

    Evaluates ``sigma2 / (2 eta g) * [sqrt(1 + 4 w eta g / (lam sigma2 ln2))
    - (1 + 2 eta)]^+`` in the cancellation-free form
    ``[2 w / (lam ln2 (1 + sqrt(1 + x))) - sigma2 / g]^+``, which also covers
    ``eta -> 0`` (plain water-filling).

    Raises
    ------
    ValueError
        If any ``lam <= 0`` (the subproblem is unbounded).
    """
    if eta is None:
        eta = eta_of(beta)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("UL price must be positive for a bounded maximizer")
    return _ul_closed_form(w, lam, g, sigma2, eta)


def _ul_closed_form(w, lam, g, sigma2, eta):
    x = 4.0 * w * eta * g / (lam * sigma2 * LN2)
    p = 2.0 * w / (lam * LN2 * (1.0 + np.sqrt(1.0 + x))) - sigma2 / g
    return np.maximum(p, 0.0)


def golden_section_max(f, lo, hi, tol):
    """Vectorized golden-section maximization of a unimodal ``f`` on ``[lo, hi]``.

    ``lo``, ``hi`` and ``tol`` broadcast to a common shape; every element runs
    the same number of steps, enough for the widest bracket to shrink below
    its tolerance. Returns the best probed point per element.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    a = lo.copy()
    b = hi.copy()
    h = b - a
    tol = np.broadcast_to(np.asarray(tol, dtype=float), h.shape)
    ratio = np.max(h / tol, initial=1.0)
    steps = int(math.ceil(math.log(ratio) / -math.log(INV_PHI))) if ratio > 1 else 0
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc = f(c)
    fd = f(d)
    for _ in range(steps):
        left = fc > fd  # maximum lies in [a, d]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        h = b - a
        nc = np.where(left, a + INV_PHI2 * h, d)
        nd = np.where(left, c, a + INV_PHI * h)
        # one fresh evaluation per element: the other probe is reused
        probe = np.where(left, nc, nd)
        fp = f(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = nc, nd
    cand = np.stack([a, c, d, b])
    vals = np.stack([f(a), fc, fd, f(b)])
    best = np.argmax(vals, axis=0)
    return np.take_along_axis(cand, best[None], axis=0)[0]


def ul_line_search_bracket(w, lam, p_cap):
    """Upper end of the search interval; ``p* < w / (lam ln2)`` for concave SINR sums."""
    return np.minimum(p_cap, w / (np.asarray(lam) * LN2))


def ul_power_line_search(w, lam, gains, sigma2, beta=None, p_cap=1.0, tol=TOL_P, *, eta=None):
    """UL optimal power for any serving set by golden-section search on ``[0, p_cap]``.

    ``gains`` holds the serving RRHs' gains on the last axis (zeros for
    RRHs outside the set are allowed).
    """
    if eta is None:
        eta = eta_of(beta)
    gains = np.asarray(gains, dtype=float)
    w_ = np.asarray(w, dtype=float)
    lam_ = np.maximum(np.asarray(lam, dtype=float), EPS_MULT)
    hi = np.broadcast_to(ul_line_search_bracket(w_, lam_, p_cap), np.broadcast_shapes(
        gains.shape[:-1], w_.shape, lam_.shape)).astype(float)
    if hi.size == 0:
        return hi.copy()
    tol_eff = np.minimum(tol, np.maximum(1e-8 * hi, 1e-300))

    def f(p):
        return ul_objective(p, w_, lam_, gains, sigma2, eta)

    p = golden_section_max(f, np.zeros_like(hi), hi, tol_eff)
    # the objective is concave with value 0 at p = 0
    return np.where(f(p) > 0.0, p, 0.0)


def ul_power_newton(w, lam, gains, sigma2, eta, p_cap, max_iter=60, rtol=1e-10):
    """UL optimal power by safeguarded Newton iteration.

    Solves the same problem as :func:`ul_power_line_search`. The
    stationarity condition is rewritten as ``log Q(p) = log(w / (lam ln2))``
    with ``Q = (1 + S) / S'``, which is exactly ``sigma2 / g + p`` without
    quantization noise, so the water-filling start is already close. Steps
    leaving the sign bracket fall back to a geometric bisection.
    """
    gains = np.asarray(gains, dtype=float)
    lead = gains.shape[:-1]
    w = np.broadcast_to(np.asarray(w, dtype=float), lead)
    lam = np.broadcast_to(np.maximum(np.asarray(lam, dtype=float), EPS_MULT), lead)
    a = sigma2 * (1.0 + eta)
    total = gains.sum(axis=-1)
    c = w / (lam * LN2)
    safe_total = np.where(total > 0, total, 1.0)
    zero = (total <= 0) | (a / safe_total >= c)
    hi_p = np.broadcast_to(np.minimum(p_cap, c), lead).astype(float)
    p = np.where(zero, 0.0, hi_p)
    if p.size == 0:
        return p

    def residual(p, g, logc):
        pg = p[:, None] * g
        den = a + eta * pg
        s = (pg / den).sum(axis=-1)
        ds = (g * a / den ** 2).sum(axis=-1)
        dds = (-2.0 * eta * a * g ** 2 / den ** 3).sum(axis=-1)
        q = (1.0 + s) / ds
        return np.log(q) - logc, (1.0 - (1.0 + s) * dds / ds ** 2) / q

    flat_p = p.reshape(-1)
    idx = np.flatnonzero(~zero.reshape(-1))
    g = gains.reshape(-1, gains.shape[-1])[idx]
    logc = np.log(c.reshape(-1)[idx])
    hi = hi_p.reshape(-1)[idx]
    f_hi, _ = residual(hi, g, logc)
    interior = f_hi > 0  # otherwise the cap binds
    idx, g, logc, hi = idx[interior], g[interior], logc[interior], hi[interior]
    lo = np.zeros_like(hi)
    x = np.clip(np.exp(logc) - a / g.sum(axis=-1), lo, hi)
    for _ in range(max_iter):
        if idx.size == 0:
            break
        f, df = residual(x, g, logc)
        lo = np.where(f < 0, x, lo)
        hi = np.where(f >= 0, x, hi)
        step = x - f / df
        bad = ~((step >= lo) & (step <= hi))
        step = np.where(bad, np.where(lo > 0, np.sqrt(lo * hi), 0.03 * hi), step)
        done = np.abs(step - x) <= rtol * x
        flat_p[idx] = step
        keep = ~done
        idx, g, logc, lo, hi, x = idx[keep], g[keep], logc[keep], lo[keep], hi[keep], step[keep]
    return flat_p.reshape(lead)


def ul_optimal_power(w, lam, gains, mask, sigma2, eta, p_cap):
    """Optimal UL power per entry for arbitrary serving masks.

    ``gains`` and ``mask`` share a trailing RRH axis. Single-RRH entries use
    the closed form (clipped to ``p_cap``), larger sets a safeguarded Newton
    solve, empty sets get zero.
    """
    mask = np.asarray(mask, dtype=bool)
    shape = np.broadcast_shapes(np.shape(gains), mask.shape)
    g = np.broadcast_to(np.where(mask, gains, 0.0), shape)
    lead = shape[:-1]
    w_ = np.broadcast_to(np.asarray(w, dtype=float), lead)
    lam_ = np.broadcast_to(np.maximum(np.asarray(lam, dtype=float), EPS_MULT), lead)
    cap_ = np.broadcast_to(np.asarray(p_cap, dtype=float), lead)
    count = np.broadcast_to(mask, shape).sum(axis=-1)
    p = np.zeros(lead)

    one = count == 1
    if np.any(one):
        g1 = g[one].sum(axis=-1)
        p[one] = np.minimum(_ul_closed_form(w_[one], lam_[one], g1, sigma2, eta), cap_[one])
    many = count >= 2
    if np.any(many):
        p[many] = ul_power_newton(w_[many], lam_[many], g[many], sigma2, eta, cap_[many])
    return p


# --------------------------------------------------------------------------
# downlink


def dl_b_value(mu, gains, mask, sigma2):
    """``B = sum_{m in set} g_m / (sigma2 mu_m)``."""
    mu = np.maximum(np.asarray(mu, dtype=float), EPS_MULT)
    return (np.where(mask, gains, 0.0) / (sigma2 * mu)).sum(axis=-1)


def dl_optimal_snr(b):
    """Received SNR at the optimum, ``[B / ln2 - 1]^+``."""
    return np.maximum(np.asarray(b, dtype=float) / LN2 - 1.0, 0.0)


def dl_power_closed_form(mu, gains, mask, sigma2):
    """Optimal DL powers, zero outside the serving set.

    ``p_m = g_m / (sigma2 mu_m^2 B^2) * [B / ln2 - 1]^+``. An empty set gives
    an all-zero vector.
    """
    mask = np.asarray(mask, dtype=bool)
    mu = np.maximum(np.asarray(mu, dtype=float), EPS_MULT)
    gains = np.asarray(gains, dtype=float)
    b = dl_b_value(mu, gains, mask, sigma2)
    snr = dl_optimal_snr(b)
    safe_b = np.where(b > 0, b, 1.0)
    scale = np.where(b > 0, snr / safe_b ** 2, 0.0)
    return np.where(mask, gains / (sigma2 * mu ** 2) * scale[..., None], 0.0)


def dl_lagrangian_value(b):
    """Optimal ``R_d - sum mu p`` as a function of ``B`` alone.

    Equals ``log2(B / ln2) - 1/ln2 + 1/B`` for ``B > ln2`` and 0 otherwise;
    continuously differentiable in ``B``.
    """
    b = np.asarray(b, dtype=float)
    safe = np.where(b > LN2, b, 2.0 * LN2)
    val = np.log(safe / LN2) / LN2 - 1.0 / LN2 + 1.0 / safe
    return np.where(b > LN2, val, 0.0)


def dl_snr_of_powers(pd, gains, mask, sigma2):
    """Received SNR ``(sum sqrt(p g))^2 / sigma2`` for given powers."""
    amp = np.sqrt(np.where(mask, np.asarray(pd) * np.asarray(gains), 0.0)).sum(axis=-1)
    return amp ** 2 / sigma2


def dl_rate_of_powers(pd, gains, mask, sigma2):
    return np.log1p(dl_snr_of_powers(pd, gains, mask, sigma2)) / LN2
