"""Per-subcarrier Lagrangian subproblems for a fixed multiplier vector.

The multiplier vector is laid out as ``z = [lam (K), mu (M), nu (M)]``.
For each SC the engine picks a user, an RRH set and a duplex direction
maximizing ``y L_u + (1 - y) L_d``. Everything here is vectorized over SCs
and users; RRH sets are boolean masks on a trailing axis of length M.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import power
from .power import LN2
from .scenario import ChannelRealization, Scenario

EXHAUSTIVE = "exhaustive"
HEURISTIC = "heuristic"


def subset_masks(M: int) -> np.ndarray:
    """All ``2**M`` RRH subsets as boolean rows, in lexicographic order of
    their sorted index tuples (the empty set first)."""
    subsets = itertools.chain.from_iterable(
        itertools.combinations(range(M), r) for r in range(M + 1))
    ordered = sorted(subsets)
    masks = np.zeros((len(ordered), M), dtype=bool)
    for i, s in enumerate(ordered):
        masks[i, list(s)] = True
    return masks


def split_z(z: np.ndarray, K: int, M: int):
    z = np.asarray(z, dtype=float)
    return z[:K], z[K:K + M], z[K + M:K + 2 * M]


@dataclass
class Restrictions:
    """Structural limits imposed by a scheme or duplex mode.

    ``allowed_y`` is (N, 2) indexed by y and ``allowed_k`` is (N, K).
    ``single_rrh`` (K, M), when given, limits every user to the empty set or
    a singleton of one of its permitted RRHs. ``fixed_power`` switches both
    directions to equal power allocation.
    """

    allowed_y: np.ndarray | None = None
    allowed_k: np.ndarray | None = None
    single_rrh: np.ndarray | None = None
    fixed_power: bool = False

    @classmethod
    def none(cls) -> "Restrictions":
        return cls()


@dataclass
class Counters:
    power_solves: int = 0
    sorts: int = 0


@dataclass
class Problem:
    """Scenario plus channel with the derived arrays the solvers need."""

    scn: Scenario
    chan: ChannelRealization
    counters: Counters = field(default_factory=Counters)

    def __post_init__(self):
        scn = self.scn
        if self.chan.gu.shape != (scn.K, scn.M, scn.N):
            raise ValueError("channel shape does not match the scenario")
        self.K, self.M, self.N = scn.K, scn.M, scn.N
        self.gu = np.ascontiguousarray(np.transpose(self.chan.gu, (2, 0, 1)))  # (N, K, M)
        self.gd = np.ascontiguousarray(np.transpose(self.chan.gd, (2, 0, 1)))
        self.sigma2 = scn.sigma2
        self.eta = power.eta_of(scn.beta)
        self.p_cap = power.CAP_FACTOR * scn.Pu
        self.epa_pu = scn.Pu / scn.N
        self.epa_pd = scn.Pr / scn.C
        self._subsets = None
        self.greedy_layouts: dict = {}  # per-direction sort orders, filled by the heuristic

    @property
    def subsets(self) -> np.ndarray:
        if self._subsets is None:
            self._subsets = subset_masks(self.M)
        return self._subsets

    @property
    def dim(self) -> int:
        return self.K + 2 * self.M


def _lead(a: np.ndarray, ndim: int) -> np.ndarray:
    """Reshape an (N, K, ...) array so it broadcasts against ``ndim`` axes
    whose extra middle axes precede the trailing RRH axis."""
    return a.reshape(a.shape[:2] + (1,) * (ndim - a.ndim) + a.shape[2:])


def ul_values(prob: Problem, z, mask: np.ndarray, fixed_power: bool = False):
    """UL Lagrangian value and power for every (n, k, ...) entry of ``mask``.

    ``mask`` has shape (N, K, ..., M) or broadcasts to it. Returns
    ``(value, p)`` with the RRH axis removed.
    """
    lam, _, nu = split_z(z, prob.K, prob.M)
    mask = np.asarray(mask, dtype=bool)
    ndim = max(mask.ndim, 3)
    g = _lead(prob.gu, ndim)
    per_k = (1, prob.K) + (1,) * (ndim - 3)
    w = prob.scn.w.reshape(per_k)
    shape = np.broadcast_shapes(g.shape, mask.shape)
    count = np.broadcast_to(mask, shape).sum(axis=-1)
    if fixed_power:
        p = np.where(count > 0, prob.epa_pu.reshape(per_k), 0.0)
        sinr = power.ul_sum_sinr(p, np.where(mask, g, 0.0), prob.sigma2, prob.eta)
        value = w * np.log1p(sinr) / LN2
    else:
        lam_k = lam.reshape(per_k)
        p = power.ul_optimal_power(w, lam_k, g, mask, prob.sigma2, prob.eta,
                                   prob.p_cap.reshape(per_k))
        value = power.ul_objective(p, w, np.maximum(lam_k, power.EPS_MULT),
                                   np.where(mask, g, 0.0), prob.sigma2, prob.eta)
    prob.counters.power_solves += int(np.count_nonzero(count))
    value = value - (np.where(mask, nu, 0.0)).sum(axis=-1)
    return np.where(count > 0, value, 0.0), p


def dl_values(prob: Problem, z, mask: np.ndarray, fixed_power: bool = False):
    """DL Lagrangian value for every (n, k, ...) entry of ``mask``."""
    _, mu, nu = split_z(z, prob.K, prob.M)
    mask = np.asarray(mask, dtype=bool)
    ndim = max(mask.ndim, 3)
    g = _lead(prob.gd, ndim)
    if fixed_power:
        value = power.dl_rate_of_powers(prob.epa_pd, g, mask, prob.sigma2)
    else:
        value = power.dl_lagrangian_value(power.dl_b_value(mu, g, mask, prob.sigma2))
    prob.counters.power_solves += int(np.count_nonzero(np.broadcast_to(
        mask, np.broadcast_shapes(g.shape, mask.shape)).any(axis=-1)))
    return value - (np.where(mask, nu, 0.0)).sum(axis=-1)


def dl_powers(prob: Problem, z, n, k, mask, fixed_power: bool = False) -> np.ndarray:
    """DL powers (..., M) for chosen SCs ``n``, users ``k`` and sets ``mask``."""
    _, mu, _ = split_z(z, prob.K, prob.M)
    mask = np.asarray(mask, dtype=bool)
    if fixed_power:
        return np.where(mask, prob.epa_pd, 0.0)
    return power.dl_power_closed_form(mu, prob.gd[n, k], mask, prob.sigma2)


@dataclass
class ScBatch:
    """Per-SC maximizers for all N subcarriers at one multiplier vector."""

    k: np.ndarray       # (N,) chosen user
    mask: np.ndarray    # (N, M) chosen RRH set
    y: np.ndarray       # (N,) duplex bit
    pu: np.ndarray      # (N,) UL power of the chosen user (0 on DL SCs)
    pd: np.ndarray      # (N, M) DL powers (0 on UL SCs)
    value: np.ndarray   # (N,) L_n at the maximizer

    def pattern_key(self) -> bytes:
        active = self.mask.any(axis=1)
        k = np.where(active, self.k, -1)
        return (k.astype(np.int64).tobytes() + np.packbits(self.mask).tobytes()
                + (self.y * active).astype(np.int8).tobytes())

    def usage(self, K: int, M: int):
        """Per-user UL power, per-RRH DL power and per-RRH SC count."""
        ul = np.bincount(self.k, weights=self.pu * (self.y == 1), minlength=K)
        dl = self.pd.sum(axis=0)
        cnt = self.mask.sum(axis=0).astype(float)
        return ul, dl, cnt


def _apply_restrictions(prob: Problem, values: np.ndarray, restr: Restrictions,
                        with_sets: bool) -> np.ndarray:
    """Mask disallowed (n, y, k[, s]) entries of ``values`` with -inf."""
    N, K = prob.N, prob.K
    allowed = np.ones((N, 2, K), dtype=bool)
    if restr.allowed_y is not None:
        allowed &= np.asarray(restr.allowed_y, dtype=bool)[:, :, None]
    if restr.allowed_k is not None:
        allowed &= np.asarray(restr.allowed_k, dtype=bool)[:, None, :]
    if with_sets:
        allowed = allowed[..., None]
        if restr.single_rrh is not None:
            subsets = prob.subsets
            size_ok = subsets.sum(axis=1) <= 1
            # (K, S): empty set, or the singleton of the permitted RRH
            per_k = size_ok[None, :] & ~np.any(subsets[None, :, :] & ~np.asarray(
                restr.single_rrh, dtype=bool)[:, None, :], axis=-1)
            allowed = allowed & per_k[None, None, :, :]
    return np.where(allowed, values, -np.inf)


def finalize(prob: Problem, z, y, k, mask, pu_table, restr: Restrictions) -> ScBatch:
    """Assemble an :class:`ScBatch` from per-SC choices."""
    N = prob.N
    n_idx = np.arange(N)
    mask = mask & mask.any(axis=1, keepdims=True)
    pu = np.where(y == 1, pu_table, 0.0)
    pd = np.zeros((N, prob.M))
    dl = y == 0
    if np.any(dl):
        pd[dl] = dl_powers(prob, z, n_idx[dl], k[dl], mask[dl], restr.fixed_power)
    empty = ~mask.any(axis=1)
    pu[empty] = 0.0
    return ScBatch(k=k, mask=mask, y=y, pu=pu, pd=pd, value=np.zeros(N))


def solve_exhaustive(prob: Problem, z, restr: Restrictions | None = None) -> ScBatch:
    """Exact per-SC maximization over all users, RRH subsets and directions.

    Ties resolve to y = 0, then the lowest user index, then the
    lexicographically smallest RRH set.
    """
    restr = restr or Restrictions()
    masks = prob.subsets[None, None]  # (1, 1, S, M)
    vu, pu = ul_values(prob, z, masks, restr.fixed_power)  # (N, K, S)
    vd = dl_values(prob, z, masks, restr.fixed_power)
    table = np.stack([vd, vu], axis=1)  # (N, 2, K, S)
    table = _apply_restrictions(prob, table, restr, with_sets=True)
    N, _, K, S = table.shape
    flat = table.reshape(N, -1)
    best = np.argmax(flat, axis=1)
    y, k, s = np.unravel_index(best, (2, K, S))
    batch = finalize(prob, z, y.astype(np.int8), k, prob.subsets[s].copy(),
                     pu[np.arange(N), k, s], restr)
    batch.value = flat[np.arange(N), best]
    return batch


def solve_all(prob: Problem, z, restr: Restrictions | None = None,
              selector: str = EXHAUSTIVE) -> ScBatch:
    if selector == EXHAUSTIVE:
        return solve_exhaustive(prob, z, restr)
    if selector == HEURISTIC:
        from .heuristic import solve_heuristic
        return solve_heuristic(prob, z, restr)
    raise ValueError(f"unknown selector {selector!r}")
