"""Link rates, the quantization-noise model, the throughput objective and
constraint checking for a full allocation.

Rates are spectral efficiencies in bits/s/Hz per subcarrier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelRealization, Scenario

BUDGET_RTOL = 1e-9


def quantization_noise(pu, g, sigma2, beta):
    """Variance of the uniform scalar quantization error at one RRH."""
    return 3.0 * (np.asarray(pu) * np.asarray(g) + sigma2) * 2.0 ** (-2.0 * beta)


def ul_sinr_terms(pu, g, sigma2, beta):
    """Per-RRH post-quantization SNR ``p g / (sigma2 + q)``.

    ``beta`` may be ``np.inf`` for an ideal fronthaul.
    """
    pu = np.asarray(pu, dtype=float)
    g = np.asarray(g, dtype=float)
    q = 0.0 if np.isinf(beta) else quantization_noise(pu, g, sigma2, beta)
    return pu * g / (sigma2 + q)


def ul_rate(x_row, pu, gains, sigma2, beta) -> float:
    """MRC uplink rate of one user on one SC.

    Parameters
    ----------
    x_row : array_like of {0, 1}, shape (M,)
        RRH selection of the user on this SC.
    pu : float
        User transmit power on the SC, watts.
    gains : array_like, shape (M,)
        UL channel power gains of the user on the SC.
    """
    x_row = np.asarray(x_row, dtype=float)
    terms = x_row * ul_sinr_terms(pu, gains, sigma2, beta)
    return float(np.log1p(terms.sum()) / np.log(2.0))


def dl_rate(x_row, pd_col, gains, sigma2) -> float:
    """Coherent (MISO) downlink rate of one user on one SC."""
    amp = np.sqrt(np.asarray(x_row, dtype=float) * np.asarray(pd_col, dtype=float)
                  * np.asarray(gains, dtype=float)).sum()
    return float(np.log1p(amp ** 2 / sigma2) / np.log(2.0))


@dataclass(eq=False)
class Allocation:
    """Decision tuple ``(x, y, pu, pd)``.

    ``x`` is (K, M, N) binary, ``y`` is (N,) with 1 for uplink, ``pu`` is
    (K, N) and ``pd`` is (M, N), both in watts.
    """

    x: np.ndarray
    y: np.ndarray
    pu: np.ndarray
    pd: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int8)
        self.y = np.asarray(self.y, dtype=np.int8)
        self.pu = np.asarray(self.pu, dtype=float)
        self.pd = np.asarray(self.pd, dtype=float)

    @classmethod
    def empty(cls, K: int, M: int, N: int) -> "Allocation":
        return cls(np.zeros((K, M, N)), np.zeros(N), np.zeros((K, N)), np.zeros((M, N)))

    def copy(self) -> "Allocation":
        return Allocation(self.x.copy(), self.y.copy(), self.pu.copy(), self.pd.copy())

    def serving_user(self) -> np.ndarray:
        """User index per SC, -1 where the SC is idle."""
        active = self.x.any(axis=1)  # (K, N)
        k = np.argmax(active, axis=0)
        return np.where(active.any(axis=0), k, -1)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(),
                "pu": self.pu.tolist(), "pd": self.pd.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Allocation":
        return cls(d["x"], d["y"], d["pu"], d["pd"])

    @classmethod
    def from_json(cls, text: str) -> "Allocation":
        return cls.from_dict(json.loads(text))


def _rate_matrices(alloc: Allocation, chan: ChannelRealization, scn: Scenario):
    """Per-(k, n) UL and DL rates, shape (K, N) each."""
    sigma2 = scn.sigma2
    x = alloc.x.astype(float)
    sinr = ul_sinr_terms(alloc.pu[:, None, :], chan.gu, sigma2, scn.beta)  # (K, M, N)
    r_ul = np.log1p((x * sinr).sum(axis=1)) / np.log(2.0)
    amp = np.sqrt(x * alloc.pd[None, :, :] * chan.gd).sum(axis=1)  # (K, N)
    r_dl = np.log1p(amp ** 2 / sigma2) / np.log(2.0)
    return r_ul, r_dl


def direction_rates(alloc: Allocation, chan: ChannelRealization, scn: Scenario) -> tuple[float, float]:
    """Unweighted UL sum rate and DL sum rate."""
    r_ul, r_dl = _rate_matrices(alloc, chan, scn)
    y = alloc.y.astype(float)
    return float((r_ul * y).sum()), float((r_dl * (1.0 - y)).sum())


def total_throughput(alloc: Allocation, chan: ChannelRealization, scn: Scenario) -> float:
    """Weighted UL plus unweighted DL sum rate over all SCs."""
    r_ul, r_dl = _rate_matrices(alloc, chan, scn)
    y = alloc.y.astype(float)
    return float((scn.w[:, None] * y * r_ul + (1.0 - y) * r_dl).sum())


@dataclass
class Violation:
    kind: str  # budget-ul | budget-dl | fronthaul | exclusivity | duplex-power | binary | negative-power
    index: tuple
    magnitude: float

    def __str__(self):
        return f"{self.kind}{list(self.index)}: {self.magnitude:.3g}"


@dataclass
class FeasibilityReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def check_feasibility(alloc: Allocation, scn: Scenario) -> FeasibilityReport:
    """List every violated constraint; an empty report means feasible.

    Budget magnitudes are relative overshoots, fronthaul and exclusivity
    magnitudes are counts, power-consistency magnitudes are watts.
    """
    K, M, N = scn.K, scn.M, scn.N
    if alloc.x.shape != (K, M, N) or alloc.y.shape != (N,) \
            or alloc.pu.shape != (K, N) or alloc.pd.shape != (M, N):
        raise ValueError("allocation shapes do not match the scenario")
    out: list[Violation] = []
    x, y = alloc.x, alloc.y

    for arr, name in ((x, "x"), (y, "y")):
        bad = np.argwhere((arr != 0) & (arr != 1))
        for idx in bad:
            out.append(Violation("binary", (name, *map(int, idx)), float(arr[tuple(idx)])))
    for arr, name in ((alloc.pu, "pu"), (alloc.pd, "pd")):
        for idx in np.argwhere(arr < 0):
            out.append(Violation("negative-power", (name, *map(int, idx)), float(-arr[tuple(idx)])))

    users_on_sc = x.any(axis=1).sum(axis=0)  # (N,)
    for n in np.flatnonzero(users_on_sc > 1):
        out.append(Violation("exclusivity", (int(n),), float(users_on_sc[n])))

    served = x.any(axis=1)  # (K, N)
    bad_ul = (alloc.pu > 0) & ~((y[None, :] == 1) & served)
    for k, n in np.argwhere(bad_ul):
        out.append(Violation("duplex-power", ("pu", int(k), int(n)), float(alloc.pu[k, n])))
    rrh_busy = x.sum(axis=0)  # (M, N)
    bad_dl = (alloc.pd > 0) & ~((y[None, :] == 0) & (rrh_busy == 1))
    for m, n in np.argwhere(bad_dl):
        out.append(Violation("duplex-power", ("pd", int(m), int(n)), float(alloc.pd[m, n])))

    ul_used = alloc.pu.sum(axis=1)
    for k in np.flatnonzero(ul_used > scn.Pu * (1.0 + BUDGET_RTOL)):
        out.append(Violation("budget-ul", (int(k),), float(ul_used[k] / scn.Pu[k] - 1.0)))
    dl_used = alloc.pd.sum(axis=1)
    for m in np.flatnonzero(dl_used > scn.Pr * (1.0 + BUDGET_RTOL)):
        out.append(Violation("budget-dl", (int(m),), float(dl_used[m] / scn.Pr[m] - 1.0)))

    load = x.sum(axis=(0, 2))
    for m in np.flatnonzero(load > scn.C):
        out.append(Violation("fronthaul", (int(m),), float(load[m] - scn.C[m])))
    return FeasibilityReport(out)
