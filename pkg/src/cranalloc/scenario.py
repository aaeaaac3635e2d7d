"""Problem instances: node placement, path loss, Rayleigh fading and noise.

Every random draw is derived from ``(seed, slot, stream)`` through
:class:`numpy.random.SeedSequence`, so a realization can be regenerated
bit-for-bit from the scenario and slot index alone.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
D_MIN = 1.0  # metres; distances are clamped here to keep gains finite

# RNG stream ids
_STREAM_POSITIONS = 0
_STREAM_UL = 1
_STREAM_DL = 2


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def _as_vector(value, length: int, dtype=float) -> np.ndarray:
    arr = np.asarray(value, dtype=dtype)
    if arr.ndim == 0:
        arr = np.full(length, arr, dtype=dtype)
    if arr.shape != (length,):
        raise ValueError(f"expected scalar or length-{length} vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class Scenario:
    """Static description of one cloud-RAN instance.

    Powers are stored in watts. Use :meth:`from_config` to build one from
    dBm-valued configuration entries.
    """

    K: int
    M: int
    N: int
    C: np.ndarray
    Pu: np.ndarray
    Pr: np.ndarray
    w: np.ndarray
    beta: int = 10
    area_side: float = 500.0
    carrier_hz: float = 2e9
    total_bw_hz: float = 10e6
    noise_psd_dbm_hz: float = -174.0
    pathloss_exp: float = 3.0
    seed: int = 0

    def __post_init__(self):
        for name in ("K", "M", "N"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        object.__setattr__(self, "C", _as_vector(self.C, self.M, dtype=int))
        object.__setattr__(self, "Pu", _as_vector(self.Pu, self.K))
        object.__setattr__(self, "Pr", _as_vector(self.Pr, self.M))
        object.__setattr__(self, "w", _as_vector(self.w, self.K))
        if np.any(self.C < 1) or np.any(self.C > self.N):
            raise ValueError("fronthaul caps must satisfy 1 <= C_m <= N")
        if np.any(self.Pu <= 0) or np.any(self.Pr <= 0):
            raise ValueError("power budgets must be positive")
        if np.any(self.w < 0) or not np.all(np.isfinite(self.w)):
            raise ValueError("UL weights must be finite and nonnegative")
        if int(self.beta) < 1:
            raise ValueError("quantizer resolution beta must be >= 1 bit")
        if self.area_side <= 0:
            raise ValueError("area_side must be positive")
        if not noise_per_sc(self) > 0:
            raise ValueError("per-SC noise power must be positive")

    @property
    def sigma2(self) -> float:
        return noise_per_sc(self)

    @property
    def sc_bandwidth_hz(self) -> float:
        return self.total_bw_hz / self.N

    def with_(self, **changes) -> "Scenario":
        """Copy with some fields replaced (scalars are broadcast)."""
        return replace(self, **changes)

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "Scenario":
        """Build from a flat mapping.

        Power entries may be given in dBm (``Pu_dbm``, ``Pr_dbm``) or watts
        (``Pu``, ``Pr``); ``C`` defaults to ``N // 2`` and ``w`` to 1.
        """
        cfg = dict(cfg)
        K, M, N = int(cfg.pop("K")), int(cfg.pop("M")), int(cfg.pop("N"))
        if "Pu_dbm" in cfg:
            Pu = dbm_to_watt(cfg.pop("Pu_dbm"))
        else:
            Pu = cfg.pop("Pu", dbm_to_watt(23.0))
        if "Pr_dbm" in cfg:
            Pr = dbm_to_watt(cfg.pop("Pr_dbm"))
        else:
            Pr = cfg.pop("Pr", dbm_to_watt(30.0))
        C = cfg.pop("C", max(N // 2, 1))
        w = cfg.pop("w", 1.0)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(K=K, M=M, N=N, C=C, Pu=Pu, Pr=Pr, w=w, **cfg)

    def to_config(self) -> dict:
        return {
            "K": self.K, "M": self.M, "N": self.N,
            "C": self.C.tolist(),
            "Pu": self.Pu.tolist(), "Pr": self.Pr.tolist(), "w": self.w.tolist(),
            "beta": int(self.beta), "area_side": self.area_side,
            "carrier_hz": self.carrier_hz, "total_bw_hz": self.total_bw_hz,
            "noise_psd_dbm_hz": self.noise_psd_dbm_hz,
            "pathloss_exp": self.pathloss_exp, "seed": int(self.seed),
        }


def noise_per_sc(scn: Scenario) -> float:
    """Noise power on one subcarrier, in watts."""
    bw = scn.total_bw_hz / scn.N
    with np.errstate(divide="ignore"):
        dbm = scn.noise_psd_dbm_hz + 10.0 * np.log10(bw)
    return float(10.0 ** (dbm / 10.0) / 1000.0)


def _rng(scn: Scenario, slot: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(scn.seed), spawn_key=(int(slot), int(stream)))
    return np.random.default_rng(ss)


def place_nodes(scn: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Drop K users and M RRHs uniformly in the square ``[0, area_side]^2``.

    Positions depend only on the scenario seed, so every fading slot of a
    scenario shares the same geometry.
    """
    rng = _rng(scn, 0, _STREAM_POSITIONS)
    users = rng.uniform(0.0, scn.area_side, size=(scn.K, 2))
    rrhs = rng.uniform(0.0, scn.area_side, size=(scn.M, 2))
    return users, rrhs


def distances(users: np.ndarray, rrhs: np.ndarray) -> np.ndarray:
    """User-RRH distances (K, M), floored at :data:`D_MIN`."""
    d = np.linalg.norm(users[:, None, :] - rrhs[None, :, :], axis=-1)
    return np.maximum(d, D_MIN)


def path_loss(d, carrier_hz: float, exponent: float):
    """Free-space gain at 1 m times ``d ** -exponent``."""
    anchor = (SPEED_OF_LIGHT / (4.0 * np.pi * carrier_hz)) ** 2
    return anchor * np.maximum(np.asarray(d, dtype=float), D_MIN) ** (-exponent)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """UL/DL channel power gains for one slot, indexed ``[k, m, n]``."""

    gu: np.ndarray
    gd: np.ndarray
    positions_users: np.ndarray
    positions_rrhs: np.ndarray
    slot: int = 0

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.gu.shape

    def nearest_rrh(self) -> np.ndarray:
        """Index of the closest RRH per user; ties go to the lowest index."""
        d = distances(self.positions_users, self.positions_rrhs)
        return np.argmin(d, axis=1)

    def tobytes(self) -> bytes:
        parts = [np.ascontiguousarray(a, dtype="<f8").tobytes()
                 for a in (self.gu, self.gd, self.positions_users, self.positions_rrhs)]
        return b"".join(parts)

    def to_csv(self, path=None) -> str:
        """Flat dump ``k,m,n,gu,gd``; returns the text and optionally writes it."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "m", "n", "gu", "gd"])
        K, M, N = self.gu.shape
        for k in range(K):
            for m in range(M):
                for n in range(N):
                    writer.writerow([k, m, n, repr(float(self.gu[k, m, n])),
                                     repr(float(self.gd[k, m, n]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str, positions_users, positions_rrhs, slot: int = 0):
        rows = list(csv.DictReader(io.StringIO(text)))
        K = 1 + max(int(r["k"]) for r in rows)
        M = 1 + max(int(r["m"]) for r in rows)
        N = 1 + max(int(r["n"]) for r in rows)
        gu = np.zeros((K, M, N))
        gd = np.zeros((K, M, N))
        for r in rows:
            idx = int(r["k"]), int(r["m"]), int(r["n"])
            gu[idx] = float(r["gu"])
            gd[idx] = float(r["gd"])
        return cls(gu, gd, np.asarray(positions_users), np.asarray(positions_rrhs), slot)


def draw_channels(scn: Scenario, slot: int = 0,
                  positions: tuple[np.ndarray, np.ndarray] | None = None) -> ChannelRealization:
    """Path loss times unit-mean exponential small-scale fading.

    UL and DL gains come from independent streams (no reciprocity).
    """
    users, rrhs = place_nodes(scn) if positions is None else positions
    pl = path_loss(distances(users, rrhs), scn.carrier_hz, scn.pathloss_exp)
    shape = (scn.K, scn.M, scn.N)
    fade_u = _rng(scn, slot, _STREAM_UL).exponential(1.0, size=shape)
    fade_d = _rng(scn, slot, _STREAM_DL).exponential(1.0, size=shape)
    gu = pl[:, :, None] * fade_u
    gd = pl[:, :, None] * fade_d
    # an exact zero draw is possible in principle; keep gains strictly positive
    tiny = np.finfo(float).tiny
    gu = np.maximum(gu, tiny)
    gd = np.maximum(gd, tiny)
    return ChannelRealization(gu, gd, np.asarray(users), np.asarray(rrhs), int(slot))


def standard_scenario(K: int = 8, M: int = 4, N: int = 64, C: int | None = None,
                   Pu_dbm: float = 23.0, Pr_dbm: float = 30.0, w: float = 1.0,
                   seed: int = 0, **extra) -> Scenario:
    """Default instance: 500 m square, 23 dBm users, 30 dBm RRHs, C = N // 2."""
    return Scenario.from_config({
        "K": K, "M": M, "N": N, "C": N // 2 if C is None else C,
        "Pu_dbm": Pu_dbm, "Pr_dbm": Pr_dbm, "w": w, "seed": seed, **extra,
    })
