"""Central-cut ellipsoid method state and update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EllipsoidBreakdown(FloatingPointError):
    """The shape matrix stopped being positive definite."""


@dataclass
class DualState:
    """Ellipsoid ``{z : (z - center)^T shape^{-1} (z - center) <= 1}``."""

    center: np.ndarray
    shape: np.ndarray
    iter: int = 0

    @property
    def z(self) -> np.ndarray:
        """Center projected onto the nonnegative orthant."""
        return np.maximum(self.center, 0.0)

    @property
    def n(self) -> int:
        return self.center.size

    @classmethod
    def ball(cls, center, radius) -> "DualState":
        """Axis-aligned start; ``radius`` may be a scalar or one per axis."""
        center = np.asarray(center, dtype=float).copy()
        r = np.broadcast_to(np.asarray(radius, dtype=float), center.shape)
        return cls(center, np.diag(r ** 2), 0)

    def width(self, cut: np.ndarray) -> float:
        """``sqrt(cut^T shape cut)``: the spread of a linear function along
        ``cut`` over the ellipsoid, used as the stopping measure."""
        return float(np.sqrt(max(cut @ self.shape @ cut, 0.0)))

    def log_volume(self) -> float:
        """Log-determinant of the shape matrix (volume up to a constant)."""
        sign, logdet = np.linalg.slogdet(self.shape)
        return 0.5 * logdet if sign > 0 else -np.inf


def _repair(P: np.ndarray) -> np.ndarray:
    P = 0.5 * (P + P.T)
    try:
        np.linalg.cholesky(P)
        return P
    except np.linalg.LinAlgError:
        pass
    jittered = P + 1e-12 * np.trace(P) * np.eye(P.shape[0])
    try:
        np.linalg.cholesky(jittered)
    except np.linalg.LinAlgError as exc:
        eig = np.linalg.eigvalsh(P)
        raise EllipsoidBreakdown(
            f"ellipsoid shape lost positive definiteness: min eig {eig.min():.3e}, "
            f"max eig {eig.max():.3e}") from exc
    return jittered


def ellipsoid_step(state: DualState, cut) -> DualState:
    """Shrink to the smallest ellipsoid containing ``{z : cut^T (z - center) <= 0}``.

    The kept half-space is the side opposite ``cut``; pass a subgradient of
    the minimized function, or ``-e_i`` to enforce ``z_i >= 0``.
    """
    cut = np.asarray(cut, dtype=float)
    P = state.shape
    n = state.n
    Pg = P @ cut
    gPg = float(cut @ Pg)
    if not gPg > 0:
        raise ValueError("cut must be nonzero")
    b = Pg / np.sqrt(gPg)
    if n == 1:
        center = state.center - 0.5 * b
        shape = P / 4.0
    else:
        center = state.center - b / (n + 1)
        shape = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1)) * np.outer(b, b))
        shape = _repair(shape)
    return DualState(center, shape, state.iter + 1)


def clip_to_box(state: DualState, lo, hi, weight: float = 0.5) -> DualState:
    """An ellipsoid containing the intersection of ``state`` with the box
    ``[lo, hi]``.

    The box lies in the ball-like ellipsoid ``B`` with center ``(lo+hi)/2``
    and semi-axes ``sqrt(n) (hi-lo)/2``. Any point inside both ``state``
    and ``B`` satisfies ``weight * q_state + (1-weight) * q_B <= 1``, and that
    sublevel set is again an ellipsoid. Axes the cuts never touch keep
    stretching under the central-cut update; this bounds them by the box
    without discarding the shape learned along cut directions.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = state.n
    a = np.linalg.inv(_repair(state.shape))
    b_diag = 4.0 / (n * (hi - lo) ** 2)
    mid = 0.5 * (lo + hi)
    h = weight * a
    h[np.diag_indices(n)] += (1.0 - weight) * b_diag
    rhs = weight * (a @ state.center) + (1.0 - weight) * b_diag * mid
    center = np.linalg.solve(h, rhs)
    const = (weight * state.center @ a @ state.center
             + (1.0 - weight) * (b_diag * mid ** 2).sum() - center @ h @ center)
    level = 1.0 - const
    if not level > 0:
        raise EllipsoidBreakdown("ellipsoid and box do not intersect")
    shape = _repair(level * np.linalg.inv(h))
    return DualState(center, shape, state.iter)
