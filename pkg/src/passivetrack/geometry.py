"""2D geometry of the receiver, the two transmitters and the blocker.

The receiver sits at the origin and transmitter 1 on the positive x-axis at
``[d, 0]``. Points and velocities are plain ``numpy`` arrays whose last axis
has length 2, so most functions broadcast over stacks of positions.

Angles cross this module's boundary in degrees; everything inside is radians.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Below this |sin| the RX/TX1/TX2 triangle is treated as collinear.
_COLLINEAR_TOL = 1e-12


class GeometryError(ValueError):
    """Raised when a forward model is evaluated at a singular point."""


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError(f"expected a trailing axis of length 2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coordinate")
    return arr


def wavelength(carrier_hz: float) -> float:
    """Carrier wavelength in meters."""
    if carrier_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / carrier_hz


@dataclass(frozen=True)
class AdoaPair:
    """Inner angles of the RX/TX1/TX2 triangle at RX and at TX1, in degrees.

    ``half_plane`` is the sign of TX2's y coordinate. ``collinear`` marks a
    degenerate triangle; such a pair cannot be inverted into a TX2 position.
    """

    phi_rx: float
    phi_tx1: float
    half_plane: int = 1
    collinear: bool = False

    def __post_init__(self):
        if self.half_plane not in (1, -1):
            raise ValueError("half_plane must be +1 or -1")
        if not self.collinear:
            if not (0.0 < self.phi_rx < 180.0 and 0.0 < self.phi_tx1 < 180.0):
                raise ValueError("ADoA angles must lie in (0, 180) degrees")
            if self.phi_rx + self.phi_tx1 >= 180.0:
                raise ValueError("phi_rx + phi_tx1 must be below 180 degrees")


@dataclass
class MotionParams:
    """Unknowns of the trajectory fit: ``[d, p1, v_1 ... v_K]``."""

    d: float
    p1: np.ndarray
    velocities: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.d = float(self.d)
        self.p1 = as_point(self.p1).reshape(2)
        self.velocities = as_point(self.velocities).reshape(-1, 2)
        if self.d <= 0:
            raise ValueError("d must be positive")
        if len(self.velocities) < 1:
            raise ValueError("at least one velocity is required")

    @property
    def K(self) -> int:
        return len(self.velocities)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.d], self.p1, self.velocities.ravel()])

    @classmethod
    def from_vector(cls, x) -> "MotionParams":
        x = np.asarray(x, dtype=float)
        return cls(d=x[0], p1=x[1:3], velocities=x[3:].reshape(-1, 2))

    def positions(self, T_d: float) -> np.ndarray:
        """Blocker positions p_1 ... p_K, shape (K, 2)."""
        steps = np.cumsum(self.velocities[:-1] * T_d, axis=0)
        return np.vstack([self.p1, self.p1 + steps])


def _angle_between(a: np.ndarray, b: np.ndarray) -> float:
    cross = a[0] * b[1] - a[1] * b[0]
    return float(np.degrees(np.arctan2(abs(cross), float(np.dot(a, b)))))


def adoa_from_positions(p_tx1, p_tx2) -> AdoaPair:
    """Inner angles at RX and TX1 of the triangle RX(origin), TX1, TX2.

    A collinear configuration comes back with ``collinear=True`` and the raw
    (0 or 180 degree) angles; the caller decides what to do with it.
    """
    t1 = as_point(p_tx1)
    t2 = as_point(p_tx2)
    if np.hypot(*t1) == 0 or np.hypot(*t2) == 0 or np.array_equal(t1, t2):
        raise GeometryError("transmitters must be distinct and away from the receiver")
    phi_rx = _angle_between(t1, t2)
    phi_tx1 = _angle_between(-t1, t2 - t1)
    cross = t1[0] * t2[1] - t1[1] * t2[0]
    sin_rx = abs(cross) / (np.hypot(*t1) * np.hypot(*t2))
    half_plane = 1 if t2[1] >= 0 else -1
    if sin_rx < _COLLINEAR_TOL:
        return AdoaPair(phi_rx, phi_tx1, half_plane, collinear=True)
    return AdoaPair(phi_rx, phi_tx1, half_plane)


def tx2_unit_position(adoa: AdoaPair) -> np.ndarray:
    """TX2 position for d = 1; the true position scales linearly with d."""
    if adoa.collinear:
        raise GeometryError("cannot place TX2 from a collinear ADoA pair")
    a_rx = np.radians(adoa.phi_rx)
    a_tx1 = np.radians(adoa.phi_tx1)
    # law of sines: |TX2| / sin(phi_tx1) = d / sin(angle at TX2)
    r = np.sin(a_tx1) / np.sin(a_rx + a_tx1)
    return r * np.array([np.cos(a_rx), adoa.half_plane * np.sin(a_rx)])


def tx2_position(adoa: AdoaPair, d: float) -> np.ndarray:
    if d <= 0:
        raise ValueError("d must be positive")
    return d * tx2_unit_position(adoa)


def blocker_position(mp: MotionParams, k: int, T_d: float) -> np.ndarray:
    """Position at the start of sweep ``k`` (1-based, up to K+1)."""
    if not 1 <= k <= mp.K + 1:
        raise IndexError(f"sweep index {k} outside 1..{mp.K + 1}")
    return mp.p1 + mp.velocities[: k - 1].sum(axis=0) * T_d


def aoa(p) -> np.ndarray | float:
    """Unsigned angle in degrees between ``p`` and the RX->TX1 axis."""
    p = as_point(p)
    r = np.hypot(p[..., 0], p[..., 1])
    if np.any(r == 0):
        raise GeometryError("AoA undefined at the receiver position")
    out = np.degrees(np.arctan2(np.abs(p[..., 1]), p[..., 0]))
    return float(out) if out.ndim == 0 else out


def _unit(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.hypot(z[..., 0], z[..., 1])
    if np.any(n == 0):
        raise GeometryError("blocker coincides with a link endpoint")
    return z / n[..., None], n


def bistatic_doppler(p, v, p_tx, wavelength: float) -> np.ndarray | float:
    """Doppler shift in Hz of the TX -> blocker -> RX path.

    Positive when the bistatic path length grows.
    """
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    p = as_point(p)
    v = as_point(v)
    u_tx, _ = _unit(p - as_point(p_tx))
    u_rx, _ = _unit(p)
    out = np.sum((u_tx + u_rx) * v, axis=-1) / wavelength
    return float(out) if np.ndim(out) == 0 else out


def true_features(
    mp: MotionParams, adoa: AdoaPair, wavelengths: tuple[float, float], T_d: float
) -> np.ndarray:
    """Noise-free (aoa_deg, f1_hz, f2_hz) per sweep, shape (K, 3)."""
    pos = mp.positions(T_d)
    tx1 = np.array([mp.d, 0.0])
    tx2 = tx2_position(adoa, mp.d)
    out = np.empty((mp.K, 3))
    out[:, 0] = aoa(pos)
    out[:, 1] = bistatic_doppler(pos, mp.velocities, tx1, wavelengths[0])
    out[:, 2] = bistatic_doppler(pos, mp.velocities, tx2, wavelengths[1])
    return out
