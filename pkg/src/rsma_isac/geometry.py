"""3D placement of BS antennas, IRS elements, users and the radar target.

Coordinates follow the usual layout for this scene: the BS is a ULA along
the y-axis at the origin, the users form a ULA on the ground at ``x_U``, and
the IRS is a square planar array centred at ``(x_I, y_I, H_I)`` with
elements offset jointly along x and z.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SceneGeometry:
    """Array sizes, spacings (meters), heights and planar coordinates."""

    M: int = 4
    K: int = 2
    N: int = 9
    d_B: float = 0.0625
    d_I: float = 0.025
    d_U: float = 0.5
    H_B: float = 20.0
    H_I: float = 25.0
    H_R: float = 25.0
    x_I: float = 1.0
    y_I: float = 2.0
    x_U: float = 2.0
    x_R: float = 1.5
    y_R: float = 1.0

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.N < 1:
            raise ValueError("M, K and N must all be >= 1")
        side = math.isqrt(self.N)
        if side * side != self.N:
            raise ValueError(f"N must be a perfect square, got {self.N}")
        for name in ("d_B", "d_I", "d_U"):
            if not getattr(self, name) > 0:
                raise ValueError(f"spacing {name} must be > 0")
        for name in ("H_B", "H_I", "H_R"):
            if getattr(self, name) < 0:
                raise ValueError(f"height {name} must be >= 0")

    @property
    def side(self) -> int:
        return math.isqrt(self.N)

    @classmethod
    def with_wavelength_spacings(cls, wavelength: float, d_B_wl: float = 0.5,
                                 d_I_wl: float = 0.2, **kwargs) -> "SceneGeometry":
        """Build a geometry whose BS and IRS spacings are given in wavelengths."""
        if wavelength <= 0:
            raise ValueError("wavelength must be > 0")
        return cls(d_B=d_B_wl * wavelength, d_I=d_I_wl * wavelength, **kwargs)


@dataclass(frozen=True)
class Mobility:
    """Per-user and target speeds (m/s) and motion angles (radians)."""

    v_k: tuple = (1.0, 1.0)
    gamma_k: tuple = (0.0, 0.0)
    v_r: float = 5.0
    gamma_r: float = 0.0

    def __post_init__(self):
        if len(self.v_k) != len(self.gamma_k):
            raise ValueError("v_k and gamma_k must have the same length")
        if any(v < 0 for v in self.v_k) or self.v_r < 0:
            raise ValueError("speeds must be >= 0")

    @classmethod
    def uniform(cls, K: int, v_k: float = 1.0, gamma_k: float = 0.0,
                v_r: float = 5.0, gamma_r: float = 0.0) -> "Mobility":
        return cls(v_k=(v_k,) * K, gamma_k=(gamma_k,) * K, v_r=v_r, gamma_r=gamma_r)

    @classmethod
    def static(cls, K: int) -> "Mobility":
        return cls.uniform(K, v_k=0.0, v_r=0.0)


def _centering(side: int) -> float:
    return (side + 1) // 2 + 0.5 * ((side + 1) % 2)


def irs_offset(n: int, geom: SceneGeometry) -> float:
    """Signed offset of the 1-based IRS element ``n`` along x and z (meters)."""
    if not 1 <= n <= geom.N:
        raise IndexError(f"IRS element index {n} outside 1..{geom.N}")
    side = geom.side
    return (n - ((n - 1) // side) * side - _centering(side)) * geom.d_I


def irs_offsets(geom: SceneGeometry) -> np.ndarray:
    side = geom.side
    n = np.arange(1, geom.N + 1)
    return (n - ((n - 1) // side) * side - _centering(side)) * geom.d_I


@dataclass(frozen=True)
class Positions:
    bs: np.ndarray        # (M, 3)
    users: np.ndarray     # (K, 3)
    irs: np.ndarray       # (N, 3)
    irs_center: np.ndarray
    target: np.ndarray


def positions(geom: SceneGeometry) -> Positions:
    m = np.arange(1, geom.M + 1)
    k = np.arange(1, geom.K + 1)
    delta = irs_offsets(geom)
    bs = np.column_stack([np.zeros(geom.M), (geom.M - 2 * m + 1) * geom.d_B / 2,
                          np.full(geom.M, geom.H_B)])
    users = np.column_stack([np.full(geom.K, geom.x_U), (geom.K - 2 * k + 1) * geom.d_U / 2,
                             np.zeros(geom.K)])
    irs = np.column_stack([geom.x_I + delta, np.full(geom.N, geom.y_I), geom.H_I + delta])
    return Positions(bs=bs, users=users, irs=irs,
                     irs_center=np.array([geom.x_I, geom.y_I, geom.H_I]),
                     target=np.array([geom.x_R, geom.y_R, geom.H_R]))


@dataclass(frozen=True)
class SquaredDistances:
    bs_irs: np.ndarray     # (M, N)
    irs_user: np.ndarray   # (N, K)
    irs_target: np.ndarray  # (N,)


def squared_distances(geom: SceneGeometry) -> SquaredDistances:
    """Sums of squared coordinate differences for every link pair.

    These are squared distances; callers decide whether to take the root.
    """
    delta = irs_offsets(geom)
    m = np.arange(1, geom.M + 1)
    k = np.arange(1, geom.K + 1)

    x_mn = np.broadcast_to(geom.x_I + delta, (geom.M, geom.N))
    y_mn = (geom.y_I - (geom.M - 2 * m + 1) * geom.d_B / 2)[:, None]
    z_mn = np.broadcast_to(geom.H_I + delta - geom.H_B, (geom.M, geom.N))
    bs_irs = x_mn**2 + y_mn**2 + z_mn**2

    x_nk = (geom.x_I + delta - geom.x_U)[:, None]
    y_nk = (geom.y_I - (geom.K - 2 * k + 1) * geom.d_U / 2)[None, :]
    z_nk = (geom.H_I + delta)[:, None]
    irs_user = x_nk**2 + y_nk**2 + z_nk**2

    irs_target = ((geom.x_I + delta - geom.x_R)**2 + (geom.y_I - geom.y_R)**2
                  + (geom.H_I + delta - geom.H_R)**2)
    return SquaredDistances(bs_irs=bs_irs, irs_user=irs_user, irs_target=irs_target)


def _projected_doppler(speed, angle, dx, dy, wavelength, what):
    if wavelength <= 0:
        raise ValueError("wavelength must be > 0")
    norm = math.hypot(dx, dy)
    speed = np.asarray(speed, dtype=float)
    if norm == 0.0:
        logger.warning("degenerate %s Doppler geometry (zero planar separation); using 0 Hz", what)
        return np.zeros_like(speed)
    angle = np.asarray(angle, dtype=float)
    return speed / wavelength * (dx * np.cos(angle) + dy * np.sin(angle)) / norm


def doppler_user(geom: SceneGeometry, mob: Mobility, wavelength: float) -> np.ndarray:
    """LoS Doppler shift (Hz) on the IRS-user link, one value per user.

    All users share the array centre ``x_U`` in the projection; only their
    speeds and headings differ.
    """
    if len(mob.v_k) != geom.K:
        raise ValueError(f"mobility has {len(mob.v_k)} users, geometry has {geom.K}")
    return _projected_doppler(mob.v_k, mob.gamma_k, geom.x_I - geom.x_U, geom.y_I,
                              wavelength, "user")


def doppler_target(geom: SceneGeometry, mob: Mobility, wavelength: float) -> float:
    """LoS Doppler shift (Hz) on the IRS-target link."""
    return float(_projected_doppler(mob.v_r, mob.gamma_r, geom.x_I - geom.x_R,
                                    geom.y_R - geom.y_I, wavelength, "target"))
