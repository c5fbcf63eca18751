"""Stochastic cascaded channels: BS->IRS, IRS->users and IRS->target.

Every link is a Rician mix of a geometric LoS term and a circularly
symmetric complex Gaussian NLoS term. The user and target links carry a
Doppler rotation on their LoS term; the BS-IRS link is static.

Two modelling switches live on :class:`FadingConfig`:

``path_distance``
    ``"euclidean"`` (default) uses the true distance ``sqrt(eps)`` in the
    path-loss amplitudes, ``"squared"`` plugs the squared distance ``eps``
    straight in.
``radar_exponent``
    power applied to that distance inside the radar amplitude
    ``sqrt(lambda^2 sigma / ((4 pi)^3 D^p))``. With euclidean distance and
    ``p = 4`` this is the free-space radar equation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (SPEED_OF_LIGHT, Mobility, SceneGeometry, doppler_target,
                       doppler_user, squared_distances)

NLOS_MODES = ("verbatim", "normalized")
PATH_DISTANCES = ("euclidean", "squared")


def wavelength(f_c: float) -> float:
    if not f_c > 0:
        raise ValueError(f"carrier frequency must be > 0, got {f_c}")
    return SPEED_OF_LIGHT / f_c


@dataclass(frozen=True)
class FadingConfig:
    f_c: float = 2.4e9
    K_BI: float = 10.0
    K_IU: float = 10.0
    K_IR: float = 10.0
    rcs: float = 20.0
    nlos_weight: str = "verbatim"
    noise_user: float = 1e-15
    noise_radar: float = 1e-15
    path_distance: str = "euclidean"
    radar_exponent: int = 4

    def __post_init__(self):
        if not self.f_c > 0:
            raise ValueError("f_c must be > 0")
        if not self.rcs > 0:
            raise ValueError("rcs must be > 0")
        if not (self.noise_user > 0 and self.noise_radar > 0):
            raise ValueError("noise powers must be > 0")
        if min(self.K_BI, self.K_IU, self.K_IR) < 0:
            raise ValueError("Rician factors must be >= 0")
        if self.nlos_weight not in NLOS_MODES:
            raise ValueError(f"nlos_weight must be one of {NLOS_MODES}")
        if self.path_distance not in PATH_DISTANCES:
            raise ValueError(f"path_distance must be one of {PATH_DISTANCES}")
        if self.radar_exponent not in (2, 4):
            raise ValueError("radar_exponent must be 2 or 4")

    @property
    def wavelength(self) -> float:
        return wavelength(self.f_c)


@dataclass(frozen=True)
class ChannelRealization:
    G: np.ndarray          # (N, M)
    h_users: np.ndarray    # (N, K), column k is h_k(t)
    h_r: np.ndarray        # (N,)
    t: float
    # NLoS draws, kept so the realization can be advanced in time
    nlos: tuple = field(repr=False, default=())


def rician_los_weight(K: float) -> float:
    return float(np.sqrt(K / (K + 1.0)))


def nlos_scale(K: float, mode: str) -> float:
    return 1.0 if mode == "verbatim" else float(np.sqrt(1.0 / (K + 1.0)))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


class ChannelModel:
    """Precomputed static parts of the channel for one scene.

    Path gains, LoS base phases and Doppler shifts depend only on the
    geometry, fading config and mobility, so they are built once here and
    reused by :meth:`realize` and :meth:`advance`.
    """

    def __init__(self, geom: SceneGeometry, fading: FadingConfig, mob: Mobility):
        self.geom, self.fading, self.mob = geom, fading, mob
        lam = fading.wavelength
        eps = squared_distances(geom)
        if min(eps.bs_irs.min(), eps.irs_user.min(), eps.irs_target.min()) <= 0:
            raise ValueError("coincident nodes: zero propagation distance")
        dist = (lambda e: np.sqrt(e)) if fading.path_distance == "euclidean" else (lambda e: e)

        self.gain_bi = lam / (4 * np.pi * dist(eps.bs_irs))            # (M, N)
        self.gain_iu = lam / (4 * np.pi * dist(eps.irs_user))          # (N, K)
        self.gain_ir = np.sqrt(lam**2 * fading.rcs
                               / ((4 * np.pi)**3 * dist(eps.irs_target)**fading.radar_exponent))

        self.los_bi = rician_los_weight(fading.K_BI) * np.exp(-2j * np.pi * np.sqrt(eps.bs_irs) / lam)
        self.los_iu0 = rician_los_weight(fading.K_IU) * np.exp(-2j * np.pi * np.sqrt(eps.irs_user) / lam)
        self.los_ir0 = rician_los_weight(fading.K_IR) * np.exp(-2j * np.pi * np.sqrt(eps.irs_target) / lam)
        self.f_user = doppler_user(geom, mob, lam)                      # (K,)
        self.f_target = doppler_target(geom, mob, lam)

        self.w_bi = nlos_scale(fading.K_BI, fading.nlos_weight)
        self.w_iu = nlos_scale(fading.K_IU, fading.nlos_weight)
        self.w_ir = nlos_scale(fading.K_IR, fading.nlos_weight)

    def los(self, t: float):
        """LoS tables (M x N, N x K, N) at time ``t``."""
        rot_u = np.exp(2j * np.pi * t * self.f_user)
        rot_r = np.exp(2j * np.pi * t * self.f_target)
        return self.los_bi, self.los_iu0 * rot_u[None, :], self.los_ir0 * rot_r

    def _compose(self, t, nlos_bi, nlos_iu, nlos_ir, G=None) -> ChannelRealization:
        los_bi, los_iu, los_ir = self.los(t)
        if G is None:
            G = (self.gain_bi * (los_bi + self.w_bi * nlos_bi)).T
        h_users = self.gain_iu * (los_iu + self.w_iu * nlos_iu)
        h_r = self.gain_ir * (los_ir + self.w_ir * nlos_ir)
        return ChannelRealization(G=G, h_users=h_users, h_r=h_r, t=float(t),
                                  nlos=(nlos_bi, nlos_iu, nlos_ir))

    def draw_nlos(self, rng: np.random.Generator):
        g = self.geom
        return (complex_normal(rng, (g.M, g.N)), complex_normal(rng, (g.N, g.K)),
                complex_normal(rng, g.N))

    def realize(self, t: float = 0.0, rng_seed=None) -> ChannelRealization:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        return self._compose(t, *self.draw_nlos(rng))

    def advance(self, real: ChannelRealization, dt: float) -> ChannelRealization:
        """Same NLoS draws, LoS Doppler phases rotated to ``t + dt``."""
        if dt < 0:
            raise ValueError("dt must be >= 0")
        if dt == 0:
            return real
        return self._compose(real.t + dt, *real.nlos, G=real.G)


def los_components(geom: SceneGeometry, fading: FadingConfig, mob: Mobility, t: float):
    return ChannelModel(geom, fading, mob).los(t)


def realize(geom: SceneGeometry, fading: FadingConfig, mob: Mobility, t: float = 0.0,
            rng_seed=None) -> ChannelRealization:
    return ChannelModel(geom, fading, mob).realize(t, rng_seed)


def advance(real: ChannelRealization, geom: SceneGeometry, fading: FadingConfig,
            mob: Mobility, dt: float) -> ChannelRealization:
    return ChannelModel(geom, fading, mob).advance(real, dt)


def dump_csv(real: ChannelRealization, path) -> None:
    """Write a realization as rows of ``link,row,col,re,im``.

    ``link`` is one of ``G``, ``h_users`` or ``h_r``; indices are 0-based and
    ``h_r`` uses ``col = 0``. Values are written with ``repr`` so a reload is
    exact.
    """
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["link", "row", "col", "re", "im"])
        for name, arr in (("G", real.G), ("h_users", real.h_users), ("h_r", real.h_r[:, None])):
            for (i, j), z in np.ndenumerate(arr):
                w.writerow([name, i, j, repr(float(z.real)), repr(float(z.imag))])


def load_csv(path) -> dict:
    rows: dict[str, list] = {}
    with open(Path(path), newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.setdefault(rec["link"], []).append(
                (int(rec["row"]), int(rec["col"]), complex(float(rec["re"]), float(rec["im"]))))
    out = {}
    for name, entries in rows.items():
        shape = (max(r for r, _, _ in entries) + 1, max(c for _, c, _ in entries) + 1)
        arr = np.zeros(shape, dtype=complex)
        for r, c, z in entries:
            arr[r, c] = z
        out[name] = arr[:, 0] if name == "h_r" else arr
    return out
