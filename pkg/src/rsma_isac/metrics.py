"""Link metrics for one channel realization and one transmit design.

Functions broadcast over leading batch axes: a ``Decision`` whose arrays
carry an extra leading dimension yields metrics with that same leading
dimension. Shapes in the comments below omit the batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerModel:
    amplifier_efficiency: float = 1.0
    chi: int = 0
    static_power: float = 1.0
    max_power: float = 0.1
    # False: the budget caps the radiated part P - P_ST (the static draw alone
    # already exceeds P_max at the default operating point)
    budget_includes_static: bool = False

    def __post_init__(self):
        if self.amplifier_efficiency < 1:
            raise ValueError("amplifier efficiency must be >= 1")
        if self.chi not in (0, 1):
            raise ValueError("chi must be 0 or 1")
        if not self.max_power > 0:
            raise ValueError("max_power must be > 0")
        if self.static_power < 0:
            raise ValueError("static_power must be >= 0")


@dataclass(frozen=True)
class QosThresholds:
    rate_threshold: float | tuple = 4.0
    snr_threshold: float = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.rate_threshold) < 0) or self.snr_threshold < 0:
            raise ValueError("thresholds must be >= 0")


@dataclass(frozen=True)
class Decision:
    v_c: np.ndarray    # (M,)
    v_p: np.ndarray    # (M, K), column k is v_k
    v_r: np.ndarray    # (M,)
    u: np.ndarray      # (M,)
    c: np.ndarray      # (K,)
    phases: np.ndarray  # (N,)


@dataclass(frozen=True)
class LinkMetrics:
    sinr_c: np.ndarray
    sinr_p: np.ndarray
    rate_c: np.ndarray
    rate_p: np.ndarray
    common: np.ndarray
    sum_rate: np.ndarray
    power: np.ndarray
    ee: np.ndarray
    echo_snr: np.ndarray
    flags: tuple
    reward: np.ndarray

    @property
    def feasible(self):
        return self.flags[0] & self.flags[1] & self.flags[2] & self.flags[3]


def phase_matrix_diag(phases) -> np.ndarray:
    return np.exp(1j * np.asarray(phases))


def cascade_users(h_users, phases, G) -> np.ndarray:
    """Stack of cascaded user channels ``F_k = h_k^H Phi G``, shape (K, M)."""
    h_users, G = np.asarray(h_users), np.asarray(G)
    N = G.shape[0]
    if h_users.shape[0] != N or np.shape(phases)[-1] != N:
        raise ValueError("dimension mismatch between h_users, phases and G")
    return (h_users.conj().T * phase_matrix_diag(phases)[..., None, :]) @ G


def cascade_user(h_k, phases, G) -> np.ndarray:
    return cascade_users(np.asarray(h_k)[:, None], phases, G)[..., 0, :]


def echo_vector(G, phases, h_r) -> np.ndarray:
    """``a = G^H Phi h_r`` so that the echo channel is ``a a^H``."""
    G = np.asarray(G)
    if G.shape[0] != np.shape(h_r)[-1] or np.shape(phases)[-1] != G.shape[0]:
        raise ValueError("dimension mismatch between G, phases and h_r")
    return (phase_matrix_diag(phases) * h_r) @ G.conj()


def cascade_echo(G, phases, h_r) -> np.ndarray:
    a = echo_vector(G, phases, h_r)
    return a[..., :, None] * a.conj()[..., None, :]


def link_gains(F, dec: Decision):
    """``|F_k v|^2`` terms: common (K,), private (K, K) with ``[k, i] = |F_k v_i|^2``, radar (K,)."""
    V = np.concatenate([dec.v_c[..., None], dec.v_p, dec.v_r[..., None]], axis=-1)
    FV = F @ V
    g = FV.real**2 + FV.imag**2
    return g[..., 0], g[..., 1:-1], g[..., -1]


def _sinr_common(gains, noise, chi, exclude_own):
    common, private, radar = gains
    interference = private.sum(axis=-1)
    if exclude_own:
        interference = interference - np.diagonal(private, axis1=-2, axis2=-1)
    return common / (interference + chi * radar + noise)


def _sinr_private(gains, noise, chi):
    _, private, radar = gains
    own = np.diagonal(private, axis1=-2, axis2=-1)
    return own / (private.sum(axis=-1) - own + chi * radar + noise)


def sinr_common(F, dec: Decision, noise: float, chi: int = 1, exclude_own: bool = False):
    """Common-stream SINR; every private stream, the user's own included, interferes."""
    return _sinr_common(link_gains(F, dec), noise, chi, exclude_own)


def sinr_private(F, dec: Decision, noise: float, chi: int = 1):
    """Private-stream SINR after the common stream has been removed by SIC."""
    return _sinr_private(link_gains(F, dec), noise, chi)


def rates(sinr_c, sinr_p):
    return np.log2(1.0 + np.asarray(sinr_c)), np.log2(1.0 + np.asarray(sinr_p))


def _sq(x):
    x = np.asarray(x)
    return x.real**2 + x.imag**2


def transmit_power(dec: Decision, pm: PowerModel):
    radiated = (_sq(dec.v_c).sum(axis=-1) + _sq(dec.v_p).sum(axis=(-2, -1))
                + pm.chi * _sq(dec.v_r).sum(axis=-1))
    return pm.amplifier_efficiency * radiated + pm.static_power


def energy_efficiency(common, rate_p, power):
    power = np.asarray(power, dtype=float)
    if np.any(power <= 0):
        raise ValueError("total power must be > 0")
    return (np.asarray(common).sum(axis=-1) + np.asarray(rate_p).sum(axis=-1)) / power


def echo_snr(u, F_hat, v_r, noise: float):
    u = np.asarray(u)
    uu = np.sum(np.abs(u)**2, axis=-1)
    if np.any(uu == 0):
        raise ValueError("receive beamformer must be nonzero")
    s = np.einsum("...m,...mn,...n->...", u.conj(), F_hat, v_r)
    return np.abs(s)**2 / (noise * uu)


def echo_snr_rank1(u, a, v_r, noise: float):
    """``echo_snr`` for ``F_hat = a a^H`` without forming the matrix."""
    uu = _sq(u).sum(axis=-1)
    if np.any(uu == 0):
        raise ValueError("receive beamformer must be nonzero")
    s = (u.conj() * a).sum(axis=-1) * (a.conj() * v_r).sum(axis=-1)
    return _sq(s) / (noise * uu)


def constraint_flags(common, rate_c, rate_p, power, echo, pm: PowerModel, qos: QosThresholds):
    """Feasibility of the common-rate, QoS, power and echo constraints.

    Closed inequalities: equality counts as satisfied.
    """
    omega_com = np.asarray(common).sum(axis=-1) <= np.asarray(rate_c).min(axis=-1)
    omega_qos = np.all(np.asarray(common) + rate_p >= np.asarray(qos.rate_threshold), axis=-1)
    # comparing against P_max + P_ST (rather than subtracting) keeps P = cap exact
    cap = pm.max_power if pm.budget_includes_static else pm.max_power + pm.static_power
    omega_pow = np.asarray(power) <= cap
    omega_echo = np.asarray(echo) >= qos.snr_threshold
    return omega_com, omega_qos, omega_pow, omega_echo


def reward(ee, flags):
    gate = np.ones_like(np.asarray(ee, dtype=float))
    for f in flags:
        gate = gate * np.asarray(f, dtype=float)
    return np.asarray(ee) * gate


def evaluate(F, a_echo, dec: Decision, pm: PowerModel, qos: QosThresholds,
             noise_user: float, noise_radar: float, exclude_own: bool = False,
             gains=None) -> LinkMetrics:
    """All metrics for a decision, given the cascaded user channels ``F`` and echo vector.

    ``gains`` may carry a precomputed :func:`link_gains` result for ``dec``.
    """
    gains = gains if gains is not None else link_gains(F, dec)
    sinr_c = _sinr_common(gains, noise_user, pm.chi, exclude_own)
    sinr_p = _sinr_private(gains, noise_user, pm.chi)
    rate_c, rate_p = rates(sinr_c, sinr_p)
    power = transmit_power(dec, pm)
    ee = energy_efficiency(dec.c, rate_p, power)
    echo = echo_snr_rank1(dec.u, a_echo, dec.v_r, noise_radar)
    flags = constraint_flags(dec.c, rate_c, rate_p, power, echo, pm, qos)
    return LinkMetrics(sinr_c=sinr_c, sinr_p=sinr_p, rate_c=rate_c, rate_p=rate_p,
                       common=np.asarray(dec.c), sum_rate=dec.c.sum(axis=-1) + rate_p.sum(axis=-1),
                       power=power, ee=ee, echo_snr=echo, flags=flags, reward=reward(ee, flags))
