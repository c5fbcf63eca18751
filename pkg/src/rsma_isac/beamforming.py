"""Raw agent outputs -> feasible transmit/receive design.

Only powers, common-rate splits and IRS phases are learned. Directions are
closed form: sum-channel MRT for the common stream, zero-forcing for the
private streams, MRT toward the cascaded target channel for the radar
stream and a matched filter at the radar receiver.

Raw action layout (RSMA, length ``2K + N + 3``)::

    [K common-rate logits | K private-power logits | common-power logit |
     radar-power logit | N phase logits | receive-beamformer logit]

The SDMA layout drops the K common-rate logits (length ``K + N + 3``). The
last logit is kept for bookkeeping only; the matched filter is already
optimal and the echo SNR is invariant to its scale.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .metrics import (Decision, PowerModel, _sinr_common, cascade_users, echo_vector,
                      link_gains)

logger = logging.getLogger(__name__)

ZF_MAX_CONDITION = 1e10


class ZFInfeasible(ValueError):
    pass


@dataclass(frozen=True)
class PhaseCodebook:
    B: int = 2

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")

    @property
    def n_levels(self) -> int:
        return 2 ** self.B

    @property
    def step(self) -> float:
        return 2 * np.pi / self.n_levels

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.n_levels) * self.step


@dataclass(frozen=True)
class ActionLayout:
    K: int
    N: int
    sdma: bool = False

    @property
    def n_common(self) -> int:
        return 0 if self.sdma else self.K

    @property
    def size(self) -> int:
        return self.n_common + self.K + self.N + 3

    @property
    def common_rates(self) -> slice:
        return slice(0, self.n_common)

    @property
    def private_powers(self) -> slice:
        return slice(self.n_common, self.n_common + self.K)

    @property
    def common_power(self) -> int:
        return self.n_common + self.K

    @property
    def radar_power(self) -> int:
        return self.n_common + self.K + 1

    @property
    def phases(self) -> slice:
        start = self.n_common + self.K + 2
        return slice(start, start + self.N)

    @property
    def receive(self) -> int:
        return self.size - 1


def _norm(x, axis=-1):
    return np.sqrt((x.real**2 + x.imag**2).sum(axis=axis, keepdims=True))


def _unit(x, axis=-1, what="vector"):
    norm = _norm(x, axis)
    if np.any(norm == 0):
        raise ValueError(f"zero {what}")
    return x / norm


def _safe_unit(x, axis=-1):
    norm = _norm(x, axis)
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)


def zf_private_directions(F) -> np.ndarray:
    """Unit zero-forcing directions as columns of an (M, K) matrix.

    ``F`` is the (K, M) stack of cascaded user channels.
    """
    F = np.asarray(F)
    K, M = F.shape[-2:]
    if K > M:
        raise ZFInfeasible(f"zero-forcing needs K <= M (K={K}, M={M})")
    gram = F @ np.swapaxes(F.conj(), -1, -2)
    eig = np.linalg.eigvalsh(gram)      # cond(F)^2 = eig_max / eig_min
    if np.any(~(eig[..., 0] * ZF_MAX_CONDITION**2 > eig[..., -1])):
        raise ZFInfeasible("cascaded channel stack is rank deficient")
    xi = np.swapaxes(np.linalg.solve(gram, F).conj(), -1, -2)   # Gamma^H (Gamma Gamma^H)^-1
    return xi / _norm(xi, axis=-2)


def mrt_private_directions(F) -> np.ndarray:
    return np.swapaxes(_safe_unit(np.asarray(F).conj()), -1, -2)


def mrt_common_direction(F) -> np.ndarray:
    return _unit(np.asarray(F).conj().sum(axis=-2), what="sum channel")


def mrt_radar_direction(G, phases, h_r) -> np.ndarray:
    return _unit(echo_vector(G, phases, h_r), what="cascaded target channel")


def matched_receive_beamformer(F_hat, v_r) -> np.ndarray:
    return _unit(np.einsum("...mn,...n->...m", F_hat, v_r), what="echo channel")


def decode_amplitude(xi, max_power: float):
    return 0.5 * np.sqrt(max_power) * (np.tanh(xi) + 1.0)


def decode_powers(xi, max_power: float, layout: ActionLayout):
    """Amplitudes ``(|v_c|, |v_k| for each k, |v_r|)`` from the raw action."""
    xi = np.asarray(xi, dtype=float)
    return (decode_amplitude(xi[..., layout.common_power], max_power),
            decode_amplitude(xi[..., layout.private_powers], max_power),
            decode_amplitude(xi[..., layout.radar_power], max_power))


def decode_common_rates(xi_com, rate_c):
    min_rate = np.asarray(rate_c).min(axis=-1, keepdims=True)
    return 0.5 * min_rate * (np.tanh(xi_com) + 1.0)


def decode_phases(xi_irs, codebook: PhaseCodebook) -> np.ndarray:
    """Continuous tanh map onto ``[0, (2^B - 1) step]``, snapped to the nearest level.

    Works in level-index units so the midpoints are exact; ties go to the
    lower level.
    """
    idx = 0.5 * (np.tanh(np.asarray(xi_irs, dtype=float)) + 1.0) * (codebook.n_levels - 1)
    snapped = np.clip(np.ceil(idx - 0.5), 0, codebook.n_levels - 1)
    return snapped * codebook.step


@dataclass(frozen=True)
class Assembled:
    decision: Decision
    F: np.ndarray        # cascaded user channels (K, M)
    a_echo: np.ndarray   # cascaded target channel (M,)
    zf_fallback: np.ndarray
    gains: tuple         # metrics.link_gains of the decision


def _directions(F):
    try:
        return zf_private_directions(F), np.zeros(F.shape[:-2], dtype=bool)
    except (ZFInfeasible, np.linalg.LinAlgError):
        pass
    # batched: fall back per instance
    flat = F.reshape((-1,) + F.shape[-2:])
    out = np.empty((flat.shape[0], F.shape[-1], F.shape[-2]), dtype=complex)
    fallback = np.zeros(flat.shape[0], dtype=bool)
    for i, Fi in enumerate(flat):
        try:
            out[i] = zf_private_directions(Fi)
        except (ZFInfeasible, np.linalg.LinAlgError):
            logger.info("zero-forcing infeasible; using MRT private directions")
            out[i] = mrt_private_directions(Fi)
            fallback[i] = True
    return out.reshape(F.shape[:-2] + out.shape[-2:]), fallback.reshape(F.shape[:-2])


def assemble_full(xi, channels: ChannelRealization, pm: PowerModel, codebook: PhaseCodebook,
                  noise_user: float, layout: ActionLayout | None = None,
                  exclude_own: bool = False) -> Assembled:
    """Decode a raw action (optionally batched along leading axes)."""
    xi = np.asarray(xi, dtype=float)
    K = channels.h_users.shape[1]
    N = channels.G.shape[0]
    layout = layout or ActionLayout(K, N)
    if xi.shape[-1] != layout.size:
        raise ValueError(f"raw action has length {xi.shape[-1]}, expected {layout.size}")

    phases = decode_phases(xi[..., layout.phases], codebook)
    amp_c, amp_p, amp_r = decode_powers(xi, pm.max_power, layout)
    F = cascade_users(channels.h_users, phases, channels.G)
    a = echo_vector(channels.G, phases, channels.h_r)

    dirs_p, fallback = _directions(F)
    dir_c = _safe_unit(F.conj().sum(axis=-2))
    dir_r = _safe_unit(a)
    # matched filter F_hat v_r = a (a^H v_r); the radar direction fixes its phase
    u = _safe_unit(a * (a.conj() * dir_r).sum(axis=-1, keepdims=True))
    u = np.where(_norm(u) > 0, u, 1.0 / np.sqrt(u.shape[-1]))

    v_c = np.zeros_like(dir_c) if layout.sdma else amp_c[..., None] * dir_c
    dec = Decision(v_c=v_c, v_p=dirs_p * amp_p[..., None, :], v_r=amp_r[..., None] * dir_r,
                   u=u, c=np.zeros(xi.shape[:-1] + (K,)), phases=phases)
    # C_k needs the common rates of the beamformers decoded above
    gains = link_gains(F, dec)
    if not layout.sdma:
        rate_c = np.log2(1.0 + _sinr_common(gains, noise_user, pm.chi, exclude_own))
        c = decode_common_rates(xi[..., layout.common_rates], rate_c)
        dec = Decision(v_c=dec.v_c, v_p=dec.v_p, v_r=dec.v_r, u=dec.u, c=c, phases=phases)
    return Assembled(decision=dec, F=F, a_echo=a, zf_fallback=fallback, gains=gains)


def assemble(xi, channels: ChannelRealization, pm: PowerModel, codebook: PhaseCodebook,
             noise_user: float, layout: ActionLayout | None = None,
             exclude_own: bool = False) -> Decision:
    return assemble_full(xi, channels, pm, codebook, noise_user, layout, exclude_own).decision
