"""The MDP around one RSMA (or SDMA) IRS-assisted ISAC scene.

Encoded state: ``[previous raw action, log10(1 + SINR_c), log10(1 + SINR_p),
previous reward]``, i.e. ``4K + N + 4`` entries for RSMA and ``3K + N + 4``
for SDMA.

NLoS draws are frozen for an episode; each step rotates the LoS Doppler
phases by ``dt``. ``reset`` draws fresh NLoS.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .beamforming import ActionLayout, Assembled, PhaseCodebook, assemble_full
from .channel import ChannelModel, ChannelRealization, FadingConfig
from .geometry import Mobility, SceneGeometry
from .metrics import LinkMetrics, PowerModel, QosThresholds, evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Scenario:
    """Everything that defines the physical system and its constraints."""

    geometry: SceneGeometry = SceneGeometry()
    fading: FadingConfig = FadingConfig()
    mobility: Mobility = Mobility()
    power: PowerModel = PowerModel()
    qos: QosThresholds = QosThresholds()
    codebook: PhaseCodebook = PhaseCodebook()
    sdma: bool = False
    dt: float = 1e-3
    exclude_own_common: bool = False


class IsacEnv:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        geom = scenario.geometry
        self.layout = ActionLayout(geom.K, geom.N, sdma=scenario.sdma)
        self.model = ChannelModel(geom, scenario.fading, scenario.mobility)
        self.channel: ChannelRealization | None = None
        self.steps = 0
        self._state = None

    @property
    def action_dim(self) -> int:
        return self.layout.size

    @property
    def state_dim(self) -> int:
        return self.action_dim + 2 * self.scenario.geometry.K + 1

    def encode(self, action, metrics: LinkMetrics, reward: float) -> np.ndarray:
        return np.concatenate([np.asarray(action, dtype=float),
                               np.log10(1.0 + metrics.sinr_c), np.log10(1.0 + metrics.sinr_p),
                               [float(reward)]])

    def reset(self, seed=None) -> np.ndarray:
        self.channel = self.model.realize(0.0, seed)
        self.steps = 0
        zero = np.zeros(self.action_dim)
        _, m = self.evaluate(zero)
        self._state = self.encode(zero, m, 0.0)
        return self._state.copy()

    def evaluate(self, action) -> tuple[Assembled, LinkMetrics]:
        """Decode and score actions on the current channel without advancing it."""
        if self.channel is None:
            raise RuntimeError("call reset() first")
        sc = self.scenario
        asm = assemble_full(action, self.channel, sc.power, sc.codebook, sc.fading.noise_user,
                            self.layout, sc.exclude_own_common)
        m = evaluate(asm.F, asm.a_echo, asm.decision, sc.power, sc.qos, sc.fading.noise_user,
                     sc.fading.noise_radar, sc.exclude_own_common, gains=asm.gains)
        return asm, m

    def step(self, action):
        """Returns ``(next_state, reward, metrics)`` and advances the channel by ``dt``."""
        action = np.asarray(action, dtype=float)
        try:
            _, m = self.evaluate(action)
            r = float(m.reward)
        except (ValueError, np.linalg.LinAlgError) as exc:
            logger.warning("action decoding failed (%s); scoring the zero-logit decision", exc)
            _, m = self.evaluate(np.zeros(self.action_dim))
            m = replace(m, reward=np.float64(0.0))
            r = 0.0
        self._state = self.encode(action, m, r)
        self.channel = self.model.advance(self.channel, self.scenario.dt)
        self.steps += 1
        return self._state.copy(), r, m


def sdma_mode(env: IsacEnv) -> IsacEnv:
    """Same scene with the common stream switched off."""
    return IsacEnv(replace(env.scenario, sdma=True))
