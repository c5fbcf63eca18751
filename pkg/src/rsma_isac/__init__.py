"""Energy-efficient RSMA beamforming for an IRS-assisted ISAC downlink, trained with PPO."""

from .baselines import BaselineConfig, greedy_step, random_step, run_baseline
from .beamforming import ActionLayout, PhaseCodebook, assemble, assemble_full
from .channel import ChannelModel, ChannelRealization, FadingConfig, wavelength
from .env import IsacEnv, Scenario, sdma_mode
from .geometry import Mobility, SceneGeometry, positions, squared_distances
from .metrics import Decision, LinkMetrics, PowerModel, QosThresholds, evaluate
from .ppo import Learner, PpoConfig, TrainingTrace, make_learner, train

__version__ = "0.1.0"

__all__ = [
    "ActionLayout", "BaselineConfig", "ChannelModel", "ChannelRealization", "Decision",
    "FadingConfig", "IsacEnv", "Learner", "LinkMetrics", "Mobility", "PhaseCodebook",
    "PowerModel", "PpoConfig", "QosThresholds", "Scenario", "SceneGeometry", "TrainingTrace",
    "assemble", "assemble_full", "evaluate", "greedy_step", "make_learner", "positions",
    "random_step", "run_baseline", "sdma_mode", "squared_distances", "train", "wavelength",
]
