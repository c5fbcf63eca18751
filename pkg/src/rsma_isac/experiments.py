"""Experiment configuration, seeded runs, sweeps and summary tables.

A configuration is a YAML file with the sections below. Every key is
optional; omitted keys keep the defaults of the scene used throughout the
package. Values may carry a unit after the number (``"2.4 GHz"``,
``"20 dBm"``, ``"0.5 lambda"``, ``"30 deg"``, ``"0 dB"``, ``"1 ms"``); bare
numbers are read in the base unit of the key (Hz, W, m, m/s, degrees for
angles, linear for ratios, s, m^2).

.. code-block:: yaml

    scene:    {M: 4, K: 2, N: 9, d_B: 0.5 lambda, d_I: 0.2 lambda, d_U: 0.5 m,
               H_B: 20 m, H_I: 25 m, H_R: 25 m, x_I: 1, y_I: 2, x_U: 2, x_R: 1.5, y_R: 1}
    fading:   {f_c: 2.4 GHz, K_BI: 10, K_IU: 10, K_IR: 10, rcs: 20, nlos_weight: verbatim,
               noise_user: -120 dBm, noise_radar: -120 dBm, path_distance: euclidean,
               radar_exponent: 4}
    mobility: {v_k: 1 m/s, gamma_k: 0 deg, v_r: 5 m/s, gamma_r: 0 deg}
    power:    {amplifier_efficiency: 1, chi: 0, static_power: 30 dBm, max_power: 20 dBm,
               budget_includes_static: false}
    qos:      {rate_threshold: 4, snr_threshold: 0 dB}
    phases:   {B: 2}
    model:    {dt: 1 ms, exclude_own_common: false}
    ppo:      {episodes: 500, episode_length: 100, ...}   # any PpoConfig field
    baseline: {greedy_candidates: 32}
    seeds:    [0, 1, 2, 3, 4]
    policies: [ppo]            # ppo | random | greedy
    schemes:  [rsma]           # rsma | sdma
    sweep:    {N: [4, 9, 16, 25]}

Sweep axes: ``M``, ``K``, ``N``, ``B``, ``f_c``, ``rcs``, ``max_power``,
``K_BI``, ``K_IU``, ``K_IR`` and ``rician`` (sets ``K_BI`` and ``K_IU``
together, leaving the target link alone). Points are the Cartesian
product in the order the axes are written.

Output directory layout::

    manifest.txt         resolved configuration (SI units) and sweep points
    runs.csv             one row per (point, scheme, policy, seed) with status
    traces/<label>.csv   per-episode training or baseline trace
    checkpoints/<label>/ actor.dnet, critic.dnet, log_std.csv  (PPO only)
    summary.csv          per (point, scheme, policy) converged statistics
    effects.csv          converged-EE ratios between neighbouring axis values
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml
from scipy import stats

from .baselines import BaselineConfig, run_baseline
from .beamforming import PhaseCodebook
from .channel import FadingConfig, wavelength
from .env import IsacEnv, Scenario
from .geometry import Mobility, SceneGeometry
from .metrics import PowerModel, QosThresholds
from .ppo import PpoConfig, TrainingTrace, converged, make_learner, train

logger = logging.getLogger(__name__)

CONVERGED_FRACTION = 0.1
POLICIES = ("ppo", "random", "greedy")
SCHEMES = ("rsma", "sdma")


class ConfigError(ValueError):
    """Invalid configuration file; carries the offending key and line when known."""


# ---------------------------------------------------------------- units

@dataclass(frozen=True)
class Wavelengths:
    """A length expressed in carrier wavelengths, resolved per sweep point."""

    value: float

    def meters(self, f_c: float) -> float:
        return self.value * wavelength(f_c)


_SCALES = {
    "frequency": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9},
    "power": {"w": 1.0, "mw": 1e-3},
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3},
    "speed": {"m/s": 1.0, "km/h": 1 / 3.6},
    "angle": {"deg": math.pi / 180, "rad": 1.0},
    "ratio": {},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6},
    "area": {"m^2": 1.0, "m2": 1.0},
}
_DEFAULT_UNIT = {"frequency": "hz", "power": "w", "length": "m", "speed": "m/s",
                 "angle": "deg", "ratio": "", "time": "s", "area": "m^2"}
_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")


def parse_quantity(value, kind: str, allow_wavelengths: bool = False):
    """Convert ``value`` (number or ``"<number> <unit>"``) to SI for ``kind``."""
    if isinstance(value, bool):
        raise ValueError(f"expected a {kind}, got a boolean")
    if isinstance(value, (int, float)):
        number, unit = float(value), _DEFAULT_UNIT[kind]
    elif isinstance(value, str):
        m = _NUMBER.match(value)
        if not m:
            raise ValueError(f"cannot read {value!r} as a {kind}")
        number, unit = float(m.group(1)), (m.group(2).lower() or _DEFAULT_UNIT[kind])
    else:
        raise ValueError(f"expected a {kind}, got {type(value).__name__}")

    if kind == "length" and unit in ("lambda", "wavelength", "wavelengths"):
        if not allow_wavelengths:
            raise ValueError("wavelength units are only accepted for array spacings")
        return Wavelengths(number)
    if kind == "power" and unit in ("dbm", "dbw"):
        return 10.0 ** (number / 10.0) * (1e-3 if unit == "dbm" else 1.0)
    if kind == "ratio":
        if unit == "db":
            return 10.0 ** (number / 10.0)
        if unit in ("", "linear"):
            return number
    scale = _SCALES[kind].get(unit)
    if scale is None:
        raise ValueError(f"unknown {kind} unit {unit!r}")
    return number * scale


def _int(value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"expected an integer, got {value!r}")
    return value


def _bool(value):
    if not isinstance(value, bool):
        raise ValueError(f"expected true/false, got {value!r}")
    return value


def _str(value):
    if not isinstance(value, str):
        raise ValueError(f"expected a string, got {value!r}")
    return value


def _quantity(kind, wl=False):
    return lambda v: parse_quantity(v, kind, wl)


def _scalar_or_list(parse):
    def inner(v):
        if isinstance(v, list):
            return tuple(parse(x) for x in v)
        return parse(v)
    return inner


def _float(v):
    return parse_quantity(v, "ratio")


_SECTIONS = {
    "scene": {
        "M": _int, "K": _int, "N": _int,
        "d_B": _quantity("length", True), "d_I": _quantity("length", True),
        "d_U": _quantity("length", True),
        **{k: _quantity("length") for k in ("H_B", "H_I", "H_R", "x_I", "y_I", "x_U", "x_R", "y_R")},
    },
    "fading": {
        "f_c": _quantity("frequency"), "K_BI": _quantity("ratio"), "K_IU": _quantity("ratio"),
        "K_IR": _quantity("ratio"), "rcs": _quantity("area"), "nlos_weight": _str,
        "noise_user": _quantity("power"), "noise_radar": _quantity("power"),
        "path_distance": _str, "radar_exponent": _int,
    },
    "mobility": {
        "v_k": _scalar_or_list(_quantity("speed")), "gamma_k": _scalar_or_list(_quantity("angle")),
        "v_r": _quantity("speed"), "gamma_r": _quantity("angle"),
    },
    "power": {
        "amplifier_efficiency": _float, "chi": _int, "static_power": _quantity("power"),
        "max_power": _quantity("power"), "budget_includes_static": _bool,
    },
    "qos": {"rate_threshold": _scalar_or_list(_float), "snr_threshold": _quantity("ratio")},
    "phases": {"B": _int},
    "model": {"dt": _quantity("time"), "exclude_own_common": _bool},
    "baseline": {"greedy_candidates": _int},
}

_PPO_PARSERS = {
    "discount": _float, "clip": _float, "minibatch": _int, "lr_actor": _float,
    "lr_critic": _float, "epochs": _int, "episode_length": _int, "episodes": _int,
    "log_std_init": _float, "hidden": lambda v: tuple(_int(x) for x in v),
    "rollout": lambda v: None if v is None else _int(v), "normalize_advantages": _bool,
    "reward_scale": _float, "log_std_bounds": lambda v: tuple(_float(x) for x in v),
    "max_grad_norm": lambda v: None if v is None else _float(v),
    "advantage_std_floor": _float, "actor_head_scale": _float,
}

SWEEP_AXES = {
    "M": ("scene", _int), "K": ("scene", _int), "N": ("scene", _int), "B": ("phases", _int),
    "f_c": ("fading", _quantity("frequency")), "rcs": ("fading", _quantity("area")),
    "max_power": ("power", _quantity("power")), "K_BI": ("fading", _quantity("ratio")),
    "K_IU": ("fading", _quantity("ratio")), "K_IR": ("fading", _quantity("ratio")),
    "rician": ("fading", _quantity("ratio")),
}

_DEFAULT_SCENE = {"d_B": Wavelengths(0.5), "d_I": Wavelengths(0.2)}


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ExperimentConfig:
    scene: dict = field(default_factory=dict)
    fading: dict = field(default_factory=dict)
    mobility: dict = field(default_factory=dict)
    power: dict = field(default_factory=dict)
    qos: dict = field(default_factory=dict)
    phases: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    baseline: dict = field(default_factory=dict)
    ppo: PpoConfig = PpoConfig()
    sweep: dict = field(default_factory=dict)        # axis -> tuple of SI values
    seeds: tuple = (0, 1, 2, 3, 4)
    policies: tuple = ("ppo",)
    schemes: tuple = ("rsma",)
    out: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds: the seed list must not be empty")
        for p in self.policies:
            if p not in POLICIES:
                raise ConfigError(f"policies: unknown policy {p!r}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"schemes: unknown scheme {s!r}")
        for axis, values in self.sweep.items():
            if axis not in SWEEP_AXES:
                raise ConfigError(f"sweep: unknown axis {axis!r}")
            if not values:
                raise ConfigError(f"sweep.{axis}: needs at least one value")
        # build every point once so invalid combinations fail at load time
        for point in self.points():
            try:
                self.scenario(point)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid configuration at sweep point {point}: {exc}") from exc

    def points(self) -> list:
        axes = list(self.sweep)
        return [dict(zip(axes, combo)) for combo in itertools.product(*self.sweep.values())]

    def _section(self, name: str, point: dict) -> dict:
        values = dict(getattr(self, name))
        for axis, value in point.items():
            section, _ = SWEEP_AXES[axis]
            if section != name:
                continue
            if axis == "rician":
                values["K_BI"] = values["K_IU"] = value
            else:
                values[axis] = value
        return values

    def scenario(self, point: dict | None = None, sdma: bool = False) -> Scenario:
        point = point or {}
        fading = FadingConfig(**self._section("fading", point))
        scene = {**_DEFAULT_SCENE, **self._section("scene", point)}
        for key, value in scene.items():
            if isinstance(value, Wavelengths):
                scene[key] = value.meters(fading.f_c)
        geometry = SceneGeometry(**scene)

        mob = dict(self.mobility)
        for key, default in (("v_k", 1.0), ("gamma_k", 0.0)):
            value = mob.get(key, default)
            mob[key] = tuple(value) if isinstance(value, tuple) else (value,) * geometry.K
            if len(mob[key]) != geometry.K:
                raise ConfigError(f"mobility.{key}: expected {geometry.K} entries")
        mobility = Mobility(**mob)

        power = PowerModel(**self._section("power", point))
        qos = QosThresholds(**self.qos)
        codebook = PhaseCodebook(**self._section("phases", point))
        return Scenario(geometry=geometry, fading=fading, mobility=mobility, power=power,
                        qos=qos, codebook=codebook, sdma=sdma, **self.model)

    def baseline_config(self, kind: str) -> BaselineConfig:
        return BaselineConfig(kind=kind, episodes=self.ppo.episodes,
                              episode_length=self.ppo.episode_length, **self.baseline)

    def manifest(self) -> str:
        """Deterministic text dump of the resolved configuration."""
        lines = ["# resolved experiment configuration (SI units)"]
        base = self.scenario()
        for name in ("geometry", "fading", "mobility", "power", "qos", "codebook"):
            obj = getattr(base, name)
            lines.append(f"{name}:")
            for f in fields(obj):
                lines.append(f"  {f.name}: {getattr(obj, f.name)!r}")
        lines.append(f"dt: {base.dt!r}")
        lines.append(f"exclude_own_common: {base.exclude_own_common!r}")
        lines.append("ppo:")
        for f in fields(self.ppo):
            lines.append(f"  {f.name}: {getattr(self.ppo, f.name)!r}")
        lines.append(f"baseline: {self.baseline!r}")
        lines.append(f"seeds: {list(self.seeds)!r}")
        lines.append(f"policies: {list(self.policies)!r}")
        lines.append(f"schemes: {list(self.schemes)!r}")
        lines.append("sweep:")
        for axis, values in self.sweep.items():
            lines.append(f"  {axis}: {list(values)!r}")
        lines.append("points:")
        for i, point in enumerate(self.points()):
            lines.append(f"  p{i:03d}: {point!r}")
        return "\n".join(lines) + "\n"


def _line_index(text: str) -> dict:
    """Map key paths to 1-based line numbers of the YAML source."""
    index = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                p = path + (str(key.value),)
                index[p] = key.start_mark.line + 1
                walk(value, p)

    walk(yaml.compose(text, Loader=yaml.SafeLoader), ())
    return index


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
        lines = _line_index(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "unknown line"
        raise ConfigError(f"{source}: parse error at {where}: {exc}") from exc
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")

    def fail(path, msg):
        line = lines.get(path)
        at = f" (line {line})" if line else ""
        raise ConfigError(f"{source}: {'.'.join(path)}{at}: {msg}")

    kwargs = {}
    for top, body in raw.items():
        if top in _SECTIONS or top in ("ppo", "sweep"):
            if body is None:
                body = {}
            if not isinstance(body, dict):
                fail((top,), "expected a mapping")
        if top in _SECTIONS:
            parsers, parsed = _SECTIONS[top], {}
            for key, value in body.items():
                if key not in parsers:
                    fail((top, str(key)), "unknown key")
                try:
                    parsed[key] = parsers[key](value)
                except (ValueError, TypeError) as exc:
                    fail((top, key), str(exc))
            kwargs[top] = parsed
        elif top == "ppo":
            parsed = {}
            for key, value in body.items():
                if key not in _PPO_PARSERS:
                    fail((top, str(key)), "unknown key")
                try:
                    parsed[key] = _PPO_PARSERS[key](value)
                except (ValueError, TypeError) as exc:
                    fail((top, key), str(exc))
            try:
                kwargs["ppo"] = PpoConfig(**parsed)
            except ValueError as exc:
                fail((top,), str(exc))
        elif top == "sweep":
            parsed = {}
            for axis, values in body.items():
                if axis not in SWEEP_AXES:
                    fail((top, str(axis)), "unknown sweep axis")
                if not isinstance(values, list):
                    values = [values]
                try:
                    parsed[axis] = tuple(SWEEP_AXES[axis][1](v) for v in values)
                except (ValueError, TypeError) as exc:
                    fail((top, axis), str(exc))
            kwargs["sweep"] = parsed
        elif top in ("seeds", "policies", "schemes"):
            values = body if isinstance(body, list) else [body]
            try:
                kwargs[top] = tuple(_int(v) if top == "seeds" else _str(v) for v in values)
            except ValueError as exc:
                fail((top,), str(exc))
        elif top == "out":
            kwargs["out"] = str(body)
        else:
            fail((str(top),), "unknown section")

    # invariants checked with line numbers where they can be traced back
    for path in (("scene", "N"),):
        value = kwargs.get(path[0], {}).get(path[1])
        if value is not None and math.isqrt(value) ** 2 != value:
            fail(path, "N must be a perfect square")
    for n in kwargs.get("sweep", {}).get("N", ()):
        if n < 1 or math.isqrt(n) ** 2 != n:
            fail(("sweep", "N"), f"N must be a perfect square, got {n}")
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


# ---------------------------------------------------------------- runs

@dataclass(frozen=True)
class RunSpec:
    index: int
    point: dict
    scheme: str
    policy: str
    seed: int

    @property
    def label(self) -> str:
        return f"p{self.index:03d}_{self.scheme}_{self.policy}_s{self.seed}"


@dataclass
class RunRecord:
    spec: RunSpec
    status: str
    error: str = ""
    trace: TrainingTrace | None = None


def run_specs(config: ExperimentConfig) -> list:
    specs = []
    for i, point in enumerate(config.points()):
        for scheme in config.schemes:
            for policy in config.policies:
                for seed in config.seeds:
                    specs.append(RunSpec(i, point, scheme, policy, seed))
    return specs


def save_checkpoint(learner, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    learner.actor.save(directory / "actor.dnet")
    learner.critic.save(directory / "critic.dnet")
    with open(directory / "log_std.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows([[repr(float(x))] for x in learner.log_std])


def execute(config: ExperimentConfig, spec: RunSpec, out) -> RunRecord:
    """Run one (point, scheme, policy, seed) and write its trace.

    Errors from the simulation are caught and reported in the record so a
    sweep carries on with its other points.
    """
    out = Path(out)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    try:
        env = IsacEnv(config.scenario(spec.point, sdma=spec.scheme == "sdma"))
        if spec.policy == "ppo":
            learner = make_learner(env, config.ppo, spec.seed)
            trace = train(env, learner, config.ppo, seed=spec.seed)
            save_checkpoint(learner, out / "checkpoints" / spec.label)
            trace.to_csv(out / "traces" / f"{spec.label}.csv")
        else:
            trace = run_baseline(env, config.baseline_config(spec.policy), seed=spec.seed)
            trace.to_csv(out / "traces" / f"{spec.label}.csv", policy=spec.policy)
    except OSError:
        raise
    except Exception as exc:   # recorded per point; the sweep goes on
        logger.error("run %s failed: %s", spec.label, exc)
        return RunRecord(spec, "error", f"{type(exc).__name__}: {exc}")
    return RunRecord(spec, "ok", trace=trace)


def _execute_star(args):
    config, spec, out = args
    rec = execute(config, spec, out)
    rec.trace = None          # the trace is on disk; keep the IPC payload small
    return rec


def run(config: ExperimentConfig, out=None, jobs: int = 1) -> list:
    """Run every sweep point, scheme, policy and seed, then summarize.

    Returns the list of :class:`RunRecord`. ``jobs > 1`` fans the runs out
    over worker processes; every run owns its seeds, so the files written
    are the same as with ``jobs = 1``.
    """
    out = Path(out or config.out or "runs")
    (out / "traces").mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(config.manifest())
    specs = run_specs(config)
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_execute_star, [(config, s, out) for s in specs]))
    else:
        records = [execute(config, s, out) for s in specs]
    write_runs(records, list(config.sweep), out / "runs.csv")
    summarize(out)
    return records


def write_runs(records, axes, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*axes, "scheme", "policy", "seed", "trace", "status", "error"])
        for rec in records:
            s = rec.spec
            trace = f"traces/{s.label}.csv" if rec.status == "ok" else ""
            w.writerow([*(repr(s.point[a]) for a in axes), s.scheme, s.policy, s.seed, trace,
                        rec.status, rec.error])


# ---------------------------------------------------------------- summaries

SUMMARY_STATS = ("ee", "raw_ee", "sum_rate", "echo_snr_db", "violation")


@dataclass
class SummaryRow:
    point: dict
    scheme: str
    policy: str
    n_seeds: int
    n_failed: int
    mean: dict         # stat -> mean over seeds of the converged value
    std: dict          # stat -> sample std over seeds (0 with one seed)
    half_width: dict   # stat -> 95% t interval half-width
    errors: str = ""


def converged_stats(trace: TrainingTrace, fraction: float = CONVERGED_FRACTION) -> dict:
    """Converged values of one trace.

    ``ee`` is the constraint-gated energy efficiency (the reward), which is
    what the optimisation targets; ``raw_ee`` ignores the constraints.
    """
    return {
        "ee": converged(trace.mean_reward, fraction),
        "raw_ee": converged(trace.mean_ee, fraction),
        "sum_rate": converged(trace.mean_sum_rate, fraction),
        "echo_snr_db": converged(trace.mean_echo_snr_db, fraction),
        "violation": converged(trace.violation_fraction, fraction),
    }


def _spread(values):
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        return math.nan, math.nan, math.nan
    mean = float(values.mean())
    if n == 1:
        return mean, 0.0, 0.0
    std = float(values.std(ddof=1))
    return mean, std, float(stats.t.ppf(0.975, n - 1) * std / math.sqrt(n))


def _read_runs(out: Path):
    with open(out / "runs.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        fixed = {"scheme", "policy", "seed", "trace", "status", "error"}
        axes = [c for c in reader.fieldnames if c not in fixed]
        rows = list(reader)
    for row in rows:
        row["point"] = {a: _number(row[a]) for a in axes}
    return axes, rows


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def summarize(out) -> tuple:
    """Build ``summary.csv`` and ``effects.csv`` from a run directory.

    Returns ``(summary_rows, effect_rows)``. Effects compare the converged
    EE of neighbouring values along every sweep axis with everything else
    held fixed: ``ratio = EE(to) / EE(from)``, with a delta-method 95%
    half-width over seeds.
    """
    out = Path(out)
    axes, rows = _read_runs(out)
    groups: dict = {}
    for row in rows:
        key = (tuple(row["point"][a] for a in axes), row["scheme"], row["policy"])
        groups.setdefault(key, []).append(row)

    summary = []
    for (pt, scheme, policy), members in groups.items():
        per_seed, errors = [], []
        for row in members:
            if row["status"] != "ok":
                errors.append(f"seed {row['seed']}: {row['error']}")
                continue
            per_seed.append(converged_stats(TrainingTrace.from_csv(out / row["trace"])))
        mean, std, hw = {}, {}, {}
        for stat in SUMMARY_STATS:
            mean[stat], std[stat], hw[stat] = _spread([s[stat] for s in per_seed])
        summary.append(SummaryRow(dict(zip(axes, pt)), scheme, policy, len(per_seed),
                                  len(errors), mean, std, hw, "; ".join(errors)))

    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*axes, "scheme", "policy", "n_seeds", "n_failed",
                    *(f"{s}_{k}" for s in SUMMARY_STATS for k in ("mean", "std", "ci95")), "errors"])
        for r in summary:
            w.writerow([*(repr(r.point[a]) for a in axes), r.scheme, r.policy, r.n_seeds, r.n_failed,
                        *(repr(d[s]) for s in SUMMARY_STATS for d in (r.mean, r.std, r.half_width)),
                        r.errors])

    effects = effect_ratios(summary, axes)
    with open(out / "effects.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "from", "to", "context", "scheme", "policy", "ee_from", "ee_to",
                    "ratio", "ci95", "status"])
        for e in effects:
            w.writerow([e["axis"], repr(e["from"]), repr(e["to"]), e["context"], e["scheme"],
                        e["policy"], repr(e["ee_from"]), repr(e["ee_to"]), repr(e["ratio"]),
                        repr(e["ci95"]), e["status"]])
    return summary, effects


def ratio_with_interval(a_mean, a_std, a_n, b_mean, b_std, b_n):
    """``b / a`` and its 95% half-width by the delta method."""
    if not a_mean or math.isnan(a_mean) or math.isnan(b_mean):
        return math.nan, math.nan
    ratio = b_mean / a_mean
    if a_n < 2 or b_n < 2:
        return ratio, 0.0
    rel = (a_std / a_mean) ** 2 / a_n
    rel += (b_std / b_mean) ** 2 / b_n if b_mean else 0.0
    dof = min(a_n, b_n) - 1
    return ratio, float(stats.t.ppf(0.975, dof) * abs(ratio) * math.sqrt(rel))


def effect_ratios(summary: list, axes: list) -> list:
    index = {(tuple(r.point[a] for a in axes), r.scheme, r.policy): r for r in summary}
    effects = []
    for k, axis in enumerate(axes):
        values = []
        for r in summary:
            if r.point[axis] not in values:
                values.append(r.point[axis])
        others = [a for a in axes if a != axis]
        contexts = []
        for r in summary:
            ctx = (tuple(r.point[a] for a in others), r.scheme, r.policy)
            if ctx not in contexts:
                contexts.append(ctx)
        for ctx_vals, scheme, policy in contexts:
            def key(v):
                pt = list(ctx_vals)
                pt.insert(k, v)
                return tuple(pt), scheme, policy
            for lo, hi in zip(values[:-1], values[1:]):
                a, b = index.get(key(lo)), index.get(key(hi))
                entry = {"axis": axis, "from": lo, "to": hi, "scheme": scheme, "policy": policy,
                         "context": ";".join(f"{o}={v!r}" for o, v in zip(others, ctx_vals))}
                if a is None or b is None or not a.n_seeds or not b.n_seeds:
                    entry.update(ee_from=math.nan, ee_to=math.nan, ratio=math.nan,
                                 ci95=math.nan, status="missing")
                else:
                    ratio, hw = ratio_with_interval(a.mean["ee"], a.std["ee"], a.n_seeds,
                                                    b.mean["ee"], b.std["ee"], b.n_seeds)
                    entry.update(ee_from=a.mean["ee"], ee_to=b.mean["ee"], ratio=ratio, ci95=hw,
                                 status="ok" if not math.isnan(ratio) else "undefined")
                effects.append(entry)
    return effects


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **changes)
