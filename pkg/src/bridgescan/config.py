"""Experiment configuration: schema, validation, JSON round trip and presets."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

SCENARIOS = ("fixed-force", "moving-mass", "vbi")
ESTIMATORS = ("nls", "sd", "eps")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass
class BeamConfig:
    length: float = 10.0
    mass_per_length: float = 6.1
    flexural_rigidity: float = 152.67e3
    n_modes: int = 4
    zeta: float = 0.02
    damped_modes: int = 4
    n_elements: int = 30  # finite elements, VBI only


@dataclass
class SensorConfig:
    velocity: float = 1.0
    dt: float = 1e-3
    noise: float = 0.0  # additive white noise, fraction of record RMS
    carrier_mass: float = 0.0  # weight of the sensor carrier in moving-mass runs


@dataclass
class ForceConfig:
    location: float = 2.0
    sd: float = 1.0  # white-noise force SD, N (one-sided PSD 2 sd^2 dt)


@dataclass
class TrafficConfig:
    # random stream
    n_vehicles: int = 25
    rate: float = 1.0
    mean_mass: float = 1.0
    mean_velocity: float = 2.0
    mass_spread: float = 0.2
    velocity_spread: float = 0.025
    # scripted stream; used instead of the random one when masses are given
    masses: list[float] | None = None
    velocities: list[float] | None = None
    lags: list[float] | None = None
    sensor_vehicle: int = 0  # scripted: index of the vehicle carrying the sensor


@dataclass
class VbiConfig:
    stiffness: float = 170e3
    damping_ratio: float = 0.2
    gd0: float = 0.25e-6
    step: float | None = None  # integration step; None picks one from the sensor rate


@dataclass
class IdentifyConfig:
    estimator: str | None = None  # default: nls for one run, sd for ensembles
    n_basis: int = 8
    band: list[float] | None = None  # EFDD peak search band, rad/s
    model_hints: bool = False  # steer EFDD with the reference frequencies of the beam
    grid_points: int = 101
    refine_modal: bool = True
    eps_decimate: int | None = None
    # ``report --check`` thresholds; None picks the estimator default
    check_frequency: float | None = 0.02  # relative frequency error; None skips the check
    check_shape: list[float] | None = None  # per-mode minimum MAC (nls) or r (sd, eps)
    check_unexcited: list[int] | None = None  # modes (1-based) that must be flagged unexcited


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    scenario: str = "fixed-force"
    seed: int = 0
    runs: int = 1
    beam: BeamConfig = field(default_factory=BeamConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    force: ForceConfig = field(default_factory=ForceConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    vbi: VbiConfig = field(default_factory=VbiConfig)
    identify: IdentifyConfig = field(default_factory=IdentifyConfig)

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        cfg = _build(cls, data, "")
        cfg.validate()
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", f"not valid JSON ({exc})") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    def digest(self) -> str:
        """sha256 of the canonical JSON; independent of field order."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        new = dataclasses.replace(copy.deepcopy(self), **changes)
        new.validate()
        return new

    # -- validation --------------------------------------------------------

    @property
    def resolved_estimator(self) -> str:
        if self.identify.estimator is not None:
            return self.identify.estimator
        return "nls" if self.runs == 1 and self.scenario != "vbi" else "sd"

    @property
    def scripted(self) -> bool:
        return self.traffic.masses is not None

    def validate(self) -> None:
        _check(self.scenario in SCENARIOS, "scenario", f"must be one of {SCENARIOS}")
        _check(isinstance(self.seed, int) and self.seed >= 0, "seed", "must be a non-negative integer")
        _check(isinstance(self.runs, int) and self.runs >= 1, "runs", "must be an integer >= 1")
        b = self.beam
        for name in ("length", "mass_per_length", "flexural_rigidity"):
            _check(getattr(b, name) > 0, f"beam.{name}", "must be positive")
        _check(b.n_modes >= 1, "beam.n_modes", "must be >= 1")
        _check(0 <= b.zeta < 1, "beam.zeta", "must lie in [0, 1)")
        _check(b.damped_modes >= b.n_modes, "beam.damped_modes", "must be >= beam.n_modes")
        _check(b.n_elements >= 2, "beam.n_elements", "must be >= 2")
        s = self.sensor
        _check(s.velocity > 0, "sensor.velocity", "must be positive")
        _check(s.dt > 0, "sensor.dt", "must be positive")
        _check(s.noise >= 0, "sensor.noise", "must be non-negative")
        _check(s.carrier_mass >= 0, "sensor.carrier_mass", "must be non-negative")
        if self.scenario == "fixed-force":
            _check(0 < self.force.location < b.length, "force.location", "must lie inside the span")
            _check(self.force.sd >= 0, "force.sd", "must be non-negative")
        else:
            self._validate_traffic()
        if self.scenario == "vbi":
            v = self.vbi
            _check(v.stiffness > 0, "vbi.stiffness", "must be positive")
            _check(0 <= v.damping_ratio < 1, "vbi.damping_ratio", "must lie in [0, 1)")
            _check(v.gd0 >= 0, "vbi.gd0", "must be non-negative")
            _check(v.step is None or 0 < v.step <= s.dt, "vbi.step", "must be positive and <= sensor.dt")
            _check(not self.scripted, "traffic.masses", "scripted streams are not supported for vbi")
        i = self.identify
        _check(i.estimator is None or i.estimator in ESTIMATORS, "identify.estimator",
               f"must be one of {ESTIMATORS}")
        _check(i.n_basis >= 1, "identify.n_basis", "must be >= 1")
        _check(i.grid_points >= 2, "identify.grid_points", "must be >= 2")
        _check(i.band is None or (len(i.band) == 2 and 0 <= i.band[0] < i.band[1]), "identify.band",
               "must be [lo, hi] with 0 <= lo < hi")
        _check(i.eps_decimate is None or (isinstance(i.eps_decimate, int) and i.eps_decimate >= 1),
               "identify.eps_decimate", "must be an integer >= 1")
        _check(i.check_frequency is None or i.check_frequency > 0, "identify.check_frequency", "must be positive")
        _check(i.check_shape is None or len(i.check_shape) == b.n_modes, "identify.check_shape",
               "needs one threshold per mode")
        _check(i.check_unexcited is None or all(float(k).is_integer() and 1 <= k <= b.n_modes
                                                for k in i.check_unexcited),
               "identify.check_unexcited", "must list mode numbers between 1 and beam.n_modes")

    def _validate_traffic(self) -> None:
        t = self.traffic
        if self.scripted:
            n = len(t.masses)
            _check(n >= 1, "traffic.masses", "must not be empty")
            _check(t.velocities is not None and len(t.velocities) == n, "traffic.velocities",
                   "must match traffic.masses in length")
            _check(t.lags is not None and len(t.lags) == n, "traffic.lags", "must match traffic.masses in length")
            _check(all(m > 0 for m in t.masses), "traffic.masses", "must be positive")
            _check(all(v > 0 for v in t.velocities), "traffic.velocities", "must be positive")
            _check(all(a >= 0 for a in t.lags), "traffic.lags", "must be non-negative")
            _check(0 <= t.sensor_vehicle < n, "traffic.sensor_vehicle", "must index a scripted vehicle")
            return
        _check(t.n_vehicles >= 1, "traffic.n_vehicles", "must be >= 1")
        _check(t.rate > 0, "traffic.rate", "must be positive")
        _check(t.mean_mass > 0, "traffic.mean_mass", "must be positive")
        _check(t.mean_velocity > 0, "traffic.mean_velocity", "must be positive")
        _check(0 <= t.mass_spread < 1, "traffic.mass_spread", "must lie in [0, 1)")
        _check(0 <= t.velocity_spread < 1, "traffic.velocity_spread", "must lie in [0, 1)")


def _check(ok: bool, field_path: str, message: str) -> None:
    if not ok:
        raise ConfigError(field_path, message)


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<document>", "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(prefix + unknown[0], "unknown field")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        path = prefix + name
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, path + ".")
        else:
            kwargs[name] = _coerce(value, default, path, integer_list="list[int]" in str(f.type))
    return cls(**kwargs)


def _coerce(value, default, path, integer_list: bool = False):
    if value is None:
        return None
    if isinstance(default, bool):
        _check(isinstance(value, bool), path, "expected true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        _check(isinstance(value, int) and not isinstance(value, bool), path, "expected an integer")
        return value
    if isinstance(default, float):
        _check(isinstance(value, (int, float)) and not isinstance(value, bool), path, "expected a number")
        return float(value)
    if isinstance(default, str):
        _check(isinstance(value, str), path, "expected a string")
        return value
    if isinstance(value, list):
        _check(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value), path,
               "expected a list of numbers")
        if integer_list:
            _check(all(float(v).is_integer() for v in value), path, "expected a list of integers")
            return [int(v) for v in value]
        return [float(v) for v in value]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return value
    if isinstance(value, str):
        return value
    raise ConfigError(path, f"unsupported value {value!r}")


# -- presets -----------------------------------------------------------------

def _bridge_30m() -> BeamConfig:
    return BeamConfig(length=30.0, mass_per_length=1000.0, flexural_rigidity=27.5e9 * 0.175, n_modes=4,
                      zeta=0.01, damped_modes=6, n_elements=30)


def _presets() -> dict[str, ExperimentConfig]:
    band = [5.0, 400.0]
    gwn = dict(scenario="fixed-force", runs=1, sensor=SensorConfig(1.0, 1e-3, 0.05),
               identify=IdentifyConfig(estimator="nls", band=band))
    return {
        "gwn-l5": ExperimentConfig(name="gwn-l5", force=ForceConfig(location=2.0), **copy.deepcopy(gwn)),
        "gwn-mid": ExperimentConfig(
            name="gwn-mid", scenario="fixed-force", runs=1, sensor=SensorConfig(1.0, 1e-3, 0.05),
            force=ForceConfig(location=5.0),
            identify=IdentifyConfig(estimator="nls", band=band, model_hints=True, check_frequency=None,
                                    check_shape=[0.90, 0.0, 0.95, 0.0], check_unexcited=[2, 4])),
        "five-mass": ExperimentConfig(
            name="five-mass", scenario="moving-mass", runs=1, sensor=SensorConfig(0.5, 1e-3, 0.0),
            traffic=TrafficConfig(masses=[1.0] * 5, velocities=[1.0, 0.5, 2.0, 1.5, 4.0], lags=[1.0] * 5,
                                  sensor_vehicle=1),
            identify=IdentifyConfig(estimator="nls", band=band)),
        "stat-mass": ExperimentConfig(
            name="stat-mass", scenario="moving-mass", runs=50, sensor=SensorConfig(0.5, 2e-3, 0.0, 1.0),
            traffic=TrafficConfig(n_vehicles=25, rate=1.0, mean_mass=1.0, mean_velocity=2.0),
            identify=IdentifyConfig(estimator="sd", band=band)),
        "tr1": ExperimentConfig(
            name="tr1", scenario="vbi", runs=50, beam=_bridge_30m(), sensor=SensorConfig(4.0, 2e-3, 0.0),
            traffic=TrafficConfig(n_vehicles=25, rate=2.0, mean_mass=1500.0, mean_velocity=20.0),
            vbi=VbiConfig(gd0=0.25e-6), identify=IdentifyConfig(estimator="sd", band=[6.0, 500.0])),
        "tr2": ExperimentConfig(
            name="tr2", scenario="vbi", runs=50, beam=_bridge_30m(), sensor=SensorConfig(20.0, 2e-3, 0.0),
            traffic=TrafficConfig(n_vehicles=20, rate=2.0, mean_mass=500.0, mean_velocity=30.0),
            vbi=VbiConfig(gd0=1e-6),
            identify=IdentifyConfig(estimator="sd", band=[6.0, 500.0], check_frequency=None,
                                    check_shape=[0.85] * 4)),
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> ExperimentConfig:
    """A fresh copy of a named reference experiment."""
    presets = _presets()
    if name not in presets:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return presets[name]
