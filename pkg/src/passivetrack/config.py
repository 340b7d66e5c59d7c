"""JSON scenario and pipeline configuration files.

Both document kinds carry ``"format"`` and ``"version"`` keys; field names
inside each section mirror the dataclass attributes they populate, and
omitted fields take the dataclass defaults.

Scenario document (``format: passivetrack-scenario``)::

    {"format": "passivetrack-scenario", "version": 1,
     "scenario": {"d_true": 2.7, "adoa": {"phi_rx": ..., "phi_tx1": ..., "half_plane": -1},
                  "carriers": [...], "baseband_bandwidth": ..., "sample_period": ...,
                  "dwell": ..., "beam_grid": [...], "beamwidth": ..., "clutter": [{...}], ...},
     "track": {"start": [x, y], "velocity": [vx, vy], "K": 15}}

The ``track`` section is optional; a truth CSV can be supplied instead.

Pipeline config (``format: passivetrack-config``) has the sections
``detector``, ``estimator``, ``predictor`` and ``system``; the last holds
the receiver facts the estimator needs (carriers, beam grid, beamwidth,
dwell) when it runs from a features CSV alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .blockage import PredictorConfig
from .dsp import DetectorConfig
from .estimator import EstimatorConfig, default_weights
from .formats import FormatError, dump_json, load_json, to_jsonable
from .geometry import AdoaPair, wavelength
from .waveform import ClutterPath, Scenario, TruthTrack

SCENARIO_FORMAT = "passivetrack-scenario"
CONFIG_FORMAT = "passivetrack-config"
CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


def _build(cls, data: dict, **overrides):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    data.update(overrides)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def _check_header(doc: dict, kind: str) -> None:
    if doc.get("format") != kind:
        raise ConfigError(f"expected a '{kind}' document, got {doc.get('format')!r}")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"unsupported {kind} version {doc.get('version')!r}")


# ------------------------------------------------------------------ scenario


def scenario_to_dict(sc: Scenario) -> dict:
    out = dataclasses.asdict(sc)
    out["adoa"] = {"phi_rx": sc.adoa.phi_rx, "phi_tx1": sc.adoa.phi_tx1,
                   "half_plane": sc.adoa.half_plane}
    return to_jsonable(out)


def scenario_from_dict(data: dict) -> Scenario:
    data = dict(data)
    try:
        data["adoa"] = AdoaPair(**data["adoa"])
        data["clutter"] = [_build(ClutterPath, c) for c in data.get("clutter", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc
    return _build(Scenario, data)


@dataclass
class TrackSpec:
    """Straight constant-velocity truth track sampled at sweep starts."""

    start: tuple[float, float]
    velocity: tuple[float, float]
    K: int

    def __post_init__(self):
        self.start = tuple(float(v) for v in self.start)
        self.velocity = tuple(float(v) for v in self.velocity)
        if len(self.start) != 2 or len(self.velocity) != 2:
            raise ValueError("start and velocity need two components")
        if self.K < 0:
            raise ValueError("K must be >= 0")

    def track(self, sweep_period: float) -> TruthTrack:
        return TruthTrack.straight(self.start, self.velocity, self.K, sweep_period)


def scenario_document(sc: Scenario, track: TrackSpec | None = None) -> dict:
    doc = {"format": SCENARIO_FORMAT, "version": CONFIG_VERSION, "scenario": scenario_to_dict(sc)}
    if track is not None:
        doc["track"] = to_jsonable(dataclasses.asdict(track))
    return doc


def save_scenario(path, sc: Scenario, track: TrackSpec | None = None) -> None:
    dump_json(path, scenario_document(sc, track))


def parse_scenario(doc: dict) -> tuple[Scenario, TrackSpec | None]:
    _check_header(doc, SCENARIO_FORMAT)
    sc = scenario_from_dict(doc.get("scenario", {}))
    track = _build(TrackSpec, doc["track"]) if doc.get("track") is not None else None
    return sc, track


def load_scenario(path) -> tuple[Scenario, TrackSpec | None]:
    try:
        return parse_scenario(load_json(path))
    except FormatError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------- pipeline config


@dataclass
class SystemConfig:
    """Receiver facts needed downstream of detection."""

    carriers: tuple[float, float] = (60.98e9, 60.985e9)
    beam_grid: tuple[float, ...] = (40.0, 27.0, 18.0, 10.0)
    beamwidth: float = 10.0
    dwell: float = 0.05
    # evaluate each sweep's model at the middle of its detecting dwell
    dwell_offsets: bool = True

    def __post_init__(self):
        self.carriers = tuple(float(c) for c in self.carriers)
        self.beam_grid = tuple(float(b) for b in self.beam_grid)
        if len(self.carriers) != 2:
            raise ValueError("two carriers are required")
        if self.dwell <= 0 or self.beamwidth <= 0:
            raise ValueError("dwell and beamwidth must be positive")

    @property
    def sweep_period(self) -> float:
        return self.dwell * len(self.beam_grid)

    @property
    def wavelengths(self) -> tuple[float, float]:
        return tuple(wavelength(c) for c in self.carriers)

    @classmethod
    def from_scenario(cls, sc: Scenario, dwell_offsets: bool = True) -> "SystemConfig":
        return cls(sc.carriers, sc.beam_grid, sc.beamwidth, sc.dwell, dwell_offsets)


@dataclass
class PipelineConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    estimator: EstimatorConfig | None = None
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    system: SystemConfig = field(default_factory=SystemConfig)

    def __post_init__(self):
        if self.estimator is None:
            self.estimator = self.default_estimator()

    def default_estimator(self, **fields) -> EstimatorConfig:
        resolution = 1.0 / self.system.dwell
        return EstimatorConfig(weights=default_weights(self.system.beamwidth, resolution), **fields)

    def to_document(self) -> dict:
        return to_jsonable({
            "format": CONFIG_FORMAT,
            "version": CONFIG_VERSION,
            "detector": dataclasses.asdict(self.detector),
            "estimator": dataclasses.asdict(self.estimator),
            "predictor": dataclasses.asdict(self.predictor),
            "system": dataclasses.asdict(self.system),
        })

    @classmethod
    def from_document(cls, doc: dict) -> "PipelineConfig":
        _check_header(doc, CONFIG_FORMAT)
        unknown = set(doc) - {"format", "version", "detector", "estimator", "predictor", "system"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls(
            detector=_build(DetectorConfig, doc.get("detector")),
            predictor=_build(PredictorConfig, doc.get("predictor")),
            system=_build(SystemConfig, doc.get("system")),
        )
        est = dict(doc.get("estimator") or {})
        if "weights" not in est:
            est["weights"] = cfg.estimator.weights
        cfg.estimator = _build(EstimatorConfig, est)
        return cfg

    @classmethod
    def for_scenario(cls, sc: Scenario, **sections) -> "PipelineConfig":
        cfg = cls(system=SystemConfig.from_scenario(sc), **{k: v for k, v in sections.items()
                                                              if k != "estimator"})
        if sections.get("estimator") is not None:
            cfg.estimator = sections["estimator"]
        else:
            cfg.estimator = cfg.default_estimator(aoa_half_plane=sc.aoa_half_plane)
        return cfg


def save_config(path, cfg: PipelineConfig) -> None:
    dump_json(path, cfg.to_document())


def load_config(path) -> PipelineConfig:
    try:
        return PipelineConfig.from_document(load_json(path))
    except FormatError as exc:
        raise ConfigError(str(exc)) from exc


def default_scenario_document() -> dict:
    """Packaged desk-scale scenario (1 MHz sampling, 15 sweeps)."""
    import json
    from importlib import resources

    return json.loads(resources.files("passivetrack").joinpath("data/scenario_a.json").read_text())


def adoa_from_string(text: str) -> AdoaPair:
    """Parse ``"phi_rx,phi_tx1,sign"`` (degrees, sign +1/-1)."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--adoa needs 'deg,deg,sign', got {text!r}")
    try:
        sign = int(float(parts[2]))
        return AdoaPair(float(parts[0]), float(parts[1]), sign)
    except ValueError as exc:
        raise ConfigError(f"invalid ADoA {text!r}: {exc}") from exc


def adoa_to_string(adoa: AdoaPair) -> str:
    return f"{adoa.phi_rx!r},{adoa.phi_tx1!r},{adoa.half_plane:+d}"


__all__ = [
    "ConfigError", "TrackSpec", "SystemConfig", "PipelineConfig",
    "scenario_to_dict", "scenario_from_dict", "scenario_document", "save_scenario",
    "parse_scenario", "load_scenario", "save_config", "load_config",
    "default_scenario_document", "adoa_from_string", "adoa_to_string",
]
