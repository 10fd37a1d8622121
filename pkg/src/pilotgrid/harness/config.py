"""Experiment configuration files (YAML key-value text)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from ..channel import ChannelSpec, regularized_scale
from ..errors import ConfigurationError
from ..estimator import Method
from ..grid import (OfdmGridSpec, PatternKind, RegularizedScale, eq2_validate,
                    make_grid_pattern, pattern_spacing_cells, rasterize)
from ..modem import get_constellation

SNR_RANGE = (-10.0, 60.0)
REQUIRED = ("frame", "channel", "patterns", "methods", "modulation",
            "pilot_density", "snr_db", "seeds")


@dataclass(frozen=True)
class ExperimentConfig:
    frame: OfdmGridSpec
    channel: ChannelSpec
    patterns: tuple[PatternKind, ...]
    methods: tuple[Method, ...]
    modulation: str
    pilot_density: float
    snr_db: tuple[float, ...]
    seeds: int = 50
    base_seed: int = 1
    pilot_seed: int = 7
    regularize: bool = True
    output: str = "results"
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.seeds < 1:
            raise ConfigurationError("seeds must be >= 1")
        if not 0 < self.pilot_density <= 0.5:
            raise ConfigurationError("pilot_density must be in (0, 0.5]")
        for s in self.snr_db:
            if math.isinf(s) and s > 0:
                continue
            if not SNR_RANGE[0] <= s <= SNR_RANGE[1]:
                raise ConfigurationError(
                    f"snr {s} dB outside {SNR_RANGE[0]}..{SNR_RANGE[1]} dB")
        if not self.patterns or not self.methods:
            raise ConfigurationError("need at least one pattern and method")
        get_constellation(self.modulation)

    @property
    def seed_list(self) -> list[int]:
        return list(range(self.base_seed, self.base_seed + self.seeds))

    @property
    def scale(self) -> RegularizedScale:
        if not self.regularize:
            return RegularizedScale()
        return regularized_scale(self.channel, self.frame)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _channel_from(raw: dict, frame: OfdmGridSpec) -> ChannelSpec:
    raw = dict(raw)
    model = str(raw.pop("model", "rayleigh")).lower()
    common = {k: raw[k] for k in ("f_max_normalized", "doppler_shape",
                                  "n_oscillators") if k in raw}
    if model == "awgn":
        return ChannelSpec(awgn_only=True, **common)
    if model != "rayleigh":
        raise ConfigurationError(f"channel.model must be rayleigh or awgn, "
                                 f"not {model!r}")
    if "taps" in raw:
        taps = tuple((float(d), float(p)) for d, p in raw["taps"])
        return ChannelSpec(taps=taps, **common)
    if "response_variance" in raw:
        return ChannelSpec.for_response_variance(
            float(raw["response_variance"]), int(raw.get("n_taps", 16)),
            frame, **common)
    if "decay" in raw:
        return ChannelSpec.exponential(float(raw["decay"]),
                                       int(raw.get("n_taps", 16)), **common)
    raise ConfigurationError(
        "channel needs one of: taps, response_variance, decay")


def sampling_warnings(cfg: ExperimentConfig) -> list[str]:
    """Pilot-spacing constraint violations for each configured pattern."""
    out = []
    for kind in cfg.patterns:
        pat = rasterize(make_grid_pattern(kind, cfg.pilot_density, cfg.scale),
                        cfg.frame)
        d_t, d_f = pattern_spacing_cells(pat)
        report = eq2_validate(cfg.channel, cfg.frame, d_t, d_f)
        out += [f"{kind.value}: {msg}" for msg in report.warnings()]
    return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping of fields")
    missing = [k for k in REQUIRED if k not in raw]
    if missing:
        raise ConfigurationError(f"missing config field(s): {', '.join(missing)}")
    try:
        frame = OfdmGridSpec(**raw["frame"])
        channel = _channel_from(raw["channel"], frame)
        cfg = ExperimentConfig(
            frame=frame,
            channel=channel,
            patterns=tuple(PatternKind.parse(p) for p in raw["patterns"]),
            methods=tuple(Method.parse(m) for m in raw["methods"]),
            modulation=str(raw["modulation"]),
            pilot_density=float(raw["pilot_density"]),
            snr_db=tuple(float(s) for s in raw["snr_db"]),
            seeds=int(raw["seeds"]),
            base_seed=int(raw.get("base_seed", 1)),
            pilot_seed=int(raw.get("pilot_seed", 7)),
            regularize=bool(raw.get("regularize", True)),
            output=str(raw.get("output", "results")),
        )
    except ConfigurationError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from exc
    return replace(cfg, warnings=tuple(sampling_warnings(cfg)))


def load_config(path) -> ExperimentConfig:
    """Parse and validate a YAML experiment file.

    Violated pilot-spacing constraints are attached as ``warnings``; they
    do not make the config invalid.
    """
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc
    return config_from_dict(raw)


def default_config_text() -> str:
    return resources.files("pilotgrid.configs").joinpath(
        "default.yaml").read_text()


def default_config() -> ExperimentConfig:
    return config_from_dict(yaml.safe_load(default_config_text()))
