"""Flat key=value experiment configuration with a strict schema.

Unknown keys are rejected so a config diff always means a behaviour diff.
CLI flags override file values; the file overrides defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

INPUT_KINDS = ("synth-series", "synth-trace", "pcap", "csv", "features")
FEATURES = ("f_c", "f_s", "f_iat")
RESLEARN_MODES = ("on", "off")


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    input_kind: str = "synth-series"
    input_path: str = ""
    server: str = ""
    port: int = -1                     # -1 means unset
    feature: str = "f_s"
    segment_duration: float = 1.0
    segment_size: int = 500
    lookback: int = 32
    train_ratio: float = 0.5
    val_ratio: float = 0.2
    models: str = "transformer"
    reslearn: str = "on"
    seed: int = 7
    jobs: int = 1
    epochs: int = 300
    residual_epochs: int = 300
    hidden_width: int = 64
    d_model: int = 64
    n_heads: int = 2
    n_layers: int = 2
    ffn_width: int = 128
    learning_rate: float = 1e-3
    batch_size: int = 32
    patience: int = 10
    min_delta: float = 1e-4
    paper_literal_combine: bool = False
    min_packets: int = 1
    bins: int = 50
    default_dur_th: float = 0.002
    eda_window: int = 20
    synth_length: int = 2000
    synth_level: float = 100.0
    synth_amplitude: float = 20.0
    synth_period: float = 50.0
    synth_slope: float = 0.0
    synth_noise_std: float = 1.0
    synth_spike_rate: float = 0.0
    synth_spike_height: float = 0.0
    synth_fps: float = 72.0
    synth_mean_frame_size: int = 12000
    synth_packets_per_frame: int = 10
    synth_intra_spacing: float = 0.0002
    synth_background_rate: float = 50.0
    synth_jitter_std: float = 0.0
    synth_duration: float = 10.0

    def model_kinds(self) -> list[str]:
        return [m.strip() for m in self.models.split(",") if m.strip()]

    def validate(self) -> None:
        if self.input_kind not in INPUT_KINDS:
            raise ConfigError(f"input_kind must be one of {INPUT_KINDS}")
        if self.feature not in FEATURES:
            raise ConfigError(f"feature must be one of {FEATURES}")
        if self.reslearn not in RESLEARN_MODES:
            raise ConfigError(f"reslearn must be one of {RESLEARN_MODES}")
        if self.input_kind in ("pcap", "csv", "features") and not self.input_path:
            raise ConfigError(f"input_kind {self.input_kind} needs input_path")
        if self.input_kind == "pcap" and not self.server:
            raise ConfigError("pcap input needs the server address")
        if not self.model_kinds():
            raise ConfigError("models must name at least one kind")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype in ("bool", bool):
            return _bool(raw)
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_config(text: str) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _convert(key, raw))
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def apply_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown override {key!r}")
        setattr(cfg, key, value)
    return cfg
