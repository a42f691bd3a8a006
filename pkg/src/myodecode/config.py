"""Engine configuration: defaults, TOML/JSON file loading, MYO_CONFIG env var."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .kinematics import GuideTiming

ENV_VAR = "MYO_CONFIG"


@dataclass
class DeviceConfig:
    host: str = "127.0.0.1"
    port: int = 5566
    control_port: int | None = None  # simulated-participant control channel


@dataclass
class ConformalConfig:
    enabled: bool = True
    alpha: float = 0.1
    lam: float = 0.01
    k_reg: int = 1
    window: int = 75


@dataclass
class OutputConfig:
    kind: str = "virtual_hand"  # virtual_hand | cursor_2d | null
    host: str = "127.0.0.1"
    port: int = 9400
    rate_hz: float = 32.0
    interp_s: float = 0.25
    guide_port: int = 9401
    guide_rate_hz: float = 60.0


@dataclass
class DecoderConfig:
    rounds: int = 1000
    depth: int = 6
    learning_rate: float = 0.1
    n_bins: int = 64


@dataclass
class AppConfig:
    device: DeviceConfig = field(default_factory=DeviceConfig)
    conformal: ConformalConfig = field(default_factory=ConformalConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    guide: GuideTiming = field(default_factory=GuideTiming)

    @classmethod
    def from_dict(cls, d: dict) -> "AppConfig":
        def sub(cls_, key):
            return cls_(**d.get(key, {}))

        # accept "lambda" as the file spelling of the set-size penalty
        conf = dict(d.get("conformal", {}))
        if "lambda" in conf:
            conf["lam"] = conf.pop("lambda")
        return cls(
            device=sub(DeviceConfig, "device"),
            conformal=ConformalConfig(**conf),
            output=sub(OutputConfig, "output"),
            decoder=sub(DecoderConfig, "decoder"),
            guide=GuideTiming(**d.get("guide", {})),
        )


def load_config(path: str | Path | None = None) -> AppConfig:
    """Read config from an explicit path, else $MYO_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if not path:
        return AppConfig()
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".toml", ".tml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    return AppConfig.from_dict(data)
