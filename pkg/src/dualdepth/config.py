"""INI configuration with a closed schema and a stable content hash.

Every section and key must appear in the schema below; unknown names are
rejected so typos fail loudly instead of silently keeping a default.  The
`[weights]` section is the one open-form area: its keys are
`<network>.<term>` pairs validated against the loss table.  Values are
parsed to the type of their default.  `config_hash` digests the fully
resolved configuration, so runs can be compared by what they actually used.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from pathlib import Path

from dualdepth.errors import ConfigError

#: section -> key -> default (the default's type defines the parse type).
DEFAULTS = {
    "dataset": {
        "size": 64,
        "train_samples": 64,
        "test_samples": 8,
        "base_seed": 0,
        "z0_mm": 2000.0,
    },
    "noise": {
        "kernel_sigma_px": 3.0,
        "kernel_density": 4.0,
        "axial_c0": 1.0,
        "axial_c1": 0.0,
        "axial_c2": 3.0,
        "seed": 0,
    },
    "networks": {
        "levels": 3,
        "base_channels": 16,
        "disc_layers": 4,
        "disc_base_channels": 16,
        "seed": 0,
        "gan_condition": "normals",
    },
    "training": {
        "stage": "pretrain",
        "epochs": 6,
        "batch_size": 4,
        "learning_rate": 2e-4,
        "beta1": 0.5,
        "beta2": 0.999,
        "seed": 0,
        "non_saturating": False,
        "force": False,
    },
    "geometry": {
        "max_depth_jump_mm": 50.0,
        "inpaint_iterations": 64,
    },
}

CHOICES = {
    ("networks", "gan_condition"): ("normals", "depth"),
    ("training", "stage"): ("pretrain", "joint"),
}

WEIGHT_NETWORKS = (
    "gen_depth_front",
    "gen_color_front",
    "gen_depth_back",
    "gen_color_back",
    "disc_depth_front",
    "disc_depth_back",
    "disc_color_back",
)
WEIGHT_TERMS = ("l1", "perceptual", "feature_matching", "gan")

_BOOL_STATES = {
    "1": True,
    "true": True,
    "yes": True,
    "on": True,
    "0": False,
    "false": False,
    "no": False,
    "off": False,
}


def _parse_value(section: str, key: str, raw: str):
    default = DEFAULTS[section][key]
    try:
        if isinstance(default, bool):
            state = _BOOL_STATES.get(raw.strip().lower())
            if state is None:
                raise ValueError(f"not a boolean: {raw!r}")
            value = state
        elif isinstance(default, int):
            value = int(raw)
        elif isinstance(default, float):
            value = float(raw)
        else:
            value = raw.strip()
    except ValueError as e:
        raise ConfigError(f"[{section}] {key}: {e}") from e
    choices = CHOICES.get((section, key))
    if choices and value not in choices:
        raise ConfigError(f"[{section}] {key} must be one of {choices}, got {value!r}")
    return value


def _parse_weight(key: str, raw: str) -> tuple[str, str, float]:
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in WEIGHT_NETWORKS or parts[1] not in WEIGHT_TERMS:
        raise ConfigError(
            f"[weights] {key}: expected <network>.<term> with network in "
            f"{WEIGHT_NETWORKS} and term in {WEIGHT_TERMS}"
        )
    try:
        return parts[0], parts[1], float(raw)
    except ValueError as e:
        raise ConfigError(f"[weights] {key}: {e}") from e


def default_config() -> dict:
    cfg = {section: dict(keys) for section, keys in DEFAULTS.items()}
    cfg["weights"] = {}
    return cfg


def load_config(path=None, overrides: list[str] | None = None) -> dict:
    """Resolve defaults, an optional INI file, and `section.key=value`
    override strings (in that order) into one nested dict."""
    cfg = default_config()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str  # keep key case; weight keys name networks
        try:
            cp.read_string(p.read_text(encoding="utf-8"), source=str(p))
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {p}: {e}") from e
        for section in cp.sections():
            if section == "weights":
                for key, raw in cp.items(section):
                    net, term, value = _parse_weight(key, raw)
                    cfg["weights"].setdefault(net, {})[term] = value
                continue
            if section not in DEFAULTS:
                raise ConfigError(f"unknown config section [{section}]")
            for key, raw in cp.items(section):
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                cfg[section][key] = _parse_value(section, key, raw)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        parts = dotted.strip().split(".")
        if len(parts) == 3 and parts[0] == "weights":
            net, term, value = _parse_weight(f"{parts[1]}.{parts[2]}", raw)
            cfg["weights"].setdefault(net, {})[term] = value
            continue
        if len(parts) != 2:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        section, key = parts
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown config entry {dotted.strip()!r}")
        cfg[section][key] = _parse_value(section, key, raw)
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 over the canonical JSON form of a resolved configuration."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
