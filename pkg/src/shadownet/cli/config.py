"""Run configuration: JSON file plus command-line overrides."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..core import MASK64
from ..errors import ConfigError

DEFAULTS = {
    "gen": {
        "widths": [2048, 512, 128], "top_sparsity": 4, "keep_fraction": 1.0, "n_samples": 10,
        "value_mode": "binary",
    },
    "invert": {
        "widths": [2048, 512, 128], "top_sparsity": 4, "keep_fraction": 1.0, "n_trials": 200,
        "bias_mode": "calibrated", "bias_c": 1.0, "calibration_trials": 500, "weights": None,
    },
    "scaling": {
        "k": 16, "t_values": [64, 128, 256, 512, 1024], "m": 256, "n": 4096, "trials_per_t": 200,
        "bias_c": 0.5, "dropout_t": 256, "dropout_trials": 200,
    },
    "lemmas": {},
    "diag": {
        "weights": None, "matrix_index": 0, "rows": 512, "cols": 512, "n_bins": 50,
        "bias": None, "bias_noise": 0.1, "bias_len": 512,
    },
    "support": {
        "widths": [2048, 512, 128], "top_sparsity": 4, "n_trials": 1000, "resample_net_every": 0,
        "keep_fraction": 1.0, "calibration_trials": 1000,
    },
    "twolayer": {
        "q": 5, "k_values": [50, 100, 200, 400], "p": 64, "t_factor": 4, "m_factor": 2, "n_factor": 2,
        "n_trials": 300, "coord": 0, "c_h": 0.0, "c_g": 0.0,
    },
    "train": {
        "dataset": "blobs", "csv_path": None, "idx_images": None, "idx_labels": None,
        "n_per_class": 200, "n_classes": 3, "dim": 20, "spread": 0.3, "val_fraction": 0.3,
        "hidden": [256, 256], "learning_rate": 0.05, "shadow_weight": 0.25, "reg_lambdas": [0.0, 0.0],
        "masked_regularizer": False, "dropout_ratio": 0.0, "batch_size": 50, "epochs": 10,
        "source_layer": "h2", "sampling": False, "sampling_keep": 0.5, "smoothing": False,
        "image_shape": None, "rescale": True, "grad_check_points": 3,
    },
}
COMMANDS = tuple(DEFAULTS)
TOP_KEYS = ("command", "seed", "output_dir", "threads", "check", "parameters")


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    parameters: dict = field(default_factory=dict)
    output_dir: str = "runs"
    threads: int | None = None
    check: bool = False

    def to_json(self) -> str:
        return json.dumps({"command": self.command, "seed": self.seed, "output_dir": self.output_dir,
                           "threads": self.threads, "check": self.check, "parameters": self.parameters},
                          indent=2, sort_keys=True)


def _type_ok(value, default) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, list):
        return isinstance(value, list) and all(_type_ok(v, default[0]) for v in value) if default else isinstance(value, list)
    return isinstance(value, type(default))


def _coerce(value, default):
    if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(pairs) -> dict:
    """["k=16", "t_values=[64,128]"] -> {"k": 16, "t_values": [64, 128]}; values parse as JSON if they can."""
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like KEY=VALUE")
        key, _, val = item.partition("=")
        out[key.strip()] = _parse_scalar(val.strip())
    return out


def parse_config(json_text: str | None, cli_overrides: dict | None = None) -> RunConfig:
    """Merge a JSON config with overrides; overrides win.

    ``cli_overrides`` may hold any top-level key and a ``parameters`` dict.
    Unknown keys, type mismatches and a missing command raise ConfigError.
    """
    try:
        doc = json.loads(json_text) if json_text and json_text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<json>", "top level must be an object")
    ov = dict(cli_overrides or {})
    for key in list(doc) + list(ov):
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown configuration key")
    params_in = dict(doc.get("parameters") or {})
    if not isinstance(doc.get("parameters", {}), dict):
        raise ConfigError("parameters", "must be an object")
    params_in.update(ov.pop("parameters", None) or {})
    merged = {k: v for k, v in doc.items() if k != "parameters"}
    merged.update({k: v for k, v in ov.items() if v is not None})
    command = merged.get("command")
    if command is None:
        raise ConfigError("command", "missing required key")
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    seed = merged.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed <= MASK64:
        raise ConfigError("seed", f"must be an unsigned 64-bit integer, got {seed!r}")
    threads = merged.get("threads")
    if threads is not None and (not isinstance(threads, int) or isinstance(threads, bool) or threads < 1):
        raise ConfigError("threads", f"must be a positive integer, got {threads!r}")
    check = merged.get("check", False)
    if not isinstance(check, bool):
        raise ConfigError("check", "must be a boolean")
    output_dir = merged.get("output_dir", "runs")
    if not isinstance(output_dir, str):
        raise ConfigError("output_dir", "must be a string")
    defaults = DEFAULTS[command]
    params = {}
    for key, value in params_in.items():
        if key not in defaults:
            raise ConfigError(key, f"unknown parameter for command {command!r}")
        if not _type_ok(value, defaults[key]):
            raise ConfigError(key, f"expected {type(defaults[key]).__name__}, got {type(value).__name__}")
        params[key] = _coerce(value, defaults[key])
    return RunConfig(command, seed, params, output_dir, threads, check)


def resolved_parameters(cfg: RunConfig) -> dict:
    """Command defaults overlaid with the configured parameters."""
    out = dict(DEFAULTS[cfg.command])
    out.update(cfg.parameters)
    return out
