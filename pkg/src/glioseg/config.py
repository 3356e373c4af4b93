"""Flat key=value run configuration with presets and strict validation.

Precedence, lowest to highest: schema defaults, preset values, config
file, command-line flags.  The fully resolved mapping is echoed to the
run directory as ``resolved_config`` in a format ``parse_file`` reads
back, so any run can be replayed from its own artifacts.
"""

import os
from pathlib import Path


class ConfigError(ValueError):
    """Bad key, bad value, or unusable preset; maps to exit code 2."""


def _parse_bool(raw):
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(raw)


# key -> (type tag, default); order fixes the resolved_config layout
SCHEMA = {
    "model": ("str", "cnn-baseline"),
    "head": ("str", "auto"),
    "dataset": ("str", ""),
    "samples": ("int", 64),
    "image_size": ("int", 64),
    "tumor_probability": ("float", 0.7),
    "shape_family": ("str", "ellipse"),
    "val_fraction": ("float", 0.2),
    "epochs": ("int", 10),
    "learning_rate": ("float", 1e-4),
    "optimizer": ("str", "adam"),
    "base_batch_size": ("int", 8),
    "batch_growth_epoch": ("int", 15),
    "batch_growth_factor": ("float", 2.0),
    "loss": ("str", "auto"),
    "augment": ("str", "none"),
    "precision": ("str", "float64"),
    "record_time": ("bool", False),
    "width_scale": ("float", 1.0),
    "channels": ("str", "8,16,32,64,128,256,128,64,32,16,8"),
    "se_enabled": ("bool", True),
    "se_ratio": ("int", 4),
    "hidden": ("int", 256),
    "freeze": ("str", ""),
    "weights": ("str", ""),
    "threshold": ("float", 0.99),
    "run": ("str", ""),
    "classifier_run": ("str", ""),
    "segmenter_run": ("str", ""),
    "runs": ("str", ""),
    "seed": ("int", 0),
    "output": ("str", ""),
    "workers": ("int", 0),
}

_PARSERS = {"str": str, "int": int, "float": float, "bool": _parse_bool}

# paper-* presets carry the published full-scale training setup per
# architecture; the desk-* family is shrunk enough for laptop test runs.
PRESETS = {
    "paper-resnet50": {"model": "resnet50", "epochs": 15,
                       "learning_rate": 1e-4, "image_size": 256},
    "paper-vgg16": {"model": "vgg16", "epochs": 20,
                    "learning_rate": 1e-4, "image_size": 256},
    "paper-resunet": {"model": "resunet", "epochs": 30,
                      "learning_rate": 1e-5, "image_size": 256},
    "desk-resnet50": {"model": "resnet50", "epochs": 2, "learning_rate": 1e-4,
                      "image_size": 64, "width_scale": 0.125, "samples": 16},
    "desk-vgg16": {"model": "vgg16", "epochs": 2, "learning_rate": 1e-4,
                   "image_size": 64, "width_scale": 0.125, "hidden": 32,
                   "samples": 16},
    "desk-resunet": {"model": "resunet", "epochs": 5, "learning_rate": 1e-3,
                     "image_size": 32, "channels": "4,8,16,8,4",
                     "samples": 16},
    "desk-cnn": {"model": "cnn-baseline", "epochs": 2, "learning_rate": 1e-3,
                 "image_size": 16, "channels": "4,8,4", "width_scale": 0.0625,
                 "samples": 16},
}


def parse_value(key, raw):
    """Parse one raw string per the schema; error messages name the key."""
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    kind, _ = SCHEMA[key]
    if isinstance(raw, str):
        try:
            return _PARSERS[kind](raw)
        except ValueError:
            raise ConfigError(
                f"bad value for {key!r}: expected {kind}, got {raw!r}") from None
    if kind == "float" and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    if not isinstance(raw, {"str": str, "int": int, "float": float,
                            "bool": bool}[kind]):
        raise ConfigError(f"bad value for {key!r}: expected {kind}, got {raw!r}")
    return raw


def parse_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment; blank lines skipped."""
    values = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = parse_value(key.strip(), raw.strip())
    return values


def resolve(file_path=None, preset=None, overrides=None):
    """Merge defaults < preset < file < overrides into a full mapping."""
    config = {key: default for key, (_, default) in SCHEMA.items()}
    if preset:
        if preset not in PRESETS:
            known = ", ".join(sorted(PRESETS))
            raise ConfigError(f"unknown preset {preset!r}; known: {known}")
        config.update(PRESETS[preset])
    if file_path:
        if not Path(file_path).exists():
            raise ConfigError(f"config file not found: {file_path}")
        config.update(parse_file(file_path))
    for key, raw in (overrides or {}).items():
        config[key] = parse_value(key, raw)
    validate(config)
    return config


def validate(config):
    if config["samples"] < 1:
        raise ConfigError("samples must be >= 1")
    if config["image_size"] < 8:
        raise ConfigError("image_size must be >= 8")
    if not 0.0 < config["val_fraction"] < 1.0:
        raise ConfigError("val_fraction must lie in (0, 1)")
    if not 0.0 <= config["threshold"] <= 1.0:
        raise ConfigError("threshold must lie in [0, 1]")
    if config["workers"] < 0:
        raise ConfigError("workers must be >= 0")
    if config["head"] not in ("auto", "classifier", "segmenter"):
        raise ConfigError(f"unknown head {config['head']!r}")
    return config


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolved_text(config):
    """Render the full mapping in schema order; parse_file inverts this."""
    return "".join(f"{key}={format_value(config[key])}\n" for key in SCHEMA)


def write_resolved(config, run_dir):
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "resolved_config"
    path.write_text(resolved_text(config), encoding="utf-8")
    return path


def output_root():
    return os.environ.get("GLIOSEG_OUTPUT_ROOT", "runs")


def run_dir_for(config, command):
    """Explicit ``output`` wins; otherwise <root>/<command>-<model>-seed<seed>."""
    if config["output"]:
        return Path(config["output"])
    return Path(output_root()) / f"{command}-{config['model']}-seed{config['seed']}"


def parse_channels(text):
    try:
        channels = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad channels list {text!r}") from None
    if not channels:
        raise ConfigError("channels list is empty")
    return channels
