"""Command-line driver: generate / train / evaluate / predict / report.

Every run writes its fully resolved configuration next to its artifacts,
so ``--config <run>/resolved_config`` replays any previous run exactly.
Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

import argparse
import sys
from pathlib import Path

from . import config as cfg
from . import data, metrics, pipeline
from .augment import AugmentPolicy
from .config import ConfigError
from .models import build_model
from .optim import freeze
from .train import TrainConfig, train
from .weights import load_weights, save_weights

_COMMANDS = {
    "generate": "write a synthetic dataset (PGM images + manifest.csv)",
    "train": "train a model; emits weights.gsw, history.csv, resolved_config",
    "evaluate": "score one training run on a dataset; emits report.csv",
    "predict": "two-stage gated prediction; emits predictions.csv + overlays",
    "report": "compare several training runs in one table; emits report.csv",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="glioseg",
        description="Brain-MRI-style tumor classification and segmentation.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_text in _COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="FILE",
                       help="key=value config file ('#' comments)")
        p.add_argument("--preset", metavar="NAME",
                       help="named bundle: " + ", ".join(sorted(cfg.PRESETS)))
        for key in cfg.SCHEMA:
            kind, default = cfg.SCHEMA[key]
            p.add_argument("--" + key.replace("_", "-"), dest=key, metavar="V",
                           help=f"{kind}, default {cfg.format_value(default)}")
    return parser


def _head_for(config):
    if config["head"] != "auto":
        return config["head"]
    return "segmenter" if config["model"] == "resunet" else "classifier"


def _build_from(config):
    name = config["model"]
    size = (config["image_size"], config["image_size"])
    head = None if config["head"] == "auto" else config["head"]
    kwargs = {"seed": config["seed"]}
    if name == "cnn-baseline":
        head = head or "classifier"
        kwargs["width_scale"] = config["width_scale"]
        if head == "segmenter":
            kwargs["channels"] = cfg.parse_channels(config["channels"])
    elif name == "vgg16":
        kwargs["width_scale"] = config["width_scale"]
        kwargs["hidden"] = config["hidden"]
    elif name == "resnet50":
        kwargs["width_scale"] = config["width_scale"]
    elif name == "resunet":
        kwargs["channels"] = cfg.parse_channels(config["channels"])
        kwargs["se_enabled"] = config["se_enabled"]
        kwargs["se_ratio"] = config["se_ratio"]
    try:
        return build_model(name, size, head=head, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _synth_params(config):
    n = config["image_size"]
    return data.SynthParams(image_size=(n, n),
                            tumor_probability=config["tumor_probability"],
                            shape_family=config["shape_family"])


def _dataset_from(config):
    n = config["image_size"]
    if config["dataset"]:
        ds = data.load_dataset(config["dataset"])
        if any(s.image.shape[1:] != (n, n) for s in ds):
            ds = data.resize_dataset(ds, (n, n))
        return ds
    return data.synth_dataset(config["seed"], config["samples"],
                              _synth_params(config))


def _train_config(config):
    try:
        policy = AugmentPolicy.named(config["augment"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return TrainConfig(
        epochs=config["epochs"], learning_rate=config["learning_rate"],
        optimizer=config["optimizer"],
        base_batch_size=config["base_batch_size"],
        batch_growth_epoch=config["batch_growth_epoch"],
        batch_growth_factor=config["batch_growth_factor"],
        loss=config["loss"], augment_policy=policy, seed=config["seed"],
        precision=config["precision"], record_time=config["record_time"])


def load_run_model(run_path):
    """Rebuild the model a training run trained, weights loaded, eval mode."""
    run_path = Path(run_path)
    resolved = run_path / "resolved_config"
    if not resolved.exists():
        raise FileNotFoundError(f"{resolved} not found (not a run directory?)")
    run_config = cfg.resolve(file_path=resolved)
    model = _build_from(run_config)
    load_weights(model, run_path / "weights.gsw", mode="strict")
    model.eval()
    return model, run_config


def cmd_generate(config):
    out = cfg.run_dir_for(config, "generate")
    ds = data.synth_dataset(config["seed"], config["samples"],
                            _synth_params(config))
    data.save_dataset(ds, out)
    cfg.write_resolved(config, out)
    positives = sum(s.label for s in ds)
    print(f"wrote {len(ds)} samples ({positives} with tumor) to {out}")
    return 0


def cmd_train(config):
    out = cfg.run_dir_for(config, "train")
    ds = _dataset_from(config)
    vf = config["val_fraction"]
    train_set, val_set = data.split(ds, (1.0 - vf, vf), seed=config["seed"])
    model = _build_from(config)
    if config["weights"]:
        report = load_weights(model, config["weights"], mode="by-name")
        print(f"initialized {len(report.loaded)} tensors from {config['weights']}")
    if config["freeze"]:
        frozen = freeze(model, config["freeze"])
        print(f"froze {len(frozen)} parameters matching {config['freeze']!r}")
    model, history = train(model, train_set, val_set, _train_config(config))
    out.mkdir(parents=True, exist_ok=True)
    save_weights(model, out / "weights.gsw")
    metrics.history_csv(history, out / "history.csv")
    cfg.write_resolved(config, out)
    last = history.rows[-1]
    print(f"trained {model.name} for {last.epoch} epochs: "
          f"train_acc {last.train_acc:.4f}, val_acc {last.val_acc:.4f} -> {out}")
    return 0


def cmd_evaluate(config):
    if not config["run"]:
        raise ConfigError("evaluate requires run=<training run directory>")
    model, _ = load_run_model(config["run"])
    ds = _dataset_from(config)
    report = metrics.evaluate([model], ds)
    out = cfg.run_dir_for(config, "evaluate")
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    cfg.write_resolved(config, out)
    row = report.rows[0]
    print(f"{row['model']}: accuracy {row['accuracy']:.4f} "
          f"on {row['items']} samples -> {out / 'report.csv'}")
    return 0


def cmd_predict(config):
    if not (config["classifier_run"] and config["segmenter_run"]):
        raise ConfigError("predict requires classifier_run=<dir> and "
                          "segmenter_run=<dir>")
    classifier, _ = load_run_model(config["classifier_run"])
    segmenter, _ = load_run_model(config["segmenter_run"])
    ds = _dataset_from(config)
    preds = pipeline.predict_dataset(classifier, segmenter, ds,
                                     threshold=config["threshold"])
    out = cfg.run_dir_for(config, "predict")
    pipeline.save_predictions(preds, out)
    overlays = out / "overlays"
    overlays.mkdir(exist_ok=True)
    for sample, pred in zip(ds, preds):
        if pred.routed:
            metrics.overlay_render(sample.image, sample.mask, pred.mask,
                                   overlays / f"{sample.case_id}_overlay.ppm")
    cfg.write_resolved(config, out)
    routed = sum(p.routed for p in preds)
    print(f"predicted {len(preds)} cases ({routed} routed to the segmenter) "
          f"-> {out / 'predictions.csv'}")
    return 0


def cmd_report(config):
    run_paths = [r.strip() for r in config["runs"].split(",") if r.strip()]
    if not run_paths:
        raise ConfigError("report requires runs=<dir>[,<dir>...]")
    models = [load_run_model(r)[0] for r in run_paths]
    ds = _dataset_from(config)
    report = metrics.evaluate(models, ds)
    out = cfg.run_dir_for(config, "report")
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "report.csv")
    cfg.write_resolved(config, out)
    for row in report.rows:
        print(f"{row['model']}: accuracy {row['accuracy']:.4f}, "
              f"params {row['params_total']}")
    return 0


_HANDLERS = {"generate": cmd_generate, "train": cmd_train,
             "evaluate": cmd_evaluate, "predict": cmd_predict,
             "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    overrides = {key: getattr(args, key) for key in cfg.SCHEMA
                 if getattr(args, key) is not None}
    try:
        config = cfg.resolve(args.config, args.preset, overrides)
        return _HANDLERS[args.command](config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: diagnostic, exit 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
