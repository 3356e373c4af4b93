"""Encoder transfer experiment: ellipse source task, rectangle target task.

Single entry point that (1) pretrains a ResU-Net on synthetic ellipse
lesions, (2) saves the encoder tensors to an archive, (3) fine-tunes a
fresh model on rectangle lesions with that encoder loaded and frozen,
(4) trains an identically initialized from-scratch baseline on the same
target data, and (5) emits both histories plus ``comparison.json``.

Checked claims, reflected in the exit code:

* frozen encoder tensors (parameters and batch-norm running statistics)
  are bit-identical before and after fine-tuning;
* epochs to reach the target validation dice for the fine-tuned model
  do not exceed the from-scratch count on the same data and seeds.
"""

import argparse
import json
import sys
from pathlib import Path

from .config import parse_channels
from .data import SynthParams, split, synth_dataset
from .metrics import history_csv
from .models import build_model
from .optim import freeze
from .train import TrainConfig, train
from .weights import load_weights, save_weights


def _snapshot(model, prefix):
    params = {name: p.data.tobytes() for name, p in model.named_params().items()
              if name.startswith(prefix)}
    state = {name: s.tobytes() for name, s in model.named_state().items()
             if name.startswith(prefix)}
    return params, state


def _epochs_to(history, target):
    for row in history.rows:
        if row.val_acc >= target:
            return row.epoch
    return None


def run_transfer_check(out_dir, image_size=32, channels=(8, 16, 32, 16, 8),
                       source_samples=500, source_epochs=30,
                       target_samples=64, target_epochs=40,
                       target_dice=0.80, learning_rate=1e-3, seed=0,
                       log=print):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    size = (image_size, image_size)
    source = synth_dataset(seed, source_samples,
                           SynthParams(size, shape_family="ellipse"))
    target = synth_dataset(seed + 1, target_samples,
                           SynthParams(size, shape_family="rectangle"))
    src_train, src_val = split(source, (0.9, 0.1), seed)
    tgt_train, tgt_val = split(target, (0.75, 0.25), seed)

    log(f"pretraining on {len(src_train)} ellipse samples "
        f"for {source_epochs} epochs")
    pretrained = build_model("resunet", size, channels=channels, seed=seed)
    pretrained, pre_hist = train(
        pretrained, src_train, src_val,
        TrainConfig(epochs=source_epochs, learning_rate=learning_rate,
                    seed=seed))
    history_csv(pre_hist, out / "pretrain_history.csv")
    log(f"source validation dice {pre_hist.rows[-1].val_acc:.4f}")

    encoder_names = sorted(n for n in pretrained.named_params()
                           if n.startswith("enc"))
    encoder_names += sorted(n for n in pretrained.named_state()
                            if n.startswith("enc"))
    archive = out / "encoder.gsw"
    save_weights(pretrained, archive, names=encoder_names)

    # fine-tune and baseline share the init seed, target data, and train
    # seed; they differ only in the loaded + frozen encoder
    finetuned = build_model("resunet", size, channels=channels, seed=seed + 2)
    load_report = load_weights(finetuned, archive, mode="by-name")
    log(f"loaded {len(load_report.loaded)} encoder tensors into fresh model")
    frozen_names = freeze(finetuned, "enc*")
    params_before, state_before = _snapshot(finetuned, "enc")
    finetuned, fine_hist = train(
        finetuned, tgt_train, tgt_val,
        TrainConfig(epochs=target_epochs, learning_rate=learning_rate,
                    seed=seed))
    params_after, state_after = _snapshot(finetuned, "enc")
    history_csv(fine_hist, out / "finetune_history.csv")

    scratch = build_model("resunet", size, channels=channels, seed=seed + 2)
    scratch, scratch_hist = train(
        scratch, tgt_train, tgt_val,
        TrainConfig(epochs=target_epochs, learning_rate=learning_rate,
                    seed=seed))
    history_csv(scratch_hist, out / "scratch_history.csv")

    fine_epochs = _epochs_to(fine_hist, target_dice)
    scratch_epochs = _epochs_to(scratch_hist, target_dice)
    summary = {
        "image_size": image_size,
        "channels": list(channels),
        "source_samples": source_samples,
        "source_epochs": source_epochs,
        "target_samples": target_samples,
        "target_epochs": target_epochs,
        "target_dice": target_dice,
        "learning_rate": learning_rate,
        "seed": seed,
        "source_final_val_dice": pre_hist.rows[-1].val_acc,
        "frozen_parameters": len(frozen_names),
        "frozen_params_bit_identical": params_before == params_after,
        "frozen_state_bit_identical": state_before == state_after,
        "finetune_epochs_to_target": fine_epochs,
        "scratch_epochs_to_target": scratch_epochs,
        "finetune_final_val_dice": fine_hist.rows[-1].val_acc,
        "scratch_final_val_dice": scratch_hist.rows[-1].val_acc,
        "transfer_no_slower": fine_epochs is not None
                              and (scratch_epochs is None
                                   or fine_epochs <= scratch_epochs),
    }
    (out / "comparison.json").write_text(json.dumps(summary, indent=2) + "\n",
                                         encoding="utf-8")
    log(f"epochs to val dice {target_dice}: "
        f"fine-tuned {fine_epochs}, from-scratch {scratch_epochs}")
    log(f"frozen tensors bit-identical: "
        f"{summary['frozen_params_bit_identical'] and summary['frozen_state_bit_identical']}")
    return summary


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="glioseg-transfer-check", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/transfer-check", metavar="DIR")
    parser.add_argument("--image-size", type=int, default=32)
    parser.add_argument("--channels", default="8,16,32,16,8")
    parser.add_argument("--source-samples", type=int, default=500)
    parser.add_argument("--source-epochs", type=int, default=30)
    parser.add_argument("--target-samples", type=int, default=64)
    parser.add_argument("--target-epochs", type=int, default=40)
    parser.add_argument("--target-dice", type=float, default=0.80)
    parser.add_argument("--learning-rate", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    summary = run_transfer_check(
        args.out, image_size=args.image_size,
        channels=parse_channels(args.channels),
        source_samples=args.source_samples, source_epochs=args.source_epochs,
        target_samples=args.target_samples, target_epochs=args.target_epochs,
        target_dice=args.target_dice, learning_rate=args.learning_rate,
        seed=args.seed)
    ok = (summary["frozen_params_bit_identical"]
          and summary["frozen_state_bit_identical"]
          and summary["transfer_no_slower"])
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
