"""Command-line entry point: ``geoaug <subcommand> --config C --in I --out O --seed S``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import io as gio
from .beats import CLASS_NAMES
from .config import load_config
from .evaluate import (
    AttackSpec,
    ClassifierModel,
    evaluate,
    pgd_attack,
    robustness_sweep,
    train_softmax,
)
from .experiment import MODES, StageError, augment_train, report_json, run_experiment
from .features import FeatureConfig, feature_matrix
from .signal import detect_r_peaks, preprocess_record, segment_beats
from .synthetic import synth_dataset


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _need(args, name):
    value = getattr(args, name)
    if value is None:
        raise ValueError(f"--{name.rstrip('_')} is required for this subcommand")
    return value


def cmd_synth(args, cfg):
    beats = synth_dataset(
        counts=cfg.synth_counts,
        n_leads=cfg.synth_leads,
        beats_per_patient=cfg.synth_beats_per_patient,
        seed=cfg.seed,
    )
    gio.save_beats(_need(args, "out"), beats)
    return f"wrote {len(beats)} beats"


def cmd_import(args, cfg):
    records = gio.import_csv(_need(args, "in_"), None, cfg.csv_sample_rate)
    gio.save_records(_need(args, "out"), records)
    return f"imported {len(records)} record(s), {records[0].samples.shape[0]} leads"


def cmd_preprocess(args, cfg):
    records = gio.load_records(_need(args, "in_"))
    done = [preprocess_record(r, cfg.window_n, cfg.notch_hz, cfg.notch_q) for r in records]
    gio.save_records(_need(args, "out"), done)
    return f"filtered {len(done)} record(s)"


def cmd_segment(args, cfg):
    beats, dropped = [], 0
    for rec in gio.load_records(_need(args, "in_")):
        lead = min(cfg.detect_lead, rec.samples.shape[0] - 1)
        peaks = detect_r_peaks(rec.samples[lead], rec.sample_rate)
        pre = int(round(cfg.pre_s * rec.sample_rate))
        post = int(round(cfg.post_s * rec.sample_rate))
        kept, n_drop = segment_beats(rec, peaks, pre, post)
        beats += kept
        dropped += n_drop
    gio.save_beats(_need(args, "out"), beats)
    return f"kept {len(beats)} beats, dropped {dropped} at record borders"


def _feature_config(beats, cfg):
    from .signal import downsample_beat

    b = beats[0] if beats[0].sample_rate == cfg.fs_out else downsample_beat(beats[0], cfg.fs_out)
    return FeatureConfig(n_leads=b.n_leads, raw_len=b.beat_len, fs_out=cfg.fs_out)


def cmd_features(args, cfg):
    beats = gio.load_beats(_need(args, "in_"))
    if not beats:
        raise ValueError("no beats to featurize")
    X = feature_matrix(beats, _feature_config(beats, cfg))
    y = np.array([b.label for b in beats])
    np.savez(_need(args, "out"), X=X, y=y)
    return f"features {X.shape}"


def cmd_distmat(args, cfg):
    beats = gio.load_beats(_need(args, "in_"))
    _, hit = gio.cached_pairwise_cost(_need(args, "out"), beats, beats, grid_len=cfg.grid_len)
    return f"{len(beats)}x{len(beats)} cost matrix ({'cache hit' if hit else 'computed'})"


def cmd_augment(args, cfg):
    beats = gio.load_beats(_need(args, "in_"))
    added = augment_train(beats, args.mode or "geodesic", cfg)
    gio.save_beats(_need(args, "out"), beats + added)
    return f"added {len(added)} beats"


def _load_xy(path):
    with np.load(path) as data:
        return data["X"], data["y"]


def cmd_train(args, cfg):
    X, y = _load_xy(_need(args, "in_"))
    model = train_softmax(X, y, cfg.lr, cfg.l2, cfg.epochs, cfg.seed)
    np.savez(_need(args, "out"), weights=model.weights, bias=model.bias,
             mean=model.mean, std=model.std)
    return f"trained {model.n_classes}-class model on {len(y)} samples"


def _load_model(path):
    with np.load(path) as d:
        return ClassifierModel(d["weights"], d["bias"], d["mean"], d["std"])


def _attack_spec(cfg):
    return AttackSpec(steps=cfg.pgd_steps, step_size=cfg.pgd_step_size, seed=cfg.seed)


def cmd_attack(args, cfg):
    model = _load_model(_need(args, "model"))
    X, y = _load_xy(_need(args, "in_"))
    eps = cfg.epsilons[-1] if cfg.epsilons else 0.0
    spec = replace(_attack_spec(cfg), epsilon=eps)
    np.savez(_need(args, "out"), X=pgd_attack(model, X, y, spec), y=y)
    return f"attacked {len(y)} samples at epsilon {eps}"


def cmd_eval(args, cfg):
    model = _load_model(_need(args, "model"))
    X, y = _load_xy(_need(args, "in_"))
    out = {
        "clean": evaluate(model, X, y).to_dict(),
        "robustness": [r.to_dict() for r in
                       robustness_sweep(model, X, y, cfg.epsilons, _attack_spec(cfg))],
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
    }
    _write_json(_need(args, "out"), out)
    return f"clean macro AUROC {out['clean']['auroc_macro']}"


def cmd_summary(args, cfg):
    beats = gio.load_beats(_need(args, "in_"))
    summary = gio.dataset_summary(beats, CLASS_NAMES if max(b.label for b in beats) < 5 else None)
    if args.out:
        _write_json(args.out, summary)
    return gio.format_summary(summary)


def cmd_run(args, cfg):
    beats = gio.load_beats(_need(args, "in_"))
    report = run_experiment(cfg, beats, args.mode or "none", _need(args, "out"))
    return report_json(report).strip()


COMMANDS = {
    "synth": cmd_synth,
    "import": cmd_import,
    "preprocess": cmd_preprocess,
    "segment": cmd_segment,
    "features": cmd_features,
    "distmat": cmd_distmat,
    "augment": cmd_augment,
    "train": cmd_train,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "summary": cmd_summary,
    "run": cmd_run,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="geoaug", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value run configuration")
        p.add_argument("--in", dest="in_", help="input path")
        p.add_argument("--out", help="output path (a directory for run)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        if name in ("run", "augment"):
            p.add_argument("--mode", choices=MODES)
        if name in ("attack", "eval"):
            p.add_argument("--model", help="model file written by train")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_seed(args.seed)
    except (OSError, ValueError) as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    try:
        message = COMMANDS[args.command](args, cfg)
    except StageError as exc:
        print(f"error [{args.command}/{exc.stage}]: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    if message:
        print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
