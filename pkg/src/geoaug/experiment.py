"""End-to-end run: subject-disjoint split, training-set augmentation,
features, softmax training, clean and adversarial evaluation.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter, defaultdict

import numpy as np

from .augment import (
    AUGMENT_MAX_ITER,
    AUGMENT_TOL,
    AugmentSpec,
    geodesic_augment,
    linear_mixup,
    random_oversample,
    smote_like,
)
from .evaluate import AttackSpec, evaluate, robustness_sweep, train_softmax
from .features import FeatureConfig, feature_matrix
from .io import encode_beats, save_beats
from .ot import SinkhornParams
from .signal import downsample_beat

MODES = ("none", "oversample", "smote", "mixup", "geodesic")

# sub-seed streams, one per stage
_SPLIT, _AUGMENT, _TRAIN = 0, 1, 2


class StageError(RuntimeError):
    """An experiment stage failed; ``stage`` names it."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


def _stage_seed(seed, stream, *extra):
    return int(np.random.SeedSequence([seed, stream, *extra]).generate_state(1, np.uint64)[0] >> 1)


def subject_split(beats, test_fraction, seed):
    """Stratified split by ``source_id``: every subject lands wholly in train or test.

    A subject's class is its most frequent label (lowest label on ties).
    Per class, ``round(test_fraction * n_subjects)`` subjects (at least one
    when the class has two or more) are drawn for the test side.
    """
    by_subject = defaultdict(list)
    for k, b in enumerate(beats):
        by_subject[b.source_id].append(k)
    by_class = defaultdict(list)
    for sid in sorted(by_subject):
        labels = Counter(beats[k].label for k in by_subject[sid])
        top = max(labels.values())
        by_class[min(c for c, n in labels.items() if n == top)].append(sid)
    rng = np.random.default_rng(seed)
    test_ids = set()
    for cls in sorted(by_class):
        sids = by_class[cls]
        n_test = int(round(test_fraction * len(sids)))
        if len(sids) >= 2:
            n_test = min(max(n_test, 1), len(sids) - 1)
        else:
            n_test = 0
        test_ids.update(rng.permutation(sids)[:n_test].tolist())
    train = [b for b in beats if b.source_id not in test_ids]
    test = [b for b in beats if b.source_id in test_ids]
    return train, test


def _deficits(train, config):
    counts = Counter(b.label for b in train)
    top = max(counts.values())
    out = {}
    for cls in sorted(counts):
        if cls == config.source_class:
            continue
        want = config.n_augment if config.n_augment > 0 else top - counts[cls]
        if want > 0:
            out[cls] = want
    return out


def augment_train(train, mode, config):
    """Return the synthetic beats added to ``train`` under ``mode``."""
    if mode not in MODES:
        raise ValueError(f"unknown augmentation mode {mode!r}; choose from {MODES}")
    if mode == "none":
        return []
    deficits = _deficits(train, config)
    by_class = defaultdict(list)
    for b in train:
        by_class[b.label].append(b)
    added = []
    if mode == "oversample":
        counts = Counter(b.label for b in train)
        targets = {c: counts[c] + n for c, n in deficits.items()}
        grown = random_oversample(train, targets, _stage_seed(config.seed, _AUGMENT))
        return grown[len(train):]
    source = by_class.get(config.source_class, [])
    for cls, n_new in deficits.items():
        seed = _stage_seed(config.seed, _AUGMENT, cls)
        members = by_class[cls]
        if mode == "smote":
            k = min(config.smote_k, len(members) - 1)
            if k < 1:
                raise ValueError(f"class {cls} has too few training beats for SMOTE")
            added += smote_like(train, cls, k, n_new, seed)
            continue
        if not source:
            raise ValueError(f"source class {config.source_class} has no training beats")
        if mode == "mixup":
            rng = np.random.default_rng(seed)
            for _ in range(n_new):
                x = source[rng.integers(len(source))]
                y = members[rng.integers(len(members))]
                added.append(linear_mixup(x, y, rng.uniform(config.alpha_min, config.alpha_max), cls))
        else:
            spec = AugmentSpec(
                source_class=config.source_class,
                target_class=cls,
                alpha_min=config.alpha_min,
                alpha_max=config.alpha_max,
                batch_source=config.batch_source,
                batch_target=config.batch_target,
                n_augment=n_new,
                sinkhorn=SinkhornParams(lam=config.lam, tol=AUGMENT_TOL, max_iter=AUGMENT_MAX_ITER),
                pairing=config.pairing,
                label_policy=config.label_policy,
                seed=seed,
                grid_len=config.grid_len,
            )
            added += geodesic_augment(source, members, spec)
    return added


def _to_rate(beats, fs_out):
    return [b if b.sample_rate == fs_out else downsample_beat(b, fs_out) for b in beats]


def payload_digest(beats):
    return hashlib.sha256(encode_beats(beats)).hexdigest()


def _run(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc


def run_experiment(config, beats, mode="none", out_dir=None):
    """Split, augment the training side, train, evaluate clean and under PGD.

    Beats are decimated to ``config.fs_out`` first. The report dict holds the
    run identity (mode, seed, config digest, test-payload digest), split
    sizes, the clean MetricsReport and one MetricsReport per configured
    epsilon. With ``out_dir`` the report is written as ``report_<mode>.json``
    and the added beats as ``augmented_<mode>.ecgb``.
    """
    if not beats:
        raise StageError("input", ValueError("no beats"))
    beats = _run("downsample", _to_rate, beats, config.fs_out)
    train, test = _run("split", subject_split, beats, config.test_fraction,
                       _stage_seed(config.seed, _SPLIT))
    if not test:
        raise StageError("split", ValueError("test split is empty"))
    added = _run("augment", augment_train, train, mode, config)
    n_classes = max(b.label for b in beats) + 1
    fcfg = FeatureConfig(n_leads=beats[0].n_leads, raw_len=beats[0].beat_len, fs_out=config.fs_out)
    X_train = _run("features", feature_matrix, train + added, fcfg)
    X_test = _run("features", feature_matrix, test, fcfg)
    y_train = np.array([b.label for b in train + added])
    y_test = np.array([b.label for b in test])
    model = _run("train", train_softmax, X_train, y_train, config.lr, config.l2, config.epochs,
                 _stage_seed(config.seed, _TRAIN), n_classes)
    clean = _run("eval", evaluate, model, X_test, y_test)
    attack = AttackSpec(steps=config.pgd_steps, step_size=config.pgd_step_size, seed=config.seed)
    sweep = _run("attack", robustness_sweep, model, X_test, y_test, config.epsilons, attack)
    report = {
        "mode": mode,
        "seed": config.seed,
        "config_digest": config.digest(),
        "test_digest": payload_digest(test),
        "n_train": len(train),
        "n_added": len(added),
        "n_test": len(test),
        "clean": clean.to_dict(),
        "robustness": [r.to_dict() for r in sweep],
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, f"report_{mode}.json"), "w") as fh:
            fh.write(report_json(report))
        save_beats(os.path.join(out_dir, f"augmented_{mode}.ecgb"), added)
    return report


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
