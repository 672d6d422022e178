"""Class-to-class augmentation along 1-D Wasserstein geodesics, with
raw-signal baselines (linear mixup, random oversampling, SMOTE-like).
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .beats import (
    BeatTensor,
    _resample,
    density_to_beat,
    pairwise_from_masses,
    quantile_interpolate,
    to_density,
)
from .ot import DiscreteMeasure, SinkhornParams, sinkhorn

PAIRINGS = ("sample-proportional", "row-argmax")
LABEL_POLICIES = ("target", "source")
# Minibatches holding several beats of one subject have near-duplicate cost
# rows, which slows Sinkhorn a lot; the coupling only drives pairing and is
# rounded onto exact marginals afterwards, so a looser stop is enough.
AUGMENT_TOL = 1e-4
AUGMENT_MAX_ITER = 100_000


def _augment_sinkhorn():
    return SinkhornParams(tol=AUGMENT_TOL, max_iter=AUGMENT_MAX_ITER)


@dataclass(frozen=True)
class AugmentSpec:
    source_class: int
    target_class: int
    alpha_min: float = 0.5
    alpha_max: float = 0.9
    batch_source: int = 16
    batch_target: int = 16
    n_augment: int = 1
    sinkhorn: SinkhornParams = field(default_factory=_augment_sinkhorn)
    pairing: str = "sample-proportional"
    label_policy: str = "target"
    seed: int = 0
    grid_len: int | None = None
    lead_weights: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha_min <= self.alpha_max <= 1.0:
            raise ValueError("need 0 <= alpha_min <= alpha_max <= 1")
        if self.batch_source < 1 or self.batch_target < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.n_augment < 1:
            raise ValueError("n_augment must be >= 1")
        if self.pairing not in PAIRINGS:
            raise ValueError(f"pairing must be one of {PAIRINGS}")
        if self.label_policy not in LABEL_POLICIES:
            raise ValueError(f"label_policy must be one of {LABEL_POLICIES}")


def _check_batch(beats, name, label):
    if not beats:
        raise ValueError(f"{name} batch is empty")
    shapes = {b.samples.shape for b in beats}
    if len(shapes) != 1:
        raise ValueError(f"{name} beats have mixed shapes {sorted(shapes)}")
    bad = [b.label for b in beats if b.label != label]
    if bad:
        raise ValueError(f"{name} beats must all carry label {label}, found {bad[0]}")
    return shapes.pop()


def _densities(beat, grid_len):
    return [to_density(_resample(lead, grid_len)) for lead in beat.samples]


def geodesic_augment(source, target, spec, full_cost=None):
    """Draw ``spec.n_augment`` beats between the source and target classes.

    Each draw samples a source and a target minibatch (without replacement),
    couples them with Sinkhorn under the beat-shape cost with uniform
    weights, and yields one beat per source row: the row is paired with a
    target beat from its coupling row, an ``alpha`` is drawn uniformly from
    ``[alpha_min, alpha_max]``, and every lead is moved that fraction along
    the 1-D geodesic before conversion back to samples. Draw ``d`` uses
    the generator seeded by ``(spec.seed, d)``.

    ``full_cost``, if given, is the precomputed (len(source), len(target))
    cost matrix; minibatch costs are then read from it.
    """
    shape = _check_batch(source, "source", spec.source_class)
    if _check_batch(target, "target", spec.target_class) != shape:
        raise ValueError("source and target beats differ in lead count or length")
    n_leads, beat_len = shape
    grid_len = spec.grid_len or beat_len
    if full_cost is not None:
        full_cost = np.asarray(full_cost, dtype=np.float64)
        if full_cost.shape != (len(source), len(target)):
            raise ValueError("full_cost shape does not match the source/target sizes")
    lead_w = None if spec.lead_weights is None else np.asarray(spec.lead_weights, dtype=np.float64)

    dens_src = [_densities(b, grid_len) for b in source]
    dens_tgt = [_densities(b, grid_len) for b in target]
    mass_src = np.stack([[d.mass for d in ds] for ds in dens_src])
    mass_tgt = np.stack([[d.mass for d in ds] for ds in dens_tgt])

    label = spec.target_class if spec.label_policy == "target" else spec.source_class
    out = []
    draw = 0
    while len(out) < spec.n_augment:
        rng = np.random.default_rng([spec.seed, draw])
        draw += 1
        rows = rng.choice(len(source), size=min(spec.batch_source, len(source)), replace=False)
        cols = rng.choice(len(target), size=min(spec.batch_target, len(target)), replace=False)
        if full_cost is not None:
            cost = full_cost[np.ix_(rows, cols)]
        else:
            cost = pairwise_from_masses(
                np.ascontiguousarray(mass_src[rows]), np.ascontiguousarray(mass_tgt[cols]), lead_w
            )
        plan, _ = sinkhorn(
            cost, DiscreteMeasure.uniform(len(rows)).weights,
            DiscreteMeasure.uniform(len(cols)).weights, spec.sinkhorn,
        )
        for r, i in enumerate(rows):
            if len(out) == spec.n_augment:
                break
            row = plan.matrix[r]
            if spec.pairing == "row-argmax":
                c = int(np.argmax(row))
            else:
                c = int(rng.choice(len(cols), p=row / row.sum()))
            j = cols[c]
            alpha = rng.uniform(spec.alpha_min, spec.alpha_max)
            moved = [
                quantile_interpolate(mu, nu, alpha)
                for mu, nu in zip(dens_src[i], dens_tgt[j])
            ]
            src = source[i]
            out.append(
                density_to_beat(
                    moved, beat_len, label, src.sample_rate,
                    f"geo:{src.source_id}>{target[j].source_id}",
                )
            )
    return out


def linear_mixup(x, y, alpha, label=None):
    """Per-sample convex combination ``(1 - alpha) x + alpha y``; label defaults to y's."""
    if x.samples.shape != y.samples.shape:
        raise ValueError(f"shape mismatch {x.samples.shape} vs {y.samples.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    mixed = (1.0 - alpha) * x.samples + alpha * y.samples
    return BeatTensor(
        mixed, y.label if label is None else label, x.sample_rate,
        f"mix:{x.source_id}>{y.source_id}",
    )


def random_oversample(dataset, target_counts, seed=0):
    """Append uniformly drawn duplicates until each class in ``target_counts`` reaches its count."""
    counts = Counter(b.label for b in dataset)
    rng = np.random.default_rng(seed)
    out = list(dataset)
    for cls in sorted(target_counts):
        want = int(target_counts[cls])
        have = counts.get(cls, 0)
        if want < have:
            raise ValueError(f"target count {want} for class {cls} is below current {have}")
        if want > have and have == 0:
            raise ValueError(f"class {cls} has no beats to duplicate")
        members = [b for b in dataset if b.label == cls]
        picks = rng.integers(0, have, size=want - have) if want > have else []
        out.extend(members[k] for k in picks)
    return out


def smote_like(dataset, class_id, k, n_new, seed=0, lam=None):
    """Interpolate class members toward one of their k nearest neighbours.

    Neighbours are found by Euclidean distance on flattened samples. The
    mixing weight is uniform on [0, 1] unless ``lam`` fixes it.
    """
    members = [b for b in dataset if b.label == class_id]
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(members) < k + 1:
        raise ValueError(f"class {class_id} has {len(members)} beats, need at least {k + 1}")
    flat = np.stack([b.samples.ravel() for b in members])
    sq = np.sum(flat * flat, axis=1)
    dist = sq[:, None] + sq[None, :] - 2.0 * flat @ flat.T
    np.fill_diagonal(dist, np.inf)
    neighbours = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rng = np.random.default_rng(seed)
    shape = members[0].samples.shape
    out = []
    for _ in range(n_new):
        i = int(rng.integers(len(members)))
        j = int(neighbours[i, rng.integers(k)])
        w = rng.uniform(0.0, 1.0) if lam is None else float(lam)
        x = flat[i] + w * (flat[j] - flat[i])
        out.append(
            BeatTensor(x.reshape(shape), class_id, members[i].sample_rate,
                       f"smote:{members[i].source_id}")
        )
    return out
