"""Softmax-linear classifier, l-infinity PGD, and rank/count metrics."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.special import log_softmax, softmax
from scipy.stats import rankdata

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class ClassifierModel:
    weights: np.ndarray  # (n_classes, dim), acts on standardized features
    bias: np.ndarray
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)
        if w.ndim != 2 or b.shape != (w.shape[0],) or not (mean.shape == std.shape == (w.shape[1],)):
            raise ValueError("inconsistent classifier parameter shapes")
        if not all(np.all(np.isfinite(v)) for v in (w, b, mean, std)):
            raise ValueError("classifier parameters must be finite")
        for name, v in (("weights", w), ("bias", b), ("mean", mean), ("std", std)):
            object.__setattr__(self, name, v)

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]

    def standardize(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected (n, {self.dim}) features, got {X.shape}")
        return (X - self.mean) / self.std

    def logits(self, X):
        return self.standardize(X) @ self.weights.T + self.bias


@dataclass(frozen=True)
class AttackSpec:
    epsilon: float = 0.001
    steps: int = 10
    step_size: float | None = None  # None: 2.5 * epsilon / steps
    seed: int = 0
    random_start: bool = False

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be > 0")

    @property
    def step(self):
        return self.step_size if self.step_size is not None else 2.5 * self.epsilon / self.steps


@dataclass
class MetricsReport:
    auroc_macro: float | None
    f1_macro: float
    per_class_auroc: list
    per_class_f1: list
    confusion: list
    epsilon: float

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=False)


def _check_xy(X, y, n_classes=None):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"need X (n, d) and y (n,), got {X.shape} and {y.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(y == np.round(y)):
            raise ValueError("labels must be integers")
        y = y.astype(int)
    if np.any(y < 0) or (n_classes is not None and np.any(y >= n_classes)):
        raise ValueError("labels outside the class set")
    return X, y


def _one_hot(y, k):
    out = np.zeros((len(y), k))
    out[np.arange(len(y)), y] = 1.0
    return out


def objective(W, b, Z, Y, l2):
    """Mean cross-entropy plus ``l2/2 ||W||^2`` on standardized inputs, with gradients."""
    logp = log_softmax(Z @ W.T + b, axis=1)
    n = len(Z)
    loss = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(W * W)
    G = (np.exp(logp) - Y) / n
    return loss, G.T @ Z + l2 * W, G.sum(axis=0)


def stable_lr(Z, l2):
    """Step size ``1/L`` for the smoothness constant L of ``objective``.

    The softmax cross-entropy Hessian in the logits is bounded by I/2, so
    L <= 0.5 * sigma_max([Z, 1])^2 / n + l2; gradient descent decreases the
    loss for any step below 2/L.
    """
    aug = np.hstack([Z, np.ones((len(Z), 1))])
    smax = np.linalg.norm(aug, ord=2)
    return 1.0 / (0.5 * smax * smax / len(Z) + l2)


def train_softmax(X, y, lr=0.1, l2=1e-4, epochs=500, seed=0, n_classes=None, history=None):
    """Full-batch gradient descent on standardized features.

    The step is ``min(lr, stable_lr)`` so the loss never increases.
    Weights start at N(0, 0.01^2) draws from ``seed``. Pass a list as
    ``history`` to collect the loss before every epoch and after the last.
    """
    X, y = _check_xy(X, y)
    k = int(n_classes or y.max() + 1)
    if len(np.unique(y)) < 2:
        raise ValueError("training data must contain at least two classes")
    if y.max() >= k:
        raise ValueError("labels outside the class set")
    if not lr > 0 or l2 < 0 or epochs < 0:
        raise ValueError("need lr > 0, l2 >= 0, epochs >= 0")
    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), STD_FLOOR)
    Z = (X - mean) / std
    Y = _one_hot(y, k)
    step = min(lr, stable_lr(Z, l2))
    rng = np.random.default_rng(seed)
    W = 0.01 * rng.standard_normal((k, X.shape[1]))
    b = np.zeros(k)
    for _ in range(epochs):
        loss, gW, gb = objective(W, b, Z, Y, l2)
        if history is not None:
            history.append(loss)
        W -= step * gW
        b -= step * gb
    if history is not None:
        history.append(objective(W, b, Z, Y, l2)[0])
    return ClassifierModel(W, b, mean, std)


def predict_proba(model, X):
    return softmax(model.logits(X), axis=1)


def input_gradient(model, X, y):
    """Per-sample gradient of the cross-entropy loss w.r.t. standardized inputs, and the losses."""
    Z = model.standardize(X)
    logp = log_softmax(Z @ model.weights.T + model.bias, axis=1)
    Y = _one_hot(y, model.n_classes)
    return (np.exp(logp) - Y) @ model.weights, -np.sum(Y * logp, axis=1)


def sample_losses(model, X, y):
    logp = log_softmax(model.logits(X), axis=1)
    return -logp[np.arange(len(y)), y]


def pgd_attack(model, X, y, spec):
    """Best-iterate l-infinity PGD in standardized feature units.

    Ascends ``sign`` of the input gradient with ``spec.step``, projecting
    onto the epsilon box around the clean point after every step. The
    returned point of each sample is the highest-loss iterate seen, the
    clean input included. Output is in the raw feature units of ``X``.
    """
    X, y = _check_xy(X, y, model.n_classes)
    if spec.epsilon == 0:
        return X.copy()
    eps = spec.epsilon
    delta = np.zeros_like(X)
    if spec.random_start:
        delta = np.random.default_rng(spec.seed).uniform(-eps, eps, X.shape)
    best = X.copy()
    best_loss = sample_losses(model, X, y)
    for _ in range(spec.steps):
        cur = X + delta * model.std
        grad, loss = input_gradient(model, cur, y)
        better = loss > best_loss
        best[better] = cur[better]
        best_loss[better] = loss[better]
        delta = np.clip(delta + spec.step * np.sign(grad), -eps, eps)
    cur = X + delta * model.std
    loss = sample_losses(model, cur, y)
    better = loss > best_loss
    best[better] = cur[better]
    return best


def auroc(scores, y, n_classes=None):
    """One-vs-rest Mann-Whitney AUROC per class with midranks for ties.

    Classes lacking positives or negatives get ``None`` and are left out of
    the macro mean (``None`` if no class is defined).
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(y)
    if scores.ndim == 1:
        scores = scores[:, None]
    k = n_classes or scores.shape[1]
    per = []
    for c in range(k):
        pos = y == c
        n_pos = int(pos.sum())
        n_neg = len(y) - n_pos
        if n_pos == 0 or n_neg == 0:
            per.append(None)
            continue
        ranks = rankdata(scores[:, c if scores.shape[1] > 1 else 0])
        u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
        per.append(float(u / (n_pos * n_neg)))
    defined = [a for a in per if a is not None]
    return per, (float(np.mean(defined)) if defined else None)


def f1_and_confusion(pred, y, n_classes):
    """Per-class F1 (0 when precision + recall is 0), their mean, and the confusion counts."""
    pred = np.asarray(pred)
    y = np.asarray(y)
    if pred.shape != y.shape:
        raise ValueError("pred and y differ in length")
    for name, v in (("pred", pred), ("truth", y)):
        if len(v) and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"{name} label outside 0..{n_classes - 1}")
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (y, pred), 1)
    tp = np.diag(conf).astype(float)
    col = conf.sum(axis=0)
    row = conf.sum(axis=1)
    per = []
    for c in range(n_classes):
        p = tp[c] / col[c] if col[c] else 0.0
        r = tp[c] / row[c] if row[c] else 0.0
        per.append(float(2 * p * r / (p + r)) if p + r > 0 else 0.0)
    return per, float(np.mean(per)), conf


def evaluate(model, X, y, epsilon=0.0):
    proba = predict_proba(model, X)
    per_auc, macro_auc = auroc(proba, y, model.n_classes)
    per_f1, macro_f1, conf = f1_and_confusion(proba.argmax(axis=1), y, model.n_classes)
    return MetricsReport(macro_auc, macro_f1, per_auc, per_f1, conf.tolist(), float(epsilon))


def robustness_sweep(model, X, y, epsilons, attack=None):
    """One report per epsilon, in the given order; epsilon 0 is the clean evaluation."""
    attack = attack or AttackSpec()
    rows = []
    for eps in epsilons:
        if eps == 0:
            rows.append(evaluate(model, X, y, 0.0))
        else:
            adv = pgd_attack(model, X, y, replace(attack, epsilon=float(eps)))
            rows.append(evaluate(model, adv, y, eps))
    return rows
