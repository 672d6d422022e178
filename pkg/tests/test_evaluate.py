import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geoaug.evaluate import (
    AttackSpec,
    ClassifierModel,
    MetricsReport,
    auroc,
    evaluate,
    f1_and_confusion,
    input_gradient,
    objective,
    pgd_attack,
    predict_proba,
    robustness_sweep,
    sample_losses,
    stable_lr,
    train_softmax,
)


def blobs(rng, n=100, sep=6.0, k=2, dim=2):
    y = np.arange(n) % k
    centers = rng.normal(size=(k, dim)) * sep
    return centers[y] + rng.normal(size=(n, dim)), y


def random_model(rng, k=3, d=4):
    return ClassifierModel(rng.normal(size=(k, d)), rng.normal(size=k), rng.normal(size=d),
                           rng.uniform(0.5, 2.0, d))


# --- training -------------------------------------------------------------------

def test_blobs_fit_perfectly(rng):
    X, y = blobs(rng)
    model = train_softmax(X, y, epochs=300)
    assert np.mean(predict_proba(model, X).argmax(1) == y) == 1.0


def test_loss_non_increasing(rng):
    X, y = blobs(rng, n=60, sep=1.0, k=3, dim=5)
    hist = []
    train_softmax(X, y, lr=10.0, epochs=200, history=hist)
    assert len(hist) == 201
    assert np.all(np.diff(hist) <= 1e-12)


def test_ridge_shrinkage(rng):
    X, y = blobs(rng, n=80, sep=1.5, k=3, dim=4)
    norms = [np.linalg.norm(train_softmax(X, y, l2=l2, epochs=3000, lr=1.0).weights)
             for l2 in (1e-3, 1e-2, 1e-1, 1.0)]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_training_deterministic_and_errors(rng):
    X, y = blobs(rng, n=30)
    a, b = train_softmax(X, y, seed=3, epochs=20), train_softmax(X, y, seed=3, epochs=20)
    assert np.array_equal(a.weights, b.weights)
    with pytest.raises(ValueError, match="two classes"):
        train_softmax(X, np.zeros(30, dtype=int))
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        train_softmax(bad, y)
    with pytest.raises(ValueError):
        train_softmax(X, y[:-1])


def test_objective_gradient_finite_differences(rng):
    Z = rng.normal(size=(7, 4))
    Y = np.eye(3)[rng.integers(0, 3, 7)]
    W, b = rng.normal(size=(3, 4)), rng.normal(size=3)
    _, gW, gb = objective(W, b, Z, Y, 0.3)
    h = 1e-5
    for idx in np.ndindex(W.shape):
        E = np.zeros_like(W)
        E[idx] = h
        fd = (objective(W + E, b, Z, Y, 0.3)[0] - objective(W - E, b, Z, Y, 0.3)[0]) / (2 * h)
        assert abs(fd - gW[idx]) <= 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (objective(W, b + e, Z, Y, 0.3)[0] - objective(W, b - e, Z, Y, 0.3)[0]) / (2 * h)
        assert abs(fd - gb[i]) <= 1e-6


def test_input_gradient_finite_differences(rng):
    model = random_model(rng)
    X = rng.normal(size=(5, 4))
    y = rng.integers(0, 3, 5)
    grad, losses = input_gradient(model, X, y)
    assert np.allclose(losses, sample_losses(model, X, y))
    h = 1e-5
    for n in range(5):
        for j in range(4):
            # gradient is w.r.t. standardized coordinates
            step = np.zeros(4)
            step[j] = h * model.std[j]
            up = sample_losses(model, (X[n] + step)[None], y[n : n + 1])[0]
            dn = sample_losses(model, (X[n] - step)[None], y[n : n + 1])[0]
            assert abs((up - dn) / (2 * h) - grad[n, j]) <= 1e-6


def test_stable_lr_bound(rng):
    Z = rng.normal(size=(20, 3))
    assert stable_lr(Z, 0.0) == pytest.approx(2 * 20 / np.linalg.norm(np.hstack([Z, np.ones((20, 1))]), 2) ** 2)


# --- prediction -----------------------------------------------------------------

def test_proba_properties(rng):
    zero = ClassifierModel(np.zeros((4, 3)), np.zeros(4), np.zeros(3), np.ones(3))
    assert np.allclose(predict_proba(zero, rng.normal(size=(5, 3))), 0.25)
    model = random_model(rng)
    X = rng.normal(size=(10, 4))
    p = predict_proba(model, X)
    assert np.all(p >= 0) and np.allclose(p.sum(1), 1.0, atol=1e-9)
    assert np.array_equal(p.argmax(1), model.logits(X).argmax(1))
    shifted = ClassifierModel(model.weights, model.bias + 7.0, model.mean, model.std)
    assert np.allclose(predict_proba(shifted, X), p, atol=1e-12)
    with pytest.raises(ValueError):
        predict_proba(model, rng.normal(size=(2, 5)))


def test_model_validation():
    m = ClassifierModel(np.ones((2, 2)), np.zeros(2), np.zeros(2), np.zeros(2))
    assert np.all(m.std == 1e-8)
    with pytest.raises(ValueError):
        ClassifierModel(np.ones((2, 2)), np.zeros(3), np.zeros(2), np.ones(2))
    with pytest.raises(ValueError):
        ClassifierModel(np.full((2, 2), np.inf), np.zeros(2), np.zeros(2), np.ones(2))


# --- attack ---------------------------------------------------------------------

def test_attack_spec_validation():
    assert AttackSpec(epsilon=0.01, steps=5).step == pytest.approx(0.005)
    with pytest.raises(ValueError):
        AttackSpec(epsilon=-1.0)
    with pytest.raises(ValueError):
        AttackSpec(steps=0)
    with pytest.raises(ValueError):
        AttackSpec(step_size=0.0)


def test_pgd_zero_radius(rng):
    model = random_model(rng)
    X = rng.normal(size=(6, 4))
    assert np.array_equal(pgd_attack(model, X, rng.integers(0, 3, 6), AttackSpec(epsilon=0.0)), X)


@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1.0), st.booleans())
def test_pgd_feasible_and_not_worse(seed, eps, random_start):
    r = np.random.default_rng(seed)
    model = random_model(r)
    X = r.normal(size=(8, 4))
    y = r.integers(0, 3, 8)
    adv = pgd_attack(model, X, y, AttackSpec(epsilon=eps, steps=5, seed=seed, random_start=random_start))
    assert np.max(np.abs(model.standardize(adv) - model.standardize(X))) <= eps * (1 + 1e-9)
    assert np.all(sample_losses(model, adv, y) >= sample_losses(model, X, y))


def test_pgd_single_step_is_fgsm(rng):
    model = random_model(rng)
    X = rng.normal(size=(6, 4))
    y = rng.integers(0, 3, 6)
    eps = 0.05
    grad, _ = input_gradient(model, X, y)
    adv = pgd_attack(model, X, y, AttackSpec(epsilon=eps, steps=1, step_size=2 * eps))
    assert np.allclose(adv, X + eps * np.sign(grad) * model.std, atol=1e-12)


# --- metrics ----------------------------------------------------------------------

def test_auroc_examples():
    y = np.array([1, 1, 0, 0])
    per, macro = auroc(np.array([0.9, 0.8, 0.7, 0.8]), (y == 1).astype(int), 2)
    assert per[1] == pytest.approx(0.875)
    assert auroc(np.array([0.1, 0.2, 0.8, 0.9]), y, 2)[0][1] == 0.0
    assert auroc(np.array([0.9, 0.8, 0.2, 0.1]), y, 2)[0][1] == 1.0


def test_auroc_degenerate_and_macro(rng):
    scores = rng.uniform(size=(10, 3))
    y = np.array([0, 1] * 5)
    per, macro = auroc(scores, y, 3)
    assert per[2] is None
    assert macro == pytest.approx(np.mean(per[:2]))
    assert auroc(scores[:, :1], np.zeros(10, int), 1) == ([None], None)


def test_auroc_matches_pair_count(rng):
    s = rng.integers(0, 5, 40).astype(float)
    y = rng.integers(0, 2, 40)
    pos, neg = s[y == 1], s[y == 0]
    pairs = np.mean([(p > n) + 0.5 * (p == n) for p in pos for n in neg])
    assert auroc(s, y, 2)[0][1] == pytest.approx(pairs)


@given(st.integers(0, 2**32 - 1))
def test_auroc_monotone_invariance(seed):
    r = np.random.default_rng(seed)
    s = r.normal(size=30)
    y = np.r_[0, 1, r.integers(0, 2, 28)]
    assert auroc(np.exp(3 * s), y, 2)[0] == auroc(s, y, 2)[0]


def test_f1_examples():
    per, macro, conf = f1_and_confusion(np.array([0, 1, 2, 1]), np.array([0, 1, 2, 1]), 3)
    assert per == [1.0, 1.0, 1.0] and np.array_equal(conf, np.diag([1, 2, 1]))
    per, macro, conf = f1_and_confusion(np.zeros(4, int), np.array([0, 0, 1, 1]), 2)
    assert per[0] == pytest.approx(2 / 3) and per[1] == 0.0 and macro == pytest.approx(1 / 3)
    assert conf.sum(axis=1).tolist() == [2, 2]
    with pytest.raises(ValueError):
        f1_and_confusion(np.array([0, 3]), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        f1_and_confusion(np.array([0]), np.array([0, 1]), 2)


def test_evaluate_report(rng):
    X, y = blobs(rng, n=60, sep=2.0, k=3, dim=3)
    model = train_softmax(X, y, epochs=100)
    rep = evaluate(model, X, y)
    d = json.loads(rep.to_json())
    assert list(d) == ["auroc_macro", "f1_macro", "per_class_auroc", "per_class_f1", "confusion", "epsilon"]
    assert np.sum(rep.confusion, axis=1).tolist() == np.bincount(y).tolist()
    assert 0 <= rep.auroc_macro <= 1 and 0 <= rep.f1_macro <= 1
    assert isinstance(rep, MetricsReport)


def test_sweep_rows_and_clean_row(rng):
    X, y = blobs(rng, n=60, sep=1.0, k=3, dim=3)
    model = train_softmax(X, y, epochs=100)
    rows = robustness_sweep(model, X, y, [0.0, 0.3, 0.1])
    assert [r.epsilon for r in rows] == [0.0, 0.3, 0.1]
    assert rows[0] == evaluate(model, X, y)


def test_attack_lowers_auroc_on_toy_data():
    drops = []
    for seed in range(5):
        r = np.random.default_rng(seed)
        X, y = blobs(r, n=100, sep=1.5, k=2, dim=4)
        model = train_softmax(X, y, epochs=200, seed=seed)
        clean, attacked = robustness_sweep(model, X, y, [0.0, 0.5], AttackSpec(steps=10))
        drops.append(clean.auroc_macro - attacked.auroc_macro)
    assert np.median(drops) >= 0
