"""Flat ``key = value`` run configuration."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _opt_float(text):
    return None if text.strip().lower() in ("", "auto", "none") else float(text)


@dataclass(frozen=True)
class RunConfig:
    # preprocessing
    window_n: int = 5
    notch_hz: float = 50.0
    notch_q: float = 30.0
    detect_lead: int = 1
    pre_s: float = 0.5
    post_s: float = 0.5
    fs_out: float = 50.0
    # metric and transport
    grid_len: int = 50
    lam: float | None = None  # "lambda" in the file; auto = 1e-2 * max cost
    # augmentation
    source_class: int = 0
    alpha_min: float = 0.5
    alpha_max: float = 0.9
    batch_source: int = 16
    batch_target: int = 16
    n_augment: int = 0  # per minority class; 0 tops each class up to the majority count
    pairing: str = "sample-proportional"
    label_policy: str = "target"
    smote_k: int = 5
    # training and attack
    test_fraction: float = 0.2
    lr: float = 0.1
    l2: float = 1e-4
    epochs: int = 500
    epsilons: tuple = (0.001, 0.002, 0.003, 0.004)
    pgd_steps: int = 10
    pgd_step_size: float | None = None
    seed: int = 0
    # synthetic data
    synth_counts: tuple = (1000, 100, 100)
    synth_leads: int = 3
    synth_beats_per_patient: int = 5
    csv_sample_rate: float = 100.0

    def __post_init__(self):
        checks = [
            (self.window_n >= 1 and self.window_n % 2 == 1, "window_n must be odd and >= 1"),
            (self.notch_q > 0, "notch_q must be > 0"),
            (self.pre_s > 0 and self.post_s > 0, "pre_s and post_s must be > 0"),
            (self.fs_out > 0, "fs_out must be > 0"),
            (self.grid_len >= 2, "grid_len must be >= 2"),
            (self.lam is None or self.lam > 0, "lambda must be > 0"),
            (0 <= self.alpha_min <= self.alpha_max <= 1, "need 0 <= alpha_min <= alpha_max <= 1"),
            (self.batch_source >= 1 and self.batch_target >= 1, "batch sizes must be >= 1"),
            (self.n_augment >= 0, "n_augment must be >= 0"),
            (0 < self.test_fraction < 1, "test_fraction must lie in (0, 1)"),
            (self.lr > 0 and self.l2 >= 0 and self.epochs >= 0, "need lr > 0, l2 >= 0, epochs >= 0"),
            (all(e >= 0 for e in self.epsilons), "epsilons must be >= 0"),
            (self.pgd_steps >= 1, "pgd_steps must be >= 1"),
            (self.smote_k >= 1, "smote_k must be >= 1"),
            (all(c >= 1 for c in self.synth_counts), "synth_counts must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            key = _FILE_KEY.get(f.name, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif v is None:
                v = "auto"
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self):
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    def with_seed(self, seed):
        return self if seed is None else replace(self, seed=int(seed))


_FILE_KEY = {"lam": "lambda"}
_FIELD = {v: k for k, v in _FILE_KEY.items()}
_PARSERS = {
    "lam": _opt_float,
    "pgd_step_size": _opt_float,
    "epsilons": _floats,
    "synth_counts": _ints,
}


def parse_config(text):
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown or repeated keys are errors."""
    values = {}
    types = {f.name: type(f.default) for f in fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        name = _FIELD.get(key, key)
        if name not in types or key in _FILE_KEY:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if name in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        try:
            if name in _PARSERS:
                values[name] = _PARSERS[name](value)
            elif types[name] is bool:
                values[name] = value.lower() in ("1", "true", "yes")
            else:
                values[name] = types[name](value)
        except ValueError as exc:
            raise ValueError(f"config line {lineno}: bad value for {key!r}: {exc}") from None
    return RunConfig(**values)


def load_config(path):
    if path is None:
        return RunConfig()
    with open(path) as fh:
        return parse_config(fh.read())
