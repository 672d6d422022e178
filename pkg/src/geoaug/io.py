"""Binary beat container, digest-checked cost cache, CSV import and
per-class dataset statistics.

Beats file layout (little-endian)::

    magic "ECGB" | u16 version | u32 n_beats | u32 n_leads | u32 beat_len | f64 sample_rate
    per beat: i32 label | u16 len | source_id utf-8 | f32[n_leads * beat_len] (lead-major)

Cost cache layout::

    magic "WCST" | u16 version | 32-byte SHA-256 digest | u32 n | u32 m | f64[n * m] (row-major)
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
import tempfile
from collections import defaultdict
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .beats import BeatTensor, pairwise_cost
from .signal import RawRecord

BEATS_MAGIC = b"ECGB"
CACHE_MAGIC = b"WCST"
VERSION = 1
_HEADER = struct.Struct("<4sHIIId")
_BEAT_HEAD = struct.Struct("<iH")
_CACHE_HEAD = struct.Struct("<4sH32sII")


class FormatError(ValueError):
    """A file does not follow the expected binary layout."""


def encode_beats(beats):
    """Serialize beats to the ECGB byte layout. Samples are stored as float32."""
    beats = list(beats)
    if beats:
        shapes = {b.samples.shape for b in beats}
        rates = {float(b.sample_rate) for b in beats}
        if len(shapes) != 1 or len(rates) != 1:
            raise ValueError("all beats in a file must share shape and sample rate")
        (n_leads, beat_len), rate = shapes.pop(), rates.pop()
    else:
        n_leads = beat_len = 0
        rate = 0.0
    parts = [_HEADER.pack(BEATS_MAGIC, VERSION, len(beats), n_leads, beat_len, rate)]
    for b in beats:
        sid = b.source_id.encode("utf-8")
        if len(sid) > 0xFFFF:
            raise ValueError("source_id longer than 65535 bytes")
        parts.append(_BEAT_HEAD.pack(b.label, len(sid)))
        parts.append(sid)
        parts.append(np.ascontiguousarray(b.samples, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_beats(data):
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated beats file: {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, n_beats, n_leads, beat_len, rate = _HEADER.unpack_from(data, 0)
    if magic != BEATS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {BEATS_MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported beats file version {version}")
    pos = _HEADER.size
    n_vals = n_leads * beat_len
    beats = []
    for k in range(n_beats):
        if pos + _BEAT_HEAD.size > len(data):
            raise FormatError(f"truncated payload at beat {k} of {n_beats}")
        label, sid_len = _BEAT_HEAD.unpack_from(data, pos)
        pos += _BEAT_HEAD.size
        end = pos + sid_len + 4 * n_vals
        if end > len(data):
            raise FormatError(f"truncated payload at beat {k} of {n_beats}")
        sid = data[pos : pos + sid_len].decode("utf-8")
        samples = np.frombuffer(data, dtype="<f4", count=n_vals, offset=pos + sid_len)
        beats.append(
            BeatTensor(samples.astype(np.float64).reshape(n_leads, beat_len), label, rate, sid)
        )
        pos = end
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after {n_beats} declared beats")
    return beats


def save_beats(path, beats):
    _atomic_write(path, encode_beats(beats))


def load_beats(path):
    with open(path, "rb") as fh:
        return decode_beats(fh.read())


def save_records(path, records):
    """Records go into the beats container, one entry per record (record_id as source_id)."""
    save_beats(
        path, [BeatTensor(r.samples, r.label, r.sample_rate, r.record_id) for r in records]
    )


def load_records(path):
    return [RawRecord(b.samples, b.sample_rate, b.source_id, b.label) for b in load_beats(path)]


def _atomic_write(path, payload):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cost_digest(batch_a, batch_b, metric_config):
    """SHA-256 over both beat payloads and the canonical JSON of the metric settings."""
    h = hashlib.sha256()
    for batch in (batch_a, batch_b):
        payload = encode_beats(batch)
        h.update(struct.pack("<Q", len(payload)))
        h.update(payload)
    h.update(json.dumps(metric_config, sort_keys=True).encode("utf-8"))
    return h.digest()


def save_cost_cache(path, matrix, digest):
    m = np.ascontiguousarray(matrix, dtype="<f8")
    if m.ndim != 2 or len(digest) != 32:
        raise ValueError("need a 2-D matrix and a 32-byte digest")
    head = _CACHE_HEAD.pack(CACHE_MAGIC, VERSION, digest, m.shape[0], m.shape[1])
    _atomic_write(path, head + m.tobytes())


def read_cost_cache(path):
    """Returns ``(digest, matrix)``; raises FormatError on a malformed file."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _CACHE_HEAD.size:
        raise FormatError("truncated cost cache header")
    magic, version, digest, n, m = _CACHE_HEAD.unpack_from(data, 0)
    if magic != CACHE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CACHE_MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported cost cache version {version}")
    if len(data) != _CACHE_HEAD.size + 8 * n * m:
        raise FormatError(f"cost cache payload does not hold {n}x{m} entries")
    matrix = np.frombuffer(data, dtype="<f8", offset=_CACHE_HEAD.size).reshape(n, m).copy()
    return digest, matrix


def cached_pairwise_cost(path, batch_a, batch_b, lead_weights=None, grid_len=None, n_jobs=1):
    """Pairwise beat-shape costs, reused from ``path`` only when its digest matches.

    Returns ``(matrix, hit)``. A missing, malformed or stale cache is
    recomputed and atomically replaced.
    """
    config = {
        "metric": "beat-shape",
        "grid_len": grid_len,
        "lead_weights": None if lead_weights is None else [float(w) for w in lead_weights],
    }
    digest = cost_digest(batch_a, batch_b, config)
    if os.path.exists(path):
        try:
            stored, matrix = read_cost_cache(path)
            if stored == digest:
                return matrix, True
        except FormatError:
            pass
    matrix = pairwise_cost(batch_a, batch_b, lead_weights, grid_len, n_jobs).matrix
    save_cost_cache(path, matrix, digest)
    return matrix, False


def import_csv(path, n_leads=None, sample_rate=100.0, record_id=None):
    """Read one record from CSV: rows are time steps, columns are leads.

    A first row that does not parse as numbers is taken as a header.
    ``n_leads=None`` takes the column count from the first data row.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise ValueError(f"{path}: line {lineno}: non-numeric cell") from None
            if n_leads is None:
                n_leads = len(values)
            if len(values) != n_leads:
                raise ValueError(
                    f"{path}: line {lineno}: ragged row with {len(values)} columns, expected {n_leads}"
                )
            if not all(np.isfinite(values)):
                raise ValueError(f"{path}: line {lineno}: non-finite value")
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    rid = record_id if record_id is not None else os.path.splitext(os.path.basename(path))[0]
    return [RawRecord(np.asarray(rows).T, sample_rate, rid)]


def _pct(count, total):
    return float((Decimal(100 * count) / Decimal(total)).quantize(Decimal("0.1"), ROUND_HALF_UP))


def summarize_counts(beat_counts, patient_counts, class_names=None):
    """Per-class beat/patient counts with shares in percent, rounded half-up to one decimal."""
    classes = sorted(beat_counts)
    total_b = sum(beat_counts.values())
    total_p = sum(patient_counts.values())
    if total_b == 0:
        raise ValueError("empty dataset")
    rows = []
    for c in classes:
        rows.append(
            {
                "class": c,
                "name": class_names[c] if class_names and c < len(class_names) else str(c),
                "beats": beat_counts[c],
                "beat_pct": _pct(beat_counts[c], total_b),
                "patients": patient_counts.get(c, 0),
                "patient_pct": _pct(patient_counts.get(c, 0), total_p) if total_p else 0.0,
            }
        )
    return {
        "classes": rows,
        "total_beats": total_b,
        "total_patients": total_p,
        "beat_pct_sum": round(sum(r["beat_pct"] for r in rows), 1),
        "patient_pct_sum": round(sum(r["patient_pct"] for r in rows), 1),
    }


def dataset_summary(beats, class_names=None):
    """Beat counts and distinct-source_id patient counts per class."""
    if not beats:
        raise ValueError("empty dataset")
    n_beats = defaultdict(int)
    patients = defaultdict(set)
    for b in beats:
        n_beats[b.label] += 1
        patients[b.label].add(b.source_id)
    return summarize_counts(
        dict(n_beats), {c: len(s) for c, s in patients.items()}, class_names
    )


def format_summary(summary):
    lines = [f"{'class':<8}{'patients':>10}{'%':>7}{'beats':>10}{'%':>7}"]
    for r in summary["classes"]:
        lines.append(
            f"{r['name']:<8}{r['patients']:>10}{r['patient_pct']:>7.1f}{r['beats']:>10}{r['beat_pct']:>7.1f}"
        )
    lines.append(
        f"{'total':<8}{summary['total_patients']:>10}{summary['patient_pct_sum']:>7.1f}"
        f"{summary['total_beats']:>10}{summary['beat_pct_sum']:>7.1f}"
    )
    return "\n".join(lines)
