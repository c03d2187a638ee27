"""Dataset bundle persistence.

A bundle is a directory holding

* ``manifest.txt`` -- human-readable key/value metadata (sweeps, split
  indices, normalization constants, probe settings), floats written with
  ``repr`` so they round-trip exactly;
* ``samples.bin``  -- binary sample store, little-endian throughout:

      magic   8 bytes  b"INRTDS01"
      count   uint64
      then per sample:
          label   float64
          ndim    uint8
          dims    uint32 * ndim
          data    float32 * prod(dims), row-major
          crc     uint32, CRC-32 of the preceding record bytes

Writing the same dataset twice produces byte-identical files (no
timestamps, stable key order), so bundles can be diffed and cached.
"""

from __future__ import annotations

import hashlib
import math
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import BundleFormatError
from .features import FeatureId
from .pipeline import Dataset, Sample

MAGIC = b"INRTDS01"

MANIFEST_NAME = "manifest.txt"
SAMPLES_NAME = "samples.bin"


def _fmt_floats(values):
    return " ".join(repr(float(v)) for v in values)


def save_bundle(dataset, out_dir):
    """Write a dataset bundle; returns the directory path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        "format INRTDS01",
        f"case {dataset.case_name}",
        f"rate {dataset.rate!r}",
        f"window {_fmt_floats(dataset.window)}",
        f"snr_db {'none' if dataset.snr_db is None else repr(dataset.snr_db)}",
        f"seed {dataset.seed}",
        f"buses {' '.join(str(b) for b in dataset.buses)}",
        f"features {' '.join(f.value for f in dataset.features)}",
        f"sweep_h {_fmt_floats(dataset.sweep_h)}",
        f"sweep_pe {_fmt_floats(dataset.sweep_pe)}",
        "probe " + " ".join(
            f"{k}={dataset.probe[k]!r}" for k in sorted(dataset.probe)),
        f"n_samples {dataset.n_samples}",
        f"train {' '.join(str(i) for i in dataset.train_idx)}",
        f"val {' '.join(str(i) for i in dataset.val_idx)}",
    ]
    if dataset.is_normalized:
        lines.append(f"norm_min {_fmt_floats(dataset.norm_min.ravel())}")
        lines.append(f"norm_max {_fmt_floats(dataset.norm_max.ravel())}")
    for key in sorted(dataset.meta):
        lines.append(f"meta {key}={dataset.meta[key]!r}")
    (out / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="ascii")

    with open(out / SAMPLES_NAME, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", dataset.n_samples))
        for s in dataset.samples:
            fh.write(_encode_record(s.label, s.tensor))
    return out


def _encode_record(label, tensor):
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    rec = struct.pack("<d", float(label))
    rec += struct.pack("<B", arr.ndim)
    rec += struct.pack(f"<{arr.ndim}I", *arr.shape)
    rec += arr.tobytes()
    return rec + struct.pack("<I", zlib.crc32(rec) & 0xFFFFFFFF)


def save_trace(path, label, tensor):
    """Write a single tensor as a one-record file in the samples format
    (used for full-resolution trace export)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", 1))
        fh.write(_encode_record(label, tensor))


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise BundleFormatError(f"truncated bundle: while reading {what}")
    return buf


def load_bundle(path):
    """Load a bundle directory back into a Dataset (tensors bit-exact)."""
    root = Path(path)
    manifest = root / MANIFEST_NAME
    samples_file = root / SAMPLES_NAME
    if not manifest.is_file() or not samples_file.is_file():
        raise BundleFormatError(
            f"{root} is not a dataset bundle (missing "
            f"{MANIFEST_NAME} or {SAMPLES_NAME})")

    fields = {}
    meta = {}
    for lineno, raw in enumerate(manifest.read_text(encoding="ascii")
                                 .splitlines(), start=1):
        if not raw.strip():
            continue
        key, _, rest = raw.partition(" ")
        if key == "meta":
            mkey, _, mval = rest.partition("=")
            meta[mkey] = _parse_literal(mval)
        else:
            fields[key] = rest
    for required in ("format", "rate", "window", "buses", "features",
                     "n_samples", "train", "val"):
        if required not in fields:
            raise BundleFormatError(f"{manifest}: missing field {required!r}")
    if fields["format"] != "INRTDS01":
        raise BundleFormatError(
            f"{manifest}: unsupported format {fields['format']!r}")

    by_value = {f.value: f for f in FeatureId}
    try:
        features = tuple(by_value[v] for v in fields["features"].split())
    except KeyError as exc:
        raise BundleFormatError(f"{manifest}: unknown feature {exc}") from None
    buses = tuple(int(b) for b in fields["buses"].split())
    n_samples = int(fields["n_samples"])
    window = tuple(float(v) for v in fields["window"].split())
    snr = fields.get("snr_db", "none")
    probe = {}
    for item in fields.get("probe", "").split():
        k, _, v = item.partition("=")
        probe[k] = _parse_literal(v)

    labels, tensors = _read_samples(samples_file, n_samples)
    shape = (len(buses), len(features))
    norm_min = norm_max = None
    if "norm_min" in fields:
        norm_min = np.array([float(v) for v in fields["norm_min"].split()])
        norm_max = np.array([float(v) for v in fields["norm_max"].split()])
        if norm_min.size != shape[0] * shape[1]:
            raise BundleFormatError(
                f"{manifest}: norm_min has {norm_min.size} entries, "
                f"expected {shape[0] * shape[1]}")
        norm_min = norm_min.reshape(shape)
        norm_max = norm_max.reshape(shape)

    samples = tuple(Sample(label=lab, tensor=t)
                    for lab, t in zip(labels, tensors))
    for s in samples:
        if s.tensor.shape[:2] != shape:
            raise BundleFormatError(
                f"{samples_file}: sample tensor shape {s.tensor.shape} does "
                f"not match manifest channels {shape}")
    return Dataset(
        case_name=fields.get("case", "case"),
        buses=buses, features=features,
        rate=float(fields["rate"]), window=window,
        snr_db=None if snr == "none" else float(snr),
        seed=int(fields.get("seed", 0)),
        samples=samples,
        train_idx=tuple(int(i) for i in fields["train"].split()),
        val_idx=tuple(int(i) for i in fields["val"].split()),
        norm_min=norm_min, norm_max=norm_max,
        sweep_h=tuple(float(v) for v in fields.get("sweep_h", "").split()),
        sweep_pe=tuple(float(v) for v in fields.get("sweep_pe", "").split()),
        probe=probe, meta=meta)


def _parse_literal(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.startswith("'") and text.endswith("'"):
        return text[1:-1]
    return text


def _read_samples(path, n_expected):
    labels = []
    tensors = []
    with open(path, "rb") as fh:
        magic = _read_exact(fh, len(MAGIC), "magic")
        if magic != MAGIC:
            raise BundleFormatError(
                f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        (count,) = struct.unpack("<Q", _read_exact(fh, 8, "sample count"))
        if count != n_expected:
            raise BundleFormatError(
                f"{path}: holds {count} samples but manifest says {n_expected}")
        for k in range(count):
            rec = _read_exact(fh, 9, f"record {k} header")
            (label,) = struct.unpack("<d", rec[:8])
            ndim = rec[8]
            dims_raw = _read_exact(fh, 4 * ndim, f"record {k} dims")
            dims = struct.unpack(f"<{ndim}I", dims_raw)
            n_values = int(np.prod(dims)) if dims else 1
            payload = _read_exact(fh, 4 * n_values, f"record {k} payload")
            (crc_stored,) = struct.unpack(
                "<I", _read_exact(fh, 4, f"record {k} checksum"))
            crc = zlib.crc32(rec + dims_raw + payload) & 0xFFFFFFFF
            if crc != crc_stored:
                raise BundleFormatError(
                    f"{path}: checksum mismatch in record {k}")
            labels.append(label)
            tensors.append(np.frombuffer(payload, dtype="<f4")
                           .reshape(dims).copy())
        if fh.read(1):
            raise BundleFormatError(f"{path}: trailing bytes after last record")
    return labels, tensors


def bundle_fingerprint(dataset):
    """Hash of what a model must agree on to consume this dataset.

    Covers channel layout (buses, features), window geometry, rate, and
    the normalization constants.  Checkpoints store it so evaluation can
    reject data the model was not trained for.
    """
    h = hashlib.sha256()
    h.update(" ".join(str(b) for b in dataset.buses).encode())
    h.update(" ".join(f.value for f in dataset.features).encode())
    h.update(_fmt_floats(dataset.window).encode())
    h.update(repr(float(dataset.rate)).encode())
    if dataset.is_normalized:
        h.update(np.ascontiguousarray(dataset.norm_min, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(dataset.norm_max, dtype="<f8").tobytes())
    return h.hexdigest()


def export_sample_csv(dataset, index, path):
    """Write one sample as tidy CSV (time_s, bus, feature, value)."""
    if not 0 <= index < dataset.n_samples:
        raise BundleFormatError(
            f"sample index {index} out of range 0..{dataset.n_samples - 1}")
    s = dataset.samples[index]
    t0 = dataset.window[0]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("time_s,bus,feature,value\n")
        for bi, bus in enumerate(dataset.buses):
            for fi, feat in enumerate(dataset.features):
                series = s.tensor[bi, fi]
                for k in range(series.size):
                    fh.write(f"{t0 + k / dataset.rate:.6f},{bus},"
                             f"{feat.value},{series[k]!r}\n")
    return path
