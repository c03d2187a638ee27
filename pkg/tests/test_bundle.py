"""On-disk dataset format: round trip, determinism, corruption, fingerprint."""

import struct

import numpy as np
import pytest

from gridinertia.bundle import (MAGIC, bundle_fingerprint, export_sample_csv,
                                load_bundle, save_bundle, save_trace)
from gridinertia.errors import BundleFormatError


def datasets_equal(a, b):
    if (a.case_name, a.buses, a.features, a.rate, a.window, a.snr_db,
            a.train_idx, a.val_idx, a.sweep_h, a.sweep_pe) != \
       (b.case_name, b.buses, b.features, b.rate, b.window, b.snr_db,
            b.train_idx, b.val_idx, b.sweep_h, b.sweep_pe):
        return False
    if a.is_normalized != b.is_normalized:
        return False
    if a.is_normalized and not (np.array_equal(a.norm_min, b.norm_min)
                                and np.array_equal(a.norm_max, b.norm_max)):
        return False
    return all(sa.label == sb.label and np.array_equal(sa.tensor, sb.tensor)
               for sa, sb in zip(a.samples, b.samples))


def test_roundtrip_is_exact(tiny_dataset, tmp_path):
    out = tmp_path / "bundle"
    save_bundle(tiny_dataset, out)
    loaded = load_bundle(out)
    assert datasets_equal(tiny_dataset, loaded)
    assert loaded.samples[0].tensor.dtype == np.float32


def test_save_is_byte_deterministic(tiny_dataset, tmp_path):
    d1, d2 = tmp_path / "b1", tmp_path / "b2"
    save_bundle(tiny_dataset, d1)
    save_bundle(tiny_dataset, d2)
    assert (d1 / "samples.bin").read_bytes() == (d2 / "samples.bin").read_bytes()
    assert (d1 / "manifest.txt").read_bytes() == (d2 / "manifest.txt").read_bytes()


def test_fingerprint_reflects_consumption_contract(tiny_dataset, tmp_path):
    fp = bundle_fingerprint(tiny_dataset)
    save_bundle(tiny_dataset, tmp_path / "b")
    assert bundle_fingerprint(load_bundle(tmp_path / "b")) == fp
    # dropping a channel must change it
    sub = tiny_dataset.restrict_features(tiny_dataset.features[:1])
    assert bundle_fingerprint(sub) != fp
    sub_b = tiny_dataset.restrict_buses(tiny_dataset.buses[:1])
    assert bundle_fingerprint(sub_b) != fp


def test_missing_manifest(tmp_path):
    with pytest.raises((BundleFormatError, FileNotFoundError)):
        load_bundle(tmp_path / "nope")


def test_bad_magic_rejected(tiny_dataset, tmp_path):
    out = tmp_path / "b"
    save_bundle(tiny_dataset, out)
    blob = bytearray((out / "samples.bin").read_bytes())
    blob[:8] = b"XXXXXXXX"
    (out / "samples.bin").write_bytes(bytes(blob))
    with pytest.raises(BundleFormatError, match="magic"):
        load_bundle(out)


def test_payload_corruption_caught_by_checksum(tiny_dataset, tmp_path):
    out = tmp_path / "b"
    save_bundle(tiny_dataset, out)
    blob = bytearray((out / "samples.bin").read_bytes())
    blob[200] ^= 0xFF
    (out / "samples.bin").write_bytes(bytes(blob))
    with pytest.raises(BundleFormatError, match="checksum"):
        load_bundle(out)


def test_truncation_rejected(tiny_dataset, tmp_path):
    out = tmp_path / "b"
    save_bundle(tiny_dataset, out)
    blob = (out / "samples.bin").read_bytes()
    (out / "samples.bin").write_bytes(blob[:-10])
    with pytest.raises(BundleFormatError):
        load_bundle(out)


def test_trailing_bytes_rejected(tiny_dataset, tmp_path):
    out = tmp_path / "b"
    save_bundle(tiny_dataset, out)
    with open(out / "samples.bin", "ab") as fh:
        fh.write(b"junk")
    with pytest.raises(BundleFormatError, match="trailing"):
        load_bundle(out)


def test_sample_count_mismatch_rejected(tiny_dataset, tmp_path):
    out = tmp_path / "b"
    save_bundle(tiny_dataset, out)
    blob = bytearray((out / "samples.bin").read_bytes())
    blob[8:16] = struct.pack("<Q", 99)
    (out / "samples.bin").write_bytes(bytes(blob))
    with pytest.raises(BundleFormatError, match="99"):
        load_bundle(out)


def test_manifest_field_validation(tiny_dataset, tmp_path):
    out = tmp_path / "b"
    save_bundle(tiny_dataset, out)
    manifest = (out / "manifest.txt").read_text()
    # unknown annotation keys are tolerated (forward compatibility) ...
    (out / "manifest.txt").write_text(manifest + "annotation 42\n")
    assert load_bundle(out).n_samples == tiny_dataset.n_samples
    # ... but a missing required field or alien format version is not
    (out / "manifest.txt").write_text(
        "\n".join(l for l in manifest.splitlines()
                  if not l.startswith("rate ")) + "\n")
    with pytest.raises(BundleFormatError, match="rate"):
        load_bundle(out)
    (out / "manifest.txt").write_text(
        manifest.replace("format INRTDS01", "format INRTDS99"))
    with pytest.raises(BundleFormatError, match="INRTDS99"):
        load_bundle(out)


def test_save_trace_single_record_format(tmp_path):
    tensor = np.arange(24, dtype=np.float64).reshape(4, 3, 2)
    path = tmp_path / "trace.bin"
    save_trace(path, 5.25, tensor)
    blob = path.read_bytes()
    assert blob[:8] == MAGIC
    (count,) = struct.unpack("<Q", blob[8:16])
    assert count == 1
    (label,) = struct.unpack("<d", blob[16:24])
    assert label == 5.25
    ndim = blob[24]
    dims = struct.unpack("<3I", blob[25:37])
    assert ndim == 3 and dims == (4, 3, 2)
    values = np.frombuffer(blob[37:37 + 4 * 24], dtype="<f4").reshape(4, 3, 2)
    assert np.allclose(values, tensor)


def test_export_sample_csv(tiny_dataset, tmp_path):
    path = tmp_path / "sample.csv"
    export_sample_csv(tiny_dataset, 0, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("time_s,")
    n_channels = len(tiny_dataset.buses) * len(tiny_dataset.features)
    n_steps = tiny_dataset.samples[0].tensor.shape[-1]
    assert len(lines) == 1 + n_channels * n_steps
    with pytest.raises(BundleFormatError):
        export_sample_csv(tiny_dataset, 999, path)
