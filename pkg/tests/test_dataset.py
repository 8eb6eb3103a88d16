import hashlib
from pathlib import Path

import numpy as np
import pytest

from genesis.dataset import (
    generate_pairs,
    load_manifest,
    read_pair,
    verify_manifest,
)
from genesis.errors import ArgumentError, IoError, VerifyError
from genesis.patches import SizeRange
from genesis.rng import TAG_CROP, stream
from genesis.scheme import SchemeConfig
from genesis.volume import Volume, make_phantom

CFG = SchemeConfig(shuffle_windows=40)
RANGE = SizeRange.of((8, 8, 8), (12, 12, 12))


def _volumes():
    return [
        ("sphere0", make_phantom("sphere", (24, 24, 24), stream(100, 0, TAG_CROP))),
        ("cube0", make_phantom("cube", (24, 24, 24), stream(100, 1, TAG_CROP))),
    ]


def _tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(str(path.relative_to(root)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def test_generate_writes_expected_files(tmp_path):
    manifest = generate_pairs(_volumes(), CFG, RANGE, 5, 7, tmp_path / "d")
    assert manifest.n == 5
    base = tmp_path / "d"
    for i in range(5):
        assert (base / f"X_{i}.gvol").exists()
        assert (base / f"Xt_{i}.gvol").exists()
    assert (base / "manifest.jsonl").exists()
    assert (base / "sources" / "sphere0.gvol").exists()
    lines = (base / "manifest.jsonl").read_text().splitlines()
    assert len(lines) == 6  # header + 5 records


def test_identity_scheme_pairs_byte_identical(tmp_path):
    cfg = SchemeConfig(p_nonlinear=0.0, p_shuffle=0.0, p_paint=0.0)
    generate_pairs(_volumes(), cfg, RANGE, 1, 3, tmp_path / "d")
    x = (tmp_path / "d" / "X_0.gvol").read_bytes()
    xt = (tmp_path / "d" / "Xt_0.gvol").read_bytes()
    assert x == xt


def test_regeneration_byte_identical(tmp_path):
    generate_pairs(_volumes(), CFG, RANGE, 6, 11, tmp_path / "a")
    generate_pairs(_volumes(), CFG, RANGE, 6, 11, tmp_path / "b")
    assert _tree_digest(tmp_path / "a") == _tree_digest(tmp_path / "b")
    generate_pairs(_volumes(), CFG, RANGE, 6, 12, tmp_path / "c")
    assert _tree_digest(tmp_path / "a") != _tree_digest(tmp_path / "c")


def test_thread_count_invariance(tmp_path):
    generate_pairs(_volumes(), CFG, RANGE, 8, 13, tmp_path / "t1", threads=1)
    generate_pairs(_volumes(), CFG, RANGE, 8, 13, tmp_path / "t8", threads=8)
    assert _tree_digest(tmp_path / "t1") == _tree_digest(tmp_path / "t8")


def test_generate_validations(tmp_path):
    with pytest.raises(ArgumentError):
        generate_pairs([], CFG, RANGE, 1, 0, tmp_path / "x")
    with pytest.raises(ArgumentError):
        generate_pairs(_volumes(), CFG, RANGE, 0, 0, tmp_path / "x")
    bad = Volume(np.full((24, 24, 24), 2.0, dtype=np.float32))
    with pytest.raises(ArgumentError):
        generate_pairs([("bad", bad)], CFG, RANGE, 1, 0, tmp_path / "x")


def test_verify_fresh_dataset_passes(tmp_path):
    generate_pairs(_volumes(), CFG, RANGE, 10, 17, tmp_path / "d")
    report = verify_manifest(tmp_path / "d")
    assert report.passed
    assert report.pass_count == 10
    assert sum(report.scheme_counts.values()) == 10


def test_verify_detects_flipped_byte(tmp_path):
    generate_pairs(_volumes(), CFG, RANGE, 4, 19, tmp_path / "d")
    target = tmp_path / "d" / "Xt_0.gvol"
    raw = bytearray(target.read_bytes())
    raw[-1] ^= 0x01
    target.write_bytes(bytes(raw))
    report = verify_manifest(tmp_path / "d")
    assert not report.passed
    assert [f["index"] for f in report.failures] == [0]
    assert report.pass_count == 3


def test_verify_missing_file(tmp_path):
    generate_pairs(_volumes(), CFG, RANGE, 3, 23, tmp_path / "d")
    (tmp_path / "d" / "X_1.gvol").unlink()
    report = verify_manifest(tmp_path / "d")
    assert [f["index"] for f in report.failures] == [1]


def test_read_pair_roundtrip_and_errors(tmp_path):
    generate_pairs(_volumes(), CFG, RANGE, 3, 29, tmp_path / "d")
    pair = read_pair(tmp_path / "d", 1)
    again = read_pair(tmp_path / "d", 1)
    assert np.array_equal(pair.original.voxels, again.original.voxels)
    assert pair.original.shape == pair.distorted.shape
    assert pair.record.sample_index == 1
    with pytest.raises(ArgumentError):
        read_pair(tmp_path / "d", 3)
    target = tmp_path / "d" / "X_2.gvol"
    raw = bytearray(target.read_bytes())
    raw[-2] ^= 0xFF
    target.write_bytes(bytes(raw))
    with pytest.raises(VerifyError):
        read_pair(tmp_path / "d", 2)


def test_load_manifest_errors(tmp_path):
    with pytest.raises(IoError):
        load_manifest(tmp_path)
    generate_pairs(_volumes(), CFG, RANGE, 2, 31, tmp_path / "d")
    manifest = load_manifest(tmp_path / "d")
    assert manifest.n == 2
    assert manifest.master_seed == 31
    assert len(manifest.volumes) == 2
    path = tmp_path / "d" / "manifest.jsonl"
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(IoError):
        load_manifest(tmp_path / "d")
