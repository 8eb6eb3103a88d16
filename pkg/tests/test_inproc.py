import json

import numpy as np
import pytest

from genesis.bridge import BRIDGE_MAGIC, handle_request, _pack, _unpack
from genesis.dataset import generate_pairs, load_manifest
from genesis.errors import ArgumentError, ConfigError
from genesis.inproc import generate_pairs_inproc, transform_patch
from genesis.patches import SizeRange
from genesis.rng import TAG_PHANTOM, stream
from genesis.scheme import SchemeConfig
from genesis.volume import make_phantom, read_gvol

CFG = {"p_nonlinear": 1.0, "p_shuffle": 1.0, "p_paint": 1.0,
       "shuffle": {"num_windows": 30}}
IDENTITY = {"p_nonlinear": 0.0, "p_shuffle": 0.0, "p_paint": 0.0}


def _patch(shape=(16, 16, 16), seed=0):
    return np.random.default_rng(seed).random(shape, dtype=np.float32)


def test_transform_patch_identity_returns_input():
    patch = _patch()
    out, record = transform_patch(patch, IDENTITY, 5, 0)
    assert np.array_equal(out, patch)
    assert record["selection"] == {"nonlinear": False, "shuffle": False, "paint": "none"}


def test_transform_patch_accepts_json_string_and_2d():
    patch = _patch((32, 32), seed=1)
    out, record = transform_patch(patch, json.dumps(CFG), 7, 3)
    assert out.shape == (1, 32, 32)
    assert record["index"] == 3
    again, record2 = transform_patch(patch, CFG, 7, 3)
    assert np.array_equal(out, again)
    assert record == record2


def test_transform_patch_validations():
    with pytest.raises(ArgumentError):
        transform_patch(_patch() + 2.0, CFG, 0, 0)
    with pytest.raises(ConfigError):
        transform_patch(_patch(), {"wat": 1}, 0, 0)
    with pytest.raises(ConfigError):
        transform_patch(_patch(), "{bad json", 0, 0)


def test_generate_pairs_inproc_matches_file_run(tmp_path):
    vols = [make_phantom("sphere", (24, 24, 24), stream(50, i, TAG_PHANTOM))
            for i in range(2)]
    scheme = SchemeConfig.from_json_dict(CFG)
    size_range = SizeRange.of((8, 8, 8), (12, 12, 12))
    named = [(f"v{i}", v) for i, v in enumerate(vols)]
    generate_pairs(named, scheme, size_range, 5, 99, tmp_path / "d")
    manifest = load_manifest(tmp_path / "d")

    triples = list(generate_pairs_inproc(
        [v.voxels for v in vols], CFG, 5, 99, size_range))
    assert len(triples) == 5
    for i, (original, distorted, record) in enumerate(triples):
        assert record == manifest.records[i].to_json_dict()
        stored_x = read_gvol(tmp_path / "d" / f"X_{i}.gvol")
        stored_xt = read_gvol(tmp_path / "d" / f"Xt_{i}.gvol")
        assert np.array_equal(original, stored_x.voxels)
        assert np.array_equal(distorted, stored_xt.voxels)


def test_generate_pairs_inproc_validations():
    with pytest.raises(ArgumentError):
        list(generate_pairs_inproc([], CFG, 1, 0))
    with pytest.raises(ArgumentError):
        list(generate_pairs_inproc([_patch()], CFG, 0, 0))
    with pytest.raises(ArgumentError):
        list(generate_pairs_inproc([_patch() * 5], CFG, 1, 0))


# -- framed protocol -----------------------------------------------------------


def test_bridge_frame_roundtrip():
    arrays = [_patch((2, 3, 4), seed=2), _patch((1, 5, 5), seed=3)]
    frame = _pack({"op": "x"}, arrays)
    header, back = _unpack(frame)
    assert header["op"] == "x"
    assert len(back) == 2
    for a, b in zip(arrays, back):
        assert np.array_equal(a, b)


def test_bridge_transform_request():
    patch = _patch()
    request = _pack(
        {"op": "transform", "scheme": CFG, "master_seed": 11, "sample_index": 4},
        [patch],
    )
    header, arrays = _unpack(handle_request(request))
    assert header["ok"] is True
    assert len(arrays) == 1
    expected, record = transform_patch(patch, CFG, 11, 4)
    assert np.array_equal(arrays[0], expected)
    assert header["record"] == record


def test_bridge_generate_request():
    vol = make_phantom("cube", (24, 24, 24), stream(60, 0, TAG_PHANTOM))
    request = _pack(
        {"op": "generate_pairs", "scheme": CFG, "master_seed": 3, "n": 2,
         "size_range": {"min": [8, 8, 8], "max": [8, 8, 8]}},
        [vol.voxels],
    )
    header, arrays = _unpack(handle_request(request))
    assert header["ok"] is True
    assert len(header["records"]) == 2
    assert len(arrays) == 4  # X0, Xt0, X1, Xt1
    assert arrays[0].shape == (8, 8, 8)


def test_bridge_error_carries_category():
    request = _pack(
        {"op": "transform", "scheme": {"wat": 1}, "master_seed": 0, "sample_index": 0},
        [_patch()],
    )
    header, arrays = _unpack(handle_request(request))
    assert header["ok"] is False
    assert header["error"]["category"] == "config"
    assert arrays == []

    request = _pack(
        {"op": "transform", "scheme": CFG, "master_seed": 0, "sample_index": 0},
        [_patch() + 2.0],
    )
    header, _ = _unpack(handle_request(request))
    assert header["error"]["category"] == "argument"

    header, _ = _unpack(handle_request(b"JUNK" + b"\x00" * 16))
    assert header["error"]["category"] == "io"


def test_bridge_magic_constant():
    assert BRIDGE_MAGIC == b"GBR1"
