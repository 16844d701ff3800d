import io
import struct

import numpy as np
import pytest

from saliency_fusion.errors import BadMagic, DimensionMismatch, TruncatedStream
from saliency_fusion.features import FeatureStack
from saliency_fusion.fmap import load_fmap, read_fmap, read_pgm, store_fmap, write_fmap, write_pgm
from saliency_fusion.grid import SceneGeometry


def _bytes(stack):
    buf = io.BytesIO()
    store_fmap(stack, buf)
    return buf.getvalue()


def test_round_trip_2x2x1():
    g = SceneGeometry(2, 2, 1.0, 1.0)
    stack = FeatureStack(g, ("a",), {"a": np.array([[[0.1, 0.2], [0.3, 0.4]]], dtype=np.float32)}, 1)
    back = load_fmap(io.BytesIO(_bytes(stack)))
    assert back.names == ("a",) and back.n_frames == 1
    np.testing.assert_array_equal(back.raw("a", 0), stack.raw("a", 0))


def test_header_layout():
    g = SceneGeometry(3, 2, 1.0, 1.0)
    stack = FeatureStack(g, ("ab", "c"), {"ab": np.zeros((2, 3)), "c": np.ones((2, 3))}, 4)
    data = _bytes(stack)
    assert data[:4] == b"FMAP"
    assert struct.unpack("<HIIIH", data[4:20]) == (1, 3, 2, 4, 2)
    assert data[20:24] == b"\x02\x00ab"
    assert len(data) == 20 + 4 + 3 + 4 * 6 * 2 * 4


def test_byte_identical_rewrite():
    rng = np.random.default_rng(0)
    g = SceneGeometry(5, 4, 1.0, 1.0)
    stack = FeatureStack(g, ("x", "y"), {"x": rng.uniform(size=(3, 4, 5)), "y": rng.uniform(size=(4, 5))}, 3)
    first = _bytes(stack)
    assert _bytes(load_fmap(io.BytesIO(first))) == first


def test_constant_feature_shared_after_load():
    g = SceneGeometry(5, 4, 1.0, 1.0)
    stack = FeatureStack(g, ("c",), {"c": np.ones((4, 5))}, 6)
    back = load_fmap(io.BytesIO(_bytes(stack)))
    assert back.maps["c"].shape == (1, 4, 5)


def test_bad_magic():
    with pytest.raises(BadMagic):
        load_fmap(io.BytesIO(b"PAMF" + bytes(20)))
    with pytest.raises(BadMagic):
        load_fmap(io.BytesIO(b""))


def test_bad_version():
    data = bytearray(_bytes(FeatureStack(SceneGeometry(1, 1, 1, 1), ("a",), {"a": np.ones((1, 1))}, 1)))
    data[4] = 2
    with pytest.raises(BadMagic):
        load_fmap(io.BytesIO(bytes(data)))


def test_truncated_body():
    g = SceneGeometry(2, 2, 1.0, 1.0)
    stack = FeatureStack(g, ("a",), {"a": np.ones((2, 2, 2))}, 2)
    data = bytearray(_bytes(stack))
    struct.pack_into("<I", data, 14, 3)   # declare 3 frames, body holds 2
    with pytest.raises(TruncatedStream):
        load_fmap(io.BytesIO(bytes(data)))
    with pytest.raises(TruncatedStream):
        load_fmap(io.BytesIO(bytes(data[:10])))


def test_dimension_errors():
    g = SceneGeometry(2, 2, 1.0, 1.0)
    data = _bytes(FeatureStack(g, ("a",), {"a": np.ones((2, 2))}, 1))
    with pytest.raises(DimensionMismatch):
        load_fmap(io.BytesIO(data + b"\x00"))
    zero = bytearray(data)
    struct.pack_into("<I", zero, 6, 0)
    with pytest.raises(DimensionMismatch):
        load_fmap(io.BytesIO(bytes(zero)))


def test_read_fmap_checks_geometry(tmp_path):
    g = SceneGeometry(4, 2, 8.0, 4.0)
    write_fmap(tmp_path / "a.fmap", FeatureStack(g, ("a",), {"a": np.ones((2, 4))}, 1))
    s = read_fmap(tmp_path / "a.fmap", g)
    assert s.geometry == g
    with pytest.raises(DimensionMismatch):
        read_fmap(tmp_path / "a.fmap", SceneGeometry(2, 4, 1.0, 1.0))


def test_pgm_round_trip(tmp_path):
    arr = np.arange(12, dtype=float).reshape(3, 4) * 20
    write_pgm(tmp_path / "f.pgm", arr)
    np.testing.assert_array_equal(read_pgm(tmp_path / "f.pgm"), arr)
    assert (tmp_path / "f.pgm").read_bytes().startswith(b"P5")
