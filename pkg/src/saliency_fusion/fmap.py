"""FMAP container for per-frame feature stacks, plus 8-bit PGM helpers.

Layout (all integers little-endian)::

    b"FMAP"  u16 version=1
    u32 width  u32 height  u32 n_frames  u16 n_features
    n_features x (u16 name_length, UTF-8 name bytes)
    n_frames x n_features x (height*width float32, row-major)
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np
from PIL import Image

from .errors import BadMagic, DimensionMismatch, TruncatedStream
from .features import FeatureStack
from .grid import SceneGeometry

MAGIC = b"FMAP"
VERSION = 1
_HEAD = struct.Struct("<4sHIIIH")
_U16 = struct.Struct("<H")


def store_fmap(stack: FeatureStack, sink: BinaryIO):
    geom = stack.geometry
    sink.write(_HEAD.pack(MAGIC, VERSION, geom.width_px, geom.height_px,
                          stack.n_frames, len(stack.names)))
    for name in stack.names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"feature name too long: {name[:20]}...")
        sink.write(_U16.pack(len(raw)))
        sink.write(raw)
    for t in range(stack.n_frames):
        for name in stack.names:
            values = stack.raw(name, t)
            if values.shape != geom.shape:
                raise DimensionMismatch(f"{name} frame {t} has shape {values.shape}")
            sink.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncatedStream(f"stream ended while reading {what}")
    return buf


def load_fmap(source: BinaryIO, width_deg: float = None, height_deg: float = None,
              fps: float = 25.0) -> FeatureStack:
    """Read an FMAP stream.

    The container carries pixel dimensions only; visual angles default to one
    degree per pixel unless given.
    """
    head = source.read(_HEAD.size)
    if len(head) < 4 or head[:4] != MAGIC:
        raise BadMagic("not an FMAP stream")
    if len(head) != _HEAD.size:
        raise TruncatedStream("stream ended inside header")
    _, version, width, height, n_frames, n_features = _HEAD.unpack(head)
    if version != VERSION:
        raise BadMagic(f"unsupported FMAP version {version}")
    if width == 0 or height == 0 or n_frames == 0 or n_features == 0:
        raise DimensionMismatch("FMAP header declares an empty dimension")
    names = []
    for i in range(n_features):
        (length,) = _U16.unpack(_read_exact(source, 2, "name length"))
        names.append(_read_exact(source, length, "feature name").decode("utf-8"))
    if len(set(names)) != len(names):
        raise DimensionMismatch("duplicate feature names")
    plane = width * height
    body = np.empty((n_frames, n_features, height, width), dtype=np.float64)
    for t in range(n_frames):
        raw = _read_exact(source, 4 * plane * n_features, f"frame {t}")
        body[t] = np.frombuffer(raw, dtype="<f4").reshape(n_features, height, width)
    if source.read(1):
        raise DimensionMismatch("trailing bytes after declared frames")
    geometry = SceneGeometry(width, height, width_deg or float(width),
                             height_deg or float(height), fps)
    # time-independent maps are stored per frame but kept once in memory
    maps = {}
    for k, name in enumerate(names):
        arr = body[:, k]
        maps[name] = arr[:1].copy() if np.all(arr == arr[0]) else arr
    return FeatureStack(geometry, tuple(names), maps, n_frames)


def write_fmap(path, stack: FeatureStack):
    with open(path, "wb") as fh:
        store_fmap(stack, fh)


def read_fmap(path, geometry: SceneGeometry = None) -> FeatureStack:
    with open(path, "rb") as fh:
        if geometry is None:
            return load_fmap(fh)
        stack = load_fmap(fh, geometry.width_deg, geometry.height_deg, geometry.fps)
    if stack.geometry.shape != geometry.shape:
        raise DimensionMismatch(f"{path}: FMAP is {stack.geometry.width_px}x"
                                f"{stack.geometry.height_px}, config expects "
                                f"{geometry.width_px}x{geometry.height_px}")
    return stack


def read_pgm(path) -> np.ndarray:
    """8-bit P5 PGM as a float64 array of shape (H, W)."""
    with Image.open(path) as img:
        if img.format != "PPM" or img.mode != "L":
            raise ValueError(f"{path}: expected an 8-bit binary PGM")
        return np.asarray(img, dtype=np.float64)


def write_pgm(path, values):
    arr = np.clip(np.rint(np.asarray(values, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(Path(path), format="PPM")
