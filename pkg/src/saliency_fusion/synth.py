"""Synthetic scenes with known feature weights.

Every random draw is keyed by ``(seed, video, frame)`` through
``numpy.random.SeedSequence`` so frames can be generated in any order or in
parallel and still come out identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .features import DEFAULT_FEATURES, FeatureStack, center_bias_map
from .gaze import GazeRecord
from .grid import SceneGeometry, WeightVector, uniform_values

SWITCH_FRAME = 15


@dataclass(frozen=True)
class Blob:
    x: float
    y: float
    sigma_px: float


@dataclass(frozen=True)
class SyntheticLayout:
    static_blobs: tuple = ()
    mover_start: tuple = (0.0, 0.0)
    mover_velocity: tuple = (0.0, 0.0)  # px per frame
    mover_sigma_px: float = 20.0
    face_boxes: tuple = ()  # (x0, y0, x1, y1), inclusive pixel bounds
    face_blur_px: float = 0.0


@dataclass
class SyntheticSpec:
    geometry: SceneGeometry
    schedule: np.ndarray  # (n_frames, K) true mixture weights
    names: tuple = DEFAULT_FEATURES
    layout: SyntheticLayout = field(default_factory=SyntheticLayout)
    n_observers: int = 15
    seed: int = 0

    def __post_init__(self):
        self.names = tuple(self.names)
        self.schedule = np.atleast_2d(np.asarray(self.schedule, dtype=np.float64))
        if self.schedule.shape[1] != len(self.names):
            raise ValueError("schedule needs one column per feature")
        if np.any(self.schedule < 0) or not np.allclose(self.schedule.sum(axis=1), 1.0):
            raise ValueError("true weights must be non-negative and sum to 1 per frame")

    @property
    def n_frames(self) -> int:
        return self.schedule.shape[0]

    def true_weights(self, frame_index: int) -> WeightVector:
        return WeightVector.from_beta(self.names, self.schedule[frame_index], frame_index=frame_index)


def frame_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def gaussian_blob(geometry: SceneGeometry, x: float, y: float, sigma_px: float) -> np.ndarray:
    gx = np.exp(-0.5 * ((np.arange(geometry.width_px) - x) / sigma_px) ** 2)
    gy = np.exp(-0.5 * ((np.arange(geometry.height_px) - y) / sigma_px) ** 2)
    return np.outer(gy, gx)


def _box_mask(geometry: SceneGeometry, boxes) -> np.ndarray:
    mask = np.zeros(geometry.shape)
    for x0, y0, x1, y1 in boxes:
        mask[int(y0):int(y1) + 1, int(x0):int(x1) + 1] = 1.0
    return mask


def make_synthetic_stack(spec: SyntheticSpec) -> FeatureStack:
    """Deterministic feature stack from a layout.

    ``static`` is a sum of Gaussian blobs, ``dynamic`` a Gaussian blob moving
    at constant velocity (clamped to the screen), ``faces`` a union of boxes
    optionally blurred; ``center_bias`` and ``uniform`` are the standard maps.
    """
    geom, lay = spec.geometry, spec.layout
    maps = {}
    for name in spec.names:
        if name == "center_bias":
            maps[name] = center_bias_map(geom).values[None]
        elif name == "uniform":
            maps[name] = uniform_values(geom)[None]
        elif name == "static":
            acc = np.zeros(geom.shape)
            for b in lay.static_blobs:
                acc += gaussian_blob(geom, b.x, b.y, b.sigma_px)
            maps[name] = (acc / acc.sum())[None]
        elif name == "dynamic":
            arr = np.empty((spec.n_frames,) + geom.shape)
            for t in range(spec.n_frames):
                x, y = mover_position(lay, geom, t)
                blob = gaussian_blob(geom, x, y, lay.mover_sigma_px)
                arr[t] = blob / blob.sum()
            maps[name] = arr
        elif name == "faces":
            mask = _box_mask(geom, lay.face_boxes)
            if lay.face_blur_px > 0:
                mask = ndimage.gaussian_filter(mask, lay.face_blur_px, mode="constant")
            maps[name] = (mask / mask.sum())[None]
        else:
            raise ValueError(f"no synthetic generator for feature {name!r}")
    return FeatureStack(geom, spec.names, maps, spec.n_frames)


def mover_position(layout: SyntheticLayout, geometry: SceneGeometry, t: int) -> tuple[float, float]:
    x = layout.mover_start[0] + layout.mover_velocity[0] * t
    y = layout.mover_start[1] + layout.mover_velocity[1] * t
    return (float(np.clip(x, 0, geometry.width_px - 1)),
            float(np.clip(y, 0, geometry.height_px - 1)))


def pairwise_correlation(stack: FeatureStack, frame_index: int = 0) -> np.ndarray:
    """Pixel-wise Pearson correlation between the stack's maps at one frame."""
    arr = np.stack([stack.raw(n, frame_index).ravel() for n in stack.names])
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(arr)
    return np.nan_to_num(corr)


def sample_fixations(maps, weights, n: int, seed=0) -> list[tuple[float, float]]:
    """Draw ``n`` positions from the mixture ``sum_k w_k M_k``.

    Each draw picks a feature from ``weights``, then a pixel from that
    feature's map; positions are pixel centers.  ``seed`` may be an int, a
    key tuple or a ``Generator``.
    """
    maps = np.asarray(maps, dtype=np.float64)
    w = np.asarray(weights.beta if isinstance(weights, WeightVector) else weights, dtype=np.float64)
    if maps.ndim != 3 or maps.shape[0] != w.size:
        raise ValueError("maps must be (K, H, W) with one weight per map")
    if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
        raise ValueError("weights must form a proper mixture")
    rng = seed if isinstance(seed, np.random.Generator) else frame_rng(*np.atleast_1d(seed))
    K, h, width = maps.shape
    comp = rng.choice(K, size=n, p=w / w.sum())
    flat = np.empty(n, dtype=np.int64)
    for k in range(K):
        idx = np.flatnonzero(comp == k)
        if idx.size:
            cdf = np.cumsum(maps[k].ravel())
            u = rng.random(idx.size) * cdf[-1]
            flat[idx] = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
    rows, cols = np.divmod(flat, width)
    return [(float(c), float(r)) for c, r in zip(cols, rows)]


def sample_frame_positions(stack: FeatureStack, spec: SyntheticSpec, frame_index: int,
                           video_key: int = 0) -> list[tuple[float, float]]:
    maps = np.stack([stack.raw(n, frame_index) for n in spec.names])
    rng = frame_rng(spec.seed, video_key, frame_index)
    return sample_fixations(maps, spec.schedule[frame_index], spec.n_observers, rng)


def step_schedule(names: Sequence[str], early: Mapping[str, float], late: Mapping[str, float],
                  n_frames: int, switch: int = SWITCH_FRAME) -> np.ndarray:
    """Weights equal to ``early`` for frames < ``switch`` and ``late`` after."""
    def vec(d):
        v = np.array([float(d.get(n, 0.0)) for n in names])
        unknown = set(d) - set(names)
        if unknown:
            raise ValueError(f"unknown features in schedule: {sorted(unknown)}")
        return v / v.sum()
    out = np.empty((n_frames, len(names)))
    out[:switch] = vec(early)
    out[switch:] = vec(late)
    return out


def random_layout(geometry: SceneGeometry, rng: np.random.Generator, n_static: int = 3,
                  n_faces: int = 2) -> SyntheticLayout:
    """Random but well-separated placement of static blobs, a mover and face boxes.

    The frame is cut into a 4x3 grid of cells; each element takes its own cell
    (the two central cells are left to the center bias) so maps overlap little.
    """
    w, h = geometry.width_px, geometry.height_px
    cw, ch = w / 4.0, h / 3.0
    cells = [(i, j) for j in range(3) for i in range(4) if not (j == 1 and i in (1, 2))]
    order = rng.permutation(len(cells))
    picks = [cells[k] for k in order[: n_static + n_faces + 1]]

    def jitter(cell, margin=0.25):
        i, j = cell
        return ((i + rng.uniform(margin, 1 - margin)) * cw, (j + rng.uniform(margin, 1 - margin)) * ch)

    scale = w / 720.0
    static = tuple(Blob(*jitter(c), sigma_px=float(rng.uniform(30, 40)) * scale)
                   for c in picks[:n_static])
    boxes = []
    for c in picks[n_static:n_static + n_faces]:
        x, y = jitter(c, 0.3)
        bw, bh = 40 * scale, 50 * scale
        boxes.append((round(x - bw / 2), round(y - bh / 2), round(x + bw / 2), round(y + bh / 2)))
    mx, my = jitter(picks[-1], 0.4)
    angle = rng.uniform(0, 2 * np.pi)
    speed = 1.0 * scale
    return SyntheticLayout(
        static_blobs=static,
        mover_start=(float(mx), float(my)),
        mover_velocity=(float(speed * np.cos(angle)), float(speed * np.sin(angle))),
        mover_sigma_px=35.0 * scale,
        face_boxes=tuple(boxes),
        face_blur_px=20.0 * scale,
    )


# Period-1 / period-2 generating weights per synthetic category.
CATEGORY_SCHEDULES = {
    "faces": ({"center_bias": 0.7, "faces": 0.15, "dynamic": 0.1, "static": 0.05},
              {"faces": 0.6, "center_bias": 0.15, "dynamic": 0.15, "static": 0.1}),
    "one_mo": ({"center_bias": 0.7, "dynamic": 0.15, "static": 0.1, "faces": 0.05},
               {"dynamic": 0.55, "center_bias": 0.25, "static": 0.15, "faces": 0.05}),
    "landscapes": ({"center_bias": 0.7, "static": 0.2, "dynamic": 0.05, "faces": 0.05},
                   {"static": 0.5, "center_bias": 0.3, "dynamic": 0.1, "faces": 0.1}),
}


@dataclass
class SyntheticVideo:
    video_id: str
    category: str
    spec: SyntheticSpec
    video_key: int

    def stack(self) -> FeatureStack:
        return make_synthetic_stack(self.spec)

    def gaze_records(self, stack: Optional[FeatureStack] = None) -> list[GazeRecord]:
        stack = self.stack() if stack is None else stack
        out = []
        for t in range(self.spec.n_frames):
            for i, (x, y) in enumerate(sample_frame_positions(stack, self.spec, t, self.video_key)):
                out.append(GazeRecord(self.video_id, f"s{i + 1:02d}", t, x, y))
        return out


def make_benchmark(geometry: SceneGeometry, n_videos: int = 5, n_frames: int = 50,
                   n_observers: int = 15, seed: int = 0, categories=None,
                   names: Sequence[str] = DEFAULT_FEATURES) -> list[SyntheticVideo]:
    """Synthetic videos: one layout per video, one step schedule per category."""
    categories = CATEGORY_SCHEDULES if categories is None else categories
    videos = []
    key = 0
    for cat in sorted(categories):
        early, late = categories[cat]
        schedule = step_schedule(names, early, late, n_frames)
        for v in range(n_videos):
            layout = random_layout(geometry, frame_rng(seed, key, 1_000_000))
            spec = SyntheticSpec(geometry, schedule, tuple(names), layout, n_observers, seed)
            videos.append(SyntheticVideo(f"{cat}_{v + 1:02d}", cat, spec, key))
            key += 1
    return videos
