"""Master saliency maps from feature maps.

Five schemes are supported: the plain mean, the max/skewness fusion of the
static and dynamic pathways (with and without an additive face term), and
linear fusion with weights learned by EM or Lasso on the other videos of
the same category (leave-one-out).
"""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, TextIO

import numpy as np

from .errors import AllZeroMap, EmptyCategory, GeometryMismatch
from .grid import DensityMap, WeightVector, normalize_to_pdf

MEAN = "MEAN"
MARAT2009 = "MARAT2009"
MARAT2013 = "MARAT2013"
LEARNED_EM = "LEARNED_EM"
LEARNED_LASSO = "LEARNED_LASSO"
SCHEMES = (MARAT2009, MEAN, MARAT2013, LEARNED_EM, LEARNED_LASSO)
LEARNED_METHOD = {LEARNED_EM: "EM", LEARNED_LASSO: "LASSO_BIC"}

PLATEAU_START = 15
WEIGHT_HEADER = ("method", "category", "video_id", "frame_index", "feature", "beta", "beta_norm")


def _check_same_geometry(maps: Iterable[DensityMap]):
    maps = list(maps)
    for m in maps[1:]:
        if m.geometry != maps[0].geometry:
            raise GeometryMismatch("maps do not share one geometry")


def fuse_linear(maps: Mapping[str, DensityMap], weights: WeightVector) -> DensityMap:
    """sum_k beta_k M_k, clamped at zero and renormalized."""
    missing = [n for n in weights.names if n not in maps]
    if missing:
        raise KeyError(f"no map for weighted features {missing}")
    ordered = [maps[n] for n in weights.names]
    _check_same_geometry(ordered)
    acc = np.zeros(ordered[0].geometry.shape)
    for b, m in zip(weights.beta, ordered):
        if b != 0:
            acc += b * m.values
    return normalize_to_pdf(acc, ordered[0].geometry)


def fuse_mean(maps: Mapping[str, DensityMap], names: Optional[Sequence[str]] = None) -> DensityMap:
    names = tuple(maps) if names is None else tuple(names)
    return fuse_linear(maps, WeightVector.from_beta(names, np.ones(len(names))))


def map_skewness(dmap) -> float:
    """Fisher-Pearson skewness of the pixel values; 0 for a flat map."""
    v = np.asarray(dmap.values if isinstance(dmap, DensityMap) else dmap, dtype=np.float64).ravel()
    d = v - v.mean()
    m2 = float(np.mean(d * d))
    if m2 <= (1e-12 * max(abs(v.mean()), np.abs(v).max(), 1e-300)) ** 2:
        return 0.0
    return float(np.mean(d ** 3) / m2 ** 1.5)


def marat_weights(static: DensityMap, dynamic: DensityMap) -> tuple[float, float]:
    """(beta_s, beta_d) = (max of static map, skewness of dynamic map clamped at 0)."""
    return float(static.values.max()), max(map_skewness(dynamic), 0.0)


def fuse_marat2009(static: DensityMap, dynamic: DensityMap, center: DensityMap) -> DensityMap:
    """Static/dynamic fusion with a reinforcement term for co-salient regions.

    Both pathways are modulated by the center bias and renormalized, then
    combined as ``bs*Ms + bd*Md + bs*bd*Ms*Md``.  The weights are read off
    the pathway maps as given: ``bs = max(Ms)``, ``bd = max(skew(Md), 0)``.
    """
    _check_same_geometry((static, dynamic, center))
    bs, bd = marat_weights(static, dynamic)
    ms = normalize_to_pdf(static.values * center.values, static.geometry).values
    md = normalize_to_pdf(dynamic.values * center.values, static.geometry).values
    return normalize_to_pdf(bs * ms + bd * md + bs * bd * ms * md, static.geometry)


def fuse_marat2013(static: DensityMap, dynamic: DensityMap, center: DensityMap,
                   faces: DensityMap) -> DensityMap:
    """Marat-2009 fusion plus an additive face term weighted by ``max(Mf)``."""
    _check_same_geometry((static, dynamic, center, faces))
    base = fuse_marat2009(static, dynamic, center)
    bf = float(faces.values.max())
    return normalize_to_pdf(base.values + bf * faces.values, static.geometry)


@dataclass
class WeightDatabase:
    """Learned weights keyed by ``(video_id, category, frame_index, method)``."""
    entries: dict = field(default_factory=dict)
    _names: dict = field(default_factory=dict, repr=False, compare=False)

    def add(self, video_id: str, category: str, frame_index: int, method: str,
            weights: WeightVector):
        known = self._names.setdefault(method, weights.names)
        if known != weights.names:
            raise ValueError(f"method {method} mixes feature sets {known} and {weights.names}")
        self.entries[(video_id, category, int(frame_index), method)] = weights

    def __len__(self):
        return len(self.entries)

    def get(self, video_id, category, frame_index, method) -> Optional[WeightVector]:
        return self.entries.get((video_id, category, int(frame_index), method))

    def videos(self, category: str, method: str) -> list[str]:
        return sorted({v for (v, c, f, m) in self.entries if c == category and m == method})

    def categories(self) -> list[str]:
        return sorted({c for (_, c, _, _) in self.entries})

    def methods(self) -> list[str]:
        return sorted({m for (*_, m) in self.entries})

    def series(self, video_id: str, category: str, method: str) -> dict:
        return {f: w for (v, c, f, m), w in self.entries.items()
                if v == video_id and c == category and m == method}

    def write_csv(self, stream: TextIO):
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(WEIGHT_HEADER)
        for (v, c, f, m) in sorted(self.entries, key=lambda k: (k[3], k[1], k[0], k[2])):
            w = self.entries[(v, c, f, m)]
            for name, b, bn in zip(w.names, w.beta, w.beta_norm):
                writer.writerow([m, c, v, f, name, repr(float(b)), repr(float(bn))])

    @classmethod
    def read_csv(cls, stream: TextIO) -> "WeightDatabase":
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != WEIGHT_HEADER:
            raise ValueError(f"weight CSV header must be {','.join(WEIGHT_HEADER)}")
        rows = defaultdict(list)
        for row in reader:
            if not row:
                continue
            m, c, v, f, name, b, bn = row
            rows[(v, c, int(f), m)].append((name, float(b), float(bn)))
        db = cls()
        for key in sorted(rows, key=lambda k: (k[3], k[1], k[0], k[2])):
            items = rows[key]
            wv = WeightVector(tuple(n for n, _, _ in items), [b for _, b, _ in items],
                              [bn for _, _, bn in items], frame_index=key[2], method=key[3])
            db.add(*key, wv)
        return db


def loo_weights(db: WeightDatabase, video_id: str, category: str, frame_index: int,
                method: str, plateau_start: int = PLATEAU_START) -> WeightVector:
    """Mean weights over the other videos of ``category`` at ``frame_index``.

    If none of them reaches ``frame_index``, each other video contributes the
    mean of its frames from ``plateau_start`` on (all its frames if it is
    shorter than that) and those per-video means are averaged.
    """
    others = [v for v in db.videos(category, method) if v != video_id]
    if not others:
        raise EmptyCategory(f"no other video with {method} weights in category {category!r}")
    at_frame = [db.get(v, category, frame_index, method) for v in others]
    at_frame = [w for w in at_frame if w is not None]
    if at_frame:
        names = at_frame[0].names
        beta = np.mean([w.beta for w in at_frame], axis=0)
    else:
        per_video = []
        for v in others:
            series = db.series(v, category, method)
            frames = [f for f in series if f >= plateau_start] or list(series)
            per_video.append(np.mean([series[f].beta for f in frames], axis=0))
            names = series[frames[0]].names
        beta = np.mean(per_video, axis=0)
    return WeightVector.from_beta(names, beta, frame_index=frame_index, method=method)


def fuse_learned(maps: Mapping[str, DensityMap], db: WeightDatabase, video_id: str,
                 category: str, frame_index: int, method: str,
                 plateau_start: int = PLATEAU_START) -> DensityMap:
    return fuse_linear(maps, loo_weights(db, video_id, category, frame_index, method, plateau_start))


def fuse_scheme(scheme: str, maps: Mapping[str, DensityMap], db: Optional[WeightDatabase] = None,
                video_id: str = None, category: str = None, frame_index: int = None,
                plateau_start: int = PLATEAU_START) -> DensityMap:
    """Dispatch one of the five named schemes for a single frame."""
    if scheme == MEAN:
        return fuse_mean(maps)
    if scheme == MARAT2009:
        return fuse_marat2009(maps["static"], maps["dynamic"], maps["center_bias"])
    if scheme == MARAT2013:
        return fuse_marat2013(maps["static"], maps["dynamic"], maps["center_bias"], maps["faces"])
    if scheme in LEARNED_METHOD:
        if db is None:
            raise ValueError(f"{scheme} needs a weight database")
        return fuse_learned(maps, db, video_id, category, frame_index, LEARNED_METHOD[scheme],
                            plateau_start)
    raise ValueError(f"unknown fusion scheme {scheme!r}")


def required_features(scheme: str) -> tuple:
    return {MARAT2009: ("static", "dynamic", "center_bias"),
            MARAT2013: ("static", "dynamic", "center_bias", "faces")}.get(scheme, ())
