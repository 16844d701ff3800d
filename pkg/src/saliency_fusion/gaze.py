"""Eye-position records and eye-position density maps."""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import MissingHeader, NoValidPositions
from .grid import DensityMap, SceneGeometry, deg_to_px, normalize_to_pdf

log = logging.getLogger(__name__)

GAZE_HEADER = ("video_id", "observer_id", "frame_index", "x_px", "y_px")
KERNEL_TRUNCATION = 4.0


@dataclass(frozen=True)
class GazeRecord:
    video_id: str
    observer_id: str
    frame_index: int
    x_px: float
    y_px: float

    def on_screen(self, geometry: SceneGeometry) -> bool:
        return 0 <= self.x_px < geometry.width_px and 0 <= self.y_px < geometry.height_px


@dataclass
class GazeTable:
    records: list[GazeRecord]
    geometry: SceneGeometry
    n_skipped: int = 0
    _index: dict = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.records)

    def _build_index(self):
        index = defaultdict(list)
        for rec in self.records:
            index[(rec.video_id, rec.frame_index)].append(rec)
        self._index = index

    def video_ids(self) -> list[str]:
        return sorted({r.video_id for r in self.records})

    def frames(self, video_id: str) -> list[int]:
        return sorted({r.frame_index for r in self.records if r.video_id == video_id})

    def frame_records(self, video_id: str, frame_index: int) -> list[GazeRecord]:
        if self._index is None:
            self._build_index()
        return list(self._index.get((video_id, frame_index), ()))

    def positions(self, video_id: str, frame_index: int, on_screen_only: bool = True):
        """(x, y) positions for one frame, ordered by observer id."""
        recs = sorted(self.frame_records(video_id, frame_index), key=lambda r: r.observer_id)
        if on_screen_only:
            recs = [r for r in recs if r.on_screen(self.geometry)]
        return [(r.x_px, r.y_px) for r in recs]

    def check_unique(self):
        """Raise if an observer appears twice in the same (video, frame)."""
        seen = set()
        for r in self.records:
            key = (r.video_id, r.frame_index, r.observer_id)
            if key in seen:
                raise ValueError(f"duplicate record for {key}")
            seen.add(key)


def parse_gaze_csv(stream: TextIO, geometry: SceneGeometry) -> GazeTable:
    """Parse ``video_id,observer_id,frame_index,x_px,y_px`` rows.

    Malformed rows (wrong field count, non-numeric or non-finite values,
    negative frame index) are skipped with a warning; the count is kept in
    ``GazeTable.n_skipped``.
    """
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != GAZE_HEADER:
        raise MissingHeader(f"expected header {','.join(GAZE_HEADER)}")
    records, skipped = [], 0
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        try:
            if len(row) != 5:
                raise ValueError("wrong field count")
            frame = int(row[2])
            x, y = float(row[3]), float(row[4])
            if frame < 0 or not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("invalid value")
        except ValueError as exc:
            log.warning("line %d skipped: %s", lineno, exc)
            skipped += 1
            continue
        records.append(GazeRecord(row[0].strip(), row[1].strip(), frame, x, y))
    if skipped:
        log.warning("%d malformed gaze rows skipped", skipped)
    return GazeTable(records, geometry, skipped)


def read_gaze_csv(path, geometry: SceneGeometry) -> GazeTable:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_gaze_csv(fh, geometry)


def write_gaze_csv(records: Iterable[GazeRecord], stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(GAZE_HEADER)
    for r in records:
        writer.writerow([r.video_id, r.observer_id, r.frame_index, repr(float(r.x_px)), repr(float(r.y_px))])


def gaussian_kernel_sum(positions: Sequence[tuple[float, float]], geometry: SceneGeometry,
                        sigma_px: float) -> np.ndarray:
    """Unnormalized sum of isotropic Gaussians truncated at 4 sigma."""
    h, w = geometry.shape
    out = np.zeros((h, w))
    radius = KERNEL_TRUNCATION * sigma_px
    for x, y in positions:
        x0, x1 = max(int(math.ceil(x - radius)), 0), min(int(math.floor(x + radius)), w - 1)
        y0, y1 = max(int(math.ceil(y - radius)), 0), min(int(math.floor(y + radius)), h - 1)
        if x0 > x1 or y0 > y1:
            continue
        dx = np.arange(x0, x1 + 1) - x
        dy = np.arange(y0, y1 + 1) - y
        d2 = dy[:, None] ** 2 + dx[None, :] ** 2
        patch = np.exp(-0.5 * d2 / sigma_px ** 2)
        patch[d2 > radius ** 2] = 0.0
        out[y0:y1 + 1, x0:x1 + 1] += patch
    return out


def eye_position_density(positions: Sequence[tuple[float, float]], geometry: SceneGeometry,
                         kernel_sigma_deg: float = 1.0) -> DensityMap:
    """Eye-position density: one Gaussian per on-screen position, then normalized."""
    valid = [(float(x), float(y)) for x, y in positions
             if 0 <= x < geometry.width_px and 0 <= y < geometry.height_px]
    if not valid:
        raise NoValidPositions("no on-screen eye positions")
    sigma_px = deg_to_px(kernel_sigma_deg, "horizontal", geometry)
    return normalize_to_pdf(gaussian_kernel_sum(valid, geometry, sigma_px), geometry)


def gaze_table_from_text(text: str, geometry: SceneGeometry) -> GazeTable:
    return parse_gaze_csv(io.StringIO(text), geometry)
