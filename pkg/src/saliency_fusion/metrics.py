"""NSS / KLD scoring and the two-period summary."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import GeometryMismatch, NoValidFixations
from .grid import DensityMap, pixel_index

KLD_EPSILON = 1e-12
FIRST_15 = "FIRST_15"
REST = "REST"
SCORE_HEADER = ("scheme", "category", "video_id", "frame_index", "nss", "kld")
SUMMARY_HEADER = ("metric", "scheme", "period", "mean", "sem", "n")


@dataclass(frozen=True)
class FrameScore:
    video_id: str
    frame_index: int
    scheme: str
    nss: float
    kld: float
    category: str = ""


@dataclass(frozen=True)
class PeriodSummary:
    scheme: str
    period: str
    mean: float
    sem: float
    n: int
    metric: str = "nss"


def nss(saliency: DensityMap, fixations: Sequence[tuple[float, float]]) -> float:
    """Mean z-scored saliency at the fixated pixels (population std; 0 for a flat map)."""
    geom = saliency.geometry
    idx = [pixel_index(x, y, geom) for x, y in fixations]
    idx = [p for p in idx if p is not None]
    if not idx:
        raise NoValidFixations("no on-screen fixation")
    v = saliency.values
    sd = float(v.std())
    mean = float(v.mean())
    if sd <= 1e-15 * max(abs(mean), 1e-300):
        return 0.0
    cols = np.array([p[0] for p in idx])
    rows = np.array([p[1] for p in idx])
    return float(np.mean((v[rows, cols] - mean) / sd))


def kld(p_eye: DensityMap, q_sal: DensityMap, epsilon: float = KLD_EPSILON,
        direction: str = "eye||model") -> float:
    """KL divergence in nats, summed over pixels where the reference has mass.

    The default direction is KL(eye density || saliency) with ``epsilon``
    added to the saliency map; ``"model||eye"`` swaps the roles.
    """
    if p_eye.geometry.shape != q_sal.geometry.shape:
        raise GeometryMismatch("eye density and saliency map differ in shape")
    p, q = p_eye.values, q_sal.values
    if direction == "model||eye":
        p, q = q, p
    elif direction != "eye||model":
        raise ValueError(f"unknown KLD direction {direction!r}")
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / (q[mask] + epsilon))))


def period_of(frame_index: int, split: int = 15) -> str:
    return FIRST_15 if frame_index < split else REST


def period_summary(scores: Iterable[FrameScore], split: int = 15, metric: str = "nss") -> list[PeriodSummary]:
    """Mean and s.e.m. per scheme and period, with the video as unit of analysis."""
    scores = list(scores)
    if not scores:
        raise ValueError("no scores to summarize")
    per_video = defaultdict(list)
    for s in scores:
        per_video[(s.scheme, period_of(s.frame_index, split), s.video_id)].append(getattr(s, metric))
    grouped = defaultdict(list)
    for (scheme, period, _), vals in sorted(per_video.items()):
        grouped[(scheme, period)].append(float(np.mean(vals)))
    out = []
    for (scheme, period), means in sorted(grouped.items(), key=lambda kv: (kv[0][0], kv[0][1] != FIRST_15)):
        n = len(means)
        sem = float(np.std(means, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out.append(PeriodSummary(scheme, period, float(np.mean(means)), sem, n, metric))
    return out


def write_scores_csv(scores: Iterable[FrameScore], stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SCORE_HEADER)
    for s in scores:
        writer.writerow([s.scheme, s.category, s.video_id, s.frame_index, repr(s.nss), repr(s.kld)])


def read_scores_csv(stream: TextIO) -> list[FrameScore]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SCORE_HEADER:
        raise ValueError(f"score CSV header must be {','.join(SCORE_HEADER)}")
    out = []
    for row in reader:
        if not row:
            continue
        scheme, cat, vid, f, n, k = row
        out.append(FrameScore(vid, int(f), scheme, float(n), float(k), cat))
    return out


def write_summary_csv(summaries: Iterable[PeriodSummary], stream: TextIO):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for s in summaries:
        writer.writerow([s.metric, s.scheme, s.period, repr(s.mean), repr(s.sem), s.n])


def read_summary_csv(stream: TextIO) -> list[PeriodSummary]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != SUMMARY_HEADER:
        raise ValueError(f"summary CSV header must be {','.join(SUMMARY_HEADER)}")
    return [PeriodSummary(scheme, period, float(mean), float(sem), int(n), metric)
            for metric, scheme, period, mean, sem, n in (r for r in reader if r)]
