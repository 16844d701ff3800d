"""Frame-level fitting and scoring, shared by the CLI and the benchmark."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NoGazeData
from .estimators import EM, LASSO_BIC, LS, RegressionProblem, em_fit, lasso_fit_bic, least_squares_fit
from .features import FeatureStack
from .fusion import PLATEAU_START, SCHEMES, WeightDatabase, fuse_scheme, required_features
from .gaze import eye_position_density
from .grid import DensityMap, SceneGeometry, WeightVector, pixel_index, to_downsampled_coords
from .metrics import KLD_EPSILON, FrameScore, kld, nss

log = logging.getLogger(__name__)

DEFAULT_DOWNSAMPLE = 4


def onscreen(positions, geometry: SceneGeometry) -> list[tuple[float, float]]:
    return [(float(x), float(y)) for x, y in positions
            if 0 <= x < geometry.width_px and 0 <= y < geometry.height_px]


def downsample_positions(positions, geometry: SceneGeometry, factor: int):
    """On-screen positions on the block-averaged grid: (continuous coords, pixel indices)."""
    small = geometry.downsampled(factor)
    coords, pixels = [], []
    for x, y in onscreen(positions, geometry):
        col, row = pixel_index(x, y, geometry)
        pixels.append((col // factor, row // factor))
        xd, yd = to_downsampled_coords(x, y, factor)
        # block-averaging shifts border pixels by < half a block; keep them on screen
        coords.append((min(max(xd, 0.0), small.width_px - 1.0), min(max(yd, 0.0), small.height_px - 1.0)))
    return coords, pixels


def eye_density(positions, geometry: SceneGeometry, downsample: int = 1,
                kernel_sigma_deg: float = 1.0) -> DensityMap:
    coords, _ = downsample_positions(positions, geometry, downsample)
    return eye_position_density(coords, geometry.downsampled(downsample), kernel_sigma_deg)


def fit_target(target, maps, names: Sequence[str], method: str, n_lambda: int = 100,
               nonnegative: bool = False) -> WeightVector:
    """Regression weights of ``(K, H, W)`` maps against a target grid."""
    problem = RegressionProblem.from_maps(target, maps, names)
    if method == LS:
        return least_squares_fit(problem, nonnegative=nonnegative)
    if method == LASSO_BIC:
        return lasso_fit_bic(problem, n_lambda=n_lambda)[0]
    raise ValueError(f"{method} is not a regression method")


def fit_frame(frame_index: int, positions, stack: FeatureStack, method: str,
              downsample: int = DEFAULT_DOWNSAMPLE, n_lambda: int = 100,
              nonnegative: bool = False, kernel_sigma_deg: float = 1.0,
              em_tol: float = 1e-6, em_max_iter: int = 500) -> WeightVector:
    """Learn one frame's feature weights from its eye positions.

    LS and LASSO_BIC regress the eye-position density map on the feature
    maps; EM fits mixture weights to the positions themselves.  Both work on
    the ``downsample``-times block-averaged grid.
    """
    geom = stack.geometry
    coords, pixels = downsample_positions(positions, geom, downsample)
    if not coords:
        raise NoGazeData(f"no on-screen gaze at frame {frame_index}")
    maps = stack.frame_array(frame_index, downsample=downsample)
    if method == EM:
        fit = em_fit(pixels, maps, stack.names, tol=em_tol, max_iter=em_max_iter)
        return fit.weights(frame_index=frame_index)
    target = eye_position_density(coords, geom.downsampled(downsample), kernel_sigma_deg)
    wv = fit_target(target.values, maps, stack.names, method, n_lambda, nonnegative)
    return WeightVector(wv.names, wv.beta, wv.beta_norm, frame_index, method, wv.intercept)


@dataclass
class VideoInput:
    video_id: str
    category: str
    stack: FeatureStack
    positions: dict  # frame_index -> list of (x, y)


def fit_video(video: VideoInput, methods: Sequence[str], downsample: int = DEFAULT_DOWNSAMPLE,
              n_lambda: int = 100, nonnegative: bool = False, kernel_sigma_deg: float = 1.0):
    """Fit every frame of a video; returns ``(entries, skipped_frames)``.

    ``entries`` is a list of ``(video_id, category, frame, method, WeightVector)``.
    """
    entries, skipped = [], []
    for t in range(video.stack.n_frames):
        pos = video.positions.get(t, [])
        if not onscreen(pos, video.stack.geometry):
            skipped.append(t)
            continue
        for method in methods:
            wv = fit_frame(t, pos, video.stack, method, downsample, n_lambda, nonnegative,
                           kernel_sigma_deg)
            entries.append((video.video_id, video.category, t, method, wv))
    return entries, skipped


def available_schemes(names: Iterable[str], schemes: Sequence[str] = SCHEMES) -> list[str]:
    names = set(names)
    return [s for s in schemes if set(required_features(s)) <= names]


def score_frame(stack: FeatureStack, frame_index: int, positions, schemes: Sequence[str],
                db: Optional[WeightDatabase], video_id: str, category: str,
                downsample: int = DEFAULT_DOWNSAMPLE, epsilon: float = KLD_EPSILON,
                direction: str = "eye||model", kernel_sigma_deg: float = 1.0,
                plateau_start: int = PLATEAU_START) -> list[FrameScore]:
    """NSS and KLD of each scheme's master map against one frame's gaze."""
    geom = stack.geometry
    coords, pixels = downsample_positions(positions, geom, downsample)
    if not coords:
        raise NoGazeData(f"no on-screen gaze at frame {frame_index}")
    small = geom.downsampled(downsample)
    arr = stack.frame_array(frame_index, downsample=downsample)
    maps = {n: DensityMap(small, arr[k]) for k, n in enumerate(stack.names)}
    eye = eye_position_density(coords, small, kernel_sigma_deg)
    fix = [(float(c), float(r)) for c, r in pixels]
    out = []
    for scheme in schemes:
        sal = fuse_scheme(scheme, maps, db, video_id, category, frame_index, plateau_start)
        out.append(FrameScore(video_id, frame_index, scheme, nss(sal, fix),
                              kld(eye, sal, epsilon, direction), category))
    return out


def score_video(video: VideoInput, schemes: Sequence[str], db: Optional[WeightDatabase],
                downsample: int = DEFAULT_DOWNSAMPLE, epsilon: float = KLD_EPSILON,
                direction: str = "eye||model", kernel_sigma_deg: float = 1.0,
                plateau_start: int = PLATEAU_START) -> list[FrameScore]:
    schemes = available_schemes(video.stack.names, schemes)
    out = []
    for t in range(video.stack.n_frames):
        pos = video.positions.get(t, [])
        if not onscreen(pos, video.stack.geometry):
            continue
        out.extend(score_frame(video.stack, t, pos, schemes, db, video.video_id,
                               video.category, downsample, epsilon, direction,
                               kernel_sigma_deg, plateau_start))
    return out
