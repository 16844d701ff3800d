"""Per-frame feature maps.

Builders return :class:`DensityMap` objects.  When an input carries no
information (empty face mask, flat luminance, static window) the builder
falls back to the uniform map and sets ``flag`` instead of raising, so a
fitting pipeline can run over every frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .errors import AllZeroMap
from .grid import (DensityMap, SceneGeometry, block_average, deg_to_px,
                   normalize_to_pdf, uniform_values)

DEFAULT_FEATURES = ("static", "dynamic", "center_bias", "uniform", "faces")


@dataclass
class FeatureStack:
    """Feature maps for a video, keyed by feature name.

    Each entry is an array of shape ``(n_frames, H, W)`` or ``(1, H, W)``;
    the latter is a time-independent map shared by all frames.
    """
    geometry: SceneGeometry
    names: tuple[str, ...]
    maps: dict
    n_frames: int

    def __post_init__(self):
        self.names = tuple(self.names)
        if set(self.maps) != set(self.names):
            raise ValueError("maps keys must match names")
        maps = {}
        for name in self.names:
            arr = np.asarray(self.maps[name], dtype=np.float64)
            if arr.ndim == 2:
                arr = arr[None]
            if arr.shape[1:] != self.geometry.shape:
                raise ValueError(f"feature {name!r} has shape {arr.shape[1:]}, "
                                 f"expected {self.geometry.shape}")
            if arr.shape[0] not in (1, self.n_frames):
                raise ValueError(f"feature {name!r} has {arr.shape[0]} frames, "
                                 f"expected 1 or {self.n_frames}")
            maps[name] = arr
        self.maps = maps

    def raw(self, name: str, frame_index: int) -> np.ndarray:
        arr = self.maps[name]
        if not 0 <= frame_index < self.n_frames:
            raise IndexError(f"frame {frame_index} out of range")
        return arr[0] if arr.shape[0] == 1 else arr[frame_index]

    def frame(self, frame_index: int, names: Optional[Sequence[str]] = None) -> dict:
        """pdf-normalized maps of one frame as ``{name: DensityMap}``."""
        names = self.names if names is None else names
        return {n: normalize_to_pdf(self.raw(n, frame_index), self.geometry) for n in names}

    def frame_array(self, frame_index: int, names: Optional[Sequence[str]] = None,
                    downsample: int = 1) -> np.ndarray:
        """pdf-normalized maps stacked as ``(K, H, W)``, optionally block-averaged."""
        names = self.names if names is None else names
        if downsample != 1:
            return self.downsampled(downsample).frame_array(frame_index, names)
        out = np.clip(np.stack([self.raw(n, frame_index) for n in names]), 0.0, None)
        sums = out.sum(axis=(1, 2), keepdims=True)
        if np.any(sums <= 0):
            bad = [n for n, s in zip(names, sums.ravel()) if s <= 0]
            raise AllZeroMap(f"feature maps with no mass at frame {frame_index}: {bad}")
        return out / sums

    def downsampled(self, factor: int) -> "FeatureStack":
        """Block-averaged copy; time-independent maps stay single-frame."""
        if factor == 1:
            return self
        cache = self.__dict__.setdefault("_downsampled", {})
        if factor not in cache:
            maps = {n: block_average(self.maps[n], factor) for n in self.names}
            cache[factor] = FeatureStack(self.geometry.downsampled(factor), self.names, maps, self.n_frames)
        return cache[factor]

    def subset(self, names: Sequence[str]) -> "FeatureStack":
        return FeatureStack(self.geometry, tuple(names), {n: self.maps[n] for n in names}, self.n_frames)


def center_bias_map(geometry: SceneGeometry, sigma_x_deg: float = 2.3,
                    sigma_y_deg: float = 1.9) -> DensityMap:
    """Anisotropic Gaussian centered on the screen center."""
    if sigma_x_deg <= 0 or sigma_y_deg <= 0:
        raise ValueError("sigmas must be > 0")
    sx = deg_to_px(sigma_x_deg, "horizontal", geometry)
    sy = deg_to_px(sigma_y_deg, "vertical", geometry)
    cx, cy = (geometry.width_px - 1) / 2.0, (geometry.height_px - 1) / 2.0
    gx = np.exp(-0.5 * ((np.arange(geometry.width_px) - cx) / sx) ** 2)
    gy = np.exp(-0.5 * ((np.arange(geometry.height_px) - cy) / sy) ** 2)
    return normalize_to_pdf(np.outer(gy, gx), geometry)


def uniform_map(geometry: SceneGeometry, flag: Optional[str] = None) -> DensityMap:
    return DensityMap(geometry, uniform_values(geometry), flag)


def face_map(mask, geometry: SceneGeometry, blur_sigma_deg: float = 0.0) -> DensityMap:
    """Face mask (binary or graded) as a density; empty masks give the flagged uniform map."""
    mask = np.clip(np.asarray(mask, dtype=np.float64), 0.0, None)
    if mask.shape != geometry.shape:
        raise ValueError(f"mask shape {mask.shape} does not match {geometry.shape}")
    if not np.any(mask > 0):
        return uniform_map(geometry, flag="EmptyMask")
    if blur_sigma_deg > 0:
        sigma = deg_to_px(blur_sigma_deg, "horizontal", geometry)
        mask = ndimage.gaussian_filter(mask, sigma, mode="constant", truncate=4.0)
    return normalize_to_pdf(mask, geometry)


@dataclass(frozen=True)
class GaborBankSpec:
    n_orientations: int = 4
    n_scales: int = 2
    wavelengths_px: tuple = (4.0, 8.0)
    bandwidth: float = 1.0  # octaves

    def __post_init__(self):
        if self.n_orientations < 2 or self.n_scales < 1:
            raise ValueError("need >= 2 orientations and >= 1 scale")
        if len(self.wavelengths_px) != self.n_scales:
            raise ValueError("one wavelength per scale required")
        if any(b <= a for a, b in zip(self.wavelengths_px, self.wavelengths_px[1:])):
            raise ValueError("wavelengths must be strictly increasing")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be > 0")


def gabor_kernel(wavelength: float, theta: float, bandwidth: float) -> np.ndarray:
    """Complex zero-mean Gabor kernel; envelope width set by the octave bandwidth."""
    b = 2.0 ** bandwidth
    sigma = wavelength / math.pi * math.sqrt(math.log(2) / 2) * (b + 1) / (b - 1)
    half = int(math.ceil(3 * sigma))
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1].astype(np.float64)
    xr = xx * math.cos(theta) + yy * math.sin(theta)
    envelope = np.exp(-0.5 * (xx ** 2 + yy ** 2) / sigma ** 2)
    kernel = envelope * np.exp(1j * 2 * math.pi * xr / wavelength)
    kernel -= envelope * (kernel.sum() / envelope.sum())
    return kernel


def static_saliency(luma, spec: GaborBankSpec = GaborBankSpec(),
                    geometry: Optional[SceneGeometry] = None) -> DensityMap:
    """Luminance orientation/frequency contrast from a Gabor bank.

    Each filter's response modulus r is reinforced as r**2 / max(r) before the
    bank is summed, which favors isolated strong maxima over diffuse texture.
    """
    luma = np.asarray(luma, dtype=np.float64)
    if geometry is None:
        geometry = _geometry_for(luma)
    if np.ptp(luma) == 0:
        return uniform_map(geometry, flag="FlatInput")
    total = np.zeros_like(luma)
    for wavelength in spec.wavelengths_px:
        for i in range(spec.n_orientations):
            theta = math.pi * i / spec.n_orientations
            k = gabor_kernel(wavelength, theta, spec.bandwidth)
            re = ndimage.convolve(luma, k.real, mode="reflect")
            im = ndimage.convolve(luma, k.imag, mode="reflect")
            r = np.hypot(re, im)
            peak = r.max()
            if peak > 0:
                total += r * r / peak
    if not total.max() > 1e-12 * max(np.abs(luma).max(), 1.0):
        return uniform_map(geometry, flag="FlatInput")
    return normalize_to_pdf(total, geometry)


def dynamic_saliency(frames: Sequence, geometry: Optional[SceneGeometry] = None) -> DensityMap:
    """Motion amplitude over a 5-frame window, denoised by a temporal median.

    Five difference maps are formed: the four adjacent-pair differences and
    the span difference |f4 - f0|.  Their per-pixel median removes changes
    that appear in a single frame only.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if len(frames) != 5:
        raise ValueError("dynamic saliency needs exactly 5 frames")
    if any(f.shape != frames[0].shape for f in frames):
        raise ValueError("frames differ in shape")
    if geometry is None:
        geometry = _geometry_for(frames[0])
    diffs = [np.abs(b - a) for a, b in zip(frames, frames[1:])]
    if not any(np.any(d > 0) for d in diffs):
        return uniform_map(geometry, flag="StaticWindow")
    diffs.append(np.abs(frames[4] - frames[0]))
    med = np.median(np.stack(diffs), axis=0)
    if not np.any(med > 0):
        return uniform_map(geometry, flag="StaticWindow")
    return normalize_to_pdf(med, geometry)


def window_indices(t: int, n_frames: int) -> list[int]:
    """Five frame indices centered on ``t``, clamped at the sequence ends."""
    return [min(max(t + d, 0), n_frames - 1) for d in range(-2, 3)]


def _geometry_for(arr: np.ndarray) -> SceneGeometry:
    # Degrees are irrelevant to the contrast/motion builders; keep 1 px/deg.
    h, w = arr.shape
    return SceneGeometry(w, h, float(w), float(h))


def downsample_map(dmap: DensityMap, factor: int) -> DensityMap:
    return normalize_to_pdf(block_average(dmap.values, factor), dmap.geometry.downsampled(factor), dmap.flag)


def build_stack(geometry: SceneGeometry, n_frames: int, names: Sequence[str],
                luma_frames: Optional[Sequence] = None, face_masks: Optional[Mapping] = None,
                center_sigma_deg: tuple = (2.3, 1.9), face_blur_deg: float = 0.0,
                gabor: GaborBankSpec = GaborBankSpec()) -> tuple[FeatureStack, list]:
    """Compute the requested feature maps for a whole video.

    Returns the stack and a list of ``(frame_index, feature, flag)`` fallback events.
    """
    maps, events = {}, []
    needs_luma = {"static", "dynamic"} & set(names)
    if needs_luma and (luma_frames is None or len(luma_frames) < n_frames):
        raise ValueError(f"features {sorted(needs_luma)} need {n_frames} luminance frames")
    for name in names:
        if name == "center_bias":
            maps[name] = center_bias_map(geometry, *center_sigma_deg).values[None]
        elif name == "uniform":
            maps[name] = uniform_values(geometry)[None]
        elif name == "faces":
            if face_masks is None:
                raise ValueError("faces feature requires face masks")
            arr = np.empty((n_frames,) + geometry.shape)
            for t in range(n_frames):
                m = face_map(face_masks[t], geometry, face_blur_deg)
                arr[t] = m.values
                if m.flag:
                    events.append((t, name, m.flag))
            maps[name] = arr
        elif name == "static":
            arr = np.empty((n_frames,) + geometry.shape)
            for t in range(n_frames):
                m = static_saliency(luma_frames[t], gabor, geometry)
                arr[t] = m.values
                if m.flag:
                    events.append((t, name, m.flag))
            maps[name] = arr
        elif name == "dynamic":
            arr = np.empty((n_frames,) + geometry.shape)
            for t in range(n_frames):
                window = [luma_frames[i] for i in window_indices(t, n_frames)]
                m = dynamic_saliency(window, geometry)
                arr[t] = m.values
                if m.flag:
                    events.append((t, name, m.flag))
            maps[name] = arr
        else:
            raise ValueError(f"unknown feature {name!r}")
    return FeatureStack(geometry, tuple(names), maps, n_frames), events
