"""Run configuration: an INI file with ``[run]``, ``[geometry]``,
``[features]``, ``[data]``, ``[synth]`` and one ``[video <id>]`` section per
video.  Relative paths are resolved against the config file's directory."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import SaliencyFusionError
from .estimators import METHODS
from .features import DEFAULT_FEATURES
from .fusion import PLATEAU_START, SCHEMES
from .grid import SceneGeometry
from .metrics import KLD_EPSILON


class ConfigError(SaliencyFusionError):
    pass


def _split(value: str) -> tuple:
    return tuple(v.strip() for v in value.split(",") if v.strip())


@dataclass
class VideoConfig:
    video_id: str
    category: str
    n_frames: Optional[int] = None
    frames: Optional[str] = None  # directory of PGM luminance frames
    faces: Optional[str] = None   # directory of PGM face masks
    fmap: Optional[str] = None    # precomputed FMAP file


@dataclass
class RunConfig:
    geometry: SceneGeometry
    features: tuple = DEFAULT_FEATURES
    methods: tuple = METHODS
    schemes: tuple = SCHEMES
    downsample: int = 4
    n_lambda: int = 100
    nonnegative_ls: bool = False
    kld_epsilon: float = KLD_EPSILON
    kld_direction: str = "eye||model"
    period_split: int = 15
    plateau_start: int = PLATEAU_START
    kernel_sigma_deg: float = 1.0
    center_sigma_deg: tuple = (2.3, 1.9)
    face_blur_deg: float = 0.0
    gabor_orientations: int = 4
    gabor_wavelengths_px: tuple = (4.0, 8.0)
    gabor_bandwidth: float = 1.0
    gaze: Optional[str] = None
    weights: Optional[str] = None
    scores: Optional[str] = None
    seed: int = 0
    synth_n_videos: int = 5
    synth_n_frames: int = 50
    synth_n_observers: int = 15
    synth_categories: tuple = ("faces", "landscapes", "one_mo")
    videos: list = field(default_factory=list)
    base_dir: Path = field(default=Path("."), compare=False)

    def resolve(self, path: Optional[str]) -> Optional[Path]:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def video(self, video_id: str) -> VideoConfig:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise ConfigError(f"video {video_id!r} is not declared in the config")

    def validate(self):
        if self.downsample < 1:
            raise ConfigError("downsample must be >= 1")
        try:
            self.geometry.downsampled(self.downsample)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        bad = set(self.schemes) - set(SCHEMES)
        if bad:
            raise ConfigError(f"unknown schemes {sorted(bad)}")
        if self.kld_direction not in ("eye||model", "model||eye"):
            raise ConfigError(f"unknown kld_direction {self.kld_direction!r}")
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate video ids")

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        g = self.geometry
        cp["run"] = {
            "seed": str(self.seed), "downsample": str(self.downsample),
            "n_lambda": str(self.n_lambda), "methods": ", ".join(self.methods),
            "schemes": ", ".join(self.schemes), "nonnegative_ls": str(self.nonnegative_ls).lower(),
            "kld_epsilon": repr(self.kld_epsilon), "kld_direction": self.kld_direction,
            "period_split": str(self.period_split), "plateau_start": str(self.plateau_start),
            "kernel_sigma_deg": repr(self.kernel_sigma_deg),
        }
        cp["geometry"] = {"width_px": str(g.width_px), "height_px": str(g.height_px),
                          "width_deg": repr(g.width_deg), "height_deg": repr(g.height_deg),
                          "fps": repr(g.fps)}
        cp["features"] = {
            "names": ", ".join(self.features),
            "center_sigma_x_deg": repr(self.center_sigma_deg[0]),
            "center_sigma_y_deg": repr(self.center_sigma_deg[1]),
            "face_blur_deg": repr(self.face_blur_deg),
            "gabor_orientations": str(self.gabor_orientations),
            "gabor_wavelengths_px": ", ".join(repr(w) for w in self.gabor_wavelengths_px),
            "gabor_bandwidth": repr(self.gabor_bandwidth),
        }
        cp["data"] = {k: v for k, v in (("gaze", self.gaze), ("weights", self.weights),
                                        ("scores", self.scores)) if v is not None}
        cp["synth"] = {"n_videos": str(self.synth_n_videos), "n_frames": str(self.synth_n_frames),
                       "n_observers": str(self.synth_n_observers),
                       "categories": ", ".join(self.synth_categories)}
        for v in self.videos:
            sec = {"category": v.category}
            for key in ("n_frames", "frames", "faces", "fmap"):
                val = getattr(v, key)
                if val is not None:
                    sec[key] = str(val)
            cp[f"video {v.video_id}"] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str, base_dir: Path = Path(".")) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from None
        try:
            return cls._from_parser(cp, Path(base_dir))
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid config: {exc}") from None

    @classmethod
    def _from_parser(cls, cp, base_dir: Path) -> "RunConfig":
        if "geometry" not in cp:
            raise ConfigError("config needs a [geometry] section")
        g = cp["geometry"]
        missing = [k for k in ("width_px", "height_px", "width_deg", "height_deg") if k not in g]
        if missing:
            raise ConfigError(f"[geometry] is missing {', '.join(missing)}")
        geometry = SceneGeometry(int(g["width_px"]), int(g["height_px"]), float(g["width_deg"]),
                                 float(g["height_deg"]), g.getfloat("fps", 25.0))
        run = cp["run"] if "run" in cp else {}
        feat = cp["features"] if "features" in cp else {}
        data = cp["data"] if "data" in cp else {}
        synth = cp["synth"] if "synth" in cp else {}

        def get(sec, key, conv, default):
            return conv(sec[key]) if key in sec else default

        to_bool = lambda s: s.strip().lower() in ("1", "true", "yes", "on")
        cfg = cls(
            geometry=geometry,
            features=get(feat, "names", _split, DEFAULT_FEATURES),
            methods=get(run, "methods", _split, METHODS),
            schemes=get(run, "schemes", _split, SCHEMES),
            downsample=get(run, "downsample", int, 4),
            n_lambda=get(run, "n_lambda", int, 100),
            nonnegative_ls=get(run, "nonnegative_ls", to_bool, False),
            kld_epsilon=get(run, "kld_epsilon", float, KLD_EPSILON),
            kld_direction=get(run, "kld_direction", str.strip, "eye||model"),
            period_split=get(run, "period_split", int, 15),
            plateau_start=get(run, "plateau_start", int, PLATEAU_START),
            kernel_sigma_deg=get(run, "kernel_sigma_deg", float, 1.0),
            center_sigma_deg=(get(feat, "center_sigma_x_deg", float, 2.3),
                              get(feat, "center_sigma_y_deg", float, 1.9)),
            face_blur_deg=get(feat, "face_blur_deg", float, 0.0),
            gabor_orientations=get(feat, "gabor_orientations", int, 4),
            gabor_wavelengths_px=get(feat, "gabor_wavelengths_px",
                                     lambda s: tuple(float(x) for x in _split(s)), (4.0, 8.0)),
            gabor_bandwidth=get(feat, "gabor_bandwidth", float, 1.0),
            gaze=get(data, "gaze", str.strip, None),
            weights=get(data, "weights", str.strip, None),
            scores=get(data, "scores", str.strip, None),
            seed=get(run, "seed", int, 0),
            synth_n_videos=get(synth, "n_videos", int, 5),
            synth_n_frames=get(synth, "n_frames", int, 50),
            synth_n_observers=get(synth, "n_observers", int, 15),
            synth_categories=get(synth, "categories", _split, ("faces", "landscapes", "one_mo")),
            base_dir=base_dir,
        )
        for name in cp.sections():
            if not name.startswith("video "):
                continue
            sec = cp[name]
            if "category" not in sec:
                raise ConfigError(f"[{name}] needs a category")
            cfg.videos.append(VideoConfig(
                name[len("video "):].strip(), sec["category"].strip(),
                sec.getint("n_frames") if "n_frames" in sec else None,
                sec.get("frames"), sec.get("faces"), sec.get("fmap")))
        cfg.validate()
        return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return RunConfig.from_ini(text, path.parent)
