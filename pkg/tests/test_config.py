import pytest

from saliency_fusion.config import ConfigError, RunConfig, VideoConfig, load_config
from saliency_fusion.grid import SceneGeometry

BASIC = """
[geometry]
width_px = 160
height_px = 128
width_deg = 28
height_deg = 22.5

[run]
methods = LS, EM
schemes = MEAN
downsample = 2
kld_direction = model||eye

[features]
names = center_bias, uniform

[data]
gaze = gaze.csv

[video clip1]
category = faces
n_frames = 10
"""


def test_parse_basic(tmp_path):
    cfg = RunConfig.from_ini(BASIC, tmp_path)
    assert cfg.geometry == SceneGeometry(160, 128, 28.0, 22.5, 25.0)
    assert cfg.methods == ("LS", "EM") and cfg.schemes == ("MEAN",)
    assert cfg.features == ("center_bias", "uniform")
    assert cfg.video("clip1") == VideoConfig("clip1", "faces", 10)
    assert cfg.resolve(cfg.gaze) == tmp_path / "gaze.csv"
    with pytest.raises(ConfigError):
        cfg.video("nope")


def test_round_trip_lossless(tmp_path):
    cfg = RunConfig.from_ini(BASIC, tmp_path)
    cfg.videos.append(VideoConfig("clip2", "one_mo", None, "frames/c2", "faces/c2", "c2.fmap"))
    assert RunConfig.from_ini(cfg.to_ini(), tmp_path) == cfg
    default = RunConfig(SceneGeometry(720, 576, 28.0, 22.5))
    assert RunConfig.from_ini(default.to_ini()) == default


@pytest.mark.parametrize("patch", [
    ("downsample = 2", "downsample = 3"),
    ("methods = LS, EM", "methods = LARS"),
    ("schemes = MEAN", "schemes = MAX"),
    ("kld_direction = model||eye", "kld_direction = both"),
    ("width_px = 160", "width_px = abc"),
    ("category = faces", ""),
    ("[geometry]", "[geom]"),
])
def test_invalid_configs(patch, tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_ini(BASIC.replace(*patch), tmp_path)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.ini")


def test_inline_comments(tmp_path):
    text = BASIC.replace("gaze = gaze.csv", "gaze = gaze.csv   ; eye positions").replace(
        "[geometry]", "[geometry]  ; required")
    cfg = RunConfig.from_ini(text, tmp_path)
    assert cfg.gaze == "gaze.csv" and cfg.geometry.width_px == 160
