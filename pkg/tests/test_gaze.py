import io

import numpy as np
import pytest

from saliency_fusion.errors import MissingHeader, NoValidPositions
from saliency_fusion.gaze import (GazeRecord, eye_position_density, gaze_table_from_text, parse_gaze_csv,
                                  write_gaze_csv)
from saliency_fusion.grid import PAL_GEOMETRY, deg_to_px

from oracles import gaussian_mass_within

HEADER = "video_id,observer_id,frame_index,x_px,y_px\n"


def test_single_row():
    t = gaze_table_from_text(HEADER + "v1,s1,0,360.0,288.0\n", PAL_GEOMETRY)
    assert len(t) == 1 and t.frames("v1") == [0]
    assert t.positions("v1", 0) == [(360.0, 288.0)]


def test_header_only_is_empty():
    t = gaze_table_from_text(HEADER, PAL_GEOMETRY)
    assert len(t) == 0 and t.n_skipped == 0


def test_nan_row_skipped(caplog):
    t = gaze_table_from_text(HEADER + "v1,s1,0,NaN,288.0\n", PAL_GEOMETRY)
    assert len(t) == 0 and t.n_skipped == 1
    assert "skipped" in caplog.text


def test_malformed_rows_counted():
    text = HEADER + "v1,s1,0,1,2\nv1,s2,x,1,2\nv1,s3,0,1\nv1,s4,-1,1,2\nv1,s5,1,abc,2\n"
    t = gaze_table_from_text(text, PAL_GEOMETRY)
    assert len(t) == 1 and t.n_skipped == 4


def test_missing_header():
    with pytest.raises(MissingHeader):
        gaze_table_from_text("v1,s1,0,1,2\n", PAL_GEOMETRY)
    with pytest.raises(MissingHeader):
        gaze_table_from_text("", PAL_GEOMETRY)


def test_offscreen_flagged_and_excluded():
    t = gaze_table_from_text(HEADER + "v1,s1,0,720.0,10\nv1,s2,0,10,10\nv1,s3,0,-1,10\n", PAL_GEOMETRY)
    assert len(t) == 3
    assert t.positions("v1", 0) == [(10.0, 10.0)]
    assert len(t.positions("v1", 0, on_screen_only=False)) == 3
    assert not GazeRecord("v", "s", 0, 720.0, 0.0).on_screen(PAL_GEOMETRY)


def test_duplicate_observer_detected():
    t = gaze_table_from_text(HEADER + "v1,s1,0,1,1\nv1,s1,0,2,2\n", PAL_GEOMETRY)
    with pytest.raises(ValueError):
        t.check_unique()


def test_csv_round_trip():
    recs = [GazeRecord("v1", "s1", 0, 1.5, 2.25), GazeRecord("v2", "s3", 4, 700.125, 0.0)]
    buf = io.StringIO()
    write_gaze_csv(recs, buf)
    t = parse_gaze_csv(io.StringIO(buf.getvalue()), PAL_GEOMETRY)
    assert t.records == recs


def test_density_single_position_mode():
    m = eye_position_density([(360, 288)], PAL_GEOMETRY)
    assert m.argmax() == (360, 288)
    assert abs(m.values.sum() - 1) < 1e-12


def test_density_two_positions_mass():
    pos = [(100, 100), (600, 500)]
    m = eye_position_density(pos, PAL_GEOMETRY)
    sigma = deg_to_px(1.0, "horizontal", PAL_GEOMETRY)
    yy, xx = np.mgrid[0:576, 0:720]
    for x, y in pos:
        mass = m.values[(xx - x) ** 2 + (yy - y) ** 2 <= (3 * sigma) ** 2].sum()
        assert mass == pytest.approx(0.5, abs=0.01)
        assert mass == pytest.approx(gaussian_mass_within(x, y, sigma, 3 * sigma, pos, (576, 720)), abs=1e-9)


def test_density_multiplicity_cancels():
    one = eye_position_density([(200.0, 150.0)], PAL_GEOMETRY).values
    many = eye_position_density([(200.0, 150.0)] * 15, PAL_GEOMETRY).values
    assert np.max(np.abs(one - many)) < 1e-12


def test_density_no_valid_positions():
    with pytest.raises(NoValidPositions):
        eye_position_density([(-5, 3), (800, 2)], PAL_GEOMETRY)
