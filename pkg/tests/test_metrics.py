import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saliency_fusion.errors import GeometryMismatch, NoValidFixations
from saliency_fusion.features import uniform_map
from saliency_fusion.grid import DensityMap, SceneGeometry, normalize_to_pdf
from saliency_fusion.metrics import (FIRST_15, REST, FrameScore, kld, nss, period_of, period_summary,
                                     read_scores_csv, read_summary_csv, write_scores_csv, write_summary_csv)

import oracles

G4 = SceneGeometry(4, 4, 1.0, 1.0)


def test_nss_uniform_is_zero():
    assert nss(uniform_map(G4), [(0, 0), (3, 2)]) == 0.0


def test_nss_one_hot():
    v = np.zeros((4, 4))
    v[1, 2] = 1
    assert nss(DensityMap(G4, v), [(2, 1)]) == pytest.approx(oracles.NSS_ONE_HOT_16, abs=1e-12)
    assert nss(DensityMap(G4, v), [(2, 1)]) == pytest.approx(3.8730, abs=1e-4)


def test_nss_full_coverage():
    v = normalize_to_pdf(np.random.default_rng(0).uniform(size=(4, 4)), G4)
    fix = [(x, y) for y in range(4) for x in range(4)]
    assert abs(nss(v, fix)) < 1e-9


def test_nss_offscreen_only():
    with pytest.raises(NoValidFixations):
        nss(uniform_map(G4), [(-1, 0), (4, 0)])


def test_kld_examples():
    g = SceneGeometry(2, 1, 1.0, 1.0)
    p, q = DensityMap(g, [[0.7, 0.3]]), DensityMap(g, [[0.5, 0.5]])
    assert kld(p, q) == pytest.approx(oracles.KLD_07_03_VS_HALF, abs=1e-10)
    assert kld(p, q) == pytest.approx(0.08228, abs=1e-5)
    assert kld(p, p) < 1e-9
    assert kld(q, p, direction="model||eye") == pytest.approx(kld(p, q), abs=1e-12)


def test_kld_missing_mass_penalized():
    g = SceneGeometry(2, 1, 1.0, 1.0)
    p, q = DensityMap(g, [[0.5, 0.5]]), DensityMap(g, [[1.0, 0.0]])
    vals = [kld(p, q, eps) for eps in (1e-12, 1e-9, 1e-6, 1e-3)]
    assert vals[0] > 5
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_kld_errors():
    with pytest.raises(GeometryMismatch):
        kld(uniform_map(G4), uniform_map(SceneGeometry(2, 2, 1, 1)))
    with pytest.raises(ValueError):
        kld(uniform_map(G4), uniform_map(G4), direction="sym")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.01, 100), st.floats(-5, 5))
def test_nss_affine_invariance(seed, a, b):
    r = np.random.default_rng(seed)
    v = r.uniform(size=(4, 4))
    fix = [tuple(r.integers(0, 4, 2)) for _ in range(5)]
    base = nss(DensityMap(G4, v), fix)
    assert nss(DensityMap(G4, a * v + b), fix) == pytest.approx(base, abs=1e-9)


def _scores(values):
    return [FrameScore(vid, f, "S", x, 0.0) for vid, f, x in values]


def test_period_summary_constant():
    out = period_summary(_scores([("v", f, 0.5) for f in range(50)]))
    assert [(s.period, s.mean, s.sem, s.n) for s in out] == [(FIRST_15, 0.5, 0.0, 1), (REST, 0.5, 0.0, 1)]


def test_period_summary_two_videos():
    out = period_summary(_scores([("a", f, 0.4) for f in range(15)] + [("b", f, 0.6) for f in range(15)]))
    assert len(out) == 1 and out[0].mean == pytest.approx(0.5) and out[0].sem == pytest.approx(0.1)


def test_split_boundary():
    assert period_of(14) == FIRST_15 and period_of(15) == REST
    out = period_summary(_scores([("v", 14, 1.0), ("v", 15, 3.0)]))
    assert {s.period: s.mean for s in out} == {FIRST_15: 1.0, REST: 3.0}


def test_video_is_unit_of_analysis():
    # a long video does not outweigh a short one
    rows = [("a", f, 1.0) for f in range(15)] + [("b", 0, 0.0)]
    out = period_summary(_scores(rows))
    assert out[0].mean == 0.5 and out[0].n == 2


def test_csv_round_trips():
    scores = [FrameScore("v1", 3, "MEAN", 1.25, 0.5, "faces"), FrameScore("v2", 0, "MARAT2009", -0.1, 3.0, "x")]
    buf = io.StringIO()
    write_scores_csv(scores, buf)
    assert read_scores_csv(io.StringIO(buf.getvalue())) == scores
    summ = period_summary(scores) + period_summary(scores, metric="kld")
    buf = io.StringIO()
    write_summary_csv(summ, buf)
    assert read_summary_csv(io.StringIO(buf.getvalue())) == summ
