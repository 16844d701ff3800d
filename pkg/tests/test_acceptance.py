"""Acceptance criteria 1-10.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting, so a failing criterion still reports its measured value.
"""
import io
import os
import time
from pathlib import Path

import numpy as np
import pytest

from saliency_fusion.benchmark import run_benchmark
from saliency_fusion.cli import main
from saliency_fusion.estimators import LASSO_BIC, RegressionProblem, em_fit, lasso_fit_bic, lasso_path, least_squares_fit
from saliency_fusion.features import DEFAULT_FEATURES, FeatureStack
from saliency_fusion.fmap import load_fmap, store_fmap
from saliency_fusion.fusion import WeightDatabase
from saliency_fusion.grid import PAL_GEOMETRY, DensityMap, SceneGeometry
from saliency_fusion.metrics import FIRST_15, REST, kld, nss
from saliency_fusion.pipeline import fit_frame
from saliency_fusion.synth import (CATEGORY_SCHEDULES, SyntheticSpec, frame_rng, gaussian_blob,
                                   make_synthetic_stack, random_layout, sample_fixations,
                                   sample_frame_positions, step_schedule)

from conftest import ACCEPTANCE
from oracles import brute_force_ls, brute_force_min_bic

DATASET_ENV = "SALIENCY_FUSION_DATASET"


def record(n, ok, detail):
    ACCEPTANCE[n] = ("PASS" if ok else "FAIL", detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def _random_problems(count=50, n=256, K=5):
    out = []
    for seed in range(count):
        r = np.random.default_rng(1000 + seed)
        X = r.uniform(size=(n, K))
        y = X @ r.normal(size=K) + 0.1 * r.standard_normal(n)
        out.append(RegressionProblem(y, X, tuple(f"f{k}" for k in range(K))))
    return out


def test_criterion_01_lasso_at_zero_is_ls():
    problems = _random_problems()
    t0 = time.perf_counter()
    worst = 0.0
    for p in problems:
        path = lasso_path(p, include_zero=True)
        worst = max(worst, float(np.max(np.abs(path.betas[-1].beta - least_squares_fit(p).beta))))
    elapsed = time.perf_counter() - t0
    record(1, worst < 1e-6 and elapsed < 5.0, f"max |lasso(0) - LS| = {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_lambda_max_all_zero():
    nonzero = sum(int(np.count_nonzero(lasso_path(p).betas[0].beta)) for p in _random_problems())
    record(2, nonzero == 0, f"{nonzero} nonzero coefficients at lambda_max over 50 problems")


def test_criterion_03_brute_force_oracle():
    worst_ls = worst_bic = 0.0
    for seed in range(20):
        r = np.random.default_rng(2000 + seed)
        X = r.uniform(0.1, 1.0, (16, 2))
        X /= X.sum(axis=0)
        b = r.uniform(0.2, 0.8)
        y = X @ [b, 1 - b] + 0.002 * r.standard_normal(16)
        p = RegressionProblem(y, X, ("a", "b"))
        worst_ls = max(worst_ls, float(np.max(np.abs(least_squares_fit(p).beta - brute_force_ls(y, X)))))
        sel = lasso_fit_bic(p)[0].beta
        worst_bic = max(worst_bic, float(np.max(np.abs(sel - brute_force_min_bic(y, X)))))
    record(3, worst_ls <= 2e-3 and worst_bic <= 2e-3,
           f"max deviation from grid search: LS {worst_ls:.2e}, Lasso-BIC {worst_bic:.2e}")


def test_criterion_04_em_recovery():
    g = SceneGeometry(96, 64, 12.0, 8.0)
    maps = np.stack([gaussian_blob(g, 16, 16, 4), gaussian_blob(g, 80, 16, 4), gaussian_blob(g, 48, 50, 4)])
    maps /= maps.sum(axis=(1, 2), keepdims=True)
    t0 = time.perf_counter()
    pos = sample_fixations(maps, [0.6, 0.3, 0.1], 10_000, 4)
    pix = [(int(x), int(y)) for x, y in pos]
    fit = em_fit(pix, maps, ("a", "b", "c"))
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(fit.pi - [0.6, 0.3, 0.1])))
    monotone = bool(np.all(np.diff(fit.loglik_trace) >= -1e-9))
    record(4, err <= 0.02 and monotone and elapsed < 10,
           f"pi = {np.round(fit.pi, 4).tolist()}, max error {err:.4f}, monotone={monotone}, {elapsed:.2f} s")


def test_criterion_05_uniform_shrunk_to_zero():
    late = CATEGORY_SCHEDULES["faces"][1]
    zeros = 0
    for seed in range(100):
        lay = random_layout(PAL_GEOMETRY, frame_rng(seed, 5000))
        spec = SyntheticSpec(PAL_GEOMETRY, step_schedule(DEFAULT_FEATURES, late, late, 1), DEFAULT_FEATURES,
                             lay, 15, seed)
        stack = make_synthetic_stack(spec)
        wv = fit_frame(0, sample_frame_positions(stack, spec, 0), stack, LASSO_BIC)
        zeros += wv["uniform"] == 0.0
    record(5, zeros >= 95, f"uniform weight exactly 0 in {zeros}/100 face-dominated frames")


def test_criterion_06_temporal_pattern():
    early, late = CATEGORY_SCHEDULES["faces"]
    n_frames = 30
    p1, p2 = [], []
    for seed in range(20):
        lay = random_layout(PAL_GEOMETRY, frame_rng(seed, 6000))
        spec = SyntheticSpec(PAL_GEOMETRY, step_schedule(DEFAULT_FEATURES, early, late, n_frames),
                             DEFAULT_FEATURES, lay, 15, seed)
        stack = make_synthetic_stack(spec)
        for t in range(n_frames):
            wv = fit_frame(t, sample_frame_positions(stack, spec, t, seed), stack, LASSO_BIC)
            (p1 if t < 15 else p2).append(wv.normalized("center_bias"))
    m1, m2 = float(np.mean(p1)), float(np.mean(p2))
    record(6, m1 >= 0.6 and m2 <= 0.4, f"mean normalized center-bias weight: period 1 {m1:.3f}, period 2 {m2:.3f}")


def test_criterion_07_fusion_ranking():
    t0 = time.perf_counter()
    res = run_benchmark()
    elapsed = time.perf_counter() - t0
    lasso1, mean1, em1 = (res.mean("nss", s, FIRST_15) for s in ("LEARNED_LASSO", "MEAN", "LEARNED_EM"))
    k = {(s, p): res.mean("kld", s, p) for s in ("LEARNED_LASSO", "MEAN") for p in (FIRST_15, REST)}
    ok = (lasso1 > mean1 and lasso1 >= em1 - 0.05
          and all(k[("LEARNED_LASSO", p)] < k[("MEAN", p)] for p in (FIRST_15, REST))
          and elapsed < 300)
    record(7, ok, f"NSS p1 LASSO {lasso1:.3f} / MEAN {mean1:.3f} / EM {em1:.3f}; "
                  f"KLD LASSO {k[('LEARNED_LASSO', FIRST_15)]:.3f},{k[('LEARNED_LASSO', REST)]:.3f} vs "
                  f"MEAN {k[('MEAN', FIRST_15)]:.3f},{k[('MEAN', REST)]:.3f}; {elapsed:.0f} s")


def test_criterion_08_metric_identities():
    g = SceneGeometry(24, 16, 3.0, 2.0)
    r = np.random.default_rng(8)
    worst_kld = worst_affine = worst_uniform = 0.0
    uniform = DensityMap(g, np.full(g.shape, 1.0 / g.n_pixels))
    for _ in range(100):
        v = r.uniform(size=g.shape) ** 3
        m = DensityMap(g, v / v.sum())
        fix = [(float(r.integers(0, 24)), float(r.integers(0, 16))) for _ in range(10)]
        worst_kld = max(worst_kld, kld(m, m))
        a, b = r.uniform(0.1, 10), r.uniform(-1, 1)
        worst_affine = max(worst_affine, abs(nss(DensityMap(g, a * m.values + b), fix) - nss(m, fix)))
        worst_uniform = max(worst_uniform, abs(nss(uniform, fix)))
    ok = worst_kld < 1e-9 and worst_affine < 1e-9 and worst_uniform == 0
    record(8, ok, f"max kld(p,p) {worst_kld:.1e}, max affine NSS change {worst_affine:.1e}, "
                  f"max |nss(uniform)| {worst_uniform:.1e}")


def _pipeline(root: Path, cfg: Path):
    for cmd in ("synth", "fit", "evaluate", "report"):
        config = cfg if cmd == "synth" else root / "config.ini"
        assert main([cmd, "--config", str(config), "--out", str(root), "--seed", "11", "--jobs", "2"]) == 0
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.suffix in (".csv", ".svg", ".fmap")}


def test_criterion_09_bit_exactness(tmp_path):
    r = np.random.default_rng(9)
    g = SceneGeometry(7, 5, 1.0, 1.0)
    stack = FeatureStack(g, ("a", "b"), {"a": r.uniform(size=(3, 5, 7)), "b": r.uniform(size=(5, 7))}, 3)
    buf = io.BytesIO()
    store_fmap(stack, buf)
    again = io.BytesIO()
    store_fmap(load_fmap(io.BytesIO(buf.getvalue())), again)
    fmap_ok = again.getvalue() == buf.getvalue()

    cfg = tmp_path / "synth.ini"
    cfg.write_text("[geometry]\nwidth_px = 160\nheight_px = 128\nwidth_deg = 28\nheight_deg = 22.5\n"
                   "[run]\nmethods = LASSO_BIC, EM\n[synth]\nn_videos = 2\nn_frames = 20\n")
    a = _pipeline(tmp_path / "run_a", cfg)
    b = _pipeline(tmp_path / "run_b", cfg)
    n_csv = sum(k.endswith(".csv") for k in a)
    n_svg = sum(k.endswith(".svg") for k in a)
    same = a == b
    record(9, fmap_ok and same and n_csv >= 5 and n_svg >= 3,
           f"FMAP byte round-trip {fmap_ok}; {n_csv} CSV + {n_svg} SVG + FMAP outputs identical across runs: {same}")


def test_criterion_10_dataset_faces(tmp_path):
    root = os.environ.get(DATASET_ENV)
    if not root or not (Path(root) / "config.ini").is_file():
        ACCEPTANCE[10] = ("SKIP", f"optional; set {DATASET_ENV} to a converted dataset directory with config.ini")
        pytest.skip("published eye-tracking dataset not available")
    assert main(["fit", "--config", str(Path(root) / "config.ini"), "--out", str(tmp_path)]) == 0
    with open(tmp_path / "weights.csv", newline="") as fh:
        db = WeightDatabase.read_csv(fh)
    per_feature = {}
    for (v, c, f, m), w in db.entries.items():
        if c.lower().startswith("face") and m == LASSO_BIC and f >= 15:
            for name, bn in zip(w.names, w.beta_norm):
                per_feature.setdefault(name, []).append(bn)
    means = {k: float(np.mean(v)) for k, v in per_feature.items()}
    ok = "faces" in means and all(means["faces"] > v for k, v in means.items() if k != "faces")
    record(10, ok, f"faces category, frames >= 15, mean normalized weights {means}")
