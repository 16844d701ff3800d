"""Command-line entry point: ``features | fit | evaluate | synth | report``.

Every subcommand takes ``--config``, ``--out``, ``--seed`` and ``--jobs``;
everything else comes from the config file.  Exit codes: 0 success, 1
internal error, 2 input or validation error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

from .config import ConfigError, RunConfig, VideoConfig, load_config
from .errors import SaliencyFusionError
from .features import DEFAULT_FEATURES, GaborBankSpec, build_stack
from .fmap import read_fmap, read_pgm, write_fmap
from .fusion import LEARNED_METHOD, WeightDatabase
from .gaze import GazeTable, parse_gaze_csv, write_gaze_csv
from .metrics import period_summary, read_scores_csv, write_scores_csv, write_summary_csv
from .pipeline import VideoInput, available_schemes, fit_video, score_video
from .report import score_charts, weight_charts
from .synth import CATEGORY_SCHEDULES, make_benchmark

log = logging.getLogger("saliency_fusion")

JOBS_ENV = "SALIENCY_FUSION_JOBS"
FRAME_PATTERN = "{:05d}.pgm"
TRUTH_METHOD = "TRUTH"


class InputError(SaliencyFusionError):
    """Missing or unreadable input file."""


def _jobs(flag) -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return max(1, flag or 1)


def _parallel_map(fn: Callable, items: Sequence, jobs: int) -> list:
    """Order-preserving map; results are written by the caller only."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _read_weights(path: Path) -> WeightDatabase:
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            return WeightDatabase.read_csv(fh)
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None


def _require(path: Path, what: str) -> Path:
    if path is None or not Path(path).is_file():
        raise InputError(f"{what} not found: {path}")
    return Path(path)


def _fmap_path(cfg: RunConfig, v: VideoConfig, out: Path) -> Path:
    return cfg.resolve(v.fmap) if v.fmap else out / "features" / f"{v.video_id}.fmap"


def _weights_path(cfg: RunConfig, out: Path) -> Path:
    return cfg.resolve(cfg.weights) if cfg.weights else out / "weights.csv"


def _scores_path(cfg: RunConfig, out: Path) -> Path:
    return cfg.resolve(cfg.scores) if cfg.scores else out / "scores.csv"


def _load_stack(cfg: RunConfig, v: VideoConfig, out: Path):
    path = _require(_fmap_path(cfg, v, out), f"FMAP for video {v.video_id}")
    stack = read_fmap(path, cfg.geometry)
    if set(stack.names) != set(cfg.features):
        raise ConfigError(f"{path}: FMAP features {list(stack.names)} do not match "
                          f"config features {list(cfg.features)}")
    return stack.subset(cfg.features)


def _load_gaze(cfg: RunConfig) -> GazeTable:
    path = _require(cfg.resolve(cfg.gaze), "gaze CSV")
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        return GazeTable([], cfg.geometry, 0)
    return parse_gaze_csv(io.StringIO(text), cfg.geometry)


def _positions(table: GazeTable, video_id: str) -> dict:
    return {t: table.positions(video_id, t) for t in table.frames(video_id)}


# features ---------------------------------------------------------------

def _frame_files(directory: Path, n_frames: int, what: str) -> list[Path]:
    paths = [directory / FRAME_PATTERN.format(t) for t in range(n_frames)]
    for p in paths:
        if not p.is_file():
            raise InputError(f"missing {what} file: {p}")
    return paths


def _video_n_frames(cfg: RunConfig, v: VideoConfig) -> int:
    if v.n_frames is not None:
        return v.n_frames
    for d in (v.frames, v.faces):
        if d:
            n = len(list(cfg.resolve(d).glob("*.pgm")))
            if n:
                return n
    raise ConfigError(f"video {v.video_id}: set n_frames or provide frame files")


def _features_job(args):
    cfg, v, out = args
    n = _video_n_frames(cfg, v)
    luma = masks = None
    if {"static", "dynamic"} & set(cfg.features):
        if not v.frames:
            raise ConfigError(f"video {v.video_id}: static/dynamic features need a frames directory")
        luma = [read_pgm(p) for p in _frame_files(cfg.resolve(v.frames), n, "frame")]
    if "faces" in cfg.features:
        if not v.faces:
            raise ConfigError(f"video {v.video_id}: faces feature needs a faces directory")
        masks = [read_pgm(p) for p in _frame_files(cfg.resolve(v.faces), n, "face mask")]
    gabor = GaborBankSpec(cfg.gabor_orientations, len(cfg.gabor_wavelengths_px),
                          tuple(cfg.gabor_wavelengths_px), cfg.gabor_bandwidth)
    try:
        stack, events = build_stack(cfg.geometry, n, cfg.features, luma, masks,
                                    cfg.center_sigma_deg, cfg.face_blur_deg, gabor)
    except ValueError as exc:
        if isinstance(exc, SaliencyFusionError):
            raise
        raise ConfigError(f"video {v.video_id}: {exc}") from None
    path = out / "features" / f"{v.video_id}.fmap"
    write_fmap(path, stack)
    return v.video_id, n, stack.names, len(events), path


def cmd_features(cfg: RunConfig, out: Path, seed: int, jobs: int) -> int:
    if not cfg.videos:
        raise ConfigError("config declares no videos")
    (out / "features").mkdir(parents=True, exist_ok=True)
    results = _parallel_map(_features_job, [(cfg, v, out) for v in cfg.videos], jobs)
    for vid, n, names, n_events, path in results:
        print(f"{vid}: {n} frames x {len(names)} features ({', '.join(names)}), "
              f"{n_events} fallback maps -> {path}")
    return 0


# fit --------------------------------------------------------------------

def _fit_job(args):
    cfg, v, out, positions = args
    stack = _load_stack(cfg, v, out)
    return fit_video(VideoInput(v.video_id, v.category, stack, positions), cfg.methods,
                     cfg.downsample, cfg.n_lambda, cfg.nonnegative_ls, cfg.kernel_sigma_deg)


def cmd_fit(cfg: RunConfig, out: Path, seed: int, jobs: int) -> int:
    table = _load_gaze(cfg)
    out.mkdir(parents=True, exist_ok=True)
    db = WeightDatabase()
    skipped_rows = []
    if len(table) == 0:
        log.warning("gaze file has no records; writing an empty weight database")
    else:
        unknown = set(table.video_ids()) - {v.video_id for v in cfg.videos}
        if unknown:
            log.warning("gaze for undeclared videos ignored: %s", ", ".join(sorted(unknown)))
        items = [(cfg, v, out, _positions(table, v.video_id)) for v in cfg.videos]
        for v, (entries, skipped) in zip(cfg.videos, _parallel_map(_fit_job, items, jobs)):
            for vid, cat, t, method, wv in entries:
                db.add(vid, cat, t, method, wv)
            skipped_rows.extend((v.video_id, t) for t in skipped)
    with open(out / "weights.csv", "w", newline="", encoding="utf-8") as fh:
        db.write_csv(fh)
    with open(out / "skipped_frames.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("video_id", "frame_index", "reason"))
        writer.writerows((vid, t, "NoGazeData") for vid, t in skipped_rows)
    print(f"{len(db)} weight vectors -> {out / 'weights.csv'}; "
          f"{len(skipped_rows)} frames skipped (no gaze)")
    return 0


# evaluate ---------------------------------------------------------------

def _evaluate_job(args):
    cfg, v, out, positions, db = args
    stack = _load_stack(cfg, v, out)
    return score_video(VideoInput(v.video_id, v.category, stack, positions), cfg.schemes, db,
                       cfg.downsample, cfg.kld_epsilon, cfg.kld_direction,
                       cfg.kernel_sigma_deg, cfg.plateau_start)


def cmd_evaluate(cfg: RunConfig, out: Path, seed: int, jobs: int) -> int:
    if not cfg.videos:
        raise ConfigError("config declares no videos")
    missing = [s for s in cfg.schemes if s not in available_schemes(cfg.features, cfg.schemes)]
    if missing:
        log.warning("schemes skipped for lack of features: %s", ", ".join(missing))
    db = None
    if any(s in LEARNED_METHOD for s in cfg.schemes):
        db = _read_weights(_require(_weights_path(cfg, out), "weight CSV"))
    table = _load_gaze(cfg)
    out.mkdir(parents=True, exist_ok=True)
    items = [(cfg, v, out, _positions(table, v.video_id), db) for v in cfg.videos]
    scores = [s for chunk in _parallel_map(_evaluate_job, items, jobs) for s in chunk]
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        write_scores_csv(scores, fh)
    summaries = (period_summary(scores, cfg.period_split, "nss")
                 + period_summary(scores, cfg.period_split, "kld"))
    with open(out / "periods.csv", "w", newline="", encoding="utf-8") as fh:
        write_summary_csv(summaries, fh)
    print(f"{len(scores)} frame scores -> {out / 'scores.csv'}")
    for s in summaries:
        print(f"{s.metric.upper():4s} {s.scheme:14s} {s.period:9s} "
              f"mean={s.mean:.4f} sem={s.sem:.4f} n={s.n}")
    return 0


# synth ------------------------------------------------------------------

def _synth_job(args):
    video, out = args
    stack = video.stack()
    write_fmap(out / "features" / f"{video.video_id}.fmap", stack)
    return video.gaze_records(stack)


def cmd_synth(cfg: RunConfig, out: Path, seed: int, jobs: int) -> int:
    bad = set(cfg.features) - set(DEFAULT_FEATURES)
    if bad:
        raise ConfigError(f"synthetic scenes cannot generate features {sorted(bad)}")
    bad = set(cfg.synth_categories) - set(CATEGORY_SCHEDULES)
    if bad:
        raise ConfigError(f"unknown synthetic categories {sorted(bad)}; "
                          f"known: {sorted(CATEGORY_SCHEDULES)}")
    categories = {c: CATEGORY_SCHEDULES[c] for c in cfg.synth_categories}
    videos = make_benchmark(cfg.geometry, cfg.synth_n_videos, cfg.synth_n_frames,
                            cfg.synth_n_observers, seed, categories, cfg.features)
    (out / "features").mkdir(parents=True, exist_ok=True)
    records = [r for chunk in _parallel_map(_synth_job, [(v, out) for v in videos], jobs)
               for r in chunk]
    with open(out / "gaze.csv", "w", newline="", encoding="utf-8") as fh:
        write_gaze_csv(records, fh)
    truth = WeightDatabase()
    for v in videos:
        for t in range(v.spec.n_frames):
            truth.add(v.video_id, v.category, t, TRUTH_METHOD, v.spec.true_weights(t))
    with open(out / "truth.csv", "w", newline="", encoding="utf-8") as fh:
        truth.write_csv(fh)
    derived = dataclasses.replace(
        cfg, seed=seed, gaze="gaze.csv", weights=None, scores=None, base_dir=out,
        videos=[VideoConfig(v.video_id, v.category, v.spec.n_frames,
                            fmap=f"features/{v.video_id}.fmap") for v in videos])
    (out / "config.ini").write_text(derived.to_ini(), encoding="utf-8")
    print(f"{len(videos)} synthetic videos, {len(records)} gaze samples -> {out}")
    return 0


# report -----------------------------------------------------------------

def cmd_report(cfg: RunConfig, out: Path, seed: int, jobs: int) -> int:
    wpath = _require(_weights_path(cfg, out), "weight CSV")
    spath = _require(_scores_path(cfg, out), "score CSV")
    db = _read_weights(wpath)
    with open(spath, newline="", encoding="utf-8") as fh:
        try:
            scores = read_scores_csv(fh)
        except ValueError as exc:
            raise InputError(f"{spath}: {exc}") from None
    if not scores:
        raise InputError(f"score CSV has no rows: {spath}")
    if len(db) == 0:
        log.warning("weight CSV has no rows; no weight charts")
    out.mkdir(parents=True, exist_ok=True)
    charts = {**weight_charts(db), **score_charts(scores)}
    for name in sorted(charts):
        (out / name).write_text(charts[name], encoding="utf-8")
        print(out / name)
    return 0


COMMANDS = {"features": cmd_features, "fit": cmd_fit, "evaluate": cmd_evaluate,
            "synth": cmd_synth, "report": cmd_report}
HELP = {"features": "compute feature maps from frames and face masks into FMAP files",
        "fit": "learn per-frame feature weights from gaze data",
        "evaluate": "score fusion schemes with NSS and KLD under leave-one-out",
        "synth": "generate a synthetic benchmark with known weights",
        "report": "draw weight and score charts as SVG"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saliency-fusion",
                                     description="Learn and evaluate saliency feature fusion weights from eye data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, type=Path, help="INI run configuration")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
        p.add_argument("--jobs", type=int, default=None,
                       help=f"worker processes (env {JOBS_ENV} takes precedence)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        return COMMANDS[args.command](cfg, args.out, seed, _jobs(args.jobs))
    except (SaliencyFusionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
