"""Command-line surface: detect, track, train, eval, model.

Exit codes: 0 success, 2 usage, 3 I/O, 4 data/content errors. Output
files are written to a temporary name and renamed on success, so a
failing command never leaves partial files behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from collections import Counter
from pathlib import Path

from . import __version__
from .cascade import (Detection, detect_eyes_in_face, detect_multiscale,
                      detection_center, train_cascade)
from .config import ConfigError, RunConfig, resolve_config
from .errors import (BlinkwatchError, CascadeXmlError, DatasetError,
                     ModelFormatError, PgmError, TrainingError)
from .evaluation import (compute_gdr1, compute_gdr2, compute_gdr3, eye_match,
                         load_bioid, per_sample_csv, render_report_table, report_csv)
from .imaging import GrayImage, read_pgm
from .model_io import load_model, parse_legacy_cascade_xml, read_model, save_model
from .tracker import (DrowsinessTracker, EyeObservation, TrackerConfig,
                      alert_record, assessment_record, compute_pitch)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4


class UsageError(Exception):
    pass


def atomic_write(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_models(cfg: RunConfig, need_eye: bool = True):
    if cfg.face_model is None:
        raise UsageError("a face model is required (--face-model)")
    if need_eye and cfg.eye_model is None:
        raise UsageError("an eye model is required (--eye-model)")
    face = read_model(cfg.face_model)
    eye = read_model(cfg.eye_model) if need_eye else None
    return face, eye


def analyze_image(image: GrayImage, face_model, eye_model, cfg: RunConfig):
    """Full single-image pipeline: face, eyes within it, pitch angle."""
    faces = detect_multiscale(face_model, image, cfg.scale_factor,
                              cfg.step_fraction, cfg.min_size, cfg.workers)
    face = faces[0] if faces else None
    left = right = None
    pitch = None
    if face is not None and eye_model is not None:
        left, right = detect_eyes_in_face(eye_model, image, face.rect,
                                          cfg.scale_factor, cfg.step_fraction,
                                          workers=cfg.workers)
        if left is not None and right is not None:
            lc = detection_center(left)
            rc = detection_center(right)
            if lc[0] < rc[0]:
                pitch = compute_pitch(lc, rc)
    return face, left, right, pitch


def _config_echo(cfg: RunConfig) -> str:
    return "\n".join(["# effective configuration"] + cfg.as_lines()) + "\n"


def _out_dir(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt_detection(d: Detection | None) -> str:
    if d is None:
        return "absent"
    r = d.rect
    return f"x={r.x} y={r.y} w={r.w} h={r.h} score={d.score:.4f}"


def cmd_detect(args, cfg: RunConfig) -> int:
    face_model, eye_model = _require_models(cfg)
    image = read_pgm(args.image)
    face, left, right, pitch = analyze_image(image, face_model, eye_model, cfg)
    if face is None:
        print("no face")
    else:
        print(f"face: {_fmt_detection(face)}")
        for name, det in (("left_eye", left), ("right_eye", right)):
            if det is None:
                print(f"{name}: absent")
            else:
                cx, cy = detection_center(det)
                print(f"{name}: cx={cx:.1f} cy={cy:.1f} ({_fmt_detection(det)})")
        print("pitch_deg: " + (f"{pitch:.4f}" if pitch is not None else "unavailable"))
    out = _out_dir(cfg)
    if out is not None:
        result = {
            "image": str(args.image),
            "face": None if face is None else vars(face.rect) | {"score": face.score},
            "left_eye": None if left is None else list(detection_center(left)),
            "right_eye": None if right is None else list(detection_center(right)),
            "pitch_deg": pitch,
        }
        atomic_write(out / "detect.json", json.dumps(result, indent=2) + "\n")
        from .plots import save_detection_figure
        fig_tmp = out / "detect.png"
        save_detection_figure(image, face, (left, right), pitch, fig_tmp)
        atomic_write(out / "run_config.txt", _config_echo(cfg))
    return EXIT_OK


def cmd_track(args, cfg: RunConfig) -> int:
    face_model, eye_model = _require_models(cfg)
    frames = sorted(Path(args.frames).glob("*.pgm"))
    if not frames:
        raise UsageError(f"no PGM frames found in {args.frames}")
    tracker = DrowsinessTracker(TrackerConfig(
        closure_threshold=cfg.closure_threshold,
        perclos_window=cfg.perclos_window,
        pitch_tolerance=cfg.pitch_tolerance,
        fps=cfg.fps,
    ))
    out = _out_dir(cfg)
    lines: list[str] = []
    records: list[dict] = []
    alerts: list[dict] = []
    level_counts: Counter = Counter()
    for index, frame_path in enumerate(frames):
        image = read_pgm(frame_path)
        _, left, right, _ = analyze_image(image, face_model, eye_model, cfg)
        lc = detection_center(left) if left is not None else None
        rc = detection_center(right) if right is not None else None
        if lc is not None and rc is not None and lc[0] >= rc[0]:
            rc = None  # degenerate geometry: keep the stronger half only
        obs = EyeObservation(index, index / cfg.fps, lc, rc)
        assessment, alert = tracker.update(obs)
        level_counts[int(assessment.level)] += 1
        line = assessment_record(assessment)
        lines.append(line)
        records.append(json.loads(line))
        if alert is not None:
            aline = alert_record(alert)
            lines.append(aline)
            alerts.append(json.loads(aline))
        if out is None:
            print(line)
            if alert is not None:
                print(aline)
    histogram = " ".join(f"level{lv}={level_counts.get(lv, 0)}" for lv in (0, 1, 2))
    summary = (f"frames={len(frames)} {histogram} "
               f"alerts={len(alerts)} "
               f"wakeups={sum(1 for a in alerts if a['to'] == 2)}")
    if out is not None:
        atomic_write(out / "track.jsonl", "\n".join(lines) + "\n")
        atomic_write(out / "summary.txt", summary + "\n\n" + _config_echo(cfg))
        from .plots import save_track_figure
        save_track_figure(records, alerts, cfg.closure_threshold, out / "timeline.png")
        print(summary)
    else:
        print(summary, file=sys.stderr)
    return EXIT_OK


def _load_patches(directory) -> list[GrayImage]:
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise UsageError(f"no PGM patches found in {directory}")
    return [read_pgm(p) for p in paths]


def cmd_train(args, cfg: RunConfig) -> int:
    pos = _load_patches(args.pos)
    neg = _load_patches(args.neg)

    def progress(stage, rounds, det, fp):
        print(f"stage {stage} round {rounds}: detection={det:.4f} fp={fp:.4f}")

    result = train_cascade(pos, neg,
                           min_detection=args.min_detection,
                           max_stage_fp=args.max_stage_fp,
                           target_fp=args.target_fp,
                           max_rounds_per_stage=args.max_rounds,
                           progress=progress)
    model_path = Path(args.model_out) if args.model_out else (
        (_out_dir(cfg) or Path(".")) / "cascade.hcsc")
    atomic_write(model_path, save_model(result.model))
    for log in result.stage_logs:
        print(f"stage {log.index}: rounds={log.rounds} threshold={log.threshold:.4f} "
              f"detection={log.detection_rate:.4f} fp={log.fp_rate:.4f} "
              f"cumulative_fp={log.cumulative_fp:.3g} negatives_left={log.negatives_left}")
    print(f"model written to {model_path} "
          f"({len(result.model.stages)} stages, status {result.status})")
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    out = _out_dir(cfg)
    if out is not None:
        log_lines = [
            f"stage={log.index} rounds={log.rounds} threshold={log.threshold!r} "
            f"detection={log.detection_rate!r} fp={log.fp_rate!r} "
            f"cumulative_fp={log.cumulative_fp!r} negatives_left={log.negatives_left}"
            for log in result.stage_logs
        ]
        atomic_write(out / "train_log.txt",
                     "\n".join(log_lines) + f"\nstatus={result.status}\n\n" + _config_echo(cfg))
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    samples = load_bioid(args.dataset, strict=cfg.strict)
    if not samples:
        raise DatasetError(f"empty dataset: no usable samples in {args.dataset}")
    face_model, eye_model = _require_models(cfg)
    eye_flags: list[bool] = []
    pose_flags: list[bool] = []
    for sample in samples:
        _, left, right, pitch = analyze_image(sample.image, face_model, eye_model, cfg)
        lc = detection_center(left) if left is not None else None
        rc = detection_center(right) if right is not None else None
        eye_flags.append(eye_match((lc, rc), (sample.left, sample.right)))
        pose_flags.append(pitch is not None)
    gdr1 = compute_gdr1(eye_flags)
    gdr2 = compute_gdr2(pose_flags)
    gdr3 = compute_gdr3(eye_flags, pose_flags)
    table = render_report_table([gdr1, gdr2, gdr3])
    print(table)
    out = _out_dir(cfg)
    if out is not None:
        atomic_write(out / "report.txt", table + "\n\n" + _config_echo(cfg))
        atomic_write(out / "report.csv", report_csv([gdr1, gdr2, gdr3]))
        atomic_write(out / "per_sample.csv",
                     per_sample_csv([s.image_id for s in samples], gdr1, gdr2, gdr3))
        from .plots import save_gdr_figure
        save_gdr_figure([gdr1, gdr2, gdr3], out / "gdr.png")
    return EXIT_OK


def _sniff_model(path) -> object:
    data = Path(path).read_bytes()
    if data[:4] == b"HCSC":
        return load_model(data)
    return parse_legacy_cascade_xml(data)


def _describe_model(model) -> str:
    lines = [f"base window: {model.window_w}x{model.window_h}",
             f"stages: {len(model.stages)}"]
    total = 0
    for i, stage in enumerate(model.stages):
        n = len(stage.classifier.weaks)
        total += n
        lines.append(f"  stage {i}: weaks={n} threshold={stage.threshold:.6f} "
                     f"alpha_sum={stage.classifier.alpha_sum:.6f}")
    lines.append(f"total weak classifiers: {total}")
    return "\n".join(lines)


def cmd_model(args, cfg: RunConfig) -> int:
    if args.action == "convert":
        if args.dest is None:
            raise UsageError("model convert requires a destination path")
        model = parse_legacy_cascade_xml(Path(args.source).read_bytes())
        atomic_write(args.dest, save_model(model))
        print(f"converted {args.source} -> {args.dest} ({len(model.stages)} stages)")
    else:
        model = _sniff_model(args.source)
        print(_describe_model(model))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--face-model", dest="face_model", default=None)
    shared.add_argument("--eye-model", dest="eye_model", default=None)
    shared.add_argument("--scale-factor", dest="scale_factor", type=float, default=None)
    shared.add_argument("--step", dest="step_fraction", type=float, default=None,
                        help="window stride as a fraction of the window size")
    shared.add_argument("--min-size", dest="min_size", type=int, default=None,
                        help="minimum detection window width in pixels")
    shared.add_argument("--fps", dest="fps", type=float, default=None)
    shared.add_argument("--closure-threshold", dest="closure_threshold",
                        type=float, default=None)
    shared.add_argument("--pitch-tolerance", dest="pitch_tolerance",
                        type=float, default=None)
    shared.add_argument("--perclos-window", dest="perclos_window",
                        type=float, default=None)
    shared.add_argument("--strict", dest="strict", action="store_const",
                        const=True, default=None)
    shared.add_argument("--out", dest="out", default=None,
                        help="directory for reports, figures and delimited output")
    shared.add_argument("--workers", dest="workers", type=int, default=None)
    shared.add_argument("--config", dest="config", default=None,
                        help="key=value config file (CLI flags take precedence)")

    parser = argparse.ArgumentParser(
        prog="blinkwatch",
        description="Drowsiness detection: cascade training, detection, "
                    "blink tracking and dataset evaluation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[shared],
                       help="detect face, eyes and pitch in one image")
    p.add_argument("image")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("track", parents=[shared],
                       help="track drowsiness over a directory of PGM frames")
    p.add_argument("frames")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("train", parents=[shared],
                       help="train a cascade from pos/ and neg/ patch directories")
    p.add_argument("pos")
    p.add_argument("neg")
    p.add_argument("--min-detection", type=float, default=0.995)
    p.add_argument("--max-stage-fp", type=float, default=0.5)
    p.add_argument("--target-fp", type=float, default=1e-5)
    p.add_argument("--max-rounds", type=int, default=40)
    p.add_argument("--model-out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared],
                       help="run the three detection tests over a BioID-layout dataset")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("model", parents=[shared],
                       help="convert a legacy XML cascade or inspect a model")
    p.add_argument("action", choices=("convert", "inspect"))
    p.add_argument("source")
    p.add_argument("dest", nargs="?", default=None)
    p.set_defaults(func=cmd_model)
    return parser


_CFG_KEYS = ("face_model", "eye_model", "scale_factor", "step_fraction", "min_size",
             "fps", "closure_threshold", "pitch_tolerance", "perclos_window",
             "strict", "out", "workers")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cli_values = {k: getattr(args, k) for k in _CFG_KEYS}
        cfg = resolve_config(cli_values, args.config)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"blinkwatch: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"blinkwatch: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PgmError, ModelFormatError, CascadeXmlError, DatasetError,
            TrainingError, BlinkwatchError) as exc:
        print(f"blinkwatch: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
