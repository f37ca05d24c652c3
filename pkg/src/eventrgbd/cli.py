"""Command-line entry point: ``eventrgbd <command> --config PATH [--out DIR] [--set key=value ...]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io, pipeline
from .color import calibrate_white_balance, infer_end
from .config import parse_config, parse_overrides
from .errors import ConfigError, IncompleteCycleError
from .metrics import MetricReport, metric_report
from .scenes import build_patterns, build_rig


def _load(args):
    cfg = parse_config(args.config)
    pairs = []
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        pairs.append(tuple(item.split("=", 1)))
    if args.out is not None:
        pairs.append(("output.dir", args.out))
    return parse_overrides(pairs, cfg) if pairs else cfg


def _out(cfg):
    d = Path(cfg.output.dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _streams(args, out):
    events = io.read_event_csv(args.events or out / "events.csv")
    triggers = io.read_trigger_csv(args.triggers or out / "triggers.csv")
    if triggers.shape[0] == 0:
        raise IncompleteCycleError("no trigger pulses: cannot delimit color slots")
    end_us = args.end_us if getattr(args, "end_us", None) is not None else infer_end(triggers)
    return events, triggers, end_us


def cmd_simulate(args, cfg):
    out = _out(cfg)
    sim = pipeline.simulate(cfg)
    io.write_event_csv(sim.events, out / "events.csv")
    io.write_trigger_csv(sim.triggers, out / "triggers.csv")
    io.write_ppm(sim.rig.renderer.albedo_image(), out / "albedo.ppm")
    if args.patterns:
        for i, pat in enumerate(sim.plan.patterns):
            io.write_pbm(pat, out / f"pattern_{i:03d}.pbm")
    print(f"events={sim.events.shape[0]} generated={sim.generated} dropped={sim.dropped} "
          f"slots={sim.triggers.shape[0]} fps={float(sim.plan.equivalent_fps):.2f}")
    return 0


def cmd_reconstruct(args, cfg):
    out = _out(cfg)
    events, triggers, end_us = _streams(args, out)
    rig = build_rig(cfg) if cfg.color.white_balance and not cfg.color.reference_region else None
    rec = pipeline.make_reconstructor(cfg, rig)
    shape = (cfg.camera.height, cfg.camera.width)
    frames, skipped = pipeline.reconstruct_frames(events, triggers, shape, rec, end_us)
    for i, frame in enumerate(frames):
        io.write_ppm(frame, out / f"frame_{i:04d}.ppm")
    if skipped:
        print(f"warning: skipped {skipped} incomplete cycle(s)", file=sys.stderr)
    print(f"frames={len(frames)} skipped={skipped}")
    return 0


def cmd_calibrate_wb(args, cfg):
    out = _out(cfg)
    events, triggers, end_us = _streams(args, out)
    shape = (cfg.camera.height, cfg.camera.width)
    counts, _ = pipeline.cycle_counts(events, triggers, shape, end_us)
    if not counts:
        raise IncompleteCycleError("incomplete cycle: no complete R, G, B cycle in the trigger stream")
    mean = np.mean([c.counts for c in counts], axis=0)
    region = pipeline.reference_region(cfg, build_rig(cfg))
    gains = calibrate_white_balance(mean, region)
    text = f"color.gain_r = {gains.r!r}\ncolor.gain_g = {gains.g!r}\ncolor.gain_b = {gains.b!r}\n"
    io.atomic_write(out / "wb.cfg", text)
    print(f"{gains.r:.6f},{gains.g:.6f},{gains.b:.6f}")
    return 0


def cmd_metrics(args, cfg):
    report = metric_report(io.read_ppm(args.output), io.read_ppm(args.base))
    if args.header:
        print(MetricReport.HEADER)
    print(report.csv_row())
    return 0


def cmd_depth(args, cfg):
    out = _out(cfg)
    run = pipeline.run_depth(cfg)
    io.write_ply(run.cloud, out / "cloud.ply")
    io.write_ppm(run.frame, out / "color.ppm")
    stats = " ".join(f"{k}={v}" for k, v in sorted(run.stats.items()))
    print(f"points={len(run.cloud)} {stats}")
    return 0


def cmd_asl_run(args, cfg):
    out = _out(cfg)
    run = pipeline.run_asl(cfg)
    io.atomic_write(out / "decisions.csv", pipeline.format_decisions(run.decisions))
    flagged = sum(1 for d in run.decisions if d.flag)
    print(f"alpha={run.alpha:.3f} decisions={len(run.decisions)} final_rung={run.decisions[-1].rung} flagged={flagged}")
    return 0


def cmd_sweep(args, cfg):
    out = _out(cfg)

    def progress(row):
        print(row.csv_row(), file=sys.stderr)

    rows = pipeline.sweep(cfg, progress=progress if args.verbose else None)
    io.atomic_write(out / "sweep.csv", pipeline.format_sweep(rows))
    print(f"rows={len(rows)}")
    return 0


def cmd_patterns(args, cfg):
    out = _out(cfg)
    pats = build_patterns(cfg, (cfg.projector.width, cfg.projector.height))
    for i, pat in enumerate(pats):
        io.write_pbm(pat, out / f"pattern_{i:03d}.pbm")
        print(f"{i},{pat.family},{pat.cp:.6f}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="run configuration file (section.key = value lines)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key; repeatable")

    streams = argparse.ArgumentParser(add_help=False)
    streams.add_argument("--events", help="event CSV (default: OUT/events.csv)")
    streams.add_argument("--triggers", help="trigger CSV (default: OUT/triggers.csv)")
    streams.add_argument("--end-us", type=int, help="end of the last slot; inferred from trigger spacing if omitted")

    parser = argparse.ArgumentParser(prog="eventrgbd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="render and sense the configured patterns")
    p.add_argument("--patterns", action="store_true", help="also write every pattern as PBM")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("reconstruct", parents=[common, streams], help="one PPM frame per color cycle")
    p.set_defaults(func=cmd_reconstruct)
    p = sub.add_parser("calibrate-wb", parents=[common, streams], help="white-balance gains from a neutral region")
    p.set_defaults(func=cmd_calibrate_wb)
    p = sub.add_parser("metrics", parents=[common], help="RMSE, PSNR and HC of two PPM frames")
    p.add_argument("output")
    p.add_argument("base")
    p.add_argument("--header", action="store_true", help="print the column header first")
    p.set_defaults(func=cmd_metrics)
    p = sub.add_parser("depth", parents=[common], help="triangulate and write a colored PLY cloud")
    p.set_defaults(func=cmd_depth)
    p = sub.add_parser("asl-run", parents=[common], help="adaptive pattern selection over a motion ramp")
    p.set_defaults(func=cmd_asl_run)
    p = sub.add_parser("sweep", parents=[common], help="coverage x window quality sweep")
    p.add_argument("-v", "--verbose", action="store_true", help="print each row as it finishes")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("patterns", parents=[common], help="write the configured patterns as PBM")
    p.set_defaults(func=cmd_patterns)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        return args.func(args, cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
