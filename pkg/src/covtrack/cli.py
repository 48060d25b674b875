"""Command-line entry points: ``track``, ``eval``, ``synth`` and ``mds``.

Exit codes: 0 success, 2 configuration or schema error, 3 I/O error,
4 track lost (the partial track CSV is still written).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import checkpoint, config, io, mds, metrics, synth, tracker
from .descriptor import DescriptorConfig, descriptor_from_state
from .errors import ContractError, OutOfViewError, TrackLostError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_LOST = 4

log = logging.getLogger("covtrack")


def _overrides(args: argparse.Namespace, seed_key: str) -> dict[str, str]:
    out = {}
    if getattr(args, "seed", None) is not None:
        out[seed_key] = str(args.seed)
    if getattr(args, "out", None) is not None:
        out["output.dir"] = str(Path(args.out).resolve())
    if getattr(args, "overlay", False):
        out["output.overlay"] = "true"
    return out


def cmd_track(args: argparse.Namespace) -> int:
    values = config.load(args.config, config.TRACK_SCHEMA, _overrides(args, "filter.seed"))
    rc = config.run_config(values)
    paths = io.list_frames(rc.frames)
    if not paths:
        raise FileNotFoundError(f"no frames match {rc.frames}")
    out_dir = rc.output_dir
    overlay_dir = out_dir / rc.overlay_dir

    def overlay(k: int, img, filt: tracker.FilterState) -> None:
        if not rc.overlay:
            return
        top = None
        if rc.overlay_particles:
            order = np.argsort(-filt.log_weights, kind="stable")[: rc.overlay_particles]
            top = filt.states[order]
        io.write_overlay(overlay_dir / f"overlay_{k:04d}.png", img, filt.last_estimate.state, rc.extent, top)

    frame0 = io.read_frame(paths[0])
    try:
        filt = tracker.init_tracker(frame0, rc.init_state, rc.extent, rc.filter, rc.motion)
    except OutOfViewError as exc:
        raise config.ConfigError(f"initial region: {exc}") from exc
    estimates = [filt.last_estimate]
    overlay(0, frame0, filt)
    status = EXIT_OK
    for k, path in enumerate(paths[1:], start=1):
        img = io.read_frame(path)
        try:
            estimates.append(tracker.step(filt, img))
        except TrackLostError as exc:
            log.error("track lost at frame %d (%s)", k, exc)
            status = EXIT_LOST
            break
        overlay(k, img, filt)
    io.write_track_csv(out_dir / rc.track_csv, estimates)
    checkpoint.save(filt, out_dir / rc.checkpoint)
    log.info("tracked %d frame(s); track written to %s", len(estimates), out_dir / rc.track_csv)
    return status


def cmd_eval(args: argparse.Namespace) -> int:
    track = io.read_track_csv(args.track)
    gt = io.read_gt_csv(args.gt)
    m = metrics.score(track, gt)
    report = m.report()
    sys.stdout.write(report if report.endswith("\n") else report + "\n")
    if args.out is not None:
        io.atomic_write_text(Path(args.out) / "metrics.txt", report)
    return EXIT_OK


def _write_track_config(path: Path, frames_glob: str, sc: synth.SynthScenario) -> None:
    p0 = synth.scenario_poses(sc)[0]
    lines = [
        "# generated by covtrack synth",
        f"input.frames={frames_glob}",
        f"init.x={p0.x!r}",
        f"init.y={p0.y!r}",
        f"init.h={p0.h!r}",
        f"init.theta={p0.theta!r}",
        f"init.width={sc.target_size[0]}",
        f"init.height={sc.target_size[1]}",
        "",
    ]
    io.atomic_write_text(path, "\n".join(lines))


def cmd_synth(args: argparse.Namespace) -> int:
    if args.config is not None:
        values = config.load(args.config, config.SYNTH_SCHEMA, _overrides(args, "scenario.texture_seed"))
    else:
        values = config.resolve(_overrides(args, "scenario.texture_seed"), config.SYNTH_SCHEMA)
    sc = config.synth_scenario(values)
    out_dir = Path(values["output.dir"])
    pattern = values["output.frame_pattern"]
    try:
        names = [pattern.format(t) for t in range(sc.n_frames)]
    except (IndexError, KeyError, ValueError) as exc:
        raise config.ConfigError(f"bad output.frame_pattern: {exc}") from exc
    if len(set(names)) != len(names):
        raise config.ConfigError("output.frame_pattern must produce distinct names")
    try:
        frames, gt = synth.synth_sequence(sc)
    except ContractError as exc:
        raise config.ConfigError(str(exc)) from exc
    for name, img in zip(names, frames):
        io.write_frame(out_dir / name, img)
    io.write_gt_csv(out_dir / values["output.gt_csv"], gt)
    frames_glob = pattern.replace("{:04d}", "*") if "{:04d}" in pattern else pattern.split("{")[0] + "*"
    _write_track_config(out_dir / values["output.track_config"], frames_glob, sc)
    log.info("wrote %d frame(s) to %s", len(frames), out_dir)
    return EXIT_OK


def cmd_mds(args: argparse.Namespace) -> int:
    dcfg = DescriptorConfig()
    if args.config is not None:
        values = config.load(args.config, config.TRACK_SCHEMA | {"input.frames": (str, "")})
        dcfg = config.run_config(values).filter.descriptor
    rows = io.read_patch_list(args.patches)
    if len(rows) < 2:
        raise config.ConfigError("need at least two patches")
    cache: dict[str, np.ndarray] = {}
    mats, labels = [], []
    extent = (float(args.width), float(args.height))
    for path, label, pose in rows:
        if path not in cache:
            cache[path] = io.read_frame(path)
        try:
            mats.append(descriptor_from_state(cache[path], pose, dcfg, extent))
        except OutOfViewError as exc:
            raise config.ConfigError(f"patch in {path}: {exc}") from exc
        labels.append(label)
    D = mds.distance_matrix(mats)
    res = mds.classical_mds(D, args.dim)
    out_dir = Path(args.out) if args.out is not None else Path(".")
    io.write_mds_csv(out_dir / "mds.csv", res.coords, labels)
    print(f"stress={res.stress:.6g}")
    if res.truncated:
        print("truncated=1")
    if labels.count("target") >= 2 and "background" in labels:
        tt, tb = mds.separation(D, labels)
        print(f"target_target_mean={tt:.6g}")
        print(f"target_background_mean={tb:.6g}")
        print(f"separated={int(tt < tb)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covtrack", description="Covariance-descriptor particle filter tracking.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track a frame sequence")
    t.add_argument("--config", required=True, help="key=value run configuration")
    t.add_argument("--seed", type=int, help="override filter.seed")
    t.add_argument("--overlay", action="store_true", help="write per-frame overlay images")
    t.add_argument("--out", help="override output.dir")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score a track CSV against a ground-truth CSV")
    e.add_argument("track")
    e.add_argument("gt")
    e.add_argument("--out", help="also write metrics.txt here")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("synth", help="render a synthetic sequence with ground truth")
    s.add_argument("--config", help="scenario.* / output.* configuration (defaults to the acceptance scenario)")
    s.add_argument("--seed", type=int, help="override scenario.texture_seed")
    s.add_argument("--out", help="override output.dir")
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("mds", help="embed listed patches by their descriptor distances")
    m.add_argument("patches", help="CSV with columns frame,label,x,y,h,theta")
    m.add_argument("--width", type=float, required=True, help="region width in pixels")
    m.add_argument("--height", type=float, required=True, help="region height in pixels")
    m.add_argument("--dim", type=int, default=2)
    m.add_argument("--config", help="run configuration supplying descriptor.* settings")
    m.add_argument("--out", help="directory for mds.csv (default: current directory)")
    m.set_defaults(func=cmd_mds)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
