"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import imaging
from .classification import read_timeline_csv, write_timeline_csv
from .model import (
    ActivityClass,
    FrameError,
    MonitoringConfig,
    StreamError,
    iter_frames,
    mean_frame,
    read_frames,
    write_frames,
)
from .pipeline import analyze_frames, analyze_timeline, write_reports
from .simulator import ConfigError, default_scenario, load_scenario, reference_frames, run
from .tracking import RoiMap, calibrate_roi
from .transport import EdgeNode, FrameStore, IngestServer, Journal, SimulatedChannel, UdpServer, run_simulated_link, run_udp_node

log = logging.getLogger("thermadl")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunManifest:
    config: str | None = None
    rois: str | None = None
    store: str | None = None
    frames: str | None = None
    out: str | None = None
    tz_offset_min: int = 0

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"{path}: unknown manifest keys {sorted(unknown)}")
        m = cls(**data)
        for key in ("config", "rois", "store", "frames"):
            value = getattr(m, key)
            if value is not None and not Path(value).exists():
                raise DataError(f"{path}: {key} path {value} does not exist")
        return m


def load_config(path) -> MonitoringConfig:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise DataError(f"{path}:{lineno}: expected key = value")
        values[key] = value
    try:
        return MonitoringConfig.from_mapping(values)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _scenario(args):
    sc = load_scenario(args.config) if args.config else default_scenario()
    if args.seed is not None:
        sc = replace(sc, scene=replace(sc.scene, seed=args.seed))
    return sc


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run(sc.scene, sc.schedule, sc.period)
    n = write_frames(out / "frames.csv", result.frames)
    write_timeline_csv(out / "truth.csv", result.truth)
    refs = out / "references"
    refs.mkdir(exist_ok=True)
    for name, loc in sc.scene.locations.items():
        write_frames(refs / f"{name}.{loc.cls.slug}.csv", reference_frames(sc.scene, name, args.references))
    print(f"wrote {n} frames and {len(result.truth)} ground-truth labels to {out}")
    return EXIT_OK


def _parse_reference(spec: str):
    parts = spec.split(":", 2)
    if len(parts) != 3:
        raise DataError(f"reference {spec!r} is not LABEL:CLASS:PATH")
    label, cls, path = parts
    return label, ActivityClass.parse(cls), Path(path)


def cmd_calibrate(args) -> int:
    rois = RoiMap()
    specs = list(args.reference)
    if args.references_dir:
        for path in sorted(Path(args.references_dir).glob("*.csv")):
            label, _, cls = path.stem.rpartition(".")
            specs.append(f"{label}:{cls}:{path}")
    if not specs:
        raise DataError("no reference captures given")
    for spec in specs:
        label, cls, path = _parse_reference(spec)
        frames = read_frames(path)
        if not frames:
            raise DataError(f"{path}: no frames")
        rois = rois.add(calibrate_roi(mean_frame(frames), args.ambient, args.delta, cls, label, rois))
    rois.check_coverage()
    rois.save(args.out)
    for roi in rois.entries:
        print(f"{roi.label} ({roi.cls.slug}): {len(roi.pixels)} pixels")
    return EXIT_OK


def _node_frames(args):
    if args.frames:
        return iter_frames(args.frames)
    sc = _scenario(args)
    return run(sc.scene, sc.schedule, sc.period).frames


def cmd_node(args) -> int:
    journal = Journal(args.journal, cap=args.journal_cap)
    node = EdgeNode(journal, initial_timeout=args.initial_timeout, max_timeout=args.max_timeout, window=args.window)
    replayed = len(node.unacked)
    if replayed:
        print(f"replaying {replayed} unacknowledged journal entries")
    frames = _node_frames(args)
    if args.channel == "sim":
        if not args.store:
            raise DataError("--store is required with the simulated channel")
        store = FrameStore(args.store)
        server = IngestServer(store)
        channel = SimulatedChannel(loss=args.loss, seed=args.seed or 0)
        res = run_simulated_link(frames, node, server, channel)
        store.close()
        ok = node.drained
        print(
            f"captured {res.captured}, sent {node.stats.sent} ({node.stats.retransmits} retransmits), "
            f"store holds {len(store)}"
        )
    else:
        ok = run_udp_node(frames, node, (args.host, args.port), pace=args.pace, timeout=args.timeout)
        print(f"captured {node.stats.captured}, sent {node.stats.sent}, acked {node.stats.acked}")
    journal.close()
    if not ok:
        print(f"{len(node.unacked)} frames remain unacknowledged in the journal", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_server(args) -> int:
    store = FrameStore(args.store)
    server = IngestServer(store)
    udp = UdpServer(server, args.host, args.port).start()
    print(f"listening on {udp.address[0]}:{udp.address[1]}, store {args.store} holds {len(store)}", flush=True)
    stop = threading.Event()
    if threading.current_thread() is threading.main_thread():
        signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        deadline = None if args.duration is None else time.monotonic() + args.duration
        while not stop.is_set():
            if deadline is not None and time.monotonic() >= deadline:
                break
            if args.expect is not None and len(store) >= args.expect:
                break
            stop.wait(0.05)
    except KeyboardInterrupt:
        pass
    finally:
        udp.stop()
        if args.export:
            store.export_csv(args.export)
        store.close()
    st = server.stats
    print(f"stored {len(store)} frames ({st.duplicates} duplicates, {st.errors} decode errors)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    manifest = RunManifest.load(args.manifest) if args.manifest else RunManifest()
    config_path = args.config or manifest.config
    config = load_config(config_path) if config_path else MonitoringConfig()
    tz = args.tz_offset_min if args.tz_offset_min is not None else (manifest.tz_offset_min or config.tz_offset_min)
    config = replace(config, tz_offset_min=tz)
    out = args.out or manifest.out
    if not out:
        raise DataError("--out is required")
    if args.timeline:
        timeline = read_timeline_csv(args.timeline)
        if len(timeline) == 0:
            raise DataError(f"{args.timeline}: empty timeline")
        result = analyze_timeline(timeline, config)
    else:
        store_dir, frames_path = args.store or manifest.store, args.frames or manifest.frames
        if store_dir:
            store = FrameStore(store_dir)
            frames = store.frames()
            store.close()
        elif frames_path:
            frames = read_frames(frames_path)
        else:
            raise DataError("one of --store, --frames or --timeline is required")
        if not frames:
            raise DataError("the frame store is empty")
        rois_path = args.rois or manifest.rois
        if not rois_path or not Path(rois_path).exists():
            raise DataError("an ROI map (--rois) is required to analyze frames")
        result = analyze_frames(frames, RoiMap.load(rois_path), config)
    written = write_reports(result, out, plots=args.plots, tz_offset_min=tz)
    print(result.findings, end="")
    print(f"wrote {len(written)} report files to {out}")
    return EXIT_OK


def cmd_render(args) -> int:
    frames = read_frames(args.frames)
    if not frames:
        raise DataError(f"{args.frames}: no frames")
    try:
        frame = frames[args.index]
    except IndexError:
        raise DataError(f"frame index {args.index} out of range (0..{len(frames) - 1})") from None
    image = frame.grid if args.raw else imaging.interpolate(frame)
    imaging.render(image, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thermadl", description="Thermal-array activity monitoring toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate frames and ground truth from a scene config")
    s.add_argument("--config", help="scene file (default: bundled 11-day scenario)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--references", type=int, default=30, help="calibration captures per location")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("calibrate", help="build an ROI map from reference captures")
    s.add_argument("--reference", action="append", default=[], metavar="LABEL:CLASS:CSV")
    s.add_argument("--references-dir", help="directory of LABEL.CLASS.csv captures (as written by simulate)")
    s.add_argument("--ambient", type=float, default=22.0)
    s.add_argument("--delta", type=float, default=MonitoringConfig.roi_delta)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("node", help="edge node: journal frames and deliver them to the server")
    s.add_argument("--frames", help="frame CSV to send (default: simulate the scenario live)")
    s.add_argument("--config", help="scene file when simulating")
    s.add_argument("--seed", type=int)
    s.add_argument("--journal", required=True)
    s.add_argument("--journal-cap", type=int)
    s.add_argument("--channel", choices=("udp", "sim"), default="udp")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=5683)
    s.add_argument("--loss", type=float, default=0.0, help="drop probability for the simulated channel")
    s.add_argument("--store", help="server store directory for the simulated channel")
    s.add_argument("--pace", type=float, default=0.0, help="seconds between captures")
    s.add_argument("--initial-timeout", type=float, default=2.0)
    s.add_argument("--max-timeout", type=float, default=60.0)
    s.add_argument("--window", type=int, default=32)
    s.add_argument("--timeout", type=float, default=None, help="give up after this many seconds")
    s.set_defaults(func=cmd_node)

    s = sub.add_parser("server", help="receive frames over UDP into a frame store")
    s.add_argument("--store", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=5683)
    s.add_argument("--duration", type=float, help="stop after this many seconds")
    s.add_argument("--expect", type=int, help="stop once the store holds this many frames")
    s.add_argument("--export", help="write the store as frame CSV on exit")
    s.set_defaults(func=cmd_server)

    s = sub.add_parser("analyze", help="classify frames and emit the behaviour reports")
    s.add_argument("--store")
    s.add_argument("--frames")
    s.add_argument("--timeline", help="analyze a labelled timeline CSV directly")
    s.add_argument("--rois")
    s.add_argument("--config", help="monitoring config (key = value lines)")
    s.add_argument("--manifest", help="JSON run manifest")
    s.add_argument("--out")
    s.add_argument("--plots", action="store_true")
    s.add_argument("--tz-offset-min", type=int)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("render", help="write one frame as a grayscale image")
    s.add_argument("--frames", required=True)
    s.add_argument("--index", type=int, default=0)
    s.add_argument("--raw", action="store_true", help="skip interpolation")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (DataError, ConfigError, StreamError, FrameError, ValueError, OSError) as exc:
        print(f"thermadl {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
