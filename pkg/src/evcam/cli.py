"""Command-line front end.

Subcommands: expose, events, dataset, snn-demo, fusion-check, bench.
Exit codes: 0 ok, 1 fatal, 2 partial failures, 64 usage error. Every run
logs its fully resolved configuration (flags, config-file values and
defaults merged, flags winning) so produced datasets are self-describing.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import eventgen, fusion, imaging, pipeline, snn
from .errors import ConfigError, LayoutError
from .flow import FlowConfig, flow_to_image, generate_flow

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64

BENCH_TARGET_IPS = 100.0
BENCH_FLOOR_IPS = 25.0

log = logging.getLogger("evcam")


class CliParser(argparse.ArgumentParser):
    """argparse parser that exits with the conventional usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def parse_alphas(text: str) -> list[pipeline.AlphaSpec]:
    """Comma-separated exposure factors; lo:hi tokens are per-image ranges."""
    specs: list[pipeline.AlphaSpec] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" in token:
            lo, hi = token.split(":", 1)
            specs.append((float(lo), float(hi)))
        else:
            specs.append(float(token))
    if not specs:
        raise argparse.ArgumentTypeError("expected at least one alpha")
    return specs


def parse_size(text: str) -> tuple[int, int] | None:
    if text.lower() in ("none", "orig", "original"):
        return None
    try:
        w, h = (int(part) for part in text.lower().split("x", 1))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH or 'none', got {text!r}")
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError(f"size must be >= 1x1, got {text!r}")
    return w, h


def parse_emit(text: str) -> list[str]:
    formats = [t.strip() for t in text.split(",") if t.strip()]
    for fmt in formats:
        if fmt not in ("evtf", "csv", "png"):
            raise argparse.ArgumentTypeError(f"unknown emit format {fmt!r}")
    if not formats:
        raise argparse.ArgumentTypeError("expected at least one emit format")
    return formats


def default_workers() -> int:
    env = os.environ.get("EVCAM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> CliParser:
    parser = CliParser(
        prog="evcam",
        description="Synthesize exposure-transformed images and event-camera "
                    "frames from ordinary images.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text,
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--config", default=None, metavar="FILE",
                       help="key=value file with defaults for any flag (flags win)")
        return p

    def add_flow_flags(p: argparse.ArgumentParser):
        p.add_argument("--threshold", type=positive_float, default=0.1,
                       help="contrast threshold C on the [0,1] luminance scale")
        p.add_argument("--dt", type=positive_float, default=1.0,
                       help="time interval for the brightness-change field")
        p.add_argument("--cap", type=positive_int, default=1,
                       help="max events per pixel")
        p.add_argument("--flow", choices=("random", "fixed"), default="random",
                       help="flow direction mode")
        p.add_argument("--theta", type=float, default=None,
                       help="direction in radians for --flow fixed (default pi/4)")
        p.add_argument("--seed", type=int, default=0, help="random flow seed")

    p = add("expose", "apply the exposure transform to one image")
    p.add_argument("input", help="input PNG/JPEG")
    p.add_argument("output", help="output PNG")
    p.add_argument("--alpha", type=positive_float, default=1.0,
                   help="exposure factor (<1 under-, >1 overexposes)")

    p = add("events", "synthesize an event frame from one image")
    p.add_argument("input", help="input PNG/JPEG")
    p.add_argument("output", help="output path (extension adjusted per format)")
    add_flow_flags(p)
    p.add_argument("--emit", type=parse_emit, default=["evtf"],
                   help="comma-separated outputs: evtf, csv, png")
    p.add_argument("--dump-flow", default=None, metavar="PNG",
                   help="also write the flow field as an angle-to-hue PNG")

    p = add("dataset", "batch-generate paired exposed images and event frames")
    p.add_argument("--input", required=True, help="dataset root directory")
    p.add_argument("--output", required=True, help="output root directory")
    p.add_argument("--layout", choices=("voc", "coco", "flat"), default="flat",
                   help="input directory convention")
    p.add_argument("--alphas", type=parse_alphas, default=[0.2, 5.0],
                   help="comma-separated factors; lo:hi draws per image")
    add_flow_flags(p)
    p.add_argument("--size", type=parse_size, default=(320, 320),
                   help="resize target WxH, or 'none' to keep original")
    p.add_argument("--workers", type=positive_int, default=None,
                   help="parallel workers (default: EVCAM_WORKERS or cpu count)")

    p = add("snn-demo", "run LIF dynamics over a constant-coded event frame")
    p.add_argument("input", help="input EVTF file")
    p.add_argument("--t-steps", type=positive_int, default=4,
                   help="time steps for constant coding")
    p.add_argument("--tau", type=positive_float, default=2.0,
                   help="membrane time constant")
    p.add_argument("--v-threshold", type=float, default=1.0, help="firing threshold")
    p.add_argument("--v-reset", type=float, default=0.0, help="reset potential")
    p.add_argument("--paper-literal", action="store_true",
                   help="use the amplifying exp(+1/tau) leak instead of exp(-1/tau)")
    p.add_argument("--json", default="-", metavar="FILE",
                   help="write per-step spike statistics here ('-' = stdout)")
    p.add_argument("--raster", default=None, metavar="PNG",
                   help="optional spike raster rendering")

    p = add("fusion-check", "run the fusion invariant suite on random inputs")
    p.add_argument("--c", type=positive_int, default=8, help="channels")
    p.add_argument("--t", type=positive_int, default=4, help="time steps")
    p.add_argument("--hw", type=positive_int, default=16, help="spatial size")
    p.add_argument("--seed", type=int, default=0, help="input/weights seed")
    p.add_argument("--trials", type=positive_int, default=5, help="random trials")
    p.add_argument("--json", default="-", metavar="FILE",
                   help="write the report here ('-' = stdout)")

    p = add("bench", "measure event-synthesis throughput")
    p.add_argument("--images", type=positive_int, default=200,
                   help="number of synthetic images")
    p.add_argument("--size", type=parse_size, default=(320, 320),
                   help="image size WxH")
    p.add_argument("--workers", type=positive_int, default=None,
                   help="parallel workers (default: EVCAM_WORKERS or cpu count)")
    p.add_argument("--alpha", type=positive_float, default=0.2, help="exposure factor")
    p.add_argument("--threshold", type=positive_float, default=0.1,
                   help="contrast threshold C")
    p.add_argument("--seed", type=int, default=0, help="image generation seed")
    p.add_argument("--json", default="-", metavar="FILE",
                   help="write the measurements here ('-' = stdout)")

    return parser


def load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Install config-file values as parser defaults so explicit flags win."""
    # allow_abbrev=False: --c (fusion-check) must not match --config
    probe = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    raw = load_config_file(known.config)
    # resolve the active subparser to convert values with the right types
    sub_actions = [a for a in parser._actions
                   if isinstance(a, argparse._SubParsersAction)]
    sub_parser = None
    for token in argv:
        if sub_actions and token in sub_actions[0].choices:
            sub_parser = sub_actions[0].choices[token]
            break
    if sub_parser is None:
        return
    converted: dict[str, object] = {}
    for action in sub_parser._actions:
        if action.dest in raw:
            value = raw[action.dest]
            if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                converted[action.dest] = value.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                converted[action.dest] = action.type(value)
            else:
                converted[action.dest] = value
    unknown = set(raw) - {a.dest for a in sub_parser._actions}
    if unknown:
        raise ConfigError(f"config file has unknown keys: {sorted(unknown)}")
    sub_parser.set_defaults(**converted)


def log_resolved_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    log.info("command=%s %s", args.command,
             " ".join(f"{k}={v!r}" for k, v in resolved.items()))


def _write_json(payload: dict, dest: str) -> None:
    text = json.dumps(payload, indent=2)
    if dest == "-":
        print(text)
    else:
        Path(dest).write_text(text + "\n")


def _event_cfg_from_args(args) -> eventgen.EventGenConfig:
    theta = args.theta if args.theta is not None else float(np.pi / 4)
    flow_cfg = FlowConfig(mode=args.flow, theta=theta, seed=args.seed)
    return eventgen.EventGenConfig(threshold_c=args.threshold, dt=args.dt,
                                   count_cap=args.cap, flow=flow_cfg)


def cmd_expose(args) -> int:
    img = imaging.load_png(args.input)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    out = imaging.apply_exposure(img, imaging.ExposureConfig(alpha=args.alpha))
    imaging.save_png(out, args.output)
    log.info("wrote %s", args.output)
    return EXIT_OK


def cmd_events(args) -> int:
    img = imaging.load_png(args.input)
    cfg = _event_cfg_from_args(args)
    frame = eventgen.synthesize_events(img, cfg)
    out = Path(args.output)
    multi = len(args.emit) > 1
    for fmt in args.emit:
        dest = out.with_suffix("." + fmt) if multi else out
        if fmt == "evtf":
            eventgen.save_evtf(frame, dest)
        elif fmt == "csv":
            eventgen.save_event_csv(frame, dest)
        else:
            eventgen.save_event_png(frame, dest)
        log.info("wrote %s (%d events)", dest, frame.total_events())
    if args.dump_flow:
        h, w = frame.on_count.shape
        imaging.save_png(flow_to_image(generate_flow(w, h, cfg.flow)), args.dump_flow)
        log.info("wrote %s", args.dump_flow)
    return EXIT_OK


def cmd_dataset(args) -> int:
    job = pipeline.DatasetJob(
        input_root=args.input,
        output_root=args.output,
        layout=args.layout,
        alphas=tuple(args.alphas),
        event_cfg=_event_cfg_from_args(args),
        global_seed=args.seed,
        workers=args.workers if args.workers is not None else default_workers(),
        size=args.size,
    )
    result = pipeline.run_job(job)
    log.info("manifest %s: %d ok, %d failed",
             result.manifest_path, result.ok_count, result.failed_count)
    return EXIT_PARTIAL if result.failed_count else EXIT_OK


def cmd_snn_demo(args) -> int:
    frame = eventgen.load_evtf(args.input)
    coded = eventgen.constant_code(frame, args.t_steps)
    params = snn.LifParams(tau=args.tau, v_threshold=args.v_threshold,
                           v_reset=args.v_reset, paper_literal=args.paper_literal)
    spikes = snn.lif_run(coded, params)
    steps = []
    for t in range(args.t_steps):
        on = int(spikes[0, t].sum())
        off = int(spikes[1, t].sum())
        steps.append({"t": t, "on_spikes": on, "off_spikes": off, "total": on + off})
    payload = {
        "input": str(args.input),
        "t_steps": args.t_steps,
        "params": {"tau": args.tau, "v_threshold": args.v_threshold,
                   "v_reset": args.v_reset, "leak": params.leak,
                   "paper_literal": args.paper_literal},
        "neurons": int(np.prod(spikes.shape[2:])) * 2,
        "steps": steps,
        "total_spikes": int(spikes.sum()),
    }
    _write_json(payload, args.json)
    if args.raster:
        imaging.save_png(_spike_raster(spikes), args.raster)
        log.info("wrote %s", args.raster)
    return EXIT_OK


def _spike_raster(spikes: np.ndarray) -> np.ndarray:
    """One H x W tile per time step, ON red / OFF blue, 2px separators."""
    _, t_steps, h, w = spikes.shape
    gap = 2
    canvas = np.ones((h, t_steps * w + gap * (t_steps - 1), 3), np.float32)
    for t in range(t_steps):
        tile = np.ones((h, w, 3), np.float32)
        tile[spikes[0, t] > 0] = np.asarray(eventgen.ON_COLOR, np.float32) / 255.0
        tile[spikes[1, t] > 0] = np.asarray(eventgen.OFF_COLOR, np.float32) / 255.0
        x0 = t * (w + gap)
        canvas[:, x0:x0 + w] = tile
    return canvas


def cmd_fusion_check(args) -> int:
    report = fusion.invariant_report(channels=args.c, t_steps=args.t, hw=args.hw,
                                     seed=args.seed, trials=args.trials)
    _write_json(report, args.json)
    return EXIT_OK if report["all_passed"] else EXIT_FATAL


def cmd_bench(args) -> int:
    width, height = args.size if args.size else (320, 320)
    cfg = eventgen.EventGenConfig(threshold_c=args.threshold)
    report = pipeline.benchmark(
        images=args.images, width=width, height=height,
        workers=args.workers if args.workers is not None else default_workers(),
        alpha=args.alpha, seed=args.seed, cfg=cfg)
    ips = report["images_per_sec"]
    report["target_images_per_sec"] = BENCH_TARGET_IPS
    report["floor_images_per_sec"] = BENCH_FLOOR_IPS
    if ips < BENCH_FLOOR_IPS:
        report["verdict"] = "fail"
    elif ips < BENCH_TARGET_IPS:
        report["verdict"] = "warn"
    else:
        report["verdict"] = "pass"
    _write_json(report, args.json)
    if report["verdict"] == "fail":
        log.error("throughput %.1f images/s is below the %.0f images/s floor",
                  ips, BENCH_FLOOR_IPS)
        return EXIT_FATAL
    if report["verdict"] == "warn":
        log.warning("throughput %.1f images/s is below the %.0f images/s target",
                    ips, BENCH_TARGET_IPS)
    return EXIT_OK


COMMANDS = {
    "expose": cmd_expose,
    "events": cmd_events,
    "dataset": cmd_dataset,
    "snn-demo": cmd_snn_demo,
    "fusion-check": cmd_fusion_check,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"evcam: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # argparse --help or usage error
        return int(e.code or 0)
    log_resolved_config(args)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"evcam: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (LayoutError, OSError, ValueError) as e:
        print(f"evcam: error: {e}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
