"""Command-line pipeline harness.

Subcommands: run (full pipeline on an event file), synth (write a
synthetic stream), ablate (component/interval/alpha sweeps), probe
(capacity stress), calibrate-tau (suggest a stage-1 threshold).

Exit codes: 0 ok, 2 usage error, 3 input error, 4 resource failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .encoder import EncoderConfig
from .events import (StreamFormatError, StreamValidationError, load_events,
                     save_events)
from .intensity import GridSpec, KernelParams
from .pipeline import (PipelineConfig, calibrate_tau, capacity_probe,
                       default_workload, run_ablation, run_pipeline,
                       write_ablation)
from .sdga import DensityEncoder
from .synthetic import KINDS, SyntheticSpec, generate_synthetic
from .temporal import MergeConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_RESOURCE = 4


def _parse_grid(text):
    try:
        nx, ny, nt = (int(v) for v in text.lower().split("x"))
        return GridSpec(nx=nx, ny=ny, nt=nt)
    except Exception:
        raise argparse.ArgumentTypeError(
            f"grid must look like '16x16x8', got {text!r}")


def _add_pipeline_args(p):
    p.add_argument("--bin-ms", type=float, default=10.0,
                   help="bin duration in milliseconds (default 10)")
    p.add_argument("--tau", type=float, default=None,
                   help="stage-1 distance threshold; calibrated from the "
                        "input when omitted")
    p.add_argument("--percentile", type=float, default=25.0,
                   help="percentile used when calibrating tau (default 25)")
    p.add_argument("--alpha", type=float, default=0.1,
                   help="density decay of the stage-2 merge score")
    p.add_argument("--score-threshold", type=float, default=0.85)
    p.add_argument("--max-span-ms", type=float, default=None,
                   help="bound on merged window duration")
    p.add_argument("--target-windows", type=int, default=None)
    p.add_argument("--rho", type=float, default=0.25,
                   help="kept fraction of patch tokens")
    p.add_argument("--no-temporal", action="store_true")
    p.add_argument("--no-spatial", action="store_true")
    p.add_argument("--sigma-x", type=float, default=2.0)
    p.add_argument("--sigma-y", type=float, default=2.0)
    p.add_argument("--sigma-t-us", type=float, default=None,
                   help="temporal bandwidth in us (default bin/4)")
    p.add_argument("--truncate-sigmas", type=float, default=None,
                   help="skip kernel terms beyond this many bandwidths")
    p.add_argument("--grid", type=_parse_grid, default=GridSpec())
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--seed", type=int, default=42,
                   help="encoder weight seed")


def _config_from_args(args, tau):
    bin_us = int(round(args.bin_ms * 1000))
    sigma_t = args.sigma_t_us if args.sigma_t_us is not None else bin_us / 4.0
    return PipelineConfig(
        bin_duration_us=bin_us,
        kernel=KernelParams(
            sigma_x=args.sigma_x, sigma_y=args.sigma_y, sigma_t=sigma_t,
            truncate_sigmas=args.truncate_sigmas),
        grid=args.grid,
        merge=MergeConfig(
            tau=tau, alpha=args.alpha,
            score_threshold=args.score_threshold,
            max_window_span=(int(round(args.max_span_ms * 1000))
                             if args.max_span_ms is not None else None),
            target_windows=args.target_windows),
        encoder=EncoderConfig(
            patch_size=args.patch_size, embed_dim=args.embed_dim,
            heads=args.heads, layers=args.layers, seed=args.seed),
        density=DensityEncoder(),
        rho=args.rho,
        temporal_on=not args.no_temporal,
        spatial_on=not args.no_spatial,
    )


def _config_echo(config, tau_source):
    kernel = config.resolved_kernel()
    return {
        "bin_duration_us": config.bin_duration_us,
        "kernel": {"sigma_x": kernel.sigma_x, "sigma_y": kernel.sigma_y,
                   "sigma_t": kernel.sigma_t,
                   "truncate_sigmas": kernel.truncate_sigmas},
        "grid": {"nx": config.grid.nx, "ny": config.grid.ny,
                 "nt": config.grid.nt},
        "tau": config.merge.tau,
        "tau_source": tau_source,
        "alpha": config.merge.alpha,
        "score_threshold": config.merge.score_threshold,
        "max_window_span": config.merge.max_window_span,
        "target_windows": config.merge.target_windows,
        "encoder": {"patch_size": config.encoder.patch_size,
                    "embed_dim": config.encoder.embed_dim,
                    "heads": config.encoder.heads,
                    "layers": config.encoder.layers,
                    "seed": config.encoder.seed},
        "rho": config.rho,
        "temporal_on": config.temporal_on,
        "spatial_on": config.spatial_on,
    }


def _write_json(payload, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(args):
    stream = load_events(args.input, format=args.format)
    base = _config_from_args(args, tau=1.0)
    if args.tau is not None:
        tau, tau_source = args.tau, "explicit"
    else:
        tau = calibrate_tau(stream, base, args.percentile)["tau"]
        tau_source = f"calibrated@p{args.percentile:g}"
    config = replace(base, merge=replace(base.merge, tau=tau))

    result = run_pipeline(stream, config,
                          collect_debug=args.debug_dump is not None)
    rep = result.report
    print(f"events={rep.events_in} bins={rep.bins_in} "
          f"windows={rep.windows_out} tokens={rep.tokens_out} "
          f"(temporal x{rep.temporal_reduction:.2f}, "
          f"spatial x{rep.spatial_reduction:.2f})")
    print(f"wall: {rep.timings_ms['total']:.1f} ms, "
          f"{rep.tokens_per_second:.0f} tokens/s")

    if args.report:
        _write_json({
            "command": "run",
            "input": str(args.input),
            "config": _config_echo(config, tau_source),
            "report": rep.to_dict(),
        }, args.report)
    if args.tokens:
        with open(args.tokens, "w", encoding="utf-8") as fh:
            for w in result.windows:
                fh.write(json.dumps(
                    w.to_dict(include_vectors=not args.no_vectors),
                    sort_keys=True) + "\n")
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for rec in result.trace:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    if args.debug_dump:
        with open(args.debug_dump, "w", encoding="utf-8") as fh:
            for w in result.windows:
                rec = {"window_id": w.window_id}
                rec.update(w.debug or {})
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_synth(args):
    spec = SyntheticSpec(
        kind=args.kind, duration_us=int(round(args.duration_ms * 1000)),
        width=args.width, height=args.height, rate=args.rate,
        period_us=int(round(args.period_ms * 1000)), seed=args.seed)
    stream = generate_synthetic(spec)
    save_events(stream, args.out)
    print(f"wrote {len(stream)} events to {args.out} "
          f"({stream.width}x{stream.height}, {args.duration_ms:g} ms)")
    return EXIT_OK


def cmd_ablate(args):
    if args.input:
        stream = load_events(args.input, format=args.format)
    else:
        stream = default_workload(
            duration_us=int(round(args.duration_ms * 1000)), seed=args.seed,
            width=args.width, height=args.height, kind=args.kind)
    base = _config_from_args(args, tau=1.0)
    if args.tau is not None:
        tau = args.tau
    else:
        tau = calibrate_tau(stream, base, args.percentile)["tau"]
    base = replace(base, merge=replace(base.merge, tau=tau))
    rows = run_ablation(stream, base, args.sweep, percentile=args.percentile)
    json_path, csv_path = write_ablation(rows, args.sweep, args.outdir)
    for row in rows:
        rep = row["report"]
        print(f"{row['label']:>34}: bins={rep['bins_in']:>5} "
              f"windows={rep['windows_out']:>5} "
              f"tokens={rep['tokens_out']:>7} "
              f"wall={rep['timings_ms']['total']:9.1f} ms")
    print(f"wrote {json_path} and {csv_path}")
    return EXIT_OK


def cmd_probe(args):
    base = _config_from_args(args, tau=args.tau if args.tau else 1.0)
    report = capacity_probe(args.bins, base, rate=args.rate, seed=args.seed,
                            width=args.width, height=args.height)
    print(json.dumps(report, indent=2, sort_keys=True))
    if args.report:
        _write_json(report, args.report)
    return EXIT_OK if report["ok"] else EXIT_RESOURCE


def cmd_calibrate_tau(args):
    stream = load_events(args.input, format=args.format)
    base = _config_from_args(args, tau=1.0)
    summary = calibrate_tau(stream, base, args.percentile)
    if not args.verbose:
        summary = {k: v for k, v in summary.items() if k != "distances"}
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.report:
        _write_json(summary, args.report)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evsparse",
        description="Event-stream token sparsification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the pipeline on an event file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    _add_pipeline_args(p)
    p.add_argument("--report", default=None, help="write the JSON report")
    p.add_argument("--tokens", default=None,
                   help="write kept tokens as JSON lines, one per window")
    p.add_argument("--no-vectors", action="store_true",
                   help="omit token vectors from --tokens output")
    p.add_argument("--trace", default=None,
                   help="write merge decisions as JSON lines")
    p.add_argument("--debug-dump", default=None,
                   help="write per-window density/importance dumps")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate a synthetic event stream")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--duration-ms", type=float, default=1000.0)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--period-ms", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True,
                   help="output path (.csv or .bin)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ablate", help="run a standard sweep")
    p.add_argument("--sweep", choices=("components", "interval", "alpha"),
                   required=True)
    p.add_argument("--input", default=None,
                   help="event file; a synthetic workload is used if omitted")
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    p.add_argument("--kind", choices=KINDS, default="static_scene")
    p.add_argument("--duration-ms", type=float, default=1000.0)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--outdir", default=".")
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("probe", help="capacity stress test")
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--rate", type=float, default=20_000.0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--report", default=None)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("calibrate-tau",
                       help="suggest a stage-1 threshold from the input")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("csv", "bin"), default=None)
    p.add_argument("--verbose", action="store_true",
                   help="include the full distance population")
    p.add_argument("--report", default=None)
    _add_pipeline_args(p)
    p.set_defaults(func=cmd_calibrate_tau)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StreamFormatError, StreamValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MemoryError as exc:
        print(f"resource failure: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
