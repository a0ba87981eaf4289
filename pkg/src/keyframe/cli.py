"""Command line interface.

Subcommands: ``select`` runs the pipeline over a manifest, ``gen-corpus``
writes a synthetic test corpus, ``bench`` times selectors against each
other, ``report`` re-aggregates selection.json files already on disk.
Settings resolve as CLI flags over config-file values over defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from .corpus import COLOR_RGB, CorpusSpec, gen_corpus
from .errors import ConfigError, KeyframeError
from .metrics import RunReport, emit_csv, emit_json
from .pipeline import RunConfig, bench, reaggregate, run, write_bench_csv
from .selector import STRATEGIES

log = logging.getLogger(__name__)

_RUN_FIELDS = {f.name for f in fields(RunConfig)}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", dest="manifest_path", metavar="FILE",
                   help="newline-delimited JSON manifest of (video, question, answer)")
    p.add_argument("--out", dest="out_dir", metavar="DIR",
                   help="run root; one subdirectory per job plus report.json/csv")
    p.add_argument("--selector", choices=STRATEGIES,
                   help="selection strategy (default clip)")
    p.add_argument("--mode", choices=("answer", "qa", "question"),
                   help="query text source for the clip selector (default qa)")
    p.add_argument("--cn", type=int, help="coarse sample size (default 32)")
    p.add_argument("--k", type=int, help="frames to keep (default 8)")
    p.add_argument("--provider", choices=("mock", "remote"),
                   help="embedding provider (default mock)")
    p.add_argument("--endpoint", help="remote provider base URL "
                   "(falls back to KEYFRAME_ENDPOINT)")
    p.add_argument("--jobs", type=int, help="worker count (default 1)")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="embedding batch size, at most 32")
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--emit-video", dest="emit_video", action="store_true",
                   default=None, help="also re-encode kept frames to keyframes.mp4")
    p.add_argument("--output-fps", dest="output_fps", type=float,
                   help="frame rate of the emitted keyframe video (default 1)")
    p.add_argument("--decoder", choices=("opencv", "ffmpeg"),
                   help="decode backend (default opencv)")
    p.add_argument("--fail-under", dest="fail_under", type=float,
                   help="exit nonzero when success_rate drops below this (default 0)")
    p.add_argument("--config", metavar="FILE",
                   help="YAML file with the same settings; flags given here win")


def _build_config(args: argparse.Namespace) -> RunConfig:
    file_cfg: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                doc = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must be a mapping of settings")
        unknown = sorted(set(doc) - _RUN_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        file_cfg = doc

    cli_cfg = {
        k: v for k, v in vars(args).items() if k in _RUN_FIELDS and v is not None
    }
    merged = {**file_cfg, **cli_cfg}
    if not merged.get("manifest_path"):
        raise ConfigError("--manifest is required (or manifest_path in --config)")
    if not merged.get("out_dir"):
        raise ConfigError("--out is required (or out_dir in --config)")
    return RunConfig(**merged)


def _print_summary(report: RunReport) -> None:
    agg = report.aggregate
    ok = sum(1 for r in report.per_job if r.status == "ok")
    failed = len(report.per_job) - ok
    print(f"{len(report.per_job)} jobs: {ok} ok, {failed} failed; "
          f"success_rate={agg.success_rate:.3f} (k={agg.k})")
    if agg.mean_speed is not None:
        print(f"mean selection time: {agg.mean_speed:.4f} s/video")
    if agg.compression is not None:
        c = agg.compression
        print(f"compression: {c.ratio:.1f}x "
              f"({c.orig_bytes} -> {c.comp_bytes} bytes)")


def _cmd_select(args: argparse.Namespace) -> int:
    config = _build_config(args)
    report = run(config)
    _print_summary(report)
    print(f"report: {Path(config.out_dir) / 'report.json'}")
    if report.aggregate.success_rate < config.fail_under:
        log.error("success_rate %.3f below --fail-under %.3f",
                  report.aggregate.success_rate, config.fail_under)
        return 1
    return 0


def _cmd_gen_corpus(args: argparse.Namespace) -> int:
    spec_kwargs = {}
    for cli_name, field_name in (
        ("videos", "n_videos"), ("fps", "fps"), ("duration", "duration"),
        ("width", "width"), ("height", "height"),
        ("planted_color", "planted_color"),
        ("distractor_color", "distractor_color"),
        ("planted_count", "planted_count"), ("cn", "cn"), ("k", "k"),
    ):
        value = getattr(args, cli_name)
        if value is not None:
            spec_kwargs[field_name] = value
    if args.planted_positions is not None:
        try:
            spec_kwargs["planted_positions"] = tuple(
                int(tok) for tok in args.planted_positions.split(",") if tok.strip()
            )
        except ValueError as exc:
            raise ConfigError(
                f"--planted-positions must be comma-separated integers: {exc}"
            ) from exc
    spec = CorpusSpec(**spec_kwargs)
    paths = gen_corpus(spec, args.out_dir, seed=args.seed)
    print(f"wrote {len(paths.video_paths)} videos "
          f"({spec.frame_count} frames each) under {paths.root}")
    print(f"manifest: {paths.manifest_path}")
    print(f"ground truth: {paths.ground_truth_path}")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = _build_config(args)
    selectors = [s for s in args.selectors.split(",") if s]
    rows = bench(config, selectors, args.reps)
    csv_path = Path(config.out_dir) / "bench.csv"
    write_bench_csv(rows, csv_path)
    print(f"{'selector':<10} {'videos':>6} {'reps':>5} {'mean_s':>10} {'p95_s':>10}")
    for r in rows:
        print(f"{r.selector:<10} {r.videos:>6} {r.repetitions:>5} "
              f"{r.mean_s:>10.4f} {r.p95_s:>10.4f}")
    print(f"bench table: {csv_path}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    report = reaggregate(args.out_dir, manifest_path=args.manifest_path)
    out = Path(args.out_dir)
    report_json = out / "report.json"
    report_json.write_bytes(emit_json(report))
    (out / "report.csv").write_bytes(emit_csv(report))
    _print_summary(report)
    print(f"report: {report_json}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keyframe",
        description="Query-aware keyframe selection for video-language data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_select = sub.add_parser("select", help="run selection over a manifest")
    _add_run_flags(p_select)
    p_select.set_defaults(func=_cmd_select)

    p_gen = sub.add_parser("gen-corpus", help="generate a synthetic test corpus")
    p_gen.add_argument("--out", dest="out_dir", required=True, metavar="DIR")
    p_gen.add_argument("--videos", type=int, help="number of clips (default 10)")
    p_gen.add_argument("--fps", type=float, help="frame rate (default 24)")
    p_gen.add_argument("--duration", type=float, help="seconds per clip (default 2)")
    p_gen.add_argument("--width", type=int, help="frame width (default 64)")
    p_gen.add_argument("--height", type=int, help="frame height (default 64)")
    p_gen.add_argument("--planted-color", dest="planted_color",
                       choices=sorted(COLOR_RGB))
    p_gen.add_argument("--distractor-color", dest="distractor_color",
                       choices=sorted(COLOR_RGB))
    p_gen.add_argument("--planted-count", dest="planted_count", type=int,
                       help="planted frames per clip (default 8)")
    p_gen.add_argument("--planted-positions", dest="planted_positions",
                       metavar="I,J,...", help="explicit frame indices to plant")
    p_gen.add_argument("--cn", type=int,
                       help="coarse sample size the corpus is tuned for (default 32)")
    p_gen.add_argument("--k", type=int,
                       help="selection size the corpus is tuned for (default 8)")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=_cmd_gen_corpus)

    p_bench = sub.add_parser("bench", help="time selectors on one corpus")
    _add_run_flags(p_bench)
    p_bench.add_argument("--selectors", default="clip,cluster",
                         metavar="A,B,...", help="selectors to compare")
    p_bench.add_argument("--reps", type=int, default=3,
                         help="repetitions per selector (default 3)")
    p_bench.set_defaults(func=_cmd_bench)

    p_report = sub.add_parser(
        "report", help="re-aggregate selection.json files into a report"
    )
    p_report.add_argument("--out", dest="out_dir", required=True, metavar="DIR",
                          help="run root holding the job directories")
    p_report.add_argument("--manifest", dest="manifest_path", metavar="FILE",
                          help="original manifest, for source byte sizes")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KeyframeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
