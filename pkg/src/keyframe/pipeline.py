"""End-to-end orchestration: config, job fan-out, reports, benchmarks.

Each manifest entry becomes one job: build the query (text-similarity
selector only), probe, coarse-sample, decode, select, write artifacts.
Jobs run on a bounded thread pool; a failing job is recorded in the
report and never aborts the batch. Per-job randomness is derived from
the root seed and the job key, so results do not depend on the worker
count.
"""

from __future__ import annotations

import logging
import os
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .embedder import EmbeddingProvider, make_provider
from .errors import (
    ConfigError,
    DecodeError,
    EncodeError,
    MetricError,
    ProviderError,
    QueryError,
    UnsupportedStrategyError,
    WriteError,
)
from .manifest import ManifestEntry, QueryMode, build_text_query, parse_manifest
from .metrics import JobRecord, RunReport, build_report, write_report
from .seeding import derive_seed
from .selector import STRATEGIES, SelectionResult, run_strategy
from .videoio import (
    DecoderBackend,
    Frame,
    coarse_indices,
    decode_frames,
    get_backend,
    read_selection,
    write_selection,
)

log = logging.getLogger(__name__)

# Called around the probe+decode span of every job with (job_key, "start")
# then (job_key, "end"); tests use it to watch worker-pool concurrency.
DecodeHook = Callable[[str, str], None]

ENDPOINT_ENV = "KEYFRAME_ENDPOINT"


@dataclass
class RunConfig:
    manifest_path: str
    out_dir: str
    selector: str = "clip"
    mode: str = "qa"
    cn: int = 32
    k: int = 8
    provider: str = "mock"
    endpoint: str | None = None
    jobs: int = 1
    batch_size: int = 32
    seed: int = 0
    emit_video: bool = False
    output_fps: float = 1.0
    decoder: str = "opencv"
    decoder_templates: dict = field(default_factory=dict)
    fail_under: float = 0.0
    token_budget: int | None = None


def resolve_endpoint(config: RunConfig) -> str | None:
    return config.endpoint or os.environ.get(ENDPOINT_ENV) or None


def validate_config(config: RunConfig) -> None:
    """Reject bad configs before any job starts."""
    if config.selector == "dsnet":
        raise UnsupportedStrategyError(
            "selector 'dsnet' is a reserved slot: summarization-network "
            "selection needs a pretrained model and is not available"
        )
    if config.selector not in STRATEGIES:
        raise ConfigError(
            f"unknown selector {config.selector!r}; choose from "
            f"{', '.join(s for s in STRATEGIES)}"
        )
    try:
        QueryMode.parse(config.mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if config.cn < 1:
        raise ConfigError("cn must be >= 1")
    if config.k < 1:
        raise ConfigError("k must be >= 1")
    if config.cn < config.k:
        log.warning(
            "cn=%d < k=%d: selection saturates at the coarse sample size",
            config.cn, config.k,
        )
    if config.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if not 1 <= config.batch_size <= 32:
        raise ConfigError("batch_size must be in 1..32")
    if config.provider == "remote" and not resolve_endpoint(config):
        raise ConfigError(
            f"remote provider needs --endpoint or {ENDPOINT_ENV}"
        )
    if config.provider not in ("mock", "remote"):
        raise ConfigError(f"unknown provider {config.provider!r}")
    if config.fail_under < 0.0 or config.fail_under > 1.0:
        raise ConfigError("fail-under must be in [0, 1]")


def _source_bytes(path: str) -> int:
    try:
        return os.path.getsize(path)
    except OSError:
        return 0


def _run_job(
    entry: ManifestEntry,
    config: RunConfig,
    mode: QueryMode,
    provider: EmbeddingProvider,
    backend: DecoderBackend,
    decode_hook: DecodeHook | None,
) -> JobRecord:
    job_key = entry.job_key
    is_text_sim = config.selector == "clip"
    orig_bytes = _source_bytes(entry.video_path)
    frame_count = None
    wall = 0.0
    coarse = None
    t0 = None

    try:
        query = None
        if is_text_sim:
            budget = config.token_budget or provider.info().token_budget
            query = build_text_query(entry, mode, budget)

        t0 = time.perf_counter()
        if decode_hook:
            decode_hook(job_key, "start")
        try:
            indices = coarse_indices(
                backend.probe(entry.video_path).frame_count, config.cn
            )
            coarse = decode_frames(
                entry.video_path, indices, backend, cn_requested=config.cn
            )
        finally:
            if decode_hook:
                decode_hook(job_key, "end")
        frame_count = coarse.source_meta.frame_count

        result = run_strategy(
            config.selector,
            coarse,
            config.k,
            query=query,
            provider=provider,
            seed=derive_seed(config.seed, job_key),
        )
        wall = time.perf_counter() - t0
    except (DecodeError, QueryError, ProviderError) as exc:
        if t0 is not None:
            wall = time.perf_counter() - t0
        result = SelectionResult(
            selector=config.selector,
            k_requested=config.k,
            status="failed",
            error=str(exc),
            mode=mode if is_text_sim else None,
        )

    result = result.with_job_key(job_key)
    comp_bytes = _write_outputs(entry, config, result, coarse, frame_count)
    if isinstance(comp_bytes, str):  # write failed; demote the job
        result = replace(result, status="failed", error=comp_bytes)
        comp_bytes = 0

    return JobRecord(
        job_key=job_key,
        selector=config.selector,
        mode=mode.value if is_text_sim else None,
        status=result.status,
        error=result.error,
        n_selected=result.n_selected,
        wall_time=wall,
        orig_bytes=orig_bytes,
        comp_bytes=comp_bytes,
    )


def _write_outputs(
    entry: ManifestEntry,
    config: RunConfig,
    result: SelectionResult,
    coarse,
    frame_count,
) -> int | str:
    """Write the job directory; returns comp_bytes, or an error string."""
    frames: list[Frame] = []
    if coarse is not None and result.status == "ok":
        by_index = {f.index: f for f in coarse.frames}
        frames = [by_index[s.frame_index] for s in result.selected]
    payload = {
        "video_id": entry.video_id,
        "mode": result.mode.value if result.mode is not None else None,
        "selector": result.selector,
        "k": config.k,
        "cn": config.cn,
        "frame_count": frame_count,
        "indices": result.indices,
        "timestamps": [f.timestamp for f in frames],
        "scores": [s.score for s in result.selected],
        "status": result.status,
        "error": result.error,
    }
    job_dir = Path(config.out_dir) / result.job_key
    try:
        written = write_selection(
            frames,
            job_dir,
            payload,
            emit_video=config.emit_video,
            backend=get_backend(config.decoder, config.decoder_templates),
            output_fps=config.output_fps,
        )
        return written.artifact_bytes
    except (WriteError, EncodeError) as exc:
        if result.status == "ok":
            return f"write: {exc}"
        log.warning("could not record failed job %s: %s", result.job_key, exc)
        return 0


def run(
    config: RunConfig,
    *,
    provider: EmbeddingProvider | None = None,
    decode_hook: DecodeHook | None = None,
) -> RunReport:
    """Run every manifest entry and write report.json / report.csv."""
    validate_config(config)
    try:
        entries = parse_manifest(config.manifest_path)
    except OSError as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from exc
    if not entries:
        raise ConfigError(f"manifest {config.manifest_path} has no entries")
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create out_dir {out_dir}: {exc}") from exc

    mode = QueryMode.parse(config.mode)
    if provider is None:
        provider = make_provider(
            config.provider,
            endpoint=resolve_endpoint(config),
            batch_size=config.batch_size,
        )
    backend = get_backend(config.decoder, config.decoder_templates)

    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        futures = [
            pool.submit(_run_job, e, config, mode, provider, backend, decode_hook)
            for e in entries
        ]
        # future order is manifest order, so the report is schedule-independent
        records = [f.result() for f in futures]

    report = build_report(records, config.k)
    write_report(report, out_dir / "report.json", out_dir / "report.csv")
    return report


@dataclass(frozen=True)
class BenchRow:
    selector: str
    videos: int
    repetitions: int
    mean_s: float
    p95_s: float


def bench(
    config: RunConfig, selectors: Sequence[str], repetitions: int
) -> list[BenchRow]:
    """Per-selector speed table over repeated runs of one corpus.

    Each video's wall times are averaged across repetitions first; the
    row's mean and p95 are then taken across videos.
    """
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    if not selectors:
        raise ConfigError("no selectors to benchmark")
    rows = []
    for sel in selectors:
        per_video: dict[str, list[float]] = defaultdict(list)
        for rep in range(repetitions):
            rep_config = replace(
                config,
                selector=sel,
                out_dir=str(Path(config.out_dir) / "bench" / f"{sel}_rep{rep}"),
            )
            report = run(rep_config)
            for rec in report.per_job:
                per_video[rec.job_key].append(rec.wall_time)
        means = [sum(ts) / len(ts) for ts in per_video.values()]
        rows.append(
            BenchRow(
                selector=sel,
                videos=len(means),
                repetitions=repetitions,
                mean_s=float(np.mean(means)),
                p95_s=float(np.percentile(means, 95)),
            )
        )
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path) -> None:
    lines = ["selector,videos,repetitions,mean_s,p95_s"]
    for r in rows:
        lines.append(
            f"{r.selector},{r.videos},{r.repetitions},{r.mean_s:.6g},{r.p95_s:.6g}"
        )
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise WriteError(f"cannot write bench table: {exc}") from exc


def reaggregate(out_dir, manifest_path=None) -> RunReport:
    """Rebuild a report from selection.json files already on disk.

    Source byte sizes come from the manifest when one is given;
    wall times are not recoverable, so mean_speed is null.
    """
    root = Path(out_dir)
    job_dirs = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / "selection.json").is_file()
    )
    if not job_dirs:
        raise MetricError(f"no selection.json files under {root}")

    orig_by_id: dict[str, int] = {}
    if manifest_path is not None:
        for e in parse_manifest(manifest_path):
            orig_by_id.setdefault(e.video_id, _source_bytes(e.video_path))

    records = []
    k = None
    for d in job_dirs:
        payload = read_selection(d)
        if k is None:
            k = int(payload.get("k", 1))
        comp = sum(p.stat().st_size for p in d.glob("frame_*.png"))
        clip = d / "keyframes.mp4"
        if clip.is_file():
            comp += clip.stat().st_size
        records.append(
            JobRecord(
                job_key=d.name,
                selector=str(payload.get("selector", "")),
                mode=payload.get("mode"),
                status=str(payload.get("status", "failed")),
                error=payload.get("error"),
                n_selected=len(payload.get("indices", [])),
                wall_time=None,
                orig_bytes=orig_by_id.get(str(payload.get("video_id")), 0),
                comp_bytes=comp,
            )
        )
    return build_report(records, k or 1)
