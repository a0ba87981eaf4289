"""Run accounting: compression ratio, success rate, timing, report emit.

A job is successful when it finished with status "ok" and selected at
least k frames. Compression is aggregated from summed byte totals, not
from a mean of per-video ratios. Reports serialize to JSON (full) and
CSV (per-job table) with floats at six significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import MetricError, WriteError


@dataclass(frozen=True)
class CompressionStats:
    orig_bytes: int
    comp_bytes: int
    ratio: float


@dataclass(frozen=True)
class JobRecord:
    job_key: str
    selector: str
    mode: str | None
    status: str
    error: str | None
    n_selected: int
    wall_time: float | None
    orig_bytes: int
    comp_bytes: int


@dataclass(frozen=True)
class Aggregate:
    k: int
    success_rate: float
    mean_speed: float | None
    compression: CompressionStats | None


@dataclass(frozen=True)
class RunReport:
    per_job: tuple[JobRecord, ...]
    aggregate: Aggregate


class Stopwatch:
    """Context manager; .elapsed holds the wall seconds of the with-block."""

    def __enter__(self) -> "Stopwatch":
        self._t0 = time.perf_counter()
        self.elapsed = 0.0
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.perf_counter() - self._t0


def compression_ratio(orig_bytes: int, comp_bytes: int) -> float:
    """Source size over selected-output size; > 1 means the cut is smaller."""
    if comp_bytes <= 0:
        raise MetricError("empty output: comp_bytes must be positive")
    if orig_bytes < 0:
        raise MetricError("orig_bytes must be non-negative")
    return orig_bytes / comp_bytes


def success_rate(results: Iterable, k: int) -> float:
    """Fraction of jobs that ended ok with at least k frames selected."""
    if k < 1:
        raise ValueError("k must be >= 1")
    items = list(results)
    if not items:
        raise MetricError("no jobs")
    good = sum(1 for r in items if r.status == "ok" and r.n_selected >= k)
    return good / len(items)


def build_report(records: Sequence[JobRecord], k: int) -> RunReport:
    rate = success_rate(records, k)
    walls = [r.wall_time for r in records]
    mean_speed = None if any(w is None for w in walls) else sum(walls) / len(walls)
    total_orig = sum(r.orig_bytes for r in records)
    total_comp = sum(r.comp_bytes for r in records)
    if total_comp > 0:
        compression = CompressionStats(
            total_orig, total_comp, compression_ratio(total_orig, total_comp)
        )
    else:
        compression = None
    return RunReport(
        per_job=tuple(records),
        aggregate=Aggregate(k, rate, mean_speed, compression),
    )


def _round6(x: float | None) -> float | None:
    if x is None:
        return None
    return float(f"{x:.6g}")


def _job_dict(r: JobRecord) -> dict:
    return {
        "job_key": r.job_key,
        "selector": r.selector,
        "mode": r.mode,
        "status": r.status,
        "error": r.error,
        "n_selected": r.n_selected,
        "wall_time": _round6(r.wall_time),
        "orig_bytes": r.orig_bytes,
        "comp_bytes": r.comp_bytes,
    }


def emit_json(report: RunReport) -> bytes:
    agg = report.aggregate
    payload = {
        "per_job": [_job_dict(r) for r in report.per_job],
        "aggregate": {
            "k": agg.k,
            "success_rate": _round6(agg.success_rate),
            "mean_speed": _round6(agg.mean_speed),
            "compression": None
            if agg.compression is None
            else {
                "orig_bytes": agg.compression.orig_bytes,
                "comp_bytes": agg.compression.comp_bytes,
                "ratio": _round6(agg.compression.ratio),
            },
        },
    }
    return (json.dumps(payload, indent=2) + "\n").encode("utf-8")


CSV_COLUMNS = (
    "job_key", "selector", "mode", "status", "error",
    "n_selected", "wall_time", "orig_bytes", "comp_bytes",
)


def emit_csv(report: RunReport) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.per_job:
        d = _job_dict(r)
        writer.writerow(["" if d[c] is None else d[c] for c in CSV_COLUMNS])
    return buf.getvalue().encode("utf-8")


def parse_csv(data: bytes | str) -> list[JobRecord]:
    """Inverse of emit_csv over the per-job table."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.DictReader(io.StringIO(text))
    records = []
    for row in reader:
        records.append(
            JobRecord(
                job_key=row["job_key"],
                selector=row["selector"],
                mode=row["mode"] or None,
                status=row["status"],
                error=row["error"] or None,
                n_selected=int(row["n_selected"]),
                wall_time=float(row["wall_time"]) if row["wall_time"] else None,
                orig_bytes=int(row["orig_bytes"]),
                comp_bytes=int(row["comp_bytes"]),
            )
        )
    return records


def write_report(report: RunReport, json_path, csv_path) -> None:
    try:
        with open(json_path, "wb") as fh:
            fh.write(emit_json(report))
        with open(csv_path, "wb") as fh:
            fh.write(emit_csv(report))
    except OSError as exc:
        raise WriteError(f"cannot write report: {exc}") from exc
