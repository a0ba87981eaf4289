"""Synthetic evaluation corpus: solid-color clips with planted frames.

Each generated video is a run of distractor-colored frames with a few
planted frames in a contrasting color, plus a manifest whose questions
and answers name the planted color. Planted positions land on the
coarse sampling grid but off the uniform-selection picks, so a
query-aware selector can recover all of them while blind spacing
cannot. Ground truth goes to ``ground_truth.json`` next to the
manifest.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .manifest import ManifestEntry, dump_manifest
from .seeding import derive_seed, make_rng
from .videoio import DecoderBackend, coarse_indices, get_backend

COLOR_RGB = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
}

VIDEO_EXT = ".avi"  # MJPG: intra-only, keeps solid colors near-exact


@dataclass
class CorpusSpec:
    n_videos: int = 10
    fps: float = 24.0
    duration: float = 2.0
    width: int = 64
    height: int = 64
    planted_color: str = "red"
    distractor_color: str = "blue"
    planted_count: int = 8
    planted_positions: tuple[int, ...] | None = None
    cn: int = 32
    k: int = 8

    @property
    def frame_count(self) -> int:
        return int(round(self.fps * self.duration))


@dataclass
class CorpusPaths:
    root: Path
    manifest_path: Path
    ground_truth_path: Path
    video_paths: list[Path] = field(default_factory=list)


def _validate(spec: CorpusSpec) -> None:
    if spec.n_videos < 0:
        raise ConfigError("n_videos must be >= 0")
    if spec.frame_count < 1:
        raise ConfigError("fps * duration must give at least one frame")
    for name in (spec.planted_color, spec.distractor_color):
        if name not in COLOR_RGB:
            raise ConfigError(
                f"unknown color {name!r}; choose from {sorted(COLOR_RGB)}"
            )
    if spec.planted_color == spec.distractor_color:
        raise ConfigError("planted and distractor colors must differ")
    if spec.planted_positions is not None:
        pos = list(spec.planted_positions)
        if len(set(pos)) != len(pos):
            raise ConfigError("duplicate planted positions")
        if any(p < 0 or p >= spec.frame_count for p in pos):
            raise ConfigError(
                f"planted positions must lie in [0, {spec.frame_count})"
            )
    elif spec.planted_count < 1:
        raise ConfigError("planted_count must be >= 1")


def _eligible_positions(spec: CorpusSpec) -> list[int]:
    """Coarse-grid positions that uniform selection would skip.

    Planting there makes recall separate the selectors: the query-driven
    one sees every planted frame among its coarse samples, while the
    uniform baseline (same k) lands elsewhere.
    """
    grid = coarse_indices(spec.frame_count, spec.cn)
    uniform_picks = {grid[p] for p in coarse_indices(len(grid), spec.k)}
    return [g for g in grid if g not in uniform_picks]


def _positions_for(spec: CorpusSpec, rng: np.random.Generator) -> list[int]:
    if spec.planted_positions is not None:
        return sorted(spec.planted_positions)
    eligible = _eligible_positions(spec)
    if len(eligible) < spec.planted_count:
        raise ConfigError(
            f"cannot plant {spec.planted_count} frames: only {len(eligible)} "
            f"coarse positions are off the uniform picks "
            f"(frame_count={spec.frame_count}, cn={spec.cn}, k={spec.k})"
        )
    picks = rng.choice(len(eligible), size=spec.planted_count, replace=False)
    return sorted(eligible[int(i)] for i in picks)


def gen_corpus(
    spec: CorpusSpec,
    out_dir: str | os.PathLike,
    seed: int = 0,
    backend: DecoderBackend | None = None,
) -> CorpusPaths:
    """Write videos, manifest.ndjson, and ground_truth.json under out_dir."""
    _validate(spec)
    backend = backend or get_backend()
    root = Path(out_dir)
    videos_dir = root / "videos"
    videos_dir.mkdir(parents=True, exist_ok=True)

    planted_rgb = np.array(COLOR_RGB[spec.planted_color], dtype=np.uint8)
    distractor_rgb = np.array(COLOR_RGB[spec.distractor_color], dtype=np.uint8)
    question = f"What is {spec.planted_color} in this clip?"
    answer = f"The {spec.planted_color} object appears."

    entries: list[ManifestEntry] = []
    truth_videos = []
    paths = CorpusPaths(
        root=root,
        manifest_path=root / "manifest.ndjson",
        ground_truth_path=root / "ground_truth.json",
    )
    for i in range(spec.n_videos):
        video_id = f"v{i:04d}"
        rng = make_rng(derive_seed(seed, video_id))
        positions = _positions_for(spec, rng)
        planted = set(positions)

        shape = (spec.height, spec.width, 3)
        frames = [
            np.broadcast_to(
                planted_rgb if n in planted else distractor_rgb, shape
            ).copy()
            for n in range(spec.frame_count)
        ]
        video_path = videos_dir / f"{video_id}{VIDEO_EXT}"
        backend.write_video(frames, video_path, spec.fps)
        paths.video_paths.append(video_path)

        entries.append(
            ManifestEntry(
                video_id=video_id,
                video_path=str(video_path.resolve()),
                question=question,
                answer=answer,
                ordinal=0,
            )
        )
        truth_videos.append(
            {
                "video_id": video_id,
                "video": str(video_path.resolve()),
                "planted_positions": positions,
            }
        )

    paths.manifest_path.write_text(dump_manifest(entries), encoding="utf-8")
    truth = {
        "seed": seed,
        "frame_count": spec.frame_count,
        "cn": spec.cn,
        "k": spec.k,
        "planted_color": spec.planted_color,
        "distractor_color": spec.distractor_color,
        "videos": truth_videos,
    }
    paths.ground_truth_path.write_text(
        json.dumps(truth, indent=2) + "\n", encoding="utf-8"
    )
    return paths


def append_corrupt_entry(
    corpus: CorpusPaths, video_id: str = "corrupt000"
) -> Path:
    """Add one undecodable file to an existing corpus (for failure-path runs)."""
    path = corpus.root / "videos" / f"{video_id}{VIDEO_EXT}"
    path.write_bytes(b"\x00RIFFnot-actually-a-video" * 128)
    entry = ManifestEntry(
        video_id=video_id,
        video_path=str(path.resolve()),
        question="What is red in this clip?",
        answer="The red object appears.",
        ordinal=0,
    )
    with open(corpus.manifest_path, "a", encoding="utf-8") as fh:
        fh.write(dump_manifest([entry]))
    corpus.video_paths.append(path)
    return path
