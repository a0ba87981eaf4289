"""Video probing, decoding, coarse sampling, and artifact output.

Decoding sits behind a small ``DecoderBackend`` contract (probe,
extract-frames-at-indices, encode) so codec handling stays swappable.
The default backend uses OpenCV's bundled decoders in-process; an
ffmpeg backend driven by configurable command templates is available
where the binaries exist.
"""

from __future__ import annotations

import json
import os
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import cv2
import numpy as np

from .errors import DecodeError, EncodeError, WriteError


@dataclass(frozen=True)
class VideoMeta:
    frame_count: int
    fps: float
    width: int
    height: int
    byte_size: int


@dataclass(frozen=True)
class Frame:
    """One decoded frame: original index, timestamp, RGB uint8 bitmap."""

    index: int
    timestamp: float
    pixels: np.ndarray


@dataclass(frozen=True)
class CoarseFrameSet:
    frames: tuple[Frame, ...]
    source_meta: VideoMeta
    cn_requested: int

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def indices(self) -> list[int]:
        return [f.index for f in self.frames]


class DecoderBackend(Protocol):
    def probe(self, path: str | os.PathLike) -> VideoMeta: ...

    def read_frames(
        self, path: str | os.PathLike, indices: Sequence[int], fps: float
    ) -> list[Frame]: ...

    def write_video(
        self, frames: Sequence[np.ndarray], path: str | os.PathLike, fps: float
    ) -> None: ...


_FOURCC_BY_EXT = {".avi": "MJPG", ".mp4": "mp4v", ".mkv": "mp4v", ".mov": "mp4v"}


class OpenCVBackend:
    """In-process decode/encode via OpenCV's bundled codecs."""

    def probe(self, path) -> VideoMeta:
        path = str(path)
        if not os.path.isfile(path):
            raise DecodeError(path, "file does not exist")
        byte_size = os.path.getsize(path)
        cap = cv2.VideoCapture(path)
        try:
            if not cap.isOpened():
                raise DecodeError(path, "container could not be opened")
            frame_count = max(0, int(cap.get(cv2.CAP_PROP_FRAME_COUNT)))
            fps = float(cap.get(cv2.CAP_PROP_FPS))
            width = int(cap.get(cv2.CAP_PROP_FRAME_WIDTH))
            height = int(cap.get(cv2.CAP_PROP_FRAME_HEIGHT))
        finally:
            cap.release()
        if frame_count == 0 and byte_size == 0:
            raise DecodeError(path, "empty file")
        return VideoMeta(frame_count, fps, width, height, byte_size)

    def read_frames(self, path, indices, fps) -> list[Frame]:
        path = str(path)
        if not indices:
            return []
        wanted = set(indices)
        last = indices[-1]
        cap = cv2.VideoCapture(path)
        try:
            if not cap.isOpened():
                raise DecodeError(path, "container could not be opened")
            out: list[Frame] = []
            for idx in range(last + 1):
                # grab() advances without a full decode for skipped frames
                if not cap.grab():
                    raise DecodeError(path, f"stream ended before frame {idx}")
                if idx in wanted:
                    ok, bgr = cap.retrieve()
                    if not ok or bgr is None:
                        raise DecodeError(path, f"failed to decode frame {idx}")
                    rgb = cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
                    ts = idx / fps if fps > 0 else 0.0
                    out.append(Frame(index=idx, timestamp=ts, pixels=rgb))
        finally:
            cap.release()
        return out

    def write_video(self, frames, path, fps) -> None:
        path = str(path)
        if not frames:
            raise EncodeError(f"{path}: no frames to encode")
        fourcc_name = _FOURCC_BY_EXT.get(Path(path).suffix.lower(), "mp4v")
        h, w = frames[0].shape[:2]
        writer = cv2.VideoWriter(
            path, cv2.VideoWriter_fourcc(*fourcc_name), fps, (w, h)
        )
        try:
            if not writer.isOpened():
                raise EncodeError(f"{path}: encoder {fourcc_name} unavailable")
            for rgb in frames:
                writer.write(cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
        finally:
            writer.release()
        if not os.path.isfile(path) or os.path.getsize(path) == 0:
            raise EncodeError(f"{path}: encoder produced no output")


@dataclass
class FfmpegBackend:
    """Shell-out backend driven by command templates.

    Templates are ``str.format`` strings; the defaults assume stock
    ffmpeg/ffprobe on PATH. Override via config to adapt to other
    toolchains.
    """

    probe_cmd: str = (
        "ffprobe -v error -select_streams v:0 -count_packets "
        "-show_entries stream=nb_read_packets,r_frame_rate,width,height "
        "-of json {input}"
    )
    extract_cmd: str = (
        "ffmpeg -v error -y -i {input} -vf select={select} -vsync 0 {pattern}"
    )
    encode_cmd: str = (
        "ffmpeg -v error -y -framerate {fps} -i {pattern} -pix_fmt yuv420p {output}"
    )

    def _run(self, cmd: str) -> subprocess.CompletedProcess:
        try:
            return subprocess.run(
                shlex.split(cmd), capture_output=True, text=True, check=False
            )
        except OSError as exc:
            # missing binary reports like a failed run, with diagnostics
            return subprocess.CompletedProcess(
                args=cmd, returncode=127, stdout="", stderr=str(exc)
            )

    def probe(self, path) -> VideoMeta:
        path = str(path)
        if not os.path.isfile(path):
            raise DecodeError(path, "file does not exist")
        proc = self._run(self.probe_cmd.format(input=shlex.quote(path)))
        if proc.returncode != 0:
            raise DecodeError(path, proc.stderr.strip() or "ffprobe failed")
        try:
            stream = json.loads(proc.stdout)["streams"][0]
            num, den = stream.get("r_frame_rate", "0/1").split("/")
            fps = float(num) / float(den) if float(den) else 0.0
            return VideoMeta(
                frame_count=int(stream.get("nb_read_packets", 0)),
                fps=fps,
                width=int(stream["width"]),
                height=int(stream["height"]),
                byte_size=os.path.getsize(path),
            )
        except (KeyError, IndexError, ValueError) as exc:
            raise DecodeError(path, f"unparseable probe output: {exc}") from exc

    def read_frames(self, path, indices, fps) -> list[Frame]:
        path = str(path)
        if not indices:
            return []
        select = "+".join(f"eq(n\\,{i})" for i in indices)
        with tempfile.TemporaryDirectory(prefix="kf_extract_") as tmp:
            pattern = os.path.join(tmp, "f_%06d.png")
            proc = self._run(
                self.extract_cmd.format(
                    input=shlex.quote(path), select=shlex.quote(select), pattern=pattern
                )
            )
            if proc.returncode != 0:
                raise DecodeError(path, proc.stderr.strip() or "ffmpeg failed")
            files = sorted(Path(tmp).glob("f_*.png"))
            if len(files) != len(indices):
                raise DecodeError(
                    path, f"expected {len(indices)} frames, decoder wrote {len(files)}"
                )
            out = []
            for idx, f in zip(indices, files):
                bgr = cv2.imread(str(f))
                if bgr is None:
                    raise DecodeError(path, f"unreadable extracted frame {f.name}")
                ts = idx / fps if fps > 0 else 0.0
                out.append(
                    Frame(index=idx, timestamp=ts, pixels=cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB))
                )
            return out

    def write_video(self, frames, path, fps) -> None:
        path = str(path)
        if not frames:
            raise EncodeError(f"{path}: no frames to encode")
        with tempfile.TemporaryDirectory(prefix="kf_encode_") as tmp:
            for i, rgb in enumerate(frames):
                cv2.imwrite(
                    os.path.join(tmp, f"f_{i:06d}.png"),
                    cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR),
                )
            pattern = os.path.join(tmp, "f_%06d.png")
            proc = self._run(
                self.encode_cmd.format(fps=fps, pattern=pattern, output=shlex.quote(path))
            )
            if proc.returncode != 0:
                raise EncodeError(f"{path}: {proc.stderr.strip() or 'ffmpeg failed'}")


_DEFAULT_BACKEND = OpenCVBackend()


def get_backend(name: str = "opencv", templates: dict | None = None) -> DecoderBackend:
    if name == "opencv":
        return _DEFAULT_BACKEND
    if name == "ffmpeg":
        return FfmpegBackend(**(templates or {}))
    raise ValueError(f"unknown decoder backend {name!r}")


def probe(path, backend: DecoderBackend | None = None) -> VideoMeta:
    return (backend or _DEFAULT_BACKEND).probe(path)


def coarse_indices(frame_count: int, cn: int) -> list[int]:
    """Evenly spaced frame indices: ``round(i * (N-1) / (cn-1))``.

    Takes every frame when the video is shorter than ``cn``; otherwise the
    spacing is endpoint-inclusive, so index 0 and N-1 are always covered.
    Rounding is half-up to keep the result platform-independent.
    """
    if frame_count < 0:
        raise ValueError("frame_count must be >= 0")
    if cn < 1:
        raise ValueError("cn must be >= 1")
    if frame_count <= cn:
        return list(range(frame_count))
    if cn == 1:
        return [0]
    step = (frame_count - 1) / (cn - 1)
    out: list[int] = []
    for i in range(cn):
        idx = int(i * step + 0.5)
        if not out or idx > out[-1]:
            out.append(idx)
    return out


def decode_frames(
    path,
    indices: Sequence[int],
    backend: DecoderBackend | None = None,
    cn_requested: int | None = None,
) -> CoarseFrameSet:
    """Decode exactly the requested frames (strictly increasing indices)."""
    backend = backend or _DEFAULT_BACKEND
    meta = backend.probe(path)
    indices = list(indices)
    for prev, cur in zip(indices, indices[1:]):
        if cur <= prev:
            raise DecodeError(path, f"indices not strictly increasing at {cur}")
    if indices and indices[-1] >= meta.frame_count:
        raise DecodeError(
            path, f"index {indices[-1]} out of range (frame_count={meta.frame_count})"
        )
    if indices and indices[0] < 0:
        raise DecodeError(path, f"negative frame index {indices[0]}")
    frames = backend.read_frames(path, indices, meta.fps)
    return CoarseFrameSet(
        frames=tuple(frames),
        source_meta=meta,
        cn_requested=cn_requested if cn_requested is not None else len(indices),
    )


@dataclass
class WrittenSelection:
    """Artifact manifest returned by :func:`write_selection`."""

    job_dir: Path
    png_paths: list[Path] = field(default_factory=list)
    video_path: Path | None = None
    json_path: Path | None = None

    @property
    def artifact_bytes(self) -> int:
        """On-disk bytes of the selected video data (PNGs + optional clip)."""
        total = sum(p.stat().st_size for p in self.png_paths)
        if self.video_path is not None:
            total += self.video_path.stat().st_size
        return total


def write_selection(
    frames: Sequence[Frame],
    job_dir: str | os.PathLike,
    payload: dict,
    *,
    emit_video: bool = False,
    backend: DecoderBackend | None = None,
    output_fps: float = 1.0,
) -> WrittenSelection:
    """Write ``frame_<index>.png`` files plus ``selection.json`` atomically.

    Everything is staged in a sibling temp directory and renamed into
    place in one step, so ``job_dir`` either holds a complete selection
    or does not exist. With ``emit_video`` the frames are also re-encoded
    to ``keyframes.mp4`` in temporal order at ``output_fps``.
    """
    backend = backend or _DEFAULT_BACKEND
    job_dir = Path(job_dir)
    for prev, cur in zip(frames, frames[1:]):
        if cur.index <= prev.index:
            raise WriteError(f"frames not in ascending index order at {cur.index}")

    stage = Path(
        tempfile.mkdtemp(prefix=job_dir.name + ".tmp-", dir=job_dir.parent)
    )
    result = WrittenSelection(job_dir=job_dir)
    try:
        for fr in frames:
            png = stage / f"frame_{fr.index:06d}.png"
            if not cv2.imwrite(str(png), cv2.cvtColor(fr.pixels, cv2.COLOR_RGB2BGR)):
                raise WriteError(f"failed to write {png}")
            result.png_paths.append(job_dir / png.name)
        if emit_video and frames:
            backend.write_video(
                [fr.pixels for fr in frames], stage / "keyframes.mp4", output_fps
            )
            result.video_path = job_dir / "keyframes.mp4"

        tmp_json = stage / "selection.json.tmp"
        tmp_json.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        os.replace(tmp_json, stage / "selection.json")
        result.json_path = job_dir / "selection.json"

        if job_dir.exists():
            shutil.rmtree(job_dir)
        os.replace(stage, job_dir)
    except OSError as exc:
        shutil.rmtree(stage, ignore_errors=True)
        raise WriteError(f"{job_dir}: {exc}") from exc
    except Exception:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    return result


def read_selection(job_dir: str | os.PathLike) -> dict:
    """Load a previously written selection.json."""
    path = Path(job_dir) / "selection.json"
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
