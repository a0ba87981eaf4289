"""Manifest ingestion and text query construction.

A manifest is newline-delimited JSON, one record per line, with keys
``video_id``, ``video``, ``question``, ``answer`` (unknown keys are
ignored). Each record becomes one selection job; repeated video_ids are
legal and are told apart by the derived job key ``video_id#ordinal``.
"""

from __future__ import annotations

import enum
import io
import json
import os
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import ManifestError, QueryError

REQUIRED_KEYS = ("video_id", "video", "question", "answer")


class QueryMode(enum.Enum):
    """How the query text is assembled from a record's question/answer."""

    ANSWER = "answer"
    QUESTION_ANSWER = "qa"
    QUESTION = "question"

    @classmethod
    def parse(cls, name: str) -> "QueryMode":
        aliases = {
            "answer": cls.ANSWER,
            "a": cls.ANSWER,
            "qa": cls.QUESTION_ANSWER,
            "question-answer": cls.QUESTION_ANSWER,
            "question_answer": cls.QUESTION_ANSWER,
            "question": cls.QUESTION,
            "q": cls.QUESTION,
        }
        try:
            return aliases[name.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown query mode {name!r}") from None


@dataclass(frozen=True)
class ManifestEntry:
    """One (video, question, answer) record driving one selection job."""

    video_id: str
    video_path: str
    question: str
    answer: str
    ordinal: int = 0

    @property
    def job_key(self) -> str:
        return f"{self.video_id}#{self.ordinal}"


@dataclass(frozen=True)
class TextQuery:
    text: str
    mode: QueryMode
    truncated: bool = False


def parse_manifest(source: str | os.PathLike | bytes | IO) -> list[ManifestEntry]:
    """Parse newline-delimited records into entries, in file order.

    ``source`` may be a filesystem path, raw bytes, or a file-like object.
    Blank lines are skipped. Raises :class:`ManifestError` carrying the
    1-based line number on the first malformed line.
    """
    if isinstance(source, bytes):
        stream: IO = io.StringIO(source.decode("utf-8"))
    elif hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        stream = io.StringIO(data)
    else:
        stream = open(source, "r", encoding="utf-8")

    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    try:
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ManifestError(f"line {lineno}: record is not an object")
            for key in REQUIRED_KEYS:
                if key not in record:
                    raise ManifestError(f"line {lineno}: missing key {key}")
            video_id = str(record["video_id"])
            video_path = str(record["video"])
            question = str(record["question"])
            answer = str(record["answer"])
            if not video_path:
                raise ManifestError(f"line {lineno}: empty video path")
            if not question and not answer:
                raise ManifestError(
                    f"line {lineno}: both question and answer are empty"
                )
            ordinal = seen.get(video_id, 0)
            seen[video_id] = ordinal + 1
            entries.append(
                ManifestEntry(video_id, video_path, question, answer, ordinal)
            )
    finally:
        stream.close()
    return entries


def dump_manifest(entries: Iterable[ManifestEntry]) -> str:
    """Serialize entries back to newline-delimited JSON (round-trip safe)."""
    lines = []
    for e in entries:
        lines.append(
            json.dumps(
                {
                    "video_id": e.video_id,
                    "video": e.video_path,
                    "question": e.question,
                    "answer": e.answer,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def build_text_query(
    entry: ManifestEntry, mode: QueryMode, token_budget: int = 77
) -> TextQuery:
    """Assemble the query text for ``mode`` and clip it to ``token_budget``.

    Question+answer are joined with a single space. Token counting is plain
    whitespace splitting; when the budget is exceeded the head tokens are
    kept and ``truncated`` is set.
    """
    if token_budget < 1:
        raise ValueError("token_budget must be >= 1")
    if mode is QueryMode.ANSWER:
        text = entry.answer
    elif mode is QueryMode.QUESTION:
        text = entry.question
    else:
        text = f"{entry.question} {entry.answer}"
    text = text.strip()
    if not text:
        raise QueryError(f"empty query for mode {mode.value}")

    tokens = text.split()
    truncated = len(tokens) > token_budget
    if truncated:
        text = " ".join(tokens[:token_budget])
    return TextQuery(text=text, mode=mode, truncated=truncated)
