from __future__ import annotations

import sys

import numpy as np
import pytest

from keyframe.corpus import COLOR_RGB, CorpusSpec, gen_corpus
from keyframe.embedder import MockProvider
from keyframe.videoio import OpenCVBackend

from protocol_server import ProtocolServer


def rgb(name: str) -> tuple[int, int, int]:
    return COLOR_RGB[name]


def solid_frame(color: str, size: int = 64) -> np.ndarray:
    return np.broadcast_to(
        np.array(COLOR_RGB[color], dtype=np.uint8), (size, size, 3)
    ).copy()


@pytest.fixture
def mock_provider() -> MockProvider:
    return MockProvider()


@pytest.fixture
def make_video(tmp_path):
    """Factory writing a solid-color-frame clip; returns its path."""
    backend = OpenCVBackend()
    counter = {"n": 0}

    def _make(colors, fps: float = 24.0, size: int = 64, suffix: str = ".avi"):
        counter["n"] += 1
        path = tmp_path / f"clip{counter['n']:03d}{suffix}"
        backend.write_video([solid_frame(c, size) for c in colors], path, fps)
        return path

    return _make


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Four 48-frame planted-color clips plus manifest and ground truth."""
    root = tmp_path_factory.mktemp("corpus")
    return gen_corpus(CorpusSpec(n_videos=4), root, seed=11)


@pytest.fixture
def protocol_server():
    server = ProtocolServer().start()
    yield server
    server.stop()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion after the run."""
    mod = sys.modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if verdicts:
        terminalreporter.section("acceptance criteria")
        for line in verdicts:
            terminalreporter.write_line(line)
