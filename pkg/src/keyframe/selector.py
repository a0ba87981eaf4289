"""Frame ranking and selection strategies.

The text-similarity selector scores every coarse frame against the query
embedding and keeps the top k; baselines (uniform spacing, seeded random,
histogram clustering) share the same result shape so runs are comparable.
Selected frames always come back in ascending original-frame order.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import kernels
from .embedder import EmbeddingProvider
from .errors import ProviderError, ScoreError, UnsupportedStrategyError
from .manifest import QueryMode, TextQuery
from .videoio import CoarseFrameSet, coarse_indices

STRATEGIES = ("clip", "uniform", "random", "cluster", "dsnet")

KMEANS_MAX_ITER = 50
KMEANS_TOL = 1e-6


@dataclass(frozen=True)
class ScoredFrame:
    frame_index: int
    score: float | None = None


@dataclass(frozen=True)
class SelectionResult:
    selector: str
    k_requested: int
    selected: tuple[ScoredFrame, ...] = ()
    status: str = "ok"  # "ok" | "failed"
    error: str | None = None
    mode: QueryMode | None = None
    job_key: str = ""
    wall_time: float = 0.0

    @property
    def n_selected(self) -> int:
        return len(self.selected)

    @property
    def indices(self) -> list[int]:
        return [s.frame_index for s in self.selected]

    def with_job_key(self, job_key: str) -> "SelectionResult":
        return replace(self, job_key=job_key)


def _failed(selector: str, k: int, reason: str, mode=None, t0=None) -> SelectionResult:
    wall = time.perf_counter() - t0 if t0 is not None else 0.0
    return SelectionResult(
        selector=selector, k_requested=k, status="failed", error=reason,
        mode=mode, wall_time=wall,
    )


def cosine_score(v: np.ndarray, w: np.ndarray) -> float:
    """Cosine similarity (v.w / |v||w|), clamped into [-1, 1]."""
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if v.ndim != 1 or w.ndim != 1 or v.shape != w.shape:
        raise ScoreError(f"dimension mismatch: {v.shape} vs {w.shape}")
    nv = float(np.linalg.norm(v))
    nw = float(np.linalg.norm(w))
    if nv == 0.0 or nw == 0.0:
        raise ScoreError("zero-norm input")
    return float(np.clip(np.dot(v, w) / (nv * nw), -1.0, 1.0))


def select_topk(scores: Sequence[ScoredFrame], k: int) -> list[ScoredFrame]:
    """Highest-scoring min(k, n) frames, returned in temporal order.

    Ties break toward the lower frame index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not scores:
        return []
    vals = np.array([s.score for s in scores], dtype=np.float64)
    idxs = np.array([s.frame_index for s in scores], dtype=np.int64)
    # last lexsort key is primary: score descending, then index ascending
    order = np.lexsort((idxs, -vals))
    keep = order[: min(k, len(scores))]
    keep = keep[np.argsort(idxs[keep], kind="stable")]
    return [scores[i] for i in keep]


def select_text_sim(
    coarse: CoarseFrameSet,
    query: TextQuery,
    provider: EmbeddingProvider,
    k: int,
) -> SelectionResult:
    """Score all coarse frames against the query embedding, keep top k."""
    t0 = time.perf_counter()
    if len(coarse) == 0:
        return _failed("clip", k, "no frames", mode=query.mode, t0=t0)
    try:
        query_vec = provider.embed_texts([query.text])[0]
        frame_vecs = provider.embed_images([f.pixels for f in coarse.frames])
    except ProviderError as exc:
        return _failed("clip", k, f"provider: {exc}", mode=query.mode, t0=t0)

    qn = float(np.linalg.norm(query_vec))
    fns = np.linalg.norm(frame_vecs, axis=1)
    if qn == 0.0 or np.any(fns == 0.0):
        return _failed("clip", k, "provider: zero-norm embedding", mode=query.mode, t0=t0)
    scores = np.clip((frame_vecs @ query_vec) / (fns * qn), -1.0, 1.0)

    scored = [
        ScoredFrame(f.index, float(s)) for f, s in zip(coarse.frames, scores)
    ]
    selected = select_topk(scored, k)
    return SelectionResult(
        selector="clip", k_requested=k, selected=tuple(selected),
        mode=query.mode, wall_time=time.perf_counter() - t0,
    )


def select_uniform(coarse: CoarseFrameSet, k: int) -> SelectionResult:
    """Evenly spaced positions over the coarse set; no scores."""
    t0 = time.perf_counter()
    if len(coarse) == 0:
        return _failed("uniform", k, "no frames", t0=t0)
    positions = coarse_indices(len(coarse), k)
    selected = tuple(ScoredFrame(coarse.frames[p].index) for p in positions)
    return SelectionResult(
        selector="uniform", k_requested=k, selected=selected,
        wall_time=time.perf_counter() - t0,
    )


def select_random(coarse: CoarseFrameSet, k: int, seed: int) -> SelectionResult:
    """k distinct positions drawn without replacement from a seeded PCG64."""
    t0 = time.perf_counter()
    n = len(coarse)
    if n == 0:
        return _failed("random", k, "no frames", t0=t0)
    rng = np.random.Generator(np.random.PCG64(seed))
    positions = np.sort(rng.choice(n, size=min(k, n), replace=False))
    selected = tuple(ScoredFrame(coarse.frames[int(p)].index) for p in positions)
    return SelectionResult(
        selector="random", k_requested=k, selected=selected,
        wall_time=time.perf_counter() - t0,
    )


def _kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[int(rng.integers(n))]
    for c in range(1, k):
        d2 = kernels.pairwise_sqdist(x, centers[:c]).min(axis=1)
        total = float(d2.sum())
        if total <= 0.0:
            pick = int(rng.integers(n))
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centers[c] = x[pick]
    return centers


def _kmeans(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Labels from k-means with k-means++ seeding; converges when the
    largest center shift drops below KMEANS_TOL."""
    centers = _kmeans_pp_init(x, k, rng)
    for _ in range(KMEANS_MAX_ITER):
        labels = kernels.pairwise_sqdist(x, centers).argmin(axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centers[c] = x[members].mean(axis=0)
        shift = float(np.linalg.norm(new_centers - centers, axis=1).max())
        centers = new_centers
        if shift < KMEANS_TOL:
            break
    return kernels.pairwise_sqdist(x, centers).argmin(axis=1)


def select_cluster(coarse: CoarseFrameSet, k: int, seed: int = 0) -> SelectionResult:
    """Histogram k-means baseline: cluster 8x8x8 RGB histograms, then take
    each cluster's sharpest frame (highest variance of Laplacian). Short
    clusters are topped up with the next-sharpest unselected frames."""
    t0 = time.perf_counter()
    n = len(coarse)
    if n == 0:
        return _failed("cluster", k, "no frames", t0=t0)
    if n <= k:
        selected = tuple(ScoredFrame(f.index) for f in coarse.frames)
        return SelectionResult(
            selector="cluster", k_requested=k, selected=selected,
            wall_time=time.perf_counter() - t0,
        )

    hists = np.stack([kernels.rgb_histogram(f.pixels) for f in coarse.frames])
    sharpness = np.array(
        [kernels.laplacian_variance(kernels.grayscale(f.pixels)) for f in coarse.frames]
    )
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = _kmeans(hists, k, rng)

    chosen: list[int] = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        # argmax returns the first (lowest-position) frame on ties
        chosen.append(int(members[np.argmax(sharpness[members])]))

    if len(chosen) < k:
        taken = set(chosen)
        rest = [p for p in range(n) if p not in taken]
        rest.sort(key=lambda p: (-sharpness[p], p))
        chosen.extend(rest[: k - len(chosen)])

    chosen.sort()
    selected = tuple(ScoredFrame(coarse.frames[p].index) for p in chosen)
    return SelectionResult(
        selector="cluster", k_requested=k, selected=selected,
        wall_time=time.perf_counter() - t0,
    )


def run_strategy(
    name: str,
    coarse: CoarseFrameSet,
    k: int,
    *,
    query: TextQuery | None = None,
    provider: EmbeddingProvider | None = None,
    seed: int = 0,
) -> SelectionResult:
    """Dispatch by the strategy names accepted by config/CLI."""
    if name == "clip":
        if query is None or provider is None:
            raise ValueError("clip selector needs a query and a provider")
        return select_text_sim(coarse, query, provider, k)
    if name == "uniform":
        return select_uniform(coarse, k)
    if name == "random":
        return select_random(coarse, k, seed)
    if name == "cluster":
        return select_cluster(coarse, k, seed)
    if name == "dsnet":
        raise UnsupportedStrategyError(
            "selector 'dsnet' is a reserved slot: summarization-network "
            "selection needs a pretrained model and is not available"
        )
    raise UnsupportedStrategyError(f"unknown selector {name!r}")
