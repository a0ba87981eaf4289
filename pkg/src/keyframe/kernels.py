"""Hot numeric kernels for the cluster baseline.

Each kernel ships in two variants: a numba ``@njit`` build and a pure
numpy fallback. The active variant is chosen at import time: numba is
used when importable unless the environment variable ``KEYFRAME_NUMBA``
is set to ``0``/``off``/``false``. ``benchmarks/kernel_bench.py``
compares the two paths.

Kernels:
  - ``rgb_histogram``: 8x8x8 RGB color histogram, L1-normalized.
  - ``laplacian_variance``: variance of the 3x3 Laplacian response on a
    grayscale image (sharpness; higher = less blur).
  - ``pairwise_sqdist``: squared euclidean distances between rows of two
    matrices (the k-means assignment step).
"""

from __future__ import annotations

import os
import warnings

import numpy as np

HIST_BINS = 8  # per channel; 512 total
_BIN_SHIFT = 5  # 256 / 8 = 32 = 2**5


def _numba_requested() -> bool:
    flag = os.environ.get("KEYFRAME_NUMBA", "").strip().lower()
    return flag not in {"0", "off", "false", "no"}


# --- pure numpy implementations -------------------------------------------

def _rgb_histogram_np(pixels: np.ndarray) -> np.ndarray:
    r = pixels[:, :, 0].astype(np.int64) >> _BIN_SHIFT
    g = pixels[:, :, 1].astype(np.int64) >> _BIN_SHIFT
    b = pixels[:, :, 2].astype(np.int64) >> _BIN_SHIFT
    idx = (r * HIST_BINS + g) * HIST_BINS + b
    hist = np.bincount(idx.ravel(), minlength=HIST_BINS**3).astype(np.float64)
    return hist / idx.size


def _laplacian_variance_np(gray: np.ndarray) -> float:
    if gray.shape[0] < 3 or gray.shape[1] < 3:
        return 0.0
    lap = (
        gray[:-2, 1:-1]
        + gray[2:, 1:-1]
        + gray[1:-1, :-2]
        + gray[1:-1, 2:]
        - 4.0 * gray[1:-1, 1:-1]
    )
    return float(lap.var())


def _pairwise_sqdist_np(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


# --- numba builds ----------------------------------------------------------

_NUMBA_ACTIVE = False
if _numba_requested():
    try:
        from numba import njit

        _opts = dict(cache=True, nogil=True)

        @njit(**_opts)
        def _rgb_histogram_nb(pixels):
            out = np.zeros(HIST_BINS**3, dtype=np.float64)
            h, w, _ = pixels.shape
            for i in range(h):
                for j in range(w):
                    r = pixels[i, j, 0] >> _BIN_SHIFT
                    g = pixels[i, j, 1] >> _BIN_SHIFT
                    b = pixels[i, j, 2] >> _BIN_SHIFT
                    out[(r * HIST_BINS + g) * HIST_BINS + b] += 1.0
            return out / (h * w)

        @njit(**_opts)
        def _laplacian_variance_nb(gray):
            h, w = gray.shape
            if h < 3 or w < 3:
                return 0.0
            n = (h - 2) * (w - 2)
            total = 0.0
            for i in range(1, h - 1):
                for j in range(1, w - 1):
                    total += (
                        gray[i - 1, j]
                        + gray[i + 1, j]
                        + gray[i, j - 1]
                        + gray[i, j + 1]
                        - 4.0 * gray[i, j]
                    )
            mean = total / n
            acc = 0.0
            for i in range(1, h - 1):
                for j in range(1, w - 1):
                    v = (
                        gray[i - 1, j]
                        + gray[i + 1, j]
                        + gray[i, j - 1]
                        + gray[i, j + 1]
                        - 4.0 * gray[i, j]
                    )
                    acc += (v - mean) * (v - mean)
            return acc / n

        @njit(**_opts)
        def _pairwise_sqdist_nb(x, centers):
            n, d = x.shape
            k = centers.shape[0]
            out = np.empty((n, k), dtype=np.float64)
            for i in range(n):
                for c in range(k):
                    acc = 0.0
                    for j in range(d):
                        diff = x[i, j] - centers[c, j]
                        acc += diff * diff
                    out[i, c] = acc
            return out

        _NUMBA_ACTIVE = True
    except ImportError:
        warnings.warn("numba not importable; kernels fall back to numpy")


def numba_active() -> bool:
    return _NUMBA_ACTIVE


def implementations() -> dict[str, dict[str, object]]:
    """Both variants of every kernel, for benchmarks and equivalence tests."""
    table: dict[str, dict[str, object]] = {
        "rgb_histogram": {"numpy": _rgb_histogram_np},
        "laplacian_variance": {"numpy": _laplacian_variance_np},
        "pairwise_sqdist": {"numpy": _pairwise_sqdist_np},
    }
    if _NUMBA_ACTIVE:
        table["rgb_histogram"]["numba"] = _rgb_histogram_nb
        table["laplacian_variance"]["numba"] = _laplacian_variance_nb
        table["pairwise_sqdist"]["numba"] = _pairwise_sqdist_nb
    return table


if _NUMBA_ACTIVE:
    rgb_histogram = _rgb_histogram_nb
    laplacian_variance = _laplacian_variance_nb
    pairwise_sqdist = _pairwise_sqdist_nb
else:
    rgb_histogram = _rgb_histogram_np
    laplacian_variance = _laplacian_variance_np
    pairwise_sqdist = _pairwise_sqdist_np


def grayscale(pixels: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299 R + 0.587 G + 0.114 B), float64."""
    return (
        0.299 * pixels[:, :, 0].astype(np.float64)
        + 0.587 * pixels[:, :, 1].astype(np.float64)
        + 0.114 * pixels[:, :, 2].astype(np.float64)
    )
