import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from keyframe import kernels


def brute_histogram(pixels: np.ndarray) -> np.ndarray:
    """Per-pixel loop oracle for the 8x8x8 RGB histogram."""
    out = np.zeros(512)
    h, w, _ = pixels.shape
    for i in range(h):
        for j in range(w):
            r, g, b = (int(v) // 32 for v in pixels[i, j])
            out[(r * 8 + g) * 8 + b] += 1
    return out / (h * w)


def brute_laplacian_variance(gray: np.ndarray) -> float:
    """Population variance of the 3x3 Laplacian over the valid region."""
    h, w = gray.shape
    if h < 3 or w < 3:
        return 0.0
    vals = []
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            vals.append(
                gray[i - 1, j] + gray[i + 1, j] + gray[i, j - 1] + gray[i, j + 1]
                - 4.0 * gray[i, j]
            )
    vals = np.array(vals)
    return float(((vals - vals.mean()) ** 2).mean())


rng = np.random.default_rng(42)


class TestHistogram:
    def test_matches_brute_oracle(self):
        pixels = rng.integers(0, 256, size=(17, 23, 3), dtype=np.uint8)
        np.testing.assert_allclose(
            kernels.rgb_histogram(pixels), brute_histogram(pixels), atol=1e-12
        )

    def test_solid_color_is_single_bin(self):
        pixels = np.full((8, 8, 3), (255, 0, 0), dtype=np.uint8)
        hist = kernels.rgb_histogram(pixels)
        assert hist[(7 * 8 + 0) * 8 + 0] == 1.0
        assert hist.sum() == pytest.approx(1.0)

    @given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.just(3))))
    @settings(max_examples=50, deadline=None)
    def test_is_distribution(self, pixels):
        hist = kernels.rgb_histogram(pixels)
        assert hist.shape == (512,)
        assert np.all(hist >= 0)
        assert hist.sum() == pytest.approx(1.0)


class TestLaplacianVariance:
    def test_matches_brute_oracle(self):
        gray = rng.random((14, 19)) * 255
        assert kernels.laplacian_variance(gray) == pytest.approx(
            brute_laplacian_variance(gray), rel=1e-10
        )

    def test_flat_image_is_zero(self):
        assert kernels.laplacian_variance(np.full((16, 16), 77.0)) == 0.0

    def test_textured_beats_flat(self):
        flat = np.full((32, 32), 128.0)
        noisy = flat + rng.normal(0, 25, size=(32, 32))
        assert kernels.laplacian_variance(noisy) > kernels.laplacian_variance(flat)

    def test_tiny_image_is_zero(self):
        assert kernels.laplacian_variance(np.ones((2, 5))) == 0.0


class TestPairwiseSqdist:
    def test_matches_brute_oracle(self):
        x = rng.random((11, 7))
        c = rng.random((4, 7))
        expect = np.array([[np.sum((xi - cj) ** 2) for cj in c] for xi in x])
        np.testing.assert_allclose(kernels.pairwise_sqdist(x, c), expect, atol=1e-12)

    def test_self_distance_zero_diagonal(self):
        x = rng.random((6, 5))
        d = kernels.pairwise_sqdist(x, x)
        np.testing.assert_allclose(np.diag(d), 0.0, atol=1e-12)
        assert np.all(d >= -1e-12)


class TestVariantEquivalence:
    """The compiled path and the numpy fallback must agree bit-for-bit
    on histograms and to float tolerance on the rest."""

    def test_both_variants_agree(self):
        table = kernels.implementations()
        if not kernels.numba_active():
            pytest.skip("numba disabled via KEYFRAME_NUMBA")
        pixels = rng.integers(0, 256, size=(33, 41, 3), dtype=np.uint8)
        gray = kernels.grayscale(pixels)
        x = rng.random((16, 512))
        c = rng.random((5, 512))
        h = table["rgb_histogram"]
        np.testing.assert_array_equal(h["numpy"](pixels), h["numba"](pixels))
        lv = table["laplacian_variance"]
        assert lv["numpy"](gray) == pytest.approx(lv["numba"](gray), rel=1e-9)
        pd = table["pairwise_sqdist"]
        np.testing.assert_allclose(pd["numpy"](x, c), pd["numba"](x, c), rtol=1e-9)

    def test_env_flag_disables_numba(self):
        import subprocess, sys

        code = (
            "from keyframe import kernels; "
            "print(kernels.numba_active())"
        )
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"PATH": "/usr/bin:/bin", "KEYFRAME_NUMBA": "0"},
            capture_output=True,
            text=True,
        )
        assert out.stdout.strip() == "False"


class TestGrayscale:
    def test_luma_weights(self):
        pixels = np.zeros((2, 2, 3), dtype=np.uint8)
        pixels[..., 0] = 255
        assert kernels.grayscale(pixels)[0, 0] == pytest.approx(0.299 * 255)

    def test_white_maps_to_255(self):
        white = np.full((2, 2, 3), 255, dtype=np.uint8)
        assert kernels.grayscale(white)[0, 0] == pytest.approx(255.0)
