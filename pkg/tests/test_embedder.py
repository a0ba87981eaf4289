import numpy as np
import pytest
import requests

from conftest import solid_frame
from keyframe.embedder import (
    MOCK_DIM,
    MockProvider,
    MemoProvider,
    RemoteProvider,
    fnv1a64,
    make_provider,
    validate_embeddings,
)
from keyframe.errors import ProviderError


def fnv1a64_oracle(data: bytes) -> int:
    """Independent re-derivation from the published FNV-1a parameters."""
    h = 14695981039346656037  # offset basis
    for byte in data:
        h ^= byte
        h = (h * 1099511628211) % 2**64  # FNV prime, 64-bit wrap
    return h


class TestFnv:
    @pytest.mark.parametrize("data", [b"", b"a", b"hello", b"keyframe", bytes(range(256))])
    def test_matches_oracle(self, data):
        assert fnv1a64(data) == fnv1a64_oracle(data)


class TestMockText:
    def test_red_is_first_component(self, mock_provider):
        vec = mock_provider.embed_texts(["red"])[0]
        assert vec[0] == pytest.approx(1.0)
        assert np.linalg.norm(vec) == pytest.approx(1.0)

    def test_keywords_average(self, mock_provider):
        vec = mock_provider.embed_texts(["red green"])[0]
        # mean of (1,0,0) and (0,1,0), normalized
        assert vec[0] == pytest.approx(vec[1]) == pytest.approx(1 / np.sqrt(2))
        assert vec[2] == 0.0

    def test_black_maps_to_neutral_axis(self, mock_provider):
        vec = mock_provider.embed_texts(["black"])[0]
        assert vec[3] == pytest.approx(1.0)

    def test_white_is_equal_rgb(self, mock_provider):
        vec = mock_provider.embed_texts(["white"])[0]
        assert vec[0] == pytest.approx(vec[1]) == pytest.approx(vec[2])
        assert vec[0] > 0

    def test_keyword_found_despite_punctuation_and_case(self, mock_provider):
        a = mock_provider.embed_texts(["What is Red?"])[0]
        b = mock_provider.embed_texts(["red"])[0]
        np.testing.assert_allclose(a, b)

    def test_colorless_text_uses_token_hash_positions(self, mock_provider):
        text = "some plain words"
        vec = mock_provider.embed_texts([text])[0]
        expect = np.zeros(MOCK_DIM)
        for token in text.split():
            expect[4 + fnv1a64_oracle(token.encode()) % (MOCK_DIM - 4)] += 1.0
        expect /= np.linalg.norm(expect)
        np.testing.assert_allclose(vec, expect)

    def test_colorless_text_orthogonal_to_colors(self, mock_provider):
        vec = mock_provider.embed_texts(["nothing chromatic here"])[0]
        assert np.all(vec[:4] == 0.0)

    def test_deterministic(self, mock_provider):
        a = mock_provider.embed_texts(["a photo of a dog"])
        b = mock_provider.embed_texts(["a photo of a dog"])
        np.testing.assert_array_equal(a, b)

    def test_empty_text_raises(self, mock_provider):
        with pytest.raises(ProviderError):
            mock_provider.embed_texts(["   "])

    def test_batch_order_preserved(self, mock_provider):
        vecs = mock_provider.embed_texts(["red", "green", "blue"])
        assert vecs[0][0] == pytest.approx(1.0)
        assert vecs[1][1] == pytest.approx(1.0)
        assert vecs[2][2] == pytest.approx(1.0)


class TestMockImage:
    def test_solid_red_is_first_component(self, mock_provider):
        vec = mock_provider.embed_images([solid_frame("red")])[0]
        assert vec[0] == pytest.approx(1.0)

    def test_mean_rgb_direction(self, mock_provider):
        img = np.zeros((4, 4, 3), dtype=np.uint8)
        img[:2] = (255, 0, 0)  # half red
        img[2:] = (0, 0, 255)  # half blue
        vec = mock_provider.embed_images([img])[0]
        assert vec[0] == pytest.approx(vec[2]) == pytest.approx(1 / np.sqrt(2))

    def test_black_image_maps_to_neutral_axis(self, mock_provider):
        vec = mock_provider.embed_images([solid_frame("black")])[0]
        assert vec[3] == pytest.approx(1.0)

    def test_text_image_agreement_per_color(self, mock_provider):
        """Same-color text and image embeddings line up; cross-color do not."""
        for name in ("red", "green", "blue", "white"):
            t = mock_provider.embed_texts([name])[0]
            i = mock_provider.embed_images([solid_frame(name)])[0]
            assert float(t @ i) == pytest.approx(1.0, abs=1e-9)
        red_t = mock_provider.embed_texts(["red"])[0]
        blue_i = mock_provider.embed_images([solid_frame("blue")])[0]
        assert float(red_t @ blue_i) == pytest.approx(0.0, abs=1e-9)

    def test_all_unit_norm(self, mock_provider):
        rng = np.random.default_rng(3)
        imgs = [rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8) for _ in range(5)]
        vecs = mock_provider.embed_images(imgs)
        np.testing.assert_allclose(np.linalg.norm(vecs, axis=1), 1.0, atol=1e-9)


class TestValidate:
    def test_accepts_unit_rows(self):
        v = np.eye(3, MOCK_DIM)
        validate_embeddings(v, MOCK_DIM, 3)

    def test_rejects_wrong_count(self):
        with pytest.raises(ProviderError):
            validate_embeddings(np.eye(2, MOCK_DIM), MOCK_DIM, 3)

    def test_rejects_non_unit(self):
        v = np.eye(2, MOCK_DIM) * 1.5
        with pytest.raises(ProviderError):
            validate_embeddings(v, MOCK_DIM, 2)


class TestRemote:
    def test_info(self, protocol_server):
        client = RemoteProvider(protocol_server.endpoint)
        info = client.info()
        assert (info.dim, info.token_budget) == (MOCK_DIM, 77)

    def test_matches_local_mock(self, protocol_server, mock_provider):
        client = RemoteProvider(protocol_server.endpoint)
        texts = ["red", "what is shown", "blue green"]
        np.testing.assert_allclose(
            client.embed_texts(texts), mock_provider.embed_texts(texts), atol=1e-9
        )

    def test_image_round_trip(self, protocol_server, mock_provider):
        client = RemoteProvider(protocol_server.endpoint)
        imgs = [solid_frame("red"), solid_frame("blue")]
        np.testing.assert_allclose(
            client.embed_images(imgs), mock_provider.embed_images(imgs), atol=1e-9
        )

    def test_batches_respect_cap_and_order(self, protocol_server):
        client = RemoteProvider(protocol_server.endpoint, batch_size=8)
        texts = [f"token{i}" for i in range(20)]
        vecs = client.embed_texts(texts)
        sizes = [n for path, n in protocol_server.request_log if "embed_text" in path]
        assert sizes == [8, 8, 4]
        local = MockProvider().embed_texts(texts)
        np.testing.assert_allclose(vecs, local, atol=1e-9)

    def test_batch_size_cap_enforced(self, protocol_server):
        with pytest.raises(ValueError):
            RemoteProvider(protocol_server.endpoint, batch_size=33)

    def test_retries_through_503(self, protocol_server):
        protocol_server.fail_next = [503, 503]
        client = RemoteProvider(protocol_server.endpoint, backoff=0.01)
        vec = client.embed_texts(["red"])[0]
        assert vec[0] == pytest.approx(1.0)

    def test_gives_up_after_max_attempts(self, protocol_server):
        protocol_server.fail_next = [503, 503, 503, 503]
        client = RemoteProvider(protocol_server.endpoint, backoff=0.01, max_attempts=3)
        with pytest.raises(ProviderError, match="503"):
            client.info()

    def test_400_is_not_retried(self, protocol_server):
        protocol_server.fail_next = [400]
        client = RemoteProvider(protocol_server.endpoint, backoff=0.01)
        with pytest.raises(ProviderError, match="HTTP 400"):
            client.info()
        assert protocol_server.fail_next == []  # a retry would have drained more

    def test_connection_refused_raises_after_retries(self):
        client = RemoteProvider("http://127.0.0.1:9", backoff=0.01, timeout=0.5)
        with pytest.raises(ProviderError):
            client.info()

    def test_renormalizes_drifted_vectors(self, protocol_server):
        protocol_server.denormalize = 4e-4  # within the server's 1e-3 leeway
        client = RemoteProvider(protocol_server.endpoint)
        vec = client.embed_texts(["red"])[0]
        assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_badly_scaled_vectors(self, protocol_server):
        protocol_server.denormalize = 0.5
        client = RemoteProvider(protocol_server.endpoint)
        with pytest.raises(ProviderError, match="norm"):
            client.embed_texts(["red"])

    def test_rejects_short_vector_array(self, protocol_server):
        protocol_server.drop_last_vector = True
        client = RemoteProvider(protocol_server.endpoint)
        with pytest.raises(ProviderError, match="vectors for"):
            client.embed_texts(["red", "blue"])

    def test_server_rejects_overlong_batch_directly(self, protocol_server):
        resp = requests.post(
            f"{protocol_server.endpoint}/v1/embed_text",
            json={"texts": ["x"] * (protocol_server.max_batch + 1)},
            timeout=5,
        )
        assert resp.status_code == 413

    def test_server_rejects_malformed_payload_directly(self, protocol_server):
        resp = requests.post(
            f"{protocol_server.endpoint}/v1/embed_text",
            data=b"{not json",
            timeout=5,
        )
        assert resp.status_code == 400
        resp = requests.post(
            f"{protocol_server.endpoint}/v1/embed_text",
            json={"texts": "not a list"},
            timeout=5,
        )
        assert resp.status_code == 400


class TestMemo:
    class CountingProvider(MockProvider):
        def __init__(self):
            self.text_calls = 0

        def embed_texts(self, texts):
            self.text_calls += len(texts)
            return super().embed_texts(texts)

    def test_repeat_queries_hit_cache(self):
        inner = self.CountingProvider()
        memo = MemoProvider(inner)
        memo.embed_texts(["red", "blue"])
        memo.embed_texts(["red", "green", "blue"])
        assert inner.text_calls == 3  # only the unseen "green" re-embeds

    def test_results_identical_to_inner(self):
        memo = MemoProvider(MockProvider())
        direct = MockProvider()
        texts = ["red", "red", "plain words"]
        np.testing.assert_array_equal(
            memo.embed_texts(texts), direct.embed_texts(texts)
        )


class TestFactory:
    def test_mock_by_name(self):
        provider = make_provider("mock", memo=False)
        assert isinstance(provider, MockProvider)

    def test_memo_wrapping_default(self):
        assert isinstance(make_provider("mock"), MemoProvider)

    def test_remote_requires_endpoint(self):
        with pytest.raises(ValueError, match="endpoint"):
            make_provider("remote")

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown provider"):
            make_provider("quantum")
