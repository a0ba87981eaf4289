import json

import pytest
from hypothesis import given, strategies as st

from keyframe.errors import ManifestError, QueryError
from keyframe.manifest import (
    ManifestEntry,
    QueryMode,
    build_text_query,
    dump_manifest,
    parse_manifest,
)


def line(video_id="v1", video="/data/v1.mp4", question="What color?", answer="Red."):
    return json.dumps(
        {"video_id": video_id, "video": video, "question": question, "answer": answer}
    )


class TestParse:
    def test_three_lines_in_order(self):
        data = "\n".join(line(video_id=f"v{i}") for i in range(3)).encode()
        entries = parse_manifest(data)
        assert [e.video_id for e in entries] == ["v0", "v1", "v2"]
        assert all(e.ordinal == 0 for e in entries)

    def test_blank_lines_skipped(self):
        data = ("\n\n" + line() + "\n\n" + line(video_id="v2") + "\n").encode()
        assert len(parse_manifest(data)) == 2

    def test_duplicate_video_id_gets_distinct_job_keys(self):
        data = "\n".join([line(), line(), line()]).encode()
        entries = parse_manifest(data)
        assert [e.job_key for e in entries] == ["v1#0", "v1#1", "v1#2"]

    def test_missing_key_reports_line_number(self):
        bad = json.dumps({"video_id": "v1", "video": "a.mp4", "question": "q"})
        data = (line() + "\n" + bad).encode()
        with pytest.raises(ManifestError, match="line 2: missing key answer"):
            parse_manifest(data)

    def test_invalid_json_reports_line_number(self):
        with pytest.raises(ManifestError, match="line 1: invalid JSON"):
            parse_manifest(b"{nope")

    def test_non_object_line_rejected(self):
        with pytest.raises(ManifestError, match="line 1"):
            parse_manifest(b'["not", "an", "object"]')

    def test_empty_video_path_rejected(self):
        with pytest.raises(ManifestError, match="empty video path"):
            parse_manifest(line(video="").encode())

    def test_both_texts_empty_rejected(self):
        with pytest.raises(ManifestError, match="question and answer are empty"):
            parse_manifest(line(question="", answer="").encode())

    def test_empty_file_is_empty_list(self):
        assert parse_manifest(b"") == []

    def test_crlf_lines(self):
        data = (line() + "\r\n" + line(video_id="v2") + "\r\n").encode()
        assert len(parse_manifest(data)) == 2

    def test_reads_from_path(self, tmp_path):
        p = tmp_path / "m.ndjson"
        p.write_text(line() + "\n")
        assert parse_manifest(p)[0].video_id == "v1"

    def test_round_trip(self):
        entries = parse_manifest("\n".join([line(), line(video_id="v2")]).encode())
        again = parse_manifest(dump_manifest(entries).encode())
        assert again == entries


class TestQueryMode:
    @pytest.mark.parametrize(
        "name,mode",
        [
            ("answer", QueryMode.ANSWER),
            ("qa", QueryMode.QUESTION_ANSWER),
            ("question", QueryMode.QUESTION),
            ("QA", QueryMode.QUESTION_ANSWER),
        ],
    )
    def test_parse(self, name, mode):
        assert QueryMode.parse(name) is mode

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="unknown query mode"):
            QueryMode.parse("both")


class TestBuildQuery:
    entry = ManifestEntry("v1", "a.mp4", "What is shown?", "A red car.")

    def test_answer_mode(self):
        q = build_text_query(self.entry, QueryMode.ANSWER)
        assert q.text == "A red car."
        assert not q.truncated

    def test_question_mode(self):
        assert build_text_query(self.entry, QueryMode.QUESTION).text == "What is shown?"

    def test_qa_joins_with_single_space(self):
        q = build_text_query(self.entry, QueryMode.QUESTION_ANSWER)
        assert q.text == "What is shown? A red car."

    def test_empty_answer_raises(self):
        entry = ManifestEntry("v1", "a.mp4", "What is shown?", "   ")
        with pytest.raises(QueryError, match="empty query for mode answer"):
            build_text_query(entry, QueryMode.ANSWER)

    def test_truncation_keeps_head_tokens(self):
        entry = ManifestEntry("v1", "a.mp4", "", " ".join(f"w{i}" for i in range(100)))
        q = build_text_query(entry, QueryMode.ANSWER, token_budget=77)
        assert q.truncated
        assert q.text.split() == [f"w{i}" for i in range(77)]

    def test_exactly_at_budget_not_truncated(self):
        entry = ManifestEntry("v1", "a.mp4", "", " ".join(["x"] * 77))
        assert not build_text_query(entry, QueryMode.ANSWER, token_budget=77).truncated

    @given(
        st.lists(st.text(alphabet="abc", min_size=1, max_size=4), min_size=1, max_size=120),
        st.integers(min_value=1, max_value=90),
    )
    def test_truncated_text_never_over_budget(self, words, budget):
        entry = ManifestEntry("v1", "a.mp4", "", " ".join(words))
        q = build_text_query(entry, QueryMode.ANSWER, token_budget=budget)
        assert len(q.text.split()) <= budget
        assert q.truncated == (len(words) > budget)
