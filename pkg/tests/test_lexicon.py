"""Trie construction, word matching vs a brute-force oracle, embedding IO."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nflat import lexicon as lx
from nflat.lexicon import (
    MatchedWord,
    append_non_word,
    build_trie,
    load_embeddings,
    match_stats,
    match_words,
)


def brute_force_match(words, chars, max_len=lx.DEFAULT_MAX_MATCH_LEN):
    """Independent O(n^2) oracle: enumerate every substring, test membership."""
    vocab = set(words)
    out = []
    for i in range(len(chars)):
        for j in range(i + lx.MIN_MATCH_LEN, min(len(chars), i + max_len) + 1):
            if chars[i:j] in vocab:
                out.append((chars[i:j], i + 1, j))
    return out


class TestBuildTrie:
    def test_prefix_not_terminal(self):
        trie = build_trie(["ab", "abc"])
        assert "ab" in trie and "abc" in trie
        assert "a" not in trie and "abcd" not in trie

    def test_empty_lexicon(self):
        trie = build_trie([])
        assert match_words(trie, "anything") == []

    def test_empty_word_rejected_with_index(self):
        with pytest.raises(ValueError, match="index 2"):
            build_trie(["ab", "cd", ""])

    def test_duplicates_collapse(self):
        trie = build_trie(["ab", "ab", "cd"])
        assert trie.word_count == 2

    def test_membership_vs_hash_set_oracle(self):
        rng = np.random.default_rng(42)
        alphabet = "abcdef"
        words = {
            "".join(rng.choice(list(alphabet), size=rng.integers(1, 8)))
            for _ in range(10_000)
        }
        trie = build_trie(sorted(words))
        probes = [
            "".join(rng.choice(list(alphabet), size=rng.integers(1, 8)))
            for _ in range(5_000)
        ]
        for p in probes:
            assert (p in trie) == (p in words)


class TestMatchWords:
    def test_paper_figure_sentence(self):
        trie = build_trie(["今天", "天晚", "晚饭"])
        got = match_words(trie, "今天晚饭")
        assert got == [
            MatchedWord("今天", 1, 2),
            MatchedWord("天晚", 2, 3),
            MatchedWord("晚饭", 3, 4),
        ]

    def test_overlapping_latin(self):
        trie = build_trie(["ab", "bc", "cab"])
        got = match_words(trie, "abcab")
        assert got == [
            MatchedWord("ab", 1, 2),
            MatchedWord("bc", 2, 3),
            MatchedWord("cab", 3, 5),
            MatchedWord("ab", 4, 5),
        ]

    def test_single_chars_never_matched(self):
        trie = build_trie(["a", "ab"])
        got = match_words(trie, "aab")
        assert got == [MatchedWord("ab", 2, 3)]

    def test_max_len_cap(self):
        trie = build_trie(["abcd"])
        assert match_words(trie, "abcd", max_match_len=3) == []
        assert match_words(trie, "abcd", max_match_len=4) == [MatchedWord("abcd", 1, 4)]

    def test_vs_brute_force_randomized(self):
        rng = np.random.default_rng(7)
        alphabet = list("abcd")
        for _ in range(1000):
            n_words = rng.integers(0, 12)
            words = [
                "".join(rng.choice(alphabet, size=rng.integers(2, 6)))
                for _ in range(n_words)
            ]
            chars = "".join(rng.choice(alphabet, size=rng.integers(1, 51)))
            trie = build_trie(words) if words else build_trie([])
            got = [(m.word, m.head, m.tail) for m in match_words(trie, chars)]
            assert got == brute_force_match(words, chars)

    @settings(max_examples=200, deadline=None)
    @given(
        words=st.lists(st.text(alphabet="abc", min_size=1, max_size=6), max_size=10),
        chars=st.text(alphabet="abc", min_size=1, max_size=50),
    )
    def test_property_equals_brute_force(self, words, chars):
        trie = build_trie(words)
        got = [(m.word, m.head, m.tail) for m in match_words(trie, chars)]
        assert got == brute_force_match(words, chars)

    @settings(max_examples=100, deadline=None)
    @given(
        words=st.lists(st.text(alphabet="abc", min_size=2, max_size=4), min_size=1, max_size=8),
        chars=st.text(alphabet="abc", min_size=1, max_size=30),
        prefix=st.text(alphabet="xyz", min_size=1, max_size=5),
    )
    def test_position_stability_under_prefix(self, words, chars, prefix):
        """Prepending k characters shifts interior matches by exactly k."""
        trie = build_trie(words)
        base = match_words(trie, chars)
        shifted = match_words(trie, prefix + chars)
        k = len(prefix)
        interior = {(m.word, m.head + k, m.tail + k) for m in base}
        assert interior <= {(m.word, m.head, m.tail) for m in shifted}

    @settings(max_examples=100, deadline=None)
    @given(
        small=st.lists(st.text(alphabet="ab", min_size=2, max_size=4), max_size=6),
        extra=st.lists(st.text(alphabet="ab", min_size=2, max_size=4), max_size=6),
        chars=st.text(alphabet="ab", min_size=1, max_size=30),
    )
    def test_lexicon_superset_gives_match_superset(self, small, extra, chars):
        got_small = set(
            (m.word, m.head, m.tail) for m in match_words(build_trie(small), chars)
        )
        got_big = set(
            (m.word, m.head, m.tail)
            for m in match_words(build_trie(small + extra), chars)
        )
        assert got_small <= got_big


class TestAppendNonWord:
    def test_empty_matches(self):
        got = append_non_word([], 5)
        assert got == [MatchedWord(lx.NON_WORD, 1, 5)]

    def test_appended_last(self):
        matches = [MatchedWord("ab", 1, 2), MatchedWord("bc", 2, 3), MatchedWord("cd", 3, 4)]
        got = append_non_word(matches, 4)
        assert len(got) == 4
        assert got[-1].word == lx.NON_WORD
        assert (got[-1].head, got[-1].tail) == (1, 4)


class TestEmbeddings:
    def _write(self, tmp_path, text, name="emb.txt"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    def test_small_file(self, tmp_path):
        p = self._write(tmp_path, "aa 1 2 3 4\nbb 5 6 7 8\ncc 9 10 11 12\n")
        table = load_embeddings(p)
        assert table.rows == 5  # 3 words + unknown + non_word
        assert table.dim == 4

    def test_header_optional(self, tmp_path):
        body = "aa 1 2 3 4\nbb 5 6 7 8\ncc 9 10 11 12\n"
        t1 = load_embeddings(self._write(tmp_path, body, "a.txt"))
        t2 = load_embeddings(self._write(tmp_path, "3 4\n" + body, "b.txt"))
        assert np.array_equal(t1.matrix.data, t2.matrix.data)
        assert t1.vocab == t2.vocab

    def test_roundtrip_exact(self, tmp_path):
        p = self._write(tmp_path, "tok 0.125 -3.5 7.25e-3\nother 1 2 3\n")
        table = load_embeddings(p)
        row = table.matrix.data[table.lookup_id("tok")]
        assert np.array_equal(row, [0.125, -3.5, 7.25e-3])

    def test_unknown_row_is_mean(self, tmp_path):
        p = self._write(tmp_path, "a 1 3\nb 3 5\n")
        table = load_embeddings(p)
        assert np.array_equal(table.matrix.data[table.unknown_id], [2.0, 4.0])
        assert table.lookup_id("zzz") == table.unknown_id

    def test_non_word_row_zero_and_trainable(self, tmp_path):
        p = self._write(tmp_path, "a 1 3\n")
        table = load_embeddings(p)
        assert np.array_equal(table.matrix.data[table.non_word_id], [0.0, 0.0])
        assert table.matrix.requires_grad

    def test_ragged_row_names_line(self, tmp_path):
        p = self._write(tmp_path, "a 1 2 3\nb 1 2\n")
        with pytest.raises(ValueError, match="line 2"):
            load_embeddings(p)

    def test_empty_file_rejected(self, tmp_path):
        p = self._write(tmp_path, "")
        with pytest.raises(ValueError):
            load_embeddings(p)


class TestMatchStats:
    def test_single_sentence(self):
        trie = build_trie(["ab", "bc", "cab"])
        stats = match_stats(["abcab"], trie)
        assert stats.char_len_avg == 5 and stats.char_len_max == 5
        assert stats.matched_len_avg == 4 and stats.matched_len_max == 4

    def test_empty_lexicon(self):
        stats = match_stats(["abc", "de"], build_trie([]))
        assert stats.matched_len_avg == 0.0

    def test_monotone_in_lexicon_size(self):
        rng = np.random.default_rng(11)
        alphabet = list("abcde")
        corpus = [
            "".join(rng.choice(alphabet, size=rng.integers(5, 30))) for _ in range(40)
        ]
        vocab = [
            "".join(rng.choice(alphabet, size=rng.integers(2, 4))) for _ in range(60)
        ]
        prev = -1.0
        for size in (0, 20, 40, 60):
            stats = match_stats(corpus, build_trie(vocab[:size]) if size else build_trie([]))
            assert stats.matched_len_avg >= prev
            prev = stats.matched_len_avg
