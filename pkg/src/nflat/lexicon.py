"""Lexicon trie, word matching over character sequences, and embedding tables.

Matching walks the trie once per start position and reports every word the
lexicon contains as a contiguous substring, carrying 1-based head/tail
character positions into the sentence.  Single characters are never matched
(they are already the character stream) and walks stop at a configurable
maximum word length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

NON_WORD = "<non_word>"
UNKNOWN = "<unk>"

MIN_MATCH_LEN = 2
DEFAULT_MAX_MATCH_LEN = 10


@dataclass(frozen=True)
class MatchedWord:
    """A lexicon hit: surface form plus 1-based head/tail positions."""

    word: str
    head: int
    tail: int

    def __post_init__(self):
        if not (1 <= self.head <= self.tail):
            raise ValueError(f"invalid span ({self.head}, {self.tail}) for {self.word!r}")
        if self.word != NON_WORD and len(self.word) != self.tail - self.head + 1:
            raise ValueError(
                f"surface {self.word!r} does not cover span ({self.head}, {self.tail})"
            )


class _Node:
    __slots__ = ("children", "terminal")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.terminal = False


class LexiconTrie:
    """Prefix tree over words; immutable once built, safe to share."""

    def __init__(self):
        self._root = _Node()
        self.word_count = 0

    def insert(self, word: str) -> None:
        node = self._root
        for ch in word:
            nxt = node.children.get(ch)
            if nxt is None:
                nxt = _Node()
                node.children[ch] = nxt
            node = nxt
        if not node.terminal:
            node.terminal = True
            self.word_count += 1

    def __contains__(self, word: str) -> bool:
        node = self._root
        for ch in word:
            node = node.children.get(ch)
            if node is None:
                return False
        return node.terminal

    def walk_from(self, chars: str, start: int, max_len: int):
        """Yield (surface, end_exclusive) for every word starting at ``start``."""
        node = self._root
        end = min(len(chars), start + max_len)
        for i in range(start, end):
            node = node.children.get(chars[i])
            if node is None:
                return
            if node.terminal:
                yield chars[start : i + 1], i + 1


def build_trie(words) -> LexiconTrie:
    """Build a trie from an iterable of words; duplicates collapse to one entry.

    Raises:
        ValueError: on an empty word, naming its position in the input.
    """
    trie = LexiconTrie()
    for i, w in enumerate(words):
        if not w:
            raise ValueError(f"empty word at index {i}")
        trie.insert(w)
    return trie


def match_words(trie: LexiconTrie, chars: str,
                max_match_len: int = DEFAULT_MAX_MATCH_LEN) -> list[MatchedWord]:
    """All lexicon words occurring in ``chars``, sorted by (head, tail), 1-based.

    Only words of length >= 2 are reported; single characters carry no
    boundary information beyond the character stream itself.
    """
    if len(chars) < 1:
        raise ValueError("character sequence must be non-empty")
    out: list[MatchedWord] = []
    for start in range(len(chars)):
        for surface, end in trie.walk_from(chars, start, max_match_len):
            if end - start >= MIN_MATCH_LEN:
                out.append(MatchedWord(surface, start + 1, end))
    return out


def append_non_word(matches: list[MatchedWord], n: int) -> list[MatchedWord]:
    """Append the sentence-spanning auxiliary word so every character has a target."""
    return list(matches) + [MatchedWord(NON_WORD, 1, max(n, 1))]


class EmbeddingTable:
    """Token -> row mapping over a trainable matrix, with special rows.

    The unknown row (mean of the loaded vectors) absorbs out-of-vocabulary
    tokens; word tables additionally carry a zero-initialized, trainable
    row for the auxiliary ``<non_word>`` token.
    """

    def __init__(self, tokens: list[str], matrix: np.ndarray, with_non_word: bool = False):
        rows = [np.asarray(matrix[i], dtype=np.float64) for i in range(len(tokens))]
        self.dim = rows[0].shape[0] if rows else matrix.shape[1]
        vocab = {}
        for tok in tokens:
            if tok in (UNKNOWN, NON_WORD):
                raise ValueError(f"token {tok!r} is reserved")
            if tok in vocab:
                raise ValueError(f"duplicate token {tok!r}")
            vocab[tok] = len(vocab)
        self.unknown_id = len(vocab)
        if rows:
            rows.append(np.mean(rows, axis=0))
        else:
            rows.append(np.zeros(self.dim))
        vocab[UNKNOWN] = self.unknown_id
        self.non_word_id = None
        if with_non_word:
            self.non_word_id = len(vocab)
            vocab[NON_WORD] = self.non_word_id
            rows.append(np.zeros(self.dim))
        self.vocab = vocab
        self.matrix = Tensor(np.stack(rows), requires_grad=True)

    @classmethod
    def random(cls, tokens: list[str], dim: int, rng: np.random.Generator,
               with_non_word: bool = False) -> "EmbeddingTable":
        scale = 1.0 / np.sqrt(dim)
        matrix = rng.uniform(-scale, scale, size=(len(tokens), dim))
        return cls(tokens, matrix, with_non_word=with_non_word)

    @classmethod
    def from_state(cls, tokens: list[str], matrix: np.ndarray,
                   with_non_word: bool = False) -> "EmbeddingTable":
        """Restore a table exactly as stored; special rows come from ``matrix``."""
        obj = cls.__new__(cls)
        vocab = {}
        for tok in tokens:
            if tok in vocab or tok in (UNKNOWN, NON_WORD):
                raise ValueError(f"bad stored token {tok!r}")
            vocab[tok] = len(vocab)
        obj.unknown_id = len(vocab)
        vocab[UNKNOWN] = obj.unknown_id
        obj.non_word_id = None
        if with_non_word:
            obj.non_word_id = len(vocab)
            vocab[NON_WORD] = obj.non_word_id
        matrix = np.array(matrix)
        if matrix.shape[0] != len(vocab):
            raise ValueError(
                f"stored matrix has {matrix.shape[0]} rows, expected {len(vocab)}"
            )
        obj.vocab = vocab
        obj.dim = matrix.shape[1]
        obj.matrix = Tensor(matrix, requires_grad=True)
        return obj

    def lookup_id(self, token: str) -> int:
        return self.vocab.get(token, self.unknown_id)

    def ids(self, tokens) -> np.ndarray:
        return np.array([self.lookup_id(t) for t in tokens], dtype=np.int64)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]


def load_embeddings(path, with_non_word: bool = True) -> EmbeddingTable:
    """Parse word2vec-style text: token + floats per line, optional count/dim header.

    Raises:
        ValueError: empty file, or a row whose width disagrees with the first
            (message names the offending line number).
    """
    tokens: list[str] = []
    vectors: list[np.ndarray] = []
    seen: set[str] = set()
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # "count dim" header
                except ValueError:
                    pass
            token, values = parts[0], parts[1:]
            if dim is None:
                if not values:
                    raise ValueError(f"{path}: line {lineno}: no vector values")
                dim = len(values)
            elif len(values) != dim:
                raise ValueError(
                    f"{path}: line {lineno}: expected {dim} values, got {len(values)}"
                )
            if token in seen or token in (UNKNOWN, NON_WORD):
                continue  # first occurrence wins; reserved names are regenerated
            seen.add(token)
            tokens.append(token)
            vectors.append(np.array([float(v) for v in values], dtype=np.float64))
    if not tokens:
        raise ValueError(f"{path}: no embedding rows found")
    return EmbeddingTable(tokens, np.stack(vectors), with_non_word=with_non_word)


def load_lexicon(path) -> list[str]:
    """Read a one-word-per-line lexicon file."""
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


@dataclass
class MatchStats:
    """Corpus-level summary of character and matched-word sequence lengths."""

    sentences: int
    char_len_avg: float
    char_len_max: int
    matched_len_avg: float
    matched_len_max: int


def match_stats(sentences, trie: LexiconTrie,
                max_match_len: int = DEFAULT_MAX_MATCH_LEN) -> MatchStats:
    """Average/maximum character length and matched-word count per sentence."""
    char_lens: list[int] = []
    match_lens: list[int] = []
    for chars in sentences:
        char_lens.append(len(chars))
        match_lens.append(len(match_words(trie, chars, max_match_len)))
    if not char_lens:
        return MatchStats(0, 0.0, 0, 0.0, 0)
    return MatchStats(
        sentences=len(char_lens),
        char_len_avg=float(np.mean(char_lens)),
        char_len_max=int(max(char_lens)),
        matched_len_avg=float(np.mean(match_lens)),
        matched_len_max=int(max(match_lens)),
    )
