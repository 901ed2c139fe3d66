"""Corpus IO and the synthetic desk-scale corpus generator.

Dataset files are CoNLL-style: one ``character<whitespace>tag`` pair per
line, blank line between sentences, UTF-8.  The generator concatenates
vocabulary words (optionally separated by filler characters) into
sentences; a subset of the vocabulary carries entity types whose spans
become gold BMES labels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ENTITY_TYPE_NAMES = ["PER", "LOC", "ORG", "GPE", "MISC", "TIME"]
FILLER_CHARS = "，。！？；"


@dataclass
class Sentence:
    """A character sequence with optional gold tags."""

    chars: str
    labels: list[str] | None = None
    sid: str = ""

    def __post_init__(self):
        if len(self.chars) < 1:
            raise ValueError("sentence must contain at least one character")
        if self.labels is not None and len(self.labels) != len(self.chars):
            raise ValueError(
                f"{len(self.labels)} labels for {len(self.chars)} characters"
            )

    def __len__(self) -> int:
        return len(self.chars)


def read_conll(path, require_labels: bool = False) -> list[Sentence]:
    """Parse a dataset file; single-column lines yield unlabeled sentences."""
    sentences: list[Sentence] = []
    chars: list[str] = []
    tags: list[str | None] = []

    def flush(lineno):
        if not chars:
            return
        labels: list[str] | None
        if any(t is None for t in tags):
            if require_labels:
                raise ValueError(f"{path}: sentence ending at line {lineno} lacks tags")
            labels = None
        else:
            labels = [t for t in tags]  # type: ignore[misc]
        sentences.append(Sentence("".join(chars), labels, sid=str(len(sentences))))
        chars.clear()
        tags.clear()

    with open(path, encoding="utf-8") as fh:
        lineno = 0
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                flush(lineno)
                continue
            if len(parts) == 1:
                chars.append(parts[0])
                tags.append(None)
            else:
                chars.append(parts[0])
                tags.append(parts[1])
        flush(lineno)
    return sentences


def write_conll(path, sentences) -> None:
    """Write ``char<TAB>tag`` lines, blank line between sentences."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in sentences:
            labels = sent.labels or ["O"] * len(sent)
            for ch, tag in zip(sent.chars, labels):
                fh.write(f"{ch}\t{tag}\n")
            fh.write("\n")


@dataclass
class SyntheticCorpus:
    train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]
    lexicon: list[str]
    entity_words: dict[str, str] = field(default_factory=dict)


def gen_synthetic(
    seed: int = 1,
    alphabet_size: int = 40,
    entity_types: int = 3,
    vocab_size: int = 120,
    distractors: int = 80,
    n_train: int = 200,
    n_dev: int = 60,
    n_test: int = 60,
    min_len: int = 5,
    max_len: int = 40,
    filler_rate: float = 0.15,
    entity_fraction: float = 1 / 3,
) -> SyntheticCorpus:
    """Deterministic word-concatenation corpus with BMES entity labels.

    Every entity surface is a vocabulary word, and the whole vocabulary is
    in the emitted lexicon, so a model with lexicon access can in principle
    label the corpus perfectly.  Filler characters (never part of any
    lexicon word) separate some words, giving the auxiliary-word mechanism
    something to absorb.

    Raises:
        ValueError: degenerate configuration (alphabet smaller than the
            number of entity types, bad lengths).
    """
    if alphabet_size < entity_types:
        raise ValueError(
            f"alphabet_size {alphabet_size} < entity_types {entity_types}"
        )
    if not 2 <= min_len <= max_len:
        raise ValueError(f"need 2 <= min_len <= max_len, got {min_len}..{max_len}")
    if entity_types > len(ENTITY_TYPE_NAMES):
        raise ValueError(f"at most {len(ENTITY_TYPE_NAMES)} entity types supported")
    rng = np.random.default_rng(seed)
    alphabet = [chr(0x4E00 + i) for i in range(alphabet_size)]

    def random_word(min_l=2, max_l=4):
        length = int(rng.integers(min_l, max_l + 1))
        return "".join(rng.choice(alphabet, size=length))

    vocab: list[str] = []
    seen = set()
    while len(vocab) < vocab_size:
        w = random_word()
        if w not in seen:
            seen.add(w)
            vocab.append(w)

    n_entity_words = max(1, int(round(vocab_size * entity_fraction)))
    type_names = ENTITY_TYPE_NAMES[:entity_types]
    entity_words = {
        vocab[i]: type_names[i % entity_types] for i in range(n_entity_words)
    }

    distractor_words: list[str] = []
    while len(distractor_words) < distractors:
        if vocab and rng.random() < 0.5:
            # share a prefix with a real word so matching stays ambiguous
            base = vocab[int(rng.integers(0, len(vocab)))]
            w = base[: max(1, len(base) - 1)] + alphabet[int(rng.integers(0, alphabet_size))]
        else:
            w = random_word(2, 5)
        if w not in seen and len(w) >= 2:
            seen.add(w)
            distractor_words.append(w)

    def make_sentence(sid: str) -> Sentence:
        target = int(rng.integers(min_len, max_len + 1))
        chars: list[str] = []
        labels: list[str] = []
        while len(chars) < target:
            room = target - len(chars)
            if filler_rate > 0 and rng.random() < filler_rate:
                chars.append(FILLER_CHARS[int(rng.integers(0, len(FILLER_CHARS)))])
                labels.append("O")
                continue
            if room < 2:
                break
            fitting = [w for w in vocab if len(w) <= room]
            word = fitting[int(rng.integers(0, len(fitting)))]
            etype = entity_words.get(word)
            chars.extend(word)
            if etype is None:
                labels.extend(["O"] * len(word))
            elif len(word) == 1:
                labels.append(f"S-{etype}")
            else:
                labels.extend(
                    [f"B-{etype}"]
                    + [f"M-{etype}"] * (len(word) - 2)
                    + [f"E-{etype}"]
                )
        while len(chars) < min_len:
            chars.append(FILLER_CHARS[int(rng.integers(0, len(FILLER_CHARS)))])
            labels.append("O")
        return Sentence("".join(chars), labels, sid=sid)

    total = n_train + n_dev + n_test
    sentences: list[Sentence] = []
    surfaces: set[str] = set()
    while len(sentences) < total:
        sent = make_sentence(str(len(sentences)))
        if sent.chars in surfaces:
            continue
        surfaces.add(sent.chars)
        sentences.append(sent)

    lexicon = vocab + distractor_words
    return SyntheticCorpus(
        train=sentences[:n_train],
        dev=sentences[n_train : n_train + n_dev],
        test=sentences[n_train + n_dev :],
        lexicon=lexicon,
        entity_words=entity_words,
    )
