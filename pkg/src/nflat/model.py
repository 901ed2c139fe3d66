"""Full model: embeddings -> inter-attention fusion -> context encoder -> CRF.

Construction gathers the character vocabulary from the training corpus and
the word vocabulary from the lexicon; either embedding table can instead be
loaded from a word2vec-style text file, with a learned linear adapter when
the file width differs from d_model.  Checkpoints are self-describing npz
containers (JSON metadata plus named parameter arrays).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .attention import AttentionMeter, init_matrix
from .config import ModelConfig
from .crf import CrfParams, LabelSchema, crf_log_likelihood, viterbi_decode
from .data import Sentence
from .encoder import SelfAttnParams, self_attention_forward
from .interformer import InterFormerParams, interformer_forward
from .lexicon import (
    EmbeddingTable,
    LexiconTrie,
    append_non_word,
    build_trie,
    match_words,
)
from .tensor import Tensor

CHECKPOINT_FORMAT = "nflat-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Batch:
    """Padded arrays for one batch of sentences."""

    char_ids: np.ndarray  # (B, n_max)
    char_mask: np.ndarray
    lengths: np.ndarray  # (B,)
    word_ids: np.ndarray  # (B, m_max), >= 1 slot
    word_heads: np.ndarray
    word_tails: np.ndarray
    word_mask: np.ndarray
    sentences: list[Sentence]


class NFLAT:
    """The assembled sequence labeler."""

    def __init__(
        self,
        config: ModelConfig,
        char_table: EmbeddingTable,
        word_table: EmbeddingTable,
        schema: LabelSchema,
        lexicon_words: list[str],
        rng: np.random.Generator,
    ):
        self.config = config
        self.char_table = char_table
        self.word_table = word_table
        self.schema = schema
        self.lexicon_words = list(lexicon_words)
        self.trie: LexiconTrie = build_trie(self.lexicon_words)
        self.rng = rng

        d = config.d_model
        self.char_adapter = (
            init_matrix(rng, char_table.dim, d) if char_table.dim != d else None
        )
        self.word_adapter = (
            init_matrix(rng, word_table.dim, d) if word_table.dim != d else None
        )
        self.inter = InterFormerParams(d, config.heads, config.effective_d_ff, rng)
        self.encoder = SelfAttnParams(
            d, config.effective_self_heads, config.effective_d_ff, rng
        )
        self.crf = CrfParams(d, len(schema), rng)
        if config.precision == "float32":
            self._cast_non_crf(np.float32)

    # -- construction ----------------------------------------------------

    @classmethod
    def build(
        cls,
        config: ModelConfig,
        train_sentences: list[Sentence],
        lexicon_words: list[str],
        char_emb_path=None,
        word_emb_path=None,
    ) -> "NFLAT":
        """Assemble a fresh model from a training corpus and a lexicon."""
        rng = np.random.default_rng(config.seed)
        lexicon_words = list(dict.fromkeys(lexicon_words))  # dedupe, keep order
        chars = sorted({ch for s in train_sentences for ch in s.chars})
        if char_emb_path:
            from .lexicon import load_embeddings

            char_table = load_embeddings(char_emb_path, with_non_word=False)
        else:
            char_table = EmbeddingTable.random(chars, config.d_model, rng)
        if word_emb_path:
            from .lexicon import load_embeddings

            word_table = load_embeddings(word_emb_path, with_non_word=True)
        else:
            word_table = EmbeddingTable.random(
                lexicon_words, config.d_model, rng, with_non_word=True
            )
        tags = [t for s in train_sentences if s.labels for t in s.labels]
        if not tags:
            raise ValueError("training corpus has no labeled sentences")
        schema = LabelSchema.from_observed_tags(tags)
        return cls(config, char_table, word_table, schema, lexicon_words, rng)

    def _cast_non_crf(self, dtype) -> None:
        crf_names = set(self.crf.parameters().keys())
        for name, p in self.parameters().items():
            if name not in crf_names:
                p.data = p.data.astype(dtype)

    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {
            "emb.char": self.char_table.matrix,
            "emb.word": self.word_table.matrix,
        }
        if self.char_adapter is not None:
            out["emb.char_adapter"] = self.char_adapter
        if self.word_adapter is not None:
            out["emb.word_adapter"] = self.word_adapter
        out.update(self.inter.parameters("inter"))
        out.update(self.encoder.parameters("self"))
        out.update(self.crf.parameters("crf"))
        return out

    # -- batching ----------------------------------------------------------

    def encode_batch(self, sentences: list[Sentence]) -> Batch:
        """Match words and pad character/word streams to the batch maxima."""
        cfg = self.config
        n_max = max(len(s) for s in sentences)
        per_sent = []
        for s in sentences:
            matches = match_words(self.trie, s.chars, cfg.max_match_len)
            if cfg.ablation != "-TAG":
                matches = append_non_word(matches, len(s))
            per_sent.append(matches)
        m_max = max(1, max(len(m) for m in per_sent))
        b = len(sentences)
        char_ids = np.zeros((b, n_max), dtype=np.int64)
        char_mask = np.zeros((b, n_max), dtype=bool)
        lengths = np.zeros(b, dtype=np.int64)
        word_ids = np.zeros((b, m_max), dtype=np.int64)
        word_heads = np.ones((b, m_max), dtype=np.int64)
        word_tails = np.ones((b, m_max), dtype=np.int64)
        word_mask = np.zeros((b, m_max), dtype=bool)
        for i, (s, matches) in enumerate(zip(sentences, per_sent)):
            n = len(s)
            lengths[i] = n
            char_ids[i, :n] = self.char_table.ids(s.chars)
            char_mask[i, :n] = True
            for j, mw in enumerate(matches):
                word_ids[i, j] = self.word_table.lookup_id(mw.word)
                word_heads[i, j] = mw.head
                word_tails[i, j] = mw.tail
                word_mask[i, j] = True
        return Batch(
            char_ids, char_mask, lengths, word_ids, word_heads, word_tails,
            word_mask, sentences,
        )

    # -- forward -----------------------------------------------------------

    def forward(self, batch: Batch, training: bool = False,
                meter: AttentionMeter | None = None) -> Tensor:
        """Emission scores (B, n_max, L) for a padded batch."""
        cfg = self.config
        rng = self.rng
        x_char = T.embedding_lookup(self.char_table.matrix, batch.char_ids)
        if self.char_adapter is not None:
            x_char = x_char @ self.char_adapter
        x_char = T.dropout(x_char, cfg.char_embed_dropout, rng=rng, training=training)
        x_word = T.embedding_lookup(self.word_table.matrix, batch.word_ids)
        if self.word_adapter is not None:
            x_word = x_word @ self.word_adapter
        x_word = T.dropout(x_word, cfg.word_embed_dropout, rng=rng, training=training)

        fused = interformer_forward(
            x_char,
            x_word,
            batch.word_heads,
            batch.word_tails,
            self.inter,
            char_mask=batch.char_mask,
            word_mask=batch.word_mask,
            ablation=cfg.ablation,
            attn_dropout=cfg.attn_dropout,
            fc_dropout=cfg.fc_dropout1,
            rng=rng,
            training=training,
            meter=meter,
            degenerate_fallback=cfg.degenerate_fallback,
        )
        context = self_attention_forward(
            fused,
            self.encoder,
            pad_mask=batch.char_mask,
            attn_dropout=cfg.attn_dropout,
            fc_dropout=cfg.fc_dropout1,
            rng=rng,
            training=training,
            meter=meter,
        )
        context = T.dropout(context, cfg.fc_dropout2, rng=rng, training=training)
        return context @ self.crf.w_emit + self.crf.b_emit

    def emissions(self, sentence: Sentence) -> Tensor:
        """Emission scores (n, L) for a single sentence, evaluation mode."""
        batch = self.encode_batch([sentence])
        out = self.forward(batch, training=False)
        return out.reshape(out.shape[1], out.shape[2])

    def loss(self, batch: Batch, training: bool = True) -> Tensor:
        """Mean negative log-likelihood over the batch."""
        if any(s.labels is None for s in batch.sentences):
            raise ValueError("loss needs labeled sentences")
        emissions = self.forward(batch, training=training)
        n_max = emissions.shape[1]
        gold = np.zeros((len(batch.sentences), n_max), dtype=np.int64)
        for i, s in enumerate(batch.sentences):
            gold[i, : len(s)] = self.schema.encode(s.labels)
        ll = crf_log_likelihood(emissions, gold, self.crf, lengths=batch.lengths)
        return -ll.mean()

    # -- prediction ----------------------------------------------------------

    def predict(self, sentences: list[Sentence], batch_size: int = 16,
                workers: int = 1) -> list[list[str]]:
        """Viterbi tag sequences for each sentence, in input order."""
        results: list[list[str]] = []
        chunks = [
            sentences[i : i + batch_size] for i in range(0, len(sentences), batch_size)
        ]

        def run_chunk(chunk):
            with T.no_grad():
                batch = self.encode_batch(chunk)
                emissions = self.forward(batch, training=False)
            out = []
            for i, s in enumerate(chunk):
                path = viterbi_decode(emissions.data[i, : len(s)], self.crf)
                out.append(self.schema.decode(path))
            return out

        if workers > 1 and len(chunks) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                for tags in pool.map(run_chunk, chunks):  # map keeps order
                    results.extend(tags)
        else:
            for chunk in chunks:
                results.extend(run_chunk(chunk))
        return results

    # -- checkpointing ---------------------------------------------------------

    def state_meta(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "labels": self.schema.labels,
            "scheme": self.schema.scheme,
            "char_tokens": _plain_tokens(self.char_table),
            "word_tokens": _plain_tokens(self.word_table),
            "lexicon": self.lexicon_words,
        }

    def save(self, path) -> None:
        arrays = {f"param::{k}": v.data for k, v in self.parameters().items()}
        np.savez(path, __meta__=np.frombuffer(
            json.dumps(self.state_meta()).encode("utf-8"), dtype=np.uint8
        ), **arrays)

    @classmethod
    def load(cls, path) -> "NFLAT":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(bytes(data["__meta__"]).decode("utf-8"))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"{path}: not a model checkpoint")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ValueError(f"{path}: unsupported checkpoint version {meta.get('version')}")
            config = ModelConfig.from_dict(meta["config"])
            schema = LabelSchema(meta["labels"], meta["scheme"])
            char_table = EmbeddingTable.from_state(
                meta["char_tokens"], data["param::emb.char"], with_non_word=False
            )
            word_table = EmbeddingTable.from_state(
                meta["word_tokens"], data["param::emb.word"], with_non_word=True
            )
            model = cls(
                config, char_table, word_table, schema, meta["lexicon"],
                np.random.default_rng(config.seed),
            )
            for name, tensor in model.parameters().items():
                stored = data[f"param::{name}"]
                if stored.shape != tensor.data.shape:
                    raise ValueError(
                        f"{path}: parameter {name} has shape {stored.shape}, "
                        f"expected {tensor.data.shape}"
                    )
                tensor.data = np.array(stored)
        return model


def _plain_tokens(table: EmbeddingTable) -> list[str]:
    """Token list excluding the generated special rows, in row order."""
    specials = {table.unknown_id, table.non_word_id}
    return [tok for tok, idx in sorted(table.vocab.items(), key=lambda kv: kv[1])
            if idx not in specials]
