#!/usr/bin/env python3
"""End to end on synthetic data: generate, train, evaluate, predict."""

import numpy as np

from nflat.config import ModelConfig
from nflat.data import gen_synthetic
from nflat.metrics import extract_spans
from nflat.model import NFLAT
from nflat.train import evaluate, train

corpus = gen_synthetic(seed=5, n_train=80, n_dev=24, n_test=24, max_len=24)
print(
    f"{len(corpus.train)} train / {len(corpus.dev)} dev / {len(corpus.test)} test "
    f"sentences, lexicon of {len(corpus.lexicon)} words "
    f"({len(corpus.entity_words)} carry entity types)"
)

cfg = ModelConfig(
    d_model=32, heads=8, epochs=18, batch_size=10, lr=2e-3, seed=3, patience=18
)
model = NFLAT.build(cfg, corpus.train, corpus.lexicon)
history = train(model, corpus.train, corpus.dev)
print(f"\ntrained {len(history)} epochs; final loss {history[-1].loss:.3f}")

report = evaluate(model, corpus.test)
print("\ntest-set scores:")
print(report.summary())

sentence = corpus.test[0]
tags = model.predict([sentence])[0]
print(f"\nsample sentence: {sentence.chars}")
print(f"gold spans: {sorted(extract_spans(sentence.labels, 'BMES'))}")
print(f"pred spans: {sorted(extract_spans(tags, 'BMES'))}")
