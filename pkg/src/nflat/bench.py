"""Benchmark harness comparing the two lattice constructions.

For each sentence length the harness synthesizes sentences whose matched
word count is a fixed fraction of the length, runs both models forward-only
single-stream, and records wall time (scaled to seconds per 1k sentences),
attention cell counts, and the instrumented peak bytes of attention
score/weight tensors.  A model failing at some length contributes a failure
row instead of aborting the sweep.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass

import numpy as np

from .attention import AttentionMeter
from .encoder import SelfAttnParams, self_attention_forward
from .flat import FlatParams, build_flat_lattice, flat_forward
from .interformer import InterFormerParams, interformer_forward
from .lexicon import MatchedWord
from .tensor import Tensor, no_grad

CSV_HEADER = ["model", "length", "m", "cells", "peak_bytes", "sec_per_1k", "status"]
MEMORY_SCOPE_NOTE = "forward-pass attention score/weight tensors only"


@dataclass
class BenchRecord:
    model: str
    length: int
    m: int
    cells: int
    peak_bytes: int
    sec_per_1k: float
    status: str


def nflat_cells(n: int, m: int, heads: int) -> int:
    """Closed form: heads * (n * (m + 1) + n^2); the +1 is the auxiliary word."""
    return heads * (n * (m + 1) + n * n)


def flat_cells(n: int, m: int, heads: int) -> int:
    """Closed form: heads * (n + m)^2."""
    return heads * (n + m) * (n + m)


def sample_spans(n: int, m: int, rng: np.random.Generator,
                 max_word_len: int = 10) -> list[tuple[int, int]]:
    """m distinct (head, tail) spans of length 2..max_word_len inside 1..n."""
    if n < 2:
        return []
    spans: set[tuple[int, int]] = set()
    limit = min(max_word_len, n)
    attempts = 0
    while len(spans) < m and attempts < 50 * m + 100:
        attempts += 1
        length = int(rng.integers(2, limit + 1))
        head = int(rng.integers(1, n - length + 2))
        spans.add((head, head + length - 1))
    return sorted(spans)


@dataclass
class _Inputs:
    x_char: np.ndarray
    x_word: np.ndarray  # one row per matched word (no auxiliary row)
    spans: list[tuple[int, int]]


def _make_inputs(n: int, density: float, d_model: int,
                 rng: np.random.Generator, dtype) -> _Inputs:
    m = int(round(density * n))
    spans = sample_spans(n, m, rng)
    x_char = rng.normal(size=(n, d_model)).astype(dtype)
    x_word = rng.normal(size=(len(spans), d_model)).astype(dtype)
    return _Inputs(x_char, x_word, spans)


def _run_nflat(inputs: _Inputs, inter: InterFormerParams, enc: SelfAttnParams,
               meter: AttentionMeter | None) -> None:
    n = inputs.x_char.shape[0]
    heads_pos = np.array([h for h, _ in inputs.spans] + [1], dtype=np.int64)
    tails_pos = np.array([t for _, t in inputs.spans] + [n], dtype=np.int64)
    aux_row = np.zeros((1, inputs.x_word.shape[1]), dtype=inputs.x_word.dtype)
    x_word = np.concatenate([inputs.x_word, aux_row], axis=0)
    with no_grad():
        fused = interformer_forward(
            Tensor(inputs.x_char), Tensor(x_word), heads_pos, tails_pos, inter,
            meter=meter,
        )
        self_attention_forward(fused, enc, meter=meter)
    if meter is not None:
        meter.release()


def _run_flat(inputs: _Inputs, params: FlatParams,
              meter: AttentionMeter | None) -> None:
    n = inputs.x_char.shape[0]
    matches = [MatchedWord("x" * (t - h + 1), h, t) for h, t in inputs.spans]
    lattice = build_flat_lattice("x" * n, matches)
    x_tokens = np.concatenate([inputs.x_char, inputs.x_word], axis=0)
    with no_grad():
        flat_forward(Tensor(x_tokens), lattice, params, meter=meter)
    if meter is not None:
        meter.release()


def run_bench(
    lengths: list[int],
    match_density: float = 0.4,
    reps: int = 20,
    d_model: int = 64,
    heads: int = 8,
    seed: int = 1,
    precision: str = "float64",
    models: tuple[str, ...] = ("nflat", "flat"),
    warmup: int = 1,
) -> list[BenchRecord]:
    """Sweep sentence lengths; one record per (model, length).

    Counts and peak bytes are measured on the first repetition (they are
    deterministic); timing averages ``reps`` repetitions after ``warmup``
    untimed runs, scaled to seconds per 1000 sentences.
    """
    dtype = np.float64 if precision == "float64" else np.float32
    records: list[BenchRecord] = []
    param_rng = np.random.default_rng(seed)
    params_by_dim = {}

    def get_params(d):
        if d not in params_by_dim:
            inter = InterFormerParams(d, heads, 2 * d, param_rng)
            enc = SelfAttnParams(d, heads, 2 * d, param_rng)
            flat = FlatParams(d, heads, param_rng)
            for holder in (inter, enc):
                for p in holder.parameters().values():
                    p.data = p.data.astype(dtype)
                    p.requires_grad = False
            for p in vars(flat).values():
                if isinstance(p, Tensor):
                    p.data = p.data.astype(dtype)
                    p.requires_grad = False
            params_by_dim[d] = (inter, enc, flat)
        return params_by_dim[d]

    for n in lengths:
        inter, enc, flat_params = get_params(d_model)
        input_rng = np.random.default_rng(seed + 7919 * n)
        sentences = [
            _make_inputs(n, match_density, d_model, input_rng, dtype)
            for _ in range(max(reps, 1))
        ]
        m = len(sentences[0].spans)
        for model in models:
            runner = _run_nflat if model == "nflat" else _run_flat
            args = (inter, enc) if model == "nflat" else (flat_params,)
            meter = AttentionMeter()
            try:
                runner(sentences[0], *args, meter)
                for _ in range(warmup):
                    runner(sentences[0], *args, None)
                t0 = time.perf_counter()
                for s in sentences:
                    runner(s, *args, None)
                elapsed = time.perf_counter() - t0
            except MemoryError:
                records.append(BenchRecord(model, n, m, 0, 0, 0.0, "oom"))
                continue
            except Exception as e:  # record, keep sweeping
                records.append(
                    BenchRecord(model, n, m, 0, 0, 0.0, f"failed:{type(e).__name__}")
                )
                continue
            records.append(
                BenchRecord(
                    model=model,
                    length=n,
                    m=m,
                    cells=meter.cells,
                    peak_bytes=meter.peak_bytes,
                    sec_per_1k=1000.0 * elapsed / len(sentences),
                    status="ok",
                )
            )
    return records


def write_csv(records: list[BenchRecord], path, metadata: dict | None = None) -> None:
    """Write the sweep as CSV; run metadata goes to a JSON sidecar."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            row = asdict(r)
            writer.writerow([row[k] for k in CSV_HEADER])
    if metadata is not None:
        meta = dict(metadata)
        meta["memory_scope"] = MEMORY_SCOPE_NOTE
        with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)


def read_csv(path) -> list[BenchRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                BenchRecord(
                    model=row["model"],
                    length=int(row["length"]),
                    m=int(row["m"]),
                    cells=int(row["cells"]),
                    peak_bytes=int(row["peak_bytes"]),
                    sec_per_1k=float(row["sec_per_1k"]),
                    status=row["status"],
                )
            )
    return out


def plot_records(records: list[BenchRecord], path) -> None:
    """Two panels: wall time and peak attention bytes vs sentence length."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_time, ax_mem) = plt.subplots(1, 2, figsize=(10, 4))
    for model in sorted({r.model for r in records}):
        ok = [r for r in records if r.model == model and r.status == "ok"]
        ok.sort(key=lambda r: r.length)
        xs = [r.length for r in ok]
        ax_time.plot(xs, [r.sec_per_1k for r in ok], marker="o", label=model)
        ax_mem.plot(xs, [r.peak_bytes / 2**20 for r in ok], marker="o", label=model)
    ax_time.set_xlabel("sentence length")
    ax_time.set_ylabel("seconds per 1k sentences")
    ax_time.legend()
    ax_mem.set_xlabel("sentence length")
    ax_mem.set_ylabel("peak attention MiB")
    ax_mem.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
