"""Command-line surface: train, eval, predict, match, stats, bench, gen-data.

Exit codes: 0 success, 1 usage error (nothing written), 2 data/model error.
Every verb accepts --config (flat key=value file) and --seed; explicit flags
win over config-file values and the resolved configuration is echoed into
the metrics log by the train verb.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ModelConfig, load_config


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--seed", type=int, help="override the config seed")


def build_parser() -> _Parser:
    parser = _Parser(prog="nflat", description=__doc__.splitlines()[0])
    verbs = parser.add_subparsers(dest="verb")

    p = verbs.add_parser("gen-data", parents=[], help="generate a synthetic corpus")
    _common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-sentences", type=int, default=200)
    p.add_argument("--dev-sentences", type=int, default=60)
    p.add_argument("--test-sentences", type=int, default=60)
    p.add_argument("--alphabet-size", type=int, default=40)
    p.add_argument("--entity-types", type=int, default=3)
    p.add_argument("--vocab-size", type=int, default=120)
    p.add_argument("--distractors", type=int, default=80)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=40)
    p.add_argument("--filler-rate", type=float, default=0.15)

    p = verbs.add_parser("match", help="print lexicon matches for a text")
    _common(p)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--max-match-len", type=int, default=None)

    p = verbs.add_parser("stats", help="match statistics over a dataset")
    _common(p)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-match-len", type=int, default=None)

    p = verbs.add_parser("train", help="train a model")
    _common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--char-emb")
    p.add_argument("--word-emb")
    p.add_argument("--out", required=True, help="directory for checkpoint + metrics")
    p.add_argument("--quiet", action="store_true")
    for name in ("epochs", "batch-size", "d-model", "heads", "workers"):
        p.add_argument(f"--{name}", type=int)
    p.add_argument("--lr", type=float)
    # accept RPE/TAG without the leading dash: "--ablation -RPE" trips argparse
    p.add_argument("--ablation", choices=["none", "-RPE", "-TAG", "RPE", "TAG"])
    p.add_argument("--precision", choices=["float64", "float32"])

    p = verbs.add_parser("eval", help="evaluate a checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--workers", type=int, default=1)

    p = verbs.add_parser("predict", help="tag new text with a checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", help="dataset-format file")
    p.add_argument("--text", help="raw sentence")
    p.add_argument("--out", help="output file (default stdout)")

    p = verbs.add_parser("bench", help="attention cost sweep")
    _common(p)
    p.add_argument("--lengths", default="64,128,256,512")
    p.add_argument("--density", type=float, default=0.4)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--d-model", type=int, default=64)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--precision", choices=["float64", "float32"], default="float64")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--plot", help="optional plot image path")
    return parser


def _resolve_config(args, **flag_overrides) -> ModelConfig:
    """defaults < config file < explicit flags."""
    cfg = load_config(args.config) if args.config else ModelConfig()
    values = cfg.to_dict()
    if args.seed is not None:
        values["seed"] = args.seed
    for key, value in flag_overrides.items():
        if value is not None:
            values[key] = value
    return ModelConfig.from_dict(values)


def _cmd_gen_data(args) -> int:
    from .data import gen_synthetic, write_conll

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 1
    corpus = gen_synthetic(
        seed=seed,
        alphabet_size=args.alphabet_size,
        entity_types=args.entity_types,
        vocab_size=args.vocab_size,
        distractors=args.distractors,
        n_train=args.train_sentences,
        n_dev=args.dev_sentences,
        n_test=args.test_sentences,
        min_len=args.min_len,
        max_len=args.max_len,
        filler_rate=args.filler_rate,
    )
    write_conll(out / "train.conll", corpus.train)
    write_conll(out / "dev.conll", corpus.dev)
    write_conll(out / "test.conll", corpus.test)
    (out / "lexicon.txt").write_text(
        "\n".join(corpus.lexicon) + "\n", encoding="utf-8"
    )
    print(
        f"wrote {len(corpus.train)}/{len(corpus.dev)}/{len(corpus.test)} "
        f"sentences and {len(corpus.lexicon)} lexicon words to {out}"
    )
    return 0


def _cmd_match(args) -> int:
    from .lexicon import build_trie, load_lexicon, match_words

    cfg = _resolve_config(args, max_match_len=args.max_match_len)
    trie = build_trie(load_lexicon(args.lexicon))
    for m in match_words(trie, args.text, cfg.max_match_len):
        print(f"{m.word} {m.head} {m.tail}")
    return 0


def _cmd_stats(args) -> int:
    from .data import read_conll
    from .lexicon import build_trie, load_lexicon, match_stats

    cfg = _resolve_config(args, max_match_len=args.max_match_len)
    trie = build_trie(load_lexicon(args.lexicon))
    sentences = read_conll(args.data)
    stats = match_stats([s.chars for s in sentences], trie, cfg.max_match_len)
    print(f"sentences           {stats.sentences}")
    print(f"char length avg     {stats.char_len_avg:.1f}")
    print(f"char length max     {stats.char_len_max}")
    print(f"matched length avg  {stats.matched_len_avg:.1f}")
    print(f"matched length max  {stats.matched_len_max}")
    return 0


def _cmd_train(args) -> int:
    from .data import read_conll
    from .lexicon import load_lexicon
    from .model import NFLAT
    from .train import evaluate, train

    ablation = args.ablation
    if ablation in ("RPE", "TAG"):
        ablation = "-" + ablation
    cfg = _resolve_config(
        args,
        epochs=args.epochs,
        batch_size=args.batch_size,
        d_model=args.d_model,
        heads=args.heads,
        workers=args.workers,
        lr=args.lr,
        ablation=ablation,
        precision=args.precision,
    )
    train_sents = read_conll(args.train, require_labels=True)
    dev_sents = read_conll(args.dev, require_labels=True)
    lexicon = load_lexicon(args.lexicon) if args.lexicon else []
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model = NFLAT.build(
        cfg, train_sents, lexicon,
        char_emb_path=args.char_emb, word_emb_path=args.word_emb,
    )
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as log:
        history = train(
            model, train_sents, dev_sents, config=cfg,
            metrics_log=log, quiet=args.quiet,
        )
    model.save(out / "checkpoint.npz")
    best = max((r.dev.f1 for r in history), default=0.0)
    final = evaluate(model, dev_sents, workers=cfg.workers)
    print(f"trained {len(history)} epochs; best dev F1 {best:.4f}")
    print(final.summary())
    return 0


def _cmd_eval(args) -> int:
    from .data import read_conll
    from .model import NFLAT
    from .train import evaluate

    model = NFLAT.load(args.checkpoint)
    sentences = read_conll(args.data, require_labels=True)
    report = evaluate(model, sentences, workers=args.workers)
    print(report.summary())
    return 0


def _cmd_predict(args) -> int:
    from .data import Sentence, read_conll
    from .model import NFLAT

    if bool(args.input) == bool(args.text):
        raise UsageError("predict needs exactly one of --input or --text")
    model = NFLAT.load(args.checkpoint)
    if args.text:
        sentences = [Sentence(args.text)]
    else:
        sentences = read_conll(args.input)
    tags = model.predict(sentences)
    lines: list[str] = []
    for sent, sent_tags in zip(sentences, tags):
        for ch, tag in zip(sent.chars, sent_tags):
            lines.append(f"{ch}\t{tag}")
        lines.append("")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_bench(args) -> int:
    from .bench import plot_records, run_bench, write_csv

    try:
        lengths = [int(x) for x in args.lengths.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --lengths value {args.lengths!r}")
    if not lengths:
        raise UsageError("--lengths is empty")
    seed = args.seed if args.seed is not None else 1
    records = run_bench(
        lengths,
        match_density=args.density,
        reps=args.reps,
        d_model=args.d_model,
        heads=args.heads,
        seed=seed,
        precision=args.precision,
    )
    write_csv(
        records,
        args.out,
        metadata={
            "lengths": lengths,
            "density": args.density,
            "reps": args.reps,
            "d_model": args.d_model,
            "heads": args.heads,
            "seed": seed,
            "precision": args.precision,
        },
    )
    if args.plot:
        plot_records(records, args.plot)
    for r in records:
        print(
            f"{r.model:6} n={r.length:5} m={r.m:4} cells={r.cells:12} "
            f"peak_bytes={r.peak_bytes:12} s/1k={r.sec_per_1k:10.2f} {r.status}"
        )
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "match": _cmd_match,
    "stats": _cmd_stats,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.verb:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.verb](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # argparse --help
        return int(e.code or 0)
    except (OSError, ValueError, KeyError, IndexError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
