"""Entity-level evaluation: span extraction from tags and micro P/R/F1.

Entities are maximal well-formed tag spans (BMES: B M* E, or S; BIO: B I*),
compared by exact match on (type, head, tail) with 1-based positions.
Malformed tag runs contribute no entity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

Span = tuple[str, int, int]  # (entity type, head, tail), 1-based inclusive


def _split_tag(tag: str) -> tuple[str, str]:
    if tag == "O":
        return "O", ""
    if len(tag) < 3 or tag[1] != "-":
        raise ValueError(f"malformed tag string {tag!r}")
    return tag[0], tag[2:]


def extract_spans(tags, scheme: str = "BMES") -> set[Span]:
    """Well-formed entity spans in a tag sequence.

    BMES requires an unbroken B-t, M-t*, E-t run (or a lone S-t); BIO opens
    with B-t and extends over consecutive I-t.  Anything else (dangling M/E,
    I without B, type switches mid-span) is discarded.
    """
    if scheme not in ("BMES", "BIO"):
        raise ValueError(f"unknown scheme {scheme!r}")
    spans: set[Span] = set()
    tags = list(tags)
    n = len(tags)
    if scheme == "BIO":
        i = 0
        while i < n:
            prefix, etype = _split_tag(tags[i])
            if prefix == "B":
                j = i + 1
                while j < n and tags[j] == f"I-{etype}":
                    j += 1
                spans.add((etype, i + 1, j))
                i = j
            else:
                i += 1
        return spans
    i = 0
    while i < n:
        prefix, etype = _split_tag(tags[i])
        if prefix == "S":
            spans.add((etype, i + 1, i + 1))
            i += 1
        elif prefix == "B":
            j = i + 1
            while j < n and tags[j] == f"M-{etype}":
                j += 1
            if j < n and tags[j] == f"E-{etype}":
                spans.add((etype, i + 1, j + 1))
                i = j + 1
            else:
                i += 1  # unterminated span, not an entity
        else:
            i += 1
    return spans


@dataclass
class TypeScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvalReport:
    """Micro-averaged entity scores with a per-type breakdown."""

    precision: float
    recall: float
    f1: float
    correct: int
    predicted: int
    gold: int
    per_type: dict[str, TypeScore] = field(default_factory=dict)

    def summary(self) -> str:
        lines = [
            f"precision {self.precision:.4f}  recall {self.recall:.4f}  "
            f"f1 {self.f1:.4f}  ({self.correct}/{self.predicted} predicted, "
            f"{self.gold} gold)"
        ]
        for etype in sorted(self.per_type):
            s = self.per_type[etype]
            lines.append(
                f"  {etype:>6}: P {s.precision:.4f}  R {s.recall:.4f}  "
                f"F1 {s.f1:.4f}  (support {s.support})"
            )
        return "\n".join(lines)


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted else 0.0
    r = correct / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def span_prf(gold_spans, pred_spans) -> EvalReport:
    """Score parallel per-sentence span sets (exact match on type and span)."""
    gold_spans = list(gold_spans)
    pred_spans = list(pred_spans)
    if len(gold_spans) != len(pred_spans):
        raise ValueError("gold/pred sentence counts differ")
    correct = predicted = gold_total = 0
    by_type: dict[str, list[int]] = {}
    for g, p in zip(gold_spans, pred_spans):
        g, p = set(g), set(p)
        correct += len(g & p)
        predicted += len(p)
        gold_total += len(g)
        for etype in {s[0] for s in g | p}:
            gt = {s for s in g if s[0] == etype}
            pt = {s for s in p if s[0] == etype}
            acc = by_type.setdefault(etype, [0, 0, 0])
            acc[0] += len(gt & pt)
            acc[1] += len(pt)
            acc[2] += len(gt)
    p, r, f1 = _prf(correct, predicted, gold_total)
    per_type = {}
    for etype, (c, pr, gl) in by_type.items():
        tp, tr, tf = _prf(c, pr, gl)
        per_type[etype] = TypeScore(tp, tr, tf, gl)
    return EvalReport(p, r, f1, correct, predicted, gold_total, per_type)


def evaluate_tags(gold_tags, pred_tags, scheme: str = "BMES") -> EvalReport:
    """Convenience wrapper: extract spans from parallel tag sequences, score."""
    gold = [extract_spans(t, scheme) for t in gold_tags]
    pred = [extract_spans(t, scheme) for t in pred_tags]
    return span_prf(gold, pred)
