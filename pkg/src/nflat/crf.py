"""Linear-chain CRF: exact log-likelihood (forward algorithm) and Viterbi.

Transitions are learned unconstrained; the evaluator discards malformed
spans instead of forbidding them at decode time.  All computation runs in
float64 so the exhaustive-enumeration oracles stay tight.
"""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import init_matrix, init_vector
from .tensor import Tensor


class LabelSchema:
    """Dense label <-> index mapping plus the tagging scheme ("BMES" or "BIO")."""

    def __init__(self, labels: list[str], scheme: str):
        if scheme not in ("BMES", "BIO"):
            raise ValueError(f"unknown scheme {scheme!r}")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels")
        self.labels = list(labels)
        self.scheme = scheme
        self.index = {lab: i for i, lab in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def encode(self, tags) -> np.ndarray:
        try:
            return np.array([self.index[t] for t in tags], dtype=np.int64)
        except KeyError as e:
            raise ValueError(f"unknown tag {e.args[0]!r}") from None

    def decode(self, ids) -> list[str]:
        return [self.labels[int(i)] for i in ids]

    @classmethod
    def from_entity_types(cls, types: list[str], scheme: str = "BMES") -> "LabelSchema":
        prefixes = {"BMES": "BMES", "BIO": "BI"}[scheme]
        labels = ["O"] + [f"{p}-{t}" for t in types for p in prefixes]
        return cls(labels, scheme)

    @classmethod
    def from_observed_tags(cls, tags) -> "LabelSchema":
        uniq = sorted(set(tags))
        scheme = "BMES" if any(t[:2] in ("M-", "E-", "S-") for t in uniq) else "BIO"
        labels = ["O"] + [t for t in uniq if t != "O"]
        if "O" not in uniq:
            labels = [t for t in uniq]
            labels.insert(0, "O")
        return cls(labels, scheme)


class CrfParams:
    """Emission projection plus transition/start/end scores."""

    def __init__(self, d_model: int, n_labels: int, rng: np.random.Generator):
        self.n_labels = n_labels
        self.w_emit = init_matrix(rng, d_model, n_labels)
        self.b_emit = init_vector(rng, n_labels)
        self.transitions = Tensor(
            rng.uniform(-0.1, 0.1, size=(n_labels, n_labels)), requires_grad=True
        )
        self.start = Tensor(rng.uniform(-0.1, 0.1, size=n_labels), requires_grad=True)
        self.end = Tensor(rng.uniform(-0.1, 0.1, size=n_labels), requires_grad=True)

    def parameters(self, prefix: str = "crf") -> dict[str, Tensor]:
        return {
            f"{prefix}.w_emit": self.w_emit,
            f"{prefix}.b_emit": self.b_emit,
            f"{prefix}.transitions": self.transitions,
            f"{prefix}.start": self.start,
            f"{prefix}.end": self.end,
        }


def _as_f64(x: Tensor) -> Tensor:
    return T.astype(x, np.float64)


def crf_log_partition(emissions: Tensor, transitions: Tensor, start: Tensor,
                      end: Tensor, lengths: np.ndarray | None = None) -> Tensor:
    """Forward algorithm in log space; batched over leading dim if present.

    Args:
        emissions: (n, L) or (B, n, L).
        lengths: per-sentence lengths for padded batches; defaults to n.

    Returns:
        scalar (single) or (B,) log partition values.
    """
    squeeze = emissions.ndim == 2
    if squeeze:
        emissions = emissions.reshape(1, *emissions.shape)
    emissions = _as_f64(emissions)
    b, n, n_lab = emissions.shape
    if lengths is None:
        lengths = np.full(b, n, dtype=np.int64)
    alpha = start.reshape(1, n_lab) + emissions[:, 0, :]
    for t in range(1, n):
        # alpha[b, i] + transitions[i, j] summed out over i
        nxt = T.logsumexp(
            alpha.reshape(b, n_lab, 1) + transitions.reshape(1, n_lab, n_lab), axis=1
        ) + emissions[:, t, :]
        active = (lengths > t)[:, None]
        alpha = T.where(active, nxt, alpha)
    log_z = T.logsumexp(alpha + end.reshape(1, n_lab), axis=-1)
    if squeeze:
        log_z = log_z.reshape(())
    return log_z


def crf_path_score(emissions: Tensor, gold: np.ndarray, transitions: Tensor,
                   start: Tensor, end: Tensor,
                   lengths: np.ndarray | None = None) -> Tensor:
    """Unnormalized score of gold label paths; batched like crf_log_partition."""
    squeeze = emissions.ndim == 2
    if squeeze:
        emissions = emissions.reshape(1, *emissions.shape)
        gold = np.atleast_2d(gold)
    emissions = _as_f64(emissions)
    b, n, n_lab = emissions.shape
    gold = np.asarray(gold, dtype=np.int64)
    if gold.min() < 0 or gold.max() >= n_lab:
        raise ValueError(f"gold label index out of range 0..{n_lab - 1}")
    if lengths is None:
        lengths = np.full(b, n, dtype=np.int64)
    rows = np.arange(b)
    steps = np.arange(n)
    active = (steps[None, :] < lengths[:, None]).astype(np.float64)
    emit = emissions[rows[:, None], steps[None, :], gold]  # (B, n)
    score = (emit * active).sum(axis=-1)
    score = score + start[gold[:, 0]]
    if n > 1:
        trans = transitions[gold[:, :-1], gold[:, 1:]]  # (B, n-1)
        score = score + (trans * active[:, 1:]).sum(axis=-1)
    last = gold[rows, lengths - 1]
    score = score + end[last]
    if squeeze:
        score = score.reshape(())
    return score


def crf_log_likelihood(emissions: Tensor, gold, params: CrfParams,
                       lengths: np.ndarray | None = None) -> Tensor:
    """log p(gold | x) = score(gold) - log Z, differentiable end to end."""
    gold = np.asarray(gold, dtype=np.int64)
    score = crf_path_score(
        emissions, gold, params.transitions, params.start, params.end, lengths
    )
    log_z = crf_log_partition(
        emissions, params.transitions, params.start, params.end, lengths
    )
    return score - log_z


def viterbi_decode(emissions: np.ndarray, params: CrfParams) -> np.ndarray:
    """Exact MAP path; ties break toward the lower label index.

    Args:
        emissions: (n, L) numpy array (no gradients at decode time).

    Returns:
        int array of n label indices.
    """
    if isinstance(emissions, Tensor):
        e = emissions.data.astype(np.float64)
    else:
        e = np.asarray(emissions, dtype=np.float64)
    n, n_lab = e.shape
    trans = params.transitions.data
    score = params.start.data + e[0]
    back = np.zeros((n, n_lab), dtype=np.int64)
    for t in range(1, n):
        cand = score[:, None] + trans  # (prev, cur)
        back[t] = np.argmax(cand, axis=0)  # first max -> lowest index wins ties
        score = cand[back[t], np.arange(n_lab)] + e[t]
    score = score + params.end.data
    path = np.zeros(n, dtype=np.int64)
    path[-1] = int(np.argmax(score))
    for t in range(n - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path
