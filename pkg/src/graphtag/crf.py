"""Linear-chain CRF over joint labels.

A path y scores start[y1] + sum emissions[t, yt] + sum transitions[yt,
yt+1] + stop[yN]. The negative log-likelihood runs the standard log-space
forward recursion and is differentiable end to end; decoding is max-sum
Viterbi on plain arrays, breaking ties toward the lowest label index.
brute_force_logZ enumerates every path and exists only to check the
recursion on small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    add,
    add_bias,
    add_col,
    logsumexp,
    matmul,
    pick,
    row,
    sub,
)

__all__ = [
    "CrfParams",
    "emissions",
    "nll",
    "viterbi",
    "path_score",
    "brute_force_logZ",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 100_000


@dataclass
class CrfParams:
    """CRF parameters; transitions[i, j] scores label j following label i."""

    transitions: Parameter
    start: Parameter
    stop: Parameter
    proj: Parameter
    proj_bias: Parameter

    @property
    def num_labels(self) -> int:
        return self.transitions.data.shape[0]


def emissions(features: Tensor, params: CrfParams) -> Tensor:
    """Per-character label scores: an affine map of the fused features."""
    return add_bias(matmul(features, params.proj), params.proj_bias)


def _check_labels(labels: Sequence[int], n: int, k: int) -> None:
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for {n} characters")
    for t, y in enumerate(labels):
        if not 0 <= y < k:
            raise ValueError(f"label index {y} out of range 0..{k - 1} at position {t}")


def nll(emission_scores: Tensor, gold: Sequence[int], params: CrfParams) -> Tensor:
    """Negative log-likelihood of the gold path, differentiable throughout."""
    e = emission_scores
    n = e.data.shape[0]
    k = params.num_labels
    if n < 1:
        raise ValueError("nll needs at least one character")
    if e.data.ndim != 2 or e.data.shape[1] != k:
        raise ValueError(f"emissions shape {e.data.shape} does not match {k} labels")
    _check_labels(gold, n, k)

    alpha = add(row(e, 0), params.start)
    for t in range(1, n):
        # scores[i, j] = alpha[i] + transitions[i, j]
        scores = add_col(params.transitions, alpha)
        alpha = add(row(e, t), logsumexp(scores, axis=0))
    log_z = logsumexp(add(alpha, params.stop))

    gold_score = add(pick(params.start, gold[0]), pick(e, 0, gold[0]))
    for t in range(1, n):
        gold_score = add(gold_score, pick(params.transitions, gold[t - 1], gold[t]))
        gold_score = add(gold_score, pick(e, t, gold[t]))
    gold_score = add(gold_score, pick(params.stop, gold[-1]))
    return sub(log_z, gold_score)


def _as_array(emission_scores) -> np.ndarray:
    if isinstance(emission_scores, Tensor):
        return emission_scores.data
    return np.asarray(emission_scores, dtype=np.float64)


def viterbi(emission_scores, params: CrfParams) -> tuple[list[int], float]:
    """Best path and its score. Ties resolve to the lowest label index."""
    e = _as_array(emission_scores)
    if e.ndim != 2:
        raise ValueError(f"emissions must be 2-D, got shape {e.shape}")
    n, k = e.shape
    if n < 1:
        raise ValueError("viterbi needs at least one character")
    if k != params.num_labels:
        raise ValueError(f"emissions shape {e.shape} does not match {params.num_labels} labels")
    trans = params.transitions.data
    trellis = np.empty((n, k))
    backptr = np.zeros((n, k), dtype=np.intp)
    trellis[0] = params.start.data + e[0]
    for t in range(1, n):
        cand = trellis[t - 1][:, None] + trans
        # argmax returns the first maximum, i.e. the lowest previous label.
        backptr[t] = cand.argmax(axis=0)
        trellis[t] = e[t] + cand.max(axis=0)
    final = trellis[-1] + params.stop.data
    last = int(final.argmax())
    path = [last]
    for t in range(n - 1, 0, -1):
        path.append(int(backptr[t, path[-1]]))
    path.reverse()
    return path, float(final[last])


def path_score(emission_scores, params: CrfParams, labels: Sequence[int]) -> float:
    """Score of one explicit path, computed directly."""
    e = _as_array(emission_scores)
    n, k = e.shape
    _check_labels(labels, n, k)
    s = float(params.start.data[labels[0]]) + float(e[0, labels[0]])
    for t in range(1, n):
        s += float(params.transitions.data[labels[t - 1], labels[t]])
        s += float(e[t, labels[t]])
    return s + float(params.stop.data[labels[-1]])


def brute_force_logZ(emission_scores, params: CrfParams) -> float:
    """log of the summed exp of every path score, by direct enumeration.

    Exponentials are accumulated with math.fsum after a max shift.
    Refuses instances with more than BRUTE_FORCE_LIMIT paths.
    """
    e = _as_array(emission_scores)
    n, k = e.shape
    if k ** n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"instance too large: {k}^{n} paths exceed {BRUTE_FORCE_LIMIT}")
    scores = [
        path_score(e, params, labels)
        for labels in itertools.product(range(k), repeat=n)
    ]
    m = max(scores)
    return m + math.log(math.fsum(math.exp(s - m) for s in scores))
