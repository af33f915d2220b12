"""Joint segmentation labels and span-level evaluation.

Words become per-character labels pairing a BMES position with the
word's POS tag; decoding reconstructs (span, POS) pairs, repairing
ill-formed label sequences greedily instead of rejecting them. Scores are
micro-averaged span counts: a predicted span (or span+POS pair for the
joint score) is correct only when it appears in gold exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

__all__ = [
    "POSITIONS",
    "JointLabel",
    "JointLabelAlphabet",
    "ScoredResult",
    "labels_from_segmentation",
    "spans_from_labels",
    "f1_cws",
    "f1_joint",
]

POSITIONS = ("B", "M", "E", "S")

Span = tuple[int, int]


class JointLabel(NamedTuple):
    position: str
    pos: str

    def __str__(self) -> str:
        return f"{self.position}-{self.pos}"


class JointLabelAlphabet:
    """Bijection between BMES-position/POS joint labels and dense indices."""

    def __init__(self, pos_tagset: Sequence[str]):
        tags = list(pos_tagset)
        if not tags:
            raise ValueError("empty POS tagset")
        if len(set(tags)) != len(tags):
            raise ValueError("duplicate POS tags in tagset")
        self.pos_tagset = tuple(tags)
        self.labels = tuple(
            JointLabel(position, tag) for tag in tags for position in POSITIONS
        )
        self._index = {label: i for i, label in enumerate(self.labels)}

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: JointLabel) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise ValueError(f"label {str(label)!r} not in alphabet") from None

    def label(self, i: int) -> JointLabel:
        if not 0 <= i < len(self.labels):
            raise ValueError(f"label index {i} out of range 0..{len(self.labels) - 1}")
        return self.labels[i]

    def encode(self, words: Sequence[Span], pos: Sequence[str]) -> list[int]:
        return [self.index(lab) for lab in labels_from_segmentation(words, pos)]


def labels_from_segmentation(
    words: Sequence[Span], pos: Sequence[str]
) -> list[JointLabel]:
    """Per-character joint labels for a segmented, tagged sentence."""
    if len(words) != len(pos):
        raise ValueError(f"{len(pos)} tags for {len(words)} words")
    out: list[JointLabel] = []
    for (start, end), tag in zip(words, pos):
        n = end - start
        if n < 1:
            raise ValueError(f"empty span ({start}, {end})")
        if n == 1:
            out.append(JointLabel("S", tag))
        else:
            out.append(JointLabel("B", tag))
            out.extend(JointLabel("M", tag) for _ in range(n - 2))
            out.append(JointLabel("E", tag))
    return out


def spans_from_labels(labels: Sequence[JointLabel]) -> list[tuple[Span, str]]:
    """Decode (span, POS) pairs, repairing ill-formed sequences greedily.

    A fresh B closes any open run at the previous character; an orphan M
    starts a word; an orphan E ends a single-character word; a run left
    open at the end of the sentence is closed there. The decoded word's
    POS comes from its first character's label.
    """
    words: list[tuple[Span, str]] = []
    start: int | None = None

    def close(end: int) -> None:
        nonlocal start
        if start is not None:
            words.append(((start, end), labels[start].pos))
            start = None

    for i, lab in enumerate(labels):
        if lab.position == "B":
            close(i)
            start = i
        elif lab.position == "M":
            if start is None:
                start = i
        elif lab.position == "E":
            if start is None:
                start = i
            close(i + 1)
        elif lab.position == "S":
            close(i)
            start = i
            close(i + 1)
        else:
            raise ValueError(f"unknown position {lab.position!r} at character {i}")
    close(len(labels))
    return words


@dataclass(frozen=True)
class ScoredResult:
    """Span counts with precision, recall and F1 derived from them."""

    n_gold: int
    n_predicted: int
    n_correct: int

    @property
    def precision(self) -> float:
        return self.n_correct / self.n_predicted if self.n_predicted else 0.0

    @property
    def recall(self) -> float:
        return self.n_correct / self.n_gold if self.n_gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if p + r > 0.0 else 0.0

    @property
    def counts(self) -> tuple[int, int, int]:
        return (self.n_gold, self.n_predicted, self.n_correct)

    def __add__(self, other: "ScoredResult") -> "ScoredResult":
        return ScoredResult(
            self.n_gold + other.n_gold,
            self.n_predicted + other.n_predicted,
            self.n_correct + other.n_correct,
        )

    @classmethod
    def zero(cls) -> "ScoredResult":
        return cls(0, 0, 0)


def f1_cws(gold: Sequence[Span], predicted: Sequence[Span]) -> ScoredResult:
    """Segmentation-only score: a span matches on (start, end) alone."""
    g, p = set(gold), set(predicted)
    return ScoredResult(len(g), len(p), len(g & p))


def f1_joint(
    gold: Sequence[tuple[Span, str]], predicted: Sequence[tuple[Span, str]]
) -> ScoredResult:
    """Joint score: a pair matches on span and POS together."""
    g, p = set(gold), set(predicted)
    return ScoredResult(len(g), len(p), len(g & p))
