"""Deterministic desk-scale corpus with rule-derived annotations.

Sentences come from a small lexicon whose words share no characters, so
a memorizing model can reach perfect train scores. Annotations follow
fixed rules: the first verb heads every other word, constituent labels
map from POS, and roles follow position relative to the verb. The same
rules produce the demo sentence, so it can be bundled into the corpus.
"""

from __future__ import annotations

import numpy as np

from .ingest import AnnotatedSentence, Corpus, sentence_from_words

__all__ = ["make_synthetic_corpus", "demo_sentence", "DEFAULT_SEED"]

DEFAULT_SEED = 20240841

_WORDS = {
    "NR": ("中国", "北京", "武汉", "长江"),
    "NN": ("大桥", "汽车", "电脑", "老师"),
    "VV": ("来", "去", "吃", "看"),
    "AD": ("将", "也", "很"),
    "PN": ("他", "我", "你"),
    "CD": ("三", "五"),
}

_PATTERNS = (
    ("PN", "VV", "NR"),
    ("PN", "VV", "NN"),
    ("PN", "AD", "VV", "NR"),
    ("PN", "AD", "VV", "NN"),
    ("NR", "NN", "VV"),
    ("CD", "NN", "VV"),
    ("PN", "VV"),
    ("NR", "VV"),
    ("NN", "VV"),
    ("PN", "AD", "VV"),
    ("CD", "NN", "VV", "NN"),
)

_SYN_OF = {"NN": "NP", "NR": "NP", "PN": "NP", "CD": "QP", "VV": "VP", "AD": "ADVP"}

_NOMINAL = ("NN", "NR", "PN")


def _annotate(pos: tuple[str, ...]) -> tuple[list[int | None], list[str], list[str]]:
    verb = pos.index("VV")
    heads: list[int | None] = [None if i == verb else verb for i in range(len(pos))]
    syn = [_SYN_OF[p] for p in pos]
    sem: list[str] = []
    for i, p in enumerate(pos):
        if p == "VV":
            sem.append("ROOT")
        elif p == "AD":
            sem.append("ADV")
        elif p == "CD":
            sem.append("QTY")
        elif p in _NOMINAL:
            sem.append("A0" if i < verb else "A1")
        else:
            raise ValueError(f"no role rule for POS {p!r}")
    return heads, syn, sem


def _build(words: tuple[str, ...], pos: tuple[str, ...]) -> AnnotatedSentence:
    heads, syn, sem = _annotate(pos)
    return sentence_from_words(words, pos, heads, syn, sem, dep_source="rule")


def demo_sentence() -> AnnotatedSentence:
    """The ambiguity showcase: AD+VV reading of a string that could also
    be one two-character word."""
    return _build(("他", "将", "来", "中国"), ("PN", "AD", "VV", "NR"))


def make_synthetic_corpus(n_sentences: int = 40, seed: int = DEFAULT_SEED) -> Corpus:
    """A deduplicated corpus of n_sentences covering all six POS tags.

    Sentence 0 is the demo sentence; the next len(_PATTERNS) are one
    deterministic instance per pattern; the rest are seeded draws.
    """
    sentences = [demo_sentence()]
    seen = {"".join(sentences[0].chars)}

    def push(words: tuple[str, ...], pos: tuple[str, ...]) -> None:
        key = "".join(words)
        if key in seen:
            return
        seen.add(key)
        sentences.append(_build(words, pos))

    for offset, pattern in enumerate(_PATTERNS):
        if len(sentences) >= n_sentences:
            break
        words = tuple(
            _WORDS[p][(slot + offset + 1) % len(_WORDS[p])]
            for slot, p in enumerate(pattern)
        )
        push(words, pattern)

    rng = np.random.default_rng(seed)
    attempts = 0
    while len(sentences) < n_sentences:
        attempts += 1
        if attempts > 10_000:
            raise RuntimeError(f"could not assemble {n_sentences} distinct sentences")
        pattern = _PATTERNS[int(rng.integers(len(_PATTERNS)))]
        words = tuple(_WORDS[p][int(rng.integers(len(_WORDS[p])))] for p in pattern)
        push(words, pattern)
    return Corpus.from_sentences(sentences)
