"""Annotation ingestion: CoNLL-U, bracketed trees, role columns, JSONL.

The canonical on-disk form is JSON Lines, one sentence object per line
with keys chars, words, pos, heads, syn, sem. Word spans are 0-based and
end-exclusive over the character sequence; heads are 0-based word indices
with null marking a root; syn and sem are per-word optional labels drawn
from the fixed constituent and role inventories.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .graphs import SEM_LABELS, SYN_LABELS, validate_spans

__all__ = [
    "ParseError",
    "AnnotatedSentence",
    "Corpus",
    "ConlluSentence",
    "Tree",
    "parse_conllu",
    "parse_bracket_tree",
    "parse_bracket_forest",
    "first_ancestor_labels",
    "parse_role_columns",
    "char_spans",
    "sentence_from_words",
    "to_char_level",
    "read_jsonl",
    "write_jsonl",
]

_SYN_SET = frozenset(SYN_LABELS)
_SEM_SET = frozenset(SEM_LABELS)


class ParseError(ValueError):
    """Malformed input; the message carries a line number or char offset."""


@dataclass
class AnnotatedSentence:
    """One sentence with char-level segmentation and per-word annotations.

    words are (start, end) spans over chars; pos, heads, syn_ancestor and
    sem_role run parallel to words. heads holds word indices with None for
    a root; dep_source is a free-form tag naming where the dependency
    annotation came from and is not persisted to JSONL.
    """

    chars: list[str]
    words: list[tuple[int, int]]
    pos: list[str]
    heads: list[int | None]
    syn_ancestor: list[str | None]
    sem_role: list[str | None]
    dep_source: str = ""

    def validate(self) -> None:
        validate_spans(len(self.chars), self.words)
        n = len(self.words)
        for name, seq in (
            ("pos", self.pos),
            ("heads", self.heads),
            ("syn", self.syn_ancestor),
            ("sem", self.sem_role),
        ):
            if len(seq) != n:
                raise ValueError(f"field {name!r}: {len(seq)} entries for {n} words")
        for i, tag in enumerate(self.pos):
            if not isinstance(tag, str) or not tag:
                raise ValueError(f"field 'pos': empty tag at word {i}")
        for i, h in enumerate(self.heads):
            if h is None:
                continue
            if not isinstance(h, int) or isinstance(h, bool) or not 0 <= h < n:
                raise ValueError(f"field 'heads': head {h!r} of word {i} out of range")
        for i, lab in enumerate(self.syn_ancestor):
            if lab is not None and lab not in _SYN_SET:
                raise ValueError(f"field 'syn': unknown label {lab!r} at word {i}")
        for i, lab in enumerate(self.sem_role):
            if lab is not None and lab not in _SEM_SET:
                raise ValueError(f"field 'sem': unknown label {lab!r} at word {i}")
        # Head chains may not loop back on themselves.
        for i in range(n):
            seen = set()
            at: int | None = i
            while at is not None:
                if at in seen:
                    raise ValueError(f"field 'heads': cycle through word {at}")
                seen.add(at)
                at = self.heads[at]

    @property
    def word_strings(self) -> list[str]:
        return ["".join(self.chars[s:e]) for s, e in self.words]


@dataclass
class Corpus:
    """Sentences plus the ordered set of POS tags they use."""

    sentences: list[AnnotatedSentence] = field(default_factory=list)
    pos_tagset: list[str] = field(default_factory=list)

    @classmethod
    def from_sentences(cls, sentences: Sequence[AnnotatedSentence]) -> "Corpus":
        tagset: list[str] = []
        seen = set()
        for s in sentences:
            for tag in s.pos:
                if tag not in seen:
                    seen.add(tag)
                    tagset.append(tag)
        return cls(sentences=list(sentences), pos_tagset=tagset)

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def n_words(self) -> int:
        return sum(len(s.words) for s in self.sentences)


# ---------------------------------------------------------------------------
# CoNLL-U subset.


class ConlluSentence(NamedTuple):
    words: list[str]
    pos: list[str]
    heads: list[int | None]
    deprels: list[str]


def parse_conllu(text: str) -> list[ConlluSentence]:
    """Parse the 10-column CoNLL-U subset used here.

    Columns ID, FORM, UPOS, HEAD and DEPREL are kept. Comment lines start
    with '#'; multiword-token ranges like '1-2' and decimal ids like '1.1'
    are skipped. HEAD is 1-based with 0 for root and becomes a 0-based
    index or None.
    """
    sentences: list[ConlluSentence] = []
    rows: list[tuple[int, str, str, int, str]] = []

    def flush() -> None:
        if not rows:
            return
        n = len(rows)
        heads: list[int | None] = []
        for line_no, _, _, head, _ in rows:
            if not 0 <= head <= n:
                raise ParseError(f"line {line_no}: HEAD {head} out of range 0..{n}")
            heads.append(None if head == 0 else head - 1)
        sentences.append(
            ConlluSentence(
                words=[r[1] for r in rows],
                pos=[r[2] for r in rows],
                heads=heads,
                deprels=[r[4] for r in rows],
            )
        )
        rows.clear()

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(
                f"line {line_no}: expected 10 tab-separated columns, got {len(cols)}"
            )
        tid = cols[0]
        if "-" in tid or "." in tid:
            continue
        if not tid.isdigit():
            raise ParseError(f"line {line_no}: bad token id {tid!r}")
        try:
            head = int(cols[6])
        except ValueError:
            raise ParseError(f"line {line_no}: non-integer HEAD {cols[6]!r}") from None
        rows.append((line_no, cols[1], cols[3], head, cols[7]))
    flush()
    return sentences


# ---------------------------------------------------------------------------
# Penn-style bracketed constituency trees.


@dataclass(frozen=True)
class Tree:
    """Constituency tree node; a preterminal holds its word and no children."""

    label: str
    children: tuple["Tree", ...] = ()
    word: str | None = None

    def leaf_words(self) -> list[str]:
        if self.word is not None:
            return [self.word]
        out: list[str] = []
        for child in self.children:
            out.extend(child.leaf_words())
        return out


def _skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i].isspace():
        i += 1
    return i


def _read_token(text: str, i: int) -> tuple[str, int]:
    start = i
    while i < len(text) and not text[i].isspace() and text[i] not in "()":
        i += 1
    if i == start:
        raise ParseError(f"offset {i}: expected a label or token")
    return text[start:i], i


def _parse_node(text: str, i: int) -> tuple[Tree, int]:
    if i >= len(text) or text[i] != "(":
        raise ParseError(f"offset {i}: expected '('")
    i = _skip_ws(text, i + 1)
    label, i = _read_token(text, i)
    i = _skip_ws(text, i)
    if i >= len(text):
        raise ParseError(f"offset {i}: unbalanced parentheses")
    if text[i] == ")":
        raise ParseError(f"offset {i}: empty constituent {label!r}")
    if text[i] == "(":
        children: list[Tree] = []
        while i < len(text) and text[i] == "(":
            child, i = _parse_node(text, i)
            children.append(child)
            i = _skip_ws(text, i)
        if i >= len(text) or text[i] != ")":
            raise ParseError(f"offset {i}: unbalanced parentheses")
        return Tree(label=label, children=tuple(children)), i + 1
    word, i = _read_token(text, i)
    i = _skip_ws(text, i)
    if i >= len(text) or text[i] != ")":
        raise ParseError(f"offset {i}: expected ')' after leaf token")
    return Tree(label=label, word=word), i + 1


def parse_bracket_tree(text: str) -> Tree:
    """Parse exactly one bracketed tree; trailing content is an error."""
    i = _skip_ws(text, 0)
    tree, i = _parse_node(text, i)
    i = _skip_ws(text, i)
    if i != len(text):
        raise ParseError(f"offset {i}: trailing content after tree")
    return tree


def parse_bracket_forest(text: str) -> list[Tree]:
    """Parse zero or more bracketed trees separated by whitespace."""
    trees: list[Tree] = []
    i = _skip_ws(text, 0)
    while i < len(text):
        tree, i = _parse_node(text, i)
        trees.append(tree)
        i = _skip_ws(text, i)
    return trees


def first_ancestor_labels(
    tree: Tree, labelset: Sequence[str] = SYN_LABELS
) -> list[str | None]:
    """For each leaf word, the nearest ancestor label found in labelset.

    The walk starts at the word's immediate parent (the preterminal) and
    moves upward; functional suffixes after '-' are stripped before the
    membership test (NP-SBJ counts as NP). None when no ancestor matches.
    """
    allowed = frozenset(labelset)
    out: list[str | None] = []

    def visit(node: Tree, above: tuple[str, ...]) -> None:
        chain = (node.label, *above)
        if node.word is not None:
            for label in chain:
                base = label.split("-", 1)[0]
                if base in allowed:
                    out.append(base)
                    break
            else:
                out.append(None)
            return
        for child in node.children:
            visit(child, chain)

    visit(tree, ())
    return out


# ---------------------------------------------------------------------------
# Role columns: one sentence per line, one token per word, '_' for none.


def parse_role_columns(text: str) -> list[list[str | None]]:
    sentences: list[list[str | None]] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        sentences.append(
            [None if tok in ("_", "-") else tok for tok in line.split()]
        )
    return sentences


# ---------------------------------------------------------------------------
# Assembly.


def char_spans(words: Sequence[str]) -> list[tuple[int, int]]:
    """Spans from cumulative word lengths; empty words are rejected."""
    spans: list[tuple[int, int]] = []
    at = 0
    for i, w in enumerate(words):
        if not w:
            raise ValueError(f"empty word at index {i}")
        spans.append((at, at + len(w)))
        at += len(w)
    return spans


def sentence_from_words(
    words: Sequence[str],
    pos: Sequence[str],
    heads: Sequence[int | None],
    syn: Sequence[str | None] | None = None,
    sem: Sequence[str | None] | None = None,
    dep_source: str = "",
) -> AnnotatedSentence:
    """Build and validate a sentence from word strings and annotations."""
    n = len(words)
    sentence = AnnotatedSentence(
        chars=list("".join(words)),
        words=char_spans(words),
        pos=list(pos),
        heads=list(heads),
        syn_ancestor=list(syn) if syn is not None else [None] * n,
        sem_role=list(sem) if sem is not None else [None] * n,
        dep_source=dep_source,
    )
    sentence.validate()
    return sentence


def to_char_level(sentence: AnnotatedSentence):
    """Project a sentence onto graph-construction inputs.

    Returns (n_chars, word_spans, pos, heads, syn, sem).
    """
    return (
        len(sentence.chars),
        list(sentence.words),
        list(sentence.pos),
        list(sentence.heads),
        list(sentence.syn_ancestor),
        list(sentence.sem_role),
    )


# ---------------------------------------------------------------------------
# JSONL.

_JSONL_KEYS = ("chars", "words", "pos", "heads", "syn", "sem")


def _sentence_from_json(obj) -> AnnotatedSentence:
    if not isinstance(obj, dict):
        raise ValueError("sentence must be a JSON object")
    missing = [k for k in _JSONL_KEYS if k not in obj]
    if missing:
        raise ValueError(f"missing field {missing[0]!r}")
    extra = [k for k in obj if k not in _JSONL_KEYS]
    if extra:
        raise ValueError(f"unknown field {extra[0]!r}")
    chars = obj["chars"]
    if not isinstance(chars, list) or any(
        not isinstance(c, str) or not c for c in chars
    ):
        raise ValueError("field 'chars': expected a list of characters")
    words = obj["words"]
    if not isinstance(words, list):
        raise ValueError("field 'words': expected a list of [start, end] pairs")
    spans: list[tuple[int, int]] = []
    for w in words:
        if (
            not isinstance(w, list)
            or len(w) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in w)
        ):
            raise ValueError("field 'words': expected a list of [start, end] pairs")
        spans.append((w[0], w[1]))
    for name in ("pos", "heads", "syn", "sem"):
        if not isinstance(obj[name], list):
            raise ValueError(f"field {name!r}: expected a list")
    sentence = AnnotatedSentence(
        chars=list(chars),
        words=spans,
        pos=list(obj["pos"]),
        heads=list(obj["heads"]),
        syn_ancestor=list(obj["syn"]),
        sem_role=list(obj["sem"]),
    )
    sentence.validate()
    return sentence


def read_jsonl(path) -> Corpus:
    """Read a JSONL corpus, validating every sentence against the schema."""
    sentences: list[AnnotatedSentence] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"line {line_no}: invalid JSON: {e.msg}") from None
            try:
                sentences.append(_sentence_from_json(obj))
            except ValueError as e:
                raise ParseError(f"line {line_no}: {e}") from None
    return Corpus.from_sentences(sentences)


def write_jsonl(corpus: Corpus, path) -> None:
    """Write a corpus in canonical JSONL form (fixed key order, no spaces)."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in corpus.sentences:
            obj = {
                "chars": s.chars,
                "words": [[a, b] for a, b in s.words],
                "pos": s.pos,
                "heads": s.heads,
                "syn": s.syn_ancestor,
                "sem": s.sem_role,
            }
            fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
