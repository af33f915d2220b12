"""Relation graphs over characters plus constituent- and role-label nodes.

A sentence of N characters lives in a fixed node space: indices [0, N)
are the characters, the next 12 are constituent labels, the final 24 are
semantic role labels, always in the orders below. Every relation is
materialized as a dense 0/1 adjacency over the full space, given
self-loops, and symmetrically normalized; label nodes untouched by a
relation keep an identity row. Construction is pure and graphs are
treated as immutable once built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SYN_LABELS",
    "SEM_LABELS",
    "LABEL_NODE_COUNT",
    "NodeSet",
    "RelationGraph",
    "add_self_loops",
    "sym_normalize",
    "build_dependency_graphs",
    "build_constituent_graph",
    "build_srl_graph",
    "build_sentence_graphs",
    "validate_spans",
]

SYN_LABELS = (
    "ADJP", "ADVP", "CLP", "DNP", "DP", "DVP",
    "LCP", "LST", "NP", "PP", "QP", "VP",
)

SEM_LABELS = (
    "A0", "A1", "A2", "A3", "A4", "ADV", "BNF", "CND",
    "CRD", "DGR", "DIR", "DIS", "EXT", "FRQ", "LOC", "MNR",
    "PRP", "QTY", "TMP", "TPC", "PRD", "PSR", "PSE", "ROOT",
)

LABEL_NODE_COUNT = len(SYN_LABELS) + len(SEM_LABELS)

_SYN_INDEX = {label: i for i, label in enumerate(SYN_LABELS)}
_SEM_INDEX = {label: i for i, label in enumerate(SEM_LABELS)}


@dataclass(frozen=True)
class NodeSet:
    """Index bookkeeping for one sentence's characters plus label nodes."""

    n_chars: int

    def __post_init__(self):
        if self.n_chars < 0:
            raise ValueError(f"negative character count {self.n_chars}")

    @property
    def size(self) -> int:
        return self.n_chars + LABEL_NODE_COUNT

    def syn_node(self, label: str) -> int:
        if label not in _SYN_INDEX:
            raise ValueError(f"unknown constituent label {label!r}")
        return self.n_chars + _SYN_INDEX[label]

    def sem_node(self, label: str) -> int:
        if label not in _SEM_INDEX:
            raise ValueError(f"unknown role label {label!r}")
        return self.n_chars + len(SYN_LABELS) + _SEM_INDEX[label]


@dataclass(frozen=True)
class RelationGraph:
    """One relation's edges and its normalized dense adjacency."""

    relation: str
    nodes: NodeSet
    edges: frozenset[tuple[int, int]]
    normalized_adjacency: np.ndarray


def add_self_loops(adjacency: np.ndarray) -> np.ndarray:
    """Copy of a square adjacency with every diagonal entry forced to 1."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    out = a.copy()
    np.fill_diagonal(out, 1.0)
    return out


def sym_normalize(adjacency: np.ndarray) -> np.ndarray:
    """Scale each entry A[i, j] by 1/sqrt(deg_i * deg_j), degrees by row sum."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"adjacency must be square, got {a.shape}")
    deg = a.sum(axis=1)
    zero = np.flatnonzero(deg == 0.0)
    if zero.size:
        raise ValueError(f"zero-degree node {int(zero[0])} cannot be normalized")
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def validate_spans(n_chars: int, word_spans: Sequence[tuple[int, int]]) -> None:
    """Check that spans partition [0, n_chars) in order, no gaps or overlaps."""
    at = 0
    for i, (start, end) in enumerate(word_spans):
        if start != at or end <= start:
            raise ValueError(
                f"word spans must partition [0, {n_chars}) in order: "
                f"span {i} is ({start}, {end}), expected start {at}"
            )
        at = end
    if at != n_chars:
        raise ValueError(
            f"word spans must partition [0, {n_chars}) in order: spans cover [0, {at})"
        )


def _finish(relation: str, nodes: NodeSet, edges: Iterable[tuple[int, int]]) -> RelationGraph:
    edge_set = frozenset(edges)
    a = np.zeros((nodes.size, nodes.size), dtype=np.float64)
    for i, j in edge_set:
        a[i, j] = 1.0
    return RelationGraph(
        relation=relation,
        nodes=nodes,
        edges=edge_set,
        normalized_adjacency=sym_normalize(add_self_loops(a)),
    )


def build_dependency_graphs(
    n_chars: int,
    word_spans: Sequence[tuple[int, int]],
    heads: Sequence[int | None],
) -> tuple[RelationGraph, RelationGraph]:
    """Character-level dependency graphs, returned as (incoming, outgoing).

    A head word's every character connects to the dependent word's every
    character in the outgoing graph; the incoming graph holds the exact
    transposed edge set. None marks a root word and contributes no edges.
    """
    validate_spans(n_chars, word_spans)
    if len(heads) != len(word_spans):
        raise ValueError(f"{len(heads)} heads for {len(word_spans)} words")
    nodes = NodeSet(n_chars)
    out_edges: set[tuple[int, int]] = set()
    for dep, head in enumerate(heads):
        if head is None:
            continue
        if not 0 <= head < len(word_spans):
            raise ValueError(f"head {head} of word {dep} out of range")
        hs, he = word_spans[head]
        ds, de = word_spans[dep]
        for hc in range(hs, he):
            for dc in range(ds, de):
                out_edges.add((hc, dc))
    in_edges = {(j, i) for i, j in out_edges}
    return (
        _finish("dep_in", nodes, in_edges),
        _finish("dep_out", nodes, out_edges),
    )


def _build_label_graph(
    relation: str,
    n_chars: int,
    word_spans: Sequence[tuple[int, int]],
    labels: Sequence[str | None],
    node_of,
) -> RelationGraph:
    validate_spans(n_chars, word_spans)
    if len(labels) != len(word_spans):
        raise ValueError(f"{len(labels)} labels for {len(word_spans)} words")
    nodes = NodeSet(n_chars)
    edges: set[tuple[int, int]] = set()
    for (start, end), label in zip(word_spans, labels):
        if label is None:
            continue
        ln = node_of(nodes, label)
        for c in range(start, end):
            edges.add((c, ln))
            edges.add((ln, c))
    return _finish(relation, nodes, edges)


def build_constituent_graph(
    n_chars: int,
    word_spans: Sequence[tuple[int, int]],
    first_ancestor: Sequence[str | None],
) -> RelationGraph:
    """Undirected edges between each character and its word's constituent label node."""
    return _build_label_graph(
        "syn", n_chars, word_spans, first_ancestor, NodeSet.syn_node
    )


def build_srl_graph(
    n_chars: int,
    word_spans: Sequence[tuple[int, int]],
    roles: Sequence[str | None],
) -> RelationGraph:
    """Undirected edges between each character and its word's role label node."""
    return _build_label_graph("sem", n_chars, word_spans, roles, NodeSet.sem_node)


def build_sentence_graphs(
    n_chars: int,
    word_spans: Sequence[tuple[int, int]],
    heads: Sequence[int | None],
    syn: Sequence[str | None],
    sem: Sequence[str | None],
) -> dict[str, RelationGraph]:
    """All four relation graphs keyed as dep_in, dep_out, syn, sem."""
    dep_in, dep_out = build_dependency_graphs(n_chars, word_spans, heads)
    return {
        "dep_in": dep_in,
        "dep_out": dep_out,
        "syn": build_constituent_graph(n_chars, word_spans, syn),
        "sem": build_srl_graph(n_chars, word_spans, sem),
    }
