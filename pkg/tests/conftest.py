"""Shared fixtures: the worked bridge-sentence example and small model builders."""

import numpy as np
import pytest

from graphtag.ingest import AnnotatedSentence
from graphtag.model import Model, ModelConfig


BRIDGE_CHARS = list("武汉市长江大桥建成")
BRIDGE_SPANS = [(0, 3), (3, 5), (5, 7), (7, 9)]
BRIDGE_POS = ["NR", "NR", "NN", "VV"]
BRIDGE_HEADS = [None, 2, None, None]
BRIDGE_SYN = [None, None, None, "VP"]
BRIDGE_SEM = [None, None, None, "ROOT"]


@pytest.fixture
def bridge_sentence():
    s = AnnotatedSentence(
        chars=BRIDGE_CHARS,
        words=BRIDGE_SPANS,
        pos=BRIDGE_POS,
        heads=BRIDGE_HEADS,
        syn_ancestor=BRIDGE_SYN,
        sem_role=BRIDGE_SEM,
    )
    s.validate()
    return s


def tiny_model(seed=3, **overrides):
    kwargs = {"embed_dim": 6, "gcn_layer_dims": (4, 5), **overrides}
    cfg = ModelConfig(**kwargs)
    vocab = ["<unk>", "中", "他", "来", "将", "国"]
    return Model(cfg, vocab, ["AD", "NR", "PN", "VV"], np.random.default_rng(seed))


def tiny_sentence():
    s = AnnotatedSentence(
        chars=["他", "将", "来", "中", "国"],
        words=[(0, 1), (1, 2), (2, 3), (3, 5)],
        pos=["PN", "AD", "VV", "NR"],
        heads=[2, 2, None, 2],
        syn_ancestor=[None, "ADVP", "VP", "NP"],
        sem_role=["A0", "ADV", "ROOT", "A1"],
    )
    s.validate()
    return s
