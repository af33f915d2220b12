"""The bundled deterministic training corpus."""

import pytest

from graphtag.synthetic import DEFAULT_SEED, demo_sentence, make_synthetic_corpus


def test_default_corpus_shape():
    corpus = make_synthetic_corpus()
    assert len(corpus) == 40
    assert len(corpus.pos_tagset) == 6
    assert set(corpus.pos_tagset) == {"PN", "AD", "VV", "NR", "NN", "CD"}


def test_deterministic_for_a_seed():
    a = make_synthetic_corpus(n_sentences=15)
    b = make_synthetic_corpus(n_sentences=15, seed=DEFAULT_SEED)
    assert a.sentences == b.sentences
    assert make_synthetic_corpus(n_sentences=15, seed=1).sentences != a.sentences


def test_sentences_are_unique():
    corpus = make_synthetic_corpus()
    texts = ["".join(s.chars) for s in corpus.sentences]
    assert len(set(texts)) == len(texts)


def test_all_sentences_validate_and_are_annotated():
    corpus = make_synthetic_corpus()
    for s in corpus.sentences:
        s.validate()
        assert any(h is not None for h in s.heads)
        assert any(lab is not None for lab in s.syn_ancestor)
        assert any(lab is not None for lab in s.sem_role)


def test_demo_sentence_leads_the_corpus():
    corpus = make_synthetic_corpus(n_sentences=5)
    demo = demo_sentence()
    assert corpus.sentences[0] == demo
    assert "".join(demo.chars) == "他将来中国"
    assert demo.pos == ["PN", "AD", "VV", "NR"]


def test_prefix_stability():
    # a longer draw extends the shorter one rather than reshuffling it
    short = make_synthetic_corpus(n_sentences=10).sentences
    long = make_synthetic_corpus(n_sentences=20).sentences
    assert long[:10] == short


def test_size_guard():
    with pytest.raises(RuntimeError, match="distinct sentences"):
        make_synthetic_corpus(n_sentences=100_000)
