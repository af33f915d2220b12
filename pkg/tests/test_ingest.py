"""Format parsers, sentence assembly, and the JSONL interchange layer."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphtag.graphs import SEM_LABELS, SYN_LABELS
from graphtag.ingest import (
    AnnotatedSentence,
    Corpus,
    ParseError,
    char_spans,
    first_ancestor_labels,
    parse_bracket_forest,
    parse_bracket_tree,
    parse_conllu,
    parse_role_columns,
    read_jsonl,
    sentence_from_words,
    to_char_level,
    write_jsonl,
)


CONLLU_TWO_WORDS = (
    "# sent_id = 1\n"
    "1\t他\t他\tPN\t_\t_\t2\tnsubj\t_\t_\n"
    "2\t来\t来\tVV\t_\t_\t0\troot\t_\t_\n"
)


class TestConllu:
    def test_basic_sentence(self):
        (s,) = parse_conllu(CONLLU_TWO_WORDS)
        assert s.words == ["他", "来"]
        assert s.pos == ["PN", "VV"]
        assert s.heads == [1, None]
        assert s.deprels == ["nsubj", "root"]

    def test_blank_line_splits_sentences(self):
        text = CONLLU_TWO_WORDS + "\n" + CONLLU_TWO_WORDS
        assert len(parse_conllu(text)) == 2

    def test_range_and_decimal_ids_skipped(self):
        text = (
            "1-2\t他来\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "1\t他\t他\tPN\t_\t_\t2\tnsubj\t_\t_\n"
            "1.1\tnull\t_\t_\t_\t_\t_\t_\t_\t_\n"
            "2\t来\t来\tVV\t_\t_\t0\troot\t_\t_\n"
        )
        (s,) = parse_conllu(text)
        assert s.words == ["他", "来"]

    def test_column_count_error_names_line(self):
        with pytest.raises(ParseError, match="line 2: expected 10"):
            parse_conllu("# ok\n1\t他\tPN\n")

    def test_bad_token_id(self):
        with pytest.raises(ParseError, match=r"line 1: bad token id 'x'"):
            parse_conllu("x\t他\t他\tPN\t_\t_\t0\troot\t_\t_\n")

    def test_non_integer_head(self):
        with pytest.raises(ParseError, match=r"line 1: non-integer HEAD '_'"):
            parse_conllu("1\t他\t他\tPN\t_\t_\t_\troot\t_\t_\n")

    def test_head_out_of_range(self):
        with pytest.raises(ParseError, match="line 1: HEAD 5 out of range 0..1"):
            parse_conllu("1\t他\t他\tPN\t_\t_\t5\tdep\t_\t_\n")

    def test_empty_input(self):
        assert parse_conllu("") == []
        assert parse_conllu("# only comments\n\n") == []


class TestBracketTrees:
    def test_leaves_in_order(self):
        tree = parse_bracket_tree("(IP (NP-SBJ (NR 武汉)) (VP (VV 建成)))")
        assert tree.label == "IP"
        assert tree.leaf_words() == ["武汉", "建成"]

    def test_whitespace_tolerant(self):
        tree = parse_bracket_tree("( IP\n  ( NP ( NN 大桥 ) )\n  ( VP ( VV 建成 ) ) )")
        assert tree.leaf_words() == ["大桥", "建成"]

    def test_forest(self):
        trees = parse_bracket_forest("(VP (VV 来)) (NP (NR 北京))")
        assert [t.leaf_words() for t in trees] == [["来"], ["北京"]]
        assert parse_bracket_forest("  \n ") == []

    def test_unbalanced_reported_with_offset(self):
        with pytest.raises(ParseError, match="unbalanced parentheses"):
            parse_bracket_tree("(IP (NP (NN 桥)")

    def test_empty_constituent(self):
        with pytest.raises(ParseError, match="empty constituent 'NP'"):
            parse_bracket_tree("(IP (NP ))")

    def test_trailing_content(self):
        with pytest.raises(ParseError, match="trailing content"):
            parse_bracket_tree("(NP (NN 桥)) junk")

    def test_missing_open_paren(self):
        with pytest.raises(ParseError, match="expected '\\('"):
            parse_bracket_tree("NP")

    def test_leaf_needs_closing_paren(self):
        with pytest.raises(ParseError, match="expected '\\)' after leaf token"):
            parse_bracket_tree("(NN 桥 extra)")


class TestFirstAncestor:
    def test_functional_suffix_stripped(self):
        tree = parse_bracket_tree(
            "(IP (NP-SBJ (NR 武汉市) (NR 长江)) (VP (VV 建成)))"
        )
        assert first_ancestor_labels(tree) == ["NP", "NP", "VP"]

    def test_walk_passes_unknown_labels(self):
        # IP is not in the label set, QP is found above the unknown CLP-X chain
        tree = parse_bracket_tree("(IP (QP (X (CD 三))) (VV 来))")
        assert first_ancestor_labels(tree) == ["QP", None]

    def test_preterminal_label_itself_can_match(self):
        tree = parse_bracket_tree("(IP (NP 桥))")
        assert first_ancestor_labels(tree) == ["NP"]

    def test_custom_labelset(self):
        tree = parse_bracket_tree("(S (FOO (NN a)) (BAR (NN b)))")
        assert first_ancestor_labels(tree, ["FOO"]) == ["FOO", None]


class TestRoleColumns:
    def test_placeholders_become_none(self):
        assert parse_role_columns("A0 _ ROOT\n- TMP\n") == [
            ["A0", None, "ROOT"],
            [None, "TMP"],
        ]

    def test_blank_lines_skipped(self):
        assert parse_role_columns("\n\nA0\n\n") == [["A0"]]


class TestAssembly:
    def test_char_spans(self):
        assert char_spans(["武汉市", "长江"]) == [(0, 3), (3, 5)]
        with pytest.raises(ValueError, match="empty word at index 1"):
            char_spans(["他", ""])

    def test_sentence_from_words_round_trip(self):
        s = sentence_from_words(
            ["他", "来", "北京"], ["PN", "VV", "NR"], [1, None, 1]
        )
        assert s.chars == ["他", "来", "北", "京"]
        assert s.words == [(0, 1), (1, 2), (2, 4)]
        assert s.word_strings == ["他", "来", "北京"]
        n, spans, pos, heads, syn, sem = to_char_level(s)
        assert n == 4 and spans == s.words and pos == s.pos
        assert syn == [None] * 3 and sem == [None] * 3

    def test_validation_catches_length_mismatch(self):
        with pytest.raises(ValueError, match="field 'pos': 1 entries for 2 words"):
            sentence_from_words(["他", "来"], ["PN"], [None, None])

    def test_validation_catches_head_cycle(self):
        with pytest.raises(ValueError, match="field 'heads': cycle through word"):
            sentence_from_words(["他", "来"], ["PN", "VV"], [1, 0])

    def test_validation_catches_self_head(self):
        with pytest.raises(ValueError, match="cycle through word 0"):
            sentence_from_words(["他"], ["PN"], [0])

    def test_validation_catches_bool_head(self):
        s = AnnotatedSentence(
            chars=["他"],
            words=[(0, 1)],
            pos=["PN"],
            heads=[True],
            syn_ancestor=[None],
            sem_role=[None],
        )
        with pytest.raises(ValueError, match="field 'heads'"):
            s.validate()

    def test_validation_catches_unknown_labels(self):
        with pytest.raises(ValueError, match="field 'syn': unknown label 'IP'"):
            sentence_from_words(["他"], ["PN"], [None], syn=["IP"])
        with pytest.raises(ValueError, match="field 'sem': unknown label 'AM'"):
            sentence_from_words(["他"], ["PN"], [None], sem=["AM"])


class TestCorpus:
    def test_tagset_first_occurrence_order(self):
        s1 = sentence_from_words(["他", "来"], ["PN", "VV"], [1, None])
        s2 = sentence_from_words(["来", "他"], ["VV", "PN"], [None, 0])
        corpus = Corpus.from_sentences([s1, s2])
        assert corpus.pos_tagset == ["PN", "VV"]
        assert len(corpus) == 2
        assert corpus.n_words == 4


class TestJsonl:
    def _corpus(self):
        return Corpus.from_sentences(
            [
                sentence_from_words(
                    ["武汉市", "长江", "大桥", "建成"],
                    ["NR", "NR", "NN", "VV"],
                    [None, 2, None, None],
                    syn=[None, None, None, "VP"],
                    sem=[None, None, None, "ROOT"],
                ),
                sentence_from_words(["他", "来"], ["PN", "VV"], [1, None]),
            ]
        )

    def test_round_trip(self, tmp_path):
        path = tmp_path / "c.jsonl"
        corpus = self._corpus()
        write_jsonl(corpus, path)
        back = read_jsonl(path)
        assert back.sentences == corpus.sentences
        assert back.pos_tagset == corpus.pos_tagset

    def test_canonical_bytes_are_stable(self, tmp_path):
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_jsonl(self._corpus(), p1)
        write_jsonl(read_jsonl(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
        first = p1.read_text(encoding="utf-8").splitlines()[0]
        assert '"chars":["武","汉","市"' in first  # compact, unescaped

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        obj = {"chars": ["他"], "words": [[0, 1]], "pos": ["PN"], "heads": [None], "syn": [None]}
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1: missing field 'sem'"):
            read_jsonl(path)

    def test_unknown_field_named(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        obj = {
            "chars": ["他"], "words": [[0, 1]], "pos": ["PN"],
            "heads": [None], "syn": [None], "sem": [None], "extra": 1,
        }
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1: unknown field 'extra'"):
            read_jsonl(path)

    def test_invalid_json_line_numbered(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = (
            '{"chars":["他"],"words":[[0,1]],"pos":["PN"],'
            '"heads":[null],"syn":[null],"sem":[null]}'
        )
        path.write_text(good + "\n{oops\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 2: invalid JSON"):
            read_jsonl(path)

    def test_semantic_errors_line_numbered(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        obj = {
            "chars": ["他", "来"], "words": [[0, 1], [1, 2]], "pos": ["PN", "VV"],
            "heads": [1, 0], "syn": [None, None], "sem": [None, None],
        }
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        with pytest.raises(ParseError, match="line 1: .*cycle"):
            read_jsonl(path)


# hypothesis strategies for random valid sentences


@st.composite
def annotated_sentences(draw):
    n_words = draw(st.integers(1, 5))
    words = [
        draw(st.text(alphabet="中国大桥他来去", min_size=1, max_size=3))
        for _ in range(n_words)
    ]
    pos = [draw(st.sampled_from(["NN", "VV", "PN", "AD"])) for _ in range(n_words)]
    # heads that cannot cycle: each word points strictly left, or is a root
    heads = [
        draw(st.one_of(st.none(), st.integers(0, i - 1))) if i > 0 else None
        for i in range(n_words)
    ]
    syn = [draw(st.one_of(st.none(), st.sampled_from(SYN_LABELS))) for _ in range(n_words)]
    sem = [draw(st.one_of(st.none(), st.sampled_from(SEM_LABELS))) for _ in range(n_words)]
    return sentence_from_words(words, pos, heads, syn=syn, sem=sem)


@given(st.lists(annotated_sentences(), min_size=1, max_size=6))
@settings(max_examples=80, deadline=None)
def test_jsonl_round_trip_is_identity(tmp_path_factory, sentences):
    corpus = Corpus.from_sentences(sentences)
    path = tmp_path_factory.mktemp("jsonl") / "c.jsonl"
    write_jsonl(corpus, path)
    back = read_jsonl(path)
    assert back.sentences == corpus.sentences
    assert back.pos_tagset == corpus.pos_tagset
