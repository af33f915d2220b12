"""Joint Chinese word segmentation and POS tagging with relation-graph
convolution and a CRF decoder, on a self-contained autodiff core."""

from .autodiff import Parameter, Tape, Tensor, backward, grad_check
from .graphs import (
    SEM_LABELS,
    SYN_LABELS,
    NodeSet,
    RelationGraph,
    add_self_loops,
    build_constituent_graph,
    build_dependency_graphs,
    build_sentence_graphs,
    build_srl_graph,
    sym_normalize,
)
from .ingest import (
    AnnotatedSentence,
    Corpus,
    ParseError,
    parse_bracket_tree,
    parse_conllu,
    read_jsonl,
    write_jsonl,
)
from .metrics import (
    JointLabel,
    JointLabelAlphabet,
    ScoredResult,
    f1_cws,
    f1_joint,
    labels_from_segmentation,
    spans_from_labels,
)
from .model import Model, ModelConfig, SentencePack, expected_param_count
from .train import NumericError, RunConfig, TrainResult, evaluate, train_model

__version__ = "0.1.0"
