"""Character encoder, gated multi-relation graph convolution, and fusion.

Node states start as character encodings stacked on a shared table of 36
label-node embeddings. Each graph layer propagates states through every
enabled relation's normalized adjacency, applies a per-relation weight,
optionally scales each node's contribution by a learned sigmoid gate
computed from the pre-propagation states, sums the relation terms and
applies ReLU. The character rows of the final states fuse with the
encoder output (concatenation by default, elementwise sum on request)
to produce per-character features for the CRF head.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Parameter, Tensor
from .crf import CrfParams
from .crf import emissions as crf_emissions
from .crf import nll as crf_nll
from .crf import viterbi as crf_viterbi
from .graphs import (
    LABEL_NODE_COUNT,
    build_constituent_graph,
    build_dependency_graphs,
    build_srl_graph,
)
from .ingest import AnnotatedSentence
from .metrics import JointLabelAlphabet

__all__ = [
    "ModelConfig",
    "Model",
    "SentencePack",
    "RELATION_ORDER",
    "UNK",
    "gcn_propagate",
    "expected_param_count",
]

RELATION_ORDER = ("dep_in", "dep_out", "syn", "sem")

UNK = "<unk>"

_FUSIONS = ("concat", "sum")
_ENCODERS = ("embedding", "contextual")
_CONV_PARTS = ("w_prev", "w_self", "w_next")


@dataclass
class ModelConfig:
    """Architecture and training hyperparameters at desk scale.

    Full-scale counterparts (embed_dim 768, layer dims (128, 768),
    learning rate 2e-5, dropout 0.5, 30 epochs) ship in
    configs/full_scale.cfg for runs that can afford them.
    """

    embed_dim: int = 32
    gcn_layer_dims: tuple[int, ...] = (16, 32)
    use_dep: bool = True
    use_syn: bool = True
    use_sem: bool = True
    use_gating: bool = True
    fusion: str = "concat"
    encoder: str = "contextual"
    dropout: float = 0.0
    learning_rate: float = 1e-2
    epochs: int = 30

    def validate(self) -> None:
        if self.embed_dim < 1:
            raise ValueError(f"embed_dim must be positive, got {self.embed_dim}")
        if not self.gcn_layer_dims or any(d < 1 for d in self.gcn_layer_dims):
            raise ValueError(f"bad gcn_layer_dims {self.gcn_layer_dims!r}")
        if self.fusion not in _FUSIONS:
            raise ValueError(f"fusion must be one of {_FUSIONS}, got {self.fusion!r}")
        if self.encoder not in _ENCODERS:
            raise ValueError(f"encoder must be one of {_ENCODERS}, got {self.encoder!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout!r}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be nonnegative, got {self.epochs}")
        if (
            self.gcn_enabled
            and self.fusion == "sum"
            and self.gcn_layer_dims[-1] != self.embed_dim
        ):
            raise ValueError(
                "sum fusion needs matching widths: final graph layer is "
                f"{self.gcn_layer_dims[-1]}, encoder is {self.embed_dim}"
            )

    @property
    def relations(self) -> tuple[str, ...]:
        rels: list[str] = []
        if self.use_dep:
            rels += ["dep_in", "dep_out"]
        if self.use_syn:
            rels.append("syn")
        if self.use_sem:
            rels.append("sem")
        return tuple(rels)

    @property
    def gcn_enabled(self) -> bool:
        return bool(self.relations)

    @property
    def feature_dim(self) -> int:
        if self.gcn_enabled and self.fusion == "concat":
            return self.embed_dim + self.gcn_layer_dims[-1]
        return self.embed_dim

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gcn_layer_dims"] = list(self.gcn_layer_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config field {sorted(unknown)[0]!r}")
        kwargs = dict(d)
        if "gcn_layer_dims" in kwargs:
            kwargs["gcn_layer_dims"] = tuple(kwargs["gcn_layer_dims"])
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


def gcn_propagate(adjacency, states, weight) -> Tensor:
    """One relation's propagation: adjacency @ states @ weight."""
    return ad.matmul(ad.matmul(adjacency, states), weight)


@dataclass
class SentencePack:
    """A sentence prepared for one model: ids, gold labels, adjacencies."""

    sentence: AnnotatedSentence
    char_ids: np.ndarray
    gold_labels: list[int]
    gold_spans: list[tuple[int, int]]
    gold_pairs: list[tuple[tuple[int, int], str]]
    adjacency: dict[str, np.ndarray] = field(default_factory=dict)


def expected_param_count(config: ModelConfig, vocab_size: int, n_pos: int) -> int:
    """Closed-form parameter count; vocab_size includes the unknown row."""
    d = config.embed_dim
    count = vocab_size * d
    if config.encoder == "contextual":
        count += 2 * (3 * d * d + d)
    if config.gcn_enabled:
        count += LABEL_NODE_COUNT * d
        dims = (d, *config.gcn_layer_dims)
        for l in range(len(config.gcn_layer_dims)):
            per_relation = dims[l] * dims[l + 1]
            if config.use_gating:
                per_relation += dims[l] + 1
            count += len(config.relations) * per_relation
    k = 4 * n_pos
    count += config.feature_dim * k + k  # emission projection
    count += k * k + k + k  # transitions, start, stop
    return count


class Model:
    """Joint segmenter-tagger: encoder, relation graph stack, CRF head."""

    def __init__(
        self,
        config: ModelConfig,
        vocab: Sequence[str],
        pos_tagset: Sequence[str],
        rng: np.random.Generator,
    ):
        config.validate()
        chars = [c for c in vocab if c != UNK]
        if len(set(chars)) != len(chars):
            raise ValueError("duplicate characters in vocab")
        self.config = config
        self.vocab = [UNK, *chars]
        self.char_index = {c: i for i, c in enumerate(self.vocab)}
        self.alphabet = JointLabelAlphabet(pos_tagset)
        self.params: dict[str, Parameter] = {}
        self._init_params(rng)
        self.crf = CrfParams(
            transitions=self.params["crf.transitions"],
            start=self.params["crf.start"],
            stop=self.params["crf.stop"],
            proj=self.params["crf.proj"],
            proj_bias=self.params["crf.bias"],
        )

    # -- parameters ---------------------------------------------------------

    def _add(self, name: str, array: np.ndarray) -> Parameter:
        p = Parameter(array, name=name)
        self.params[name] = p
        return p

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config
        d = cfg.embed_dim
        self._add("embed.char", rng.normal(0.0, 0.1, (len(self.vocab), d)))
        if cfg.encoder == "contextual":
            scale = 1.0 / np.sqrt(3.0 * d)
            for i in range(2):
                for part in _CONV_PARTS:
                    self._add(f"encoder.conv{i}.{part}", rng.normal(0.0, scale, (d, d)))
                self._add(f"encoder.conv{i}.bias", np.zeros(d))
        if cfg.gcn_enabled:
            self._add("embed.label", rng.normal(0.0, 0.1, (LABEL_NODE_COUNT, d)))
            dims = (d, *cfg.gcn_layer_dims)
            for l in range(len(cfg.gcn_layer_dims)):
                scale = 1.0 / np.sqrt(dims[l])
                for rel in cfg.relations:
                    self._add(
                        f"gcn.{l}.{rel}.weight",
                        rng.normal(0.0, scale, (dims[l], dims[l + 1])),
                    )
                    if cfg.use_gating:
                        self._add(f"gcn.{l}.{rel}.gate_w", np.zeros((dims[l], 1)))
                        self._add(f"gcn.{l}.{rel}.gate_b", np.zeros(1))
        k = len(self.alphabet)
        dv = cfg.feature_dim
        self._add("crf.proj", rng.normal(0.0, 1.0 / np.sqrt(dv), (dv, k)))
        self._add("crf.bias", np.zeros(k))
        self._add("crf.transitions", np.zeros((k, k)))
        self._add("crf.start", np.zeros(k))
        self._add("crf.stop", np.zeros(k))

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def num_params(self) -> int:
        return sum(p.data.size for p in self.params.values())

    # -- data preparation ---------------------------------------------------

    def pack(self, sentence: AnnotatedSentence) -> SentencePack:
        """Prepare a sentence: ids, gold labels, and adjacencies for the
        relations this config enables. Unknown characters map to the
        unknown row; an unknown POS tag is an error."""
        if not sentence.chars:
            raise ValueError("empty sentence")
        cfg = self.config
        ids = np.array([self.char_index.get(c, 0) for c in sentence.chars], dtype=np.intp)
        gold = self.alphabet.encode(sentence.words, sentence.pos)
        n = len(sentence.chars)
        adjacency: dict[str, np.ndarray] = {}
        if cfg.use_dep:
            dep_in, dep_out = build_dependency_graphs(n, sentence.words, sentence.heads)
            adjacency["dep_in"] = dep_in.normalized_adjacency
            adjacency["dep_out"] = dep_out.normalized_adjacency
        if cfg.use_syn:
            adjacency["syn"] = build_constituent_graph(
                n, sentence.words, sentence.syn_ancestor
            ).normalized_adjacency
        if cfg.use_sem:
            adjacency["sem"] = build_srl_graph(
                n, sentence.words, sentence.sem_role
            ).normalized_adjacency
        return SentencePack(
            sentence=sentence,
            char_ids=ids,
            gold_labels=gold,
            gold_spans=list(sentence.words),
            gold_pairs=list(zip(sentence.words, sentence.pos)),
            adjacency=adjacency,
        )

    # -- forward ------------------------------------------------------------

    def encode(self, char_ids) -> Tensor:
        """Character embeddings, refined by two width-3 windowed
        convolution layers with residual connections when the contextual
        encoder is selected."""
        ids = np.asarray(char_ids, dtype=np.intp)
        if ids.size == 0:
            raise ValueError("empty sentence")
        e = ad.take_rows(self.params["embed.char"], ids)
        if self.config.encoder == "contextual":
            for i in range(2):
                mix = ad.add(
                    ad.add(
                        ad.matmul(ad.shift_rows(e, 1), self.params[f"encoder.conv{i}.w_prev"]),
                        ad.matmul(e, self.params[f"encoder.conv{i}.w_self"]),
                    ),
                    ad.matmul(ad.shift_rows(e, -1), self.params[f"encoder.conv{i}.w_next"]),
                )
                e = ad.add(e, ad.relu(ad.add_bias(mix, self.params[f"encoder.conv{i}.bias"])))
        return e

    def _gcn(
        self,
        encoded: Tensor,
        adjacency: dict[str, np.ndarray],
        train: bool,
        rng: np.random.Generator | None,
        relation_order: Sequence[str] | None = None,
    ) -> Tensor:
        cfg = self.config
        order = tuple(relation_order) if relation_order is not None else cfg.relations
        if sorted(order) != sorted(cfg.relations):
            raise ValueError(f"relation order {order!r} does not match enabled {cfg.relations!r}")
        missing = [rel for rel in order if rel not in adjacency]
        if missing:
            raise ValueError(f"missing adjacency for relation {missing[0]!r}")
        h = ad.concat_rows(encoded, self.params["embed.label"])
        for l in range(len(cfg.gcn_layer_dims)):
            terms = []
            for rel in order:
                adj = Tensor(adjacency[rel])
                prop = gcn_propagate(adj, h, self.params[f"gcn.{l}.{rel}.weight"])
                if cfg.use_gating:
                    gate = ad.sigmoid(
                        ad.add(
                            ad.matmul(h, self.params[f"gcn.{l}.{rel}.gate_w"]),
                            self.params[f"gcn.{l}.{rel}.gate_b"],
                        )
                    )
                    prop = ad.scale_rows(prop, gate)
                terms.append(prop)
            total = terms[0]
            for term in terms[1:]:
                total = ad.add(total, term)
            h = ad.relu(total)
            if train and cfg.dropout > 0.0:
                if rng is None:
                    raise ValueError("training forward with dropout needs an rng")
                h = ad.dropout(h, cfg.dropout, rng)
        return h

    def forward(
        self,
        pack: SentencePack,
        train: bool = False,
        rng: np.random.Generator | None = None,
        relation_order: Sequence[str] | None = None,
    ) -> Tensor:
        """Per-character features; equals the encoder output when every
        relation is disabled."""
        e = self.encode(pack.char_ids)
        if not self.config.gcn_enabled:
            return e
        h = self._gcn(e, pack.adjacency, train, rng, relation_order)
        h_chars = ad.rows_slice(h, 0, len(pack.char_ids))
        if self.config.fusion == "concat":
            return ad.concat_cols(e, h_chars)
        return ad.add(e, h_chars)

    def loss(
        self,
        pack: SentencePack,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        features = self.forward(pack, train=train, rng=rng)
        return crf_nll(crf_emissions(features, self.crf), pack.gold_labels, self.crf)

    def predict(self, pack: SentencePack) -> list[int]:
        """Viterbi-decoded label indices; deterministic, no dropout."""
        features = self.forward(pack, train=False)
        path, _ = crf_viterbi(crf_emissions(features, self.crf), self.crf)
        return path

    def encoder_output(self, pack: SentencePack) -> np.ndarray:
        return self.encode(pack.char_ids).data

    def gcn_states(self, pack: SentencePack) -> np.ndarray:
        """Final node states over the full node set, evaluation mode."""
        if not self.config.gcn_enabled:
            raise ValueError("no relations enabled")
        e = self.encode(pack.char_ids)
        return self._gcn(e, pack.adjacency, train=False, rng=None).data

    # -- persistence --------------------------------------------------------

    def save(self, path) -> None:
        payload = {
            "format": "graphtag-checkpoint",
            "version": 1,
            "config": self.config.to_dict(),
            "vocab": self.vocab[1:],
            "pos_tagset": list(self.alphabet.pos_tagset),
            "params": {
                name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
                for name, p in self.params.items()
            },
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "Model":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if not isinstance(payload, dict) or payload.get("format") != "graphtag-checkpoint":
            raise ValueError(f"{path}: not a checkpoint file")
        config = ModelConfig.from_dict(payload["config"])
        model = cls(
            config,
            payload["vocab"],
            payload["pos_tagset"],
            np.random.default_rng(0),
        )
        stored = payload["params"]
        if set(stored) != set(model.params):
            missing = sorted(set(model.params) ^ set(stored))
            raise ValueError(f"checkpoint parameter set mismatch near {missing[0]!r}")
        for name, p in model.params.items():
            shape = tuple(stored[name]["shape"])
            if shape != p.data.shape:
                raise ValueError(
                    f"checkpoint shape mismatch for {name!r}: stored {shape}, config implies {p.data.shape}"
                )
            flat = np.asarray(stored[name]["data"], dtype=np.float64)
            if flat.size != p.data.size:
                raise ValueError(f"checkpoint data size mismatch for {name!r}")
            p.data[...] = flat.reshape(shape)
        return model

    def state_copy(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p.data[...] = state[name]


def config_with(config: ModelConfig, **changes) -> ModelConfig:
    """Copy of a config with fields replaced and the result re-validated."""
    cfg = replace(config, **changes)
    cfg.validate()
    return cfg
