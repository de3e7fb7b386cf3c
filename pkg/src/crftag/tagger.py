"""End-to-end sequence tagger over subword documents.

Emission scores come from a small trainable encoder (an embedding table
with a linear projection, standing in for a transformer) or verbatim from
an external per-document file; the transformer itself is out of scope and
the emission matrix is the seam.  Predictions and losses use only the
first sub-token of each word.  Long documents are windowed into spans,
each span is decoded with the CRF (Viterbi) or softmax (argmax) head, and
a word's final tag comes from the span holding its first sub-token with
maximum context.

Training follows the fine-tuning recipe: two learning-rate groups (the
embedding table versus projection and transitions), linear warmup then
linear decay, decoupled weight decay on weights but not biases, a large
initial bias on the O tag, and a down-weighted O tag in the softmax loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import crf
from .config import atomic_write_text, derive_seed
from .evaluation import evaluate
from .tagscheme import Entity, OUTSIDE, TagSet, decode, filter_invalid
from .vocab import TokenizedDocument, Vocabulary, tokenize_text
from .windowing import SpanConfig, assign_max_context, split_spans

HEAD_CRF = "crf"
HEAD_SOFTMAX = "softmax"
OPTIMIZER_SGD = "sgd"
OPTIMIZER_ADAM = "adam"

CHECKPOINT_FORMAT = "crftag-model"
CHECKPOINT_VERSION = 1

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 16
    lr_encoder: float = 5e-5
    lr_head: float = 1e-3
    warmup_fraction: float = 0.1
    weight_decay: float = 0.01
    o_tag_bias_init: float = 6.0
    o_tag_loss_weight: float = 0.01
    head: str = HEAD_CRF
    optimizer: str = OPTIMIZER_SGD
    seed: int = 13

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.lr_encoder <= 0 or self.lr_head <= 0:
            raise ValueError("learning rates must be positive")
        if not 0 <= self.warmup_fraction <= 1:
            raise ValueError(f"warmup_fraction must be in [0, 1], got {self.warmup_fraction}")
        if self.weight_decay < 0 or self.o_tag_loss_weight < 0:
            raise ValueError("weight_decay and o_tag_loss_weight must be non-negative")
        if self.head not in (HEAD_CRF, HEAD_SOFTMAX):
            raise ValueError(f"unknown head {self.head!r}")
        if self.optimizer not in (OPTIMIZER_SGD, OPTIMIZER_ADAM):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def lr_schedule(step: int, total_steps: int, base_lr: float, warmup_fraction: float) -> float:
    """Linear ramp 0 -> base_lr over the warmup steps, then linear decay to 0."""
    if total_steps < 1:
        raise ValueError("total_steps must be positive")
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if not 0 <= warmup_fraction <= 1:
        raise ValueError(f"warmup_fraction must be in [0, 1], got {warmup_fraction}")
    warmup_steps = warmup_fraction * total_steps
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    if total_steps == warmup_steps:
        return base_lr
    return base_lr * (total_steps - step) / (total_steps - warmup_steps)


@dataclass
class TrainableEncoder:
    """Toy emission model: per-sub-token embedding plus a linear tag layer."""

    embedding: np.ndarray
    projection: np.ndarray
    bias: np.ndarray

    @classmethod
    def create(cls, vocab_size: int, embedding_dim: int, num_tags: int, seed: int) -> "TrainableEncoder":
        rng = np.random.default_rng(seed)
        return cls(
            rng.normal(0.0, 1.0, (vocab_size, embedding_dim)),
            np.zeros((embedding_dim, num_tags)),
            np.zeros(num_tags),
        )

    @property
    def num_tags(self) -> int:
        return self.projection.shape[1]

    def emissions(self, token_ids) -> np.ndarray:
        return self.embedding[list(token_ids)] @ self.projection + self.bias


@dataclass
class ExternalEmissions:
    """Predict-only emission source backed by per-document matrices."""

    num_tags: int
    matrices: dict[str, np.ndarray] = field(default_factory=dict)

    def rows(self, doc_id: Optional[str], word_indices) -> np.ndarray:
        if doc_id is None:
            raise ValueError("external emissions require a document id")
        if doc_id not in self.matrices:
            raise ValueError(f"no emissions for document {doc_id!r}")
        matrix = self.matrices[doc_id]
        word_indices = list(word_indices)
        if word_indices and max(word_indices) >= matrix.shape[0]:
            raise ValueError(f"document {doc_id!r}: emissions have {matrix.shape[0]} rows, need index {max(word_indices)}")
        return matrix[word_indices]


EmissionModel = Union[TrainableEncoder, ExternalEmissions]


@dataclass
class TaggerModel:
    tag_set: TagSet
    encoder: EmissionModel
    span_config: SpanConfig
    head: str = HEAD_CRF
    transitions: Optional[np.ndarray] = None
    vocab: Optional[Vocabulary] = None

    def __post_init__(self) -> None:
        if self.head not in (HEAD_CRF, HEAD_SOFTMAX):
            raise ValueError(f"unknown head {self.head!r}")
        K = self.tag_set.num_tags
        if self.encoder.num_tags != K:
            raise ValueError(f"encoder produces {self.encoder.num_tags} tag scores for {K} tags")
        if self.head == HEAD_CRF:
            if self.transitions is None:
                self.transitions = crf.zero_transitions(K)
            self.transitions = np.asarray(self.transitions, dtype=float)
            if self.transitions.shape != (K + 2, K + 2):
                raise ValueError(f"transition matrix shape {self.transitions.shape} does not match {K} tags")
        elif self.transitions is not None:
            raise ValueError("softmax head takes no transition matrix")
        if self.vocab is not None and isinstance(self.encoder, TrainableEncoder):
            if len(self.vocab) != self.encoder.embedding.shape[0]:
                raise ValueError("vocabulary size does not match the embedding table")


def create_trainable_model(
    vocab: Vocabulary,
    tag_set: TagSet,
    span_config: SpanConfig,
    head: str = HEAD_CRF,
    embedding_dim: int = 32,
    seed: int = 0,
) -> TaggerModel:
    encoder = TrainableEncoder.create(len(vocab), embedding_dim, tag_set.num_tags, seed)
    return TaggerModel(tag_set, encoder, span_config, head=head, vocab=vocab)


def emissions_for_span(model: TaggerModel, sub_tokens, doc_id: Optional[str] = None) -> np.ndarray:
    """Word-level emission rows for one span's sub-tokens.

    Rows for continuation sub-tokens are dropped: the output has exactly
    one row per pre-token represented in the span, in pre-token order.
    """
    firsts = [st for st in sub_tokens if st.is_first]
    if not firsts:
        raise ValueError("span contains no pre-tokens")
    if isinstance(model.encoder, TrainableEncoder):
        return model.encoder.emissions([st.token_id for st in firsts])
    return model.encoder.rows(doc_id, [st.pre_token_index for st in firsts])


@dataclass(frozen=True)
class _SpanExample:
    doc: TokenizedDocument
    first_positions: tuple[int, ...]
    targets: np.ndarray


def _span_examples(doc: TokenizedDocument, gold: Sequence[int], span_config: SpanConfig) -> list[_SpanExample]:
    n = doc.num_sub_tokens
    examples = []
    for span in assign_max_context(split_spans(n, span_config), n):
        firsts = tuple(p for p in range(span.start, span.end) if doc.sub_tokens[p].is_first)
        if not firsts:
            # The stride landed inside one long word; its first sub-token
            # lives in a neighboring span.
            continue
        targets = np.array([gold[doc.sub_tokens[p].pre_token_index] for p in firsts])
        examples.append(_SpanExample(doc, firsts, targets))
    return examples


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _span_loss(model: TaggerModel, cfg: TrainConfig, example: _SpanExample, grads: dict) -> float:
    encoder = model.encoder
    token_ids = [example.doc.sub_tokens[p].token_id for p in example.first_positions]
    word_emb = encoder.embedding[token_ids]
    emissions = word_emb @ encoder.projection + encoder.bias
    targets = example.targets

    if model.head == HEAD_CRF:
        value, grad_a, grad_e = crf.log_likelihood(model.transitions, emissions, targets)
        loss = -value
        d_emissions = -grad_e
        grads["transitions"] -= grad_a
    else:
        rows = np.arange(len(targets))
        log_probs = _log_softmax(emissions)
        weights = np.where(targets == model.tag_set.index(OUTSIDE), cfg.o_tag_loss_weight, 1.0)
        loss = float(-(weights * log_probs[rows, targets]).sum())
        d_emissions = np.exp(log_probs) * weights[:, np.newaxis]
        d_emissions[rows, targets] -= weights

    grads["projection"] += word_emb.T @ d_emissions
    grads["bias"] += d_emissions.sum(axis=0)
    np.add.at(grads["embedding"], token_ids, d_emissions @ encoder.projection.T)
    return float(loss)


class _Optimizer:
    """Per-group schedule, optional Adam moments, decoupled weight decay."""

    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig, total_steps: int) -> None:
        self.params = params
        self.cfg = cfg
        self.total_steps = total_steps
        if cfg.optimizer == OPTIMIZER_ADAM:
            self.m = {k: np.zeros_like(v) for k, v in params.items()}
            self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray], step_index: int) -> None:
        cfg = self.cfg
        for name, param in self.params.items():
            base_lr = cfg.lr_encoder if name == "embedding" else cfg.lr_head
            lr = lr_schedule(step_index, self.total_steps, base_lr, cfg.warmup_fraction)
            grad = grads[name]
            if cfg.optimizer == OPTIMIZER_ADAM:
                m, v = self.m[name], self.v[name]
                m *= _ADAM_BETA1
                m += (1 - _ADAM_BETA1) * grad
                v *= _ADAM_BETA2
                v += (1 - _ADAM_BETA2) * grad * grad
                m_hat = m / (1 - _ADAM_BETA1**step_index)
                v_hat = v / (1 - _ADAM_BETA2**step_index)
                update = m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
            else:
                update = grad
            param -= lr * update
            if name != "bias":
                param -= lr * cfg.weight_decay * param


def train(model: TaggerModel, dataset, cfg: TrainConfig) -> tuple[TaggerModel, list[float]]:
    """Fit the model in place; returns it with the per-epoch mean span loss.

    ``dataset`` holds (TokenizedDocument, word-level gold tags) pairs; tags
    may be names or indices.  Documents are windowed and every span is a
    separate training example.
    """
    if not dataset:
        raise ValueError("training dataset is empty")
    if not isinstance(model.encoder, TrainableEncoder):
        raise ValueError("only the trainable encoder supports training")
    if cfg.head != model.head:
        raise ValueError(f"config head {cfg.head!r} does not match model head {model.head!r}")

    examples: list[_SpanExample] = []
    for doc, gold in dataset:
        gold_idx = model.tag_set.to_indices(gold)
        if len(gold_idx) != doc.num_words:
            raise ValueError(f"document {doc.doc_id!r}: {len(gold_idx)} gold tags for {doc.num_words} words")
        examples.extend(_span_examples(doc, gold_idx, model.span_config))
    if not examples:
        raise ValueError("dataset contains no trainable spans")

    model.encoder.bias[model.tag_set.index(OUTSIDE)] = cfg.o_tag_bias_init
    params = {
        "embedding": model.encoder.embedding,
        "projection": model.encoder.projection,
        "bias": model.encoder.bias,
    }
    if model.head == HEAD_CRF:
        params["transitions"] = model.transitions

    steps_per_epoch = math.ceil(len(examples) / cfg.batch_size)
    optimizer = _Optimizer(params, cfg, cfg.epochs * steps_per_epoch)
    rng = np.random.default_rng(cfg.seed)
    trace: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads = {name: np.zeros_like(value) for name, value in params.items()}
            for index in batch:
                epoch_loss += _span_loss(model, cfg, examples[index], grads)
            for name in grads:
                grads[name] /= len(batch)
            step += 1
            optimizer.step(grads, step)
        trace.append(epoch_loss / len(examples))
    return model, trace


def _as_document(model: TaggerModel, document) -> TokenizedDocument:
    if isinstance(document, TokenizedDocument):
        return document
    if isinstance(document, str):
        if model.vocab is None:
            raise ValueError("model has no vocabulary; pass a TokenizedDocument")
        return tokenize_text(model.vocab, document)
    raise TypeError(f"expected text or TokenizedDocument, got {type(document).__name__}")


def predict(model: TaggerModel, document) -> tuple[list[int], list[Entity]]:
    """Tag one document and decode its entities.

    Spans are decoded independently (Viterbi or per-position argmax); each
    word takes the tag from the span where its first sub-token has maximum
    context.  The merged sequence is cleaned with ``filter_invalid`` before
    entity decoding.
    """
    doc = _as_document(model, document)
    n = doc.num_sub_tokens
    if n == 0:
        return [], []
    word_tags: list[Optional[int]] = [None] * doc.num_words
    for span in assign_max_context(split_spans(n, model.span_config), n):
        sub_tokens = doc.sub_tokens[span.start : span.end]
        firsts = [span.start + k for k, st in enumerate(sub_tokens) if st.is_first]
        if not firsts:
            continue
        emissions = emissions_for_span(model, sub_tokens, doc_id=doc.doc_id)
        if model.head == HEAD_CRF:
            tags, _ = crf.viterbi_decode(model.transitions, emissions)
        else:
            tags = np.argmax(emissions, axis=1).tolist()
        lo, hi = span.max_context_range
        for k, position in enumerate(firsts):
            if lo <= position < hi:
                word_tags[doc.sub_tokens[position].pre_token_index] = tags[k]
    if any(tag is None for tag in word_tags):
        raise RuntimeError("some word received no prediction; max-context ranges are inconsistent")
    filtered = filter_invalid(word_tags, model.tag_set)
    return filtered, decode(filtered, model.tag_set)


def save_model(model: TaggerModel, path) -> None:
    """Serialize to the versioned JSON checkpoint format."""
    if isinstance(model.encoder, TrainableEncoder):
        encoder = {
            "variant": "trainable",
            "embedding": model.encoder.embedding.tolist(),
            "projection": model.encoder.projection.tolist(),
            "bias": model.encoder.bias.tolist(),
        }
    else:
        encoder = {"variant": "external"}
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "head": model.head,
        "classes": list(model.tag_set.classes),
        "span": {"max_len": model.span_config.max_len, "stride": model.span_config.stride},
        "encoder": encoder,
        "vocab": list(model.vocab.tokens) if model.vocab is not None else None,
    }
    if model.head == HEAD_CRF:
        payload["transitions"] = model.transitions.tolist()
    atomic_write_text(path, json.dumps(payload))


def load_model(path) -> TaggerModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    tag_set = TagSet(payload["classes"])
    span_config = SpanConfig(payload["span"]["max_len"], payload["span"]["stride"])
    encoder_data = payload["encoder"]
    encoder: EmissionModel
    if encoder_data["variant"] == "trainable":
        encoder = TrainableEncoder(
            np.array(encoder_data["embedding"], dtype=float),
            np.array(encoder_data["projection"], dtype=float),
            np.array(encoder_data["bias"], dtype=float),
        )
    elif encoder_data["variant"] == "external":
        encoder = ExternalEmissions(tag_set.num_tags)
    else:
        raise ValueError(f"{path}: unknown encoder variant {encoder_data['variant']!r}")
    vocab = Vocabulary(payload["vocab"]) if payload.get("vocab") else None
    transitions = payload.get("transitions")
    return TaggerModel(
        tag_set,
        encoder,
        span_config,
        head=payload["head"],
        transitions=np.array(transitions, dtype=float) if transitions is not None else None,
        vocab=vocab,
    )


def write_emissions_file(path, tag_names, matrices: dict[str, np.ndarray]) -> None:
    """External emissions: a tag header then one record per document."""
    lines = ["#tags " + " ".join(tag_names)]
    for doc_id, matrix in matrices.items():
        if " " in doc_id or "\t" in doc_id:
            raise ValueError(f"document id {doc_id!r} contains whitespace")
        values = " ".join(repr(float(x)) for x in np.asarray(matrix).ravel())
        lines.append(f"{doc_id} {matrix.shape[0]} {values}".rstrip())
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_emissions_file(path) -> tuple[list[str], dict[str, np.ndarray]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#tags "):
            raise ValueError(f"{path}:1: expected '#tags ...' header")
        tag_names = header.split()[1:]
        if not tag_names:
            raise ValueError(f"{path}:1: header lists no tags")
        num_tags = len(tag_names)
        matrices: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 2:
                raise ValueError(f"{path}:{lineno}: expected doc id and row count")
            doc_id, count = fields[0], int(fields[1])
            if doc_id in matrices:
                raise ValueError(f"{path}:{lineno}: duplicate document id {doc_id!r}")
            values = [float(x) for x in fields[2:]]
            if len(values) != count * num_tags:
                raise ValueError(f"{path}:{lineno}: expected {count * num_tags} scores, got {len(values)}")
            matrices[doc_id] = np.array(values).reshape(count, num_tags)
    return tag_names, matrices


class SequenceTagger(BaseEstimator):
    """Scikit-learn style wrapper around the tagging pipeline.

    ``fit`` takes documents (texts or TokenizedDocuments) and word-level
    tag-name sequences; ``predict`` returns filtered tag names per word.
    Defaults follow the published fine-tuning recipe.
    """

    def __init__(
        self,
        vocab: Optional[Vocabulary] = None,
        classes: Optional[Sequence[str]] = None,
        head: str = HEAD_CRF,
        max_len: int = 512,
        stride: int = 128,
        embedding_dim: int = 32,
        epochs: int = 20,
        batch_size: int = 16,
        lr_encoder: float = 5e-5,
        lr_head: float = 1e-3,
        warmup_fraction: float = 0.1,
        weight_decay: float = 0.01,
        o_tag_bias_init: float = 6.0,
        o_tag_loss_weight: float = 0.01,
        optimizer: str = OPTIMIZER_SGD,
        seed: int = 13,
    ) -> None:
        self.vocab = vocab
        self.classes = classes
        self.head = head
        self.max_len = max_len
        self.stride = stride
        self.embedding_dim = embedding_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_encoder = lr_encoder
        self.lr_head = lr_head
        self.warmup_fraction = warmup_fraction
        self.weight_decay = weight_decay
        self.o_tag_bias_init = o_tag_bias_init
        self.o_tag_loss_weight = o_tag_loss_weight
        self.optimizer = optimizer
        self.seed = seed

    def _document(self, item) -> TokenizedDocument:
        if isinstance(item, TokenizedDocument):
            return item
        if isinstance(item, str):
            if self.vocab is None:
                raise ValueError("raw text input requires a vocabulary")
            return tokenize_text(self.vocab, item)
        raise TypeError(f"expected text or TokenizedDocument, got {type(item).__name__}")

    def _infer_classes(self, y) -> list[str]:
        classes = set()
        for tags in y:
            for tag in tags:
                if not isinstance(tag, str):
                    raise ValueError("classes must be given when gold tags are indices")
                if tag != OUTSIDE:
                    classes.add(tag.partition("-")[2])
        if not classes:
            raise ValueError("gold tags contain no entity classes")
        return sorted(classes)

    def fit(self, X, y) -> "SequenceTagger":
        if len(X) != len(y):
            raise ValueError(f"{len(X)} documents but {len(y)} tag sequences")
        if self.vocab is None:
            raise ValueError("a vocabulary is required to build the encoder")
        docs = [self._document(item) for item in X]
        tag_set = TagSet(self.classes if self.classes is not None else self._infer_classes(y))
        dataset = [(doc, tag_set.to_indices(tags)) for doc, tags in zip(docs, y)]
        model = create_trainable_model(
            self.vocab,
            tag_set,
            SpanConfig(self.max_len, self.stride),
            head=self.head,
            embedding_dim=self.embedding_dim,
            seed=derive_seed(self.seed, "init"),
        )
        cfg = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr_encoder=self.lr_encoder,
            lr_head=self.lr_head,
            warmup_fraction=self.warmup_fraction,
            weight_decay=self.weight_decay,
            o_tag_bias_init=self.o_tag_bias_init,
            o_tag_loss_weight=self.o_tag_loss_weight,
            head=self.head,
            optimizer=self.optimizer,
            seed=derive_seed(self.seed, "shuffle"),
        )
        _, trace = train(model, dataset, cfg)
        self.model_ = model
        self.tag_set_ = tag_set
        self.loss_trace_ = trace
        return self

    def predict(self, X) -> list[list[str]]:
        check_is_fitted(self, "model_")
        return [self.tag_set_.to_names(predict(self.model_, self._document(item))[0]) for item in X]

    def predict_entities(self, X) -> list[list[Entity]]:
        check_is_fitted(self, "model_")
        return [predict(self.model_, self._document(item))[1] for item in X]

    def score(self, X, y) -> float:
        """Entity-level micro F1 against word-level gold tag sequences."""
        check_is_fitted(self, "model_")
        gold = [decode(self.tag_set_.to_indices(tags), self.tag_set_) for tags in y]
        return evaluate(gold, self.predict_entities(X)).f1
