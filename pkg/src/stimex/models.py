"""Stimulus detection models and their shared training loop.

Three architectures over frozen word embeddings:

* ``sl``  — token sequence labeling: BiLSTM, self-attention, linear
  projection, IOB CRF.
* ``icc`` — independent clause classification: BiLSTM + attention over one
  clause, mean-pooled, one hidden layer, softmax over {other, stimulus}.
* ``jcc`` — joint clause classification: a shared word-level BiLSTM yields
  one vector per clause, two stacked clause-level BiLSTMs (optionally with
  clause-level attention) feed a 2-label clause CRF.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from stimex import crf
from stimex.corpus import Instance, Span, iob_to_spans
from stimex.evaluation import MatchMode, clause_prf, span_prf
from stimex.mapping import tokens_to_clauses
from stimex.nn import (
    Adam,
    BiLstm,
    Linear,
    Parameter,
    Tensor,
    attention,
    concat,
    cross_entropy,
    dropout,
    stack,
)

IOB_ALPHABET = ("B", "I", "O")
ARCHITECTURES = ("sl", "icc", "jcc")
SELECTION_METRICS = ("accuracy", "f1")
CHECKPOINT_FORMAT = "stimex-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.003
    batch_size: int = 10
    dropout_p: float = 0.5
    max_epochs: int = 50
    patience: int = 10
    embedding_dim: int = 300
    hidden_dim: int = 100
    seed: int = 0
    selection_metric: str = "accuracy"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("patience must satisfy 1 <= patience <= max_epochs")
        if self.embedding_dim < 1 or self.hidden_dim < 1:
            raise ValueError("embedding_dim and hidden_dim must be at least 1")
        if self.selection_metric not in SELECTION_METRICS:
            raise ValueError(f"selection_metric must be one of {SELECTION_METRICS}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "dropout_p": self.dropout_p,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "embedding_dim": self.embedding_dim,
            "hidden_dim": self.hidden_dim,
            "seed": self.seed,
            "selection_metric": self.selection_metric,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = cls().to_dict().keys()
        for key in obj:
            if key not in known:
                raise ValueError(f"unknown training config key {key!r}")
        return cls(**obj)


class EmbeddingTable:
    """Frozen token -> vector table; unknown tokens map to the zero vector."""

    def __init__(self, tokens: Sequence[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise ValueError(
                f"matrix of shape {matrix.shape} does not match {len(tokens)} tokens"
            )
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in embedding vocabulary")
        self.tokens = list(tokens)
        self.matrix = matrix
        self.dim = int(matrix.shape[1])
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def lookup(self, tokens: Sequence[str]) -> Tensor:
        if not tokens:
            raise ValueError("cannot embed an empty token sequence")
        rows = np.zeros((len(tokens), self.dim))
        for k, tok in enumerate(tokens):
            i = self.index.get(tok)
            if i is not None:
                rows[k] = self.matrix[i]
        return Tensor(rows)

    @classmethod
    def load_text(cls, path: str | Path) -> "EmbeddingTable":
        """Read ``token v1 ... vd`` lines (whitespace-separated decimals)."""
        tokens: list[str] = []
        rows: list[list[float]] = []
        dim: int | None = None
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                parts = line.split()
                if not parts:
                    continue
                values = parts[1:]
                if dim is None:
                    dim = len(values)
                    if dim == 0:
                        raise ValueError(f"{path}: line {lineno}: no vector components")
                if len(values) != dim:
                    raise ValueError(
                        f"{path}: line {lineno}: expected {dim} components, found {len(values)}"
                    )
                try:
                    rows.append([float(v) for v in values])
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: non-numeric component") from None
                tokens.append(parts[0])
        if dim is None:
            raise ValueError(f"{path}: empty embedding file")
        return cls(tokens, np.array(rows))

    @classmethod
    def random(cls, tokens: Sequence[str], dim: int, seed: int) -> "EmbeddingTable":
        """Deterministic random table for corpora without pretrained vectors."""
        uniq = list(dict.fromkeys(tokens))
        rng = np.random.default_rng(seed)
        return cls(uniq, rng.normal(0.0, 0.3, size=(len(uniq), dim)))


def vocabulary(instances: Sequence[Instance]) -> list[str]:
    """Corpus token types in first-seen order."""
    return list(dict.fromkeys(tok for inst in instances for tok in inst.tokens))


# ---------------------------------------------------------------------------
# Architectures


class SlModel:
    architecture = "sl"

    def __init__(self, embeddings: EmbeddingTable, config: TrainConfig, rng: np.random.Generator):
        self.embeddings = embeddings
        self.config = config
        h = config.hidden_dim
        self.encoder = BiLstm("encoder", embeddings.dim, h, rng)
        self.project = Linear("project", 4 * h, len(IOB_ALPHABET), rng)
        self.crf = crf.CrfParams("crf", len(IOB_ALPHABET))

    def parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + self.project.parameters() + self.crf.parameters()

    def emissions(self, tokens: Sequence[str], training: bool = False, rng=None) -> Tensor:
        u = attention(self.encoder(self.embeddings.lookup(tokens)))
        u = dropout(u, self.config.dropout_p, training, rng)
        return self.project(u)

    def loss(self, instance: Instance, training: bool = True, rng=None) -> Tensor:
        y = [IOB_ALPHABET.index(lab) for lab in instance.iob]
        return crf.nll_loss(self.emissions(instance.tokens, training, rng), y, self.crf)

    def predict(self, tokens: Sequence[str]) -> list[str]:
        path, _ = crf.viterbi_decode(self.emissions(tokens), self.crf)
        return [IOB_ALPHABET[i] for i in path]


class IccModel:
    architecture = "icc"

    def __init__(self, embeddings: EmbeddingTable, config: TrainConfig, rng: np.random.Generator):
        self.embeddings = embeddings
        self.config = config
        h = config.hidden_dim
        self.encoder = BiLstm("encoder", embeddings.dim, h, rng)
        self.hidden = Linear("hidden", 4 * h, h, rng)
        self.out = Linear("out", h, 2, rng)

    def parameters(self) -> list[Parameter]:
        return self.encoder.parameters() + self.hidden.parameters() + self.out.parameters()

    def logits(self, clause_tokens: Sequence[str], training: bool = False, rng=None) -> Tensor:
        u = attention(self.encoder(self.embeddings.lookup(clause_tokens)))
        s = u.mean(axis=0)
        z = dropout(self.hidden(s), self.config.dropout_p, training, rng).relu()
        return self.out(z)

    def probabilities(self, clause_tokens: Sequence[str]) -> np.ndarray:
        return self.logits(clause_tokens).softmax().data

    def loss(self, unit: tuple[Sequence[str], bool], training: bool = True, rng=None) -> Tensor:
        clause_tokens, flag = unit
        return cross_entropy(self.logits(clause_tokens, training, rng), int(flag))

    def predict(self, clause_tokens: Sequence[str]) -> bool:
        return bool(np.argmax(self.logits(clause_tokens).data) == 1)


class JccModel:
    architecture = "jcc"

    def __init__(
        self,
        embeddings: EmbeddingTable,
        config: TrainConfig,
        rng: np.random.Generator,
        clause_attention: bool = True,
    ):
        self.embeddings = embeddings
        self.config = config
        self.clause_attention = clause_attention
        h = config.hidden_dim
        self.word_encoder = BiLstm("word_encoder", embeddings.dim, h, rng)
        self.clause_encoder1 = BiLstm("clause_encoder1", 2 * h, h, rng)
        self.clause_encoder2 = BiLstm("clause_encoder2", 2 * h, h, rng)
        self.project = Linear("project", (4 if clause_attention else 2) * h, 2, rng)
        self.crf = crf.CrfParams("crf", 2)

    def parameters(self) -> list[Parameter]:
        return (
            self.word_encoder.parameters()
            + self.clause_encoder1.parameters()
            + self.clause_encoder2.parameters()
            + self.project.parameters()
            + self.crf.parameters()
        )

    def emissions(
        self, clause_token_lists: Sequence[Sequence[str]], training: bool = False, rng=None
    ) -> Tensor:
        if not clause_token_lists:
            raise ValueError("need at least one clause")
        vectors = []
        for toks in clause_token_lists:
            fwd, bwd = self.word_encoder.run(self.embeddings.lookup(toks))
            vectors.append(concat([fwd[-1], bwd[0]]))  # final forward, first backward
        m = self.clause_encoder2(self.clause_encoder1(stack(vectors)))
        if self.clause_attention:
            m = attention(m)
        m = dropout(m, self.config.dropout_p, training, rng)
        return self.project(m)

    def loss(
        self,
        unit: tuple[Sequence[Sequence[str]], Sequence[bool]],
        training: bool = True,
        rng=None,
    ) -> Tensor:
        clause_token_lists, flags = unit
        y = [int(f) for f in flags]
        return crf.nll_loss(self.emissions(clause_token_lists, training, rng), y, self.crf)

    def predict(self, clause_token_lists: Sequence[Sequence[str]]) -> list[bool]:
        path, _ = crf.viterbi_decode(self.emissions(clause_token_lists), self.crf)
        return [bool(i) for i in path]


Model = SlModel | IccModel | JccModel


def _build_model(
    architecture: str,
    embeddings: EmbeddingTable,
    config: TrainConfig,
    rng: np.random.Generator,
    clause_attention: bool = True,
) -> Model:
    if architecture == "sl":
        return SlModel(embeddings, config, rng)
    if architecture == "icc":
        return IccModel(embeddings, config, rng)
    if architecture == "jcc":
        return JccModel(embeddings, config, rng, clause_attention)
    raise ValueError(f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}")


# ---------------------------------------------------------------------------
# Clause units


def clause_spans(instance: Instance) -> list[Span]:
    if not instance.clauses:
        raise ValueError(f"instance {instance.id!r} has no clause annotations")
    return [c.span for c in instance.clauses]


def clause_gold_flags(instance: Instance) -> list[bool]:
    """Gold clause flags derived from the token labels via the mapping."""
    return tokens_to_clauses(instance.iob, clause_spans(instance))


def clause_token_lists(instance: Instance) -> list[list[str]]:
    return [instance.tokens[sp.start : sp.end] for sp in clause_spans(instance)]


def _icc_units(instances: Sequence[Instance]) -> list[tuple[list[str], bool]]:
    units = []
    for inst in instances:
        flags = clause_gold_flags(inst)
        for toks, flag in zip(clause_token_lists(inst), flags):
            units.append((toks, flag))
    return units


def _jcc_units(instances: Sequence[Instance]) -> list[tuple[list[list[str]], list[bool]]]:
    return [(clause_token_lists(inst), clause_gold_flags(inst)) for inst in instances]


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainedModel:
    architecture: str
    model: Model
    config: TrainConfig
    history: list[dict]


def _state_dict(model: Model) -> dict[str, np.ndarray]:
    return {p.name: p.data.copy() for p in model.parameters()}


def _load_state(model: Model, state: dict[str, np.ndarray]) -> None:
    params = {p.name: p for p in model.parameters()}
    if set(params) != set(state):
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        raise ValueError(f"parameter name mismatch: missing {missing}, unexpected {extra}")
    for name, p in params.items():
        arr = np.asarray(state[name], dtype=np.float64)
        if arr.shape != p.data.shape:
            raise ValueError(
                f"parameter {name!r} has shape {arr.shape}, expected {p.data.shape}"
            )
        p.data = arr.copy()


def _dev_metric(model: Model, architecture: str, dev: Sequence[Instance], metric: str) -> float:
    if architecture == "sl":
        preds = [model.predict(inst.tokens) for inst in dev]
        golds = [inst.iob for inst in dev]
        if metric == "accuracy":
            correct = sum(p == g for ps, gs in zip(preds, golds) for p, g in zip(ps, gs))
            total = sum(len(g) for g in golds)
            return correct / total
        return span_prf(
            [iob_to_spans(p) for p in preds],
            [iob_to_spans(g) for g in golds],
            MatchMode.EXACT,
        ).f1
    gold_flags = [clause_gold_flags(inst) for inst in dev]
    if architecture == "icc":
        pred_flags = [
            [model.predict(toks) for toks in clause_token_lists(inst)] for inst in dev
        ]
    else:
        pred_flags = [model.predict(clause_token_lists(inst)) for inst in dev]
    if metric == "accuracy":
        correct = sum(p == g for ps, gs in zip(pred_flags, gold_flags) for p, g in zip(ps, gs))
        total = sum(len(g) for g in gold_flags)
        return correct / total
    return clause_prf(pred_flags, gold_flags).f1


def train(
    architecture: str,
    train_instances: Sequence[Instance],
    dev_instances: Sequence[Instance],
    embeddings: EmbeddingTable,
    config: TrainConfig,
    clause_attention: bool = True,
) -> TrainedModel:
    """Mini-batch Adam with early stopping on the dev selection metric.

    The returned model carries the parameters of the best dev epoch, not the
    last one.  Training stops once the metric has not improved for
    ``config.patience`` consecutive epochs.
    """
    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}")
    if not train_instances or not dev_instances:
        raise ValueError("train and dev splits must be non-empty")
    rng = np.random.default_rng(config.seed)
    model = _build_model(architecture, embeddings, config, rng, clause_attention)
    optimizer = Adam(model.parameters(), lr=config.learning_rate)
    if architecture == "sl":
        units: list = list(train_instances)
    elif architecture == "icc":
        units = _icc_units(train_instances)
    else:
        units = _jcc_units(train_instances)

    history: list[dict] = []
    best_metric = -np.inf
    best_state = _state_dict(model)
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(units))
        loss_sum = 0.0
        for offset in range(0, len(units), config.batch_size):
            batch = order[offset : offset + config.batch_size]
            losses = [model.loss(units[i], training=True, rng=rng) for i in batch]
            total = losses[0]
            for extra in losses[1:]:
                total = total + extra
            mean_loss = total * (1.0 / len(losses))
            optimizer.zero_grad()
            mean_loss.backward()
            optimizer.step()
            loss_sum += float(total.data)
        metric = _dev_metric(model, architecture, dev_instances, config.selection_metric)
        history.append(
            {"epoch": epoch, "train_loss": loss_sum / len(units), "dev_metric": metric}
        )
        if metric > best_metric:
            best_metric = metric
            best_state = _state_dict(model)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    _load_state(model, best_state)
    return TrainedModel(architecture, model, config, history)


# ---------------------------------------------------------------------------
# Prediction entry points


def _unwrap(model: TrainedModel | Model) -> Model:
    return model.model if isinstance(model, TrainedModel) else model


def sl_predict(model: TrainedModel | SlModel, instance: Instance | Sequence[str]) -> list[str]:
    tokens = instance.tokens if isinstance(instance, Instance) else instance
    return _unwrap(model).predict(tokens)


def icc_predict(model: TrainedModel | IccModel, clause_tokens: Sequence[str]) -> bool:
    return _unwrap(model).predict(list(clause_tokens))


def jcc_predict(model: TrainedModel | JccModel, instance: Instance) -> list[bool]:
    return _unwrap(model).predict(clause_token_lists(instance))


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(trained: TrainedModel, path: str | Path) -> None:
    model = trained.model
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": trained.architecture,
        "config": trained.config.to_dict(),
        "clause_attention": getattr(model, "clause_attention", True),
        "history": trained.history,
        "vocab": model.embeddings.tokens,
        "embedding": {
            "shape": list(model.embeddings.matrix.shape),
            "values": model.embeddings.matrix.ravel().tolist(),
        },
        "params": {
            p.name: {"shape": list(p.data.shape), "values": p.data.ravel().tolist()}
            for p in model.parameters()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> TrainedModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a model checkpoint (format header missing or wrong)")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    config = TrainConfig.from_dict(payload["config"])
    matrix = np.array(payload["embedding"]["values"], dtype=np.float64).reshape(
        payload["embedding"]["shape"]
    )
    embeddings = EmbeddingTable(payload["vocab"], matrix)
    model = _build_model(
        payload["architecture"],
        embeddings,
        config,
        np.random.default_rng(config.seed),
        payload.get("clause_attention", True),
    )
    state = {
        name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    _load_state(model, state)
    return TrainedModel(payload["architecture"], model, config, payload.get("history", []))
