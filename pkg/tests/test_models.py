from __future__ import annotations

import numpy as np
import pytest

from stimex.corpus import (
    ClauseAnnotation,
    Instance,
    Span,
    generate_synthetic,
    iob_to_spans,
)
from stimex.models import (
    EmbeddingTable,
    IccModel,
    JccModel,
    SlModel,
    TrainConfig,
    clause_gold_flags,
    clause_spans,
    clause_token_lists,
    icc_predict,
    jcc_predict,
    load_checkpoint,
    save_checkpoint,
    sl_predict,
    train,
    vocabulary,
)

TOY = TrainConfig(embedding_dim=8, hidden_dim=6, dropout_p=0.0, max_epochs=2, patience=1)


def toy_corpus(n=12, seed=0):
    return generate_synthetic(n, seed=seed)


def toy_embeddings(instances, dim=8, seed=0):
    return EmbeddingTable.random(vocabulary(instances), dim, seed)


# -- configuration ---------------------------------------------------------------


def test_config_defaults():
    cfg = TrainConfig()
    assert cfg.learning_rate == 0.003
    assert cfg.batch_size == 10
    assert cfg.dropout_p == 0.5
    assert cfg.max_epochs == 50
    assert cfg.patience == 10
    assert cfg.embedding_dim == 300
    assert cfg.hidden_dim == 100
    assert cfg.selection_metric == "accuracy"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"learning_rate": 0.0},
        {"batch_size": 0},
        {"dropout_p": 1.0},
        {"dropout_p": -0.1},
        {"max_epochs": 0},
        {"patience": 0},
        {"patience": 51},
        {"hidden_dim": 0},
        {"selection_metric": "loss"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_config_round_trip_and_unknown_key():
    cfg = TrainConfig(hidden_dim=7, selection_metric="f1")
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"hidden": 3})


# -- embeddings ---------------------------------------------------------------------


def test_embedding_lookup_and_oov():
    table = EmbeddingTable(["a", "b"], np.array([[1.0, 2.0], [3.0, 4.0]]))
    out = table.lookup(["b", "zzz", "a"]).data
    assert np.array_equal(out, [[3.0, 4.0], [0.0, 0.0], [1.0, 2.0]])
    with pytest.raises(ValueError):
        table.lookup([])


def test_embedding_rejects_bad_shapes_and_duplicates():
    with pytest.raises(ValueError):
        EmbeddingTable(["a"], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        EmbeddingTable(["a", "a"], np.zeros((2, 3)))


def test_embedding_load_text(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("hello 1 2 3\nworld 4 5 6\n\n", encoding="utf-8")
    table = EmbeddingTable.load_text(path)
    assert table.tokens == ["hello", "world"]
    assert table.dim == 3
    assert np.array_equal(table.lookup(["world"]).data, [[4.0, 5.0, 6.0]])


def test_embedding_load_text_errors(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("a 1 2\nb 3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="line 2"):
        EmbeddingTable.load_text(path)
    path.write_text("a 1 x\n", encoding="utf-8")
    with pytest.raises(ValueError, match="non-numeric"):
        EmbeddingTable.load_text(path)
    path.write_text("", encoding="utf-8")
    with pytest.raises(ValueError, match="empty"):
        EmbeddingTable.load_text(path)


def test_embedding_random_is_deterministic():
    a = EmbeddingTable.random(["x", "y", "x"], 4, seed=2)
    b = EmbeddingTable.random(["x", "y"], 4, seed=2)
    assert a.tokens == ["x", "y"]
    assert np.array_equal(a.matrix, b.matrix)


def test_vocabulary_first_seen_order():
    insts = [
        Instance("a", "d", ["the", "cat"], ["O", "O"]),
        Instance("b", "d", ["cat", "sat"], ["O", "O"]),
    ]
    assert vocabulary(insts) == ["the", "cat", "sat"]


# -- clause units ---------------------------------------------------------------------


def clause_instance():
    inst = Instance(
        "c1",
        "d",
        ["I", "cried", "because", "he", "left", "."],
        ["O", "O", "B", "I", "I", "O"],
    )
    inst.clauses = [
        ClauseAnnotation(Span(0, 2), False),
        ClauseAnnotation(Span(2, 5), True),
        ClauseAnnotation(Span(5, 6), False),
    ]
    return inst


def test_clause_unit_helpers():
    inst = clause_instance()
    assert clause_spans(inst) == [Span(0, 2), Span(2, 5), Span(5, 6)]
    assert clause_gold_flags(inst) == [False, True, False]
    assert clause_token_lists(inst) == [["I", "cried"], ["because", "he", "left"], ["."]]


def test_clause_flags_follow_token_labels_not_annotation():
    inst = clause_instance()
    inst.iob = ["B", "I", "O", "O", "O", "O"]  # stimulus moved to the first clause
    assert clause_gold_flags(inst) == [True, False, False]


def test_clause_helpers_require_annotations():
    bare = Instance("x", "d", ["a"], ["O"])
    with pytest.raises(ValueError, match="'x'"):
        clause_spans(bare)


# -- model shapes ------------------------------------------------------------------------


def test_sl_emission_shape_and_prediction_labels():
    corpus = toy_corpus()
    model = SlModel(toy_embeddings(corpus), TOY, np.random.default_rng(0))
    tokens = corpus[0].tokens
    assert model.emissions(tokens).shape == (len(tokens), 3)
    pred = model.predict(tokens)
    assert len(pred) == len(tokens)
    assert set(pred) <= {"B", "I", "O"}


def test_icc_logits_and_probability():
    corpus = toy_corpus()
    model = IccModel(toy_embeddings(corpus), TOY, np.random.default_rng(0))
    logits = model.logits(["because", "he", "left"])
    assert logits.shape == (2,)
    probs = model.probabilities(["because", "he", "left"])
    assert probs.shape == (2,) and probs.sum() == pytest.approx(1.0)
    assert isinstance(model.predict(["because"]), bool)


def test_jcc_emissions_and_prediction():
    corpus = toy_corpus()
    model = JccModel(toy_embeddings(corpus), TOY, np.random.default_rng(0))
    clauses = [["I", "cried"], ["because", "he", "left"], ["."]]
    assert model.emissions(clauses).shape == (3, 2)
    flags = model.predict(clauses)
    assert len(flags) == 3 and all(isinstance(f, bool) for f in flags)
    with pytest.raises(ValueError):
        model.emissions([])


def test_jcc_without_clause_attention_changes_projection():
    corpus = toy_corpus()
    narrow = JccModel(
        toy_embeddings(corpus), TOY, np.random.default_rng(0), clause_attention=False
    )
    assert narrow.project.weight.data.shape == (2 * TOY.hidden_dim, 2)
    assert narrow.emissions([["a"], ["b"]]).shape == (2, 2)


def test_jcc_single_clause_decodes_by_local_score():
    corpus = toy_corpus()
    model = JccModel(toy_embeddings(corpus), TOY, np.random.default_rng(1))
    u = model.emissions([["because", "he", "left"]]).data
    expected = np.argmax(u[0] + model.crf.start_scores.data + model.crf.end_scores.data)
    assert model.predict([["because", "he", "left"]]) == [bool(expected)]


def test_jcc_is_sensitive_to_clause_order():
    corpus = toy_corpus()
    model = JccModel(toy_embeddings(corpus), TOY, np.random.default_rng(2))
    a = model.emissions([["happy"], ["because", "he", "left"]]).data
    b = model.emissions([["because", "he", "left"], ["happy"]]).data
    assert not np.allclose(a, b[::-1])  # clause context matters, not just content


# -- training ----------------------------------------------------------------------------


def overfit_config(**kwargs):
    base = dict(
        embedding_dim=16,
        hidden_dim=12,
        dropout_p=0.0,
        learning_rate=0.05,
        batch_size=4,
        max_epochs=60,
        patience=60,
        selection_metric="f1",
    )
    base.update(kwargs)
    return TrainConfig(**base)


def test_train_rejects_bad_input():
    corpus = toy_corpus()
    emb = toy_embeddings(corpus)
    with pytest.raises(ValueError, match="architecture"):
        train("mlp", corpus, corpus, emb, TOY)
    with pytest.raises(ValueError, match="non-empty"):
        train("sl", [], corpus, emb, TOY)


def test_sl_overfits_small_corpus():
    corpus = toy_corpus(8, seed=3)
    trained = train("sl", corpus, corpus, toy_embeddings(corpus, 16), overfit_config())
    assert max(h["dev_metric"] for h in trained.history) == pytest.approx(1.0)
    for inst in corpus:
        assert iob_to_spans(sl_predict(trained, inst)) == iob_to_spans(inst.iob)


def test_icc_overfits_small_corpus():
    corpus = toy_corpus(8, seed=4)
    trained = train("icc", corpus, corpus, toy_embeddings(corpus, 16), overfit_config())
    for inst in corpus:
        for toks, flag in zip(clause_token_lists(inst), clause_gold_flags(inst)):
            assert icc_predict(trained, toks) == flag


def test_jcc_overfits_small_corpus():
    corpus = toy_corpus(8, seed=5)
    trained = train("jcc", corpus, corpus, toy_embeddings(corpus, 16), overfit_config())
    for inst in corpus:
        assert jcc_predict(trained, inst) == clause_gold_flags(inst)


def test_training_is_deterministic():
    corpus = toy_corpus(10, seed=6)
    emb = toy_embeddings(corpus, 8)
    cfg = TrainConfig(
        embedding_dim=8, hidden_dim=6, max_epochs=3, patience=3, dropout_p=0.5
    )
    a = train("sl", corpus, corpus, emb, cfg)
    b = train("sl", corpus, corpus, emb, cfg)
    assert a.history == b.history
    for pa, pb in zip(a.model.parameters(), b.model.parameters()):
        assert np.array_equal(pa.data, pb.data)


def test_history_and_early_stopping():
    corpus = toy_corpus(10, seed=7)
    cfg = TrainConfig(
        embedding_dim=8, hidden_dim=6, dropout_p=0.0, max_epochs=30, patience=2
    )
    trained = train("sl", corpus, corpus, toy_embeddings(corpus, 8), cfg)
    epochs = [h["epoch"] for h in trained.history]
    assert epochs == list(range(1, len(epochs) + 1))
    assert len(epochs) <= 30
    metrics = [h["dev_metric"] for h in trained.history]
    best = max(metrics)
    # stopped only after `patience` epochs without improvement, unless max was hit
    if len(epochs) < 30:
        assert all(m <= best for m in metrics[-2:])
    # restored parameters reproduce the best dev metric
    preds = [sl_predict(trained, inst) for inst in corpus]
    correct = sum(p == g for ps, inst in zip(preds, corpus) for p, g in zip(ps, inst.iob))
    total = sum(len(inst.tokens) for inst in corpus)
    assert correct / total == pytest.approx(best)


def test_loss_decreases_early_in_training():
    corpus = toy_corpus(24, seed=8)
    cfg = TrainConfig(embedding_dim=16, hidden_dim=8, max_epochs=5, patience=5)
    trained = train("sl", corpus, corpus, toy_embeddings(corpus, 16), cfg)
    losses = [h["train_loss"] for h in trained.history]
    assert losses[-1] < losses[0]


def test_prediction_is_deterministic_after_training():
    corpus = toy_corpus(8, seed=9)
    trained = train(
        "sl",
        corpus,
        corpus,
        toy_embeddings(corpus, 8),
        TrainConfig(embedding_dim=8, hidden_dim=6, max_epochs=2, patience=2),
    )
    first = [sl_predict(trained, inst) for inst in corpus]
    second = [sl_predict(trained, inst) for inst in corpus]
    assert first == second


# -- checkpoints ----------------------------------------------------------------------------


@pytest.mark.parametrize("arch", ["sl", "icc", "jcc"])
def test_checkpoint_round_trip(arch, tmp_path):
    corpus = toy_corpus(8, seed=10)
    cfg = TrainConfig(embedding_dim=8, hidden_dim=6, max_epochs=2, patience=2)
    trained = train(arch, corpus, corpus, toy_embeddings(corpus, 8), cfg)
    path = tmp_path / "model.json"
    save_checkpoint(trained, path)
    loaded = load_checkpoint(path)
    assert loaded.architecture == arch
    assert loaded.config == cfg
    assert loaded.history == trained.history
    for pa, pb in zip(trained.model.parameters(), loaded.model.parameters()):
        assert pa.name == pb.name
        assert np.array_equal(pa.data, pb.data)
    inst = corpus[0]
    if arch == "sl":
        assert sl_predict(loaded, inst) == sl_predict(trained, inst)
    elif arch == "icc":
        toks = clause_token_lists(inst)[0]
        assert icc_predict(loaded, toks) == icc_predict(trained, toks)
    else:
        assert jcc_predict(loaded, inst) == jcc_predict(trained, inst)


def test_checkpoint_preserves_clause_attention_flag(tmp_path):
    corpus = toy_corpus(8, seed=11)
    cfg = TrainConfig(embedding_dim=8, hidden_dim=6, max_epochs=1, patience=1)
    trained = train(
        "jcc", corpus, corpus, toy_embeddings(corpus, 8), cfg, clause_attention=False
    )
    path = tmp_path / "m.json"
    save_checkpoint(trained, path)
    assert load_checkpoint(path).model.clause_attention is False


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"hello": 1}', encoding="utf-8")
    with pytest.raises(ValueError, match="format"):
        load_checkpoint(path)
    path.write_text(
        '{"format": "stimex-checkpoint", "version": 99}',
        encoding="utf-8",
    )
    with pytest.raises(ValueError, match="version"):
        load_checkpoint(path)
