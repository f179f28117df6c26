from __future__ import annotations

import numpy as np
import pytest

from _oracles import finite_difference, gradient_gap
from stimex.nn import (
    Adam,
    BiLstm,
    Linear,
    Lstm,
    Parameter,
    Tensor,
    attention,
    cross_entropy,
    dropout,
    glorot_uniform,
)


def test_glorot_bounds_and_determinism():
    a = glorot_uniform(np.random.default_rng(3), 10, 20)
    b = glorot_uniform(np.random.default_rng(3), 10, 20)
    assert np.array_equal(a, b)
    limit = np.sqrt(6.0 / 30)
    assert a.shape == (10, 20)
    assert np.all(np.abs(a) < limit)


# -- LSTM ----------------------------------------------------------------------


def test_lstm_zero_weights_fixed_point():
    cell = Lstm("z", 3, 2, np.random.default_rng(0))
    for p in cell.parameters():
        p.data[...] = 0.0
    states = cell.states(Tensor(np.ones((4, 3))))
    for h in states:
        assert np.allclose(h.data, 0.0)  # output gate 0.5 * tanh(0) = 0


def test_lstm_rejects_empty_sequence():
    cell = Lstm("z", 3, 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        cell.states(Tensor(np.zeros((0, 3))))


def test_lstm_state_shapes_and_order_dependence():
    cell = Lstm("c", 3, 5, np.random.default_rng(1))
    xs = np.random.default_rng(2).standard_normal((4, 3))
    fwd = cell.states(Tensor(xs))
    assert len(fwd) == 4 and all(h.shape == (5,) for h in fwd)
    swapped = cell.states(Tensor(xs[[1, 0, 2, 3]]))
    assert not np.allclose(fwd[3].data, swapped[3].data)


def test_bilstm_backward_equals_forward_on_reversed_input():
    rng = np.random.default_rng(7)
    bi = BiLstm("b", 3, 4, rng)
    for src, dst in zip(bi.fwd.parameters(), bi.bwd.parameters()):
        dst.data[...] = src.data
    xs = np.random.default_rng(8).standard_normal((5, 3))
    fwd_rev = bi.fwd.states(Tensor(xs[::-1].copy()))
    bwd = bi.bwd.states(Tensor(xs), reverse=True)
    for t in range(5):
        assert np.array_equal(bwd[t].data, fwd_rev[4 - t].data)


def test_bilstm_output_layout():
    bi = BiLstm("b", 3, 4, np.random.default_rng(0))
    xs = Tensor(np.random.default_rng(1).standard_normal((6, 3)))
    out = bi(xs)
    assert out.shape == (6, 8)
    f, b = bi.run(xs)
    assert np.array_equal(out.data[2, :4], f[2].data)
    assert np.array_equal(out.data[2, 4:], b[2].data)


def test_lstm_gradients():
    rng = np.random.default_rng(5)
    cell = Lstm("c", 2, 3, rng)
    xs = Tensor(rng.standard_normal((4, 2)))
    target = Tensor(rng.standard_normal(3))

    def loss():
        h = cell.states(xs)[-1]
        return ((h - target) * (h - target)).sum()

    loss().backward()
    numeric = finite_difference(loss, cell.parameters())
    analytic = {p.name: p.grad for p in cell.parameters()}
    assert gradient_gap(analytic, numeric) < 1e-6


# -- attention -----------------------------------------------------------------


def test_attention_matches_numpy_oracle():
    h = np.random.default_rng(3).standard_normal((4, 3))
    out = attention(Tensor(h)).data
    scores = h @ h.T
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    weights = e / e.sum(axis=1, keepdims=True)
    assert out.shape == (4, 6)
    assert np.allclose(out, np.concatenate([h, weights @ h], axis=1))


def test_attention_excluding_self():
    h = np.random.default_rng(4).standard_normal((3, 2))
    out = attention(Tensor(h), include_self=False).data
    scores = h @ h.T
    np.fill_diagonal(scores, -np.inf)
    e = np.exp(scores - scores.max(axis=1, keepdims=True))
    weights = e / e.sum(axis=1, keepdims=True)
    assert np.allclose(out[:, 2:], weights @ h)


def test_attention_single_row_context_is_input():
    h = np.array([[1.0, -2.0]])
    for include_self in (True, False):
        out = attention(Tensor(h), include_self=include_self).data
        assert np.allclose(out, [[1.0, -2.0, 1.0, -2.0]])


def test_attention_gradient():
    p = Parameter("h", np.random.default_rng(9).standard_normal((3, 2)))

    def loss():
        return attention(p).logsumexp()

    loss().backward()
    numeric = finite_difference(loss, [p])
    assert gradient_gap({"h": p.grad}, numeric) < 1e-6


# -- dropout -------------------------------------------------------------------


def test_dropout_identity_when_eval_or_zero():
    x = Tensor(np.ones((5, 5)))
    rng = np.random.default_rng(0)
    assert dropout(x, 0.5, training=False, rng=rng) is x
    assert dropout(x, 0.0, training=True, rng=rng) is x


def test_dropout_masks_and_rescales():
    x = Tensor(np.ones((2000,)))
    out = dropout(x, 0.25, training=True, rng=np.random.default_rng(1)).data
    kept = out[out != 0.0]
    assert np.allclose(kept, 1.0 / 0.75)
    assert abs(len(kept) / 2000 - 0.75) < 0.05
    assert abs(out.mean() - 1.0) < 0.05  # inverted scaling keeps expectation


def test_dropout_rejects_bad_probability():
    x = Tensor(np.ones(3))
    rng = np.random.default_rng(0)
    for p in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            dropout(x, p, training=True, rng=rng)


# -- linear / cross-entropy ------------------------------------------------------


def test_linear_shapes_and_grad():
    rng = np.random.default_rng(2)
    layer = Linear("l", 4, 3, rng)
    x = Tensor(rng.standard_normal((5, 4)))
    assert layer(x).shape == (5, 3)

    def loss():
        return layer(x).logsumexp()

    loss().backward()
    numeric = finite_difference(loss, layer.parameters())
    analytic = {p.name: p.grad for p in layer.parameters()}
    assert gradient_gap(analytic, numeric) < 1e-6


def test_cross_entropy_uniform_logits():
    logits = Tensor(np.zeros(4))
    assert cross_entropy(logits, 2).item() == pytest.approx(np.log(4.0))


def test_cross_entropy_peaked_is_small():
    logits = Tensor(np.array([20.0, 0.0, 0.0]))
    assert cross_entropy(logits, 0).item() < 1e-6


def test_cross_entropy_target_range():
    with pytest.raises(ValueError):
        cross_entropy(Tensor(np.zeros(3)), 3)
    with pytest.raises(ValueError):
        cross_entropy(Tensor(np.zeros(3)), -1)


# -- Adam ------------------------------------------------------------------------


def test_adam_zero_grad_then_step_is_identity():
    p = Parameter("p", np.array([1.0, -2.0]))
    opt = Adam([p], lr=0.1)
    opt.zero_grad()
    opt.step()
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_minimizes_quadratic():
    p = Parameter("p", np.array([5.0, -3.0]))
    target = np.array([1.0, 2.0])
    opt = Adam([p], lr=0.05)
    for _ in range(500):
        opt.zero_grad()
        diff = p - Tensor(target)
        (diff * diff).sum().backward()
        opt.step()
    assert np.allclose(p.data, target, atol=1e-3)


def test_adam_skips_non_trainable():
    frozen = Parameter("f", np.array([1.0]), trainable=False)
    opt = Adam([frozen], lr=0.5)
    frozen.grad = np.array([10.0])
    opt.step()
    assert np.array_equal(frozen.data, [1.0])


def test_adam_rejects_duplicate_names_and_bad_shapes():
    a = Parameter("x", np.zeros(2))
    with pytest.raises(ValueError):
        Adam([a, Parameter("x", np.zeros(3))])
    opt = Adam([a])
    a.grad = np.zeros(3)
    with pytest.raises(ValueError):
        opt.step()


def test_adam_first_step_size_is_lr():
    # With bias correction the very first update has magnitude ~lr per element.
    p = Parameter("p", np.zeros(3))
    opt = Adam([p], lr=0.01)
    p.grad = np.array([1.0, -2.0, 0.5])
    opt.step()
    assert np.allclose(np.abs(p.data), 0.01, atol=1e-6)
