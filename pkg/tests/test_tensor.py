"""Autodiff engine, optimizer, and gradient-check harness tests."""

import numpy as np
import pytest

from qatip import tensor as T
from qatip.gradcheck import finite_difference, rel_error, run_op_checks
from qatip.optim import Adam, clip_global_norm
from qatip.tensor import ParamStore, Tensor, backward, no_grad


def test_sigmoid_at_zero():
    out = T.sigmoid(Tensor(np.zeros((2, 3))))
    assert np.allclose(out.data, 0.5)


def test_sigmoid_extreme_inputs_stable():
    out = T.sigmoid(Tensor(np.array([-1e4, 1e4], dtype=np.float64)))
    assert np.all(np.isfinite(out.data))
    assert out.data[0] == 0.0 and out.data[1] == 1.0


def test_softmax_uniform_row():
    out = T.softmax_rows(Tensor(np.zeros((1, 4))))
    assert np.allclose(out.data, 0.25)
    assert np.allclose(out.data.sum(axis=-1), 1.0)


def test_softmax_masked_entries_exactly_zero():
    x = Tensor(np.random.default_rng(0).standard_normal((2, 3, 5)))
    mask = np.ones((2, 3, 5), dtype=bool)
    mask[..., 3:] = False
    out = T.softmax_rows(x, mask=mask)
    assert np.all(out.data[..., 3:] == 0.0)
    assert np.allclose(out.data.sum(axis=-1), 1.0, atol=1e-6)


def test_softmax_fully_masked_row_rejected():
    x = Tensor(np.zeros((2, 4)))
    mask = np.ones((2, 4), dtype=bool)
    mask[1] = False
    with pytest.raises(ValueError, match="fully masked"):
        T.softmax_rows(x, mask=mask)


def test_layer_norm_constant_row_collapses_to_bias():
    x = Tensor(np.full((3, 8), 2.5))
    gain = Tensor(np.ones(8))
    bias = Tensor(np.zeros(8))
    out = T.layer_norm(x, gain, bias)
    assert np.all(np.abs(out.data) < 1e-3)


def test_layer_norm_statistics():
    rng = np.random.default_rng(1)
    x = Tensor(rng.standard_normal((4, 6)) * 3 + 1, dtype=np.float64)
    out = T.layer_norm(x, Tensor(np.ones(6), dtype=np.float64), Tensor(np.zeros(6), dtype=np.float64))
    assert np.allclose(out.data.mean(axis=-1), 0.0, atol=1e-6)
    assert np.allclose(out.data.var(axis=-1), 1.0, atol=1e-3)


def test_nll_uniform_logits_is_log_vocab():
    # flat distribution over V classes scores -log(1/V) per step
    logits = Tensor(np.zeros((2, 3, 4)))
    targets = np.array([[0, 1, 2], [3, 0, 1]])
    loss = T.nll_loss(logits, targets)
    assert abs(loss.item() - np.log(4.0)) < 1e-6


def test_nll_respects_pad_mask():
    rng = np.random.default_rng(2)
    logits = rng.standard_normal((2, 4, 5))
    targets = rng.integers(0, 5, size=(2, 4))
    mask = np.array([[1, 1, 0, 0], [1, 1, 1, 0]])
    loss = T.nll_loss(Tensor(logits), targets, pad_mask=mask).item()

    # hand computation, per sequence mean over counted steps then batch mean
    def seq_loss(row, tgt, m):
        ls = row - (np.log(np.exp(row - row.max(-1, keepdims=True)).sum(-1, keepdims=True)) + row.max(-1, keepdims=True))
        vals = [-ls[t, tgt[t]] for t in range(len(tgt)) if m[t]]
        return np.mean(vals)

    expected = np.mean([seq_loss(logits[b], targets[b], mask[b]) for b in range(2)])
    assert abs(loss - expected) < 1e-6


def test_nll_all_masked_sequence_rejected():
    logits = Tensor(np.zeros((2, 3, 4)))
    targets = np.zeros((2, 3), dtype=np.int64)
    mask = np.array([[1, 1, 1], [0, 0, 0]])
    with pytest.raises(ValueError, match="masked"):
        T.nll_loss(logits, targets, pad_mask=mask)


def test_nll_target_out_of_range_rejected():
    with pytest.raises(ValueError, match="out of range"):
        T.nll_loss(Tensor(np.zeros((1, 2, 3))), np.array([[0, 5]]))


def test_matmul_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="mismatch"):
        T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))


def test_mixed_dtype_rejected():
    a = Tensor(np.zeros((2, 2)), dtype=np.float32)
    b = Tensor(np.zeros((2, 2)), dtype=np.float64)
    with pytest.raises(TypeError, match="mixed"):
        T.add(a, b)


def test_embedding_lookup_gathers_rows():
    table = Tensor(np.arange(12, dtype=np.float32).reshape(4, 3))
    out = T.embedding_lookup(table, np.array([[0, 2], [3, 3]]))
    assert out.data.shape == (2, 2, 3)
    assert np.allclose(out.data[0, 1], [6, 7, 8])
    with pytest.raises(ValueError, match="out of range"):
        T.embedding_lookup(table, np.array([4]))


def test_embedding_grad_accumulates_repeated_ids():
    table = Tensor(np.zeros((3, 2)), requires_grad=True)
    out = T.embedding_lookup(table, np.array([1, 1, 2]))
    backward(T.sum_all(out))
    assert np.allclose(table.grad[1], [2, 2])
    assert np.allclose(table.grad[2], [1, 1])
    assert np.allclose(table.grad[0], [0, 0])


def test_backward_requires_scalar():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        backward(T.scale(x, 2.0))


def test_backward_twice_doubles_grads():
    x = Tensor(np.array([[1.0, -2.0], [0.5, 3.0]]), requires_grad=True)

    def loss():
        return T.mean_all(T.mul(T.tanh(x), T.tanh(x)))

    backward(loss())
    first = x.grad.copy()
    backward(loss())
    assert np.allclose(x.grad, 2.0 * first)


def test_backward_linearity():
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((3, 3)), requires_grad=True, dtype=np.float64)
    w = Tensor(rng.standard_normal((3, 3)), dtype=np.float64)

    def f():
        return T.sum_all(T.matmul(x, w))

    def g():
        return T.mean_all(T.sigmoid(x))

    x.zero_grad()
    backward(f())
    gf = x.grad.copy()
    x.zero_grad()
    backward(g())
    gg = x.grad.copy()
    x.zero_grad()
    combo = T.add(T.scale(f(), 2.0), T.scale(g(), -3.0))
    backward(combo)
    assert np.abs(x.grad - (2.0 * gf - 3.0 * gg)).max() < 1e-6


def test_grad_flows_through_shared_input():
    x = Tensor(np.array([[2.0]]), requires_grad=True)
    y = T.mul(x, x)  # same tensor on both sides
    backward(T.sum_all(y))
    assert np.allclose(x.grad, [[4.0]])


def test_no_grad_blocks_tape():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with no_grad():
        y = T.sigmoid(T.matmul(x, x))
    assert not y.requires_grad
    with pytest.raises(ValueError):
        backward(T.sum_all(y))


def test_intermediate_tensors_receive_grads():
    x = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    h = T.tanh(x)
    loss = T.sum_all(h)
    backward(loss)
    assert h.grad is not None
    assert np.allclose(h.grad, 1.0)


def test_dropout_identity_at_zero_rate():
    x = Tensor(np.ones((4, 4)), requires_grad=True)
    assert T.dropout(x, 0.0) is x


def test_dropout_scales_kept_values():
    x = Tensor(np.ones((2, 3)))
    keep = np.array([[True, False, True], [False, True, True]])
    out = T.dropout(x, 0.5, mask=keep)
    assert np.allclose(out.data[keep], 2.0)
    assert np.all(out.data[~keep] == 0.0)


def test_dropout_needs_randomness_source():
    with pytest.raises(ValueError, match="rng"):
        T.dropout(Tensor(np.ones(3)), 0.5)


def test_unbroadcast_bias_grad():
    x = Tensor(np.zeros((4, 3)), requires_grad=True)
    b = Tensor(np.zeros(3), requires_grad=True)
    backward(T.sum_all(T.add(x, b)))
    assert b.grad.shape == (3,)
    assert np.allclose(b.grad, 4.0)


def test_finite_difference_matches_analytic_quadratic():
    # d/dx sum(x^2) = 2x, a case solvable by hand
    x = Tensor(np.array([[1.0, -2.0, 0.5]]), requires_grad=True, dtype=np.float64)

    def build():
        return T.sum_all(T.mul(x, x))

    backward(build())
    fd = finite_difference(lambda: float(build().data), x)
    assert rel_error(x.grad, fd) < 1e-8
    assert np.allclose(fd, 2 * x.data, atol=1e-6)


def test_op_gradient_checks_pass():
    results = run_op_checks(repeats=3, seed=4242)
    failing = [r for r in results if not r.passed]
    assert not failing, "\n".join(f"{r.name}: {r.max_err:.2e}" for r in failing)


def test_adam_first_step_moves_by_lr():
    # bias-corrected first step: delta = -lr * g / (|g| + eps)
    p = Tensor(np.array([1.0], dtype=np.float64), requires_grad=True)
    p.grad = np.array([1.0], dtype=np.float64)
    opt = Adam([p], lr=0.001)
    opt.step()
    assert abs(p.data[0] - (1.0 - 0.001 / (1.0 + 1e-8))) < 1e-12
    assert abs(p.data[0] - 0.999000000010) < 1e-11


def test_adam_step_size_invariant_to_gradient_scale():
    deltas = []
    for g in (10.0, 0.1):
        p = Tensor(np.array([0.0], dtype=np.float64), requires_grad=True)
        p.grad = np.array([g], dtype=np.float64)
        Adam([p], lr=0.001).step()
        deltas.append(abs(p.data[0]))
    assert abs(deltas[0] - deltas[1]) < 1e-9


def test_adam_none_grad_treated_as_zero():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    opt = Adam([p])
    opt.step()
    assert np.allclose(p.data, [1.0, 2.0])


def test_adam_descends_quadratic():
    p = Tensor(np.array([5.0], dtype=np.float64), requires_grad=True)
    opt = Adam([p], lr=0.05)
    for _ in range(500):
        opt.zero_grad()
        backward(T.sum_all(T.mul(p, p)))
        opt.step()
    assert abs(p.data[0]) < 1e-2


def test_clip_global_norm_reports_and_scales():
    a = Tensor(np.zeros(1), requires_grad=True)
    b = Tensor(np.zeros(1), requires_grad=True)
    a.grad = np.array([6.0])
    b.grad = np.array([8.0])
    norm = clip_global_norm([a, b], max_norm=5.0)
    assert abs(norm - 10.0) < 1e-6
    clipped = np.sqrt(a.grad[0] ** 2 + b.grad[0] ** 2)
    assert abs(clipped - 5.0) < 1e-6


def test_clip_global_norm_no_op_below_threshold():
    a = Tensor(np.zeros(2), requires_grad=True)
    a.grad = np.array([3.0, 4.0])
    norm = clip_global_norm([a], max_norm=5.0)
    assert abs(norm - 5.0) < 1e-12
    assert np.allclose(a.grad, [3.0, 4.0])


def test_param_store_glorot_bounds_and_names():
    store = ParamStore(np.random.default_rng(0))
    w = store.glorot("w", (10, 20))
    limit = np.sqrt(6.0 / 30.0)
    assert np.all(np.abs(w.data) <= limit)
    assert w.requires_grad
    with pytest.raises(ValueError, match="duplicate"):
        store.glorot("w", (2, 2))
    assert store.names() == ["w"]


def test_param_store_lstm_bias_layout():
    store = ParamStore(np.random.default_rng(0))
    b = store.lstm_bias("b", 4)
    assert np.allclose(b.data[:4], 0.0)
    assert np.allclose(b.data[4:8], 1.0)
    assert np.allclose(b.data[8:], 0.0)
