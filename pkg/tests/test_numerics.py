import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import adam_reference, naive_conv2d, naive_maxpool, softmax_reference

from glitchkit.errors import TapeError, UsageError
from glitchkit.numerics import (
    AdamState,
    Tape,
    Tensor,
    adam_step,
    backward,
    batchnorm2d,
    conv2d,
    cross_entropy_loss,
    linear,
    maxpool2d,
    relu,
    softmax,
)
from glitchkit.numerics.gradcheck import check_function, numeric_gradient, op_checks, relative_error


def _grads(fn, *arrays):
    ts = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    with Tape() as tape:
        out = fn(*ts)
    g = backward(tape, out)
    return out, [g.get(t) for t in ts]


# conv2d

def test_conv_all_ones_kernel_center_is_45():
    x = Tensor(np.arange(1, 10, dtype=np.float32).reshape(1, 1, 3, 3))
    y = conv2d(x, Tensor(np.ones((1, 1, 3, 3), np.float32)), None, 1, 1)
    assert y.data[0, 0, 1, 1] == 45.0


def test_conv_identity_kernel(rng):
    x = rng.standard_normal((2, 3, 5, 6)).astype(np.float32)
    w = np.zeros((3, 3, 3, 3), np.float32)
    for c in range(3):
        w[c, c, 1, 1] = 1
    assert np.array_equal(conv2d(Tensor(x), Tensor(w), None).data, x)


def test_conv_matches_loop_oracle_1x2x5x5(rng):
    x = rng.standard_normal((1, 2, 5, 5)).astype(np.float32)
    w = rng.standard_normal((3, 2, 3, 3)).astype(np.float32)
    b = rng.standard_normal(3).astype(np.float32)
    got = conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    assert np.max(np.abs(got - naive_conv2d(x, w, b))) <= 1e-5


@pytest.mark.parametrize("stride,padding", [(1, 0), (2, 1), (2, 0), (3, 2)])
def test_conv_stride_padding_vs_oracle(rng, stride, padding):
    x = rng.standard_normal((2, 2, 7, 8)).astype(np.float32)
    w = rng.standard_normal((2, 2, 3, 3)).astype(np.float32)
    if (7 + 2 * padding - 3) % stride or (8 + 2 * padding - 3) % stride:
        with pytest.raises(UsageError):
            conv2d(Tensor(x), Tensor(w), None, stride, padding)
        return
    got = conv2d(Tensor(x), Tensor(w), None, stride, padding).data
    assert np.allclose(got, naive_conv2d(x, w, None, stride, padding), atol=1e-5)


def test_conv_channel_mismatch_errors():
    with pytest.raises(UsageError):
        conv2d(Tensor(np.zeros((1, 2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))))


# batchnorm

def test_batchnorm_training_normalizes(rng):
    x = Tensor(rng.standard_normal((4, 3, 5, 5)) * 3 + 2)
    rm, rv = Tensor(np.zeros(3)), Tensor(np.ones(3))
    y = batchnorm2d(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), rm, rv, training=True).data
    assert np.all(np.abs(y.mean(axis=(0, 2, 3))) < 1e-4)
    assert np.all(np.abs(y.var(axis=(0, 2, 3)) - 1) < 1e-3)


def test_batchnorm_constant_channel_is_zero():
    x = Tensor(np.full((2, 1, 3, 3), 7.0, np.float32))
    y = batchnorm2d(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), Tensor(np.zeros(1)), Tensor(np.ones(1)), True)
    assert np.all(y.data == 0) and np.all(np.isfinite(y.data))


def test_batchnorm_inference_affine(rng):
    x = rng.standard_normal((2, 2, 3, 3)).astype(np.float32)
    y = batchnorm2d(Tensor(x), Tensor(np.full(2, 2.0)), Tensor(np.full(2, 3.0)),
                    Tensor(np.zeros(2)), Tensor(np.ones(2)), training=False).data
    # running_var 1 plus eps 1e-5 in the denominator
    assert np.allclose(y, 2 * x / np.sqrt(1 + 1e-5) + 3, atol=1e-5)


def test_batchnorm_running_stats_update(rng):
    x = rng.standard_normal((3, 2, 4, 4)) + 5
    rm, rv = Tensor(np.zeros(2), dtype=np.float64), Tensor(np.ones(2), dtype=np.float64)
    batchnorm2d(Tensor(x, dtype=np.float64), Tensor(np.ones(2), dtype=np.float64),
                Tensor(np.zeros(2), dtype=np.float64), rm, rv, training=True)
    mu = x.mean(axis=(0, 2, 3))
    var_unbiased = x.var(axis=(0, 2, 3), ddof=1)
    assert np.allclose(rm.data, 0.1 * mu)
    assert np.allclose(rv.data, 0.9 + 0.1 * var_unbiased)
    assert np.all(rv.data >= 0)


def test_batchnorm_channel_mismatch():
    with pytest.raises(UsageError):
        batchnorm2d(Tensor(np.zeros((1, 2, 2, 2))), Tensor(np.ones(3)), Tensor(np.zeros(3)),
                    Tensor(np.zeros(3)), Tensor(np.ones(3)), training=False)


# maxpool

def test_maxpool_basic():
    assert maxpool2d(Tensor(np.array([[[[1.0, 2], [3, 4]]]])), 2, 2).data.item() == 4


def test_maxpool_constant():
    y = maxpool2d(Tensor(np.full((1, 2, 4, 6), 3.5)), 2, 2).data
    assert y.shape == (1, 2, 2, 3) and np.all(y == 3.5)


def test_maxpool_vs_window_scan(rng):
    x = rng.standard_normal((1, 1, 4, 4)).astype(np.float32)
    ref, _ = naive_maxpool(x)
    assert np.array_equal(maxpool2d(Tensor(x), 2, 2).data, ref)


def test_maxpool_ties_route_to_first_in_scan_order():
    x = Tensor(np.array([[[[5.0, 5.0], [5.0, 5.0]]]]), requires_grad=True, dtype=np.float64)
    with Tape() as tape:
        s = maxpool2d(x, 2, 2).sum()
    g = backward(tape, s)[x]
    assert g[0, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_maxpool_indivisible_errors():
    with pytest.raises(UsageError):
        maxpool2d(Tensor(np.zeros((1, 1, 3, 4))), 2, 2)


# linear, relu, softmax, loss

def test_linear_identity_and_hand_value():
    x = np.array([[1.0, -2.0, 3.0]])
    assert np.array_equal(linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3))).data, x)
    y = linear(Tensor(np.array([[2.0, 3.0]])), Tensor(np.array([[1.0, 1.0]])), Tensor(np.array([0.5])))
    assert y.data.tolist() == [[5.5]]


def test_linear_shape_mismatch():
    with pytest.raises(UsageError):
        linear(Tensor(np.zeros((1, 3))), Tensor(np.zeros((2, 4))))


def test_linear_gradient_vs_central_differences(rng):
    res = check_function("linear", linear, [rng.standard_normal((3, 4)), rng.standard_normal((5, 4)),
                                            rng.standard_normal(5)], rng, 0)
    assert res.max_rel_error < 1e-3


def test_relu_values_and_zero_gradient():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True, dtype=np.float64)
    with Tape() as tape:
        y = relu(x)
        s = y.sum()
    assert y.data.tolist() == [0, 0, 2]
    assert backward(tape, s)[x].tolist() == [0, 0, 1]


def test_relu_all_negative():
    y, (g,) = _grads(lambda t: relu(t).sum(), -np.arange(1, 6, dtype=np.float64))
    assert not np.any(g)


def test_softmax_examples():
    assert np.allclose(softmax(Tensor(np.array([[0.0, 0.0]]))).data, 0.5)
    big = softmax(Tensor(np.array([[1000.0, 1000.0]], np.float32))).data
    assert np.all(np.isfinite(big)) and np.allclose(big, 0.5)
    assert np.allclose(softmax(Tensor(np.array([[1.0, 2.0]]))).data, [[0.26894, 0.73106]], atol=1e-4)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6), st.floats(-100, 100))
def test_softmax_rows_sum_to_one_and_shift_invariant(row, shift):
    a = softmax(Tensor(np.array([row]), dtype=np.float64)).data[0]
    b = softmax(Tensor(np.array([row]) + shift, dtype=np.float64)).data[0]
    assert abs(a.sum() - 1) < 1e-6 and np.all(a >= 0)
    assert np.max(np.abs(a - b)) < 1e-6
    assert np.allclose(a, softmax_reference(row), atol=1e-9)


def test_cross_entropy_examples():
    assert abs(cross_entropy_loss(Tensor(np.array([[0.0, 0.0]])), [0]).item() - math.log(2)) < 1e-6
    assert cross_entropy_loss(Tensor(np.array([[10.0, -10.0]])), [0]).item() < 1e-4
    with pytest.raises(UsageError):
        cross_entropy_loss(Tensor(np.zeros((1, 2))), [2])


def test_cross_entropy_gradient_is_softmax_minus_onehot(rng):
    z = rng.standard_normal((2, 2))
    _, (g,) = _grads(lambda t: cross_entropy_loss(t, [1, 0]), z)
    p = np.array([softmax_reference(r) for r in z])
    p[0, 1] -= 1
    p[1, 0] -= 1
    assert np.allclose(g, p / 2)
    assert relative_error(g.reshape(-1), numeric_gradient(
        lambda: float(cross_entropy_loss(Tensor(z, dtype=np.float64), [1, 0]).data), z)) < 1e-3


# autodiff

def test_backward_sum_and_square():
    _, (g,) = _grads(lambda t: t.sum(), np.zeros(4))
    assert g.tolist() == [1, 1, 1, 1]
    _, (g,) = _grads(lambda t: (t * t).sum(), np.array([1.0, 2.0]))
    assert g.tolist() == [2, 4]


def test_backward_nonscalar_and_reuse_errors():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        y = x * 2
    with pytest.raises(UsageError):
        backward(tape, y)
    with Tape() as tape:
        s = (x * 2).sum()
    backward(tape, s)
    with pytest.raises(TapeError):
        backward(tape, s)


def test_ops_are_bitwise_deterministic(rng):
    x = rng.standard_normal((2, 3, 8, 8)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    a = conv2d(Tensor(x), Tensor(w)).data
    b = conv2d(Tensor(x), Tensor(w)).data
    assert a.tobytes() == b.tobytes()


def test_all_op_gradchecks_pass():
    results = op_checks(seed=11, instances=2)
    bad = [r.line() for r in results if not r.passed]
    assert not bad, bad


# adam

def test_adam_zero_gradient_keeps_params():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    st_ = AdamState()
    adam_step([p], [np.zeros(2, np.float32)], st_)
    assert p.data.tolist() == [1.0, 2.0] and st_.step == 1


def test_adam_first_step_is_minus_lr():
    p = Tensor(np.array([0.0]), requires_grad=True, dtype=np.float64)
    adam_step([p], [np.array([1.0])], AdamState())
    assert abs(p.data[0] + 0.001) < 1e-9


def test_adam_minimizes_quadratic_like_reference():
    p = Tensor(np.array([0.0]), requires_grad=True, dtype=np.float64)
    st_ = AdamState(learning_rate=0.05)
    for _ in range(200):
        adam_step([p], [2 * (p.data - 3)], st_)
    ref = adam_reference(0.0, lambda x: 2 * (x - 3), 200, lr=0.05)
    assert abs(p.data[0] - 3) < 0.5
    assert abs(p.data[0] - ref) < 1e-9
    assert all(np.all(v >= 0) for v in st_.v)


def test_adam_shape_mismatch():
    with pytest.raises(UsageError):
        adam_step([Tensor(np.zeros(2), requires_grad=True)], [np.zeros(3)], AdamState())
