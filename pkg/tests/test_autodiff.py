"""Unit tests for the reverse-mode autodiff core."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setcon import autodiff as ad
from setcon.autodiff import Tensor


def rand(rng, *shape):
    return Tensor(rng.standard_normal(shape), requires_grad=True)


# --- linear -------------------------------------------------------------

def test_linear_identity_weight():
    y = ad.linear(Tensor([1.0, 2.0]), Tensor(np.eye(2)), Tensor([0.0, 0.0]))
    np.testing.assert_allclose(y.data, [1.0, 2.0])


def test_linear_zero_input_returns_bias():
    y = ad.linear(Tensor([0.0, 0.0]), Tensor([[7.0, 1.0], [2.0, 5.0]]), Tensor([3.0, -1.0]))
    np.testing.assert_allclose(y.data, [3.0, -1.0])


def manual_matmul(x, w, b):
    out = [sum(x[i] * w[i][j] for i in range(len(x))) + b[j] for j in range(len(w[0]))]
    return out


def test_linear_matches_manual_matrix_multiply():
    x, w, b = [1.0, 1.0], [[1.0, 2.0], [3.0, 4.0]], [0.0, 0.0]
    expected = manual_matmul(x, w, b)
    assert expected == [4.0, 6.0]
    y = ad.linear(Tensor(x), Tensor(w), Tensor(b))
    np.testing.assert_allclose(y.data, expected)


def test_linear_shape_mismatch_names_operand():
    with pytest.raises(ad.DimensionError, match="linear"):
        ad.linear(Tensor([1.0, 2.0, 3.0]), Tensor(np.eye(2)), Tensor([0.0, 0.0]))
    with pytest.raises(ad.DimensionError, match="bias"):
        ad.linear(Tensor([1.0, 2.0]), Tensor(np.eye(2)), Tensor([0.0, 0.0, 1.0]))


def test_linear_batched_leading_dims():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((4, 3, 5))
    w = rng.standard_normal((5, 2))
    b = rng.standard_normal(2)
    y = ad.linear(Tensor(x), Tensor(w), Tensor(b))
    np.testing.assert_allclose(y.data, x @ w + b, rtol=1e-12)


# --- softmax ------------------------------------------------------------

def test_softmax_uniform_logits():
    y = ad.softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(y.data, [1 / 3] * 3, atol=1e-12)


def test_softmax_closed_form_exponentials():
    y = ad.softmax(Tensor([0.0, math.log(2.0)]))
    np.testing.assert_allclose(y.data, [1 / 3, 2 / 3], atol=1e-12)


def test_softmax_overflow_safe():
    y = ad.softmax(Tensor([1000.0, 0.0]))
    assert np.all(np.isfinite(y.data))
    np.testing.assert_allclose(y.data, [1.0, 0.0], atol=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=8), st.floats(-30, 30))
def test_softmax_sums_to_one_and_shift_invariant(vals, shift):
    x = np.array(vals, dtype=np.float64)
    y = ad.softmax(Tensor(x)).data
    assert abs(y.sum() - 1.0) <= 1e-9
    assert np.all(y > 0)
    y2 = ad.softmax(Tensor(x + shift)).data
    np.testing.assert_allclose(y, y2, atol=1e-9)


# --- layer_norm ---------------------------------------------------------

def ln_args(c):
    return Tensor(np.ones(c)), Tensor(np.zeros(c))


def test_layer_norm_constant_vector():
    g, o = ln_args(3)
    y = ad.layer_norm(Tensor([5.0, 5.0, 5.0]), g, o)
    np.testing.assert_allclose(y.data, [0.0, 0.0, 0.0], atol=1e-3)


def test_layer_norm_already_normalized():
    g, o = ln_args(2)
    y = ad.layer_norm(Tensor([1.0, -1.0]), g, o)
    np.testing.assert_allclose(y.data, [1.0, -1.0], atol=1e-5)


def test_layer_norm_hand_evaluated():
    # x=[0,2]: mean 1, centered [-1,1], variance 1, so the normalized vector
    # is [-1,1] (up to the 1e-6 epsilon); affine by gain 2, offset 1.
    y = ad.layer_norm(Tensor([0.0, 2.0]), Tensor([2.0, 2.0]), Tensor([1.0, 1.0]))
    np.testing.assert_allclose(y.data, [-1.0, 3.0], atol=1e-5)


def test_layer_norm_moments():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((20, 16)) * 3.0
    g, o = ln_args(16)
    y = ad.layer_norm(Tensor(x), g, o).data
    assert np.abs(y.mean(axis=-1)).max() <= 1e-7
    assert np.abs(y.var(axis=-1) - 1.0).max() <= 1e-4


def test_layer_norm_bad_affine_shape():
    with pytest.raises(ad.DimensionError, match="layer_norm"):
        ad.layer_norm(Tensor([1.0, 2.0]), Tensor([1.0]), Tensor([0.0]))


# --- gru_cell -----------------------------------------------------------

def zero_gru_weights(d):
    z = lambda: Tensor(np.zeros((d, d)))
    b = lambda: Tensor(np.zeros(d))
    return dict(wz=z(), uz=z(), bz=b(), wr=z(), ur=z(), br=b(), wh=z(), uh=z(), bh=b())


def test_gru_zero_parameters_halves_state():
    w = zero_gru_weights(2)
    h = Tensor([2.0, -4.0])
    x = Tensor([0.3, 0.7])
    out = ad.gru_cell(h, x, **w)
    np.testing.assert_allclose(out.data, [1.0, -2.0], atol=1e-12)


def test_gru_closed_update_gate_preserves_state():
    w = zero_gru_weights(2)
    w["bz"] = Tensor([-50.0, -50.0])
    h = Tensor([2.0, -4.0])
    out = ad.gru_cell(h, Tensor([0.0, 0.0]), **w)
    np.testing.assert_allclose(out.data, h.data, atol=1e-9)


def gru_oracle(h, x, p):
    """Scalar transcription of the three gate equations."""
    d = len(h)
    out = []
    for i in range(d):
        z = 1 / (1 + math.exp(-(sum(x[j] * p["wz"][j][i] for j in range(d))
                                + sum(h[j] * p["uz"][j][i] for j in range(d)) + p["bz"][i])))
        r = 1 / (1 + math.exp(-(sum(x[j] * p["wr"][j][i] for j in range(d))
                                + sum(h[j] * p["ur"][j][i] for j in range(d)) + p["br"][i])))
        out.append((z, r))
    res = []
    for i in range(d):
        z, _ = out[i]
        cand = math.tanh(sum(x[j] * p["wh"][j][i] for j in range(d))
                         + sum(out[j][1] * h[j] * p["uh"][j][i] for j in range(d)) + p["bh"][i])
        res.append((1 - z) * h[i] + z * cand)
    return res


def test_gru_matches_scalar_oracle():
    rng = np.random.default_rng(7)
    d = 3
    p = {k: rng.standard_normal((d, d)) * 0.5 for k in ("wz", "uz", "wr", "ur", "wh", "uh")}
    p.update({k: rng.standard_normal(d) * 0.5 for k in ("bz", "br", "bh")})
    h = rng.standard_normal(d)
    x = rng.standard_normal(d)
    expected = gru_oracle(h.tolist(), x.tolist(), {k: v.tolist() for k, v in p.items()})
    got = ad.gru_cell(Tensor(h), Tensor(x), **{k: Tensor(v) for k, v in p.items()})
    np.testing.assert_allclose(got.data, expected, rtol=1e-10)


def test_gru_shape_mismatch():
    w = zero_gru_weights(2)
    with pytest.raises(ad.DimensionError, match="gru_cell"):
        ad.gru_cell(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]), **w)


# --- grad_check itself --------------------------------------------------

def test_grad_check_polynomial():
    err = ad.grad_check(lambda t: ad.tsum(t * t), Tensor([3.0]), eps=1e-5)
    assert err <= 1e-8
    x = Tensor([3.0], requires_grad=True)
    y = ad.tsum(x * x)
    y.backward()
    np.testing.assert_allclose(x.grad, [6.0], rtol=1e-12)


def test_grad_check_softmax_sum_is_constant():
    err = ad.grad_check(lambda t: ad.tsum(ad.softmax(t)), Tensor([0.4, -1.2, 2.0]), eps=1e-6)
    assert err <= 1e-7


# --- gradient gate: >=50 random instances per primitive -----------------

UNARY_OPS = {
    "neg": ad.neg,
    "relu": ad.relu,
    "sigmoid": ad.sigmoid,
    "tanh": ad.tanh,
    "exp": ad.exp,
    "square": lambda t: ad.power(t, 2.0),
    "softmax_rows": lambda t: ad.softmax(t, axis=-1),
    "logsumexp_rows": lambda t: ad.logsumexp(t, axis=-1),
    "sum_axis": lambda t: ad.tsum(t, axis=0),
    "mean_all": lambda t: ad.tmean(t),
    "reshape": lambda t: ad.reshape(t, (t.data.size,)),
    "swap_axes": lambda t: ad.swap_axes(t, 0, 1),
    "slice": lambda t: t[1:, :2],
    "broadcast": lambda t: ad.broadcast_to(ad.reshape(t, (1,) + t.shape), (3,) + t.shape),
}


@pytest.mark.parametrize("name", sorted(UNARY_OPS))
def test_unary_primitive_gradients(name):
    op = UNARY_OPS[name]
    rng = np.random.default_rng(hash(name) % 2**32)
    worst = 0.0
    for _ in range(50):
        x = rng.standard_normal((3, 4)) + 0.1  # keep relu away from the kink
        probe = Tensor(rng.standard_normal(op(Tensor(x)).shape))

        def f(t):
            return ad.tsum(op(t) * probe)

        worst = max(worst, ad.grad_check(f, Tensor(x), eps=1e-6))
    assert worst <= 1e-4


def test_log_gradient_on_positive_inputs():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        x = rng.random((3, 3)) + 0.5
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.log(t)), Tensor(x), eps=1e-7))
    assert worst <= 1e-4


BINARY_OPS = {
    "add": ad.add,
    "sub": ad.sub,
    "mul": ad.mul,
    "div": ad.div,
}


@pytest.mark.parametrize("name", sorted(BINARY_OPS))
def test_binary_primitive_gradients(name):
    op = BINARY_OPS[name]
    rng = np.random.default_rng(1000 + len(name))
    worst = 0.0
    for _ in range(50):
        a = rng.standard_normal((2, 3))
        b = rng.standard_normal((2, 3)) + (2.0 if name == "div" else 0.0)
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(op(t, Tensor(b))), Tensor(a)))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(op(Tensor(a), t)), Tensor(b)))
        # broadcasting path
        c = rng.standard_normal((3,)) + (2.0 if name == "div" else 0.0)
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(op(Tensor(a), t)), Tensor(c)))
    assert worst <= 1e-4


def test_matmul_gradients():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        a = rng.standard_normal((4, 2, 3))
        b = rng.standard_normal((3, 5))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.matmul(t, Tensor(b))), Tensor(a)))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.matmul(Tensor(a), t)), Tensor(b)))
    assert worst <= 1e-4


def test_linear_gradients():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(50):
        x = rng.standard_normal((2, 3, 4))
        w = rng.standard_normal((4, 3))
        b = rng.standard_normal(3)
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.linear(t, Tensor(w), Tensor(b))), Tensor(x)))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.linear(Tensor(x), t, Tensor(b))), Tensor(w)))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.linear(Tensor(x), Tensor(w), t)), Tensor(b)))
    assert worst <= 1e-4


def test_layer_norm_gradients():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        x = rng.standard_normal((3, 5)) * 2.0
        g = rng.standard_normal(5)
        o = rng.standard_normal(5)
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.layer_norm(t, Tensor(g), Tensor(o))), Tensor(x)))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.layer_norm(Tensor(x), t, Tensor(o))), Tensor(g)))
        worst = max(worst, ad.grad_check(lambda t: ad.tsum(ad.layer_norm(Tensor(x), Tensor(g), t)), Tensor(o)))
    assert worst <= 1e-4


def test_gru_gradients():
    rng = np.random.default_rng(9)
    d = 3
    worst = 0.0
    for _ in range(50):
        mats = {k: rng.standard_normal((d, d)) * 0.6 for k in ("wz", "uz", "wr", "ur", "wh", "uh")}
        vecs = {k: rng.standard_normal(d) * 0.6 for k in ("bz", "br", "bh")}
        h = rng.standard_normal(d)
        x = rng.standard_normal(d)

        def run(weights):
            return ad.tsum(ad.gru_cell(weights.get("h", Tensor(h)),
                                       weights.get("x", Tensor(x)),
                                       **{k: weights.get(k, Tensor(mats[k]) if k in mats else Tensor(vecs[k]))
                                          for k in ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")}))

        worst = max(worst, ad.grad_check(lambda t: run({"h": t}), Tensor(h)))
        worst = max(worst, ad.grad_check(lambda t: run({"x": t}), Tensor(x)))
        worst = max(worst, ad.grad_check(lambda t: run({"uh": t}), Tensor(mats["uh"])))
        worst = max(worst, ad.grad_check(lambda t: run({"bz": t}), Tensor(vecs["bz"])))
    assert worst <= 1e-4


def test_concat_gradients():
    rng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(50):
        a = rng.standard_normal((2, 3))
        b = rng.standard_normal((2, 2))

        def f(t):
            return ad.tsum(ad.power(ad.concat([t, Tensor(b)], axis=1), 2.0))

        worst = max(worst, ad.grad_check(f, Tensor(a)))
    assert worst <= 1e-4


# --- misc mechanics -----------------------------------------------------

def test_detach_blocks_gradient():
    x = Tensor([2.0], requires_grad=True)
    y = ad.tsum(ad.detach(x * 3.0) * x)
    y.backward()
    np.testing.assert_allclose(x.grad, [6.0])  # only the outer factor sees x


def test_grad_accumulates_over_reuse():
    x = Tensor([1.5], requires_grad=True)
    y = ad.tsum(x * x + x)
    y.backward()
    np.testing.assert_allclose(x.grad, [4.0])


def test_values_finite_after_forward_and_backward():
    rng = np.random.default_rng(12)
    x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
    g = Tensor(np.ones(6), requires_grad=True)
    o = Tensor(np.zeros(6), requires_grad=True)
    y = ad.tsum(ad.softmax(ad.layer_norm(x, g, o)) ** 2.0)
    y.backward()
    for t in (x, g, o, y):
        ad.assert_finite(t.data, "forward")
        if t.grad is not None:
            ad.assert_finite(t.grad, "backward")


def test_float32_mode_preserved():
    x = Tensor(np.ones((2, 2), dtype=np.float32))
    y = ad.relu(x * 0.5 + 0.25)
    assert y.data.dtype == np.float32


def test_backward_requires_scalar():
    with pytest.raises(ad.DimensionError):
        Tensor([1.0, 2.0], requires_grad=True).backward()
