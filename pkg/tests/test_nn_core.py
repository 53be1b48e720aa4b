import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from blastoformer.nn import (GraphConsumedError, OptimizerState, adamw_step, backprop,
                             conv2d, cosine_lr, layer_norm, linear, relu, rff_features,
                             rope_apply, softmax_attention, spectral_conv2d, zero_grad)

from _oracles import (FD_RTOL, attention_loop, conv_loop, fd_max_error, matmul_loop,
                      spectral_dft_oracle, weighted_sum)

D = torch.float64


def rnd(*shape, seed=0, grad=False):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=g, dtype=D).requires_grad_(grad)


def crnd(*shape, seed=0, grad=False):
    g = torch.Generator().manual_seed(seed)
    return torch.randn(*shape, generator=g, dtype=torch.complex128).requires_grad_(grad)


# ------------------------------------------------------------------ linear

def test_linear_identity_and_bias():
    x = rnd(5, 3)
    assert torch.equal(linear(x, torch.eye(3, dtype=D), torch.zeros(3, dtype=D)), x)
    b = rnd(4, seed=1)
    assert torch.equal(linear(torch.zeros(2, 3, dtype=D), rnd(3, 4), b), b.expand(2, 4))


def test_linear_matches_loop():
    x, W, b = rnd(3, 2), rnd(2, 4, seed=1), rnd(4, seed=2)
    want = matmul_loop(x.tolist(), W.tolist(), b.tolist())
    assert np.max(np.abs(linear(x, W, b).numpy() - np.array(want))) < 1e-12


def test_linear_shape_errors():
    with pytest.raises(ValueError):
        linear(rnd(2, 3), rnd(4, 2))
    with pytest.raises(ValueError):
        linear(rnd(2, 3), rnd(3, 2), rnd(3))


# -------------------------------------------------------------- layer norm

def test_layer_norm_constant_token_is_zero():
    ones, zeros = torch.ones(6, dtype=D), torch.zeros(6, dtype=D)
    assert torch.equal(layer_norm(torch.full((2, 6), 3.0, dtype=D), ones, zeros), torch.zeros(2, 6, dtype=D))


def test_layer_norm_moments():
    # eps shifts the variance by about eps / var, so use widely spread tokens
    y = layer_norm(rnd(50, 16) * 10 + 2, torch.ones(16, dtype=D), torch.zeros(16, dtype=D))
    assert y.mean(-1).abs().max() < 1e-9
    assert (y.var(-1, unbiased=False) - 1).abs().max() < 1e-6
    with pytest.raises(ValueError):
        layer_norm(rnd(2, 4), torch.ones(3, dtype=D), torch.zeros(3, dtype=D))


# --------------------------------------------------------------- attention

def test_attention_single_key():
    Q, K, V = rnd(4, 2, 3), rnd(1, 2, 3, seed=1), rnd(1, 2, 3, seed=2)
    assert torch.allclose(softmax_attention(Q, K, V), V.expand(4, 2, 3), atol=1e-15)


def test_attention_uniform_logits_average_v():
    Q = torch.zeros(3, 1, 4, dtype=D)
    K, V = rnd(5, 1, 4, seed=1), rnd(5, 1, 4, seed=2)
    assert torch.allclose(softmax_attention(Q, K, V), V.mean(0, keepdim=True).expand(3, 1, 4), atol=1e-14)


def test_attention_matches_loop():
    Q, K, V = rnd(2, 2, 3), rnd(3, 2, 3, seed=1), rnd(3, 2, 3, seed=2)
    want = np.array(attention_loop(Q.tolist(), K.tolist(), V.tolist()))
    assert np.max(np.abs(softmax_attention(Q, K, V).numpy() - want)) < 1e-12


def test_attention_convex_combination_and_errors():
    Q, K, V = rnd(6, 3, 1), rnd(7, 3, 1, seed=1), rnd(7, 3, 1, seed=2)
    out = softmax_attention(Q, K, V)
    lo, hi = V.min(0).values, V.max(0).values
    assert torch.all(out >= lo - 1e-12) and torch.all(out <= hi + 1e-12)
    # rows of the attention matrix sum to one: attending to an all-ones V gives ones
    ones = torch.ones(7, 3, 1, dtype=D)
    assert (softmax_attention(Q, K, ones) - 1).abs().max() < 1e-9
    with pytest.raises(ValueError):
        softmax_attention(rnd(2, 2, 3), rnd(3, 2, 4), rnd(3, 2, 4))
    with pytest.raises(FloatingPointError):
        softmax_attention(torch.full((1, 1, 2), math.inf, dtype=D), rnd(2, 1, 2), rnd(2, 1, 2))


# -------------------------------------------------------------------- rope

def test_rope_identity_at_origin():
    x = rnd(5, 2, 8)
    assert torch.equal(rope_apply(x, torch.zeros(5, 2, dtype=D)), x)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([4, 8, 16, 32]))
def test_rope_preserves_norm(seed, d_h):
    x, pos = rnd(6, 3, d_h, seed=seed), rnd(6, 2, seed=seed + 1) * 5
    y = rope_apply(x, pos)
    assert (y.norm(dim=-1) - x.norm(dim=-1)).abs().max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_rope_relative_offset(seed):
    q, k = rnd(1, 1, 16, seed=seed), rnd(1, 1, 16, seed=seed + 1)
    p1, p2, delta = rnd(1, 2, seed=seed + 2) * 4, rnd(1, 2, seed=seed + 3) * 4, rnd(1, 2, seed=seed + 4) * 4
    a = (rope_apply(q, p1) * rope_apply(k, p2)).sum()
    b = (rope_apply(q, p1 + delta) * rope_apply(k, p2 + delta)).sum()
    assert abs(a - b) < 1e-9


def test_rope_pair_rotation_explicit():
    # d_h = 8: half 4 per axis, pairs (0,1) and (2,3) at theta_0 = 1, theta_1 = 10000^(-1/2)
    x = torch.zeros(1, 1, 8, dtype=D)
    x[..., 2] = 1.0
    y = rope_apply(x, torch.tensor([[0.3, -0.7]], dtype=D))
    th = 10000 ** (-2 * 1 / 4)
    assert abs(y[0, 0, 2] - math.cos(0.3 * th)) < 1e-15 and abs(y[0, 0, 3] - math.sin(0.3 * th)) < 1e-15
    with pytest.raises(ValueError):
        rope_apply(rnd(2, 1, 6), rnd(2, 2))


# --------------------------------------------------------------------- rff

def test_rff_examples():
    B = rnd(2, 5)
    out = rff_features(torch.zeros(3, 2, dtype=D), B)
    assert out.shape == (3, 10)
    assert torch.equal(out[:, :5], torch.ones(3, 5, dtype=D)) and torch.equal(out[:, 5:], torch.zeros(3, 5, dtype=D))
    one = rff_features(torch.tensor([[0.5, 0.0]], dtype=D), torch.tensor([[1.0], [0.0]], dtype=D))
    assert abs(one[0, 0] + 1) < 1e-12 and abs(one[0, 1]) < 1e-12
    wide = rff_features(rnd(40, 2, seed=3) * 10, B)
    assert wide.abs().max() <= 1.0
    with pytest.raises(ValueError):
        rff_features(rnd(3, 3), B)


# ------------------------------------------------------------------ conv2d

def test_conv_delta_and_zero_kernel():
    x = rnd(1, 5, 6)
    delta = torch.zeros(1, 1, 3, 3, dtype=D)
    delta[0, 0, 1, 1] = 1
    assert torch.equal(conv2d(x, delta, torch.zeros(1, dtype=D)), x)
    b = torch.tensor([0.25, -1.5], dtype=D)
    assert torch.equal(conv2d(x, torch.zeros(2, 1, 3, 3, dtype=D), b), b.view(2, 1, 1).expand(2, 5, 6))


def test_conv_matches_loop():
    x, k, b = rnd(1, 5, 5), rnd(2, 1, 3, 3, seed=1), rnd(2, seed=2)
    want = np.array(conv_loop(x.tolist(), k.tolist(), b.tolist()))
    assert np.max(np.abs(conv2d(x, k, b).numpy() - want)) < 1e-12
    x3, k3, b3 = rnd(3, 4, 6, seed=4), rnd(2, 3, 3, 3, seed=5), rnd(2, seed=6)
    want3 = np.array(conv_loop(x3.tolist(), k3.tolist(), b3.tolist()))
    assert np.max(np.abs(conv2d(x3, k3, b3).numpy() - want3)) < 1e-12


def test_conv_errors():
    with pytest.raises(ValueError):
        conv2d(rnd(2, 4, 4), rnd(1, 1, 3, 3), rnd(1))
    with pytest.raises(ValueError):
        conv2d(rnd(1, 4, 4), rnd(1, 1, 5, 5), rnd(1))


# ---------------------------------------------------------------- spectral

def test_spectral_zero_weights():
    w = torch.zeros(2, 3, 2, 2, 2, dtype=torch.complex128)
    assert torch.equal(spectral_conv2d(rnd(2, 8, 8), w), torch.zeros(3, 8, 8, dtype=D))


@pytest.mark.parametrize("H,W", [(8, 8), (7, 6), (6, 9)])
def test_spectral_full_modes_identity(H, W):
    x = rnd(1, H, W)
    w = torch.ones(2, 1, 1, H, W // 2 + 1, dtype=torch.complex128)
    assert (spectral_conv2d(x, w) - x).abs().max() < 1e-9


@pytest.mark.parametrize("H,W,m1,m2", [(8, 8, 3, 3), (8, 8, 5, 4), (6, 7, 2, 3)])
def test_spectral_matches_naive_dft(H, W, m1, m2):
    x = rnd(2, H, W)
    w = crnd(2, 3, 2, m1, m2, seed=1)
    want = spectral_dft_oracle(x.numpy(), w.numpy())
    assert np.max(np.abs(spectral_conv2d(x, w).numpy() - want)) < 1e-9


def test_spectral_output_is_real_and_errors():
    out = spectral_conv2d(rnd(2, 8, 8), crnd(2, 2, 2, 3, 3, seed=2))
    assert not out.is_complex()
    with pytest.raises(ValueError):
        spectral_conv2d(rnd(1, 8, 8), crnd(2, 1, 1, 9, 2))
    with pytest.raises(ValueError):
        spectral_conv2d(rnd(1, 8, 8), crnd(2, 1, 1, 2, 6))
    with pytest.raises(ValueError):
        spectral_conv2d(rnd(1, 8, 8), rnd(2, 1, 1, 2, 2))


# ---------------------------------------------------- finite differences

def _shapes(seed):
    rng = np.random.default_rng(seed)
    return [int(v) for v in rng.integers(1, 5, size=4)]


def test_fd_linear_relu_layernorm():
    for s in range(20):
        n, d_in, d_out, _ = _shapes(s)
        x, W, b = rnd(n, d_in, seed=s, grad=True), rnd(d_in, d_out, seed=s + 1, grad=True), rnd(d_out, seed=s + 2, grad=True)
        assert fd_max_error(lambda: weighted_sum(linear(x, W, b)), [x, W, b]) < FD_RTOL
        d = d_in + 1
        y, g, be = rnd(n, d, seed=s + 3, grad=True), rnd(d, seed=s + 4, grad=True), rnd(d, seed=s + 5, grad=True)
        assert fd_max_error(lambda: weighted_sum(layer_norm(y, g, be)), [y, g, be]) < FD_RTOL
        # keep relu inputs away from the kink
        z = (rnd(n, d, seed=s + 6) + 0.1 * torch.sign(rnd(n, d, seed=s + 6))).requires_grad_(True)
        assert fd_max_error(lambda: weighted_sum(relu(z)), [z]) < FD_RTOL


def test_fd_attention_rope_rff():
    for s in range(20):
        n_q, n_k, h, _ = _shapes(s)
        d = 4 * (1 + s % 2)
        Q, K, V = rnd(n_q, h, d, seed=s, grad=True), rnd(n_k, h, d, seed=s + 1, grad=True), rnd(n_k, h, d, seed=s + 2, grad=True)
        assert fd_max_error(lambda: weighted_sum(softmax_attention(Q, K, V)), [Q, K, V]) < FD_RTOL
        x, pos = rnd(n_q, h, d, seed=s + 3, grad=True), rnd(n_q, 2, seed=s + 4, grad=True)
        assert fd_max_error(lambda: weighted_sum(rope_apply(x, pos)), [x, pos]) < FD_RTOL
        Y, B = rnd(n_k, 2, seed=s + 5, grad=True), rnd(2, h + 1, seed=s + 6)
        assert fd_max_error(lambda: weighted_sum(rff_features(Y, B)), [Y]) < FD_RTOL


def test_fd_convolutions():
    for s in range(20):
        c_in, c_out, H, W = _shapes(s)
        H, W = H + 3, W + 3
        x, k, b = rnd(c_in, H, W, seed=s, grad=True), rnd(c_out, c_in, 3, 3, seed=s + 1, grad=True), rnd(c_out, seed=s + 2, grad=True)
        assert fd_max_error(lambda: weighted_sum(conv2d(x, k, b)), [x, k, b]) < FD_RTOL
        m1, m2 = min(2, H), min(2, W // 2 + 1)
        wr = rnd(2, c_out, c_in, m1, m2, 2, seed=s + 3, grad=True)
        loss = lambda: weighted_sum(spectral_conv2d(x, torch.view_as_complex(wr)))  # noqa: E731
        assert fd_max_error(loss, [x, wr]) < FD_RTOL


def test_fd_composite_network():
    x = rnd(5, 4)
    W1, b1 = rnd(4, 8, seed=1, grad=True), rnd(8, seed=2, grad=True)
    g, be = (1 + 0.1 * rnd(8, seed=3)).requires_grad_(True), rnd(8, seed=4, grad=True)
    Wq, Wk, Wv = (rnd(8, 8, seed=i, grad=True) for i in (5, 6, 7))
    target = rnd(5, 8, seed=8)

    def loss():
        h = layer_norm(relu(linear(x, W1, b1)), g, be)
        a = softmax_attention((h @ Wq).view(5, 2, 4), (h @ Wk).view(5, 2, 4), (h @ Wv).view(5, 2, 4))
        return (a.reshape(5, 8) - target).abs().mean()

    assert fd_max_error(loss, [W1, b1, g, be, Wq, Wk, Wv]) < FD_RTOL


# ---------------------------------------------------------------- backprop

def test_backprop_linear_case_and_unreachable():
    W = rnd(3, 2, grad=True)
    unused = rnd(4, grad=True)
    x = rnd(3, seed=1)
    zero_grad([W, unused])
    backprop((x @ W).sum())
    assert torch.allclose(W.grad, x[:, None].expand(3, 2), atol=1e-12, rtol=0)
    assert torch.equal(unused.grad, torch.zeros(4, dtype=D))


def test_backprop_contract_errors():
    W = rnd(3, grad=True)
    loss = (W * W).sum()
    backprop(loss)
    with pytest.raises(GraphConsumedError):
        backprop(loss)
    with pytest.raises(ValueError):
        backprop(W * 2)
    with pytest.raises(ValueError):
        backprop(torch.tensor(1.0))


# ------------------------------------------------------------------- adamw

def _param(values):
    p = torch.nn.Parameter(torch.tensor(values, dtype=D))
    p.grad = torch.zeros_like(p)
    return p


def test_adamw_zero_grad_zero_decay_is_identity():
    p = _param([1.0, -2.0])
    st_ = OptimizerState.init([p], lr=1e-2, weight_decay=0.0)
    adamw_step([p], st_)
    assert torch.equal(p.detach(), torch.tensor([1.0, -2.0], dtype=D)) and st_.t == 1


def test_adamw_decoupled_decay():
    p = _param([1.0, -2.0])
    st_ = OptimizerState.init([p], lr=1e-2, weight_decay=0.1)
    adamw_step([p], st_)
    assert torch.allclose(p.detach(), torch.tensor([1.0, -2.0], dtype=D) * (1 - 1e-3), atol=1e-15, rtol=0)
    assert torch.equal(st_.m[0], torch.zeros(2, dtype=D))


def test_adamw_scalar_oracle_three_steps():
    p = _param([0.0])
    st_ = OptimizerState.init([p], lr=1e-3, weight_decay=0.01)
    w, m, v = 0.0, 0.0, 0.0
    for t, g in enumerate([0.5, -0.2, 0.7], start=1):
        p.grad = torch.tensor([g], dtype=D)
        adamw_step([p], st_)
        w *= 1 - 1e-3 * 0.01
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 1e-3 * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        assert abs(p.item() - w) < 1e-12
    assert abs(p.grad.item() - 0.7) == 0  # grads untouched


def test_adamw_errors():
    p = _param([1.0])
    with pytest.raises(RuntimeError):
        adamw_step([p], OptimizerState())
    q = torch.nn.Parameter(torch.zeros(1, dtype=D))
    with pytest.raises(RuntimeError):
        adamw_step([q], OptimizerState.init([q]))


# ------------------------------------------------------------------ cosine

def test_cosine_schedule():
    assert cosine_lr(0, 100, 1e-3, 1e-5) == 1e-3
    assert cosine_lr(100, 100, 1e-3, 1e-5) == pytest.approx(1e-5, abs=1e-18)
    assert cosine_lr(50, 100, 1e-3, 1e-5) == pytest.approx((1e-3 + 1e-5) / 2, rel=1e-12)
    for bad in (-1, 101):
        with pytest.raises(ValueError):
            cosine_lr(bad, 100, 1e-3)


def test_ops_are_deterministic():
    x, w = rnd(2, 8, 8), crnd(2, 2, 2, 3, 3, seed=1)
    assert torch.equal(spectral_conv2d(x, w), spectral_conv2d(x, w))
    Q = rnd(4, 2, 8)
    assert torch.equal(softmax_attention(Q, Q, Q), softmax_attention(Q, Q, Q))
