"""Differentiable building blocks shared by BlastOFormer and the baselines.

Every op takes plain tensors (parameters included) so it can be checked in
isolation against loop oracles and finite differences.  Leading batch
dimensions broadcast through all of them.
"""
from __future__ import annotations

import math

import torch
import torch.nn.functional as F

LN_EPS = 1e-5
ROPE_BASE = 10000.0


def linear(x: torch.Tensor, W: torch.Tensor, b: torch.Tensor | None = None) -> torch.Tensor:
    """y = x W + b over the last axis; W is stored (d_in, d_out)."""
    if x.shape[-1] != W.shape[0]:
        raise ValueError(f"linear: input width {x.shape[-1]} != weight rows {W.shape[0]}")
    y = x @ W
    if b is not None:
        if b.shape != (W.shape[1],):
            raise ValueError(f"linear: bias shape {tuple(b.shape)} != ({W.shape[1]},)")
        y = y + b
    return y


def relu(x: torch.Tensor) -> torch.Tensor:
    return torch.clamp(x, min=0.0)


def layer_norm(x: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor,
               eps: float = LN_EPS) -> torch.Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ValueError("layer_norm: affine parameters must match the token width")
    mu = x.mean(dim=-1, keepdim=True)
    xc = x - mu
    var = (xc * xc).mean(dim=-1, keepdim=True)
    return xc / torch.sqrt(var + eps) * gamma + beta


def softmax_attention(Q: torch.Tensor, K: torch.Tensor, V: torch.Tensor) -> torch.Tensor:
    """Scaled dot-product attention on [..., n, heads, d_head] tensors."""
    if Q.shape[-2:] != K.shape[-2:] or K.shape[-3:] != V.shape[-3:]:
        raise ValueError(f"attention shape mismatch: Q{tuple(Q.shape)} K{tuple(K.shape)} V{tuple(V.shape)}")
    d_h = Q.shape[-1]
    logits = torch.einsum("...qhd,...khd->...hqk", Q, K) / math.sqrt(d_h)
    if not torch.isfinite(logits).all():
        raise FloatingPointError("attention logits are not finite")
    weights = torch.softmax(logits, dim=-1)
    return torch.einsum("...hqk,...khd->...qhd", weights, V)


def rope_frequencies(d_head: int, base: float = ROPE_BASE,
                     dtype=torch.float64, device=None) -> torch.Tensor:
    half = d_head // 2
    k = torch.arange(half // 2, dtype=dtype, device=device)
    return base ** (-2.0 * k / half)


def rope_apply(x: torch.Tensor, pos: torch.Tensor, scale: float = 1.0,
               base: float = ROPE_BASE) -> torch.Tensor:
    """2-D rotary embedding.

    ``x`` is [..., n, heads, d_head] and ``pos`` is [..., n, 2].  The first half
    of each head vector rotates with the x coordinate, the second half with y;
    within a half, pair (2k, 2k+1) turns by ``scale * coord * base**(-2k/(d_head/2))``.
    """
    d_h = x.shape[-1]
    if d_h % 4:
        raise ValueError(f"rope_apply: head dim {d_h} not divisible by 4")
    if pos.shape[-1] != 2 or pos.shape[-2] != x.shape[-3]:
        raise ValueError("rope_apply: positions must be [..., n, 2] matching the tokens")
    half = d_h // 2
    theta = rope_frequencies(d_h, base, dtype=x.dtype, device=x.device)
    out = []
    for axis in range(2):
        seg = x[..., axis * half:(axis + 1) * half]
        even, odd = seg[..., 0::2], seg[..., 1::2]
        angle = (pos[..., axis] * scale).to(x.dtype)[..., None, None] * theta
        cos, sin = torch.cos(angle), torch.sin(angle)
        rot = torch.stack([even * cos - odd * sin, even * sin + odd * cos], dim=-1)
        out.append(rot.flatten(-2))
    return torch.cat(out, dim=-1)


def rff_features(Y: torch.Tensor, B: torch.Tensor) -> torch.Tensor:
    """[cos(2 pi Y B), sin(2 pi Y B)] with a frozen projection B of shape (2, d2)."""
    if Y.shape[-1] != B.shape[0]:
        raise ValueError("rff_features: coordinate width does not match B")
    proj = 2.0 * math.pi * (Y @ B)
    return torch.cat([torch.cos(proj), torch.sin(proj)], dim=-1)


def conv2d(x: torch.Tensor, kernels: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """3x3 cross-correlation with zero padding 1; x is [c_in, H, W] or [B, c_in, H, W]."""
    if kernels.dim() != 4 or kernels.shape[-2:] != (3, 3):
        raise ValueError("conv2d: kernels must be [c_out, c_in, 3, 3]")
    if x.shape[-3] != kernels.shape[1]:
        raise ValueError(f"conv2d: input has {x.shape[-3]} channels, kernels expect {kernels.shape[1]}")
    if bias.shape != (kernels.shape[0],):
        raise ValueError("conv2d: bias must have one entry per output channel")
    return F.conv2d(x, kernels, bias, padding=1)


def spectral_conv2d(x: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Fourier-layer convolution on the lowest modes.

    ``weights`` is complex [2, c_out, c_in, m1, m2]: block 0 multiplies rows
    0..m1-1 of the half spectrum, block 1 rows H-m1..H-1 (negative frequencies
    along the first axis).  Where the two blocks overlap, block 0 wins.  The
    forward transform is unnormalized and the inverse divides by H*W.
    """
    if not weights.is_complex() or weights.dim() != 5 or weights.shape[0] != 2:
        raise ValueError("spectral_conv2d: weights must be complex [2, c_out, c_in, m1, m2]")
    _, c_out, c_in, m1, m2 = weights.shape
    H, W = x.shape[-2:]
    if x.shape[-3] != c_in:
        raise ValueError(f"spectral_conv2d: input has {x.shape[-3]} channels, weights expect {c_in}")
    if m1 > H or m2 > W // 2 + 1:
        raise ValueError(f"spectral_conv2d: modes ({m1}, {m2}) exceed transform size ({H}, {W // 2 + 1})")
    x_ft = torch.fft.rfft2(x)
    out_ft = torch.zeros(*x.shape[:-3], c_out, H, W // 2 + 1, dtype=x_ft.dtype, device=x.device)
    lo = x_ft[..., :m1, :m2]
    hi_start = max(H - m1, m1)
    if hi_start < H:
        hi = x_ft[..., hi_start:, :m2]
        w_hi = weights[1][..., m1 - (H - hi_start):, :]
        out_ft[..., hi_start:, :m2] = torch.einsum("...ixy,oixy->...oxy", hi, w_hi)
    out_ft[..., :m1, :m2] = torch.einsum("...ixy,oixy->...oxy", lo, weights[0])
    return torch.fft.irfft2(out_ft, s=(H, W))
