"""BlastOFormer: patch tokens -> RoPE self-attention encoder -> RFF/RoPE
cross-attention point decoder -> linear depatchification.

Also holds the UnscalerCNN that maps predicted log-pressure maps back to Pa.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from typing import NamedTuple

import torch
from torch import nn

from .nn import ops
from .nn.modules import Conv3x3, LayerNorm, Linear, make_generator

N_VALUE_CHANNELS = 4
N_COORD_CHANNELS = 2


class TokenSeq(NamedTuple):
    values: torch.Tensor     # [..., n_tok, d]
    positions: torch.Tensor  # [..., n_tok, 2] patch-center coordinates (m)


@dataclass(frozen=True)
class BlastOFormerConfig:
    nx: int = 99
    ny: int = 99
    patch_size: int = 1
    input_embed: int = 96
    seq_embed: int = 256
    encoder_layers: int = 6
    heads: int = 4
    ff_mult: int = 2
    rff_dim: int = 64
    rff_sigma: float = 1.0
    pos_scale: float = 1.0
    model_seed: int = 0

    def __post_init__(self):
        p = self.patch_size
        if p < 1 or self.nx % p or self.ny % p:
            raise ValueError(f"patch size {p} must divide the {self.ny}x{self.nx} grid")
        if self.seq_embed % self.heads:
            raise ValueError("seq_embed must be divisible by heads")
        if (self.seq_embed // self.heads) % 4:
            raise ValueError("head dim must be divisible by 4 for 2-D RoPE")

    @property
    def n_tokens(self) -> int:
        return (self.nx * self.ny) // self.patch_size ** 2

    @property
    def head_dim(self) -> int:
        return self.seq_embed // self.heads

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(d: dict) -> str:
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------- patching

def patchify_grid(x: torch.Tensor, p: int) -> torch.Tensor:
    """[..., ny, nx, c] -> [..., n_tok, p*p*c], row-major over patches."""
    *lead, ny, nx, c = x.shape
    if ny % p or nx % p:
        raise ValueError(f"patch size {p} does not divide {ny}x{nx}")
    x = x.reshape(*lead, ny // p, p, nx // p, p, c)
    x = x.transpose(-4, -3)  # [..., ny/p, nx/p, p, p, c]
    return x.reshape(*lead, (ny // p) * (nx // p), p * p * c)


def depatchify_grid(u: torch.Tensor, p: int, ny: int, nx: int) -> torch.Tensor:
    """[..., n_tok, p*p] -> [..., ny, nx]; inverse of :func:`patchify_grid` for c=1."""
    *lead, n_tok, width = u.shape
    if width != p * p or n_tok * p * p != nx * ny:
        raise ValueError(f"cannot depatchify {n_tok} tokens of width {width} into {ny}x{nx}")
    u = u.reshape(*lead, ny // p, nx // p, p, p)
    u = u.transpose(-3, -2)  # [..., ny/p, p, nx/p, p]
    return u.reshape(*lead, ny, nx)


def patch_centers(coords: torch.Tensor, p: int) -> torch.Tensor:
    """Mean coordinate of each patch: [..., ny, nx, 2] -> [..., n_tok, 2]."""
    flat = patchify_grid(coords, p)
    return flat.reshape(*flat.shape[:-1], p * p, 2).mean(dim=-2)


def patchify(values: torch.Tensor, coords: torch.Tensor, p: int,
             val_proj: Linear, pos_proj: Linear) -> tuple[TokenSeq, TokenSeq]:
    """Project p x p patches of the value and coordinate grids to 4- and 2-wide tokens."""
    centers = patch_centers(coords, p)
    value_tokens = val_proj(patchify_grid(values, p))
    pos_tokens = pos_proj(patchify_grid(coords, p))
    return TokenSeq(value_tokens, centers), TokenSeq(pos_tokens, centers)


# ------------------------------------------------------------------ blocks

def _split_heads(x: torch.Tensor, heads: int) -> torch.Tensor:
    return x.reshape(*x.shape[:-1], heads, x.shape[-1] // heads)


def _merge_heads(x: torch.Tensor) -> torch.Tensor:
    return x.reshape(*x.shape[:-2], x.shape[-2] * x.shape[-1])


class SelfAttentionBlock(nn.Module):
    """Pre-norm RoPE self-attention followed by a pre-norm ReLU feed-forward."""

    def __init__(self, cfg: BlastOFormerConfig, gen: torch.Generator):
        super().__init__()
        S, hidden = cfg.seq_embed, cfg.ff_mult * cfg.seq_embed
        self.heads = cfg.heads
        self.pos_scale = cfg.pos_scale
        self.ln_attn = LayerNorm(S)
        self.q = Linear(S, S, gen)
        self.k = Linear(S, S, gen)
        self.v = Linear(S, S, gen)
        self.o = Linear(S, S, gen)
        self.ln_ff = LayerNorm(S)
        self.ff1 = Linear(S, hidden, gen)
        self.ff2 = Linear(hidden, S, gen)

    def forward(self, x: torch.Tensor, pos: torch.Tensor) -> torch.Tensor:
        h = self.ln_attn(x)
        Q = ops.rope_apply(_split_heads(self.q(h), self.heads), pos, self.pos_scale)
        K = ops.rope_apply(_split_heads(self.k(h), self.heads), pos, self.pos_scale)
        V = _split_heads(self.v(h), self.heads)
        x = x + self.o(_merge_heads(ops.softmax_attention(Q, K, V)))
        return x + self.ff2(ops.relu(self.ff1(self.ln_ff(x))))


class SpatialEncoder(nn.Module):
    def __init__(self, cfg: BlastOFormerConfig, gen: torch.Generator):
        super().__init__()
        self.embed_in = Linear(N_VALUE_CHANNELS, cfg.input_embed, gen)
        self.embed_seq = Linear(cfg.input_embed, cfg.seq_embed, gen)
        self.ln_in = LayerNorm(cfg.seq_embed)
        self.blocks = nn.ModuleList(SelfAttentionBlock(cfg, gen) for _ in range(cfg.encoder_layers))
        self.ln_out = LayerNorm(cfg.seq_embed)

    def forward(self, tokens: TokenSeq) -> TokenSeq:
        if tokens.values.shape[-1] != N_VALUE_CHANNELS:
            raise ValueError(f"encoder expects {N_VALUE_CHANNELS}-wide value tokens")
        x = self.ln_in(self.embed_seq(ops.relu(self.embed_in(tokens.values))))
        for block in self.blocks:
            x = block(x, tokens.positions)
        return TokenSeq(self.ln_out(x), tokens.positions)


class PointDecoder(nn.Module):
    """One RoPE cross-attention from query locations onto the encoder tokens.

    The residual stream is the RFF query embedding, so each output row depends
    on its own query plus what it attends to.
    """

    def __init__(self, cfg: BlastOFormerConfig, gen: torch.Generator):
        super().__init__()
        S, p2 = cfg.seq_embed, cfg.patch_size ** 2
        self.heads = cfg.heads
        self.pos_scale = cfg.pos_scale
        B = torch.randn(N_COORD_CHANNELS, cfg.rff_dim, generator=gen, dtype=torch.float64) * cfg.rff_sigma
        self.register_buffer("rff_B", B)
        self.query_embed = Linear(2 * cfg.rff_dim, S, gen)
        self.q = Linear(S, S, gen)
        self.k = Linear(S, S, gen)
        self.v = Linear(S, S, gen)
        self.o = Linear(S, S, gen)
        self.ff1 = Linear(S, S, gen)
        self.ff2 = Linear(S, p2, gen)

    def forward(self, z: TokenSeq, queries: TokenSeq) -> torch.Tensor:
        if z.values.shape[-1] != self.q.W.shape[0]:
            raise ValueError("decoder: latent width does not match the config")
        qe = self.query_embed(ops.rff_features(queries.values, self.rff_B.to(queries.values.dtype)))
        Q = ops.rope_apply(_split_heads(self.q(qe), self.heads), queries.positions, self.pos_scale)
        K = ops.rope_apply(_split_heads(self.k(z.values), self.heads), z.positions, self.pos_scale)
        V = _split_heads(self.v(z.values), self.heads)
        zq = qe + self.o(_merge_heads(ops.softmax_attention(Q, K, V)))
        return self.ff2(ops.relu(self.ff1(zq)))


class BlastOFormer(nn.Module):
    kind = "blastoformer"

    def __init__(self, cfg: BlastOFormerConfig | None = None):
        super().__init__()
        cfg = cfg or BlastOFormerConfig()
        self.cfg = cfg
        gen = make_generator(cfg.model_seed)
        p2 = cfg.patch_size ** 2
        self.val_proj = Linear(p2 * N_VALUE_CHANNELS, N_VALUE_CHANNELS, gen)
        self.pos_proj = Linear(p2 * N_COORD_CHANNELS, N_COORD_CHANNELS, gen)
        self.encoder = SpatialEncoder(cfg, gen)
        self.decoder = PointDecoder(cfg, gen)
        self.depatch = Linear(p2, p2, gen)

    def tokenize(self, values, coords) -> tuple[TokenSeq, TokenSeq]:
        return patchify(values, coords, self.cfg.patch_size, self.val_proj, self.pos_proj)

    def depatchify(self, u: torch.Tensor) -> torch.Tensor:
        cfg = self.cfg
        return depatchify_grid(self.depatch(u), cfg.patch_size, cfg.ny, cfg.nx)

    def forward(self, values: torch.Tensor, coords: torch.Tensor, cond=None) -> torch.Tensor:
        """values [..., ny, nx, 4], coords [..., ny, nx, 2] -> normalized log-pressure [..., ny, nx]."""
        value_tokens, pos_tokens = self.tokenize(values, coords)
        z = self.encoder(value_tokens)
        u = self.decoder(z, pos_tokens)
        return self.depatchify(u)


def count_params(cfg: BlastOFormerConfig) -> int:
    """Closed-form parameter count of :class:`BlastOFormer` (frozen RFF matrix excluded)."""
    E, S, p2 = cfg.input_embed, cfg.seq_embed, cfg.patch_size ** 2
    H = cfg.ff_mult * S
    lin = lambda a, b: a * b + b  # noqa: E731
    patch = lin(4 * p2, 4) + lin(2 * p2, 2)
    block = 2 * S + 4 * lin(S, S) + 2 * S + lin(S, H) + lin(H, S)
    encoder = lin(4, E) + lin(E, S) + 2 * S + cfg.encoder_layers * block + 2 * S
    decoder = lin(2 * cfg.rff_dim, S) + 4 * lin(S, S) + lin(S, S) + lin(S, p2)
    return patch + encoder + decoder + lin(p2, p2)


def module_param_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


# ------------------------------------------------------------- unscaler

UNSCALER_CHANNELS = (1, 32, 64, 128, 64, 32, 1)
MIN_PRESSURE_PA = 1.0


@dataclass(frozen=True)
class UnscalerConfig:
    log_mean: float = 0.0
    log_std: float = 1.0
    channels: tuple = UNSCALER_CHANNELS
    model_seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UnscalerConfig":
        d = dict(d)
        d["channels"] = tuple(d["channels"])
        return cls(**d)


class UnscalerCNN(nn.Module):
    """Six 3x3 conv layers correcting exp(log-prediction) in Pa.

    The network outputs a log-space residual r and the map is
    ``p = max(exp(l + r), 1 Pa)``; the final layer starts at zero, so an
    untrained unscaler is plain exponentiation.
    """

    kind = "unscaler"

    def __init__(self, cfg: UnscalerConfig | None = None):
        super().__init__()
        cfg = cfg or UnscalerConfig()
        self.cfg = cfg
        gen = make_generator(cfg.model_seed)
        ch = cfg.channels
        self.layers = nn.ModuleList(Conv3x3(a, b, gen) for a, b in zip(ch[:-1], ch[1:]))
        with torch.no_grad():
            self.layers[-1].kernels.zero_()
            self.layers[-1].bias.zero_()

    def residual(self, log_field: torch.Tensor) -> torch.Tensor:
        x = ((log_field - self.cfg.log_mean) / self.cfg.log_std).unsqueeze(-3)
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ops.relu(x)
        return x.squeeze(-3)

    def forward(self, log_field: torch.Tensor) -> torch.Tensor:
        """log_field [..., ny, nx] (natural-log Pa) -> pressure in Pa.

        The residual runs in the network's dtype; the exponential keeps the
        input's precision, so a zero residual reproduces plain exp exactly.
        """
        r = self.residual(log_field.to(self.layers[0].kernels.dtype)).to(log_field.dtype)
        return torch.exp(log_field + r).clamp(min=MIN_PRESSURE_PA)


def unscaler_param_count(cfg: UnscalerConfig) -> int:
    ch = cfg.channels
    return sum(a * b * 9 + b for a, b in zip(ch[:-1], ch[1:]))
