"""Transformer building blocks over the autodiff substrate.

All blocks accept inputs shaped (..., T, d_model) so single sentences and
stacked hypothesis batches share one code path.  Pre-LN residual layout
with a final norm after each stack.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Linear:
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, zero: bool = False):
        if zero:
            self.w = ad.parameter(np.zeros((d_in, d_out)))
        else:
            self.w = ad.parameter((d_in, d_out), rng=rng, std=d_in**-0.5)
        self.b = ad.parameter(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.w), self.b)

    def named_params(self, prefix: str):
        yield f"{prefix}.w", self.w
        yield f"{prefix}.b", self.b


class LayerNorm:
    def __init__(self, d: int):
        self.g = ad.parameter(np.ones(d))
        self.b = ad.parameter(np.zeros(d))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.g, self.b)

    def named_params(self, prefix: str):
        yield f"{prefix}.g", self.g
        yield f"{prefix}.b", self.b


def _split_heads(x: Tensor, heads: int) -> Tensor:
    """(..., T, d) -> (..., heads, T, d/heads)"""
    *lead, t, d = x.shape
    x = ad.reshape(x, (*lead, t, heads, d // heads))
    axes = list(range(x.ndim))
    axes[-3], axes[-2] = axes[-2], axes[-3]
    return ad.transpose(x, tuple(axes))


def _merge_heads(x: Tensor) -> Tensor:
    """(..., heads, T, dk) -> (..., T, heads*dk)"""
    axes = list(range(x.ndim))
    axes[-3], axes[-2] = axes[-2], axes[-3]
    x = ad.transpose(x, tuple(axes))
    *lead, t, h, dk = x.shape
    return ad.reshape(x, (*lead, t, h * dk))


class MultiHeadAttention:
    def __init__(self, d_model: int, heads: int, rng: np.random.Generator):
        if d_model % heads != 0:
            raise ValueError(f"d_model {d_model} not divisible by heads {heads}")
        self.heads = heads
        self.dk = d_model // heads
        self.wq = Linear(d_model, d_model, rng)
        self.wk = Linear(d_model, d_model, rng)
        self.wv = Linear(d_model, d_model, rng)
        self.wo = Linear(d_model, d_model, rng)

    def __call__(self, q_in: Tensor, kv_in: Tensor, mask: np.ndarray | None = None) -> Tensor:
        q = _split_heads(self.wq(q_in), self.heads)
        k = _split_heads(self.wk(kv_in), self.heads)
        v = _split_heads(self.wv(kv_in), self.heads)
        kt_axes = list(range(k.ndim))
        kt_axes[-1], kt_axes[-2] = kt_axes[-2], kt_axes[-1]
        scores = ad.scale(ad.matmul(q, ad.transpose(k, tuple(kt_axes))), self.dk**-0.5)
        if mask is not None:
            scores = ad.add(scores, Tensor(mask))
        attn = ad.softmax(scores, axis=-1)
        out = _merge_heads(ad.matmul(attn, v))
        return self.wo(out)

    def named_params(self, prefix: str):
        for name, lin in (("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo)):
            yield from lin.named_params(f"{prefix}.{name}")


class FeedForward:
    def __init__(self, d_model: int, d_ff: int, rng: np.random.Generator):
        self.w1 = Linear(d_model, d_ff, rng)
        self.w2 = Linear(d_ff, d_model, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.w2(ad.relu(self.w1(x)))

    def named_params(self, prefix: str):
        yield from self.w1.named_params(f"{prefix}.w1")
        yield from self.w2.named_params(f"{prefix}.w2")


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when p == 0 or no rng (inference)."""
    if p <= 0.0 or rng is None or not ad.grad_enabled():
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return ad.mul(x, Tensor(mask))


class EncoderLayer:
    def __init__(self, d_model: int, heads: int, d_ff: int, rng):
        self.ln1 = LayerNorm(d_model)
        self.attn = MultiHeadAttention(d_model, heads, rng)
        self.ln2 = LayerNorm(d_model)
        self.ffn = FeedForward(d_model, d_ff, rng)

    def __call__(
        self, x: Tensor, p_drop: float = 0.0, rng=None, mask: np.ndarray | None = None
    ) -> Tensor:
        h = self.ln1(x)
        x = ad.add(x, dropout(self.attn(h, h, mask), p_drop, rng))
        x = ad.add(x, dropout(self.ffn(self.ln2(x)), p_drop, rng))
        return x

    def named_params(self, prefix: str):
        yield from self.ln1.named_params(f"{prefix}.ln1")
        yield from self.attn.named_params(f"{prefix}.attn")
        yield from self.ln2.named_params(f"{prefix}.ln2")
        yield from self.ffn.named_params(f"{prefix}.ffn")


class DecoderLayer:
    """Self-attention (optionally causal) + cross-attention + FFN."""

    def __init__(self, d_model: int, heads: int, d_ff: int, rng):
        self.ln1 = LayerNorm(d_model)
        self.self_attn = MultiHeadAttention(d_model, heads, rng)
        self.ln2 = LayerNorm(d_model)
        self.cross_attn = MultiHeadAttention(d_model, heads, rng)
        self.ln3 = LayerNorm(d_model)
        self.ffn = FeedForward(d_model, d_ff, rng)

    def __call__(
        self,
        x: Tensor,
        memory: Tensor,
        self_mask: np.ndarray | None,
        p_drop: float = 0.0,
        rng=None,
        cross_mask: np.ndarray | None = None,
    ) -> Tensor:
        h = self.ln1(x)
        x = ad.add(x, dropout(self.self_attn(h, h, self_mask), p_drop, rng))
        x = ad.add(x, dropout(self.cross_attn(self.ln2(x), memory, cross_mask), p_drop, rng))
        x = ad.add(x, dropout(self.ffn(self.ln3(x)), p_drop, rng))
        return x

    def named_params(self, prefix: str):
        yield from self.ln1.named_params(f"{prefix}.ln1")
        yield from self.self_attn.named_params(f"{prefix}.self_attn")
        yield from self.ln2.named_params(f"{prefix}.ln2")
        yield from self.cross_attn.named_params(f"{prefix}.cross_attn")
        yield from self.ln3.named_params(f"{prefix}.ln3")
        yield from self.ffn.named_params(f"{prefix}.ffn")


def causal_mask(t: int) -> np.ndarray:
    """(t, t) additive mask: -1e9 above the diagonal."""
    return np.triu(np.full((t, t), -1e9), k=1)
