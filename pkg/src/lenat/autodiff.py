"""Minimal reverse-mode autodiff over float64 numpy arrays.

A Tensor wraps an ndarray plus the parent links and local backward rule
recorded when it was produced by a primitive.  ``backward(loss)`` walks the
graph once in reverse topological order and accumulates gradients into the
``grad`` buffers of parameters (tensors created with requires_grad=True).

Primitives are sized for the two models in this package: 2-D and stacked
3-D matmul, broadcasting add/mul, relu, row gathers, last-axis softmax /
layer norm / concat, and a fused label-smoothed cross entropy.  Everything
is float64; there is no broadcasting cleverness beyond what the models use.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np


_grad_enabled = True


@contextmanager
def no_grad():
    """Disable taping inside the block (inference / decoding)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # sugar used by the model code
    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__


def parameter(data, rng: np.random.Generator | None = None, std: float | None = None) -> Tensor:
    """Create a trainable tensor; ``data`` may be a shape tuple with rng/std init."""
    if isinstance(data, tuple):
        if rng is None or std is None:
            raise ValueError("shape init needs rng and std")
        data = rng.normal(0.0, std, size=data)
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(*tensors: Tensor) -> bool:
    return _grad_enabled and any(
        t.requires_grad or t._parents for t in tensors
    )


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward pass."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data
    if not _tracked(a, b):
        return Tensor(out_data)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + _unbroadcast(g, a.data.shape)
        grads[b] = grads.get(b, 0) + _unbroadcast(g, b.data.shape)

    return Tensor(out_data, parents=(a, b), backward=bwd)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data
    if not _tracked(a, b):
        return Tensor(out_data)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + _unbroadcast(g * b.data, a.data.shape)
        grads[b] = grads.get(b, 0) + _unbroadcast(g * a.data, b.data.shape)

    return Tensor(out_data, parents=(a, b), backward=bwd)


def scale(a, c: float) -> Tensor:
    a = _wrap(a)
    out_data = a.data * c
    if not _tracked(a):
        return Tensor(out_data)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + g * c

    return Tensor(out_data, parents=(a,), backward=bwd)


def matmul(a, b) -> Tensor:
    """Matrix product for 2-D or stacked 3-D operands (leading dims broadcast)."""
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError(
            f"matmul needs ndim >= 2 operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data
    if not _tracked(a, b):
        return Tensor(out_data)

    def bwd(g, grads):
        ga = g @ b.data.swapaxes(-1, -2)
        gb = a.data.swapaxes(-1, -2) @ g
        grads[a] = grads.get(a, 0) + _unbroadcast(ga, a.data.shape)
        grads[b] = grads.get(b, 0) + _unbroadcast(gb, b.data.shape)

    return Tensor(out_data, parents=(a, b), backward=bwd)


def sum_all(a) -> Tensor:
    """Sum every entry down to a scalar."""
    a = _wrap(a)
    out_data = np.float64(a.data.sum())
    if not _tracked(a):
        return Tensor(out_data)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + np.full_like(a.data, g)

    return Tensor(out_data, parents=(a,), backward=bwd)


def relu(a) -> Tensor:
    a = _wrap(a)
    out_data = np.maximum(a.data, 0.0)
    if not _tracked(a):
        return Tensor(out_data)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + g * (a.data > 0.0)

    return Tensor(out_data, parents=(a,), backward=bwd)


def take_rows(a, idx) -> Tensor:
    """Gather rows along axis 0; embedding lookup is take_rows(table, ids)."""
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.int64)
    n = a.data.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(
            f"row index out of range: indices in [{idx.min()}, {idx.max()}] "
            f"for table of {n} rows, shape {a.data.shape}"
        )
    out_data = a.data[idx]
    if not _tracked(a):
        return Tensor(out_data)

    def bwd(g, grads):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        grads[a] = grads.get(a, 0) + ga

    return Tensor(out_data, parents=(a,), backward=bwd)


embedding_lookup = take_rows


def concat_last(a, b) -> Tensor:
    """Concatenate two tensors along the last axis."""
    a, b = _wrap(a), _wrap(b)
    out_data = np.concatenate([a.data, b.data], axis=-1)
    if not _tracked(a, b):
        return Tensor(out_data)
    na = a.data.shape[-1]

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + g[..., :na]
        grads[b] = grads.get(b, 0) + g[..., na:]

    return Tensor(out_data, parents=(a, b), backward=bwd)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out_data = a.data.reshape(shape)
    if not _tracked(a):
        return Tensor(out_data)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + g.reshape(a.data.shape)

    return Tensor(out_data, parents=(a,), backward=bwd)


def transpose(a, axes) -> Tensor:
    a = _wrap(a)
    out_data = a.data.transpose(axes)
    if not _tracked(a):
        return Tensor(out_data)
    inv = np.argsort(axes)

    def bwd(g, grads):
        grads[a] = grads.get(a, 0) + g.transpose(inv)

    return Tensor(out_data, parents=(a,), backward=bwd)


def softmax(a, axis: int = -1) -> Tensor:
    a = _wrap(a)
    if np.isnan(a.data).any():
        raise ValueError("softmax input contains NaN")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)
    if not _tracked(a):
        return Tensor(out_data)

    def bwd(g, grads):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        grads[a] = grads.get(a, 0) + out_data * (g - dot)

    return Tensor(out_data, parents=(a,), backward=bwd)


def layer_norm(a, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    a, gain, bias = _wrap(a), _wrap(gain), _wrap(bias)
    d = a.data.shape[-1]
    if d < 2:
        raise ValueError(f"layer_norm needs a feature axis of length >= 2, got {d}")
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data
    if not _tracked(a, gain, bias):
        return Tensor(out_data)

    def bwd(g, grads):
        ghat = g * gain.data
        m1 = ghat.mean(axis=-1, keepdims=True)
        m2 = (ghat * xhat).mean(axis=-1, keepdims=True)
        grads[a] = grads.get(a, 0) + (ghat - m1 - xhat * m2) * inv
        sum_axes = tuple(range(g.ndim - 1))
        grads[gain] = grads.get(gain, 0) + (g * xhat).sum(axis=sum_axes)
        grads[bias] = grads.get(bias, 0) + g.sum(axis=sum_axes)

    return Tensor(out_data, parents=(a, gain, bias), backward=bwd)


def cross_entropy(
    logits, targets, label_smoothing: float = 0.0, ignore_index: int = -1
) -> Tensor:
    """Mean smoothed negative log-likelihood over positions not equal to
    ignore_index.  Smoothing mass is spread uniformly over the whole
    vocabulary, so a uniform prediction costs exactly ln(V) at any epsilon.
    """
    logits = _wrap(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n, v = logits.data.shape
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} != ({n},)")
    keep = targets != ignore_index
    n_kept = int(keep.sum())
    if n_kept == 0:
        raise ValueError("cross_entropy: every position is ignored")
    safe_targets = np.where(keep, targets, 0)
    if safe_targets.min() < 0 or safe_targets.max() >= v:
        raise IndexError(f"target id out of range for vocab of {v}")

    shifted = logits.data - logits.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    logp = shifted - logz
    nll = -logp[np.arange(n), safe_targets]
    smooth = -logp.mean(axis=-1)
    eps = label_smoothing
    per_pos = (1.0 - eps) * nll + eps * smooth
    loss = float(per_pos[keep].mean())
    out = Tensor(np.float64(loss))
    if not _tracked(logits):
        return out

    def bwd(g, grads):
        p = np.exp(logp)
        q = np.full_like(p, eps / v)
        q[np.arange(n), safe_targets] += 1.0 - eps
        gl = (p - q) * (keep[:, None] / n_kept) * g
        grads[logits] = grads.get(logits, 0) + gl

    out._parents = (logits,)
    out._backward = bwd
    return out


def backward(loss: Tensor):
    """Reverse-topological sweep from a scalar loss; accumulates into
    ``grad`` of every reachable requires_grad tensor.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward needs a scalar loss, got shape {loss.data.shape}")

    order: list[Tensor] = []
    state: dict[int, int] = {}  # 0 in-progress, 1 done
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        nid = id(node)
        if processed:
            state[nid] = 1
            order.append(node)
            continue
        st = state.get(nid)
        if st == 1:
            continue
        if st == 0:
            raise ValueError("cycle detected in compute graph")
        state[nid] = 0
        stack.append((node, True))
        for p in node._parents:
            if state.get(id(p)) != 1:
                stack.append((p, False))

    grads: dict[Tensor, np.ndarray] = {loss: np.float64(1.0)}
    for node in reversed(order):
        g = grads.pop(node, None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad += g
        if node._backward is not None:
            node._backward(np.asarray(g, dtype=np.float64), grads)
