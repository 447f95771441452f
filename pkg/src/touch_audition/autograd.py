"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray plus a gradient slot and a backward closure; ops
build the graph eagerly and `backward()` runs the closures in reverse
topological order. Only the ops this model needs are implemented: broadcast
add/mul, matmul, relu, dilated valid conv2d, 2x2 average pooling, global
average pooling, batch norm, dropout, concat, and softmax cross-entropy.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_GRAD_ENABLED = True

# Cap on the im2col scratch buffer conv2d lowers each batch chunk into. Keeps
# peak memory flat for large batches while leaving single-clip inference as
# one full-size GEMM.
_CONV_COL_BYTES = 64 << 20


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference / eval)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _sum_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back down to `shape`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from this (scalar) tensor through the graph."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
                # The graph is consumed as it runs. An interior node's grad is
                # fully used by its own closure, and dropping the closure and
                # parent links matters beyond the grads themselves: each
                # closure captures its output tensor, a reference cycle that
                # would otherwise park every step's activations until the
                # cycle collector got around to them. Leaf tensors (parameters,
                # inputs) have no closure and keep their grads.
                node._backward = None
                node.grad = None
                node._parents = ()

    # -- graph helpers -----------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, parents: tuple["Tensor", ...]) -> "Tensor":
        track = _GRAD_ENABLED and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=track)
        if track:
            out._parents = parents
        return out

    # -- ops ---------------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        out = Tensor._make(self.data + other.data, (self, other))
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(_sum_to(out.grad, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_sum_to(out.grad, other.data.shape))
            out._backward = _backward
        return out

    def __mul__(self, other: "Tensor") -> "Tensor":
        out = Tensor._make(self.data * other.data, (self, other))
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(_sum_to(out.grad * other.data, self.data.shape))
                if other.requires_grad:
                    other._accumulate(_sum_to(out.grad * self.data, other.data.shape))
            out._backward = _backward
        return out

    def matmul(self, other: "Tensor") -> "Tensor":
        out = Tensor._make(self.data @ other.data, (self, other))
        if out.requires_grad:
            def _backward():
                if self.requires_grad:
                    self._accumulate(out.grad @ other.data.T)
                if other.requires_grad:
                    other._accumulate(self.data.T @ out.grad)
            out._backward = _backward
        return out

    def relu(self) -> "Tensor":
        out = Tensor._make(np.maximum(self.data, 0), (self,))
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * (self.data > 0))
            out._backward = _backward
        return out

    def reshape(self, *shape: int) -> "Tensor":
        out = Tensor._make(self.data.reshape(*shape), (self,))
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad.reshape(self.data.shape))
            out._backward = _backward
        return out

    def sum(self) -> "Tensor":
        """Sum to a scalar (used by gradient checks)."""
        out = Tensor._make(np.asarray(self.data.sum()), (self,))
        if out.requires_grad:
            def _backward():
                self._accumulate(np.broadcast_to(out.grad, self.data.shape).copy())
            out._backward = _backward
        return out

    def mean_pool(self) -> "Tensor":
        """Global average pool over the two spatial axes: (n,c,t,f) -> (n,c)."""
        n, c, t, f = self.data.shape
        out = Tensor._make(self.data.mean(axis=(2, 3)), (self,))
        if out.requires_grad:
            def _backward():
                g = out.grad[:, :, None, None] / (t * f)
                self._accumulate(np.broadcast_to(g, self.data.shape).copy())
            out._backward = _backward
        return out

    def avg_pool2d(self) -> "Tensor":
        """2x2 average pooling, stride 2, floor semantics on odd sizes."""
        n, c, t, f = self.data.shape
        t2, f2 = t // 2, f // 2
        if t2 < 1 or f2 < 1:
            raise ValueError(f"avg_pool2d needs both spatial dims >= 2, got input shape {self.data.shape}")
        x = self.data
        out_data = x[:, :, 0 : t2 * 2 : 2, 0 : f2 * 2 : 2] + x[:, :, 1 : t2 * 2 : 2, 0 : f2 * 2 : 2]
        out_data += x[:, :, 0 : t2 * 2 : 2, 1 : f2 * 2 : 2]
        out_data += x[:, :, 1 : t2 * 2 : 2, 1 : f2 * 2 : 2]
        out_data *= 0.25
        out = Tensor._make(out_data, (self,))
        if out.requires_grad:
            def _backward():
                g = np.zeros_like(self.data)
                spread = out.grad * 0.25
                g[:, :, 0 : t2 * 2 : 2, 0 : f2 * 2 : 2] = spread
                g[:, :, 1 : t2 * 2 : 2, 0 : f2 * 2 : 2] = spread
                g[:, :, 0 : t2 * 2 : 2, 1 : f2 * 2 : 2] = spread
                g[:, :, 1 : t2 * 2 : 2, 1 : f2 * 2 : 2] = spread
                self._accumulate(g)
            out._backward = _backward
        return out

    def conv2d(self, weight: "Tensor", bias: "Tensor", dilation: tuple[int, int] = (1, 1)) -> "Tensor":
        """Valid (unpadded) stride-1 2-D convolution with dilation.

        self: (n, c, t, f); weight: (o, c, kt, kf); bias: (o,).
        Output: (n, o, t - (kt-1)*rt, f - (kf-1)*rf).

        Forward lowers each batch chunk to an im2col matrix and runs one GEMM;
        the chunking caps scratch memory on large batches. Backward loops over
        kernel taps with one GEMM per tap, so no temporary ever grows past the
        input-gradient size.
        """
        rt, rf = dilation
        n, c, t, f = self.data.shape
        o, c2, kt, kf = weight.data.shape
        if c != c2:
            raise ValueError(f"conv2d channel mismatch: input has {c}, weight expects {c2}")
        kt_eff = (kt - 1) * rt + 1
        kf_eff = (kf - 1) * rf + 1
        if t < kt_eff or f < kf_eff:
            raise ValueError(
                f"conv2d input {t}x{f} smaller than effective kernel {kt_eff}x{kf_eff}"
            )
        to = t - kt_eff + 1
        fo = f - kf_eff + 1
        rtype = np.result_type(self.data.dtype, weight.data.dtype)
        # Lowered K-axis order is (kt, kf, c): from a channels-last input view
        # the trailing (kf, c) block is contiguous, so filling the col buffer
        # runs at memcpy speed instead of gathering single floats.
        w2 = np.ascontiguousarray(weight.data.transpose(2, 3, 1, 0), dtype=rtype).reshape(kt * kf * c, o)
        out_data = np.empty((n, o, to, fo), dtype=rtype)
        per_sample = to * fo * c * kt * kf * rtype.itemsize
        step = max(1, min(n, _CONV_COL_BYTES // max(per_sample, 1)))
        for a in range(0, n, step):
            xc = self.data[a : a + step]
            nc = xc.shape[0]
            xl = np.ascontiguousarray(xc.transpose(0, 2, 3, 1), dtype=rtype)
            vf = sliding_window_view(xl, kf_eff, axis=2)[..., ::rf].swapaxes(3, 4)
            col = np.empty((nc, to, fo, kt, kf, c), dtype=rtype)
            for i in range(kt):
                col[:, :, :, i] = vf[:, i * rt : i * rt + to]
            col2 = col.reshape(nc * to * fo, kt * kf * c)
            if nc == 1:
                # Transposed GEMM writes channels-first output directly.
                np.matmul(w2.T, col2.T, out=out_data[a].reshape(o, to * fo))
            else:
                prod = col2 @ w2
                out_data[a : a + nc] = prod.reshape(nc, to, fo, o).transpose(0, 3, 1, 2)
        out_data += bias.data.reshape(1, -1, 1, 1)
        out = Tensor._make(out_data, (self, weight, bias))
        if out.requires_grad:
            def _backward():
                if bias.requires_grad:
                    bias._accumulate(out.grad.sum(axis=(0, 2, 3)))
                need_w = weight.requires_grad
                need_x = self.requires_grad
                if not (need_w or need_x):
                    return
                g2 = np.ascontiguousarray(out.grad.transpose(0, 2, 3, 1)).reshape(-1, o)
                xl = np.ascontiguousarray(self.data.transpose(0, 2, 3, 1)) if need_w else None
                gw = np.empty_like(weight.data) if need_w else None
                gxl = np.zeros((n, t, f, c), dtype=g2.dtype) if need_x else None
                for i in range(kt):
                    ti = i * rt
                    for j in range(kf):
                        fj = j * rf
                        if need_w:
                            sl = np.ascontiguousarray(xl[:, ti : ti + to, fj : fj + fo, :])
                            gw[:, :, i, j] = g2.T @ sl.reshape(-1, c)
                        if need_x:
                            gs = g2 @ weight.data[:, :, i, j]
                            gxl[:, ti : ti + to, fj : fj + fo, :] += gs.reshape(-1, to, fo, c)
                if need_w:
                    weight._accumulate(gw)
                if need_x:
                    self._accumulate(np.ascontiguousarray(gxl.transpose(0, 3, 1, 2)))
            out._backward = _backward
        return out

    def batch_norm(
        self,
        gamma: "Tensor",
        beta: "Tensor",
        running_mean: np.ndarray,
        running_var: np.ndarray,
        training: bool,
        momentum: float = 0.1,
        eps: float = 1e-5,
    ) -> "Tensor":
        """Per-channel batch normalization over (n, c, t, f).

        Training mode normalizes with biased batch statistics and updates the
        running buffers in place; eval mode uses the buffers.
        """
        x = self.data
        if training:
            mu = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            running_mean *= 1.0 - momentum
            running_mean += momentum * mu
            running_var *= 1.0 - momentum
            running_var += momentum * var
        else:
            mu, var = running_mean, running_var
        inv_std = 1.0 / np.sqrt(var + eps)
        track = _GRAD_ENABLED and (self.requires_grad or gamma.requires_grad or beta.requires_grad)
        if track:
            xhat = (x - mu.reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
            out_data = gamma.data.reshape(1, -1, 1, 1) * xhat + beta.data.reshape(1, -1, 1, 1)
        else:
            # Inference path: fold the whole affine into one scale and shift.
            scale = gamma.data * inv_std
            shift = beta.data - mu * scale
            out_data = x * scale.reshape(1, -1, 1, 1) + shift.reshape(1, -1, 1, 1)
        out = Tensor._make(out_data.astype(x.dtype, copy=False), (self, gamma, beta))
        if out.requires_grad:
            def _backward():
                if beta.requires_grad:
                    beta._accumulate(out.grad.sum(axis=(0, 2, 3)))
                if gamma.requires_grad:
                    gamma._accumulate((out.grad * xhat).sum(axis=(0, 2, 3)))
                if self.requires_grad:
                    gxhat = out.grad * gamma.data.reshape(1, -1, 1, 1)
                    if training:
                        m = x.shape[0] * x.shape[2] * x.shape[3]
                        s1 = gxhat.sum(axis=(0, 2, 3)).reshape(1, -1, 1, 1)
                        s2 = (gxhat * xhat).sum(axis=(0, 2, 3)).reshape(1, -1, 1, 1)
                        gx = (gxhat - s1 / m - xhat * s2 / m) * inv_std.reshape(1, -1, 1, 1)
                    else:
                        gx = gxhat * inv_std.reshape(1, -1, 1, 1)
                    self._accumulate(gx.astype(x.dtype, copy=False))
            out._backward = _backward
        return out

    def dropout(self, p: float, rng: np.random.Generator, training: bool) -> "Tensor":
        """Inverted dropout: zero with probability p, scale kept units by 1/(1-p)."""
        if not training or p <= 0.0:
            return self
        mask = (rng.random(self.data.shape) >= p).astype(self.data.dtype) / (1.0 - p)
        out = Tensor._make(self.data * mask, (self,))
        if out.requires_grad:
            def _backward():
                self._accumulate(out.grad * mask)
            out._backward = _backward
        return out


def concat(tensors: list[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along an axis; backward splits the gradient."""
    out = Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def _backward():
            for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx = [slice(None)] * out.grad.ndim
                    idx[axis] = slice(a, b)
                    t._accumulate(out.grad[tuple(idx)])
        out._backward = _backward
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis (plain ndarray helper)."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy; labels are integer class indices (n,)."""
    n = logits.data.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    nll = logsumexp - z[np.arange(n), labels]
    out = Tensor._make(np.asarray(nll.mean(), dtype=logits.data.dtype).reshape(()), (logits,))
    if out.requires_grad:
        def _backward():
            probs = softmax(logits.data)
            probs[np.arange(n), labels] -= 1.0
            logits._accumulate(out.grad * probs / n)
        out._backward = _backward
    return out
