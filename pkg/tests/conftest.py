"""Shared test oracles: finite-difference gradient checks, a naive
convolution reference, and an impulse-dependency footprint probe."""

from __future__ import annotations

import numpy as np
import pytest

from touch_audition.autograd import Tensor


def numerical_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar f at x (float64)."""
    x = x.astype(np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-8)
    return float(np.abs(a - b).max(initial=0.0) / denom)


def check_grads(build, arrays: dict[str, np.ndarray], tol: float = 1e-4) -> None:
    """Compare autograd gradients against finite differences.

    `build(tensors)` maps {name: Tensor} to a scalar Tensor. Every array is
    float64 and marked requires_grad.
    """
    tensors = {k: Tensor(v.astype(np.float64), requires_grad=True) for k, v in arrays.items()}
    loss = build(tensors)
    loss.backward()
    for name, t in tensors.items():
        def f(x, _name=name):
            local = {
                k: Tensor(x if k == _name else v.data.copy(), requires_grad=False)
                for k, v in tensors.items()
            }
            return float(build(local).data)

        num = numerical_grad(f, arrays[name].astype(np.float64))
        ana = t.grad if t.grad is not None else np.zeros_like(num)
        err = rel_err(ana, num)
        assert err < tol, f"gradient mismatch for {name}: rel err {err:.3e} >= {tol}"


def naive_conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray, dilation=(1, 1)) -> np.ndarray:
    """Reference dilated valid convolution with explicit loops."""
    rt, rf = dilation
    n, c, t, f = x.shape
    o, _, kt, kf = w.shape
    to = t - (kt - 1) * rt
    fo = f - (kf - 1) * rf
    out = np.zeros((n, o, to, fo), dtype=x.dtype)
    for ni in range(n):
        for oi in range(o):
            for ti in range(to):
                for fi in range(fo):
                    acc = 0.0
                    for ci in range(c):
                        for i in range(kt):
                            for j in range(kf):
                                acc += x[ni, ci, ti + i * rt, fi + j * rf] * w[oi, ci, i, j]
                    out[ni, oi, ti, fi] = acc + b[oi]
    return out


def dependency_footprint(chain: list[tuple], t_in: int, f_in: int = 16) -> int:
    """Time-axis input footprint of the first output element of a layer chain.

    chain items: ("conv", kernel_t, dilation_t) or ("pool",). Convs use
    all-ones weights on the time axis (kernel (k, 1)), so the gradient from
    the first output element is strictly positive exactly on the dependency
    cone; its time extent is the exact receptive field.
    """
    x = Tensor(np.zeros((1, 1, t_in, f_in), dtype=np.float64), requires_grad=True)
    h = x
    for item in chain:
        if item[0] == "conv":
            _, k, r = item
            w = Tensor(np.ones((1, 1, k, 1), dtype=np.float64))
            bias = Tensor(np.zeros(1, dtype=np.float64))
            h = h.conv2d(w, bias, (r, 1))
        elif item[0] == "pool":
            h = h.avg_pool2d()
        else:
            raise ValueError(item)
    mask = np.zeros_like(h.data)
    mask[0, 0, 0, 0] = 1.0
    (h * Tensor(mask)).sum().backward()
    touched = np.nonzero(np.abs(x.grad[0, 0]).sum(axis=1) > 0)[0]
    assert touched.size > 0
    return int(touched.max() - touched.min() + 1)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small gesture corpus for fast unit tests: 3 clips per class."""
    from touch_audition.synth import synth_corpus

    out = tmp_path_factory.mktemp("tiny_corpus")
    manifest = synth_corpus(str(out), "gesture", per_class=3, seed=11)
    return manifest


@pytest.fixture(scope="session")
def gesture_corpus(tmp_path_factory):
    """Acceptance-scale gesture corpus: 20 clips per class, fixed seed."""
    from touch_audition.synth import synth_corpus

    out = tmp_path_factory.mktemp("gesture_corpus")
    manifest = synth_corpus(str(out), "gesture", per_class=20, seed=7)
    return manifest
