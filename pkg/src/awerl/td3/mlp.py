"""Minimal multilayer perceptron with manual backpropagation, plus Adam."""
from __future__ import annotations

import numpy as np


class Mlp:
    """Fully connected network with ReLU hidden layers.

    ``params`` is the flat list ``[W0, b0, W1, b1, ...]`` with ``W`` of shape
    (fan_in, fan_out). The output activation is ``"tanh"`` (bounded actor
    head) or ``"identity"`` (critic head).
    """

    def __init__(self, sizes, out_act="identity", rng=None, dtype=np.float32, final_scale=1.0):
        if out_act not in ("tanh", "identity"):
            raise ValueError(f"unknown output activation {out_act!r}")
        rng = rng if rng is not None else np.random.default_rng()
        self.sizes = tuple(int(s) for s in sizes)
        self.out_act = out_act
        self.params = []
        n_layers = len(self.sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / np.sqrt(fan_in)
            scale = final_scale if i == n_layers - 1 else 1.0
            W = rng.uniform(-bound, bound, size=(fan_in, fan_out)) * scale
            b = rng.uniform(-bound, bound, size=fan_out) * scale
            self.params += [W.astype(dtype), b.astype(dtype)]

    @property
    def dtype(self):
        return self.params[0].dtype

    @property
    def shapes(self):
        return [p.shape for p in self.params]

    def forward(self, x):
        """Return the output and a cache for :meth:`backward`."""
        h = np.asarray(x, dtype=self.dtype)
        acts = [h]
        n = len(self.params) // 2
        for i in range(n):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            h = h @ W + b
            if i < n - 1:
                h = np.maximum(h, 0)
            elif self.out_act == "tanh":
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, acts, grad_out):
        """Gradients of a scalar loss w.r.t. params and input, given dL/dy."""
        n = len(self.params) // 2
        g = np.asarray(grad_out, dtype=self.dtype)
        if self.out_act == "tanh":
            g = g * (1 - acts[-1] ** 2)
        grads = [None] * len(self.params)
        for i in reversed(range(n)):
            W = self.params[2 * i]
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ W.T
            if i > 0:
                g = g * (acts[i] > 0)
        return grads, g

    def copy(self):
        new = object.__new__(Mlp)
        new.sizes = self.sizes
        new.out_act = self.out_act
        new.params = [p.copy() for p in self.params]
        return new

    def astype(self, dtype):
        new = self.copy()
        new.params = [p.astype(dtype) for p in new.params]
        return new

    def load_params(self, other):
        for dst, src in zip(self.params, other.params):
            dst[...] = src


class Adam:
    """Bias-corrected Adam over a list of parameter arrays, updated in place."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads, lr=None):
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def adam_step(opt, grads, lr=None):
    """Apply one Adam update; returns the updated parameter list."""
    opt.step(grads, lr)
    return opt.params


def grad_check(network, x, h=1e-5, seed=0):
    """Max relative error between backprop and central finite differences.

    The check runs on a float64 copy of ``network`` with the scalar loss
    ``sum(y * P)`` for a fixed random projection ``P``; both parameter and
    input gradients are compared.
    """
    net = network.astype(np.float64)
    x = np.array(x, dtype=np.float64, ndmin=2)
    rng = np.random.default_rng(seed)
    y, acts = net.forward(x)
    proj = rng.normal(size=y.shape)

    def loss():
        return float(np.sum(net(x) * proj))

    grads, gx = net.backward(acts, proj)
    worst = 0.0

    def rel(a, b):
        return abs(a - b) / max(abs(a), abs(b), 1e-8)

    for p, g in zip(net.params, grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp = loss()
            flat[i] = old - h
            lm = loss()
            flat[i] = old
            worst = max(worst, rel(gflat[i], (lp - lm) / (2 * h)))
    xf = x.reshape(-1)
    gxf = gx.reshape(-1)
    for i in range(xf.size):
        old = xf[i]
        xf[i] = old + h
        lp = loss()
        xf[i] = old - h
        lm = loss()
        xf[i] = old
        worst = max(worst, rel(gxf[i], (lp - lm) / (2 * h)))
    return worst
