"""Small fully-connected networks with hand-written backpropagation."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    output: np.ndarray


class MLP:
    """Affine layers with ReLU between them and a linear or tanh output.

    Weights are stored as ``(fan_in, fan_out)`` so a batch ``x`` of shape
    ``(n, fan_in)`` maps to ``x @ W + b``. Initialisation follows the usual
    uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) rule for weights and biases.
    """

    def __init__(self, sizes: Sequence[int], rng: Optional[np.random.Generator] = None, output: str = "linear",
                 dtype=np.float64):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output not in ("linear", "tanh"):
            raise ValueError(f"unknown output activation {output!r}")
        self.sizes = [int(s) for s in sizes]
        self.output = output
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)).astype(self.dtype))
            self.biases.append(rng.uniform(-bound, bound, fan_out).astype(self.dtype))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=self.dtype)
        assert x.ndim == 2 and x.shape[1] == self.sizes[0], f"expected (n, {self.sizes[0]}) input, got {x.shape}"
        inputs, pre = [], []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            else:
                h = np.tanh(z) if self.output == "tanh" else z
        return h, ForwardCache(inputs, pre, h)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(grad_out * output)`` w.r.t. parameters and inputs.

        Parameter gradients are returned in ``params`` order.
        """
        g = np.asarray(grad_out, dtype=self.dtype)
        if self.output == "tanh":
            g = g * (1.0 - cache.output ** 2)
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = cache.inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (cache.pre[i - 1] > 0.0)
        return grads, g

    def copy(self) -> "MLP":
        clone = MLP.__new__(MLP)
        clone.sizes = list(self.sizes)
        clone.output = self.output
        clone.dtype = self.dtype
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "output": self.output,
            "dtype": self.dtype.name,
            "params": [p.ravel().tolist() for p in self.params],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MLP":
        net = cls(data["sizes"], np.random.default_rng(0), data.get("output", "linear"), data.get("dtype", "float64"))
        for p, flat in zip(net.params, data["params"]):
            arr = np.asarray(flat, dtype=net.dtype)
            if arr.size != p.size:
                raise ValueError("checkpoint shape mismatch")
            p[...] = arr.reshape(p.shape)
        return net


def save_networks(path, **nets: MLP) -> None:
    with open(path, "w") as f:
        json.dump({name: net.to_dict() for name, net in nets.items()}, f)


def load_networks(path) -> dict[str, MLP]:
    with open(path) as f:
        data = json.load(f)
    return {name: MLP.from_dict(d) for name, d in data.items()}


class Adam:
    """Adam with bias correction; updates the parameter arrays in place."""

    def __init__(self, params: Sequence[np.ndarray], lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        step = self.lr / c1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            assert p.shape == g.shape
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            denom = np.sqrt(v / c2)
            denom += self.eps
            p -= step * m / denom


def soft_update(target: MLP, online: MLP, tau: float) -> None:
    """``target <- tau * online + (1 - tau) * target``, element-wise."""
    for t, o in zip(target.params, online.params):
        t *= 1.0 - tau
        t += tau * o
