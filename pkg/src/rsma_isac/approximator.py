"""Small dense tanh network with hand-written reverse-mode gradients.

Checkpoint layout (little-endian)::

    b"DNET"            magic
    uint32             number of layer sizes L+1
    uint32 * (L+1)     layer sizes, input first
    float64 ...        for each layer: W (out x in, row-major) then b (out)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"DNET"


class DenseNetwork:
    """tanh hidden layers, identity output.

    ``weights[l]`` has shape ``(sizes[l+1], sizes[l])``.
    """

    def __init__(self, sizes, rng: np.random.Generator | int | None = None, init: str = "fan_in"):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError("need at least input and output sizes, all >= 1")
        rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.weights, self.biases = [], []
        for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
            if init == "zeros":
                W = np.zeros((n_out, n_in))
            else:
                bound = np.sqrt(1.0 / n_in)
                W = rng.uniform(-bound, bound, size=(n_out, n_in))
            self.weights.append(W)
            self.biases.append(np.zeros(n_out))

    @property
    def params(self) -> list:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params)

    def copy(self) -> "DenseNetwork":
        other = DenseNetwork.__new__(DenseNetwork)
        other.sizes = self.sizes
        other.weights = [W.copy() for W in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.sizes[0]:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.sizes[0]}")
        return x

    def forward(self, x, keep=False):
        """Output for a single input vector or a batch of rows."""
        a = self._check_input(x)
        acts = [a]
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W.T + b
            a = z if l == last else np.tanh(z)
            acts.append(a)
        return (a, acts) if keep else a

    __call__ = forward

    def backward(self, x, upstream, acts=None):
        """Gradients of ``sum(upstream * forward(x))`` w.r.t. every parameter.

        Batched inputs are summed over the batch; scale ``upstream`` to average.
        Returns a list aligned with :attr:`params`.
        """
        if acts is None:
            _, acts = self.forward(x, keep=True)
        delta = np.asarray(upstream, dtype=float)
        if delta.shape != acts[-1].shape:
            raise ValueError(f"upstream shape {delta.shape} != output shape {acts[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for l in range(len(self.weights) - 1, -1, -1):
            a_in = acts[l]
            if delta.ndim == 1:
                grads[2 * l] = np.outer(delta, a_in)
                grads[2 * l + 1] = delta.copy()
            else:
                grads[2 * l] = delta.T @ a_in
                grads[2 * l + 1] = delta.sum(axis=0)
            if l:
                delta = (delta @ self.weights[l]) * (1.0 - a_in**2)
        return grads

    def sgd_step(self, grads, lr: float, direction: str = "descend") -> None:
        if lr < 0:
            raise ValueError("learning rate must be >= 0")
        if direction not in ("ascend", "descend"):
            raise ValueError("direction must be 'ascend' or 'descend'")
        if not all(np.all(np.isfinite(g)) for g in grads):
            raise FloatingPointError("non-finite gradient")
        sign = 1.0 if direction == "ascend" else -1.0
        for p, g in zip(self.params, grads):
            p += sign * lr * g

    def save(self, path) -> None:
        with open(Path(path), "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack(f"<I{len(self.sizes)}I", len(self.sizes), *self.sizes))
            for p in self.params:
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "DenseNetwork":
        data = Path(path).read_bytes()
        if data[:4] != _MAGIC:
            raise ValueError("not a DenseNetwork checkpoint")
        (n,) = struct.unpack_from("<I", data, 4)
        sizes = struct.unpack_from(f"<{n}I", data, 8)
        net = cls(sizes, init="zeros")
        offset = 8 + 4 * n
        for p in net.params:
            count = p.size
            p[...] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(p.shape)
            offset += 8 * count
        if offset != len(data):
            raise ValueError("checkpoint size does not match its header")
        return net


def forward(net: DenseNetwork, x):
    return net.forward(x)


def backward(net: DenseNetwork, x, upstream):
    return net.backward(x, upstream)


def sgd_step(net: DenseNetwork, grads, lr: float, direction: str = "descend") -> None:
    net.sgd_step(grads, lr, direction)
