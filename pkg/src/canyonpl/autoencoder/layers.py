"""Differentiable 1D layers on channel-last tensors.

Sequence tensors are (batch, length, channels); dense tensors are
(batch, features). Every layer exposes ``forward(x) -> (y, cache)`` and
``backward(cache, dy) -> (dx, grads)`` where ``grads`` mirrors ``params``.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ACTIVATIONS = ("tanh", "relu", "linear")


class ShapeError(ValueError):
    pass


def _activate(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(z, y, dy, kind):
    if kind == "tanh":
        return dy * (1.0 - y * y)
    if kind == "relu":
        return dy * (z > 0)
    return dy


def _fan_in_uniform(rng, shape, fan_in):
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}

    def build(self, in_shape, rng):
        """Allocate parameters for ``in_shape`` (no batch axis) and return the output shape."""
        return in_shape

    def descriptor(self) -> dict:
        return {"type": self.kind}

    def param_items(self, prefix=""):
        for name in sorted(self.params):
            yield prefix + name, self.params[name]

    def forward(self, x):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError


class Conv1D(Layer):
    """'same'-padded, stride-1 convolution along the length axis."""

    kind = "conv1d"

    def __init__(self, filters, kernel, activation="tanh"):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.filters, self.kernel, self.activation = int(filters), int(kernel), activation

    def descriptor(self):
        return {"type": self.kind, "filters": self.filters, "kernel": self.kernel,
                "activation": self.activation}

    def build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ShapeError(f"Conv1D expects (length, channels), got {in_shape}")
        length, ch = in_shape
        self.params = {
            "W": _fan_in_uniform(rng, (self.kernel, ch, self.filters), self.kernel * ch),
            "b": np.zeros(self.filters),
        }
        return (length, self.filters)

    def _pads(self):
        left = (self.kernel - 1) // 2
        return left, self.kernel - 1 - left

    def forward(self, x):
        W, b = self.params["W"], self.params["b"]
        B, L, C = x.shape
        if W.shape[1] != C:
            raise ShapeError(f"Conv1D expects {W.shape[1]} channels, got {C}")
        left, right = self._pads()
        xp = np.pad(x, ((0, 0), (left, right), (0, 0)))
        win = sliding_window_view(xp, self.kernel, axis=1)          # (B, L, C, k)
        cols = np.ascontiguousarray(win.transpose(0, 1, 3, 2)).reshape(B * L, self.kernel * C)
        z = cols @ W.reshape(self.kernel * C, self.filters) + b
        y = _activate(z, self.activation)
        return y.reshape(B, L, self.filters), (cols, z, y, x.shape)

    def backward(self, cache, dy):
        cols, z, y, (B, L, C) = cache
        W = self.params["W"]
        dz = _activation_grad(z, y, dy.reshape(B * L, self.filters), self.activation)
        dW = (cols.T @ dz).reshape(W.shape)
        db = dz.sum(axis=0)
        dcols = (dz @ W.reshape(self.kernel * C, self.filters).T).reshape(B, L, self.kernel, C)
        left, _ = self._pads()
        dxp = np.zeros((B, L + self.kernel - 1, C))
        for j in range(self.kernel):
            dxp[:, j:j + L] += dcols[:, :, j]
        return dxp[:, left:left + L], {"W": dW, "b": db}


class MaxPool1D(Layer):
    kind = "maxpool1d"

    def __init__(self, factor):
        super().__init__()
        self.factor = int(factor)

    def descriptor(self):
        return {"type": self.kind, "factor": self.factor}

    def build(self, in_shape, rng):
        if len(in_shape) != 2 or in_shape[0] % self.factor:
            raise ShapeError(f"MaxPool1D({self.factor}) cannot pool shape {in_shape}")
        return (in_shape[0] // self.factor, in_shape[1])

    def forward(self, x):
        B, L, C = x.shape
        if L % self.factor:
            raise ShapeError(f"MaxPool1D({self.factor}) cannot pool length {L}")
        r = x.reshape(B, L // self.factor, self.factor, C)
        idx = r.argmax(axis=2)
        y = np.take_along_axis(r, idx[:, :, None, :], axis=2)[:, :, 0, :]
        return y, (idx, x.shape)

    def backward(self, cache, dy):
        idx, (B, L, C) = cache
        dr = np.zeros((B, L // self.factor, self.factor, C))
        np.put_along_axis(dr, idx[:, :, None, :], dy[:, :, None, :], axis=2)
        return dr.reshape(B, L, C), {}


class UpSample1D(Layer):
    kind = "upsample1d"

    def __init__(self, factor):
        super().__init__()
        self.factor = int(factor)

    def descriptor(self):
        return {"type": self.kind, "factor": self.factor}

    def build(self, in_shape, rng):
        if len(in_shape) != 2:
            raise ShapeError(f"UpSample1D expects (length, channels), got {in_shape}")
        return (in_shape[0] * self.factor, in_shape[1])

    def forward(self, x):
        return np.repeat(x, self.factor, axis=1), x.shape

    def backward(self, cache, dy):
        B, L, C = cache
        return dy.reshape(B, L, self.factor, C).sum(axis=2), {}


class Dense(Layer):
    kind = "dense"

    def __init__(self, units, activation="tanh"):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.units, self.activation = int(units), activation

    def descriptor(self):
        return {"type": self.kind, "units": self.units, "activation": self.activation}

    def build(self, in_shape, rng):
        if len(in_shape) != 1:
            raise ShapeError(f"Dense expects a flat input, got {in_shape}")
        self.params = {
            "W": _fan_in_uniform(rng, (in_shape[0], self.units), in_shape[0]),
            "b": np.zeros(self.units),
        }
        return (self.units,)

    def forward(self, x):
        W = self.params["W"]
        if x.ndim != 2 or x.shape[1] != W.shape[0]:
            raise ShapeError(f"Dense expects (batch, {W.shape[0]}), got {x.shape}")
        z = x @ W + self.params["b"]
        y = _activate(z, self.activation)
        return y, (x, z, y)

    def backward(self, cache, dy):
        x, z, y = cache
        dz = _activation_grad(z, y, dy, self.activation)
        return dz @ self.params["W"].T, {"W": x.T @ dz, "b": dz.sum(axis=0)}


class Flatten(Layer):
    kind = "flatten"

    def build(self, in_shape, rng):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), {}


class Reshape(Layer):
    """Inverse of Flatten: (batch, length * channels) -> (batch, length, channels)."""

    kind = "reshape"

    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def descriptor(self):
        return {"type": self.kind, "shape": list(self.shape)}

    def build(self, in_shape, rng):
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise ShapeError(f"cannot reshape {in_shape} to {self.shape}")
        return self.shape

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), {}


class Sequential(Layer):
    kind = "sequential"

    def __init__(self, layers):
        super().__init__()
        self.layers = list(layers)

    def descriptor(self):
        return {"type": self.kind, "layers": [layer.descriptor() for layer in self.layers]}

    def build(self, in_shape, rng):
        shape = tuple(in_shape)
        for i, layer in enumerate(self.layers):
            try:
                shape = tuple(layer.build(shape, rng))
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
        return shape

    def param_items(self, prefix=""):
        for i, layer in enumerate(self.layers):
            yield from layer.param_items(f"{prefix}{i}.")

    def forward(self, x):
        caches = []
        for i, layer in enumerate(self.layers):
            try:
                x, cache = layer.forward(x)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from None
            caches.append(cache)
        return x, caches

    def backward(self, caches, dy):
        grads = {}
        for i in range(len(self.layers) - 1, -1, -1):
            dy, g = self.layers[i].backward(caches[i], dy)
            if g:
                grads[i] = g
        return dy, grads


class ParallelAdd(Layer):
    """Two branches applied to the same input; outputs summed."""

    kind = "parallel_add"

    def __init__(self, branch_a, branch_b):
        super().__init__()
        self.a = branch_a if isinstance(branch_a, Sequential) else Sequential(branch_a)
        self.b = branch_b if isinstance(branch_b, Sequential) else Sequential(branch_b)

    def descriptor(self):
        return {"type": self.kind, "a": self.a.descriptor()["layers"], "b": self.b.descriptor()["layers"]}

    def build(self, in_shape, rng):
        sa = self.a.build(in_shape, rng)
        sb = self.b.build(in_shape, rng)
        if sa != sb:
            raise ShapeError(f"parallel branches disagree: {sa} vs {sb}")
        return sa

    def param_items(self, prefix=""):
        yield from self.a.param_items(prefix + "a.")
        yield from self.b.param_items(prefix + "b.")

    def forward(self, x):
        ya, ca = self.a.forward(x)
        yb, cb = self.b.forward(x)
        return ya + yb, (ca, cb)

    def backward(self, cache, dy):
        dxa, ga = self.a.backward(cache[0], dy)
        dxb, gb = self.b.backward(cache[1], dy)
        return dxa + dxb, {"a": ga, "b": gb}


def layer_from_descriptor(desc: dict) -> Layer:
    t = desc["type"]
    if t == "conv1d":
        return Conv1D(desc["filters"], desc["kernel"], desc["activation"])
    if t == "maxpool1d":
        return MaxPool1D(desc["factor"])
    if t == "upsample1d":
        return UpSample1D(desc["factor"])
    if t == "dense":
        return Dense(desc["units"], desc["activation"])
    if t == "flatten":
        return Flatten()
    if t == "reshape":
        return Reshape(desc["shape"])
    if t == "parallel_add":
        return ParallelAdd([layer_from_descriptor(d) for d in desc["a"]],
                           [layer_from_descriptor(d) for d in desc["b"]])
    if t == "sequential":
        return Sequential([layer_from_descriptor(d) for d in desc["layers"]])
    raise ValueError(f"unknown layer type {t!r}")


def flatten_grads(layer: Layer, grads) -> dict[str, np.ndarray]:
    """Map nested backward() gradients onto the names used by ``param_items``."""
    out: dict[str, np.ndarray] = {}

    def walk(layer, g, prefix):
        if isinstance(layer, Sequential):
            for i, sub in enumerate(layer.layers):
                if i in g:
                    walk(sub, g[i], f"{prefix}{i}.")
        elif isinstance(layer, ParallelAdd):
            walk(layer.a, g["a"], prefix + "a.")
            walk(layer.b, g["b"], prefix + "b.")
        else:
            for name, val in g.items():
                out[prefix + name] = val

    walk(layer, grads, "")
    return out
