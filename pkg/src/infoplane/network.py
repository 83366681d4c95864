"""Network description, initialization, and full forward/backward passes."""

from dataclasses import dataclass, field

import numpy as np

from . import layers
from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # conv | maxpool | flatten | dense
    width: int = 0  # channel count (conv) or unit count (dense)
    kernel: int = 0  # conv only
    pool: int = 0  # maxpool only
    activation: str = "identity"  # tanh | softmax | identity

    def __post_init__(self):
        if self.kind not in ("conv", "maxpool", "flatten", "dense"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.kind == "conv" and (self.kernel < 1 or self.width < 1):
            raise ConfigError("conv layer needs kernel >= 1 and width >= 1")
        if self.kind == "maxpool" and self.pool < 2:
            raise ConfigError("maxpool layer needs pool >= 2")
        if self.activation not in ("tanh", "softmax", "identity"):
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    input_shape: tuple  # (height, width, channels)
    class_count: int = 10

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("network needs at least one layer")
        last = self.layers[-1]
        if last.kind != "dense" or last.width != self.class_count:
            raise ConfigError(
                f"final layer must be dense with width == class_count ({self.class_count})"
            )
        if last.activation != "softmax":
            raise ConfigError("final dense layer must use softmax")
        for spec in self.layers[:-1]:
            if spec.kind in ("conv", "dense") and spec.activation != "tanh":
                raise ConfigError("all hidden parameterized layers must use tanh")

    def layer_shapes(self):
        """Output shape (excluding batch dim) after each layer."""
        shape = tuple(self.input_shape)
        out = []
        for spec in self.layers:
            if spec.kind == "conv":
                shape = (shape[0], shape[1], spec.width)
            elif spec.kind == "maxpool":
                shape = (shape[0] // spec.pool, shape[1] // spec.pool, shape[2])
            elif spec.kind == "flatten":
                shape = (int(np.prod(shape)),)
            elif spec.kind == "dense":
                if len(shape) != 1:
                    raise ConfigError("dense layer requires a flattened input")
                shape = (spec.width,)
            out.append(shape)
        return out

    def recorded_layers(self):
        """Indices of layers whose post-activation output is traced (conv and dense)."""
        return [i for i, s in enumerate(self.layers) if s.kind in ("conv", "dense")]


def init_params(net: NetworkSpec, seed: int):
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.

    Returns a list aligned with net.layers; entries for parameterless layers
    are None, others are dicts with 'w' and 'b'.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = []
    shape = tuple(net.input_shape)
    for spec in net.layers:
        if spec.kind == "conv":
            cin = shape[2]
            fan_in = spec.kernel * spec.kernel * cin
            fan_out = spec.kernel * spec.kernel * spec.width
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-bound, bound, size=(spec.kernel, spec.kernel, cin, spec.width))
            params.append({"w": w, "b": np.zeros(spec.width)})
            shape = (shape[0], shape[1], spec.width)
        elif spec.kind == "dense":
            d = shape[0]
            bound = np.sqrt(6.0 / (d + spec.width))
            w = rng.uniform(-bound, bound, size=(d, spec.width))
            params.append({"w": w, "b": np.zeros(spec.width)})
            shape = (spec.width,)
        elif spec.kind == "maxpool":
            params.append(None)
            shape = (shape[0] // spec.pool, shape[1] // spec.pool, shape[2])
        else:  # flatten
            params.append(None)
            shape = (int(np.prod(shape)),)
    return params


def forward(net: NetworkSpec, params, batch, keep_cache=False):
    """Run the network on a batch.

    Returns (trace, probs, cache). trace holds the post-activation output of
    every conv and dense layer (softmax output included), in layer order.
    cache is None unless keep_cache, in which case it holds per-layer inputs
    and activations needed by backward().
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.shape[1:] != tuple(net.input_shape):
        raise ShapeError(
            f"batch shape {x.shape[1:]} does not match input_shape {tuple(net.input_shape)}"
        )
    trace = []
    cache = [] if keep_cache else None
    for spec, p in zip(net.layers, params):
        if spec.kind == "conv":
            pre, col = layers._conv2d_forward_col(x, p["w"], p["b"])
            a = layers.tanh_forward(pre)
            if keep_cache:
                cache.append(("conv", (x, col), a))
            trace.append(a)
            x = a
        elif spec.kind == "dense":
            pre = layers.dense_forward(x, p["w"], p["b"])
            if spec.activation == "softmax":
                a = layers.softmax(pre)
            else:
                a = layers.tanh_forward(pre)
            if keep_cache:
                cache.append(("dense", x, a))
            trace.append(a)
            x = a
        elif spec.kind == "maxpool":
            a, pcache = layers.maxpool2d_forward(x, spec.pool)
            if keep_cache:
                cache.append(("maxpool", pcache, None))
            x = a
        else:  # flatten
            if keep_cache:
                cache.append(("flatten", x.shape, None))
            x = x.reshape(x.shape[0], -1)
    return trace, x, cache


def forward_with_trace(net: NetworkSpec, params, batch):
    """Deterministic forward pass recording every conv/dense post-activation."""
    trace, probs, _ = forward(net, params, batch)
    return trace, probs


def backward(net: NetworkSpec, params, cache, grad_logits):
    """Backpropagate from the softmax-logit gradient; returns per-layer grads
    aligned with params (None for parameterless layers)."""
    grads = [None] * len(net.layers)
    g = grad_logits
    for i in range(len(net.layers) - 1, -1, -1):
        spec = net.layers[i]
        kind, c1, c2 = cache[i]
        if kind == "dense":
            x_in, a = c1, c2
            if spec.activation == "tanh":
                g = layers.tanh_backward(g, a)
            # softmax output: g already holds d(loss)/d(logits)
            g, gw, gb = layers.dense_backward(g, x_in, params[i]["w"])
            grads[i] = {"w": gw, "b": gb}
        elif kind == "conv":
            (x_in, col), a = c1, c2
            g = layers.tanh_backward(g, a)
            g, gw, gb = layers.conv2d_backward(g, x_in, params[i]["w"], col=col)
            grads[i] = {"w": gw, "b": gb}
        elif kind == "maxpool":
            g = layers.maxpool2d_backward(g, c1)
        else:  # flatten
            g = g.reshape(c1)
    return grads
