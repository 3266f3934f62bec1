"""Fully connected sub-networks with backprop and inverted dropout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numeric import DimensionError, as_matrix, logistic

ACTIVATIONS = ("logistic", "tanh", "linear")


def activate(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "logistic":
        return logistic(z)
    if name == "linear":
        return z
    raise ValueError(f"unknown activation {name!r}")


def activation_slope(name, a):
    """Derivative of the activation, written in terms of its output ``a``."""
    if name == "tanh":
        return 1.0 - a * a
    if name == "logistic":
        return a * (1.0 - a)
    if name == "linear":
        return np.ones_like(a)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class LayerParams:
    weights: np.ndarray  # (out_dim, in_dim)
    biases: np.ndarray  # (out_dim,)
    activation: str = "tanh"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64).reshape(-1)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.biases.shape[0]:
            raise DimensionError(
                f"weights {self.weights.shape} do not match biases {self.biases.shape}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    def copy(self):
        return LayerParams(self.weights.copy(), self.biases.copy(), self.activation)


@dataclass
class SubNetwork:
    layers: list

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a sub-network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise DimensionError(
                    f"layer {i} outputs {a.out_dim} units but layer {i + 1} expects {b.in_dim}")

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def dims(self):
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    @property
    def n_params(self):
        return sum(layer.weights.size + layer.biases.size for layer in self.layers)

    def copy(self):
        return SubNetwork([layer.copy() for layer in self.layers])


@dataclass
class DropoutMask:
    masks: list  # one (batch, units) 0/1 array per hidden layer
    keep_probability: float = 1.0


@dataclass
class ForwardCache:
    inputs: list  # what each layer consumed (post-dropout)
    outputs: list  # each layer's activation before dropout
    mask: DropoutMask | None = None
    shapes: list = field(default_factory=list)

    @property
    def result(self):
        return self.outputs[-1]


def default_activations(n_layers, hidden="tanh", output="linear"):
    return [hidden] * (n_layers - 1) + [output]


def init_weights(dims, stream, activations=None, output_scale=1.0):
    """Build a sub-network with layer sizes ``dims = [in, h1, ..., out]``.

    Weights are uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    ``output_scale`` shrinks the last layer's range; the comparison unit
    saturates when initial output distances are large.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise ValueError("need an input size and at least one layer size")
    if min(dims) < 1:
        raise ValueError(f"layer sizes must be positive, got {dims}")
    n_layers = len(dims) - 1
    if activations is None:
        activations = default_activations(n_layers)
    if len(activations) != n_layers:
        raise ValueError(f"{n_layers} layers but {len(activations)} activations")
    layers = []
    for i, (fan_in, fan_out, act) in enumerate(zip(dims[:-1], dims[1:], activations)):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        if i == n_layers - 1:
            bound *= output_scale
        w = (2.0 * stream.uniform((fan_out, fan_in)) - 1.0) * bound
        layers.append(LayerParams(w, np.zeros(fan_out), act))
    return SubNetwork(layers)


def sample_dropout_mask(net, keep_probability, stream, batch):
    """Bernoulli(keep_probability) mask for every hidden unit of every row."""
    if not 0.0 < keep_probability <= 1.0:
        raise ValueError(f"keep_probability must be in (0, 1], got {keep_probability}")
    masks = []
    for layer in net.layers[:-1]:
        if keep_probability == 1.0:
            masks.append(np.ones((batch, layer.out_dim)))
        else:
            masks.append((stream.uniform((batch, layer.out_dim)) < keep_probability).astype(np.float64))
    return DropoutMask(masks, keep_probability)


def forward(net, x, mask=None):
    a = as_matrix(x, "input")
    if a.shape[1] != net.input_dim:
        raise DimensionError(f"input has {a.shape[1]} columns, network expects {net.input_dim}")
    if mask is not None:
        if len(mask.masks) != len(net.layers) - 1:
            raise DimensionError("dropout mask does not match the number of hidden layers")
        for m, layer in zip(mask.masks, net.layers):
            if m.shape != (a.shape[0], layer.out_dim):
                raise DimensionError(
                    f"dropout mask {m.shape} does not match ({a.shape[0]}, {layer.out_dim})")
    inputs, outputs = [], []
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        inputs.append(a)
        h = activate(layer.activation, a @ layer.weights.T + layer.biases)
        outputs.append(h)
        if mask is not None and i < last and mask.keep_probability < 1.0:
            a = h * (mask.masks[i] / mask.keep_probability)
        else:
            a = h
    return ForwardCache(inputs, outputs, mask, [layer.weights.shape for layer in net.layers])


def backward(net, cache, output_grad, input_grad=False):
    """Reverse-mode gradients of ``sum(output_grad * f(x))``.

    Returns ``(grads, dx)`` where ``grads`` is a list of ``(dW, db)`` per layer
    and ``dx`` is the input gradient, or None unless ``input_grad`` is set.
    """
    g = as_matrix(output_grad, "output_grad")
    if cache.shapes != [layer.weights.shape for layer in net.layers]:
        raise DimensionError("forward cache was produced by a different network")
    if g.shape != cache.result.shape:
        raise DimensionError(f"output_grad {g.shape} does not match output {cache.result.shape}")
    grads = [None] * len(net.layers)
    mask = cache.mask
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if mask is not None and i < len(net.layers) - 1 and mask.keep_probability < 1.0:
            g = g * (mask.masks[i] / mask.keep_probability)
        dz = g * activation_slope(layer.activation, cache.outputs[i])
        grads[i] = (dz.T @ cache.inputs[i], dz.sum(axis=0))
        if i > 0 or input_grad:
            g = dz @ layer.weights
    return grads, (g if input_grad else None)


def get_params(net):
    return np.concatenate([np.concatenate([l.weights.ravel(), l.biases]) for l in net.layers])


def set_params(net, theta):
    """Return a copy of ``net`` whose parameters are read from flat ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size != net.n_params:
        raise DimensionError(f"expected {net.n_params} parameters, got {theta.size}")
    layers, k = [], 0
    for l in net.layers:
        nw = l.weights.size
        w = theta[k:k + nw].reshape(l.weights.shape).copy()
        k += nw
        b = theta[k:k + l.out_dim].copy()
        k += l.out_dim
        layers.append(LayerParams(w, b, l.activation))
    return SubNetwork(layers)


def flatten_grads(grads):
    return np.concatenate([np.concatenate([dw.ravel(), db]) for dw, db in grads])


def weight_mask(net):
    """Flat 0/1 vector marking weight entries (as opposed to biases)."""
    return np.concatenate([np.concatenate([np.ones(l.weights.size), np.zeros(l.out_dim)])
                           for l in net.layers])
