"""Multilayer perceptron with tanh hidden layers and a linear output layer.

The flat parameter vector ``w`` lists each layer in turn, weights row-major
(fan_out x fan_in) followed by biases.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidConfig


@dataclass(frozen=True)
class NetworkArchitecture:
    input_size: int
    hidden_sizes: tuple
    output_size: int
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if min((self.input_size, self.output_size) + self.hidden_sizes) < 1:
            raise InvalidConfig(f"layer sizes must be >= 1: {self.layer_sizes}")
        if self.hidden_activation != "tanh" or self.output_activation != "linear":
            raise InvalidConfig("only tanh hidden / linear output layers are supported")

    @property
    def layer_sizes(self):
        return (self.input_size, *self.hidden_sizes, self.output_size)

    @property
    def shapes(self):
        sizes = self.layer_sizes
        return [(sizes[i + 1], sizes[i]) for i in range(len(sizes) - 1)]

    @property
    def n_weights(self):
        return sum(o * i + o for o, i in self.shapes)


@dataclass
class NetworkWeights:
    arch: NetworkArchitecture
    weights: list
    biases: list

    def __post_init__(self):
        shapes = self.arch.shapes
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise DimensionMismatch("layer count does not match architecture")
        for (o, i), W, b in zip(shapes, self.weights, self.biases):
            if W.shape != (o, i) or b.shape != (o,):
                raise DimensionMismatch(
                    f"layer shape {W.shape}/{b.shape} does not match ({o}, {i})")

    def flatten(self):
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, arch, w):
        w = np.asarray(w, dtype=float)
        if w.shape != (arch.n_weights,):
            raise DimensionMismatch(f"expected {arch.n_weights} parameters, got {w.shape}")
        weights, biases, pos = [], [], 0
        for o, i in arch.shapes:
            weights.append(w[pos:pos + o * i].reshape(o, i).copy())
            pos += o * i
            biases.append(w[pos:pos + o].copy())
            pos += o
        return cls(arch, weights, biases)


def init_weights(arch, rng):
    """Uniform in +/- sqrt(6 / (fan_in + fan_out)) per layer, zero biases."""
    weights, biases = [], []
    for o, i in arch.shapes:
        s = np.sqrt(6.0 / (i + o))
        weights.append(rng.uniform(-s, s, size=(o, i)))
        biases.append(np.zeros(o))
    return NetworkWeights(arch, weights, biases)


def forward(net, x):
    """Propagate one input vector or an ``(N, input_size)`` batch.

    Returns ``(output, pre, act)`` where ``act[0]`` is the input and
    ``act[l]`` / ``pre[l-1]`` belong to layer ``l``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.arch.input_size:
        raise DimensionMismatch(
            f"input has {x.shape[-1]} features, network expects {net.arch.input_size}")
    act, pre = [x], []
    last = len(net.weights) - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = act[-1] @ W.T + b
        pre.append(z)
        act.append(z if l == last else np.tanh(z))
    return act[-1], pre, act


def _check_data(net, inputs, targets):
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape[1] != net.arch.input_size or t.shape[1] != net.arch.output_size \
            or x.shape[0] != t.shape[0]:
        raise DimensionMismatch(
            f"data {x.shape}->{t.shape} does not fit architecture {net.arch.layer_sizes}")
    return x, t


def residuals(net, inputs, targets):
    """Residual vector ``y - t``, sample-major, output-minor."""
    x, t = _check_data(net, inputs, targets)
    y, _, _ = forward(net, x)
    return (y - t).ravel()


def network_mse(net, inputs, targets):
    """Mean of squared residuals over all samples and output components."""
    e = residuals(net, inputs, targets)
    return float(e @ e) / e.size


def jacobian(net, inputs, targets):
    """Analytic Jacobian of the residuals with respect to the flat weights.

    Each output unit is back-propagated separately for every sample. Returns
    ``(J, e)`` with ``J`` of shape ``(N*M, n_weights)``.
    """
    x, t = _check_data(net, inputs, targets)
    y, _, act = forward(net, x)
    n, m = y.shape
    # delta[s, k, :] = d y_k / d z_l for sample s, current layer l
    delta = np.broadcast_to(np.eye(m), (n, m, m))
    blocks = []
    for l in range(len(net.weights) - 1, -1, -1):
        a_prev = act[l]
        gw = np.einsum("sko,si->skoi", delta, a_prev).reshape(n, m, -1)
        blocks.append((gw, delta))
        if l > 0:
            delta = (delta @ net.weights[l]) * (1.0 - a_prev ** 2)[:, None, :]
    cols = []
    for gw, gb in reversed(blocks):
        cols.append(gw)
        cols.append(gb)
    J = np.concatenate(cols, axis=2).reshape(n * m, net.arch.n_weights)
    return J, (y - t).ravel()


def predict(net, inputs):
    y, _, _ = forward(net, inputs)
    return y
