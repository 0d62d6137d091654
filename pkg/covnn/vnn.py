# -*- coding: utf-8 -*-
# @Time    : 2024/10/10 16:05
# @Author  : LXD
# @Email   : lxd1997xy@163.com
# @File    : vnn.py

import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .gsp import as_signal, lipschitz_bound, response_bound
from .utils.errors import DimensionError, TraceMismatch, ConfigError

logger = logging.getLogger(__name__)

NONLINEARITIES = ('relu', 'tanh')


@dataclass
class VnnConfig:
    """
    Architecture of a coVariance neural network

    taps_per_layer[l] is the number of taps K_l + 1 of every filter in layer l,
    widths is [F_0 = 1, F_1, ..., F_L].
    """
    taps_per_layer: list = field(default_factory=lambda: [2, 6])
    widths: list = field(default_factory=lambda: [1, 16, 16])
    nonlinearity: str = 'relu'
    final_linear: bool = False

    def __post_init__(self):
        self.taps_per_layer = [int(t) for t in self.taps_per_layer]
        self.widths = [int(w) for w in self.widths]
        if len(self.taps_per_layer) < 1:
            raise ConfigError('a VNN needs at least one layer')
        if len(self.widths) != len(self.taps_per_layer) + 1:
            raise ConfigError(f'{len(self.taps_per_layer)} layers need {len(self.taps_per_layer) + 1} widths, '
                              f'got {self.widths}')
        if self.widths[0] != 1:
            raise ConfigError('input width F_0 must be 1 (one feature per region)')
        if any(w < 1 for w in self.widths) or any(t < 1 for t in self.taps_per_layer):
            raise ConfigError('widths and tap counts must be positive')
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f'nonlinearity must be one of {NONLINEARITIES}, got {self.nonlinearity!r}')

    @property
    def layers(self):
        return len(self.taps_per_layer)

    def tap_shape(self, layer):
        return self.widths[layer + 1], self.widths[layer], self.taps_per_layer[layer]

    @property
    def parameter_count(self):
        return sum(int(np.prod(self.tap_shape(i))) + self.widths[i + 1] for i in range(self.layers))

    def to_dict(self):
        return asdict(self)


class VnnModel(object):
    def __init__(self, config, taps, biases, seed=0, input_offset=0.0):
        """
        :param config: VnnConfig
        :param taps: list of arrays, layer l has shape (F_out, F_in, K_l + 1)
        :param biases: list of arrays, layer l has shape (F_out,)
        :param seed: int, seed the taps were initialized with
        :param input_offset: float, scalar subtracted from every input feature
        """
        self.config = config
        self.taps = [np.asarray(h, dtype=float) for h in taps]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.seed = int(seed)
        self.input_offset = float(input_offset)
        if len(self.taps) != config.layers or len(self.biases) != config.layers:
            raise ConfigError('one tap tensor and one bias vector per layer expected')
        for i, (h, b) in enumerate(zip(self.taps, self.biases)):
            if h.shape != config.tap_shape(i) or b.shape != (config.widths[i + 1],):
                raise ConfigError(f'layer {i}: taps {h.shape} / biases {b.shape} do not match the config')
            if not (np.all(np.isfinite(h)) and np.all(np.isfinite(b))):
                raise ConfigError(f'layer {i}: parameters must be finite')

    def __repr__(self):
        return f"VnnModel(taps={self.config.taps_per_layer}, widths={self.config.widths}, " \
               f"nonlinearity={self.config.nonlinearity})"

    def copy(self):
        return VnnModel(self.config, [h.copy() for h in self.taps], [b.copy() for b in self.biases],
                        self.seed, self.input_offset)

    @property
    def parameter_count(self):
        return sum(h.size + b.size for h, b in zip(self.taps, self.biases))

    def parameters(self):
        """Flat view order: layer by layer, taps then biases"""
        return [p for pair in zip(self.taps, self.biases) for p in pair]


class VnnGradients(object):
    def __init__(self, taps, biases):
        self.taps = taps
        self.biases = biases

    def parameters(self):
        return [p for pair in zip(self.taps, self.biases) for p in pair]

    def __add__(self, other):
        return VnnGradients([a + b for a, b in zip(self.taps, other.taps)],
                            [a + b for a, b in zip(self.biases, other.biases)])

    def scaled(self, factor):
        return VnnGradients([h * factor for h in self.taps], [b * factor for b in self.biases])


class VnnForwardTrace(object):
    """
    Everything backward needs: per-layer stacks of shifted inputs C^k x_{l-1}
    (shape B x (K+1) x M x F_in), pre-activations and outputs (B x M x F_out),
    the readout p_x (B x M) and the estimates y_hat (B,).
    """

    def __init__(self, matrix, shifted, pre, outputs, single):
        self.matrix = matrix
        self.shifted = shifted
        self.pre = pre
        self.outputs = outputs
        self.representation = outputs[-1]
        self.readout = self.representation.mean(axis=2)
        self.y_hats = self.readout.mean(axis=1)
        self.single = single

    def __len__(self):
        return self.readout.shape[0]

    @property
    def n_regions(self):
        return self.readout.shape[1]

    @property
    def p_x(self):
        return self.readout[0] if self.single else self.readout

    @property
    def psi(self):
        return self.representation[0] if self.single else self.representation

    @property
    def y_hat(self):
        return float(self.y_hats[0]) if self.single else self.y_hats


def _sigma(name, a):
    if name == 'relu':
        return np.maximum(a, 0.0)
    if name == 'tanh':
        return np.tanh(a)
    return a


def _sigma_grad(name, pre, out):
    if name == 'relu':
        return (pre > 0).astype(float)
    if name == 'tanh':
        return 1.0 - out * out
    return np.ones_like(pre)


def _layer_nonlinearity(config, layer):
    if config.final_linear and layer == config.layers - 1:
        return 'linear'
    return config.nonlinearity


def init(config, seed=0):
    """
    Scaled-uniform initialization, taps ~ U[-a, a] with a = sqrt(6 / ((K+1) (F_in + F_out))), biases 0

    :param config: VnnConfig
    :param seed: int
    :return: VnnModel
    """
    rng = np.random.default_rng(seed)
    taps, biases = [], []
    for i in range(config.layers):
        f_out, f_in, k = config.tap_shape(i)
        a = np.sqrt(6.0 / (k * (f_in + f_out)))
        taps.append(rng.uniform(-a, a, size=(f_out, f_in, k)))
        biases.append(np.zeros(f_out))
    return VnnModel(config, taps, biases, seed)


def _as_matrix(cov):
    return cov.matrix if hasattr(cov, 'matrix') else np.asarray(cov, dtype=float)


def forward(model, cov, x):
    """
    Run the VNN on one signal (length M) or a batch (B x M)

    Layer l, output channel f: sigma(b_f + sum_g sum_k h_l[f][g][k] C^k x^g);
    readout p_x is the mean over the last layer's channels, y_hat the mean of p_x.

    :param model: VnnModel
    :param cov: CovarianceGraph (or an M x M matrix)
    :param x: array-like, M vector or B x M batch
    :return: VnnForwardTrace
    """
    c = _as_matrix(cov)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != c.shape[0]:
        raise DimensionError(f'signal of shape {x.shape} does not match a {c.shape[0]}-region covariance')
    as_signal(batch.T)
    z = (batch - model.input_offset)[:, :, None]
    shifted, pre, outputs = [], [], []
    for i, (h, b) in enumerate(zip(model.taps, model.biases)):
        stack = [z]
        for _ in range(h.shape[2] - 1):
            stack.append(np.matmul(c, stack[-1]))
        s = np.stack(stack, axis=1)
        a = np.tensordot(s, h, axes=([1, 3], [2, 1])) + b
        z = _sigma(_layer_nonlinearity(model.config, i), a)
        shifted.append(s)
        pre.append(a)
        outputs.append(z)
    return VnnForwardTrace(c, shifted, pre, outputs, single)


def transfer_eval(model, cov2, x2):
    """
    Evaluate a trained model on a covariance of any dimension M'; the taps are dimension-free
    and the readout stays the unweighted mean over the M' regions.
    """
    return forward(model, cov2, x2)


def backward(model, trace, dloss_dy):
    """
    Reverse-mode gradients of sum_b dloss_dy[b] * y_hat[b] with respect to every tap and bias

    :param model: VnnModel
    :param trace: VnnForwardTrace from forward() on this model
    :param dloss_dy: float or length-B array, upstream gradient per subject
    :return: VnnGradients
    """
    config = model.config
    if len(trace.pre) != config.layers:
        raise TraceMismatch(f'trace has {len(trace.pre)} layers, model has {config.layers}')
    for i, h in enumerate(model.taps):
        f_out, f_in, k = h.shape
        s = trace.shifted[i]
        if s.shape[1] != k or s.shape[3] != f_in or trace.pre[i].shape[2] != f_out:
            raise TraceMismatch(f'layer {i}: trace shapes {s.shape}/{trace.pre[i].shape} do not match taps {h.shape}')
    n_batch, m = trace.readout.shape
    g = np.broadcast_to(np.asarray(dloss_dy, dtype=float), (n_batch,))
    f_last = config.widths[-1]
    grad = np.broadcast_to((g / (m * f_last))[:, None, None], (n_batch, m, f_last))
    tap_grads, bias_grads = [None] * config.layers, [None] * config.layers
    for i in reversed(range(config.layers)):
        h = model.taps[i]
        d_pre = grad * _sigma_grad(_layer_nonlinearity(config, i), trace.pre[i], trace.outputs[i])
        bias_grads[i] = d_pre.sum(axis=(0, 1))
        tap_grads[i] = np.tensordot(d_pre, trace.shifted[i], axes=([0, 1], [0, 2])).transpose(0, 2, 1)
        if i == 0:
            break
        # d/dx of sum_k C^k x h_k, Horner over k with C symmetric
        d_shift = np.tensordot(d_pre, h, axes=([2], [0]))
        acc = d_shift[..., -1]
        for k in range(h.shape[2] - 2, -1, -1):
            acc = np.matmul(trace.matrix, acc) + d_shift[..., k]
        grad = acc
    return VnnGradients(tap_grads, bias_grads)


def normalize_taps(model, lambda_range):
    """
    Rescale every filter so that max |h(lambda)| <= 1 and the empirical Lipschitz constant <= 1
    on the interval; filters already inside both bounds are untouched.

    :param model: VnnModel
    :param lambda_range: (low, high) spectral interval
    :return: VnnModel, a rescaled copy
    """
    out = model.copy()
    for h in out.taps:
        for f in range(h.shape[0]):
            for g in range(h.shape[1]):
                bound = max(1.0, response_bound(h[f, g], lambda_range), lipschitz_bound(h[f, g], lambda_range))
                h[f, g] /= bound
    return out
