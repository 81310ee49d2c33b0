"""A small from-scratch CNN with pluggable pooling, trained by mini-batch SGD.

Layers are stateless with respect to a forward pass: ``forward`` returns the
output together with a cache, ``backward`` consumes that cache. This keeps
per-example work independent, so a batch can be split across threads.
"""
from __future__ import annotations

import json
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .core import PoolWindowSpec, fold_windows, window_view
from .errors import CheckpointError, ConfigError, InputError, ShapeError
from .membership import capped_relu, default_bank
from .pooling import OPERATORS, pool_backward, pool_forward

# -- configuration ------------------------------------------------------------


@dataclass
class ConvSpec:
    filters: int
    kernel: int
    kind: str = "conv"


@dataclass
class PoolSpec:
    operator: str
    k: int = 2
    stride: int = 2
    pad: int = 0
    kind: str = "pool"


@dataclass
class DenseSpec:
    out_dim: int
    activation: bool = True
    kind: str = "dense"


LayerSpec = Union[ConvSpec, PoolSpec, DenseSpec]
_SPEC_TYPES = {"conv": ConvSpec, "pool": PoolSpec, "dense": DenseSpec}


@dataclass
class NetworkConfig:
    input_shape: tuple  # (z, h, w)
    classes: int
    layers: list
    r_max: float = 6.0
    tau: float = 0.0
    stop_membership_grad: bool = False
    lr: float = 0.01
    batch_size: int = 32
    epochs: int = 3
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        d = dict(d)
        d["input_shape"] = tuple(d["input_shape"])
        layers = []
        for spec in d["layers"]:
            spec = dict(spec)
            kind = spec.get("kind")
            if kind not in _SPEC_TYPES:
                raise ConfigError(f"unknown layer kind {kind!r}")
            layers.append(_SPEC_TYPES[kind](**spec))
        d["layers"] = layers
        return cls(**d)

    def pooling_operator(self) -> Optional[str]:
        ops = {s.operator for s in self.layers if isinstance(s, PoolSpec)}
        return ops.pop() if len(ops) == 1 else None


def build_lenet(
    pooling: str, input_shape=(1, 28, 28), classes: int = 10, **overrides
) -> NetworkConfig:
    """LeNet-5 layout: conv6@5x5, pool, conv16@5x5, pool, dense 120, 84, classes.

    ``input_shape`` is ``(z, h, w)`` and must be MNIST-like ``(1, 28, 28)`` or
    CIFAR-like ``(3, 32, 32)``. Capped ReLU follows every conv and hidden dense
    layer; pooling is k=2, stride 2.
    """
    input_shape = tuple(int(v) for v in input_shape)
    if input_shape not in {(1, 28, 28), (3, 32, 32)}:
        raise ConfigError(f"LeNet supports inputs (1, 28, 28) or (3, 32, 32), got {input_shape}")
    if pooling not in OPERATORS:
        raise ConfigError(f"unknown pooling operator {pooling!r}; choose from {OPERATORS}")
    layers = [
        ConvSpec(6, 5),
        PoolSpec(pooling),
        ConvSpec(16, 5),
        PoolSpec(pooling),
        DenseSpec(120),
        DenseSpec(84),
        DenseSpec(classes, activation=False),
    ]
    return NetworkConfig(input_shape=input_shape, classes=classes, layers=layers, **overrides)


# -- loss and optimiser -------------------------------------------------------


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    Accepts a single logit vector with an integer label, or a ``(n, classes)``
    batch with ``n`` labels.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    if single:
        logits = logits[None]
    labels = np.atleast_1d(np.asarray(labels))
    n, classes = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"{n} logit rows but labels of shape {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= classes):
        raise InputError(f"labels must lie in [0, {classes}), got {labels.min()}..{labels.max()}")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]))
    grad = np.exp(z - log_norm[:, None])
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, (grad[0] if single else grad)


def sgd_step(params, grads, lr: float) -> None:
    """Plain SGD, in place."""
    for p, g in zip(params, grads):
        p -= lr * g


def _relu_slope(pre, r_max):
    # right-hand slope at 0, left-hand slope at r_max
    return ((pre >= 0.0) & (pre <= r_max)).astype(np.float64)


# -- layers -------------------------------------------------------------------


class ConvLayer:
    """Valid cross-correlation, bias, capped ReLU."""

    def __init__(self, weights, biases, r_max=6.0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.r_max = r_max
        if self.weights.ndim != 4 or self.weights.shape[2] != self.weights.shape[3]:
            raise ShapeError(f"conv weights must be (filters, depth, k, k), got {self.weights.shape}")
        if self.biases.shape != (self.weights.shape[0],):
            raise ShapeError("one bias per filter expected")

    @property
    def kernel(self):
        return self.weights.shape[-1]

    def params(self):
        return [self.weights, self.biases]

    def output_shape(self, shape):
        z, h, w = shape
        if z != self.weights.shape[1]:
            raise ShapeError(f"conv expects depth {self.weights.shape[1]}, got {z}")
        if self.kernel > min(h, w):
            raise ShapeError(f"kernel {self.kernel} larger than input {h}x{w}")
        return (self.weights.shape[0], h - self.kernel + 1, w - self.kernel + 1)

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        n, _, h, w = x.shape
        f, c, k, _ = self.weights.shape
        self.output_shape(x.shape[1:])
        spec = PoolWindowSpec(k=k, stride=1)
        win, grid = window_view(x, spec)  # (n, c, oh, ow, k*k)
        cols = win.transpose(0, 2, 3, 1, 4).reshape(n * grid.out_h * grid.out_w, c * k * k)
        pre = cols @ self.weights.reshape(f, -1).T + self.biases
        pre = pre.reshape(n, grid.out_h, grid.out_w, f).transpose(0, 3, 1, 2)
        return capped_relu(pre, self.r_max), (x.shape, cols, pre)

    def backward(self, cache, grad_out):
        in_shape, cols, pre = cache
        n, c, h, w = in_shape
        f, _, k, _ = self.weights.shape
        if grad_out.shape != pre.shape:
            raise ShapeError(f"grad_out shape {grad_out.shape} != output shape {pre.shape}")
        g = grad_out * _relu_slope(pre, self.r_max)
        oh, ow = g.shape[2:]
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, f)
        grad_w = (g2.T @ cols).reshape(self.weights.shape)
        grad_b = g2.sum(axis=0)
        dcols = (g2 @ self.weights.reshape(f, -1)).reshape(n, oh, ow, c, k * k)
        grad_x = fold_windows(dcols.transpose(0, 3, 1, 2, 4), in_shape, PoolWindowSpec(k=k, stride=1))
        return grad_x, [grad_w, grad_b]


class PoolLayer:
    def __init__(self, operator, spec: PoolWindowSpec, bank=None, tau=0.0, stop_membership_grad=False):
        if operator not in OPERATORS:
            raise ConfigError(f"unknown pooling operator {operator!r}; choose from {OPERATORS}")
        self.operator = operator
        self.spec = spec
        self.bank = bank
        self.tau = tau
        self.stop_membership_grad = stop_membership_grad

    def params(self):
        return []

    def output_shape(self, shape):
        from .core import output_dims

        z, h, w = shape
        grid = output_dims(self.spec, w, h)
        return (z, grid.out_h, grid.out_w)

    def forward(self, x):
        out = pool_forward(
            x, self.operator, self.spec, bank=self.bank, tau=self.tau,
            stop_membership_grad=self.stop_membership_grad,
        )
        return out.pooled, out.cache

    def backward(self, cache, grad_out):
        return pool_backward(cache, grad_out), []


class DenseLayer:
    """Affine layer on flattened input, optionally followed by capped ReLU."""

    def __init__(self, weights, biases, activation=True, r_max=6.0):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.biases = np.asarray(biases, dtype=np.float64)
        self.activation = activation
        self.r_max = r_max
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[0],):
            raise ShapeError("dense weights must be (out_dim, in_dim) with out_dim biases")

    def params(self):
        return [self.weights, self.biases]

    def output_shape(self, shape):
        if int(np.prod(shape)) != self.weights.shape[1]:
            raise ShapeError(f"dense expects {self.weights.shape[1]} inputs, got shape {shape}")
        return (self.weights.shape[0],)

    def forward(self, x):
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.weights.shape[1]:
            raise ShapeError(f"dense expects {self.weights.shape[1]} inputs, got {flat.shape[1]}")
        pre = flat @ self.weights.T + self.biases
        out = capped_relu(pre, self.r_max) if self.activation else pre
        return out, (x.shape, flat, pre)

    def backward(self, cache, grad_out):
        in_shape, flat, pre = cache
        g = grad_out * _relu_slope(pre, self.r_max) if self.activation else grad_out
        grad_w = g.T @ flat
        grad_b = g.sum(axis=0)
        grad_x = (g @ self.weights).reshape(in_shape)
        return grad_x, [grad_w, grad_b]


def dense_forward(layer: DenseLayer, x):
    return layer.forward(x)


def dense_backward(layer: DenseLayer, cache, grad_out):
    return layer.backward(cache, grad_out)


def conv_forward(layer: ConvLayer, x):
    return layer.forward(x)


def conv_backward(layer: ConvLayer, cache, grad_out):
    return layer.backward(cache, grad_out)


def _glorot(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Network:
    def __init__(self, config: NetworkConfig, layers):
        self.config = config
        self.layers = layers

    @classmethod
    def from_config(cls, config: NetworkConfig, rng=None) -> "Network":
        """Instantiate layers with Glorot-uniform weights and zero biases."""
        rng = np.random.default_rng(config.seed) if rng is None else rng
        bank = default_bank(config.r_max)
        shape = tuple(config.input_shape)
        layers = []
        for spec in config.layers:
            if isinstance(spec, ConvSpec):
                c, k = shape[0], spec.kernel
                w = _glorot(rng, (spec.filters, c, k, k), c * k * k, spec.filters * k * k)
                layer = ConvLayer(w, np.zeros(spec.filters), config.r_max)
            elif isinstance(spec, PoolSpec):
                layer = PoolLayer(
                    spec.operator, PoolWindowSpec.square(spec.k, spec.stride, spec.pad),
                    bank=bank, tau=config.tau, stop_membership_grad=config.stop_membership_grad,
                )
            elif isinstance(spec, DenseSpec):
                fan_in = int(np.prod(shape))
                w = _glorot(rng, (spec.out_dim, fan_in), fan_in, spec.out_dim)
                layer = DenseLayer(w, np.zeros(spec.out_dim), spec.activation, config.r_max)
            else:
                raise ConfigError(f"unsupported layer spec {spec!r}")
            try:
                shape = layer.output_shape(shape)
            except (ShapeError, ValueError) as exc:
                raise ConfigError(f"layer {len(layers)} ({spec.kind}) incompatible: {exc}") from exc
            layers.append(layer)
        if shape != (config.classes,):
            raise ConfigError(f"network output shape {shape} != ({config.classes},)")
        return cls(config, layers)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def forward(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, caches, grad_logits):
        grads = []
        g = grad_logits
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            g, layer_grads = layer.backward(cache, g)
            grads = layer_grads + grads
        return grads

    def loss_and_grads(self, x, labels):
        logits, caches = self.forward(x)
        loss, grad_logits = softmax_cross_entropy(logits, labels)
        return loss, self.backward(caches, grad_logits)

    def predict(self, images, batch_size=256):
        out = []
        for i in range(0, len(images), batch_size):
            logits, _ = self.forward(np.asarray(images[i : i + batch_size], dtype=np.float64))
            out.append(logits.argmax(axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=int)

    def loss(self, images, labels, batch_size=256):
        total = 0.0
        for i in range(0, len(images), batch_size):
            logits, _ = self.forward(np.asarray(images[i : i + batch_size], dtype=np.float64))
            total += softmax_cross_entropy(logits, labels[i : i + batch_size])[0] * len(logits)
        return total / len(images)


# -- training -----------------------------------------------------------------


@dataclass
class TrainReport:
    seed: int
    initial_test_accuracy: float
    train_loss: list = field(default_factory=list)  # mean mini-batch loss per epoch
    test_accuracy: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    batch_losses: list = field(default_factory=list)  # every step, all epochs
    network: Optional[Network] = field(default=None, repr=False, compare=False)

    @property
    def final_accuracy(self) -> float:
        return self.test_accuracy[-1] if self.test_accuracy else self.initial_test_accuracy


def _batch_grads(network, x, y, workers):
    if workers <= 1 or len(x) < 2 * workers:
        return network.loss_and_grads(x, y)
    chunks = np.array_split(np.arange(len(x)), workers)

    def run(idx):
        loss, grads = network.loss_and_grads(x[idx], y[idx])
        w = len(idx) / len(x)
        return loss * w, [g * w for g in grads]

    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(run, chunks))
    loss = sum(p[0] for p in parts)
    grads = [sum(gs) for gs in zip(*(p[1] for p in parts))]
    return loss, grads


def _check_data(config, data, name):
    images = np.asarray(data.images)
    labels = np.asarray(data.labels)
    if len(images) == 0:
        raise InputError(f"{name} set is empty")
    if images.shape[1:] != tuple(config.input_shape):
        raise ConfigError(f"{name} images have shape {images.shape[1:]}, network expects {config.input_shape}")
    if labels.min() < 0 or labels.max() >= config.classes:
        raise ConfigError(f"{name} labels outside [0, {config.classes})")
    return images, labels


def evaluate(network: Network, data) -> float:
    from .metrics import accuracy

    return accuracy(network.predict(data.images), data.labels)


def train(config: NetworkConfig, train_set, test_set, workers: int = 1, network=None, progress=None) -> TrainReport:
    """Mini-batch SGD over seeded shuffles of ``train_set``.

    Deterministic for a given seed at ``workers=1``. ``progress`` is an
    optional callback receiving ``(epoch, step, loss)``.
    """
    x_train, y_train = _check_data(config, train_set, "training")
    _check_data(config, test_set, "test")
    rng = np.random.default_rng(config.seed)
    if network is None:
        network = Network.from_config(config, rng)
    report = TrainReport(seed=config.seed, initial_test_accuracy=evaluate(network, test_set), network=network)
    params = network.params()
    for epoch in range(config.epochs):
        start = time.perf_counter()
        order = rng.permutation(len(x_train))
        losses = []
        for step, i in enumerate(range(0, len(order), config.batch_size)):
            idx = order[i : i + config.batch_size]
            loss, grads = _batch_grads(network, x_train[idx], y_train[idx], workers)
            sgd_step(params, grads, config.lr)
            losses.append(loss)
            if progress is not None:
                progress(epoch, step, loss)
        report.batch_losses.extend(losses)
        report.train_loss.append(float(np.mean(losses)))
        report.test_accuracy.append(evaluate(network, test_set))
        report.seconds.append(time.perf_counter() - start)
    return report


# -- checkpoints --------------------------------------------------------------

MAGIC = b"FZP1"
VERSION = 1


def save_checkpoint(path, network: Network) -> None:
    """Write ``FZP1 | u32 version | u32 header length | JSON header | float64 LE params``."""
    params = network.params()
    header = {
        "config": network.config.to_dict(),
        "param_shapes": [list(p.shape) for p in params],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for p in params:
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def load_checkpoint(path) -> Network:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", path, 0)
    if len(data) < 12:
        raise CheckpointError("truncated header", path, len(data))
    version, hlen = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}", path, 4)
    try:
        header = json.loads(data[12 : 12 + hlen].decode("utf-8"))
        config = NetworkConfig.from_dict(header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}", path, 12) from exc
    network = Network.from_config(config, np.random.default_rng(0))
    params = network.params()
    shapes = [tuple(s) for s in header["param_shapes"]]
    if shapes != [p.shape for p in params]:
        raise CheckpointError("parameter shapes in header do not match the configured layers", path, 12)
    offset = 12 + hlen
    expected = offset + 8 * sum(p.size for p in params)
    if len(data) != expected:
        raise CheckpointError(f"file is {len(data)} bytes, expected {expected}", path, min(len(data), expected))
    for p in params:
        n = p.size
        p[...] = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(p.shape)
        offset += 8 * n
    return network
