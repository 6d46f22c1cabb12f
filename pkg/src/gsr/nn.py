"""Minimal deterministic training engine: layers, losses, backprop, ADAM.

Everything is plain float64 numpy with fixed reduction orders, so two runs
with the same seed and config produce bit-identical parameters. One layer of
the stack is designated as the regularized layer; its post-layer output
(flattened per sample) is captured on every forward pass and fed to the
activation penalty.

Conventions: per-sample shapes are tuples, dense data is (d,), image data is
channels-first (C, H, W). A batch prepends the batch axis.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch, StaleForwardState, TruncatedFile
from .regularize import Penalty

__all__ = [
    "Dense",
    "Conv2D",
    "MaxPool2D",
    "LeakyReLU",
    "Softmax",
    "Reshape",
    "Network",
    "ActivationMatrix",
    "TrainConfig",
    "AdamState",
    "init_adam_state",
    "adam_step",
    "forward",
    "backward",
    "train",
    "Trainer",
    "predict",
    "loss_value_and_grad",
    "save_checkpoint",
    "load_checkpoint",
    "collect_activations",
]

_INIT_STREAM = 0
_SHUFFLE_STREAM = 1

CHECKPOINT_MAGIC = b"GSRN"
CHECKPOINT_VERSION = 1


def _shape_str(shape) -> str:
    return "x".join(str(d) for d in shape)


class Dense:
    """Fully connected layer: y = x W + b."""

    tag = 1

    def __init__(self, in_dim: int, out_dim: int):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("Dense dimensions must be positive")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = np.zeros((in_dim, out_dim))
        self.bias = np.zeros(out_dim)

    def out_shape(self, in_shape):
        if in_shape != (self.in_dim,):
            raise ShapeMismatch(
                f"Dense({self.in_dim}->{self.out_dim}) got input shape {_shape_str(in_shape)}"
            )
        return (self.out_dim,)

    def init_params(self, rng):
        bound = np.sqrt(6.0 / (self.in_dim + self.out_dim))
        self.weight = rng.uniform(-bound, bound, size=(self.in_dim, self.out_dim))
        self.bias = np.zeros(self.out_dim)

    @property
    def params(self):
        return [self.weight, self.bias]

    def set_params(self, values):
        self.weight, self.bias = values

    def forward(self, x):
        return x @ self.weight + self.bias, x

    def backward(self, dy, cache):
        x = cache
        dw = x.T @ dy
        db = dy.sum(axis=0)
        dx = dy @ self.weight.T
        return dx, [dw, db]


def _same_padding(size: int, patch: int, stride: int) -> tuple[int, int, int]:
    """TF-style 'same': out = ceil(size/stride), extra padding goes after."""
    out = -(-size // stride)
    total = max((out - 1) * stride + patch - size, 0)
    before = total // 2
    return out, before, total - before


def _strided_view(x, di, dj, stride, out_h, out_w):
    return x[
        :,
        :,
        di : di + (out_h - 1) * stride + 1 : stride,
        dj : dj + (out_w - 1) * stride + 1 : stride,
    ]


class Conv2D:
    """2-D convolution, square patch, optional 'same' zero padding."""

    tag = 2

    def __init__(self, in_channels: int, out_channels: int, patch: int, stride: int = 1, same: bool = True):
        if min(in_channels, out_channels, patch, stride) < 1:
            raise ValueError("Conv2D dimensions must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.patch = patch
        self.stride = stride
        self.same = same
        self.kernel = np.zeros((out_channels, in_channels, patch, patch))
        self.bias = np.zeros(out_channels)

    def _geometry(self, h: int, w: int):
        if self.same:
            out_h, top, bottom = _same_padding(h, self.patch, self.stride)
            out_w, left, right = _same_padding(w, self.patch, self.stride)
        else:
            out_h = (h - self.patch) // self.stride + 1
            out_w = (w - self.patch) // self.stride + 1
            top = bottom = left = right = 0
        return out_h, out_w, top, bottom, left, right

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.in_channels:
            raise ShapeMismatch(
                f"Conv2D expects ({self.in_channels}, H, W), got {_shape_str(in_shape)}"
            )
        out_h, out_w, *_ = self._geometry(in_shape[1], in_shape[2])
        if out_h < 1 or out_w < 1:
            raise ShapeMismatch(f"Conv2D output collapses on input {_shape_str(in_shape)}")
        return (self.out_channels, out_h, out_w)

    def init_params(self, rng):
        fan_in = self.in_channels * self.patch * self.patch
        fan_out = self.out_channels * self.patch * self.patch
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        self.kernel = rng.uniform(-bound, bound, size=self.kernel.shape)
        self.bias = np.zeros(self.out_channels)

    @property
    def params(self):
        return [self.kernel, self.bias]

    def set_params(self, values):
        self.kernel, self.bias = values

    def forward(self, x):
        b, _, h, w = x.shape
        out_h, out_w, top, bottom, left, right = self._geometry(h, w)
        xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
        acc = np.zeros((b, out_h, out_w, self.out_channels))
        for di in range(self.patch):
            for dj in range(self.patch):
                view = _strided_view(xp, di, dj, self.stride, out_h, out_w)
                acc += np.tensordot(view, self.kernel[:, :, di, dj], axes=([1], [1]))
        y = acc.transpose(0, 3, 1, 2) + self.bias[None, :, None, None]
        return y, (xp, (h, w), (out_h, out_w), (top, left))

    def backward(self, dy, cache):
        xp, (h, w), (out_h, out_w), (top, left) = cache
        dyt = dy.transpose(0, 2, 3, 1)
        db = dy.sum(axis=(0, 2, 3))
        dk = np.zeros_like(self.kernel)
        dxp = np.zeros_like(xp)
        for di in range(self.patch):
            for dj in range(self.patch):
                view = _strided_view(xp, di, dj, self.stride, out_h, out_w)
                dk[:, :, di, dj] = np.tensordot(dyt, view, axes=([0, 1, 2], [0, 2, 3]))
                dview = np.tensordot(dyt, self.kernel[:, :, di, dj], axes=([3], [0]))
                _strided_view(dxp, di, dj, self.stride, out_h, out_w)[...] += dview.transpose(0, 3, 1, 2)
        dx = dxp[:, :, top : top + h, left : left + w]
        return dx, [dk, db]


class MaxPool2D:
    """Max pooling; gradient routes to the first maximum in each window."""

    tag = 3

    def __init__(self, patch: int, stride: int):
        if patch < 1 or stride < 1:
            raise ValueError("MaxPool2D dimensions must be positive")
        self.patch = patch
        self.stride = stride

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"MaxPool2D expects (C, H, W), got {_shape_str(in_shape)}")
        c, h, w = in_shape
        out_h = (h - self.patch) // self.stride + 1
        out_w = (w - self.patch) // self.stride + 1
        if h < self.patch or w < self.patch:
            raise ShapeMismatch(f"MaxPool2D window exceeds input {_shape_str(in_shape)}")
        return (c, out_h, out_w)

    @property
    def params(self):
        return []

    def set_params(self, values):
        pass

    def _windows(self, x, out_h, out_w):
        cols = [
            _strided_view(x, di, dj, self.stride, out_h, out_w)
            for di in range(self.patch)
            for dj in range(self.patch)
        ]
        return np.stack(cols, axis=-1)

    def forward(self, x):
        _, c, h, w = x.shape
        out_h = (h - self.patch) // self.stride + 1
        out_w = (w - self.patch) // self.stride + 1
        win = self._windows(x, out_h, out_w)
        idx = win.argmax(axis=-1)
        y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
        return y, (x.shape, idx, (out_h, out_w))

    def backward(self, dy, cache):
        x_shape, idx, (out_h, out_w) = cache
        dwin = np.zeros((*dy.shape, self.patch * self.patch))
        np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
        dx = np.zeros(x_shape)
        k = 0
        for di in range(self.patch):
            for dj in range(self.patch):
                _strided_view(dx, di, dj, self.stride, out_h, out_w)[...] += dwin[..., k]
                k += 1
        return dx, []


class LeakyReLU:
    """Elementwise max(x, slope * x) with slope in (0, 1)."""

    tag = 4

    def __init__(self, slope: float = 0.2):
        if not 0.0 < slope < 1.0:
            raise ValueError("LeakyReLU slope must lie in (0, 1)")
        self.slope = float(slope)

    def out_shape(self, in_shape):
        return in_shape

    @property
    def params(self):
        return []

    def set_params(self, values):
        pass

    def forward(self, x):
        return np.where(x > 0, x, self.slope * x), x > 0

    def backward(self, dy, cache):
        return np.where(cache, dy, self.slope * dy), []


class Softmax:
    """Row softmax over a flat per-sample vector."""

    tag = 5

    def out_shape(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeMismatch(f"Softmax expects a flat vector, got {_shape_str(in_shape)}")
        return in_shape

    @property
    def params(self):
        return []

    def set_params(self, values):
        pass

    def forward(self, x):
        shifted = x - x.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        p = e / e.sum(axis=1, keepdims=True)
        return p, p

    def backward(self, dy, cache):
        p = cache
        inner = np.sum(dy * p, axis=1, keepdims=True)
        return p * (dy - inner), []


class Reshape:
    """Per-sample reshape; element count must be preserved."""

    tag = 6

    def __init__(self, shape):
        self.shape = tuple(int(d) for d in shape)
        if any(d < 1 for d in self.shape):
            raise ValueError("Reshape dimensions must be positive")

    def out_shape(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise ShapeMismatch(
                f"Reshape to {_shape_str(self.shape)} from incompatible {_shape_str(in_shape)}"
            )
        return self.shape

    @property
    def params(self):
        return []

    def set_params(self, values):
        pass

    def forward(self, x):
        return x.reshape(x.shape[0], *self.shape), x.shape

    def backward(self, dy, cache):
        return dy.reshape(cache), []


LAYER_KINDS = (Dense, Conv2D, MaxPool2D, LeakyReLU, Softmax, Reshape)


@dataclass(frozen=True)
class ActivationMatrix:
    """Batch x neuron matrix of regularized-layer activations."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeMismatch(f"activation matrix must be 2-D, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("activation matrix contains non-finite entries")
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


class Network:
    """Ordered layer stack with one designated regularized layer.

    Shape algebra is validated at construction; parameters are initialized
    from the seed (Glorot-uniform weights, zero biases). Training mutates the
    parameters in place, so a Network must not be shared during a step.
    """

    def __init__(self, layers, regularized_layer_index: int, input_shape, seed: int):
        if not layers:
            raise ShapeMismatch("network needs at least one layer")
        if not 0 <= regularized_layer_index < len(layers):
            raise ValueError(
                f"regularized_layer_index {regularized_layer_index} out of range"
            )
        self.layers = list(layers)
        self.regularized_layer_index = regularized_layer_index
        self.input_shape = tuple(int(d) for d in input_shape)
        self.rng_seed = int(seed)

        shape = self.input_shape
        self.shapes = [shape]
        for layer in self.layers:
            shape = layer.out_shape(shape)
            self.shapes.append(shape)
        self.output_shape = shape

        for k, layer in enumerate(self.layers):
            if layer.params:
                layer.init_params(np.random.default_rng((self.rng_seed, _INIT_STREAM, k)))

        self._forward_cache = None

    @property
    def regularized_width(self) -> int:
        return int(np.prod(self.shapes[self.regularized_layer_index + 1]))

    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def set_parameters(self, values):
        values = list(values)
        if len(values) != len(self.parameters()):
            raise ShapeMismatch("parameter list length mismatch")
        pos = 0
        for layer in self.layers:
            count = len(layer.params)
            if count:
                layer.set_params(values[pos : pos + count])
                pos += count


def forward(net: Network, batch: np.ndarray) -> tuple[np.ndarray, ActivationMatrix]:
    """Run the batch through the stack, capturing regularized-layer output."""
    x = np.asarray(batch, dtype=np.float64)
    if x.shape[1:] != net.input_shape:
        raise ShapeMismatch(
            f"batch shape {x.shape[1:]} does not match input {net.input_shape}"
        )
    caches = []
    acts = None
    for k, layer in enumerate(net.layers):
        x, cache = layer.forward(x)
        caches.append(cache)
        if k == net.regularized_layer_index:
            acts = ActivationMatrix(x.reshape(x.shape[0], -1))
    net._forward_cache = (caches, x.shape)
    return x, acts


def backward(net: Network, loss_grad: np.ndarray, penalty_grad_at_layer=None):
    """Reverse pass; returns gradients aligned with net.parameters().

    penalty_grad_at_layer, if given, is a (batch, width) gradient with respect
    to the flattened regularized-layer output; it joins the upstream gradient
    at that layer before propagation continues.
    """
    if net._forward_cache is None:
        raise StaleForwardState("backward() requires a completed forward() pass")
    caches, out_shape = net._forward_cache
    dy = np.asarray(loss_grad, dtype=np.float64)
    if dy.shape != out_shape:
        raise ShapeMismatch(f"loss gradient shape {dy.shape} does not match output {out_shape}")

    grads_reversed = []
    for k in range(len(net.layers) - 1, -1, -1):
        if k == net.regularized_layer_index and penalty_grad_at_layer is not None:
            dy = dy + np.asarray(penalty_grad_at_layer).reshape(dy.shape)
        dy, param_grads = net.layers[k].backward(dy, caches[k])
        grads_reversed.extend(reversed(param_grads))
    return list(reversed(grads_reversed))


def predict(net: Network, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
    """Forward-only evaluation in chunks; does not disturb training caches."""
    x = np.asarray(inputs, dtype=np.float64)
    saved = net._forward_cache
    outputs = []
    for start in range(0, x.shape[0], batch_size):
        out, _ = forward(net, x[start : start + batch_size])
        outputs.append(out)
    net._forward_cache = saved
    return np.concatenate(outputs, axis=0)


def collect_activations(net: Network, inputs: np.ndarray, batch_size: int = 512) -> ActivationMatrix:
    """Regularized-layer activations for the whole dataset, in dataset order."""
    x = np.asarray(inputs, dtype=np.float64)
    saved = net._forward_cache
    rows = []
    for start in range(0, x.shape[0], batch_size):
        _, acts = forward(net, x[start : start + batch_size])
        rows.append(acts.values)
    net._forward_cache = saved
    return ActivationMatrix(np.concatenate(rows, axis=0))


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    epochs: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss: str = "mse"
    penalty: Penalty = field(default_factory=Penalty.none)
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.loss not in ("mse", "cross_entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class AdamState:
    step: int
    m: list
    v: list


def init_adam_state(params) -> AdamState:
    return AdamState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One bias-corrected ADAM update; returns (new_params, new_state)."""
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_m, new_v, new_p = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m1 = b1 * m + (1.0 - b1) * g
        v1 = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m1 / (1.0 - b1**t)
        v_hat = v1 / (1.0 - b2**t)
        new_p.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon))
        new_m.append(m1)
        new_v.append(v1)
    return new_p, AdamState(t, new_m, new_v)


def loss_value_and_grad(kind: str, output: np.ndarray, targets: np.ndarray):
    """Primary loss and its gradient with respect to the network output.

    mse averages over every element; cross_entropy averages over the batch
    (targets are one-hot rows, output is a probability row).
    """
    if output.shape != targets.shape:
        raise ShapeMismatch(f"output {output.shape} vs targets {targets.shape}")
    if kind == "mse":
        diff = output - targets
        value = float(np.mean(diff * diff))
        grad = (2.0 / diff.size) * diff
        return value, grad
    if kind == "cross_entropy":
        b = output.shape[0]
        p = np.clip(output, 1e-12, None)
        value = -float(np.sum(targets * np.log(p))) / b
        grad = -(targets / p) / b
        return value, grad
    raise ValueError(f"unknown loss {kind!r}")


@dataclass(frozen=True)
class StepStats:
    step: int
    loss: float
    penalty: float


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    penalty: float


def epoch_permutation(seed: int, epoch: int, n: int) -> np.ndarray:
    """Deterministic per-epoch shuffle from a counter-keyed stream."""
    return np.random.default_rng((seed, _SHUFFLE_STREAM, epoch)).permutation(n)


class Trainer:
    """Step-driven optimizer loop shared by train() and the graph-learning loop.

    Batches come from per-epoch permutations keyed by (seed, epoch counter),
    so any sequence of run_epochs / run_steps calls is reproducible. ADAM
    state persists across phases.
    """

    def __init__(self, net: Network, inputs, targets, config: TrainConfig):
        self.net = net
        self.inputs = np.asarray(inputs, dtype=np.float64)
        self.targets = np.asarray(targets, dtype=np.float64)
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeMismatch("inputs and targets disagree on sample count")
        if self.inputs.shape[1:] != net.input_shape:
            raise ShapeMismatch(
                f"inputs {self.inputs.shape[1:]} do not match network input {net.input_shape}"
            )
        if self.targets.shape[1:] != net.output_shape:
            raise ShapeMismatch(
                f"targets {self.targets.shape[1:]} do not match network output {net.output_shape}"
            )
        width = config.penalty.expected_width()
        if width is not None and width != net.regularized_width:
            raise ShapeMismatch(
                f"penalty is wired for width {width}, regularized layer has {net.regularized_width}"
            )
        self.config = config
        self.state = init_adam_state(net.parameters())
        self.global_step = 0
        self.epochs_drawn = 0
        self._pending = deque()

    @property
    def steps_per_epoch(self) -> int:
        n = self.inputs.shape[0]
        return -(-n // self.config.batch_size)

    def _refill(self):
        n = self.inputs.shape[0]
        perm = epoch_permutation(self.config.seed, self.epochs_drawn, n)
        for start in range(0, n, self.config.batch_size):
            self._pending.append(perm[start : start + self.config.batch_size])
        self.epochs_drawn += 1

    def step(self, penalty: Penalty) -> StepStats:
        if not self._pending:
            self._refill()
        idx = self._pending.popleft()
        x = self.inputs[idx]
        t = self.targets[idx]
        try:
            output, acts = forward(self.net, x)
        except ValueError as exc:
            # non-finite activations imply a non-finite objective
            raise NonFiniteLoss(
                f"activations became non-finite at step {self.global_step}", self.global_step
            ) from exc
        loss, dout = loss_value_and_grad(self.config.loss, output, t)
        raw_pen, raw_grad = penalty.raw_value_and_grad(acts.values)
        objective = loss + penalty.alpha * raw_pen
        if not np.isfinite(objective):
            raise NonFiniteLoss(
                f"objective became non-finite at step {self.global_step}", self.global_step
            )
        pen_grad = penalty.alpha * raw_grad if penalty.alpha != 0.0 else None
        grads = backward(self.net, dout, pen_grad)
        params, self.state = adam_step(self.net.parameters(), grads, self.state, self.config)
        self.net.set_parameters(params)
        stats = StepStats(self.global_step, loss, raw_pen)
        self.global_step += 1
        return stats

    def run_steps(self, m: int, penalty: Penalty) -> list[StepStats]:
        return [self.step(penalty) for _ in range(m)]

    def run_epochs(self, epochs: int, penalty: Penalty) -> list[EpochStats]:
        history = []
        for _ in range(epochs):
            epoch = self.epochs_drawn
            stats = self.run_steps(self.steps_per_epoch, penalty)
            history.append(
                EpochStats(
                    epoch,
                    float(np.mean([s.loss for s in stats])),
                    float(np.mean([s.penalty for s in stats])),
                )
            )
        return history


def train(net: Network, inputs, targets, config: TrainConfig):
    """Mini-batch training; returns the network and per-epoch history.

    The per-batch objective is loss + alpha * penalty; the history records
    the raw (unweighted) penalty value so the column is comparable across
    coefficients, including alpha = 0.
    """
    trainer = Trainer(net, inputs, targets, config)
    history = trainer.run_epochs(config.epochs, config.penalty)
    return net, history


# --- checkpoint io ----------------------------------------------------------

def _pack_u32(*values) -> bytes:
    return struct.pack("<" + "I" * len(values), *values)


def _layer_header(layer) -> tuple[int, list[int], list[np.ndarray]]:
    if isinstance(layer, Dense):
        return layer.tag, [layer.in_dim, layer.out_dim], [layer.weight, layer.bias]
    if isinstance(layer, Conv2D):
        dims = [layer.in_channels, layer.out_channels, layer.patch, layer.stride, int(layer.same)]
        return layer.tag, dims, [layer.kernel, layer.bias]
    if isinstance(layer, MaxPool2D):
        return layer.tag, [layer.patch, layer.stride], []
    if isinstance(layer, LeakyReLU):
        return layer.tag, [], [np.array([layer.slope])]
    if isinstance(layer, Softmax):
        return layer.tag, [], []
    if isinstance(layer, Reshape):
        return layer.tag, list(layer.shape), []
    raise ValueError(f"unknown layer type {type(layer).__name__}")


def save_checkpoint(net: Network, path) -> None:
    """Little-endian binary: GSRN magic, version, layout, then f64 parameters."""
    chunks = [
        CHECKPOINT_MAGIC,
        _pack_u32(
            CHECKPOINT_VERSION,
            len(net.layers),
            net.regularized_layer_index,
            net.rng_seed,
            len(net.input_shape),
            *net.input_shape,
        ),
    ]
    for layer in net.layers:
        tag, dims, tensors = _layer_header(layer)
        chunks.append(struct.pack("<B", tag))
        chunks.append(_pack_u32(len(dims), *dims))
        for tensor in tensors:
            chunks.append(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.blob):
            raise TruncatedFile(f"{self.path}: expected {count} more bytes at offset {self.pos}")
        out = self.blob[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self, count: int = 1):
        vals = struct.unpack("<" + "I" * count, self.take(4 * count))
        return vals[0] if count == 1 else list(vals)

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def load_checkpoint(path) -> Network:
    """Load and validate a checkpoint; shape algebra is re-checked on build."""
    with open(path, "rb") as fh:
        blob = fh.read()
    r = _Reader(blob, path)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a GSRN checkpoint")
    version = r.u32()
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    layer_count = r.u32()
    reg_idx = r.u32()
    seed = r.u32()
    rank = r.u32()
    input_shape = tuple(r.u32(rank)) if rank > 1 else (r.u32(),) if rank == 1 else ()

    layers = []
    loaded_params = []
    for _ in range(layer_count):
        tag = r.u8()
        ndims = r.u32()
        dims = r.u32(ndims) if ndims > 1 else [r.u32()] if ndims == 1 else []
        if tag == Dense.tag:
            layer = Dense(dims[0], dims[1])
            loaded_params.append((layer, [r.f64(dims[0] * dims[1]).reshape(dims[0], dims[1]), r.f64(dims[1])]))
        elif tag == Conv2D.tag:
            layer = Conv2D(dims[0], dims[1], dims[2], dims[3], bool(dims[4]))
            kernel = r.f64(dims[1] * dims[0] * dims[2] * dims[2]).reshape(dims[1], dims[0], dims[2], dims[2])
            loaded_params.append((layer, [kernel, r.f64(dims[1])]))
        elif tag == MaxPool2D.tag:
            layer = MaxPool2D(dims[0], dims[1])
        elif tag == LeakyReLU.tag:
            layer = LeakyReLU(float(r.f64(1)[0]))
        elif tag == Softmax.tag:
            layer = Softmax()
        elif tag == Reshape.tag:
            layer = Reshape(dims)
        else:
            raise ValueError(f"{path}: unknown layer tag {tag}")
        layers.append(layer)

    net = Network(layers, reg_idx, input_shape, seed)
    for layer, tensors in loaded_params:
        layer.set_params(tensors)
    return net
