"""Q-function approximator: a small convolutional network in plain numpy.

Forward pass, backpropagation through conv/dense/ReLU layers, an Adam
optimizer, finite-difference gradient checking, and a binary checkpoint
format. Parameters are float32 for training; float64 is available for
gradient-check test builds.
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"LDQN"
CHECKPOINT_VERSION = 1

_KIND_CONV = 1
_KIND_DENSE = 2


class ArchitectureError(ValueError):
    """Layer shapes do not chain from the input to the output."""


class CheckpointError(ValueError):
    """Unreadable, truncated, or mismatched checkpoint file."""


@dataclass(frozen=True)
class Conv:
    filters: int
    ksize: int
    stride: int
    relu: bool = True


@dataclass(frozen=True)
class Dense:
    units: int
    relu: bool = False


@dataclass(frozen=True)
class Architecture:
    """Input shape plus an ordered tuple of Conv/Dense layers.

    Conv layers are valid-padding with square kernels and require a 3-D
    (h, w, c) input; the first Dense layer flattens whatever precedes it.
    """

    input_shape: tuple[int, ...]
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.layer_shapes()   # validates

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Output shape after each layer; raises ArchitectureError if invalid."""
        shape = self.input_shape
        shapes = []
        if not self.layers:
            raise ArchitectureError("architecture needs at least one layer")
        for layer in self.layers:
            if isinstance(layer, Conv):
                if len(shape) != 3:
                    raise ArchitectureError(
                        f"conv layer needs (h, w, c) input, got {shape}")
                h, w, _ = shape
                if layer.ksize > h or layer.ksize > w:
                    raise ArchitectureError(
                        f"kernel {layer.ksize} larger than input {shape}")
                oh = (h - layer.ksize) // layer.stride + 1
                ow = (w - layer.ksize) // layer.stride + 1
                if oh < 1 or ow < 1:
                    raise ArchitectureError("conv output collapsed to zero size")
                shape = (oh, ow, layer.filters)
            elif isinstance(layer, Dense):
                shape = (layer.units,)
            else:
                raise ArchitectureError(f"unknown layer kind {layer!r}")
            shapes.append(shape)
        return shapes

    @property
    def n_outputs(self) -> int:
        last = self.layers[-1]
        if not isinstance(last, Dense):
            raise ArchitectureError("final layer must be Dense")
        return last.units


def default_arch(input_shape: tuple[int, ...], n_actions: int) -> Architecture:
    """Reasonable architecture for a given observation shape.

    80x80-class inputs get the full conv stack; small images a lighter one;
    1-D inputs a plain two-layer dense net.
    """
    input_shape = tuple(input_shape)
    if len(input_shape) == 1:
        return Architecture(input_shape, (Dense(32, relu=True), Dense(n_actions)))
    h = input_shape[0]
    if h >= 40:
        layers = (Conv(16, 8, 4), Conv(32, 4, 2),
                  Dense(256, relu=True), Dense(n_actions))
    else:
        layers = (Conv(8, 4, 2), Conv(16, 3, 2),
                  Dense(64, relu=True), Dense(n_actions))
    return Architecture(input_shape, layers)


def _conv_forward(x, w, b, stride):
    """x: (N, H, W, C); w: (k, k, C, F). Returns pre-activation and the
    im2col matrix needed for the backward pass."""
    n, h, wd, c = x.shape
    k = w.shape[0]
    f = w.shape[3]
    oh = (h - k) // stride + 1
    ow = (wd - k) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    win = win[:, ::stride, ::stride]                 # (N, OH, OW, C, k, k)
    cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(n * oh * ow, k * k * c)
    out = cols @ w.reshape(k * k * c, f) + b
    return out.reshape(n, oh, ow, f), cols


def _conv_backward(dout, cols, x_shape, w, stride):
    n, h, wd, c = x_shape
    k = w.shape[0]
    f = w.shape[3]
    oh = (h - k) // stride + 1
    ow = (wd - k) // stride + 1
    d2 = dout.reshape(n * oh * ow, f)
    dw = (cols.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(k * k * c, f).T).reshape(n, oh, ow, k, k, c)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    for ki in range(k):
        for kj in range(k):
            dx[:, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride, :] += \
                dcols[:, :, :, ki, kj, :]
    return dx, dw, db


class AdamState:
    """Per-parameter first/second moment accumulators (beta1=0.9,
    beta2=0.999, eps=1e-8)."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, net: "QNet"):
        self.t = 0
        self.m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.params]
        self.v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in net.params]

    def apply(self, net: "QNet", grads, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.BETA1 ** self.t
        c2 = 1.0 - self.BETA2 ** self.t
        for (w, b), (gw, gb), (mw, mb), (vw, vb) in zip(
                net.params, grads, self.m, self.v):
            for p, g, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
                m *= self.BETA1
                m += (1.0 - self.BETA1) * g
                v *= self.BETA2
                v += (1.0 - self.BETA2) * np.square(g)
                p -= lr * (m / c1) / (np.sqrt(v / c2) + self.EPS)


class QNet:
    """Q-network over an Architecture: params, forward, train step, clone."""

    def __init__(self, arch: Architecture, seed: int | None = None,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.arch = arch
        self.dtype = np.dtype(dtype)
        if rng is None:
            rng = np.random.default_rng(seed)
        self.params: list[tuple[np.ndarray, np.ndarray]] = []
        in_shape = arch.input_shape
        for layer in arch.layers:
            if isinstance(layer, Conv):
                k, c, f = layer.ksize, in_shape[2], layer.filters
                fan_in = k * k * c
                bound = math.sqrt(6.0 / fan_in)
                w = rng.uniform(-bound, bound, size=(k, k, c, f))
                b = np.zeros(f)
                oh = (in_shape[0] - k) // layer.stride + 1
                ow = (in_shape[1] - k) // layer.stride + 1
                in_shape = (oh, ow, f)
            else:
                d = int(np.prod(in_shape))
                bound = math.sqrt(6.0 / d)
                w = rng.uniform(-bound, bound, size=(d, layer.units))
                b = np.zeros(layer.units)
                in_shape = (layer.units,)
            self.params.append((w.astype(self.dtype), b.astype(self.dtype)))

    @property
    def n_outputs(self) -> int:
        return self.arch.n_outputs

    def _forward_batch(self, x: np.ndarray, keep_cache: bool):
        """x: (N,) + input_shape, already cast to the net dtype."""
        caches = []
        a = x
        for layer, (w, b) in zip(self.arch.layers, self.params):
            if isinstance(layer, Conv):
                pre, cols = _conv_forward(a, w, b, layer.stride)
                cache = {"x_shape": a.shape, "cols": cols if keep_cache else None}
            else:
                flat = a.reshape(a.shape[0], -1)
                pre = flat @ w + b
                cache = {"flat": flat if keep_cache else None, "a_shape": a.shape}
            if layer.relu:
                a = np.maximum(pre, 0)
                cache["relu_mask"] = (pre > 0) if keep_cache else None
            else:
                a = pre
            caches.append(cache)
        return a, caches

    def forward_batch(self, states: np.ndarray) -> np.ndarray:
        """Q-values for a batch: (N,) + input_shape -> (N, n_outputs)."""
        x = np.ascontiguousarray(states, dtype=self.dtype)
        if x.shape[1:] != self.arch.input_shape:
            raise ValueError(
                f"state shape {x.shape[1:]} != arch input {self.arch.input_shape}")
        out, _ = self._forward_batch(x, keep_cache=False)
        return out

    def forward(self, state: np.ndarray) -> np.ndarray:
        """Q-values for a single state -> (n_outputs,)."""
        return self.forward_batch(np.asarray(state)[None])[0]

    def _backward(self, caches, dq):
        grads = [None] * len(self.params)
        d = dq
        for i in range(len(self.params) - 1, -1, -1):
            layer = self.arch.layers[i]
            w, _ = self.params[i]
            cache = caches[i]
            if layer.relu:
                d = d * cache["relu_mask"]
            if isinstance(layer, Conv):
                d, dw, db = _conv_backward(d, cache["cols"], cache["x_shape"],
                                           w, layer.stride)
            else:
                flat = cache["flat"]
                dw = flat.T @ d
                db = d.sum(axis=0)
                d = (d @ w.T).reshape(cache["a_shape"])
            grads[i] = (dw, db)
        return grads

    def loss_and_grads(self, states, actions, targets):
        """Mean squared error on the selected actions, plus parameter grads.

        Gradients flow only through each sample's chosen action output.
        """
        x = np.ascontiguousarray(states, dtype=self.dtype)
        actions = np.asarray(actions, dtype=np.int64)
        y = np.asarray(targets, dtype=self.dtype)
        n = x.shape[0]
        if not (len(actions) == len(y) == n):
            raise ValueError("batch fields have inconsistent lengths")
        if actions.min(initial=0) < 0 or actions.max(initial=0) >= self.n_outputs:
            raise ValueError("action index out of range")
        q, caches = self._forward_batch(x, keep_cache=True)
        err = q[np.arange(n), actions] - y
        loss = float(np.mean(err.astype(np.float64) ** 2))
        dq = np.zeros_like(q)
        dq[np.arange(n), actions] = (2.0 / n) * err
        return loss, self._backward(caches, dq)

    def train_batch(self, states, actions, targets, lr: float,
                    opt: AdamState) -> float:
        """One Adam step on the masked MSE loss; returns the loss value.

        A non-finite loss is reported by raising, never clamped.
        """
        loss, grads = self.loss_and_grads(states, actions, targets)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss {loss}")
        opt.apply(self, grads, lr)
        return loss

    def clone(self) -> "QNet":
        """Deep copy; used to (re)synchronize the target network."""
        other = object.__new__(QNet)
        other.arch = self.arch
        other.dtype = self.dtype
        other.params = [(w.copy(), b.copy()) for w, b in self.params]
        return other

    def astype(self, dtype) -> "QNet":
        other = object.__new__(QNet)
        other.arch = self.arch
        other.dtype = np.dtype(dtype)
        other.params = [(w.astype(dtype), b.astype(dtype)) for w, b in self.params]
        return other


def sync_target(online: QNet) -> QNet:
    """Deep-copied target network; later online updates do not leak into it."""
    return online.clone()


def grad_check(net: QNet, states, actions, targets, num_coords: int = 120,
               rng: np.random.Generator | None = None,
               analytic_grads=None) -> float:
    """Max relative error between backprop and central finite differences.

    Perturbation h is 1e-3 for float32 nets and 1e-6 for float64 nets. The
    numeric side evaluates the loss through a copy one precision level up
    (float64 for float32 nets, extended precision for float64 nets) so the
    difference quotient is not drowned by rounding of the loss values; the
    net's own analytic gradients are still what gets checked. Relative error
    is |ga - gn| / max(|ga|, |gn|, 1e-8) over up to `num_coords` randomly
    chosen parameters. Coordinates whose perturbation flips a ReLU
    activation are skipped: across a kink no two-sided derivative exists,
    so the central difference there measures nothing.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    h = 1e-3 if net.dtype == np.float32 else 1e-6
    if analytic_grads is None:
        _, analytic_grads = net.loss_and_grads(states, actions, targets)

    f64 = net.astype(np.float64 if net.dtype == np.float32 else np.longdouble)
    x_hp = np.ascontiguousarray(states, dtype=f64.dtype)
    y_hp = np.asarray(targets, dtype=f64.dtype)
    a_idx = np.asarray(actions, dtype=np.int64)
    n = x_hp.shape[0]

    def loss_at():
        # Masked MSE evaluated fully in the high-precision dtype, plus the
        # ReLU activation pattern so kink crossings can be detected.
        q, caches = f64._forward_batch(x_hp, keep_cache=True)
        err = q[np.arange(n), a_idx] - y_hp
        masks = tuple(c["relu_mask"].tobytes() for c in caches
                      if c.get("relu_mask") is not None)
        return (err * err).mean(), masks

    coords = []
    for li, (w, b) in enumerate(net.params):
        for pi, arr in enumerate((w, b)):
            for flat in range(arr.size):
                coords.append((li, pi, flat))
    if len(coords) > num_coords:
        order = rng.permutation(len(coords))[:num_coords]
        coords = [coords[i] for i in order]

    max_rel = 0.0
    for li, pi, flat in coords:
        arr = f64.params[li][pi]
        orig = arr.flat[flat]
        arr.flat[flat] = orig + h
        lp, masks_p = loss_at()
        arr.flat[flat] = orig - h
        lm, masks_m = loss_at()
        arr.flat[flat] = orig
        if masks_p != masks_m:
            continue
        gn = float((lp - lm) / (2.0 * h))
        ga = float(analytic_grads[li][pi].flat[flat])
        rel = abs(ga - gn) / max(abs(ga), abs(gn), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel


# ---------------------------------------------------------------------------
# Checkpoint format: magic "LDQN", version u32 LE, arch descriptor as u32s
# (input ndim + dims, layer count, then per layer kind/shape/stride/relu),
# then per-layer weights and biases as little-endian float32, row-major.
# ---------------------------------------------------------------------------

def _encode_arch(arch: Architecture) -> bytes:
    words = [len(arch.input_shape), *arch.input_shape, len(arch.layers)]
    for layer in arch.layers:
        if isinstance(layer, Conv):
            words += [_KIND_CONV, layer.filters, layer.ksize, layer.stride,
                      int(layer.relu)]
        else:
            words += [_KIND_DENSE, layer.units, int(layer.relu)]
    return struct.pack(f"<{len(words)}I", *words)


class _Reader:
    def __init__(self, f):
        self.f = f

    def u32(self) -> int:
        raw = self.f.read(4)
        if len(raw) != 4:
            raise CheckpointError("truncated checkpoint header")
        return struct.unpack("<I", raw)[0]

    def f32(self, count: int) -> np.ndarray:
        raw = self.f.read(4 * count)
        if len(raw) != 4 * count:
            raise CheckpointError("truncated checkpoint data")
        return np.frombuffer(raw, dtype="<f4").copy()


def save_checkpoint(net: QNet, path) -> None:
    """Write the network atomically (temp file + rename)."""
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(_encode_arch(net.arch))
        for w, b in net.params:
            f.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path, expect_arch: Architecture | None = None) -> QNet:
    """Read a checkpoint back into a float32 QNet.

    If expect_arch is given, a differing stored descriptor is an error.
    """
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad checkpoint magic {magic!r}")
        r = _Reader(f)
        version = r.u32()
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        ndim = r.u32()
        if ndim > 4:
            raise CheckpointError(f"implausible input rank {ndim}")
        input_shape = tuple(r.u32() for _ in range(ndim))
        n_layers = r.u32()
        layers = []
        for _ in range(n_layers):
            kind = r.u32()
            if kind == _KIND_CONV:
                filters, ksize, stride, relu = (r.u32() for _ in range(4))
                layers.append(Conv(filters, ksize, stride, bool(relu)))
            elif kind == _KIND_DENSE:
                units, relu = r.u32(), r.u32()
                layers.append(Dense(units, bool(relu)))
            else:
                raise CheckpointError(f"unknown layer kind {kind}")
        try:
            arch = Architecture(tuple(input_shape), tuple(layers))
        except ArchitectureError as e:
            raise CheckpointError(f"invalid stored architecture: {e}") from e
        if expect_arch is not None and arch != expect_arch:
            raise CheckpointError(
                f"checkpoint architecture {arch} does not match expected "
                f"{expect_arch}")

        net = object.__new__(QNet)
        net.arch = arch
        net.dtype = np.dtype(np.float32)
        net.params = []
        in_shape = arch.input_shape
        for layer in arch.layers:
            if isinstance(layer, Conv):
                k, c, fno = layer.ksize, in_shape[2], layer.filters
                w = r.f32(k * k * c * fno).reshape(k, k, c, fno)
                b = r.f32(fno)
                oh = (in_shape[0] - k) // layer.stride + 1
                ow = (in_shape[1] - k) // layer.stride + 1
                in_shape = (oh, ow, fno)
            else:
                d = int(np.prod(in_shape))
                w = r.f32(d * layer.units).reshape(d, layer.units)
                b = r.f32(layer.units)
                in_shape = (layer.units,)
            net.params.append((w, b))
        trailing = f.read(1)
        if trailing:
            raise CheckpointError("trailing bytes after checkpoint data")
    return net
