"""Dense float32 tensors and the small set of neural primitives the fusion
math is built from: 2-D convolution, inference-mode batch norm, sigmoid,
softmax, axis reductions, concatenation and elementwise algebra.

Tensors are plain ``numpy.ndarray`` values in float32, row-major. Every
operation validates its inputs, returns a fresh array and never mutates its
arguments, so values are safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError, ShapeError

Tensor = np.ndarray

WEIGHTS_MAGIC = b"WGTS"
WEIGHTS_VERSION = 1


def as_tensor(data, shape=None) -> Tensor:
    """Coerce to a contiguous float32 array, optionally reshaping."""
    t = np.ascontiguousarray(data, dtype=np.float32)
    if shape is not None:
        t = t.reshape(shape)
    return t


def check_finite(t: Tensor, what: str = "tensor") -> Tensor:
    if not np.all(np.isfinite(t)):
        raise ShapeError(f"{what} contains non-finite values")
    return t


@dataclass(frozen=True, eq=False)
class ConvSpec:
    """Weights for one convolution site: kernel (out_ch, in_ch, k, k) plus bias."""

    kernel: Tensor
    bias: Tensor
    padding: int = 0
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kernel", as_tensor(self.kernel))
        object.__setattr__(self, "bias", as_tensor(self.bias))
        if self.kernel.ndim != 4:
            raise ShapeError(f"conv kernel must be 4-d, got shape {self.kernel.shape}")
        k_h, k_w = self.kernel.shape[2], self.kernel.shape[3]
        if k_h != k_w or k_h % 2 == 0:
            raise ConfigError(f"conv kernel must be square with odd size, got {k_h}x{k_w}")
        if self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match {self.kernel.shape[0]} output channels"
            )
        if self.padding < 0:
            raise ConfigError("padding must be >= 0")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")

    @property
    def out_channels(self) -> int:
        return self.kernel.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernel.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[2]


@dataclass(frozen=True, eq=False)
class BatchNormSpec:
    """Per-channel inference-mode batch norm parameters."""

    gamma: Tensor
    beta: Tensor
    running_mean: Tensor
    running_var: Tensor
    epsilon: float = 1e-5

    def __post_init__(self):
        for name in ("gamma", "beta", "running_mean", "running_var"):
            object.__setattr__(self, name, as_tensor(getattr(self, name)).reshape(-1))
        n = self.gamma.shape[0]
        for name in ("beta", "running_mean", "running_var"):
            if getattr(self, name).shape[0] != n:
                raise ShapeError("batch norm parameter arrays must all have equal length")
        if np.any(self.running_var < 0):
            raise ConfigError("running_var entries must be >= 0")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    @classmethod
    def identity(cls, channels: int) -> "BatchNormSpec":
        return cls(
            gamma=np.ones(channels, np.float32),
            beta=np.zeros(channels, np.float32),
            running_mean=np.zeros(channels, np.float32),
            running_var=np.ones(channels, np.float32),
        )


def seeded_conv(out_ch: int, in_ch: int, k: int, seed: int, padding: int = 0,
                stride: int = 1, zero_bias: bool = False) -> ConvSpec:
    """Default initialization: uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    bound = 1.0 / np.sqrt(in_ch * k * k)
    kernel = rng.uniform(-bound, bound, size=(out_ch, in_ch, k, k)).astype(np.float32)
    if zero_bias:
        bias = np.zeros(out_ch, np.float32)
    else:
        bias = rng.uniform(-bound, bound, size=out_ch).astype(np.float32)
    return ConvSpec(kernel=kernel, bias=bias, padding=padding, stride=stride)


def conv2d(x: Tensor, spec: ConvSpec) -> Tensor:
    """Cross-correlation (no kernel flip) with zero padding.

    x is (C_in, H, W); output is (C_out, H', W') with
    H' = (H + 2*padding - k) // stride + 1.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"conv2d input must be (C, H, W), got shape {x.shape}")
    c_in, h, w = x.shape
    if c_in != spec.in_channels:
        raise ShapeError(
            f"input has {c_in} channels but kernel expects {spec.in_channels}"
        )
    k = spec.kernel_size
    p, s = spec.padding, spec.stride
    h_out = (h + 2 * p - k) // s + 1
    w_out = (w + 2 * p - k) // s + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(
            f"kernel {k}x{k} with padding {p} does not fit input {h}x{w}"
        )
    if p > 0:
        x = np.pad(x, ((0, 0), (p, p), (p, p)))
    # im2col: gather every kxk patch, then one matmul against the flattened kernel
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(1, 2))
    windows = windows[:, ::s, ::s, :, :]  # (C_in, H', W', k, k)
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(h_out * w_out, c_in * k * k)
    flat_kernel = spec.kernel.reshape(spec.out_channels, c_in * k * k)
    out = cols @ flat_kernel.T + spec.bias
    return np.ascontiguousarray(out.T.reshape(spec.out_channels, h_out, w_out))


def batchnorm_infer(x: Tensor, spec: BatchNormSpec) -> Tensor:
    """Per channel: gamma * (x - mean) / sqrt(var + epsilon) + beta."""
    x = as_tensor(x)
    if x.ndim < 1 or x.shape[0] != spec.channels:
        raise ShapeError(
            f"input has {x.shape[0] if x.ndim else 0} channels, spec has {spec.channels}"
        )
    bshape = (spec.channels,) + (1,) * (x.ndim - 1)
    scale = (spec.gamma / np.sqrt(spec.running_var + np.float32(spec.epsilon))).reshape(bshape)
    shift = spec.beta.reshape(bshape) - spec.running_mean.reshape(bshape) * scale
    return (x * scale + shift).astype(np.float32)


def sigmoid(x: Tensor) -> Tensor:
    """Numerically stable logistic; output strictly inside (0, 1) for finite x."""
    x = as_tensor(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax_over(x: Tensor, axis: int) -> Tensor:
    """Softmax along one axis; every output slice sums to 1."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return (ex / np.sum(ex, axis=axis, keepdims=True)).astype(np.float32)


def reduce(x: Tensor, axis: int, mode: str) -> Tensor:
    """Remove an axis by max or avg."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {x.shape}")
    if mode == "max":
        return np.max(x, axis=axis)
    if mode == "avg":
        return np.mean(x, axis=axis, dtype=np.float32)
    raise ConfigError(f"reduce mode must be 'max' or 'avg', got {mode!r}")


def concat(xs, axis: int) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    try:
        return np.concatenate(xs, axis=axis)
    except ValueError as e:
        raise ShapeError(f"cannot concatenate shapes {[x.shape for x in xs]}: {e}") from e


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"elementwise add needs equal shapes, got {a.shape} vs {b.shape}")
    return a + b


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"elementwise mul needs equal shapes, got {a.shape} vs {b.shape}")
    return a * b


def save_weights(tensors: dict[str, Tensor], path) -> None:
    """Write named tensors as the little-endian WGTS container.

    Layout: magic "WGTS", version u8, count u32, then per tensor:
    name length u16, name utf-8, rank u8, dims u32 each, f32 data.
    """
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<BI", WEIGHTS_VERSION, len(tensors)))
        for name, t in tensors.items():
            t = as_tensor(t)
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", t.ndim))
            f.write(struct.pack(f"<{t.ndim}I", *t.shape))
            f.write(t.astype("<f4").tobytes())


def load_weights(path) -> dict[str, Tensor]:
    """Read a WGTS container written by save_weights."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}, expected {WEIGHTS_MAGIC!r}")
    version, count = struct.unpack_from("<BI", blob, 4)
    if version != WEIGHTS_VERSION:
        raise FormatError(f"{path}: unsupported weights version {version}")
    off = 9
    out: dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + name_len].decode("utf-8")
        off += name_len
        (rank,) = struct.unpack_from("<B", blob, off)
        off += 1
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(blob, dtype="<f4", count=n, offset=off)
        off += 4 * n
        out[name] = data.reshape(dims).astype(np.float32)
    return out
