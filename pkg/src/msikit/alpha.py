"""Alpha-volume prediction from a sweep volume.

Two routes produce the (H, W, N, 1) transparency volume:

  * photoconsistency_alpha - a deterministic, learning-free estimator.
    Projections agree (low across-source variance) at the sphere closest
    to the true surface, so per pixel we softmax the negated variances
    over the layer axis into visibility weights and invert them into
    front-to-back alphas.

  * a 3D convolutional encoder-decoder whose layer graph, strides,
    dilations, and skip concatenations are fixed by `net_spec_table1`.
    Only the forward pass is implemented (plus shape propagation used to
    validate configurations); weights are random or loaded from a file,
    never trained here.

The net's raw output maps to alpha through `alpha_activation`: sigmoid by
default, or a clamped ReLU variant selectable by flag.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .wssv import Wssv

_WEIGHTS_MAGIC = b"MSIW"
_WEIGHTS_VERSION = 1

KERNEL = 3
INPUT_NAME = "wssv"


# ---------------------------------------------------------------------------
# learning-free estimator


def photoconsistency_alpha(
    wssv: Wssv, beta: float = 50.0, support: int = 1
) -> np.ndarray:
    """Alpha volume from across-source variance, shape (H, W, N, 1).

    score_i = -variance_i (invalid layers excluded); scores are box-smoothed
    over `support` neighbouring layers, sharpened with softmax(beta * score)
    into visibility weights w, and converted to compositing alphas by the
    front-to-back inversion a_i = w_i / (1 - sum_{j<i} w_j), which makes the
    over operator reproduce exactly the weights w. Pixels with no valid
    layer get alpha 0 everywhere.

    Returned in float64: the weight-recovery identity holds to ~1e-12, and
    MSI assembly quantizes to float32 at the very end anyway.
    """
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if support < 0:
        raise ValueError(f"support must be >= 0, got {support}")

    valid = wssv.source_count > 0
    score = -wssv.variance.astype(np.float64)

    if support > 0:
        n = score.shape[2]
        summed = np.zeros_like(score)
        counts = np.zeros_like(score)
        for off in range(-support, support + 1):
            lo, hi = max(0, off), min(n, n + off)
            src = slice(lo - off, hi - off)
            dst = slice(lo, hi)
            summed[:, :, dst] += np.where(valid, score, 0.0)[:, :, src]
            counts[:, :, dst] += valid[:, :, src]
        score = np.where(counts > 0, summed / np.maximum(counts, 1), 0.0)

    any_valid = np.any(valid, axis=2)
    smax = np.max(np.where(valid, score, -np.inf), axis=2)
    smax = np.where(any_valid, smax, 0.0)
    w = np.where(valid, np.exp(beta * (score - smax[:, :, None])), 0.0)
    denom = w.sum(axis=2)
    w /= np.where(any_valid, denom, 1.0)[:, :, None]

    # front-to-back inversion: remaining_i = 1 - sum_{j<i} w_j
    csum = np.cumsum(w, axis=2)
    remaining = 1.0 - (csum - w)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(remaining > 1e-12, w / np.maximum(remaining, 1e-12), 1.0)
    alpha = np.where(w > 0.0, alpha, 0.0)
    alpha = np.clip(alpha, 0.0, 1.0)
    alpha = np.where(any_valid[:, :, None], alpha, 0.0)
    return alpha[..., None]


def alpha_activation(raw: np.ndarray, mode: str = "sigmoid") -> np.ndarray:
    """Map raw network output into [0, 1]."""
    x = np.asarray(raw, dtype=np.float64)
    if mode == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-x))
    elif mode == "reluclamp":
        out = np.clip(x, 0.0, 1.0)
    else:
        raise ValueError(f"unknown activation {mode!r} (want sigmoid or reluclamp)")
    return out.astype(np.float32)


# ---------------------------------------------------------------------------
# network description


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str  # "conv" | "nnup"
    inputs: tuple[str, ...]
    stride: int = 1
    dilation: int = 1
    out_channels: int = 0


@dataclass(frozen=True)
class NetSpec:
    layers: tuple[LayerSpec, ...]

    def __len__(self) -> int:
        return len(self.layers)

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)


def net_spec_table1() -> NetSpec:
    """The fixed 21-layer encoder-decoder graph (three 2x downsamplings,
    a dilated bottleneck, and three nearest-neighbour upsamplings with
    skip concatenations)."""

    def conv(name, inp, s=1, d=1, n=0):
        return LayerSpec(name, "conv", (inp,), stride=s, dilation=d, out_channels=n)

    def nnup(name, a, b):
        return LayerSpec(name, "nnup", (a, b))

    return NetSpec(
        layers=(
            conv("conv1_1", INPUT_NAME, s=1, d=1, n=8),
            conv("conv1_2", "conv1_1", s=2, d=1, n=16),
            conv("conv2_1", "conv1_2", s=1, d=1, n=16),
            conv("conv2_2", "conv2_1", s=2, d=1, n=32),
            conv("conv3_1", "conv2_2", s=1, d=1, n=32),
            conv("conv3_2", "conv3_1", s=1, d=1, n=32),
            conv("conv3_3", "conv3_2", s=2, d=1, n=64),
            conv("conv4_1", "conv3_3", s=1, d=2, n=64),
            conv("conv4_2", "conv4_1", s=1, d=2, n=64),
            conv("conv4_3", "conv4_2", s=1, d=2, n=64),
            nnup("nnup_5", "conv3_3", "conv4_3"),
            conv("conv5_1", "nnup_5", s=1, d=1, n=32),
            conv("conv5_2", "conv5_1", s=1, d=1, n=32),
            conv("conv5_3", "conv5_2", s=1, d=1, n=32),
            nnup("nnup_6", "conv2_2", "conv5_3"),
            conv("conv6_1", "nnup_6", s=1, d=1, n=16),
            conv("conv6_2", "conv6_1", s=1, d=1, n=16),
            nnup("nnup_7", "conv1_2", "conv6_2"),
            conv("conv7_1", "nnup_7", s=1, d=1, n=8),
            conv("conv7_2", "conv7_1", s=1, d=1, n=8),
            conv("conv7_3", "conv7_2", s=1, d=1, n=1),
        )
    )


def shape_check(
    spec: NetSpec, input_shape: tuple[int, int, int, int]
) -> dict[str, tuple[int, int, int, int]]:
    """Propagate (H, W, N, C) through the graph; strides and upsampling act
    on all three spatial dimensions. Raises if H, W or N is not divisible
    by the maximum accumulated stride of 8.
    """
    h, w, n, c = input_shape
    for name, dim in (("H", h), ("W", w), ("N", n)):
        if dim % 8 != 0:
            raise ValueError(
                f"input dimension {name}={dim} must be divisible by 8 "
                f"(maximum accumulated stride)"
            )
    shapes: dict[str, tuple[int, int, int, int]] = {INPUT_NAME: (h, w, n, c)}
    for layer in spec.layers:
        if layer.kind == "conv":
            ih, iw, idepth, ic = shapes[layer.inputs[0]]
            s = layer.stride
            shapes[layer.name] = (ih // s, iw // s, idepth // s, layer.out_channels)
        elif layer.kind == "nnup":
            a = shapes[layer.inputs[0]]
            b = shapes[layer.inputs[1]]
            if a[:3] != b[:3]:
                raise ValueError(
                    f"{layer.name}: concat inputs disagree on spatial shape "
                    f"{a[:3]} vs {b[:3]}"
                )
            shapes[layer.name] = (2 * a[0], 2 * a[1], 2 * a[2], a[3] + b[3])
        else:
            raise ValueError(f"unknown layer kind {layer.kind!r}")
    out = dict(shapes)
    del out[INPUT_NAME]
    return out


# ---------------------------------------------------------------------------
# weights


@dataclass
class WeightStore:
    """kernel (3,3,3,in_ch,out_ch) float32 and bias (out_ch) per conv layer."""

    tensors: dict[str, tuple[np.ndarray, np.ndarray]]

    @classmethod
    def _channel_plan(cls, spec: NetSpec, input_channels: int) -> dict[str, tuple[int, int]]:
        chans = {INPUT_NAME: input_channels}
        plan = {}
        for layer in spec.layers:
            if layer.kind == "conv":
                in_ch = chans[layer.inputs[0]]
                plan[layer.name] = (in_ch, layer.out_channels)
                chans[layer.name] = layer.out_channels
            else:
                chans[layer.name] = chans[layer.inputs[0]] + chans[layer.inputs[1]]
        return plan

    @classmethod
    def random(cls, spec: NetSpec, input_channels: int = 3, seed: int = 0) -> "WeightStore":
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, (in_ch, out_ch) in cls._channel_plan(spec, input_channels).items():
            fan_in = KERNEL**3 * in_ch
            k = rng.normal(0.0, np.sqrt(2.0 / fan_in), (KERNEL, KERNEL, KERNEL, in_ch, out_ch))
            tensors[name] = (k.astype(np.float32), np.zeros(out_ch, dtype=np.float32))
        return cls(tensors)

    @classmethod
    def zeros(cls, spec: NetSpec, input_channels: int = 3) -> "WeightStore":
        tensors = {}
        for name, (in_ch, out_ch) in cls._channel_plan(spec, input_channels).items():
            tensors[name] = (
                np.zeros((KERNEL, KERNEL, KERNEL, in_ch, out_ch), dtype=np.float32),
                np.zeros(out_ch, dtype=np.float32),
            )
        return cls(tensors)

    def save(self, path) -> None:
        # magic, u32 version, u32 layer count; per layer: u32 name length,
        # utf-8 name, 5 x u32 kernel shape, f32 kernel, u32 bias length, f32 bias
        with open(path, "wb") as f:
            f.write(_WEIGHTS_MAGIC)
            f.write(struct.pack("<II", _WEIGHTS_VERSION, len(self.tensors)))
            for name, (kernel, bias) in self.tensors.items():
                encoded = name.encode("utf-8")
                f.write(struct.pack("<I", len(encoded)))
                f.write(encoded)
                f.write(struct.pack("<5I", *kernel.shape))
                f.write(kernel.astype("<f4").tobytes())
                f.write(struct.pack("<I", bias.size))
                f.write(bias.astype("<f4").tobytes())

    @classmethod
    def load(cls, path) -> "WeightStore":
        raw = Path(path).read_bytes()
        if raw[:4] != _WEIGHTS_MAGIC:
            raise ValueError(f"not a weight store: {path}")
        version, count = struct.unpack_from("<II", raw, 4)
        if version != _WEIGHTS_VERSION:
            raise ValueError(f"unsupported weight store version {version}")
        off = 12
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, off)
            off += 4
            name = raw[off : off + name_len].decode("utf-8")
            off += name_len
            shape = struct.unpack_from("<5I", raw, off)
            off += 20
            k_count = int(np.prod(shape))
            kernel = np.frombuffer(raw, dtype="<f4", count=k_count, offset=off).reshape(shape).copy()
            off += 4 * k_count
            (bias_len,) = struct.unpack_from("<I", raw, off)
            off += 4
            bias = np.frombuffer(raw, dtype="<f4", count=bias_len, offset=off).copy()
            off += 4 * bias_len
            tensors[name] = (kernel, bias)
        return cls(tensors)


# ---------------------------------------------------------------------------
# forward pass


def _conv3d(
    x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, stride: int, dilation: int
) -> np.ndarray:
    """3x3x3 convolution with zero padding; stride and dilation apply to all
    three spatial dimensions. Implemented as 27 shifted tensordots."""
    h, w, n, _ = x.shape
    s, d = stride, dilation
    oh, ow, on = h // s, w // s, n // s
    xp = np.pad(x, ((d, d), (d, d), (d, d), (0, 0)))
    out = np.broadcast_to(bias.astype(np.float64), (oh, ow, on, bias.size)).copy()
    for i in range(KERNEL):
        for j in range(KERNEL):
            for k in range(KERNEL):
                sl = xp[
                    i * d : i * d + s * (oh - 1) + 1 : s,
                    j * d : j * d + s * (ow - 1) + 1 : s,
                    k * d : k * d + s * (on - 1) + 1 : s,
                ]
                out += np.tensordot(sl, kernel[i, j, k].astype(np.float64), axes=([3], [0]))
    return out


def forward(
    spec: NetSpec,
    weights: WeightStore,
    volume: np.ndarray,
    activation: str = "sigmoid",
) -> np.ndarray:
    """Run the graph on an (H, W, N, C) volume; returns alpha (H, W, N, 1).

    Hidden convolutions are followed by ReLU; the final conv output goes
    through `alpha_activation`.
    """
    x = np.asarray(volume, dtype=np.float64)
    shape_check(spec, x.shape)
    final = spec.layers[-1].name
    outputs: dict[str, np.ndarray] = {INPUT_NAME: x}
    for layer in spec.layers:
        if layer.kind == "conv":
            kernel, bias = weights.tensors[layer.name]
            src = outputs[layer.inputs[0]]
            if kernel.shape[3] != src.shape[3]:
                raise ValueError(
                    f"{layer.name}: weight expects {kernel.shape[3]} input "
                    f"channels, got {src.shape[3]}"
                )
            if kernel.shape[4] != layer.out_channels:
                raise ValueError(
                    f"{layer.name}: weight produces {kernel.shape[4]} channels, "
                    f"spec says {layer.out_channels}"
                )
            y = _conv3d(src, kernel, bias, layer.stride, layer.dilation)
            if layer.name != final:
                y = np.maximum(y, 0.0)
            outputs[layer.name] = y
        else:
            cat = np.concatenate(
                [outputs[layer.inputs[0]], outputs[layer.inputs[1]]], axis=3
            )
            y = np.repeat(np.repeat(np.repeat(cat, 2, axis=0), 2, axis=1), 2, axis=2)
            outputs[layer.name] = y
    return alpha_activation(outputs[final], mode=activation)
