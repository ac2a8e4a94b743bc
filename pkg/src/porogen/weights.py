"""Portable network weights: layer schema, validation, and the G3DW file
format.

The two network architectures are fixed families: the generator is four
strided transposed convolutions bracketing one stride-1 convolution, the
discriminator a stack of strided convolutions ending in a 1-channel
sigmoid head.  Filter widths follow the ratios (8g, 4g, 2g, g, g, 1) and
(f, 2f, 4f, 8f, 1), so reduced-width variants stay valid.

File format (all integers little-endian):

    magic b"G3DW", version u32 = 1
    d u32, leaky_slope f32, bn_eps f32, component u8, n_layers u32
    per layer:
        kind u8, activation u8, flags u8 (bit0 = batchnorm, bit1 = bias)
        in_channels u32, filters u32, kernel u32, stride u32, padding u32
        weight f32 array, C order
            conv3d:       (filters, in_channels, k, k, k)
            convtransp3d: (in_channels, filters, k, k, k)
        bias f32 (filters,)                     when bit1 set
        gamma, beta, running_mean, running_var  when bit0 set, (filters,) each
    crc32 u32 over every preceding byte

Kind and activation share one code table: conv3d=1, convtransp3d=2,
batchnorm=3 (expressed through the flag bit, never as a layer record),
leakyrelu=4, tanh=5, sigmoid=6.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError, ValidationError

MAGIC = b"G3DW"
VERSION = 1

KIND_CODES = {"conv3d": 1, "convtransp3d": 2}
ACTIVATION_CODES = {"leakyrelu": 4, "tanh": 5, "sigmoid": 6}
COMPONENT_CODES = {"generator": 1, "discriminator": 2}

_KIND_NAMES = {v: k for k, v in KIND_CODES.items()}
_ACTIVATION_NAMES = {v: k for k, v in ACTIVATION_CODES.items()}
_COMPONENT_NAMES = {v: k for k, v in COMPONENT_CODES.items()}

DEFAULT_LATENT_CHANNELS = 512
DEFAULT_BASE_FILTERS = 64
DEFAULT_LEAKY_SLOPE = 0.2
DEFAULT_BN_EPS = 1e-5

# (kind, kernel, stride, padding, batchnorm, activation, filter multiplier);
# multiplier None marks the fixed single-channel head
_GENERATOR_PATTERN = (
    ("convtransp3d", 4, 1, 0, True, "leakyrelu", 8),
    ("convtransp3d", 4, 2, 1, True, "leakyrelu", 4),
    ("convtransp3d", 4, 2, 1, True, "leakyrelu", 2),
    ("convtransp3d", 4, 2, 1, True, "leakyrelu", 1),
    ("conv3d", 3, 1, 1, True, "leakyrelu", 1),
    ("convtransp3d", 4, 2, 1, False, "tanh", None),
)
_DISCRIMINATOR_PATTERN = (
    ("conv3d", 4, 2, 1, False, "leakyrelu", 1),
    ("conv3d", 4, 2, 1, True, "leakyrelu", 2),
    ("conv3d", 4, 2, 1, True, "leakyrelu", 4),
    ("conv3d", 4, 2, 1, True, "leakyrelu", 8),
    ("conv3d", 4, 1, 0, False, "sigmoid", None),
)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    activation: str
    in_channels: int
    filters: int
    kernel: int
    stride: int
    padding: int
    has_batchnorm: bool
    has_bias: bool

    def __post_init__(self):
        if self.kind not in KIND_CODES:
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATION_CODES:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if min(self.in_channels, self.filters, self.kernel, self.stride) < 1:
            raise ValidationError("layer dimensions must be positive")
        if self.padding < 0:
            raise ValidationError("padding cannot be negative")
        if self.has_bias == self.has_batchnorm:
            raise ValidationError(
                "exactly one of bias or batchnorm per layer: "
                "batchnorm absorbs additive terms"
            )

    @property
    def weight_shape(self):
        k = self.kernel
        if self.kind == "conv3d":
            return (self.filters, self.in_channels, k, k, k)
        return (self.in_channels, self.filters, k, k, k)


@dataclass(frozen=True, eq=False)
class LayerParams:
    weight: np.ndarray
    bias: np.ndarray | None = None
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class NetworkWeights:
    """Validated, immutable parameter set for one network component."""

    component: str
    d: int
    leaky_slope: float
    bn_eps: float
    specs: tuple
    params: tuple

    def __post_init__(self):
        if self.component not in COMPONENT_CODES:
            raise ValidationError(f"component must be generator|discriminator, got {self.component!r}")
        if len(self.specs) != len(self.params):
            raise ShapeError("one parameter block per layer spec required")
        _validate_architecture(self.component, self.d, self.specs)
        for i, (spec, p) in enumerate(zip(self.specs, self.params)):
            _validate_params(i, spec, p)
        object.__setattr__(self, "specs", tuple(self.specs))
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def n_layers(self) -> int:
        return len(self.specs)


def _validate_architecture(component, d, specs):
    pattern = _GENERATOR_PATTERN if component == "generator" else _DISCRIMINATOR_PATTERN
    if len(specs) != len(pattern):
        raise ValidationError(
            f"{component} must have {len(pattern)} layers, got {len(specs)}"
        )
    base = specs[0].filters if component == "discriminator" else specs[3].filters
    if base < 1:
        raise ValidationError("base filter count must be at least 1")
    for i, (spec, row) in enumerate(zip(specs, pattern)):
        kind, kernel, stride, padding, bn, act, mult = row
        expect_filters = 1 if mult is None else mult * base
        got = (
            spec.kind, spec.kernel, spec.stride, spec.padding,
            spec.has_batchnorm, spec.activation, spec.filters,
        )
        want = (kind, kernel, stride, padding, bn, act, expect_filters)
        if got != want:
            raise ValidationError(
                f"{component} layer {i + 1} deviates from the fixed "
                f"architecture: got {got}, expected {want}"
            )
    first_in = d if component == "generator" else 1
    if specs[0].in_channels != first_in:
        raise ValidationError(
            f"{component} first layer expects {first_in} input channels, "
            f"got {specs[0].in_channels}"
        )
    for i in range(1, len(specs)):
        if specs[i].in_channels != specs[i - 1].filters:
            raise ValidationError(
                f"channel chain broken between layers {i} and {i + 1}: "
                f"{specs[i - 1].filters} -> {specs[i].in_channels}"
            )


def _validate_params(index, spec, p):
    def check(name, arr, shape):
        if arr is None:
            raise ValidationError(f"layer {index + 1} lacks {name}")
        if arr.shape != shape:
            raise ShapeError(
                f"layer {index + 1} {name} has shape {arr.shape}, expected {shape}"
            )
        if arr.dtype != np.float32:
            raise ValidationError(f"layer {index + 1} {name} must be float32")

    check("weight", p.weight, spec.weight_shape)
    per_channel = (spec.filters,)
    if spec.has_bias:
        check("bias", p.bias, per_channel)
    elif p.bias is not None:
        raise ValidationError(f"layer {index + 1} carries an unexpected bias")
    if spec.has_batchnorm:
        for name in ("gamma", "beta", "running_mean", "running_var"):
            check(name, getattr(p, name), per_channel)
    else:
        for name in ("gamma", "beta", "running_mean", "running_var"):
            if getattr(p, name) is not None:
                raise ValidationError(
                    f"layer {index + 1} carries unexpected batchnorm arrays"
                )


def generator_layer_specs(d=DEFAULT_LATENT_CHANNELS, base_filters=DEFAULT_BASE_FILTERS):
    specs = []
    in_ch = d
    for kind, kernel, stride, padding, bn, act, mult in _GENERATOR_PATTERN:
        filters = 1 if mult is None else mult * base_filters
        specs.append(
            LayerSpec(kind, act, in_ch, filters, kernel, stride, padding, bn, not bn)
        )
        in_ch = filters
    return specs


def discriminator_layer_specs(base_filters=DEFAULT_BASE_FILTERS):
    specs = []
    in_ch = 1
    for kind, kernel, stride, padding, bn, act, mult in _DISCRIMINATOR_PATTERN:
        filters = 1 if mult is None else mult * base_filters
        specs.append(
            LayerSpec(kind, act, in_ch, filters, kernel, stride, padding, bn, not bn)
        )
        in_ch = filters
    return specs


def random_weights(
    component,
    seed=0,
    d=DEFAULT_LATENT_CHANNELS,
    base_filters=DEFAULT_BASE_FILTERS,
    leaky_slope=DEFAULT_LEAKY_SLOPE,
    bn_eps=DEFAULT_BN_EPS,
) -> NetworkWeights:
    """Freshly initialized weights: N(0, 0.02) kernels, unit batchnorm."""
    if component == "generator":
        specs = generator_layer_specs(d, base_filters)
    elif component == "discriminator":
        specs = discriminator_layer_specs(base_filters)
    else:
        raise ValidationError(f"component must be generator|discriminator, got {component!r}")
    rng = np.random.Generator(np.random.PCG64(seed))
    params = []
    for spec in specs:
        weight = rng.normal(0.0, 0.02, size=spec.weight_shape).astype(np.float32)
        fields = {"weight": weight}
        if spec.has_bias:
            fields["bias"] = np.zeros(spec.filters, dtype=np.float32)
        if spec.has_batchnorm:
            fields["gamma"] = rng.normal(1.0, 0.02, size=spec.filters).astype(np.float32)
            fields["beta"] = np.zeros(spec.filters, dtype=np.float32)
            fields["running_mean"] = np.zeros(spec.filters, dtype=np.float32)
            fields["running_var"] = np.ones(spec.filters, dtype=np.float32)
        params.append(LayerParams(**fields))
    return NetworkWeights(component, d, leaky_slope, bn_eps, tuple(specs), tuple(params))


def parameter_count(w: NetworkWeights) -> int:
    """Number of trainable scalars (kernels, biases, batchnorm gamma/beta)."""
    total = 0
    for spec, p in zip(w.specs, w.params):
        total += p.weight.size
        if spec.has_bias:
            total += p.bias.size
        if spec.has_batchnorm:
            total += p.gamma.size + p.beta.size
    return total


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def _pack_array(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def weights_to_bytes(w: NetworkWeights) -> bytes:
    chunks = [
        MAGIC,
        struct.pack("<II", VERSION, w.d),
        struct.pack("<ff", w.leaky_slope, w.bn_eps),
        struct.pack("<BI", COMPONENT_CODES[w.component], w.n_layers),
    ]
    for spec, p in zip(w.specs, w.params):
        flags = (1 if spec.has_batchnorm else 0) | (2 if spec.has_bias else 0)
        chunks.append(
            struct.pack(
                "<BBBIIIII",
                KIND_CODES[spec.kind],
                ACTIVATION_CODES[spec.activation],
                flags,
                spec.in_channels,
                spec.filters,
                spec.kernel,
                spec.stride,
                spec.padding,
            )
        )
        chunks.append(_pack_array(p.weight))
        if spec.has_bias:
            chunks.append(_pack_array(p.bias))
        if spec.has_batchnorm:
            for name in ("gamma", "beta", "running_mean", "running_var"):
                chunks.append(_pack_array(getattr(p, name)))
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def save_weights(w: NetworkWeights, path) -> None:
    with open(path, "wb") as fh:
        fh.write(weights_to_bytes(w))


class _Reader:
    def __init__(self, buf, path):
        self.buf = buf
        self.path = path
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.path}: truncated weights file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, shape):
        n = int(np.prod(shape))
        raw = self.take(4 * n)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def weights_from_bytes(buf: bytes, path="<bytes>") -> NetworkWeights:
    if len(buf) < len(MAGIC) + 4:
        raise FormatError(f"{path}: too short to be a weights file")
    if buf[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic {buf[:4]!r}")
    stored_crc = struct.unpack("<I", buf[-4:])[0]
    body = buf[:-4]
    if zlib.crc32(body) != stored_crc:
        raise FormatError(f"{path}: checksum mismatch, file corrupt")
    r = _Reader(body, path)
    r.take(len(MAGIC))
    version, d = r.unpack("<II")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    leaky_slope, bn_eps = r.unpack("<ff")
    component_code, n_layers = r.unpack("<BI")
    if component_code not in _COMPONENT_NAMES:
        raise FormatError(f"{path}: unknown component code {component_code}")
    specs, params = [], []
    for _ in range(n_layers):
        kind_code, act_code, flags, in_ch, filters, kernel, stride, padding = r.unpack(
            "<BBBIIIII"
        )
        if kind_code not in _KIND_NAMES:
            raise FormatError(f"{path}: unknown layer kind code {kind_code}")
        if act_code not in _ACTIVATION_NAMES:
            raise FormatError(f"{path}: unknown activation code {act_code}")
        if flags & ~3:
            raise FormatError(f"{path}: unknown layer flags {flags:#x}")
        spec = LayerSpec(
            kind=_KIND_NAMES[kind_code],
            activation=_ACTIVATION_NAMES[act_code],
            in_channels=in_ch,
            filters=filters,
            kernel=kernel,
            stride=stride,
            padding=padding,
            has_batchnorm=bool(flags & 1),
            has_bias=bool(flags & 2),
        )
        fields = {"weight": r.array(spec.weight_shape)}
        if spec.has_bias:
            fields["bias"] = r.array((filters,))
        if spec.has_batchnorm:
            for name in ("gamma", "beta", "running_mean", "running_var"):
                fields[name] = r.array((filters,))
        specs.append(spec)
        params.append(LayerParams(**fields))
    if r.pos != len(body):
        raise FormatError(f"{path}: {len(body) - r.pos} unexpected trailing bytes")
    return NetworkWeights(
        _COMPONENT_NAMES[component_code], d, leaky_slope, bn_eps,
        tuple(specs), tuple(params),
    )


def load_weights(path) -> NetworkWeights:
    with open(path, "rb") as fh:
        buf = fh.read()
    return weights_from_bytes(buf, path=str(path))
