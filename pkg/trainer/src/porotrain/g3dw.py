"""Portable G3DW weights files: an independent reader and writer.

Byte layout, little-endian throughout:

    magic b"G3DW", version u32 = 1
    d u32, leaky_slope f32, bn_eps f32, component u8, n_layers u32
    one record per layer:
        kind u8, activation u8, flags u8 (bit 0 batchnorm, bit 1 bias)
        in_channels u32, filters u32, kernel u32, stride u32, padding u32
        weight as f32, C order:
            conv3d        (filters, in_channels, k, k, k)
            convtransp3d  (in_channels, filters, k, k, k)
        bias (filters,) f32 when the bias flag is set
        gamma, beta, running_mean, running_var, (filters,) f32 each,
            when the batchnorm flag is set
    crc32 u32 over every preceding byte

Codes: conv3d 1, convtransp3d 2; leakyrelu 4, tanh 5, sigmoid 6;
generator 1, discriminator 2.  Every layer carries exactly one of bias
or batchnorm, since batchnorm absorbs additive terms.

File writes go through a temp file in the target directory followed by
a rename, so a half-written checkpoint can never shadow a good one.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError, ValidationError

MAGIC = b"G3DW"
VERSION = 1

KIND_CODES = {"conv3d": 1, "convtransp3d": 2}
ACTIVATION_CODES = {"leakyrelu": 4, "tanh": 5, "sigmoid": 6}
COMPONENT_CODES = {"generator": 1, "discriminator": 2}

_KINDS = {code: name for name, code in KIND_CODES.items()}
_ACTIVATIONS = {code: name for name, code in ACTIVATION_CODES.items()}
_COMPONENTS = {code: name for name, code in COMPONENT_CODES.items()}

_HEADER = struct.Struct("<IIffBI")
_LAYER_HEAD = struct.Struct("<BBBIIIII")


# No finiteness check: a diagnostic checkpoint written after divergence
# legitimately carries non-finite values.
def _f32(value):
    return np.ascontiguousarray(value, dtype="<f4")


@dataclass(frozen=True, eq=False)
class LayerRecord:
    """One serialized layer: geometry plus parameter arrays."""

    kind: str
    activation: str
    in_channels: int
    filters: int
    kernel: int
    stride: int
    padding: int
    has_batchnorm: bool
    has_bias: bool
    weight: np.ndarray
    bias: np.ndarray | None = None
    gamma: np.ndarray | None = None
    beta: np.ndarray | None = None
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None

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
            raise ValidationError("each layer needs exactly one of bias or batchnorm")
        object.__setattr__(self, "weight", _f32(self.weight))
        if self.weight.shape != self.weight_shape:
            raise ShapeError(
                f"{self.kind} weight has shape {self.weight.shape}, "
                f"expected {self.weight_shape}"
            )
        per_channel = (self.filters,)
        vector_names = ("bias",) if self.has_bias else ()
        if self.has_batchnorm:
            vector_names = ("gamma", "beta", "running_mean", "running_var")
        for name in ("bias", "gamma", "beta", "running_mean", "running_var"):
            value = getattr(self, name)
            if name not in vector_names:
                if value is not None:
                    raise ValidationError(f"layer carries an unexpected {name} array")
                continue
            if value is None:
                raise ValidationError(f"layer lacks its {name} array")
            arr = _f32(value)
            if arr.shape != per_channel:
                raise ShapeError(f"{name} has shape {arr.shape}, expected {per_channel}")
            object.__setattr__(self, name, arr)

    @property
    def weight_shape(self):
        k = self.kernel
        if self.kind == "conv3d":
            return (self.filters, self.in_channels, k, k, k)
        return (self.in_channels, self.filters, k, k, k)

    @property
    def vectors(self):
        """Per-channel arrays in serialization order."""
        if self.has_bias:
            return (self.bias,)
        return (self.gamma, self.beta, self.running_mean, self.running_var)


@dataclass(frozen=True, eq=False)
class WeightsFile:
    """Full content of one G3DW file."""

    component: str
    d: int
    leaky_slope: float
    bn_eps: float
    layers: tuple

    def __post_init__(self):
        if self.component not in COMPONENT_CODES:
            raise ValidationError(
                f"component must be generator|discriminator, got {self.component!r}"
            )
        if self.d < 1:
            raise ValidationError(f"latent channel count must be positive, got {self.d}")
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("a weights file needs at least one layer")
        for layer in layers:
            if not isinstance(layer, LayerRecord):
                raise ValidationError("layers must be LayerRecord instances")
        object.__setattr__(self, "layers", layers)

    @property
    def n_parameters(self) -> int:
        """Trainable scalars: kernels, biases, batchnorm gains and shifts."""
        total = 0
        for layer in self.layers:
            total += layer.weight.size
            if layer.has_bias:
                total += layer.bias.size
            else:
                total += layer.gamma.size + layer.beta.size
        return total


def weights_bytes(wf: WeightsFile) -> bytes:
    out = bytearray(MAGIC)
    out += _HEADER.pack(
        VERSION, wf.d, wf.leaky_slope, wf.bn_eps,
        COMPONENT_CODES[wf.component], len(wf.layers),
    )
    for layer in wf.layers:
        flags = (1 if layer.has_batchnorm else 0) | (2 if layer.has_bias else 0)
        out += _LAYER_HEAD.pack(
            KIND_CODES[layer.kind],
            ACTIVATION_CODES[layer.activation],
            flags,
            layer.in_channels,
            layer.filters,
            layer.kernel,
            layer.stride,
            layer.padding,
        )
        out += layer.weight.tobytes()
        for vec in layer.vectors:
            out += vec.tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def write_weights_file(wf: WeightsFile, path) -> None:
    """Serialize and atomically replace `path`."""
    path = str(path)
    payload = weights_bytes(wf)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".g3dw.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Cursor:
    def __init__(self, buf, name):
        self.buf = buf
        self.name = name
        self.pos = 0

    def take(self, n):
        end = self.pos + n
        if end > len(self.buf):
            raise FormatError(f"{self.name}: truncated weights file")
        chunk = self.buf[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, spec):
        return spec.unpack(self.take(spec.size))

    def array(self, shape):
        count = int(np.prod(shape))
        return np.frombuffer(self.take(4 * count), dtype="<f4").reshape(shape).copy()


def weights_from_bytes(buf: bytes, name="<bytes>") -> WeightsFile:
    if len(buf) < len(MAGIC) + 4:
        raise FormatError(f"{name}: too short to be a weights file")
    if buf[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{name}: bad magic {bytes(buf[:4])!r}")
    body, crc_bytes = buf[:-4], buf[-4:]
    if zlib.crc32(body) != struct.unpack("<I", crc_bytes)[0]:
        raise FormatError(f"{name}: checksum mismatch, file corrupt")
    cur = _Cursor(body, name)
    cur.take(len(MAGIC))
    version, d, leaky_slope, bn_eps, component_code, n_layers = cur.unpack(_HEADER)
    if version != VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    if component_code not in _COMPONENTS:
        raise FormatError(f"{name}: unknown component code {component_code}")
    layers = []
    for _ in range(n_layers):
        kind_code, act_code, flags, in_ch, filters, kernel, stride, padding = (
            cur.unpack(_LAYER_HEAD)
        )
        if kind_code not in _KINDS:
            raise FormatError(f"{name}: unknown layer kind code {kind_code}")
        if act_code not in _ACTIVATIONS:
            raise FormatError(f"{name}: unknown activation code {act_code}")
        if flags & ~3:
            raise FormatError(f"{name}: unknown layer flags {flags:#x}")
        has_batchnorm = bool(flags & 1)
        has_bias = bool(flags & 2)
        kind = _KINDS[kind_code]
        k = kernel
        if kind == "conv3d":
            weight_shape = (filters, in_ch, k, k, k)
        else:
            weight_shape = (in_ch, filters, k, k, k)
        fields = {"weight": cur.array(weight_shape)}
        if has_bias:
            fields["bias"] = cur.array((filters,))
        if has_batchnorm:
            for field in ("gamma", "beta", "running_mean", "running_var"):
                fields[field] = cur.array((filters,))
        try:
            layers.append(
                LayerRecord(
                    kind=kind,
                    activation=_ACTIVATIONS[act_code],
                    in_channels=in_ch,
                    filters=filters,
                    kernel=kernel,
                    stride=stride,
                    padding=padding,
                    has_batchnorm=has_batchnorm,
                    has_bias=has_bias,
                    **fields,
                )
            )
        except ValidationError as exc:
            raise FormatError(f"{name}: invalid layer record: {exc}") from exc
    if cur.pos != len(body):
        raise FormatError(f"{name}: {len(body) - cur.pos} unexpected trailing bytes")
    return WeightsFile(
        component=_COMPONENTS[component_code],
        d=d,
        leaky_slope=leaky_slope,
        bn_eps=bn_eps,
        layers=tuple(layers),
    )


def read_weights_file(path) -> WeightsFile:
    with open(path, "rb") as fh:
        buf = fh.read()
    return weights_from_bytes(buf, name=str(path))
