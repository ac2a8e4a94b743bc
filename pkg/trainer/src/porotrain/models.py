"""Torch modules for the two fixed network families.

The generator upsamples a latent tensor (B, d, m, n, o) to gray volumes
in [-1, 1] with edge 16m + 48 along each cubic latent axis; the
discriminator maps a 64-cube in [-1, 1] to a realness probability.
Filter widths scale as (8g, 4g, 2g, g, g, 1) and (f, 2f, 4f, 8f, 1), so
reduced-width variants built here stay loadable by the inference engine.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import DEFAULT_BASE_FILTERS, DEFAULT_LATENT_CHANNELS
from .errors import ExportError, ValidationError
from .g3dw import LayerRecord, WeightsFile, read_weights_file, write_weights_file

LEAKY_SLOPE = 0.2
BN_EPS = 1e-5

# (kind, kernel, stride, padding, batchnorm, activation, width multiplier);
# multiplier None marks the fixed single-channel head
_GENERATOR_PLAN = (
    ("convtransp3d", 4, 1, 0, True, "leakyrelu", 8),
    ("convtransp3d", 4, 2, 1, True, "leakyrelu", 4),
    ("convtransp3d", 4, 2, 1, True, "leakyrelu", 2),
    ("convtransp3d", 4, 2, 1, True, "leakyrelu", 1),
    ("conv3d", 3, 1, 1, True, "leakyrelu", 1),
    ("convtransp3d", 4, 2, 1, False, "tanh", None),
)
_DISCRIMINATOR_PLAN = (
    ("conv3d", 4, 2, 1, False, "leakyrelu", 1),
    ("conv3d", 4, 2, 1, True, "leakyrelu", 2),
    ("conv3d", 4, 2, 1, True, "leakyrelu", 4),
    ("conv3d", 4, 2, 1, True, "leakyrelu", 8),
    ("conv3d", 4, 1, 0, False, "sigmoid", None),
)


def _build_layers(plan, first_in, base, leaky_slope, bn_eps):
    convs, norms = [], []
    in_ch = first_in
    for kind, kernel, stride, padding, has_bn, _act, mult in plan:
        out_ch = 1 if mult is None else mult * base
        conv_cls = nn.ConvTranspose3d if kind == "convtransp3d" else nn.Conv3d
        convs.append(conv_cls(in_ch, out_ch, kernel, stride, padding, bias=not has_bn))
        norms.append(nn.BatchNorm3d(out_ch, eps=bn_eps) if has_bn else nn.Identity())
        in_ch = out_ch
    return nn.ModuleList(convs), nn.ModuleList(norms)


class _FixedFamily(nn.Module):
    """Shared plumbing: plan-driven layer stack with a tracked activation tail."""

    plan: tuple
    component: str

    def __init__(self, first_in, base, leaky_slope, bn_eps):
        super().__init__()
        if base < 1:
            raise ValidationError(f"base filter count must be positive, got {base}")
        self.base = int(base)
        self.leaky_slope = float(leaky_slope)
        self.bn_eps = float(bn_eps)
        self.convs, self.norms = _build_layers(
            self.plan, first_in, self.base, leaky_slope, bn_eps
        )

    def _activate(self, x, name):
        if name == "leakyrelu":
            return nn.functional.leaky_relu(x, self.leaky_slope)
        if name == "tanh":
            return torch.tanh(x)
        return torch.sigmoid(x)

    def _run(self, x, skip_last_activation=False):
        last = len(self.convs) - 1
        for i, (row, conv, norm) in enumerate(zip(self.plan, self.convs, self.norms)):
            x = norm(conv(x))
            if skip_last_activation and i == last:
                return x
            x = self._activate(x, row[5])
        return x


class Generator(_FixedFamily):
    plan = _GENERATOR_PLAN
    component = "generator"

    def __init__(self, d=DEFAULT_LATENT_CHANNELS, ngf=DEFAULT_BASE_FILTERS,
                 leaky_slope=LEAKY_SLOPE, bn_eps=BN_EPS):
        if d < 1:
            raise ValidationError(f"latent channel count must be positive, got {d}")
        self.d = int(d)
        super().__init__(self.d, ngf, leaky_slope, bn_eps)

    def forward(self, z):
        return self._run(z)


class Discriminator(_FixedFamily):
    plan = _DISCRIMINATOR_PLAN
    component = "discriminator"

    def __init__(self, ndf=DEFAULT_BASE_FILTERS,
                 leaky_slope=LEAKY_SLOPE, bn_eps=BN_EPS):
        super().__init__(1, ndf, leaky_slope, bn_eps)

    def forward_logits(self, x):
        """Pre-sigmoid head output, the numerically safe target for BCE."""
        return self._run(x, skip_last_activation=True)

    def forward(self, x):
        return torch.sigmoid(self.forward_logits(x))


def init_weights(model: nn.Module, seed=0) -> None:
    """Reset parameters in place: kernels N(0, 0.02), batchnorm gain
    N(1, 0.02), additive terms zero, fresh running statistics."""
    g = torch.Generator().manual_seed(int(seed))
    with torch.no_grad():
        for module in model.modules():
            if isinstance(module, (nn.Conv3d, nn.ConvTranspose3d)):
                module.weight.normal_(0.0, 0.02, generator=g)
                if module.bias is not None:
                    module.bias.zero_()
            elif isinstance(module, nn.BatchNorm3d):
                module.weight.normal_(1.0, 0.02, generator=g)
                module.bias.zero_()
                module.running_mean.zero_()
                module.running_var.fill_(1.0)
                module.num_batches_tracked.zero_()


def _check(condition, layer_index, detail):
    if not condition:
        raise ExportError(
            f"layer {layer_index + 1} deviates from the fixed family: {detail}"
        )


def _plan_layers(model):
    """Yield validated (plan row, conv, norm) triples or raise ExportError."""
    if not isinstance(model, (Generator, Discriminator)):
        raise ExportError(
            f"only the fixed Generator/Discriminator families export, "
            f"got {type(model).__name__}"
        )
    plan = model.plan
    if len(model.convs) != len(plan) or len(model.norms) != len(plan):
        raise ExportError(
            f"{model.component} must have {len(plan)} layers, got {len(model.convs)}"
        )
    in_ch = model.d if isinstance(model, Generator) else 1
    for i, (row, conv, norm) in enumerate(zip(plan, model.convs, model.norms)):
        kind, kernel, stride, padding, has_bn, _act, mult = row
        conv_cls = nn.ConvTranspose3d if kind == "convtransp3d" else nn.Conv3d
        _check(type(conv) is conv_cls, i, f"expected {kind}")
        out_ch = 1 if mult is None else mult * model.base
        _check(conv.in_channels == in_ch, i,
               f"expects {in_ch} input channels, found {conv.in_channels}")
        _check(conv.out_channels == out_ch, i,
               f"expects {out_ch} filters, found {conv.out_channels}")
        geometry = (conv.kernel_size, conv.stride, conv.padding)
        expected = ((kernel,) * 3, (stride,) * 3, (padding,) * 3)
        _check(geometry == expected, i,
               f"geometry {geometry} differs from {expected}")
        _check((conv.bias is not None) == (not has_bn), i,
               "bias and batchnorm are mutually exclusive")
        if has_bn:
            _check(type(norm) is nn.BatchNorm3d and norm.num_features == out_ch,
                   i, "missing or mismatched batchnorm")
        else:
            _check(type(norm) is nn.Identity, i, "unexpected normalization")
        in_ch = out_ch
        yield row, conv, norm


def weights_file_from_model(model, latent_channels=None) -> WeightsFile:
    """Snapshot a model as a portable weights description.

    `latent_channels` fills the header d field for discriminators, which
    carry no latent themselves; it defaults to the generator's d or 512.
    """
    layers = []
    for row, conv, norm in _plan_layers(model):
        kind, kernel, stride, padding, has_bn, act, _mult = row
        fields = {"weight": conv.weight.detach().cpu().numpy()}
        if conv.bias is not None:
            fields["bias"] = conv.bias.detach().cpu().numpy()
        if has_bn:
            fields["gamma"] = norm.weight.detach().cpu().numpy()
            fields["beta"] = norm.bias.detach().cpu().numpy()
            fields["running_mean"] = norm.running_mean.detach().cpu().numpy()
            fields["running_var"] = norm.running_var.detach().cpu().numpy()
        layers.append(
            LayerRecord(
                kind=kind,
                activation=act,
                in_channels=conv.in_channels,
                filters=conv.out_channels,
                kernel=kernel,
                stride=stride,
                padding=padding,
                has_batchnorm=has_bn,
                has_bias=conv.bias is not None,
                **fields,
            )
        )
    if isinstance(model, Generator):
        d = model.d
        if latent_channels is not None and int(latent_channels) != d:
            raise ExportError(
                f"latent_channels {latent_channels} contradicts the generator d={d}"
            )
    else:
        d = DEFAULT_LATENT_CHANNELS if latent_channels is None else int(latent_channels)
        if d < 1:
            raise ExportError(f"latent_channels must be positive, got {latent_channels}")
    return WeightsFile(
        component=model.component,
        d=d,
        leaky_slope=model.leaky_slope,
        bn_eps=model.bn_eps,
        layers=tuple(layers),
    )


def export_weights(model, path, latent_channels=None) -> None:
    """Write a model's parameters as a G3DW file the inference engine loads.

    The module structure is checked against the fixed family first;
    any deviation raises ExportError before bytes hit the disk.
    """
    write_weights_file(weights_file_from_model(model, latent_channels), path)


def _copy_into(model, wf: WeightsFile) -> None:
    with torch.no_grad():
        for (row, conv, norm), record in zip(_plan_layers(model), wf.layers):
            conv.weight.copy_(torch.from_numpy(record.weight))
            if record.has_bias:
                conv.bias.copy_(torch.from_numpy(record.bias))
            if record.has_batchnorm:
                norm.weight.copy_(torch.from_numpy(record.gamma))
                norm.bias.copy_(torch.from_numpy(record.beta))
                norm.running_mean.copy_(torch.from_numpy(record.running_mean))
                norm.running_var.copy_(torch.from_numpy(record.running_var))


def model_from_weights_file(wf: WeightsFile):
    """Rebuild a torch model from a parsed weights file, in eval mode."""
    if wf.component == "generator":
        base = wf.layers[3].filters if len(wf.layers) > 3 else 0
        if base < 1:
            raise ValidationError("generator file lacks the base-width layer")
        model = Generator(wf.d, base, leaky_slope=wf.leaky_slope, bn_eps=wf.bn_eps)
    else:
        base = wf.layers[0].filters
        model = Discriminator(base, leaky_slope=wf.leaky_slope, bn_eps=wf.bn_eps)
    expected = [
        (row[0], conv.in_channels, conv.out_channels,
         row[1], row[2], row[3], row[4], row[5])
        for row, conv, _ in _plan_layers(model)
    ]
    found = [
        (rec.kind, rec.in_channels, rec.filters, rec.kernel, rec.stride,
         rec.padding, rec.has_batchnorm, rec.activation)
        for rec in wf.layers
    ]
    if expected != found:
        raise ValidationError(
            f"{wf.component} layers {found} do not form the fixed family {expected}"
        )
    _copy_into(model, wf)
    return model.eval()


def load_model(path):
    """Read a G3DW file into a ready-to-run torch model."""
    return model_from_weights_file(read_weights_file(path))
