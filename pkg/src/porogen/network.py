"""Forward inference for the generator and discriminator networks.

Tensors are plain numpy arrays shaped (channels, depth, height, width).
Convolutions are evaluated as a fixed-order loop over kernel offsets, each
offset one matrix product over channels; this is algebraically the
unrolled matrix-vector product, runs in bounded memory for large volumes,
and keeps reduction order deterministic.  Arithmetic defaults to float32,
matching the stored parameters; pass dtype=np.float64 when comparing
against high-precision oracles.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError, ValidationError
from .volume import DEFAULT_VOXEL_SIZE, GrayImage3D
from .weights import NetworkWeights

DISCRIMINATOR_TILE = 64


def conv3d_output_edge(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose3d_output_edge(size, kernel, stride, padding):
    return (size - 1) * stride - 2 * padding + kernel


def _check_input(x, kernels, expect_ndim=5):
    if x.ndim != 4:
        raise ShapeError(f"input must be (channels, d, h, w), got shape {x.shape}")
    if kernels.ndim != expect_ndim:
        raise ShapeError(f"kernels must be 5D, got shape {kernels.shape}")
    k = kernels.shape[2]
    if kernels.shape[2:] != (k, k, k):
        raise ShapeError(f"kernels must be cubic, got {kernels.shape[2:]}")
    return k


def conv3d(x, kernels, stride=1, padding=0, bias=None, dtype=np.float32):
    """Strided 3D cross-correlation; kernels shaped (out_ch, in_ch, k, k, k).

    Output edge per dim: (s + 2 padding - k) // stride + 1.  Equals the
    unrolled matrix product W x with W assembled row-per-output-voxel.
    """
    x = np.asarray(x, dtype=dtype)
    kernels = np.asarray(kernels, dtype=dtype)
    k = _check_input(x, kernels)
    out_ch, in_ch = kernels.shape[:2]
    if x.shape[0] != in_ch:
        raise ShapeError(
            f"input has {x.shape[0]} channels, kernels expect {in_ch}"
        )
    if any(s + 2 * padding < k for s in x.shape[1:]):
        raise ShapeError(
            f"spatial dims {x.shape[1:]} smaller than kernel {k} after padding {padding}"
        )
    out_sp = tuple(conv3d_output_edge(s, k, stride, padding) for s in x.shape[1:])
    if padding:
        pad = ((0, 0),) + ((padding, padding),) * 3
        x = np.pad(x, pad)
    out = np.zeros((out_ch,) + out_sp, dtype=dtype)
    for kz in range(k):
        for ky in range(k):
            for kx in range(k):
                sl = x[
                    :,
                    kz : kz + out_sp[0] * stride : stride,
                    ky : ky + out_sp[1] * stride : stride,
                    kx : kx + out_sp[2] * stride : stride,
                ]
                out += np.tensordot(kernels[:, :, kz, ky, kx], sl, axes=(1, 0))
    if bias is not None:
        out += np.asarray(bias, dtype=dtype)[:, None, None, None]
    return out


def conv_transpose3d(x, kernels, stride=1, padding=0, bias=None, dtype=np.float32):
    """Transposed 3D convolution; kernels shaped (in_ch, out_ch, k, k, k).

    Output edge per dim: (s - 1) stride - 2 padding + k.  Computes W^T y of
    the matching forward convolution by scattering each kernel offset into
    a strided output slice, so no zero-stuffed intermediate is built.
    """
    x = np.asarray(x, dtype=dtype)
    kernels = np.asarray(kernels, dtype=dtype)
    k = _check_input(x, kernels)
    in_ch, out_ch = kernels.shape[:2]
    if x.shape[0] != in_ch:
        raise ShapeError(
            f"input has {x.shape[0]} channels, kernels expect {in_ch}"
        )
    out_sp = tuple(
        conv_transpose3d_output_edge(s, k, stride, padding) for s in x.shape[1:]
    )
    if any(s < 1 for s in out_sp):
        raise ShapeError(
            f"output shape {out_sp} collapses; input {x.shape[1:]} too small"
        )
    out = np.zeros((out_ch,) + out_sp, dtype=dtype)
    in_sp = x.shape[1:]

    def axis_range(off, n_in, n_out):
        # input indices i with 0 <= i*stride + off - padding < n_out
        lo = max(0, -(-(padding - off) // stride))
        hi = min(n_in - 1, (n_out - 1 - off + padding) // stride)
        return lo, hi

    for kz in range(k):
        lz, hz = axis_range(kz, in_sp[0], out_sp[0])
        if lz > hz:
            continue
        for ky in range(k):
            ly, hy = axis_range(ky, in_sp[1], out_sp[1])
            if ly > hy:
                continue
            for kx in range(k):
                lx, hx = axis_range(kx, in_sp[2], out_sp[2])
                if lx > hx:
                    continue
                block = x[:, lz : hz + 1, ly : hy + 1, lx : hx + 1]
                prod = np.tensordot(
                    kernels[:, :, kz, ky, kx], block, axes=(0, 0)
                )
                z0 = lz * stride + kz - padding
                y0 = ly * stride + ky - padding
                x0 = lx * stride + kx - padding
                out[
                    :,
                    z0 : z0 + (hz - lz) * stride + 1 : stride,
                    y0 : y0 + (hy - ly) * stride + 1 : stride,
                    x0 : x0 + (hx - lx) * stride + 1 : stride,
                ] += prod
    if bias is not None:
        out += np.asarray(bias, dtype=dtype)[:, None, None, None]
    return out


def batchnorm_infer(x, gamma, beta, mean, var, eps):
    """Per-channel affine normalization with stored running statistics."""
    x = np.asarray(x)
    gamma, beta, mean, var = (
        np.asarray(a, dtype=x.dtype) for a in (gamma, beta, mean, var)
    )
    for name, arr in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        if arr.shape != (x.shape[0],):
            raise ShapeError(
                f"{name} has shape {arr.shape}, expected ({x.shape[0]},)"
            )
    denom = var + x.dtype.type(eps)
    if denom.min() <= 0:
        raise NumericError("var + eps must be positive for every channel")
    scale = gamma / np.sqrt(denom)
    shift = beta - mean * scale
    return x * scale[:, None, None, None] + shift[:, None, None, None]


def leaky_relu(x, slope=0.2):
    x = np.asarray(x)
    return np.where(x >= 0, x, x.dtype.type(slope) * x)


def tanh(x):
    return np.tanh(x)


def sigmoid(x):
    x = np.asarray(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACTIVATIONS = {
    "leakyrelu": lambda x, slope: leaky_relu(x, slope),
    "tanh": lambda x, slope: tanh(x),
    "sigmoid": lambda x, slope: sigmoid(x),
}


def sample_noise(d, m=1, n=1, o=1, seed=0):
    """Standard-normal latent array of shape (d, m, n, o), float32."""
    if min(d, m, n, o) < 1:
        raise ShapeError("latent dims must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal((d, m, n, o), dtype=np.float32)


def _layer_forward(spec, params, x, leaky_slope, bn_eps, dtype):
    bias = params.bias if spec.has_bias else None
    if spec.kind == "conv3d":
        x = conv3d(x, params.weight, spec.stride, spec.padding, bias, dtype)
    else:
        x = conv_transpose3d(x, params.weight, spec.stride, spec.padding, bias, dtype)
    if spec.has_batchnorm:
        x = batchnorm_infer(
            x, params.gamma, params.beta, params.running_mean,
            params.running_var, bn_eps,
        )
    return _ACTIVATIONS[spec.activation](x, leaky_slope)


def _run_network(w: NetworkWeights, x, dtype, collect=False):
    dumps = []
    for spec, params in zip(w.specs, w.params):
        x = _layer_forward(spec, params, x, w.leaky_slope, w.bn_eps, dtype)
        if collect:
            dumps.append(x.copy())
    return (x, dumps) if collect else x


def gray_from_unit(y):
    """Map [-1, 1] activations to gray values: v = round(255 (y+1)/2),
    rounding half away from zero."""
    v = np.floor(255.0 * (np.asarray(y, dtype=np.float64) + 1.0) / 2.0 + 0.5)
    return np.clip(v, 0, 255).astype(np.uint8)


def unit_from_gray(v):
    """Inverse gray mapping: y = v/127.5 - 1, float32."""
    return (np.asarray(v, dtype=np.float32) / np.float32(127.5)) - np.float32(1.0)


def generator_output_edge(m: int) -> int:
    """Spatial edge synthesized from a latent of spatial extent m.

    Closed form of the layer size recurrence: m -> m+3 -> 2m+6 -> 4m+12
    -> 8m+24 -> 8m+24 -> 16m+48.
    """
    return 16 * m + 48


def generator_forward(
    w: NetworkWeights, z, dtype=np.float32, voxel_size=DEFAULT_VOXEL_SIZE
) -> GrayImage3D:
    """Run the generator on latent z (shape (d, m, n, o)) to a gray volume."""
    if w.component != "generator":
        raise ValidationError(f"weights are for {w.component}, not generator")
    z = np.asarray(z)
    if z.ndim != 4:
        raise ShapeError(f"latent must be 4D (d, m, n, o), got shape {z.shape}")
    if z.shape[0] != w.d:
        raise ShapeError(
            f"latent has {z.shape[0]} channels, weights expect d={w.d}"
        )
    y = _run_network(w, z, dtype)
    if y.shape[0] != 1:
        raise ShapeError(f"generator head produced {y.shape[0]} channels")
    return GrayImage3D(gray_from_unit(y[0]), voxel_size)


def discriminator_tile_scores(w: NetworkWeights, img: GrayImage3D, dtype=np.float32):
    """Scores of every disjoint 64-cube tile, origin-anchored grid.

    Trailing voxels that do not fill a tile are ignored; callers see the
    tile grid in the result and can detect the discarded margin.
    """
    if w.component != "discriminator":
        raise ValidationError(f"weights are for {w.component}, not discriminator")
    t = DISCRIMINATOR_TILE
    nz, ny, nx = img.data.shape
    if min(nz, ny, nx) < t:
        raise ShapeError(f"image {img.dims} smaller than the {t}-cube input")
    grid = (nz // t, ny // t, nx // t)
    scores = np.empty(grid, dtype=np.float64)
    for iz in range(grid[0]):
        for iy in range(grid[1]):
            for ix in range(grid[2]):
                tile = img.data[
                    iz * t : (iz + 1) * t,
                    iy * t : (iy + 1) * t,
                    ix * t : (ix + 1) * t,
                ]
                x = unit_from_gray(tile)[None]
                y = _run_network(w, x, dtype)
                if y.shape != (1, 1, 1, 1):
                    raise ShapeError(
                        f"discriminator head produced shape {y.shape}, expected (1,1,1,1)"
                    )
                scores[iz, iy, ix] = float(y[0, 0, 0, 0])
    return scores


def discriminator_forward(w: NetworkWeights, img: GrayImage3D, dtype=np.float32):
    """Realness probability of a volume.

    Returns (score, tile_scores): for a 64-cube input the score is the
    single network output; larger volumes are tiled into disjoint 64-cubes
    and the mean tile score is reported (tile_scores exposes the grid so
    the aggregation is visible to callers).
    """
    scores = discriminator_tile_scores(w, img, dtype)
    return float(scores.mean()), scores


def interpolate_latent(z_start, z_end, steps: int):
    """Linear latent path: beta sweeps 1 -> 0 over `steps` uniform values,
    giving beta*z_start + (1-beta)*z_end with exact endpoints."""
    z_start = np.asarray(z_start)
    z_end = np.asarray(z_end)
    if z_start.shape != z_end.shape:
        raise ShapeError(
            f"latent shapes differ: {z_start.shape} vs {z_end.shape}"
        )
    steps = int(steps)
    if steps < 2:
        raise ValidationError(f"need at least 2 steps, got {steps}")
    out = []
    for i in range(steps):
        beta = 1.0 - i / (steps - 1)
        if i == 0:
            out.append(z_start.copy())
        elif i == steps - 1:
            out.append(z_end.copy())
        else:
            out.append((beta * z_start + (1.0 - beta) * z_end).astype(z_start.dtype))
    return out


def dump_activations(w: NetworkWeights, x, dtype=np.float32):
    """Per-layer tensors captured after each activation function.

    ``x`` is a latent array for generator weights, a GrayImage3D for
    discriminator weights (mapped to [-1, 1] internally, no tiling).
    """
    if w.component == "generator":
        arr = np.asarray(x)
        if arr.ndim != 4 or arr.shape[0] != w.d:
            raise ShapeError(f"latent must be (d={w.d}, m, n, o), got {arr.shape}")
    else:
        if not isinstance(x, GrayImage3D):
            raise ValidationError("discriminator activations need a gray volume input")
        arr = unit_from_gray(x.data)[None]
    _, dumps = _run_network(w, arr, dtype, collect=True)
    return dumps


def latent_extent_for(edge: int) -> int:
    """Smallest latent spatial extent whose output covers `edge` voxels."""
    if edge < 1:
        raise ShapeError(f"edge must be positive, got {edge}")
    return max(1, -(-(edge - 48) // 16))


def synthesize(
    w: NetworkWeights, edge: int, seed=0, dtype=np.float32,
    voxel_size=DEFAULT_VOXEL_SIZE,
) -> GrayImage3D:
    """Generate a volume of exactly `edge` voxels per side.

    The generator's output sizes are 16 m + 48; when `edge` falls between
    them the next larger volume is synthesized and centrally cropped.
    """
    m = latent_extent_for(edge)
    z = sample_noise(w.d, m, m, m, seed=seed)
    img = generator_forward(w, z, dtype=dtype, voxel_size=voxel_size)
    full = img.data.shape[0]
    if full == edge:
        return img
    off = (full - edge) // 2
    crop = img.data[off : off + edge, off : off + edge, off : off + edge]
    return GrayImage3D(np.ascontiguousarray(crop), voxel_size)
