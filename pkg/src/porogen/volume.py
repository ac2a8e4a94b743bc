"""Voxel volume I/O, gray-level preprocessing, segmentation and sub-domain
extraction.

Conventions
-----------
Arrays are indexed ``data[z, y, x]`` (C order), so a headerless raw file
written x-fastest maps onto the array with a plain reshape.  Declared
dimensions are always reported as ``(nx, ny, nz)``.

Phase polarity: after optional inversion at load time (``pore="dark"``
flips gray values), the canonical convention throughout the toolkit is
**pore = bright**: a voxel with gray value strictly above the threshold
is pore (label 1), everything else is grain (label 0).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    CapacityError,
    DegenerateHistogramError,
    DimensionError,
    RangeError,
    ValidationError,
    VolumeIOError,
)

DEFAULT_VOXEL_SIZE = 27.8e-6  # meters

# Map axis label to the numpy axis of data[z, y, x].
AXIS_TO_DIM = {"x": 2, "y": 1, "z": 0}

# 6-connectivity structuring element (face neighbors only).
_STRUCT_6 = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True, eq=False)
class GrayImage3D:
    """3D grid of 8-bit gray values with a physical voxel edge length.

    ``data`` has shape ``(nz, ny, nx)`` and dtype uint8 (which enforces the
    [0, 255] value range).
    """

    data: np.ndarray
    voxel_size: float = DEFAULT_VOXEL_SIZE

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise DimensionError(f"expected a 3D array, got ndim={arr.ndim}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise RangeError("gray values must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        if min(arr.shape) < 1:
            raise DimensionError(f"all dimensions must be positive, got {arr.shape}")
        if self.voxel_size <= 0:
            raise RangeError(f"voxel_size must be positive, got {self.voxel_size}")
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)


@dataclass(frozen=True, eq=False)
class BinaryImage3D:
    """3D grid of {0 = grain, 1 = pore} labels; shape ``(nz, ny, nx)``."""

    data: np.ndarray
    voxel_size: float = DEFAULT_VOXEL_SIZE

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise DimensionError(f"expected a 3D array, got ndim={arr.ndim}")
        if arr.dtype != np.bool_ and not _is_binary(arr):
            raise RangeError("binary labels must be exactly 0 or 1")
        if self.voxel_size <= 0:
            raise RangeError(f"voxel_size must be positive, got {self.voxel_size}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr, dtype=np.uint8))

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def pore_mask(self) -> np.ndarray:
        return self.data.astype(bool)

    def porosity(self) -> float:
        return float(np.count_nonzero(self.data)) / self.data.size


def _is_binary(arr: np.ndarray) -> bool:
    return bool(np.isin(arr, (0, 1)).all())


# ---------------------------------------------------------------------------
# Raw volume I/O
# ---------------------------------------------------------------------------

def load_volume(path, dims, voxel_size=DEFAULT_VOXEL_SIZE) -> GrayImage3D:
    """Read a headerless raw volume of unsigned 8-bit values.

    The file is interpreted x-fastest (then y, then z); ``dims`` is
    ``(nx, ny, nz)``.  The byte count must match exactly.
    """
    nx, ny, nz = (int(d) for d in dims)
    if min(nx, ny, nz) < 1:
        raise DimensionError(f"dims must be positive, got {dims}")
    try:
        size = os.path.getsize(path)
    except OSError as exc:
        raise VolumeIOError(f"cannot stat {path}: {exc}") from exc
    expected = nx * ny * nz
    if size != expected:
        raise DimensionError(
            f"{path}: file has {size} bytes, dims {dims} require {expected}"
        )
    try:
        flat = np.fromfile(path, dtype=np.uint8)
    except OSError as exc:
        raise VolumeIOError(f"cannot read {path}: {exc}") from exc
    return GrayImage3D(flat.reshape(nz, ny, nx), voxel_size=voxel_size)


def save_volume(img, path) -> None:
    """Write a volume as headerless raw bytes, x-fastest."""
    img.data.astype(np.uint8).tofile(path)


def sidecar_path(volume_path) -> str:
    return str(volume_path) + ".json"


def write_sidecar(volume_path, dims, voxel_size, pore_polarity="bright") -> None:
    """Write the JSON sidecar accompanying a raw volume file."""
    if pore_polarity not in ("bright", "dark"):
        raise ValidationError(f"pore_polarity must be bright|dark, got {pore_polarity}")
    meta = {
        "dims": [int(d) for d in dims],
        "voxel_size_m": float(voxel_size),
        "pore_polarity": pore_polarity,
    }
    with open(sidecar_path(volume_path), "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def read_sidecar(volume_path) -> dict:
    try:
        with open(sidecar_path(volume_path)) as fh:
            meta = json.load(fh)
    except OSError as exc:
        raise VolumeIOError(f"missing sidecar for {volume_path}: {exc}") from exc
    for key in ("dims", "voxel_size_m", "pore_polarity"):
        if key not in meta:
            raise ValidationError(f"sidecar for {volume_path} lacks '{key}'")
    meta["dims"] = tuple(int(d) for d in meta["dims"])
    return meta


def invert_gray(img: GrayImage3D) -> GrayImage3D:
    """Flip gray values (v -> 255 - v), mapping dark pores onto the canonical
    bright-pore convention."""
    return GrayImage3D(np.subtract(255, img.data, dtype=np.uint8), img.voxel_size)


# ---------------------------------------------------------------------------
# Gray-level preprocessing and segmentation
# ---------------------------------------------------------------------------

def gray_histogram(img: GrayImage3D) -> np.ndarray:
    """256-bin histogram of gray values."""
    return np.bincount(img.data.reshape(-1), minlength=256).astype(np.int64)


def histogram_equalize(img: GrayImage3D) -> GrayImage3D:
    """Cumulative-histogram contrast equalization.

    Uses the standard remap v' = round(255 * (cdf(v) - cdf_min) / (N - cdf_min))
    with cdf_min the cdf of the lowest occupied bin.  A single-valued image has
    N == cdf_min; by convention it maps to all zeros.  Rounding is
    half-away-from-zero.  The map is monotone, so gray-value ordering is
    preserved.
    """
    hist = gray_histogram(img)
    cdf = np.cumsum(hist)
    n = img.data.size
    occupied = np.nonzero(hist)[0]
    cdf_min = int(cdf[occupied[0]])
    if n == cdf_min:
        lut = np.zeros(256, dtype=np.uint8)
    else:
        scaled = 255.0 * (cdf - cdf_min) / (n - cdf_min)
        lut = np.floor(np.clip(scaled, 0.0, 255.0) + 0.5).astype(np.uint8)
    return GrayImage3D(lut[img.data], img.voxel_size)


def otsu_threshold(img: GrayImage3D) -> int:
    """Gray level maximizing the between-class variance of the 256-bin
    histogram.

    The returned threshold ``t`` splits voxels into grain (value <= t) and
    pore (value > t); pore is the bright phase in the canonical convention.
    Ties are broken toward the smallest maximizing threshold.
    """
    hist = gray_histogram(img).astype(np.float64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogramError(
            "image has a single gray value; no threshold separates two classes"
        )
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    total = w0[-1]
    m0 = np.cumsum(hist * levels)
    mean_total = m0[-1]
    w1 = total - w0
    # thresholds t = 0..254; t = 255 leaves the upper class empty
    valid = (w0[:-1] > 0) & (w1[:-1] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0[:-1] / w0[:-1]
        mu1 = (mean_total - m0[:-1]) / w1[:-1]
        var_between = w0[:-1] * w1[:-1] * (mu0 - mu1) ** 2
    var_between[~valid] = -np.inf
    return int(np.argmax(var_between))


def segment(img: GrayImage3D, threshold) -> BinaryImage3D:
    """Threshold a gray volume: label 1 (pore) iff value > threshold."""
    t = int(threshold)
    if not 0 <= t <= 255:
        raise RangeError(f"threshold must lie in [0, 255], got {threshold}")
    return BinaryImage3D((img.data > t).astype(np.uint8), img.voxel_size)


# ---------------------------------------------------------------------------
# Sub-domain extraction
# ---------------------------------------------------------------------------

def subdomain_capacity(dims, size) -> int:
    nx, ny, nz = dims
    return (nx // size) * (ny // size) * (nz // size)


def subdomain_corners(dims, size, count, mode="nonoverlap-grid", seed=0):
    """Corner coordinates (x0, y0, z0) of pairwise-disjoint cubes of edge
    ``size`` inside a volume of the given dims.

    ``nonoverlap-grid`` walks the aligned grid of ``floor(n/size)`` cells per
    axis in x-fastest scan order.  ``random-nonoverlap`` samples ``count``
    cells of that grid without replacement and shifts the cell boundaries by
    sorted random offsets per axis, so the cubes stay disjoint while their
    positions are randomized.  Both modes are deterministic given ``seed``.
    """
    nx, ny, nz = (int(d) for d in dims)
    size = int(size)
    if size < 1:
        raise ValidationError(f"sub-domain size must be positive, got {size}")
    if size > min(nx, ny, nz):
        raise CapacityError(f"size {size} exceeds volume dims {dims}")
    count = int(count)
    capacity = subdomain_capacity((nx, ny, nz), size)
    if count < 1:
        raise ValidationError(f"count must be positive, got {count}")
    if count > capacity:
        raise CapacityError(
            f"cannot place {count} disjoint cubes of edge {size} in {dims} "
            f"(capacity {capacity})"
        )

    cells = (nx // size, ny // size, nz // size)
    if mode == "nonoverlap-grid":
        corners = []
        for iz in range(cells[2]):
            for iy in range(cells[1]):
                for ix in range(cells[0]):
                    corners.append((ix * size, iy * size, iz * size))
                    if len(corners) == count:
                        return corners
        return corners
    if mode == "random-nonoverlap":
        rng = np.random.Generator(np.random.PCG64(seed))
        offsets = []
        for n, c in zip((nx, ny, nz), cells):
            slack = n - c * size
            jitter = np.sort(rng.integers(0, slack + 1, size=c))
            offsets.append(np.arange(c) * size + jitter)
        chosen = rng.choice(cells[0] * cells[1] * cells[2], size=count, replace=False)
        corners = []
        for flat in chosen:
            ix = int(flat % cells[0])
            iy = int((flat // cells[0]) % cells[1])
            iz = int(flat // (cells[0] * cells[1]))
            corners.append(
                (int(offsets[0][ix]), int(offsets[1][iy]), int(offsets[2][iz]))
            )
        return corners
    raise ValidationError(f"unknown extraction mode {mode!r}")


def extract_subdomains(img, size, count, mode="nonoverlap-grid", seed=0):
    """Cut ``count`` pairwise-disjoint cubic sub-volumes out of ``img``."""
    corners = subdomain_corners(img.dims, size, count, mode=mode, seed=seed)
    subs = []
    for x0, y0, z0 in corners:
        block = img.data[z0 : z0 + size, y0 : y0 + size, x0 : x0 + size]
        subs.append(GrayImage3D(np.ascontiguousarray(block), img.voxel_size))
    return subs


# ---------------------------------------------------------------------------
# Connectivity
# ---------------------------------------------------------------------------

def connected_pore(bin_img: BinaryImage3D, axis="x") -> BinaryImage3D:
    """Keep only pore voxels whose 6-connected component touches both the
    inlet (axis minimum) and outlet (axis maximum) face.

    Everything else, including dead-end branches reachable from one face
    only, is relabeled grain.  6-connectivity matches the face-sharing flow
    paths of the finite-difference grid.
    """
    if axis not in AXIS_TO_DIM:
        raise ValidationError(f"axis must be one of x, y, z, got {axis!r}")
    pore = bin_img.pore_mask
    labels, n = ndimage.label(pore, structure=_STRUCT_6)
    if n == 0:
        return BinaryImage3D(np.zeros_like(bin_img.data), bin_img.voxel_size)
    dim = AXIS_TO_DIM[axis]
    inlet = np.moveaxis(labels, dim, 0)[0]
    outlet = np.moveaxis(labels, dim, 0)[-1]
    spanning = np.intersect1d(np.unique(inlet), np.unique(outlet))
    spanning = spanning[spanning > 0]
    keep = np.isin(labels, spanning) & pore
    return BinaryImage3D(keep.astype(np.uint8), bin_img.voxel_size)
