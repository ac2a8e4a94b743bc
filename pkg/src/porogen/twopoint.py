"""Two-point probability functions of the pore phase.

S2(r) is the probability that two lattice points separated by r voxels
along a direction both fall in pore.  Counting is non-periodic: pairs
whose second point leaves the volume are excluded from numerator and
denominator alike, so S2(0) equals the porosity exactly and no wrap-around
correlations are invented.  The radial curve is the arithmetic mean of the
three Cartesian directional curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import RangeError, ShapeError, ValidationError
from .volume import AXIS_TO_DIM, BinaryImage3D

DIRECTIONS = ("x", "y", "z")


@dataclass(frozen=True, eq=False)
class TwoPointFunction:
    """S2 sampled at integer voxel lags 0..r_max along one direction."""

    distances: np.ndarray
    values: np.ndarray
    direction: str
    voxel_size: float

    def __post_init__(self):
        distances = np.asarray(self.distances, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        if distances.ndim != 1 or distances.shape != values.shape:
            raise ShapeError("distances and values must be equal-length 1D arrays")
        if distances.size == 0:
            raise ShapeError("a curve needs at least one lag")
        if self.direction not in DIRECTIONS + ("radial",):
            raise ValidationError(f"direction must be x|y|z|radial, got {self.direction!r}")
        if values.size and (values.min() < -1e-12 or values.max() > 1 + 1e-12):
            raise RangeError("S2 values must lie in [0, 1]")
        if self.voxel_size <= 0:
            raise RangeError(f"voxel_size must be positive, got {self.voxel_size}")
        object.__setattr__(self, "distances", distances)
        object.__setattr__(self, "values", values)

    @property
    def distances_m(self) -> np.ndarray:
        return self.distances * self.voxel_size


@dataclass(frozen=True, eq=False)
class EnsembleCurve:
    """Pointwise mean and population spread of a set of S2 curves."""

    distances: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    count: int
    direction: str
    voxel_size: float

    def __post_init__(self):
        if self.count < 1:
            raise ShapeError("ensemble needs at least one curve")
        if np.asarray(self.std).size and np.asarray(self.std).min() < 0:
            raise RangeError("standard deviations cannot be negative")


def s2_directional(bin_img: BinaryImage3D, direction: str, r_max: int) -> TwoPointFunction:
    """Lattice-point estimate of S2 along one Cartesian axis.

    values[r] = pore pairs (p, p + r e) / valid pairs, with pairs crossing
    the domain boundary excluded from both counts.
    """
    if direction not in DIRECTIONS:
        raise ValidationError(f"direction must be one of x, y, z, got {direction!r}")
    pore = bin_img.pore_mask
    extent = pore.shape[AXIS_TO_DIM[direction]]
    r_max = int(r_max)
    if r_max < 0 or r_max >= extent:
        raise RangeError(
            f"r_max must satisfy 0 <= r_max < {extent} along {direction}, got {r_max}"
        )
    lines = np.moveaxis(pore, AXIS_TO_DIM[direction], -1)
    n_lines = lines.size // extent
    values = np.empty(r_max + 1, dtype=np.float64)
    values[0] = np.count_nonzero(lines) / lines.size
    for r in range(1, r_max + 1):
        hits = np.count_nonzero(lines[..., :-r] & lines[..., r:])
        values[r] = hits / (n_lines * (extent - r))
    return TwoPointFunction(
        np.arange(r_max + 1), values, direction, bin_img.voxel_size
    )


def s2_radial(bin_img: BinaryImage3D, r_max: int) -> TwoPointFunction:
    """Arithmetic mean of the three directional curves at each lag."""
    r_max = int(r_max)
    limit = min(bin_img.data.shape)
    if r_max < 0 or r_max >= limit:
        raise RangeError(f"r_max must satisfy 0 <= r_max < {limit}, got {r_max}")
    curves = [s2_directional(bin_img, d, r_max) for d in DIRECTIONS]
    mean = np.mean([c.values for c in curves], axis=0)
    # the three directional curves share the same lag-0 sample, so the
    # porosity identity holds exactly rather than to rounding
    mean[0] = curves[0].values[0]
    return TwoPointFunction(np.arange(r_max + 1), mean, "radial", bin_img.voxel_size)


def specific_surface_from_s2(s2: TwoPointFunction) -> float:
    """Specific surface from the S2 slope at the origin: -4 S2'(0).

    The derivative is a forward difference over one voxel lag, the only
    estimator stable at voxel resolution; it carries the corresponding
    discretization bias, and the factor 4 assumes an isotropic interface.
    """
    if s2.values.size < 2:
        raise RangeError("need at least lags 0 and 1 to take the slope")
    return float(-4.0 * (s2.values[1] - s2.values[0]) / s2.voxel_size)


def ensemble_stats(curves) -> EnsembleCurve:
    """Pointwise mean and population standard deviation of S2 curves."""
    curves = list(curves)
    if not curves:
        raise ShapeError("ensemble needs at least one curve")
    first = curves[0]
    for c in curves[1:]:
        if not np.array_equal(c.distances, first.distances):
            raise ShapeError("curves have mismatched lag grids")
        if c.direction != first.direction:
            raise ShapeError(
                f"curves mix directions {first.direction!r} and {c.direction!r}"
            )
    stack = np.stack([c.values for c in curves])
    return EnsembleCurve(
        distances=first.distances.copy(),
        mean=stack.mean(axis=0),
        std=stack.std(axis=0),
        count=len(curves),
        direction=first.direction,
        voxel_size=first.voxel_size,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def write_curve(curve: TwoPointFunction, path, image_id=None) -> None:
    """Write `lag_voxels,lag_m,value` rows plus a JSON metadata sidecar."""
    with open(path, "w") as fh:
        fh.write("lag_voxels,lag_m,value\n")
        for lag, lag_m, value in zip(
            curve.distances, curve.distances_m, curve.values
        ):
            fh.write(f"{int(lag)},{float(lag_m)!r},{float(value)!r}\n")
    header = {
        "direction": curve.direction,
        "voxel_size_m": curve.voxel_size,
        "image_id": image_id,
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")


def read_curve(path) -> tuple[TwoPointFunction, dict]:
    """Inverse of write_curve; returns the curve and its metadata."""
    with open(str(path) + ".json") as fh:
        header = json.load(fh)
    lags, values = [], []
    with open(path) as fh:
        first = fh.readline().strip()
        if first != "lag_voxels,lag_m,value":
            raise ValidationError(f"{path}: unexpected CSV header {first!r}")
        for line in fh:
            lag, _, value = line.strip().split(",")
            lags.append(int(lag))
            values.append(float(value))
    curve = TwoPointFunction(
        np.array(lags), np.array(values), header["direction"], header["voxel_size_m"]
    )
    return curve, header
