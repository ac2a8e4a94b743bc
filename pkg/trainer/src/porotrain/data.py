"""Raw gray-volume input.

Volumes are headerless unsigned 8-bit files written x-fastest, so an
array loads as [z, y, x] while dimensions travel as (nx, ny, nz).  A
JSON sidecar named `<volume>.json` can carry the dims.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import FormatError, ShapeError, ValidationError

GRAY_HALF_RANGE = 127.5


def unit_from_gray(v) -> np.ndarray:
    """Map 8-bit gray values onto [-1, 1] float32: y = v/127.5 - 1."""
    v = np.asarray(v)
    return (v.astype(np.float32) / np.float32(GRAY_HALF_RANGE)) - np.float32(1.0)


def sidecar_path(volume_path) -> str:
    return str(volume_path) + ".json"


def load_volume(path, dims=None) -> np.ndarray:
    """Read one raw volume as a uint8 array indexed [z, y, x].

    `dims` is (nx, ny, nz); when omitted it is taken from the sidecar.
    """
    if dims is None:
        side = sidecar_path(path)
        if not os.path.exists(side):
            raise ValidationError(
                f"dims unknown for {path}: pass dims or provide {side}"
            )
        with open(side) as fh:
            try:
                meta = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{side}: not valid JSON: {exc}") from exc
        if "dims" not in meta:
            raise ValidationError(f"{side} lacks 'dims'")
        dims = meta["dims"]
    if len(dims) != 3:
        raise ShapeError(f"dims must be (nx, ny, nz), got {dims!r}")
    nx, ny, nz = (int(n) for n in dims)
    if min(nx, ny, nz) < 1:
        raise ValidationError(f"dims must be positive, got {dims!r}")
    flat = np.fromfile(path, dtype=np.uint8)
    if flat.size != nx * ny * nz:
        raise FormatError(
            f"{path} holds {flat.size} bytes, dims {dims!r} need {nx * ny * nz}"
        )
    return flat.reshape(nz, ny, nx)


def load_dataset(paths, dims=None) -> list:
    """Load a list of raw volumes sharing one dimension triple."""
    volumes = [load_volume(p, dims) for p in paths]
    if not volumes:
        raise ValidationError("no volume paths given")
    return volumes
