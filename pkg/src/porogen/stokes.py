"""Single-phase Stokes flow through segmented pore geometry.

Velocities live on a staggered marker-and-cell grid: each velocity
component is sampled on the cell faces it is normal to, pressure at cell
centers.  A unit pressure drop is applied between the two domain faces
perpendicular to the flow axis, lateral domain walls are impermeable and
stress-free, and every face touching a grain voxel is held at exactly
zero (no-slip).  The steady state is reached by explicit pseudo-time
stepping with a pressure projection each step; the projection Poisson
problem is solved by matrix-free conjugate gradients.

All solver arithmetic uses lattice units (voxel spacing 1, viscosity 1,
pressure drop 1); physical units enter only in the permeability
conversion.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateHistogramError,
    NoFlowError,
    RangeError,
    ShapeError,
    ValidationError,
    VolumeIOError,
)
from .volume import AXIS_TO_DIM, BinaryImage3D, connected_pore

DARCY_M2 = 9.869233e-13

# normalized cell speeds are binned on a fixed logarithmic grid
SPEED_BIN_EDGES = np.logspace(-4.0, 2.0, 257)

FLUX_TOLERANCE = 1e-6
DIVERGENCE_TOLERANCE = 1e-8
MAX_OUTER_ITERATIONS = 50_000

# Gershgorin row sum of the face Laplacian never exceeds 12 (each of the
# six neighbor directions contributes at most 2), so explicit stepping is
# stable for dt < 2/12.
_TIME_STEP = 0.9 * 2.0 / 12.0

# transpose that brings the flow axis to the last array position
_PERM = {"x": (0, 1, 2), "y": (0, 2, 1), "z": (1, 2, 0)}


def _sl(axis: int, s) -> tuple:
    """Index tuple selecting slice ``s`` along ``axis`` of a 3D array."""
    out = [slice(None), slice(None), slice(None)]
    out[axis] = s
    return tuple(out)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Converged staggered-grid Stokes solution in solver units.

    ``u``, ``v`` and ``w`` are the face-normal velocities on x-, y- and
    z-faces with shapes ``(nz, ny, nx+1)``, ``(nz, ny+1, nx)`` and
    ``(nz+1, ny, nx)``; ``pressure`` is cell-centered.  ``pore`` marks the
    connected pore cells the solve ran on.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    pressure: np.ndarray
    pore: np.ndarray
    axis: str
    voxel_size: float
    viscosity: float = 1.0
    iterations: int = 0
    flux_change: float = 0.0
    max_divergence: float = 0.0

    def __post_init__(self):
        pore = np.ascontiguousarray(np.asarray(self.pore, dtype=bool))
        if pore.ndim != 3:
            raise ShapeError(f"pore mask must be 3D, got ndim={pore.ndim}")
        nz, ny, nx = pore.shape
        expect = {
            "u": (nz, ny, nx + 1),
            "v": (nz, ny + 1, nx),
            "w": (nz + 1, ny, nx),
            "pressure": (nz, ny, nx),
        }
        arrays = {}
        for name, shape in expect.items():
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if arr.shape != shape:
                raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
            arrays[name] = arr
        if self.axis not in AXIS_TO_DIM:
            raise ValidationError(f"axis must be one of x, y, z, got {self.axis!r}")
        if self.voxel_size <= 0:
            raise RangeError(f"voxel_size must be positive, got {self.voxel_size}")
        grain = ~pore
        for name, face_axis in (("u", 2), ("v", 1), ("w", 0)):
            arr = arrays[name]
            # a face is wall-adjacent when any cell beside it is grain
            near = np.zeros(arr.shape, dtype=bool)
            near[_sl(face_axis, slice(0, -1))] |= grain
            near[_sl(face_axis, slice(1, None))] |= grain
            if arr[near].any():
                raise ValidationError(f"{name} has nonzero velocity on a grain-adjacent face")
        div = _divergence(arrays["u"], arrays["v"], arrays["w"])
        div_max = float(np.abs(div[pore]).max()) if pore.any() else 0.0
        if div_max > DIVERGENCE_TOLERANCE * 1.0001:
            raise ValidationError(
                f"divergence {div_max:.3e} exceeds tolerance {DIVERGENCE_TOLERANCE:.0e}"
            )
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "pore", pore)

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.pore.shape
        return (nx, ny, nz)


@dataclass(frozen=True)
class FlowResult:
    """Directional permeability and flow summary for one solve."""

    axis: str
    permeability_m2: float
    permeability_darcy: float
    effective_porosity: float
    mean_speed: float
    voxel_size: float

    def __post_init__(self):
        if self.axis not in AXIS_TO_DIM:
            raise ValidationError(f"axis must be one of x, y, z, got {self.axis!r}")
        if self.permeability_m2 < 0:
            raise RangeError(f"permeability must be >= 0, got {self.permeability_m2}")
        if not 0.0 <= self.effective_porosity <= 1.0:
            raise RangeError(f"effective porosity {self.effective_porosity} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "permeability_m2": float(self.permeability_m2),
            "permeability_darcy": float(self.permeability_darcy),
            "effective_porosity": float(self.effective_porosity),
            "mean_speed": float(self.mean_speed),
            "voxel_size_m": float(self.voxel_size),
        }


@dataclass(frozen=True, eq=False)
class HistogramPDF:
    """Normalized-speed density on the fixed logarithmic bin grid.

    ``densities[i]`` integrates to the in-range sample fraction over
    ``edges[i]..edges[i+1]``; samples outside the grid are tallied in
    ``underflow``/``overflow``.
    """

    edges: np.ndarray
    densities: np.ndarray
    underflow: int
    overflow: int
    n_samples: int

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.float64))
        dens = np.ascontiguousarray(np.asarray(self.densities, dtype=np.float64))
        if edges.ndim != 1 or dens.ndim != 1 or edges.size != dens.size + 1:
            raise ShapeError(
                f"need edges (n+1,) and densities (n,), got {edges.shape} and {dens.shape}"
            )
        if np.any(np.diff(edges) <= 0):
            raise ValidationError("bin edges must be strictly increasing")
        if np.any(dens < 0):
            raise RangeError("densities must be nonnegative")
        if self.underflow < 0 or self.overflow < 0 or self.n_samples < 0:
            raise RangeError("sample counts must be nonnegative")
        mass = float((dens * np.diff(edges)).sum())
        if self.underflow == 0 and self.overflow == 0 and abs(mass - 1.0) > 1e-9:
            raise ValidationError(f"density must integrate to 1, got {mass!r}")
        if mass > 1.0 + 1e-9:
            raise ValidationError(f"density mass {mass!r} exceeds 1")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "densities", dens)

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)


@dataclass(frozen=True, eq=False)
class HistogramEnsemble:
    """Per-bin arithmetic mean and population spread over histograms."""

    edges: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    count: int


def _face_active(pore: np.ndarray, face_axis: int, flow_axis: int = 2) -> np.ndarray:
    """Faces carrying an unknown velocity: between two pore cells, plus the
    open inlet/outlet faces of pore cells on the flow boundaries."""
    shape = list(pore.shape)
    shape[face_axis] += 1
    act = np.zeros(shape, dtype=bool)
    act[_sl(face_axis, slice(1, -1))] = (
        pore[_sl(face_axis, slice(0, -1))] & pore[_sl(face_axis, slice(1, None))]
    )
    if face_axis == flow_axis:
        act[_sl(face_axis, 0)] = pore[_sl(face_axis, 0)]
        act[_sl(face_axis, -1)] = pore[_sl(face_axis, -1)]
    return act


def _component_stencil(pore: np.ndarray, face_axis: int) -> dict:
    """Precompute the Laplacian diagonal and neighbor couplings for one
    velocity component.

    Neighbor handling per direction: an active neighbor couples normally;
    an in-range inactive neighbor is a wall, entering as a mirrored ghost
    (weight 2) when the solid occupies both cells beside that face and as
    a zero Dirichlet value at distance one (weight 1) otherwise; an
    out-of-range neighbor is a zero-gradient ghost (lateral free slip,
    reservoir in/outflow) and drops out.
    """
    act = _face_active(pore, face_axis)
    n_f = pore.shape[face_axis]
    padded_shape = list(pore.shape)
    padded_shape[face_axis] += 2
    padded = np.zeros(padded_shape, dtype=bool)  # outside the domain counts as solid
    padded[_sl(face_axis, slice(1, -1))] = pore
    both_grain = (
        ~padded[_sl(face_axis, slice(0, n_f + 1))]
        & ~padded[_sl(face_axis, slice(1, n_f + 2))]
    )
    diag = np.zeros(act.shape, dtype=np.float64)
    couple = {}
    for axis in range(3):
        for sign in (1, -1):
            take = slice(1, None) if sign > 0 else slice(0, -1)
            put = slice(0, -1) if sign > 0 else slice(1, None)
            nbr_act = np.zeros_like(act)
            nbr_act[_sl(axis, put)] = act[_sl(axis, take)]
            in_range = np.zeros_like(act)
            in_range[_sl(axis, put)] = True
            coupled = act & nbr_act
            couple[(axis, sign)] = coupled.astype(np.float64)
            diag += coupled
            dead = act & in_range & ~nbr_act
            if axis == face_axis:
                diag += dead  # wall value 0 one cell away
            else:
                mirrored = np.zeros_like(act)
                mirrored[_sl(axis, put)] = both_grain[_sl(axis, take)]
                diag += np.where(dead & mirrored, 2.0, 0.0)
                diag += np.where(dead & ~mirrored, 1.0, 0.0)
    return {"active": act, "active_f": act.astype(np.float64), "diag": diag, "couple": couple}


def _laplacian(values: np.ndarray, stencil: dict) -> np.ndarray:
    out = -stencil["diag"] * values
    for (axis, sign), weight in stencil["couple"].items():
        take = slice(1, None) if sign > 0 else slice(0, -1)
        put = slice(0, -1) if sign > 0 else slice(1, None)
        shifted = np.zeros_like(values)
        shifted[_sl(axis, put)] = values[_sl(axis, take)]
        out += weight * shifted
    return out


def _face_gradient(
    cells: np.ndarray,
    face_axis: int,
    active_f: np.ndarray,
    inlet_value: float,
    outlet_value: float,
    flow_axis: int = 2,
) -> np.ndarray:
    """Cell-to-face difference along ``face_axis``; the reservoir values sit
    on the boundary faces themselves, half a cell from the first centers."""
    g = np.zeros(active_f.shape, dtype=np.float64)
    g[_sl(face_axis, slice(1, -1))] = (
        cells[_sl(face_axis, slice(1, None))] - cells[_sl(face_axis, slice(0, -1))]
    )
    if face_axis == flow_axis:
        g[_sl(face_axis, 0)] = 2.0 * (cells[_sl(face_axis, 0)] - inlet_value)
        g[_sl(face_axis, -1)] = 2.0 * (outlet_value - cells[_sl(face_axis, -1)])
    return g * active_f


def _divergence(u: np.ndarray, v: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (
        (u[:, :, 1:] - u[:, :, :-1])
        + (v[:, 1:, :] - v[:, :-1, :])
        + (w[1:, :, :] - w[:-1, :, :])
    )


def _cg(apply_a, b: np.ndarray, x0: np.ndarray, tol_inf: float, max_iter: int):
    """Conjugate gradients with an infinity-norm residual target."""
    x = x0.copy()
    r = b - apply_a(x)
    r_inf = float(np.abs(r).max())
    if r_inf <= tol_inf:
        return x, r_inf
    d = r.copy()
    rs = float((r * r).sum())
    for _ in range(max_iter):
        q = apply_a(d)
        dq = float((d * q).sum())
        if dq <= 0.0:
            break
        alpha = rs / dq
        x += alpha * d
        r -= alpha * q
        r_inf = float(np.abs(r).max())
        if r_inf <= tol_inf:
            break
        rs_new = float((r * r).sum())
        d = r + (rs_new / rs) * d
        rs = rs_new
    return x, r_inf


def effective_porosity(bin_img: BinaryImage3D, axis: str = "x") -> float:
    """Fraction of the domain occupied by pore space that percolates
    between the two boundary faces perpendicular to ``axis``."""
    return float(connected_pore(bin_img, axis).data.mean())


def stokes_solve(
    bin_img: BinaryImage3D,
    axis: str = "x",
    *,
    max_iterations: int = MAX_OUTER_ITERATIONS,
    flux_tolerance: float = FLUX_TOLERANCE,
    divergence_tolerance: float = DIVERGENCE_TOLERANCE,
) -> VelocityField:
    """Solve steady incompressible Stokes flow along ``axis``.

    Unit pressure drop between inlet (axis minimum) and outlet (axis
    maximum); converged once the relative outlet-flux change per outer
    iteration falls below ``flux_tolerance`` while the largest cell
    divergence stays below ``divergence_tolerance``.

    Raises ``NoFlowError`` when no pore path percolates and
    ``ConvergenceError`` when the iteration cap is hit first.
    """
    if axis not in AXIS_TO_DIM:
        raise ValidationError(f"axis must be one of x, y, z, got {axis!r}")
    connected = connected_pore(bin_img, axis)
    if not connected.data.any():
        raise NoFlowError(f"no pore path percolates along {axis}")

    perm = _PERM[axis]
    inv = tuple(np.argsort(perm))
    pore = np.ascontiguousarray(connected.pore_mask.transpose(perm))
    nz, ny, nx = pore.shape
    pore_f = pore.astype(np.float64)
    n_pore = int(pore.sum())

    stencils = {2: _component_stencil(pore, 2), 1: _component_stencil(pore, 1), 0: _component_stencil(pore, 0)}
    vel = {a: np.zeros(stencils[a]["active_f"].shape, dtype=np.float64) for a in (2, 1, 0)}

    ramp = 1.0 - (np.arange(nx, dtype=np.float64) + 0.5) / nx
    p = ramp[np.newaxis, np.newaxis, :] * pore_f
    psi = np.zeros_like(p)
    dt = _TIME_STEP

    def apply_poisson(phi):
        g2 = _face_gradient(phi, 2, stencils[2]["active_f"], 0.0, 0.0)
        g1 = _face_gradient(phi, 1, stencils[1]["active_f"], 0.0, 0.0)
        g0 = _face_gradient(phi, 0, stencils[0]["active_f"], 0.0, 0.0)
        return -_divergence(g2, g1, g0) * pore_f

    flux_prev = None
    flux_change = math.inf
    max_div = math.inf
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        star = {}
        for a in (2, 1, 0):
            st = stencils[a]
            grad_p = _face_gradient(
                p, a, st["active_f"], 1.0 if a == 2 else 0.0, 0.0
            )
            star[a] = (vel[a] + dt * (_laplacian(vel[a], st) - grad_p)) * st["active_f"]

        div_star = _divergence(star[2], star[1], star[0]) * pore_f
        if flux_prev is None:
            div_target = 1e-9
        else:
            # keep the summed divergence well under the flux so inlet and
            # outlet totals agree to better than 1e-6 relative
            div_target = max(1e-13, min(1e-9, 3e-7 * abs(flux_prev) / max(n_pore, 1)))
        psi, _ = _cg(apply_poisson, -div_star / dt, psi, div_target / dt, max_iter=3000)

        for a in (2, 1, 0):
            st = stencils[a]
            vel[a] = (star[a] - dt * _face_gradient(psi, a, st["active_f"], 0.0, 0.0)) * st["active_f"]
        p += psi

        flux = float(vel[2][:, :, -1].sum())
        if flux_prev is None:
            flux_change = math.inf
        else:
            flux_change = abs(flux - flux_prev) / max(abs(flux), 1e-300)
        flux_prev = flux
        if iteration >= 10 and flux_change < flux_tolerance:
            max_div = float(
                np.abs(_divergence(vel[2], vel[1], vel[0]) * pore_f).max()
            )
            if max_div < divergence_tolerance:
                break
    else:
        max_div = float(np.abs(_divergence(vel[2], vel[1], vel[0]) * pore_f).max())
        raise ConvergenceError(
            f"not converged after {max_iterations} iterations "
            f"(flux change {flux_change:.3e}, max divergence {max_div:.3e})",
            iterations=max_iterations,
            flux_change=flux_change,
            max_divergence=max_div,
        )

    # map the solve frame (flow axis last) back to the physical frame
    by_physical = {perm[a]: vel[a].transpose(inv) for a in (2, 1, 0)}
    return VelocityField(
        u=by_physical[2],
        v=by_physical[1],
        w=by_physical[0],
        pressure=p.transpose(inv),
        pore=pore.transpose(inv),
        axis=axis,
        voxel_size=bin_img.voxel_size,
        iterations=iteration,
        flux_change=flux_change,
        max_divergence=max_div,
    )


def boundary_fluxes(field: VelocityField) -> tuple[float, float]:
    """Total (inlet, outlet) volumetric flux through the flow boundaries,
    in lattice units."""
    if field.axis == "x":
        return float(field.u[:, :, 0].sum()), float(field.u[:, :, -1].sum())
    if field.axis == "y":
        return float(field.v[:, 0, :].sum()), float(field.v[:, -1, :].sum())
    return float(field.w[0, :, :].sum()), float(field.w[-1, :, :].sum())


def cell_speeds(field: VelocityField) -> np.ndarray:
    """Cell-centered speed: magnitude of the per-axis average of the two
    opposing face velocities."""
    ux = 0.5 * (field.u[:, :, :-1] + field.u[:, :, 1:])
    uy = 0.5 * (field.v[:, :-1, :] + field.v[:, 1:, :])
    uz = 0.5 * (field.w[:-1, :, :] + field.w[1:, :, :])
    return np.sqrt(ux * ux + uy * uy + uz * uz)


def permeability(field: VelocityField, axis: str | None = None) -> FlowResult:
    """Darcy permeability from the converged field: outlet flux times
    length over full cross-section area at unit pressure drop, scaled to
    m^2 with the voxel size."""
    if axis is None:
        axis = field.axis
    elif axis != field.axis:
        raise ValidationError(f"field was solved along {field.axis!r}, not {axis!r}")
    nz, ny, nx = field.pore.shape
    extents = {"x": nx, "y": ny, "z": nz}
    length = extents[axis]
    area = (nz * ny * nx) // length
    _, outlet = boundary_fluxes(field)
    k_lattice = outlet * length / area
    k_m2 = k_lattice * field.voxel_size**2
    speeds = cell_speeds(field)[field.pore]
    mean_speed = float(speeds.mean()) if speeds.size else 0.0
    return FlowResult(
        axis=axis,
        permeability_m2=k_m2,
        permeability_darcy=k_m2 / DARCY_M2,
        effective_porosity=float(field.pore.mean()),
        mean_speed=mean_speed,
        voxel_size=field.voxel_size,
    )


def velocity_histogram(field: VelocityField) -> HistogramPDF:
    """Density of cell speeds normalized by their mean over the connected
    pore, on the fixed logarithmic bin grid."""
    speeds = cell_speeds(field)[field.pore]
    if speeds.size == 0:
        raise DegenerateHistogramError("no pore cells to histogram")
    mean = float(speeds.mean())
    if mean <= 0.0:
        raise DegenerateHistogramError("zero mean speed: nothing to normalize by")
    normalized = speeds / mean
    edges = SPEED_BIN_EDGES
    underflow = int((normalized < edges[0]).sum())
    overflow = int((normalized > edges[-1]).sum())
    counts, _ = np.histogram(normalized, bins=edges)
    densities = counts / (normalized.size * np.diff(edges))
    return HistogramPDF(
        edges=edges.copy(),
        densities=densities,
        underflow=underflow,
        overflow=overflow,
        n_samples=int(normalized.size),
    )


def renormalize_histogram(hist: HistogramPDF) -> HistogramPDF:
    """Rescale the in-range density to integrate to exactly 1, discarding
    underflow/overflow mass."""
    mass = float((hist.densities * hist.widths).sum())
    if mass <= 0.0:
        raise DegenerateHistogramError("histogram carries no in-range mass")
    return HistogramPDF(
        edges=hist.edges.copy(),
        densities=hist.densities / mass,
        underflow=0,
        overflow=0,
        n_samples=hist.n_samples - hist.underflow - hist.overflow,
    )


def ensemble_histogram(hists: list[HistogramPDF]) -> HistogramEnsemble:
    """Per-bin arithmetic mean and population standard deviation across
    histograms sharing one bin grid."""
    if not hists:
        raise ShapeError("need at least one histogram")
    edges = hists[0].edges
    for h in hists[1:]:
        if h.edges.shape != edges.shape or not np.array_equal(h.edges, edges):
            raise ShapeError("histograms use different bin edges")
    stack = np.stack([h.densities for h in hists])
    return HistogramEnsemble(
        edges=edges.copy(),
        mean=stack.mean(axis=0),
        std=stack.std(axis=0, ddof=0),
        count=len(hists),
    )


def write_histogram(hist: HistogramPDF, path) -> None:
    """CSV of ``bin_left,bin_right,density`` rows plus a JSON sidecar with
    the sample counts."""
    lines = ["bin_left,bin_right,density"]
    for left, right, dens in zip(hist.edges[:-1], hist.edges[1:], hist.densities):
        lines.append(f"{float(left)!r},{float(right)!r},{float(dens)!r}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    meta = {
        "n_samples": int(hist.n_samples),
        "overflow": int(hist.overflow),
        "underflow": int(hist.underflow),
    }
    with open(str(path) + ".json", "w", encoding="ascii") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_histogram(path) -> HistogramPDF:
    if not os.path.exists(path):
        raise VolumeIOError(f"no such file: {path}")
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "bin_left,bin_right,density":
        raise ValidationError("missing bin_left,bin_right,density header")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ValidationError(f"malformed histogram row: {ln!r}")
        rows.append(tuple(float(x) for x in parts))
    if len(rows) != SPEED_BIN_EDGES.size - 1:
        raise ValidationError(f"expected {SPEED_BIN_EDGES.size - 1} bins, got {len(rows)}")
    edges = np.array([r[0] for r in rows] + [rows[-1][1]])
    for i in range(len(rows) - 1):
        if rows[i][1] != rows[i + 1][0]:
            raise ValidationError("bin edges are not contiguous")
    sidecar = str(path) + ".json"
    if not os.path.exists(sidecar):
        raise VolumeIOError(f"missing histogram sidecar: {sidecar}")
    with open(sidecar, "r", encoding="ascii") as fh:
        meta = json.load(fh)
    return HistogramPDF(
        edges=edges,
        densities=np.array([r[2] for r in rows]),
        underflow=int(meta["underflow"]),
        overflow=int(meta["overflow"]),
        n_samples=int(meta["n_samples"]),
    )


def write_flow_result(result: FlowResult, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(result.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_velocity_field(field: VelocityField, base_path) -> None:
    """Dump the three face-velocity volumes as little-endian float32 next
    to a JSON header describing their layout."""
    shapes = {}
    for name in ("u", "v", "w"):
        arr = getattr(field, name).astype("<f4")
        with open(f"{base_path}.{name}.raw", "wb") as fh:
            fh.write(arr.tobytes(order="C"))
        shapes[name] = list(arr.shape)
    nx, ny, nz = field.dims
    header = {
        "axis": field.axis,
        "dims": [nx, ny, nz],
        "dtype": "<f4",
        "face_shapes_zyx": shapes,
        "viscosity": field.viscosity,
        "voxel_size_m": field.voxel_size,
    }
    with open(f"{base_path}.json", "w", encoding="ascii") as fh:
        json.dump(header, fh, sort_keys=True, indent=2)
        fh.write("\n")
