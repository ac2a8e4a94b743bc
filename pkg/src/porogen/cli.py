"""Command-line surface: segmentation, synthesis, statistics, flow, reports.

Every command reads/writes machine-friendly artifacts (raw volumes with JSON
sidecars, CSV tables, JSON summaries) and is deterministic given --seed.
Failures exit nonzero with {"error": {"type", "message"}} on stderr.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from .errors import PorogenError, ShapeError
from .kstest import ks_two_sample, write_ks_result
from .minkowski import threshold_sweep, write_sweep
from .network import (
    dump_activations,
    discriminator_forward,
    generator_forward,
    interpolate_latent,
    latent_extent_for,
    sample_noise,
    synthesize,
)
from .report import (
    build_validation_report,
    dump_report,
    image_seed_sequences,
    load_input_volume,
    report_json_bytes,
)
from .stokes import (
    permeability,
    read_histogram,
    renormalize_histogram,
    stokes_solve,
    velocity_histogram,
    write_flow_result,
    write_histogram,
    write_velocity_field,
)
from .twopoint import s2_directional, s2_radial, write_curve
from .volume import (
    DEFAULT_VOXEL_SIZE,
    otsu_threshold,
    save_volume,
    segment,
    subdomain_corners,
    GrayImage3D,
    write_sidecar,
)
from .weights import load_weights


def emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def in_options(f):
    f = click.option("--in", "in_path", required=True, help="Raw volume file.")(f)
    f = click.option("--dims", nargs=3, type=int, default=None,
                     help="nx ny nz (default: sidecar).")(f)
    f = click.option("--voxel-size", type=float, default=None,
                     help="Voxel edge in meters (default: sidecar, else 2.78e-5).")(f)
    f = click.option("--pore", type=click.Choice(["bright", "dark"]), default=None,
                     help="Which phase is pore (default: sidecar, else dark).")(f)
    return f


def load_gray(in_path, dims, voxel_size, pore) -> GrayImage3D:
    return load_input_volume(in_path, dims or None, voxel_size, pore)


def segment_input(in_path, dims, voxel_size, pore, threshold):
    gray = load_gray(in_path, dims, voxel_size, pore)
    t = otsu_threshold(gray) if threshold is None else int(threshold)
    return segment(gray, t), t


def save_with_sidecar(img, path) -> None:
    save_volume(img, path)
    write_sidecar(path, img.dims, img.voxel_size, pore_polarity="bright")


def central_crop(data: np.ndarray, edge: int) -> np.ndarray:
    if min(data.shape) < edge:
        raise ShapeError(f"cannot crop {data.shape} down to {edge}^3")
    off = [(s - edge) // 2 for s in data.shape]
    return np.ascontiguousarray(
        data[off[0]:off[0] + edge, off[1]:off[1] + edge, off[2]:off[2] + edge]
    )


@click.group()
def cli():
    """Porous-media reconstruction and validation toolkit."""


@cli.command("segment")
@in_options
@click.option("--threshold", type=int, default=None, help="Gray cut (default: Otsu).")
@click.option("--out", required=True, help="Output raw volume (pore = 1).")
def segment_cmd(in_path, dims, voxel_size, pore, threshold, out):
    """Threshold a gray volume into a binary pore/grain image."""
    seg, t = segment_input(in_path, dims, voxel_size, pore, threshold)
    save_with_sidecar(seg, out)
    emit({"out": str(out), "threshold": t, "porosity": seg.porosity()})


@cli.command("subdomains")
@in_options
@click.option("--size", type=int, required=True, help="Cube edge in voxels.")
@click.option("--count", type=int, required=True)
@click.option("--mode", type=click.Choice(["nonoverlap-grid", "random-nonoverlap"]),
              default="nonoverlap-grid", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True, help="Output directory.")
def subdomains_cmd(in_path, dims, voxel_size, pore, size, count, mode, seed, out_dir):
    """Cut pairwise-disjoint cubic sub-volumes out of a large volume."""
    gray = load_gray(in_path, dims, voxel_size, pore)
    corners = subdomain_corners(gray.dims, size, count, mode=mode, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, (x0, y0, z0) in enumerate(corners):
        block = np.ascontiguousarray(
            gray.data[z0:z0 + size, y0:y0 + size, x0:x0 + size]
        )
        path = out / f"sub_{i:03d}.raw"
        save_with_sidecar(GrayImage3D(block, gray.voxel_size), path)
        files.append(str(path))
    emit({"files": files, "corners": [list(c) for c in corners]})


@cli.command("s2")
@in_options
@click.option("--threshold", type=int, default=None, help="Gray cut (default: Otsu).")
@click.option("--direction", type=click.Choice(["x", "y", "z", "radial"]),
              default="radial", show_default=True)
@click.option("--r-max", type=int, default=None,
              help="Largest lag in voxels (default: min(64, shortest edge / 2)).")
@click.option("--out", required=True, help="Output CSV.")
def s2_cmd(in_path, dims, voxel_size, pore, threshold, direction, r_max, out):
    """Two-point probability curve of the pore phase."""
    seg, t = segment_input(in_path, dims, voxel_size, pore, threshold)
    if r_max is None:
        r_max = max(1, min(64, min(seg.dims) // 2))
    if direction == "radial":
        curve = s2_radial(seg, r_max)
    else:
        curve = s2_directional(seg, direction, r_max)
    write_curve(curve, out)
    emit({"out": str(out), "threshold": t, "porosity": float(curve.values[0])})


@cli.command("minkowski-sweep")
@in_options
@click.option("--out", required=True, help="Output CSV.")
def minkowski_sweep_cmd(in_path, dims, voxel_size, pore, out):
    """Minkowski densities at every gray threshold 0..255."""
    gray = load_gray(in_path, dims, voxel_size, pore)
    sweep = threshold_sweep(gray)
    write_sweep(sweep, out)
    emit({"out": str(out), "otsu": sweep.otsu})


@cli.command("generate")
@click.option("--weights", "weights_path", required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--size", type=int, default=None,
              help="Cubic output edge (synthesize-and-crop).")
@click.option("--latent", nargs=3, type=int, default=None,
              help="Latent spatial extents mx my mz (output edge 16m+48 per axis).")
@click.option("--crop", type=int, default=None,
              help="Central crop edge applied to --latent outputs.")
@click.option("--voxel-size", type=float, default=DEFAULT_VOXEL_SIZE, show_default=True)
@click.option("--out", "out_dir", required=True, help="Output directory.")
def generate_cmd(weights_path, seed, count, size, latent, crop, voxel_size, out_dir):
    """Sample gray volumes from generator weights."""
    if (size is None) == (not latent):
        raise click.UsageError("pass exactly one of --size or --latent")
    w = load_weights(weights_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    dims = None
    for i, child in enumerate(image_seed_sequences(seed, count)):
        if size is not None:
            img = synthesize(w, size, seed=child, voxel_size=voxel_size)
        else:
            mx, my, mz = latent
            z = sample_noise(w.d, mz, my, mx, seed=child)
            img = generator_forward(w, z, voxel_size=voxel_size)
            if crop is not None:
                img = GrayImage3D(central_crop(img.data, crop), voxel_size)
        path = out / f"gen_{i:03d}.raw"
        save_with_sidecar(img, path)
        files.append(str(path))
        dims = list(img.dims)
    emit({"files": files, "dims": dims})


@cli.command("interpolate")
@click.option("--weights", "weights_path", required=True)
@click.option("--seed-a", type=int, default=0, show_default=True)
@click.option("--seed-b", type=int, default=1, show_default=True)
@click.option("--steps", type=int, default=5, show_default=True)
@click.option("--size", type=int, default=64, show_default=True)
@click.option("--voxel-size", type=float, default=DEFAULT_VOXEL_SIZE, show_default=True)
@click.option("--out", "out_dir", required=True, help="Output directory.")
def interpolate_cmd(weights_path, seed_a, seed_b, steps, size, voxel_size, out_dir):
    """Volumes along a linear path between two latent points."""
    w = load_weights(weights_path)
    m = latent_extent_for(size)
    z_a = sample_noise(w.d, m, m, m, seed=seed_a)
    z_b = sample_noise(w.d, m, m, m, seed=seed_b)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, z in enumerate(interpolate_latent(z_a, z_b, steps)):
        img = generator_forward(w, z, voxel_size=voxel_size)
        if img.data.shape[0] != size:
            img = GrayImage3D(central_crop(img.data, size), voxel_size)
        path = out / f"interp_{i:03d}.raw"
        save_with_sidecar(img, path)
        files.append(str(path))
    betas = [1.0 - i / (steps - 1) for i in range(steps)]
    emit({"files": files, "betas": betas})


@cli.command("score")
@click.option("--weights", "weights_path", required=True,
              help="Discriminator weights.")
@in_options
@click.option("--out", default=None, help="Optional JSON output file.")
def score_cmd(weights_path, in_path, dims, voxel_size, pore, out):
    """Realness score of a volume (mean over disjoint 64-cube tiles)."""
    w = load_weights(weights_path)
    gray = load_gray(in_path, dims, voxel_size, pore)
    score, tiles = discriminator_forward(w, gray)
    payload = {
        "score": score,
        "tile_grid": list(tiles.shape),
        "tile_scores": tiles.tolist(),
    }
    if out:
        Path(out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        payload["out"] = str(out)
    emit(payload)


@cli.command("activations")
@click.option("--weights", "weights_path", required=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Latent seed (generator weights).")
@click.option("--in", "in_path", default=None,
              help="Input volume (discriminator weights).")
@click.option("--dims", nargs=3, type=int, default=None)
@click.option("--voxel-size", type=float, default=None)
@click.option("--pore", type=click.Choice(["bright", "dark"]), default=None)
@click.option("--out", "out_dir", required=True, help="Output directory.")
def activations_cmd(weights_path, seed, in_path, dims, voxel_size, pore, out_dir):
    """Dump per-layer activation tensors as float32 raw files."""
    w = load_weights(weights_path)
    if w.component == "generator":
        x = sample_noise(w.d, 1, 1, 1, seed=seed)
    else:
        if in_path is None:
            raise click.UsageError("discriminator activations need --in")
        x = load_gray(in_path, dims, voxel_size, pore)
    acts = dump_activations(w, x)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for i, act in enumerate(acts):
        path = out / f"act_{i:02d}.raw"
        act.astype("<f4").tofile(path)
        manifest.append({"file": str(path), "shape": list(act.shape)})
    (out / "activations.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    emit({"layers": manifest})


@cli.command("flow")
@in_options
@click.option("--threshold", type=int, default=None, help="Gray cut (default: Otsu).")
@click.option("--axis", type=click.Choice(["x", "y", "z"]), default="x",
              show_default=True)
@click.option("--save-field", is_flag=True, help="Also dump the velocity field.")
@click.option("--out", required=True, help="Output JSON (flow summary).")
def flow_cmd(in_path, dims, voxel_size, pore, threshold, axis, save_field, out):
    """Pressure-driven Stokes solve and permeability along one axis."""
    seg, t = segment_input(in_path, dims, voxel_size, pore, threshold)
    field = stokes_solve(seg, axis)
    result = permeability(field)
    write_flow_result(result, out)
    payload = result.to_dict()
    payload.update({"out": str(out), "threshold": t, "iterations": field.iterations})
    if save_field:
        base = str(Path(out).with_suffix(""))
        write_velocity_field(field, base)
        payload["field"] = base
    emit(payload)


@cli.command("vhist")
@in_options
@click.option("--threshold", type=int, default=None, help="Gray cut (default: Otsu).")
@click.option("--axis", type=click.Choice(["x", "y", "z"]), default="x",
              show_default=True)
@click.option("--out", required=True, help="Output CSV (256 log bins).")
def vhist_cmd(in_path, dims, voxel_size, pore, threshold, axis, out):
    """Normalized-speed histogram of the Stokes velocity field."""
    seg, t = segment_input(in_path, dims, voxel_size, pore, threshold)
    field = stokes_solve(seg, axis)
    hist = velocity_histogram(field)
    write_histogram(hist, out)
    emit({
        "out": str(out),
        "threshold": t,
        "axis": axis,
        "n_samples": hist.n_samples,
        "underflow": hist.underflow,
        "overflow": hist.overflow,
    })


@cli.command("ks")
@click.option("--a", "path_a", required=True, help="First histogram CSV.")
@click.option("--b", "path_b", required=True, help="Second histogram CSV.")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--n", type=int, default=None, help="Sample size of A (default: bins).")
@click.option("--m", type=int, default=None, help="Sample size of B (default: bins).")
@click.option("--direction", default=None, help="Label recorded in the output.")
@click.option("--out", default=None, help="Optional JSON output file.")
def ks_cmd(path_a, path_b, alpha, n, m, direction, out):
    """Two-sample Kolmogorov-Smirnov test between histogram files."""
    hists = [read_histogram(path_a), read_histogram(path_b)]
    cdfs = [renormalize_histogram(h) if h.underflow or h.overflow else h
            for h in hists]
    res = ks_two_sample(cdfs[0], cdfs[1], n=n, m=m, alpha=alpha)
    if out:
        write_ks_result(res, out, direction=direction)
    emit(res.to_dict(direction=direction))


@cli.command("validate")
@click.option("--real", "real_path", required=True, help="Reference raw volume.")
@click.option("--dims", nargs=3, type=int, default=None)
@click.option("--voxel-size", type=float, default=None)
@click.option("--pore", type=click.Choice(["bright", "dark"]), default=None)
@click.option("--weights", "weights_path", required=True, help="Generator weights.")
@click.option("--count", type=int, required=True, help="Images per ensemble.")
@click.option("--size", type=int, required=True, help="Image edge in voxels.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threshold", type=int, default=None,
              help="Shared gray cut (default: per-image Otsu).")
@click.option("--axes", default="x,y,z", show_default=True,
              help="Comma-separated flow axes.")
@click.option("--r-max", type=int, default=None)
@click.option("--mode", type=click.Choice(["nonoverlap-grid", "random-nonoverlap"]),
              default="nonoverlap-grid", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out", default=None, help="Report path (default: stdout).")
def validate_cmd(real_path, dims, voxel_size, pore, weights_path, count, size,
                 seed, threshold, axes, r_max, mode, alpha, jobs, out):
    """Full real-versus-generated comparison report."""
    axis_list = tuple(a.strip() for a in axes.split(",") if a.strip())
    for a in axis_list:
        if a not in ("x", "y", "z"):
            raise click.UsageError(f"bad axis {a!r} in --axes")
    real = load_gray(real_path, dims, voxel_size, pore)
    w = load_weights(weights_path)
    report = build_validation_report(
        real, w, count, size, seed=seed, threshold=threshold, axes=axis_list,
        r_max=r_max, mode=mode, alpha=alpha, jobs=jobs,
    )
    if out:
        dump_report(report, out)
        emit({"out": str(out), "report_version": report["report_version"]})
    else:
        sys.stdout.write(report_json_bytes(report).decode())


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        print(
            json.dumps(
                {"error": {"type": "UsageError", "message": exc.format_message()}},
                sort_keys=True,
            ),
            file=sys.stderr,
        )
        sys.exit(exc.exit_code or 2)
    except PorogenError as exc:
        print(
            json.dumps(
                {"error": {"type": type(exc).__name__, "message": str(exc)}},
                sort_keys=True,
            ),
            file=sys.stderr,
        )
        sys.exit(1)


if __name__ == "__main__":
    main()
