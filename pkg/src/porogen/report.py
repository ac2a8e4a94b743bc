"""Validation pipeline: per-image analysis, ensembles, and the JSON report.

Pure functions throughout; the command-line layer is a thin flag parser on
top. Reports are deterministic byte for byte given a seed: every random
choice flows from one SeedSequence, JSON keys are sorted, and no timestamps
or environment details are recorded.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import PorogenError, ValidationError
from .kstest import ecdf_from_histogram, ks_two_sample
from .minkowski import minkowski_densities, threshold_sweep
from .network import synthesize
from .stokes import (
    SPEED_BIN_EDGES,
    ensemble_histogram,
    HistogramPDF,
    permeability,
    renormalize_histogram,
    stokes_solve,
    velocity_histogram,
)
from .twopoint import TwoPointFunction, ensemble_stats, s2_radial
from .volume import (
    DEFAULT_VOXEL_SIZE,
    GrayImage3D,
    extract_subdomains,
    invert_gray,
    load_volume,
    otsu_threshold,
    read_sidecar,
    segment,
)
from .weights import NetworkWeights, parameter_count

REPORT_VERSION = 1
DEFAULT_AXES = ("x", "y", "z")


def image_seed_sequences(seed: int, count: int) -> list:
    """One independent random stream per image index.

    Child i depends only on (seed, i), so a report built with N images and
    a standalone generation of image i from the same seed coincide.
    """
    return np.random.SeedSequence(seed).spawn(count)


def load_input_volume(
    path,
    dims: Optional[tuple] = None,
    voxel_size: Optional[float] = None,
    pore: Optional[str] = None,
) -> GrayImage3D:
    """Load a raw volume resolving dims / voxel size / polarity.

    Explicit arguments win; otherwise the JSON sidecar is consulted; the
    polarity fallback is "dark" (the usual convention for attenuation
    images, where void space is the low-intensity phase). The returned
    volume is always pore-bright so every downstream threshold means
    "pore = value > t".
    """
    meta = {}
    try:
        meta = read_sidecar(path)
    except PorogenError:
        pass
    if dims is None:
        dims = meta.get("dims")
    if dims is None:
        raise ValidationError(f"dims unknown for {path}: pass dims or write a sidecar")
    if voxel_size is None:
        voxel_size = meta.get("voxel_size_m", DEFAULT_VOXEL_SIZE)
    if pore is None:
        pore = meta.get("pore_polarity", "dark")
    if pore not in ("bright", "dark"):
        raise ValidationError(f"pore polarity must be bright or dark, got {pore!r}")
    img = load_volume(path, dims, voxel_size=voxel_size)
    return invert_gray(img) if pore == "dark" else img


def flow_record(seg, axis: str) -> tuple[dict, Optional[HistogramPDF]]:
    """Solve one direction; failures become data, not crashes."""
    try:
        field = stokes_solve(seg, axis)
        result = permeability(field)
        hist = renormalize_histogram(velocity_histogram(field))
    except PorogenError as exc:
        return {"error": {"type": type(exc).__name__, "message": str(exc)}}, None
    rec = result.to_dict()
    rec["iterations"] = field.iterations
    return rec, hist


def analyze_image(
    gray: GrayImage3D,
    threshold: Optional[int],
    r_max: int,
    axes: Sequence[str],
) -> tuple[dict, dict]:
    """Morphology and flow summary of one gray volume.

    Returns (record, vhists): the JSON-ready per-image record plus the
    renormalized speed histogram per axis (None where the solve failed),
    kept separate so the caller can build ensembles.
    """
    t = otsu_threshold(gray) if threshold is None else int(threshold)
    seg = segment(gray, t)
    s2 = s2_radial(seg, r_max)
    mink = minkowski_densities(seg)
    record = {
        "threshold": t,
        "porosity": seg.porosity(),
        "s2": [float(v) for v in s2.values],
        "minkowski": {"phi": mink.phi, "sv": mink.sv, "kv": mink.kv, "chiv": mink.chiv},
        "flow": {},
    }
    vhists = {}
    for axis in axes:
        rec, hist = flow_record(seg, axis)
        record["flow"][axis] = rec
        vhists[axis] = hist
    return record, vhists


def _real_task(args) -> tuple[dict, dict]:
    data, voxel_size, threshold, r_max, axes = args
    return analyze_image(GrayImage3D(data, voxel_size), threshold, r_max, axes)


def _synth_task(args) -> tuple[dict, dict]:
    weights, child, size, voxel_size, threshold, r_max, axes = args
    img = synthesize(weights, size, seed=child, voxel_size=voxel_size)
    return analyze_image(img, threshold, r_max, axes)


def _run_tasks(worker, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))  # map keeps image order


def _ensemble_section(results, r_max: int, voxel_size: float, axes) -> dict:
    records = [rec for rec, _ in results]
    curves = [
        TwoPointFunction(np.arange(r_max + 1), rec["s2"], "radial", voxel_size)
        for rec in records
    ]
    s2 = ensemble_stats(curves)
    porosities = np.array([rec["porosity"] for rec in records])
    section = {
        "porosity": {
            "mean": float(porosities.mean()),
            "std": float(porosities.std()),
        },
        "s2": {
            "distances": [int(d) for d in s2.distances],
            "mean": [float(v) for v in s2.mean],
            "std": [float(v) for v in s2.std],
            "count": s2.count,
        },
        "vhist": {},
    }
    for axis in axes:
        hists = [vh[axis] for _, vh in results if vh[axis] is not None]
        if not hists:
            section["vhist"][axis] = {
                "error": {
                    "type": "NoFlowError",
                    "message": f"no image produced a velocity histogram along {axis}",
                }
            }
            continue
        ens = ensemble_histogram(hists)
        section["vhist"][axis] = {
            "mean_density": [float(v) for v in ens.mean],
            "std_density": [float(v) for v in ens.std],
            "count": ens.count,
            "n_samples": int(sum(h.n_samples for h in hists)),
        }
    return section


def _mean_histogram(section: dict) -> Optional[HistogramPDF]:
    if "error" in section:
        return None
    dens = np.array(section["mean_density"])
    total = float((dens * np.diff(SPEED_BIN_EDGES)).sum())
    if total <= 0.0:
        return None
    return HistogramPDF(
        SPEED_BIN_EDGES, dens / total, 0, 0, section["n_samples"]
    )


def ks_section(real_ens: dict, synth_ens: dict, axes, alpha: float) -> dict:
    out = {}
    for axis in axes:
        h_real = _mean_histogram(real_ens["vhist"][axis])
        h_synth = _mean_histogram(synth_ens["vhist"][axis])
        if h_real is None or h_synth is None:
            side = "real" if h_real is None else "synthetic"
            out[axis] = {
                "error": {
                    "type": "NoFlowError",
                    "message": f"no {side} velocity data along {axis}",
                }
            }
            continue
        res = ks_two_sample(
            ecdf_from_histogram(h_real), ecdf_from_histogram(h_synth), alpha=alpha
        )
        out[axis] = res.to_dict(direction=axis)
    return out


def sweep_record(gray: GrayImage3D) -> dict:
    sweep = threshold_sweep(gray)
    return {
        "otsu": sweep.otsu,
        "thresholds": [int(t) for t in sweep.thresholds],
        "phi": [float(v) for v in sweep.phi],
        "sv": [float(v) for v in sweep.sv],
        "kv": [float(v) for v in sweep.kv],
        "chiv": [float(v) for v in sweep.chiv],
    }


def build_validation_report(
    real: GrayImage3D,
    weights: NetworkWeights,
    count: int,
    size: int,
    seed: int = 0,
    threshold: Optional[int] = None,
    axes: Sequence[str] = DEFAULT_AXES,
    r_max: Optional[int] = None,
    mode: str = "nonoverlap-grid",
    alpha: float = 0.05,
    jobs: int = 1,
) -> dict:
    """Full real-versus-generated comparison as one JSON-ready dict."""
    axes = tuple(axes)
    if r_max is None:
        r_max = max(1, min(64, size // 2))
    subs = extract_subdomains(real, size, count, mode=mode, seed=seed)
    children = image_seed_sequences(seed, count)

    real_results = _run_tasks(
        _real_task,
        [(s.data, real.voxel_size, threshold, r_max, axes) for s in subs],
        jobs,
    )
    synth_results = _run_tasks(
        _synth_task,
        [
            (weights, child, size, real.voxel_size, threshold, r_max, axes)
            for child in children
        ],
        jobs,
    )

    real_ens = _ensemble_section(real_results, r_max, real.voxel_size, axes)
    synth_ens = _ensemble_section(synth_results, r_max, real.voxel_size, axes)
    return {
        "report_version": REPORT_VERSION,
        "metadata": {
            "seed": int(seed),
            "count": int(count),
            "size": int(size),
            "axes": list(axes),
            "r_max": int(r_max),
            "alpha": float(alpha),
            "threshold": None if threshold is None else int(threshold),
            "mode": mode,
            "voxel_size_m": float(real.voxel_size),
            "real_dims": list(real.dims),
            "generator": {
                "d": weights.d,
                "parameters": parameter_count(weights),
            },
            "speed_bin_edges": [float(e) for e in SPEED_BIN_EDGES],
        },
        "real": {
            "images": [rec for rec, _ in real_results],
            "ensemble": real_ens,
            "minkowski_sweep": sweep_record(subs[0]),
        },
        "synthetic": {
            "images": [rec for rec, _ in synth_results],
            "ensemble": synth_ens,
            # children[0] reseeds the same stream the first worker used,
            # so the swept volume is the one reported as image 0
            "minkowski_sweep": sweep_record(
                synthesize(weights, size, seed=children[0], voxel_size=real.voxel_size)
            ),
        },
        "ks": ks_section(real_ens, synth_ens, axes, alpha),
    }


def report_json_bytes(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()


def dump_report(report: dict, path) -> None:
    Path(path).write_bytes(report_json_bytes(report))
