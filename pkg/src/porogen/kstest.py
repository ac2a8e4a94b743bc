"""Two-sample Kolmogorov-Smirnov test on binned distributions.

Histograms are reduced to piecewise-linear CDFs over their bin edges; the
test statistic is the largest CDF gap over the union of both edge grids,
and the decision threshold is c(alpha) * sqrt((n + m) / (n m)) with
c(alpha) = sqrt(-ln(alpha / 2) / 2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import RangeError, ValidationError
from .stokes import HistogramPDF

__all__ = [
    "StepCDF",
    "KSResult",
    "ecdf_from_histogram",
    "ks_two_sample",
    "write_ks_result",
    "read_ks_result",
]

MASS_TOLERANCE = 1e-9
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True, eq=False)
class StepCDF:
    """Cumulative distribution sampled at bin edges.

    values[i] is the cumulative mass up to edges[i]; between edges the
    underlying histogram density is constant, so the CDF is linear there.
    """

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if edges.ndim != 1 or edges.size < 2:
            raise ValidationError("a CDF needs at least two edges (one bin)")
        if values.shape != edges.shape:
            raise ValidationError(
                f"cumulative values {values.shape} do not match edges {edges.shape}"
            )
        if not (np.diff(edges) > 0).all():
            raise ValidationError("edges must be strictly increasing")
        if (np.diff(values) < -MASS_TOLERANCE).any():
            raise ValidationError("cumulative values must be non-decreasing")
        if values[0] < -MASS_TOLERANCE or values[-1] > 1.0 + MASS_TOLERANCE:
            raise RangeError("cumulative values must stay within [0, 1]")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return self.edges.size - 1

    def at(self, x) -> np.ndarray:
        """CDF evaluated at arbitrary points (0 left of support, flat right)."""
        return np.interp(x, self.edges, self.values, left=0.0, right=self.values[-1])


@dataclass(frozen=True)
class KSResult:
    d_nm: float
    threshold: float
    alpha: float
    n: int
    m: int
    reject: bool

    def __post_init__(self):
        if not -MASS_TOLERANCE <= self.d_nm <= 1.0 + MASS_TOLERANCE:
            raise RangeError(f"statistic {self.d_nm} outside [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise RangeError(f"significance level {self.alpha} outside (0, 1)")
        if self.n < 1 or self.m < 1:
            raise RangeError("sample sizes must be at least 1")
        if self.reject != (self.d_nm > self.threshold):
            raise ValidationError("reject flag contradicts the decision rule")

    def to_dict(self, direction: Optional[str] = None) -> dict:
        return {
            "direction": direction,
            "d_nm": self.d_nm,
            "threshold": self.threshold,
            "alpha": self.alpha,
            "n": self.n,
            "m": self.m,
            "reject": self.reject,
        }


def critical_factor(alpha: float) -> float:
    """c(alpha) = sqrt(-ln(alpha / 2) / 2)."""
    if not 0.0 < alpha < 1.0:
        raise RangeError(f"significance level {alpha} outside (0, 1)")
    return math.sqrt(-0.5 * math.log(alpha / 2.0))


def ecdf_from_histogram(h: HistogramPDF) -> StepCDF:
    """Cumulative distribution of a normalized histogram.

    The input must carry unit mass with nothing outside the binned range;
    histograms with outliers go through renormalize_histogram first.
    """
    if h.underflow or h.overflow:
        raise ValidationError(
            "histogram has out-of-range samples; renormalize before building a CDF"
        )
    mass = h.densities * h.widths
    total = float(mass.sum())
    if abs(total - 1.0) > MASS_TOLERANCE:
        raise ValidationError(f"histogram mass {total!r} is not 1")
    values = np.concatenate(([0.0], np.cumsum(mass)))
    return StepCDF(h.edges, values)


def _as_cdf(f: Union[StepCDF, HistogramPDF]) -> StepCDF:
    return f if isinstance(f, StepCDF) else ecdf_from_histogram(f)


def ks_two_sample(
    f1: Union[StepCDF, HistogramPDF],
    f2: Union[StepCDF, HistogramPDF],
    n: Optional[int] = None,
    m: Optional[int] = None,
    alpha: float = DEFAULT_ALPHA,
) -> KSResult:
    """Largest CDF gap between two binned distributions, with the decision.

    Sample sizes default to the bin counts, the only reading that makes a
    256-bin pair reproduce the 0.12 threshold at alpha = 0.05; callers with
    true sample counts should pass them. Rejection uses strict inequality.
    """
    c1, c2 = _as_cdf(f1), _as_cdf(f2)
    n = c1.n_bins if n is None else int(n)
    m = c2.n_bins if m is None else int(m)
    if n < 1 or m < 1:
        raise RangeError("sample sizes must be at least 1")
    grid = np.union1d(c1.edges, c2.edges)
    if grid.size == 0:
        raise ValidationError("empty support")
    # both CDFs are linear between consecutive union edges, so their gap
    # attains its maximum at the edges themselves
    d = float(np.abs(c1.at(grid) - c2.at(grid)).max())
    threshold = critical_factor(alpha) * math.sqrt((n + m) / (n * m))
    return KSResult(d, threshold, alpha, n, m, d > threshold)


def write_ks_result(result: KSResult, path, direction: Optional[str] = None) -> None:
    Path(path).write_text(
        json.dumps(result.to_dict(direction), indent=2, sort_keys=True) + "\n"
    )


def read_ks_result(path) -> dict:
    return json.loads(Path(path).read_text())
