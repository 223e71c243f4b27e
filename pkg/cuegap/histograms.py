"""
Binned empirical distributions and their comparison with tabulated analytic curves.

Histograms are normalized by the count that landed inside the binning range; the number of
values outside is kept alongside so it can be reported.
"""

import json
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.special import roots_legendre

from cuegap.grids import DistributionGrid, format_float, write_csv

logger = getLogger(__name__)

Z_LIMIT = 3.0
BIN_QUADRATURE_ORDER = 6

# Pr histograms are taken in r~ = min(r, 1/r) on [0, 1], where the density is 2 P_r(r);
# Pr_full bins r itself
HISTOGRAM_AXIS_NAMES = {"Pnn": ["t"], "Pc": ["a", "b"], "Pr": ["r_tilde"], "Pr_full": ["r"]}
ANALYTIC_KIND = {"Pnn": "Pnn", "Pc": "Pc", "Pr": "Pr", "Pr_full": "Pr"}
DEFAULT_BINS = {"Pnn": 40, "Pc": 20, "Pr": 40, "Pr_full": 80}
DEFAULT_SPACING_RANGE = 4.0


def default_edges(kind: str, bins: Optional[int] = None,
                  spacing_max: float = DEFAULT_SPACING_RANGE) -> List[np.ndarray]:
    if kind not in DEFAULT_BINS:
        raise ValueError(f"Unknown distribution kind {kind!r}")
    bins = bins or DEFAULT_BINS[kind]
    if bins < 1:
        raise ValueError(f"Need at least one bin, got {bins}")
    if kind == "Pnn":
        return [np.linspace(0.0, spacing_max, bins + 1)]
    if kind == "Pc":
        edges = np.linspace(0.0, spacing_max, bins + 1)
        return [edges, edges.copy()]
    if kind == "Pr":
        return [np.linspace(0.0, 1.0, bins + 1)]
    return [np.linspace(0.0, spacing_max, bins + 1)]


@dataclass
class Histogram:
    kind: str
    edges: List[np.ndarray]
    counts: np.ndarray
    outside: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in HISTOGRAM_AXIS_NAMES:
            raise ValueError(f"Unknown distribution kind {self.kind!r}")
        if len(self.edges) != len(HISTOGRAM_AXIS_NAMES[self.kind]):
            names = HISTOGRAM_AXIS_NAMES[self.kind]
            raise ValueError(f"{self.kind} histogram needs {len(names)} axes")
        expected = tuple(len(e) - 1 for e in self.edges)
        if self.counts.shape != expected:
            raise ValueError(f"Counts of shape {self.counts.shape} don't match edges {expected}")

    @classmethod
    def empty(cls, kind: str, edges: Optional[Sequence[np.ndarray]] = None) -> "Histogram":
        edges = [np.asarray(e, dtype=float) for e in (edges or default_edges(kind))]
        return cls(kind, edges, np.zeros(tuple(len(e) - 1 for e in edges)))

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def fill(self, *values: np.ndarray) -> None:
        """Adds samples: one array for 1D histograms, two (a, b) arrays for Pc."""
        if len(values) != len(self.edges):
            raise ValueError(f"{self.kind} histogram takes {len(self.edges)} value arrays")
        if len(values) == 1:
            counts, _ = np.histogram(values[0], bins=self.edges[0])
        else:
            counts, _, _ = np.histogram2d(values[0], values[1], bins=self.edges)
        self.counts += counts
        self.outside += float(np.size(values[0]) - counts.sum())

    def merge(self, other: "Histogram") -> "Histogram":
        if not self.same_binning(other):
            raise ValueError(f"Can't merge {self.kind} histograms with different binning")
        return Histogram(self.kind, self.edges, self.counts + other.counts,
                         self.outside + other.outside, dict(self.metadata))

    def same_binning(self, other: "Histogram") -> bool:
        return (
            self.kind == other.kind
            and len(self.edges) == len(other.edges)
            and all(len(a) == len(b) and np.array_equal(a, b)
                    for a, b in zip(self.edges, other.edges))
        )

    def bin_volumes(self) -> np.ndarray:
        widths = [np.diff(e) for e in self.edges]
        if len(widths) == 1:
            return widths[0]
        return np.outer(widths[0], widths[1])

    def centers(self) -> List[np.ndarray]:
        return [(e[1:] + e[:-1]) / 2 for e in self.edges]

    def density(self) -> np.ndarray:
        total = self.total
        if total == 0:
            return np.zeros_like(self.counts)
        return self.counts / (total * self.bin_volumes())

    def stderr(self) -> np.ndarray:
        """Multinomial standard error of the density; empty bins get the error of one count."""
        total = self.total
        if total == 0:
            return np.full_like(self.counts, np.inf)
        p = np.maximum(self.counts, 1.0) / total
        return np.sqrt(p * (1 - p) / total) / self.bin_volumes()

    def columns(self) -> List[str]:
        return HISTOGRAM_AXIS_NAMES[self.kind] + ["count", "density", "stderr"]

    def rows(self):
        centers = self.centers()
        density = self.density()
        error = self.stderr()
        if len(centers) == 1:
            for i, x in enumerate(centers[0]):
                yield (x, self.counts[i], density[i], error[i])
        else:
            for i, a in enumerate(centers[0]):
                for j, b in enumerate(centers[1]):
                    yield (a, b, self.counts[i, j], density[i, j], error[i, j])

    def header(self) -> Dict[str, Any]:
        return {"kind": self.kind, "total": self.total, "outside": self.outside, **self.metadata}

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.header(),
            "edges": {name: e.tolist()
                      for name, e in zip(HISTOGRAM_AXIS_NAMES[self.kind], self.edges)},
            "counts": self.counts.tolist(),
            "density": self.density().tolist(),
            "stderr": self.stderr().tolist(),
        }


def write_histogram(stream: TextIO, histogram: Histogram, fmt: str,
                    header: Optional[Dict[str, Any]] = None) -> None:
    full_header = dict(header or {})
    full_header.update(histogram.header())
    if fmt == "csv":
        write_csv(stream, histogram.columns(), histogram.rows(), full_header)
    elif fmt == "json":
        content = histogram.to_json_dict()
        content["metadata"] = full_header
        json.dump(content, stream, indent=2, sort_keys=True, default=str)
        stream.write("\n")
    else:
        raise ValueError(f"Unknown output format {fmt!r}")


def _padded_axis(axis: np.ndarray, values: np.ndarray, axis_index: int):
    """Prepends the origin, where every tabulated distribution vanishes."""
    if axis[0] <= 0:
        return axis, values
    pad_shape = list(values.shape)
    pad_shape[axis_index] = 1
    return (np.concatenate([[0.0], axis]),
            np.concatenate([np.zeros(pad_shape), values], axis=axis_index))


def bin_averages(analytic: DistributionGrid, edges: Sequence[np.ndarray],
                 histogram_kind: Optional[str] = None) -> np.ndarray:
    """Analytic density averaged over each bin, from a cubic spline of the tabulated values.

    For Pr histograms the bins are in r~ and the averaged density is 2 P_r(r~).
    """
    histogram_kind = histogram_kind or analytic.kind
    if ANALYTIC_KIND.get(histogram_kind) != analytic.kind:
        raise ValueError(f"Can't bin a {analytic.kind} curve like a {histogram_kind} histogram")
    if len(edges) != len(analytic.axes):
        raise ValueError("Histogram and grid have different dimensions")
    for axis, e in zip(analytic.axes, edges):
        if e[0] < 0 or e[-1] > axis[-1] + 1e-12:
            raise ValueError(
                f"Bins [{e[0]:g}, {e[-1]:g}] reach beyond the tabulated range [0, {axis[-1]:g}]"
            )

    nodes, weights = roots_legendre(BIN_QUADRATURE_ORDER)
    weights = weights / 2

    def bin_points(e: np.ndarray) -> np.ndarray:
        mid = (e[1:] + e[:-1]) / 2
        half = np.diff(e) / 2
        return mid[:, None] + half[:, None] * nodes[None, :]

    if len(edges) == 1:
        axis, values = _padded_axis(analytic.axes[0], analytic.values, 0)
        spline = CubicSpline(axis, values)
        points = bin_points(edges[0])
        result = spline(points) @ weights
    else:
        axis_a, values = _padded_axis(analytic.axes[0], analytic.values, 0)
        axis_b, values = _padded_axis(analytic.axes[1], values, 1)
        spline = RectBivariateSpline(axis_a, axis_b, values)
        points_a = bin_points(edges[0])
        points_b = bin_points(edges[1])
        result = np.empty((len(edges[0]) - 1, len(edges[1]) - 1))
        for i, pa in enumerate(points_a):
            for j, pb in enumerate(points_b):
                result[i, j] = weights @ spline(pa, pb) @ weights

    if histogram_kind == "Pr":
        result = 2 * result
    return result


def analytic_histogram(analytic: DistributionGrid, edges: Sequence[np.ndarray],
                       total: float) -> Histogram:
    """Expected counts of ``total`` samples binned like an empirical histogram."""
    edges = [np.asarray(e, dtype=float) for e in edges]
    histogram = Histogram.empty(analytic.kind, edges)
    expected = bin_averages(analytic, edges, analytic.kind)
    histogram.counts = expected * histogram.bin_volumes() * total
    histogram.metadata["analytic_N"] = analytic.n_label
    return histogram


@dataclass(frozen=True)
class HistogramComparison:
    kind: str
    z: np.ndarray
    analytic: np.ndarray
    empirical: np.ndarray
    stderr: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z)))

    @property
    def fraction_beyond(self) -> float:
        return float(np.mean(np.abs(self.z) > Z_LIMIT))

    def summary(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "bins": int(self.z.size),
            "max_abs_z": self.max_abs_z,
            "fraction_beyond_3_sigma": self.fraction_beyond,
        }

    def report_lines(self) -> List[str]:
        return [
            ",".join(format_float(float(x)) for x in row)
            for row in zip(self.analytic.ravel(), self.empirical.ravel(),
                           self.stderr.ravel(), self.z.ravel())
        ]


def compare_hist(analytic: DistributionGrid, empirical: Histogram) -> HistogramComparison:
    """Per-bin z = (empirical - analytic bin average) / stderr."""
    expected = bin_averages(analytic, empirical.edges, empirical.kind)
    # conditioned on the binning range, like the empirical density
    in_range = float(np.sum(expected * empirical.bin_volumes()))
    if in_range <= 0:
        raise ValueError(f"Analytic {analytic.kind} has no mass inside the binning range")
    expected = expected / in_range
    observed = empirical.density()
    error = empirical.stderr()
    z = (observed - expected) / error
    comparison = HistogramComparison(empirical.kind, z, expected, observed, error)
    logger.debug("%s comparison: max |z| %.3g, fraction beyond %.1f sigma %.4f",
                 empirical.kind, comparison.max_abs_z, Z_LIMIT, comparison.fraction_beyond)
    return comparison
