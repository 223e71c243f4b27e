"""
Statistics of Riemann zeta zero tables: ingestion, unfolding, gap ratios and adjacent-spacing
pairs per window, and their comparison with the sine-kernel limit and CUE at N = N_e(T).
"""

import decimal
import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from logging import getLogger
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from cuegap.common import DataError, NumericalError
from cuegap.grids import DistributionGrid
from cuegap.histograms import Histogram, bin_averages, default_edges
from cuegap.kernels import sine_kernel_expansion
from cuegap.parallel import pmap
from cuegap.sampling import MeanAccumulator, sequential_triples
from cuegap.util import file_sha256, open_text

logger = getLogger(__name__)

LAMBDA = 1.57315107134
Q = 2.315846384
SINE_MEAN_RATIO = 0.5997504209

FORMATS = ("plain_lines", "offset_deltas")
MIN_WINDOW_LENGTH = 1000
RATIO_BLOCK = 100
DECIMAL_PRECISION = 80

_OFFSET_HEADER = re.compile(r"^offset\s*:?\s*(\S+)$", re.IGNORECASE)


@dataclass(frozen=True)
class ArithmeticConstants:
    Lambda: float = LAMBDA
    Q: float = Q

    def to_json_dict(self) -> Dict[str, float]:
        return {"Lambda": self.Lambda, "Q": self.Q}


CONSTANTS = ArithmeticConstants()


def rho(height: Any) -> Any:
    """Asymptotic density of zeros at height T."""
    return np.log(np.asarray(height, dtype=float) / (2 * math.pi)) / (2 * math.pi)


def n_effective(height: float) -> float:
    if height <= 2 * math.pi:
        raise ValueError(f"N_e needs a height above 2 pi, got {height}")
    return math.log(height / (2 * math.pi)) / math.sqrt(12 * CONSTANTS.Lambda)


def krz_kernel(delta: Any, n_e: float, resummed: bool = False) -> Any:
    """Riemann-zero kernel at separation delta (mean spacing pi), through the N_e^-3 term.

    The resummed form moves the N_e^-3 term into the frequency of the N_e^-2 one.
    """
    if n_e <= 0:
        raise ValueError(f"N_e must be positive, got {n_e}")
    delta = np.asarray(delta, dtype=float)
    shift = CONSTANTS.Q / (math.sqrt(3) * CONSTANTS.Lambda**1.5)
    sine = sine_kernel_expansion(delta)
    if resummed:
        alpha_bar = 1 + shift / n_e
        return sine + delta * np.sin(alpha_bar * delta) / (6 * math.pi * n_e**2)
    return (
        sine
        + delta * np.sin(delta) / (6 * math.pi * n_e**2)
        + shift * delta**2 * np.cos(delta) / (6 * math.pi * n_e**3)
    )


@dataclass(frozen=True)
class Zero:
    line_no: int
    ordinate: Decimal
    index: Optional[int] = None


def _parse_decimal(token: str, path: str, line_no: int) -> Decimal:
    try:
        value = Decimal(token)
    except decimal.InvalidOperation:
        raise DataError(f"Malformed ordinate {token!r}", path, line_no)
    if not value.is_finite():
        raise DataError(f"Non-finite ordinate {token!r}", path, line_no)
    return value


@dataclass
class ZeroDataset:
    """Lazily read table of ordinates; every iteration is a fresh streaming pass."""

    path: str
    format: str = "plain_lines"
    skip: int = 0
    limit: Optional[int] = None
    count: Optional[int] = None
    first_index: Optional[int] = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValueError(f"Unknown zero table format {self.format!r}")
        if self.skip < 0 or (self.limit is not None and self.limit < 0):
            raise ValueError("skip and limit must be non-negative")

    def _lines(self) -> Iterator[Tuple[int, str]]:
        line_no = 0
        with open_text(self.path) as fp:
            try:
                for line_no, line in enumerate(fp, 1):
                    yield line_no, line.strip()
            except UnicodeDecodeError as e:
                raise DataError(f"Not an ASCII table ({e.reason})", self.path, line_no + 1)
            except (OSError, EOFError) as e:
                raise DataError(f"Can't read table ({e})", self.path, line_no + 1)

    def _raw_zeros(self) -> Iterator[Zero]:
        offset: Optional[Decimal] = None
        with decimal.localcontext() as ctx:
            ctx.prec = DECIMAL_PRECISION
            for line_no, line in self._lines():
                if not line or line.startswith("#"):
                    continue
                if self.format == "offset_deltas" and offset is None:
                    match = _OFFSET_HEADER.match(line)
                    if match is None:
                        raise DataError("Expected an 'offset <decimal>' header", self.path, line_no)
                    offset = _parse_decimal(match.group(1), self.path, line_no)
                    continue

                tokens = line.split()
                index = None
                if len(tokens) == 2:
                    try:
                        index = int(tokens[0])
                    except ValueError:
                        raise DataError(f"Malformed zero index {tokens[0]!r}", self.path, line_no)
                elif len(tokens) != 1:
                    raise DataError("Expected an ordinate, optionally after its index",
                                    self.path, line_no)
                value = _parse_decimal(tokens[-1], self.path, line_no)
                if offset is not None:
                    value = offset + value
                yield Zero(line_no, value, index)

    def __iter__(self) -> Iterator[Zero]:
        previous: Optional[Zero] = None
        taken = 0
        seen = 0
        for zero in self._raw_zeros():
            if previous is not None and zero.ordinate <= previous.ordinate:
                raise DataError(
                    f"Ordinates not strictly increasing ({zero.ordinate} after "
                    f"{previous.ordinate})",
                    self.path,
                    zero.line_no,
                )
            previous = zero
            seen += 1
            if seen <= self.skip:
                continue
            if self.limit is not None and taken >= self.limit:
                break
            if taken == 0 and zero.index is not None:
                self.first_index = zero.index
            taken += 1
            yield zero
        self.count = taken

    def spacings(self) -> Iterator[Tuple[int, Decimal, float]]:
        """(line number, left ordinate, spacing); differences are taken in decimal."""
        previous: Optional[Zero] = None
        with decimal.localcontext() as ctx:
            ctx.prec = DECIMAL_PRECISION
            for zero in self:
                if previous is not None:
                    yield zero.line_no, previous.ordinate, float(zero.ordinate - previous.ordinate)
                previous = zero


def ingest_zeros(
    path: str, format: str = "plain_lines", skip: int = 0, limit: Optional[int] = None
) -> ZeroDataset:
    dataset = ZeroDataset(path, format, skip, limit)
    # fail early on unreadable files
    open_text(path).close()
    return dataset


@dataclass(frozen=True)
class DatasetSummary:
    count: int
    first: str
    last: str
    first_index: Optional[int]
    min_spacing: float
    max_spacing: float


def scan_dataset(dataset: ZeroDataset) -> DatasetSummary:
    """One full pass checking the table, with its extent."""
    first = last = None
    min_spacing, max_spacing = math.inf, 0.0
    for zero in dataset:
        if first is None:
            first = zero.ordinate
        elif last is not None:
            with decimal.localcontext() as ctx:
                ctx.prec = DECIMAL_PRECISION
                spacing = float(zero.ordinate - last)
            min_spacing = min(min_spacing, spacing)
            max_spacing = max(max_spacing, spacing)
        last = zero.ordinate
    if first is None:
        raise DataError("No ordinates in the selected range", dataset.path)
    return DatasetSummary(dataset.count or 0, str(first), str(last), dataset.first_index,
                          min_spacing, max_spacing)


@dataclass(frozen=True)
class Window:
    start: int
    length: int
    height: float
    n_effective: float

    def __post_init__(self):
        if self.n_effective <= 0:
            raise ValueError(f"Window at height {self.height} has non-positive N_e")

    @classmethod
    def at_height(cls, start: int, length: int, height: float) -> "Window":
        return cls(start, length, height, n_effective(height))

    def to_json_dict(self) -> Dict[str, Any]:
        return {"start": self.start, "length": self.length, "height": self.height,
                "N_e": self.n_effective}


@dataclass(frozen=True)
class WindowData:
    window: Window
    heights: np.ndarray  # left ordinate of every spacing
    spacings: np.ndarray


def read_windows(
    dataset: ZeroDataset, ranges: Sequence[Tuple[int, int]]
) -> List[WindowData]:
    """Collects the spacings [start, start + length) of every range in a single pass."""
    for start, length in ranges:
        if start < 0 or length < 2:
            raise ValueError(f"Bad window {start}:{length}")
    if not ranges:
        return []

    end = max(start + length for start, length in ranges)
    buffers: List[Tuple[List[float], List[float]]] = [([], []) for _ in ranges]
    seen = 0
    for i, (_line_no, ordinate, spacing) in enumerate(dataset.spacings()):
        if i >= end:
            break
        seen = i + 1
        for (start, length), (heights, spacings) in zip(ranges, buffers):
            if start <= i < start + length:
                heights.append(float(ordinate))
                spacings.append(spacing)

    result = []
    for (start, length), (heights, spacings) in zip(ranges, buffers):
        if len(spacings) < length:
            raise ValueError(
                f"Window {start}:{length} is out of range ({seen} spacings available)"
            )
        height = heights[length // 2]
        result.append(WindowData(Window.at_height(start, length, height),
                                 np.array(heights), np.array(spacings)))
        logger.info("Read window %d:%d at T=%.6g (N_e=%.6g)", start, length, height,
                    result[-1].window.n_effective)
    return result


def unfold_spacings(data: WindowData) -> np.ndarray:
    return rho(data.heights) * data.spacings


@dataclass
class GapRatioStats:
    window: Window
    ratio_tilde: Histogram
    ratio: Histogram
    mean: MeanAccumulator = field(default_factory=MeanAccumulator)

    @property
    def mean_ratio_tilde(self) -> float:
        return self.mean.mean

    @property
    def relative_deviation(self) -> float:
        return (self.mean.mean - SINE_MEAN_RATIO) / SINE_MEAN_RATIO

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            **self.window.to_json_dict(),
            "ratios": int(self.ratio_tilde.total + self.ratio_tilde.outside),
            "mean_ratio_tilde": self.mean.mean,
            "stderr": self.mean.stderr,
            "relative_deviation": self.relative_deviation,
        }


def gap_ratio_stats(
    data: WindowData, edges: Optional[Dict[str, List[np.ndarray]]] = None
) -> GapRatioStats:
    """r from raw consecutive spacings; the mean error comes from blocks of ratios."""
    if data.window.length < MIN_WINDOW_LENGTH:
        raise ValueError(
            f"Gap-ratio statistics need at least {MIN_WINDOW_LENGTH} spacings per window"
        )
    if np.any(data.spacings <= 0):
        raise DataError(f"Zero spacing in window {data.window.start}:{data.window.length}")

    edges = edges or {}
    triples = sequential_triples(data.spacings)
    stats = GapRatioStats(
        data.window,
        Histogram.empty("Pr", edges.get("Pr")),
        Histogram.empty("Pr_full", edges.get("Pr_full")),
    )
    ratio_tilde = triples.ratio_tilde
    stats.ratio_tilde.fill(ratio_tilde)
    # (gamma_{n+1} - gamma_n) / (gamma_n - gamma_{n-1})
    stats.ratio.fill(triples.b / triples.a)
    usable = len(ratio_tilde) - len(ratio_tilde) % RATIO_BLOCK
    if usable == 0:
        stats.mean.add(np.array([ratio_tilde.mean()]))
    else:
        stats.mean.add(ratio_tilde[:usable].reshape(-1, RATIO_BLOCK).mean(axis=1))
    for histogram in (stats.ratio_tilde, stats.ratio):
        histogram.metadata.update(data.window.to_json_dict())
    return stats


def consecutive_spacing_stats(
    data: WindowData, edges: Optional[List[np.ndarray]] = None
) -> Histogram:
    """2D histogram of unfolded adjacent spacings (a_n, b_n)."""
    if data.window.length < MIN_WINDOW_LENGTH:
        raise ValueError(f"Spacing statistics need at least {MIN_WINDOW_LENGTH} spacings")
    if np.any(data.spacings <= 0):
        raise DataError(f"Zero spacing in window {data.window.start}:{data.window.length}")

    triples = sequential_triples(unfold_spacings(data))
    histogram = Histogram.empty("Pc", edges or default_edges("Pc"))
    histogram.fill(triples.a, triples.b)
    histogram.metadata.update(data.window.to_json_dict())
    return histogram


@dataclass(frozen=True)
class DeviationHistogram:
    """n_e^power (empirical - limit), with the CUE_{N_e} prediction on the same bins."""

    kind: str
    centers: List[np.ndarray]
    deviation: np.ndarray
    stderr: np.ndarray
    prediction: Optional[np.ndarray]
    power: int

    def columns(self) -> List[str]:
        names = ["t"] if self.kind == "Pnn" else (["a", "b"] if self.kind == "Pc" else ["r"])
        return names + ["deviation", "stderr", "cue_prediction"]

    def rows(self):
        prediction = self.prediction if self.prediction is not None else np.full_like(
            self.deviation, math.nan
        )
        if len(self.centers) == 1:
            for i, x in enumerate(self.centers[0]):
                yield (x, self.deviation[i], self.stderr[i], prediction[i])
        else:
            for i, a in enumerate(self.centers[0]):
                for j, b in enumerate(self.centers[1]):
                    yield (a, b, self.deviation[i, j], self.stderr[i, j], prediction[i, j])


def scaled_deviation_histogram(
    histogram: Histogram,
    n_e: float,
    power: int,
    limit: DistributionGrid,
    finite: Optional[DistributionGrid] = None,
) -> DeviationHistogram:
    scale = n_e**power
    limit_bins = bin_averages(limit, histogram.edges, histogram.kind)
    prediction = None
    if finite is not None:
        prediction = scale * (bin_averages(finite, histogram.edges, histogram.kind) - limit_bins)
    return DeviationHistogram(
        histogram.kind,
        histogram.centers(),
        scale * (histogram.density() - limit_bins),
        scale * histogram.stderr(),
        prediction,
        power,
    )


def analyze_window(data: WindowData) -> Tuple[GapRatioStats, Histogram]:
    return gap_ratio_stats(data), consecutive_spacing_stats(data)


def analyze_windows(windows: Sequence[WindowData], workers: Optional[int] = None):
    return pmap(analyze_window, list(windows), workers)


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    exponent: float
    points_used: int
    residuals: List[float]
    skipped: List[float]

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "amplitude": self.amplitude,
            "exponent": self.exponent,
            "points_used": self.points_used,
            "residuals": self.residuals,
            "skipped_N_e": self.skipped,
        }


def scaling_fit(points: Sequence[Tuple[float, float]]) -> FitResult:
    """Least-squares line log|dev| = log A + k log N_e over (N_e, deviation) points.

    Non-positive deviations are skipped with a warning.
    """
    usable = []
    skipped = []
    for n_e, deviation in points:
        if deviation <= 0 or not math.isfinite(deviation):
            logger.warning("Skipping non-positive deviation %.3g at N_e=%.6g", deviation, n_e)
            skipped.append(n_e)
        else:
            usable.append((n_e, deviation))

    if len({n_e for n_e, _ in usable}) < 2:
        raise NumericalError(
            f"Scaling fit needs at least 2 windows at distinct heights, got {len(usable)} usable"
        )

    x = np.log([n_e for n_e, _ in usable])
    y = np.log([deviation for _, deviation in usable])
    design = np.column_stack([np.ones_like(x), x])
    (log_amplitude, exponent), _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ np.array([log_amplitude, exponent])
    return FitResult(
        amplitude=float(math.exp(log_amplitude)),
        exponent=float(exponent),
        points_used=len(usable),
        residuals=[float(r) for r in residuals],
        skipped=skipped,
    )


def window_manifest(dataset: ZeroDataset, windows: Sequence[Window]) -> Dict[str, Any]:
    return {
        "source": dataset.path,
        "sha256": file_sha256(dataset.path),
        "format": dataset.format,
        "skip": dataset.skip,
        "limit": dataset.limit,
        "first_index": dataset.first_index,
        "windows": [w.to_json_dict() for w in windows],
        "constants": CONSTANTS.to_json_dict(),
    }


def window_sensitivity(
    dataset: ZeroDataset, centers: Sequence[int], lengths: Sequence[int]
) -> List[Dict[str, Any]]:
    """Mean r~ at the same heights for several window lengths."""
    ranges = []
    for center in centers:
        for length in lengths:
            start = center - length // 2
            if start < 0:
                raise ValueError(f"Window of length {length} around {center} starts before 0")
            ranges.append((start, length))

    rows = []
    for data in read_windows(dataset, ranges):
        stats = gap_ratio_stats(data)
        rows.append(
            {
                "center": data.window.start + data.window.length // 2,
                **stats.to_json_dict(),
            }
        )
    return rows
