"""
Tabulated distributions and their CSV / JSON representation.
"""

import json
import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Any, Dict, List, Optional, TextIO

import numpy as np

from cuegap.common import NumericalError

logger = getLogger(__name__)

KINDS = ("Pnn", "Pc", "Pr")
CONVENTION = "unit_mean_spacing"
NEGATIVITY_LIMIT = 1e-9
FLOAT_FORMAT = "%.17g"

AXIS_NAMES = {"Pnn": ["t"], "Pc": ["a", "b"], "Pr": ["r"]}


@dataclass(frozen=True)
class GridSpec:
    spacing_max: float = 4.0
    spacing_points: int = 200
    ratio_min: float = 0.01
    ratio_max: float = 4.0
    ratio_points: int = 160

    def __post_init__(self):
        if self.spacing_max <= 0 or self.spacing_points < 1:
            raise ValueError("Spacing grid must be non-empty with a positive extent")
        if not 0 < self.ratio_min < self.ratio_max or self.ratio_points < 2:
            raise ValueError("Ratio grid needs 0 < min < max and at least two points")

    def spacing_axis(self) -> np.ndarray:
        step = self.spacing_max / self.spacing_points
        return np.linspace(step, self.spacing_max, self.spacing_points)

    def ratio_axis(self) -> np.ndarray:
        return np.geomspace(self.ratio_min, self.ratio_max, self.ratio_points)

    def axes_for(self, kind: str) -> List[np.ndarray]:
        if kind == "Pr":
            return [self.ratio_axis()]
        if kind == "Pc":
            return [self.spacing_axis(), self.spacing_axis()]
        return [self.spacing_axis()]


@dataclass
class DistributionGrid:
    kind: str
    n_rank: Optional[float]  # None stands for the N -> infinity limit
    axes: List[np.ndarray]
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    convention: str = CONVENTION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Unknown distribution kind {self.kind!r}")
        expected_shape = tuple(len(axis) for axis in self.axes)
        if self.values.shape != expected_shape:
            raise ValueError(
                f"Values of shape {self.values.shape} don't match axes {expected_shape}"
            )
        # deviation grids are signed
        is_deviation = "deviation_power" in self.metadata
        if not is_deviation and np.any(self.values < -NEGATIVITY_LIMIT):
            raise NumericalError(
                f"{self.kind} at N={self.n_label} has values below {-NEGATIVITY_LIMIT}"
            )

    @classmethod
    def one_dimensional(
        cls, kind: str, n_rank: Optional[float], axis: np.ndarray, values: np.ndarray,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "DistributionGrid":
        return cls(kind, n_rank, [np.asarray(axis, dtype=float)], np.asarray(values, dtype=float),
                   dict(metadata or {}))

    @classmethod
    def two_dimensional(
        cls, kind: str, n_rank: Optional[float], axis_a: np.ndarray, axis_b: np.ndarray,
        values: np.ndarray, metadata: Optional[Dict[str, Any]] = None,
    ) -> "DistributionGrid":
        return cls(kind, n_rank,
                   [np.asarray(axis_a, dtype=float), np.asarray(axis_b, dtype=float)],
                   np.asarray(values, dtype=float), dict(metadata or {}))

    @property
    def n_label(self) -> str:
        return "inf" if self.n_rank is None else f"{self.n_rank:g}"

    def same_support(self, other: "DistributionGrid") -> bool:
        return (
            self.kind == other.kind
            and len(self.axes) == len(other.axes)
            and all(
                len(a) == len(b) and np.allclose(a, b, rtol=0, atol=1e-12)
                for a, b in zip(self.axes, other.axes)
            )
        )

    def scaled_deviation(self, limit: "DistributionGrid", power: int) -> "DistributionGrid":
        """N^power (self - limit) on the shared grid."""
        if self.n_rank is None:
            raise ValueError("Deviation needs a finite-N grid")
        if not self.same_support(limit):
            raise ValueError(f"Grid mismatch between N={self.n_label} and N={limit.n_label}")
        metadata = dict(self.metadata, deviation_power=power)
        return DistributionGrid(
            self.kind,
            self.n_rank,
            self.axes,
            self.n_rank**power * (self.values - limit.values),
            metadata,
        )

    def columns(self) -> List[str]:
        return AXIS_NAMES[self.kind] + ["value"]

    def rows(self):
        if len(self.axes) == 1:
            for x, value in zip(self.axes[0], self.values):
                yield (x, value)
        else:
            for i, a in enumerate(self.axes[0]):
                for j, b in enumerate(self.axes[1]):
                    yield (a, b, self.values[i, j])

    def header(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "N": self.n_label,
            "convention": self.convention,
            **self.metadata,
        }

    def to_json_dict(self) -> Dict[str, Any]:
        return {
            "metadata": self.header(),
            "axes": {name: axis.tolist() for name, axis in zip(AXIS_NAMES[self.kind], self.axes)},
            "values": self.values.tolist(),
        }


def format_float(value: float) -> str:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return FLOAT_FORMAT % value


def format_cell(value: Any) -> str:
    if value is None or isinstance(value, (str, bool)):
        return str(value)
    return format_float(float(value))


def write_csv(
    stream: TextIO, columns: List[str], rows, header: Dict[str, Any]
) -> None:
    """Metadata as '# key: value' comment lines, then a header row and 17-digit floats."""
    for key, value in header.items():
        stream.write(f"# {key}: {json.dumps(value, sort_keys=True, default=str)}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(format_cell(x) for x in row) + "\n")


def write_grid(stream: TextIO, grid: DistributionGrid, fmt: str,
               header: Optional[Dict[str, Any]] = None) -> None:
    full_header = dict(header or {})
    full_header.update(grid.header())
    if fmt == "csv":
        write_csv(stream, grid.columns(), grid.rows(), full_header)
    elif fmt == "json":
        content = grid.to_json_dict()
        content["metadata"] = full_header
        json.dump(content, stream, indent=2, sort_keys=True, default=str)
        stream.write("\n")
    else:
        raise ValueError(f"Unknown output format {fmt!r}")
