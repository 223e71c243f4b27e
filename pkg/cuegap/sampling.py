"""
Monte-Carlo eigenphases of Haar unitary matrices and the empirical spacing statistics built from
them.
"""

import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import Dict, List, Optional, Tuple

import numpy as np

from cuegap.common import NumericalError
from cuegap.histograms import Histogram, default_edges
from cuegap.kernels import CueParams
from cuegap.parallel import pmap

logger = getLogger(__name__)

DEFAULT_BATCH_SIZE = 2000
MIN_RECOMMENDED_SAMPLES = 10**4
QR_ATTEMPTS = 3

Edges = Dict[str, List[np.ndarray]]


@dataclass(frozen=True)
class EigenphaseSample:
    phases: np.ndarray
    seed: Optional[int]

    def __post_init__(self):
        phases = self.phases
        if phases.ndim != 1 or len(phases) < 2:
            raise ValueError("Need a one-dimensional array of at least 2 phases")
        if np.any(np.diff(phases) < 0):
            raise ValueError("Phases must be sorted")
        if phases[0] < -math.pi or phases[-1] >= math.pi:
            raise ValueError("Phases must lie in [-pi, pi)")

    @property
    def n_rank(self) -> int:
        return len(self.phases)


def _integer_rank(params: CueParams) -> int:
    n = int(round(params.n_rank))
    if n != params.n_rank:
        raise ValueError(f"Sampling needs an integer rank, got N={params.n_rank}")
    return n


def haar_unitaries(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-distributed n x n unitaries, from QR with phase-corrected R diagonal."""
    for _ in range(QR_ATTEMPTS):
        z = (rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n)))
        z /= math.sqrt(2)
        try:
            q, r = np.linalg.qr(z)
        except np.linalg.LinAlgError as e:
            logger.warning("QR failed (%s), drawing again", e)
            continue
        diagonal = np.diagonal(r, axis1=-2, axis2=-1)
        magnitude = np.abs(diagonal)
        if np.any(magnitude == 0):
            logger.warning("Singular Gaussian draw, drawing again")
            continue
        return q * (diagonal / magnitude)[:, None, :]

    raise NumericalError(f"Could not draw a full-rank {n}x{n} Gaussian in {QR_ATTEMPTS} attempts")


def _phases_of(unitaries: np.ndarray) -> np.ndarray:
    phases = np.angle(np.linalg.eigvals(unitaries))
    # angle gives (-pi, pi]
    phases = np.where(phases >= math.pi, phases - 2 * math.pi, phases)
    return np.sort(phases, axis=-1)


def sample_cue_batch(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted eigenphases in [-pi, pi), one row per sampled matrix."""
    return _phases_of(haar_unitaries(n, count, rng))


def sample_cue_eigenphases(params: CueParams, seed: Optional[int] = None) -> EigenphaseSample:
    n = _integer_rank(params)
    rng = np.random.default_rng(seed)
    return EigenphaseSample(sample_cue_batch(n, 1, rng)[0], seed)


@dataclass(frozen=True)
class TripleStatistics:
    """Unfolded spacings around every level: a on the left, b on the right."""

    a: np.ndarray
    b: np.ndarray

    @property
    def nearest(self) -> np.ndarray:
        return np.minimum(self.a, self.b)

    @property
    def ratio(self) -> np.ndarray:
        return self.a / self.b

    @property
    def ratio_tilde(self) -> np.ndarray:
        return np.minimum(self.a, self.b) / np.maximum(self.a, self.b)


def circular_triples(phases: np.ndarray) -> TripleStatistics:
    """All N triples of each row with wraparound, unfolded by N / 2 pi."""
    phases = np.atleast_2d(phases)
    n = phases.shape[-1]
    wrapped = np.concatenate([phases, phases[:, :1] + 2 * math.pi], axis=1)
    right = np.diff(wrapped, axis=1) * (n / (2 * math.pi))
    left = np.roll(right, 1, axis=1)
    return TripleStatistics(left, right)


def sequential_triples(spacings: np.ndarray) -> TripleStatistics:
    """Triples of an open sequence of consecutive spacings."""
    spacings = np.asarray(spacings, dtype=float)
    return TripleStatistics(spacings[:-1], spacings[1:])


@dataclass
class MeanAccumulator:
    """Mean of per-unit means with its standard error; mergeable."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, unit_means: np.ndarray) -> None:
        self.count += int(np.size(unit_means))
        self.total += float(np.sum(unit_means))
        self.total_sq += float(np.sum(np.square(unit_means)))

    def merge(self, other: "MeanAccumulator") -> "MeanAccumulator":
        return MeanAccumulator(self.count + other.count, self.total + other.total,
                               self.total_sq + other.total_sq)

    @property
    def mean(self) -> float:
        if self.count == 0:
            return math.nan
        return self.total / self.count

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.inf
        variance = (self.total_sq - self.count * self.mean**2) / (self.count - 1)
        return math.sqrt(max(variance, 0.0) / self.count)


@dataclass
class EmpiricalDistributions:
    n_rank: int
    histograms: Dict[str, Histogram]
    mean_ratio_tilde: MeanAccumulator = field(default_factory=MeanAccumulator)
    n_samples: int = 0
    ratios_per_matrix: int = 0

    @classmethod
    def empty(cls, n_rank: int, edges: Optional[Edges] = None) -> "EmpiricalDistributions":
        edges = edges or {}
        return cls(
            n_rank,
            {kind: Histogram.empty(kind, edges.get(kind)) for kind in ("Pnn", "Pc", "Pr")},
        )

    def add_phases(self, phases: np.ndarray) -> None:
        triples = circular_triples(phases)
        self.histograms["Pnn"].fill(triples.nearest.ravel())
        self.histograms["Pc"].fill(triples.a.ravel(), triples.b.ravel())
        ratio_tilde = triples.ratio_tilde
        self.histograms["Pr"].fill(ratio_tilde.ravel())
        self.mean_ratio_tilde.add(ratio_tilde.mean(axis=1))
        self.n_samples += ratio_tilde.shape[0]
        self.ratios_per_matrix = ratio_tilde.shape[1]

    def merge(self, other: "EmpiricalDistributions") -> "EmpiricalDistributions":
        if self.n_rank != other.n_rank:
            raise ValueError("Can't merge statistics of different ranks")
        return EmpiricalDistributions(
            self.n_rank,
            {kind: h.merge(other.histograms[kind]) for kind, h in self.histograms.items()},
            self.mean_ratio_tilde.merge(other.mean_ratio_tilde),
            self.n_samples + other.n_samples,
            other.ratios_per_matrix or self.ratios_per_matrix,
        )


def _sample_batch(
    task: Tuple[int, int, np.random.SeedSequence, Optional[Edges]]
) -> EmpiricalDistributions:
    n, count, seed_sequence, edges = task
    rng = np.random.default_rng(seed_sequence)
    result = EmpiricalDistributions.empty(n, edges)
    result.add_phases(sample_cue_batch(n, count, rng))
    return result


def empirical_distributions(
    params: CueParams,
    n_samples: int,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    edges: Optional[Edges] = None,
) -> EmpiricalDistributions:
    """Histograms of P_nn, P_c and r~ over ``n_samples`` Haar matrices.

    Batches get their own streams spawned from ``seed``, so the result doesn't depend on the
    number of workers.
    """
    n = _integer_rank(params)
    if n_samples < 1 or batch_size < 1:
        raise ValueError("Sample count and batch size must be positive")
    if n_samples < MIN_RECOMMENDED_SAMPLES:
        logger.warning("Only %d samples; bin errors will be large", n_samples)

    edges = edges or {kind: default_edges(kind) for kind in ("Pnn", "Pc", "Pr")}
    n_batches = -(-n_samples // batch_size)
    streams = np.random.SeedSequence(seed).spawn(n_batches)
    tasks = []
    for i, stream in enumerate(streams):
        count = min(batch_size, n_samples - i * batch_size)
        tasks.append((n, count, stream, edges))

    logger.info("Sampling %d matrices of rank %d in %d batches", n_samples, n, n_batches)
    result = EmpiricalDistributions.empty(n, edges)
    for part in pmap(_sample_batch, tasks, workers):
        result = result.merge(part)

    for histogram in result.histograms.values():
        histogram.metadata.update({"N": n, "samples": n_samples, "seed": seed})
    return result

