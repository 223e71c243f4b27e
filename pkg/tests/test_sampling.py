import math

import numpy as np
import pytest

from cuegap import distributions
from cuegap.grids import GridSpec
from cuegap.histograms import compare_hist
from cuegap.kernels import CueParams
from cuegap.sampling import (
    EigenphaseSample,
    MeanAccumulator,
    circular_triples,
    empirical_distributions,
    haar_unitaries,
    sample_cue_eigenphases,
    sequential_triples,
)


def test_haar_matrices_are_unitary():
    rng = np.random.default_rng(0)
    unitaries = haar_unitaries(6, 20, rng)
    products = unitaries @ np.conj(np.swapaxes(unitaries, -1, -2))
    np.testing.assert_allclose(products, np.broadcast_to(np.eye(6), products.shape), atol=1e-12)


def test_eigenphases():
    sample = sample_cue_eigenphases(CueParams(8), seed=4)
    assert sample.n_rank == 8
    assert np.all(np.diff(sample.phases) >= 0)
    assert sample.phases[0] >= -math.pi
    assert sample.phases[-1] < math.pi
    again = sample_cue_eigenphases(CueParams(8), seed=4)
    np.testing.assert_array_equal(sample.phases, again.phases)


def test_sample_validation():
    with pytest.raises(ValueError):
        EigenphaseSample(np.array([0.5, 0.1]), None)
    with pytest.raises(ValueError):
        EigenphaseSample(np.array([0.1, 4.0]), None)
    with pytest.raises(ValueError):
        sample_cue_eigenphases(CueParams(7.5))


def test_equally_spaced_triples():
    phases = -math.pi + 2 * math.pi * np.arange(5) / 5
    triples = circular_triples(phases)
    assert triples.a.shape == (1, 5)
    np.testing.assert_allclose(triples.a, 1.0)
    np.testing.assert_allclose(triples.b, 1.0)
    np.testing.assert_allclose(triples.ratio_tilde, 1.0)


def test_wraparound():
    phases = np.array([[-3.0, -1.0, 0.5, 2.0]])
    triples = circular_triples(phases)
    scale = 4 / (2 * math.pi)
    right = np.array([2.0, 1.5, 1.5, 2 * math.pi - 5.0]) * scale
    np.testing.assert_allclose(triples.b[0], right)
    np.testing.assert_allclose(triples.a[0], np.roll(right, 1))
    np.testing.assert_allclose(triples.ratio, triples.a / triples.b)


def test_sequential_triples_reproduce_circular_ones():
    sample = sample_cue_eigenphases(CueParams(10), seed=9)
    circular = circular_triples(sample.phases)
    spacings = circular.b[0]
    sequential = sequential_triples(np.concatenate([spacings[-1:], spacings]))
    np.testing.assert_array_equal(sequential.a, circular.a[0])
    np.testing.assert_array_equal(sequential.b, circular.b[0])


def test_mean_accumulator():
    accumulator = MeanAccumulator()
    accumulator.add(np.array([1.0, 2.0]))
    other = MeanAccumulator()
    other.add(np.array([3.0, 4.0]))
    merged = accumulator.merge(other)
    assert merged.mean == pytest.approx(2.5)
    assert merged.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert math.isnan(MeanAccumulator().mean)
    assert MeanAccumulator().stderr == math.inf


def test_seeded_runs_are_identical():
    params = CueParams(6)
    first = empirical_distributions(params, 500, seed=3, workers=1, batch_size=100)
    second = empirical_distributions(params, 500, seed=3, workers=1, batch_size=100)
    for kind in ("Pnn", "Pc", "Pr"):
        np.testing.assert_array_equal(first.histograms[kind].counts, second.histograms[kind].counts)
    assert first.mean_ratio_tilde.mean == second.mean_ratio_tilde.mean


def test_worker_count_does_not_change_results():
    params = CueParams(6)
    single = empirical_distributions(params, 300, seed=11, workers=1, batch_size=100)
    pooled = empirical_distributions(params, 300, seed=11, workers=2, batch_size=100)
    np.testing.assert_array_equal(single.histograms["Pc"].counts, pooled.histograms["Pc"].counts)


def test_counts_and_metadata():
    result = empirical_distributions(CueParams(6), 250, seed=1, workers=1, batch_size=100)
    assert result.n_samples == 250
    assert result.ratios_per_matrix == 6
    histogram = result.histograms["Pr"]
    assert histogram.total + histogram.outside == 250 * 6
    assert histogram.metadata == {"N": 6, "samples": 250, "seed": 1}
    with pytest.raises(ValueError):
        empirical_distributions(CueParams(6), 0)


@pytest.mark.slow
def test_mean_ratio_matches_analytic():
    result = empirical_distributions(CueParams(8), 20000, seed=2)
    expected = distributions.mean_gap_ratio(8)
    observed = result.mean_ratio_tilde
    assert abs(observed.mean - expected) < 4 * observed.stderr


@pytest.mark.slow
def test_histograms_match_analytic_curves():
    result = empirical_distributions(CueParams(16), 100000, seed=4)
    spec = GridSpec(spacing_points=60, ratio_points=80)
    for kind in ("Pnn", "Pc", "Pr"):
        comparison = compare_hist(distributions.compute_grid(kind, 16, spec),
                                  result.histograms[kind])
        assert comparison.fraction_beyond <= 0.05, kind

    # the same samples against a much smaller rank
    wrong = compare_hist(distributions.compute_grid("Pnn", 4, spec), result.histograms["Pnn"])
    assert wrong.fraction_beyond >= 0.1
