import io

import numpy as np
import pytest

from cuegap.grids import DistributionGrid
from cuegap.histograms import (
    Histogram,
    analytic_histogram,
    bin_averages,
    compare_hist,
    default_edges,
    write_histogram,
)


def _linear_grid(kind="Pnn"):
    axis = np.linspace(0.02, 4.0, 200)
    return DistributionGrid.one_dimensional(kind, 10, axis, axis.copy())


def _smooth_grid():
    axis = np.linspace(0.02, 4.0, 200)
    values = 32 / np.pi**2 * axis**2 * np.exp(-4 * axis**2 / np.pi)
    return DistributionGrid.one_dimensional("Pnn", 10, axis, values)


def test_default_edges():
    assert len(default_edges("Pnn")[0]) == 41
    assert len(default_edges("Pc")) == 2
    assert default_edges("Pr")[0][-1] == 1.0
    assert default_edges("Pr_full")[0][-1] == 4.0
    with pytest.raises(ValueError):
        default_edges("Pq")
    with pytest.raises(ValueError):
        default_edges("Pnn", bins=-1)


def test_fill_and_density():
    histogram = Histogram.empty("Pnn", [np.array([0.0, 1.0, 2.0])])
    histogram.fill(np.array([0.5, 0.7, 1.5, 3.0]))
    np.testing.assert_array_equal(histogram.counts, [2, 1])
    assert histogram.outside == 1
    assert histogram.total == 3
    assert np.sum(histogram.density() * histogram.bin_volumes()) == pytest.approx(1.0)


def test_fill_two_dimensional():
    histogram = Histogram.empty("Pc")
    histogram.fill(np.array([0.5, 1.5]), np.array([0.5, 5.0]))
    assert histogram.total == 1
    assert histogram.outside == 1
    with pytest.raises(ValueError):
        histogram.fill(np.array([0.5]))


def test_merge():
    rng = np.random.default_rng(3)
    values = rng.uniform(0, 4, 1000)
    whole = Histogram.empty("Pnn")
    whole.fill(values)
    first, second = Histogram.empty("Pnn"), Histogram.empty("Pnn")
    first.fill(values[:400])
    second.fill(values[400:])
    np.testing.assert_array_equal(first.merge(second).counts, whole.counts)
    with pytest.raises(ValueError):
        first.merge(Histogram.empty("Pnn", default_edges("Pnn", 10)))


def test_stderr_of_empty_bins():
    histogram = Histogram.empty("Pnn", [np.array([0.0, 1.0, 2.0])])
    histogram.fill(np.full(100, 0.5))
    error = histogram.stderr()
    assert error[1] > 0
    assert np.all(np.isfinite(error))


def test_bin_averages_of_linear_curve():
    edges = [np.array([0.0, 1.0, 3.0])]
    np.testing.assert_allclose(bin_averages(_linear_grid(), edges), [0.5, 2.0], rtol=1e-10)


def test_ratio_histograms_use_double_density():
    grid = _linear_grid("Pr")
    edges = [np.array([0.0, 0.5, 1.0])]
    np.testing.assert_allclose(bin_averages(grid, edges, "Pr"), [0.5, 1.5], rtol=1e-10)
    np.testing.assert_allclose(bin_averages(grid, edges, "Pr_full"), [0.25, 0.75], rtol=1e-10)
    with pytest.raises(ValueError):
        bin_averages(grid, edges, "Pnn")


def test_bins_beyond_table():
    with pytest.raises(ValueError):
        bin_averages(_linear_grid(), [np.array([0.0, 5.0])])


def test_analytic_against_itself():
    grid = _smooth_grid()
    edges = default_edges("Pnn")
    expected = analytic_histogram(grid, edges, 1e6)
    comparison = compare_hist(grid, expected)
    assert comparison.max_abs_z < 1e-6
    assert comparison.fraction_beyond == 0.0
    assert comparison.summary()["bins"] == 40


def test_sampled_histogram_is_consistent():
    # Wigner surmise for beta = 2, sampled by rejection
    rng = np.random.default_rng(5)
    grid = _smooth_grid()
    candidates = rng.uniform(0, 4, 400000)
    bound = rng.uniform(0, 1.1, 400000)
    density = 32 / np.pi**2 * candidates**2 * np.exp(-4 * candidates**2 / np.pi)
    accepted = candidates[bound < density]
    histogram = Histogram.empty("Pnn")
    histogram.fill(accepted)
    comparison = compare_hist(grid, histogram)
    assert comparison.fraction_beyond <= 0.05
    assert comparison.max_abs_z < 5


def test_write_histogram_csv():
    histogram = Histogram.empty("Pr")
    histogram.fill(np.array([0.1, 0.5, 0.9]))
    histogram.metadata["N"] = 10
    stream = io.StringIO()
    write_histogram(stream, histogram, "csv", {"version": "1.0.0"})
    lines = [line for line in stream.getvalue().splitlines() if not line.startswith("#")]
    assert lines[0] == "r_tilde,count,density,stderr"
    assert len(lines) == 41
    assert "# kind: \"Pr\"" in stream.getvalue()
