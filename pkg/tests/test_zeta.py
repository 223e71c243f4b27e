import gzip
import math
from decimal import Decimal

import numpy as np
import pytest

from cuegap.common import DataError, NumericalError
from cuegap.kernels import CueParams, sine_kernel_expansion
from cuegap.sampling import EmpiricalDistributions, circular_triples, sample_cue_eigenphases
from cuegap.zeta import (
    CONSTANTS,
    Window,
    WindowData,
    ZeroDataset,
    consecutive_spacing_stats,
    gap_ratio_stats,
    ingest_zeros,
    krz_kernel,
    n_effective,
    read_windows,
    rho,
    scaling_fit,
    scan_dataset,
    window_manifest,
    window_sensitivity,
)

HIGH_ORDINATE = "13066434408793621120027.3961"


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return str(path)


def _spaced_table(path, count, seed=0):
    """Ordinates with exact thousandths, so the expected spacings are known in floating point."""
    rng = np.random.default_rng(seed)
    steps = rng.integers(300, 2000, count - 1)
    thousandths = 1_000_000 + np.concatenate([[0], np.cumsum(steps)])
    lines = [f"{v // 1000}.{v % 1000:03d}" for v in thousandths]
    return _write(path, lines), steps / 1000.0


def test_effective_rank_at_large_height():
    assert n_effective(float(HIGH_ORDINATE)) == pytest.approx(11.2975909009, abs=1e-9)
    with pytest.raises(ValueError):
        n_effective(6.0)


def test_density():
    assert rho(2 * math.pi * math.e) == pytest.approx(1 / (2 * math.pi))


def test_krz_kernel_terms():
    delta = np.array([0.5, 1.0, 2.5])
    n_e = 11.3
    shift = CONSTANTS.Q / (math.sqrt(3) * CONSTANTS.Lambda**1.5)
    expected = (
        sine_kernel_expansion(delta)
        + delta * np.sin(delta) / (6 * math.pi * n_e**2)
        + shift * delta**2 * np.cos(delta) / (6 * math.pi * n_e**3)
    )
    np.testing.assert_allclose(krz_kernel(delta, n_e), expected, rtol=1e-14)
    resummed = krz_kernel(delta, n_e, resummed=True)
    assert np.max(np.abs(resummed - expected)) < 5e-5
    with pytest.raises(ValueError):
        krz_kernel(delta, 0.0)


def test_plain_lines(tmp_path):
    path = _write(tmp_path / "zeros", ["14.134725142", "21.022039639", "25.010857580"])
    dataset = ingest_zeros(path)
    spacings = list(dataset.spacings())
    assert len(spacings) == 2
    assert spacings[0][0] == 2
    assert spacings[0][1] == Decimal("14.134725142")
    assert spacings[0][2] == float(Decimal("6.887314497"))
    assert dataset.count == 3


def test_skip_and_limit(tmp_path):
    path = _write(tmp_path / "zeros", ["14.134725142", "21.022039639", "25.010857580"])
    dataset = ZeroDataset(path, skip=1, limit=1)
    assert [z.ordinate for z in dataset] == [Decimal("21.022039639")]
    assert list(dataset.spacings()) == []
    with pytest.raises(ValueError):
        ZeroDataset(path, skip=-1)


def test_spacings_are_exact_decimal_differences(tmp_path):
    path = _write(
        tmp_path / "zeros",
        ["14.134725141734693790457251983562", "14.264725141734693790457251983562"],
    )
    assert [s for _, _, s in ZeroDataset(path).spacings()] == [0.13]


def test_offset_deltas(tmp_path):
    path = _write(tmp_path / "zeros", ["# high zeros", f"offset {HIGH_ORDINATE}", "0.0", "0.2"])
    dataset = ZeroDataset(path, format="offset_deltas")
    zeros = list(dataset)
    assert zeros[0].ordinate == Decimal(HIGH_ORDINATE)
    assert [s for _, _, s in dataset.spacings()] == [0.2]


def test_offset_header_required(tmp_path):
    path = _write(tmp_path / "zeros", ["0.0", "0.2"])
    with pytest.raises(DataError) as excinfo:
        list(ZeroDataset(path, format="offset_deltas"))
    assert excinfo.value.line_no == 1


def test_indexed_lines(tmp_path):
    path = _write(tmp_path / "zeros", ["1 14.134725142", "2 21.022039639", "3 25.010857580"])
    dataset = ZeroDataset(path, skip=1)
    list(dataset)
    assert dataset.first_index == 2


def test_gzip_input(tmp_path):
    path = tmp_path / "zeros.gz"
    with gzip.open(path, "wt", encoding="ascii") as fp:
        fp.write("14.134725142\n21.022039639\n")
    assert len(list(ZeroDataset(str(path)).spacings())) == 1


def test_non_increasing_ordinates(tmp_path):
    path = _write(tmp_path / "zeros", ["14.1", "21.0", "21.0", "25.0"])
    with pytest.raises(DataError) as excinfo:
        list(ZeroDataset(path))
    assert excinfo.value.line_no == 3
    assert str(excinfo.value).startswith(f"{path}:3:")


def test_malformed_lines(tmp_path):
    with pytest.raises(DataError) as excinfo:
        list(ZeroDataset(_write(tmp_path / "a", ["14.1", "abc"])))
    assert excinfo.value.line_no == 2
    with pytest.raises(DataError):
        list(ZeroDataset(_write(tmp_path / "b", ["14.1 21.0 25.0"])))
    with pytest.raises(DataError):
        list(ZeroDataset(_write(tmp_path / "c", ["14.1", "Infinity"])))


def test_non_ascii_input(tmp_path):
    path = tmp_path / "zeros"
    path.write_bytes(b"14.1\n2\xc3\xa91.0\n")
    with pytest.raises(DataError):
        list(ZeroDataset(str(path)))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        ingest_zeros(str(tmp_path / "missing"))
    with pytest.raises(ValueError):
        ZeroDataset(str(tmp_path / "missing"), format="binary")


def test_scan(tmp_path):
    path = _write(tmp_path / "zeros", ["14.134725142", "21.022039639", "25.010857580"])
    summary = scan_dataset(ZeroDataset(path))
    assert summary.count == 3
    assert summary.first == "14.134725142"
    assert summary.min_spacing == pytest.approx(3.988817941)
    with pytest.raises(DataError):
        scan_dataset(ZeroDataset(path, skip=5))


def test_windows(tmp_path):
    path, steps = _spaced_table(tmp_path / "zeros", 60)
    first, second = read_windows(ZeroDataset(path), [(0, 10), (20, 30)])
    np.testing.assert_array_equal(first.spacings, steps[:10])
    np.testing.assert_array_equal(second.spacings, steps[20:50])
    assert second.window.height == second.heights[15]
    assert second.window.n_effective == pytest.approx(n_effective(second.heights[15]))
    with pytest.raises(ValueError):
        read_windows(ZeroDataset(path), [(50, 20)])


def test_gap_ratio_statistics(tmp_path):
    path, steps = _spaced_table(tmp_path / "zeros", 1102, seed=1)
    (data,) = read_windows(ZeroDataset(path), [(50, 1001)])
    stats = gap_ratio_stats(data)
    window_steps = steps[50:1051]
    ratios = window_steps[1:] / window_steps[:-1]
    ratio_tilde = np.minimum(ratios, 1 / ratios)
    assert stats.mean_ratio_tilde == pytest.approx(np.mean(ratio_tilde), rel=1e-12)
    assert stats.ratio_tilde.total + stats.ratio_tilde.outside == 1000
    assert np.isfinite(stats.mean.stderr)
    content = stats.to_json_dict()
    assert content["start"] == 50
    assert content["ratios"] == 1000
    assert content["relative_deviation"] == pytest.approx(
        (np.mean(ratio_tilde) - 0.5997504209) / 0.5997504209
    )


def test_short_windows_are_rejected(tmp_path):
    path, _ = _spaced_table(tmp_path / "zeros", 100)
    (data,) = read_windows(ZeroDataset(path), [(0, 50)])
    with pytest.raises(ValueError):
        gap_ratio_stats(data)
    with pytest.raises(ValueError):
        consecutive_spacing_stats(data)


def test_consecutive_spacings_are_unfolded(tmp_path):
    path, _ = _spaced_table(tmp_path / "zeros", 1102, seed=2)
    (data,) = read_windows(ZeroDataset(path), [(0, 1001)])
    histogram = consecutive_spacing_stats(data)
    assert histogram.kind == "Pc"
    assert histogram.total + histogram.outside == 1000
    assert histogram.metadata["length"] == 1001


def test_sensitivity(tmp_path):
    path, _ = _spaced_table(tmp_path / "zeros", 3000, seed=3)
    rows = window_sensitivity(ZeroDataset(path), [1500], [1000, 2000])
    assert [row["length"] for row in rows] == [1000, 2000]
    assert all(row["center"] == 1500 for row in rows)
    with pytest.raises(ValueError):
        window_sensitivity(ZeroDataset(path), [100], [1000])


def test_manifest(tmp_path):
    path, _ = _spaced_table(tmp_path / "zeros", 30)
    dataset = ZeroDataset(path)
    windows = [w.window for w in read_windows(dataset, [(0, 10)])]
    manifest = window_manifest(dataset, windows)
    assert len(manifest["sha256"]) == 64
    assert manifest["windows"][0]["length"] == 10
    assert manifest["constants"] == {"Lambda": 1.57315107134, "Q": 2.315846384}


def test_scaling_fit():
    points = [(n_e, 0.1896 * n_e**-3.081) for n_e in (5.13383486853, 7.73844996441, 11.2975909009)]
    fit = scaling_fit(points + [(9.0, -0.001)])
    assert fit.exponent == pytest.approx(-3.081)
    assert fit.amplitude == pytest.approx(0.1896)
    assert fit.points_used == 3
    assert fit.skipped == [9.0]
    assert max(abs(r) for r in fit.residuals) < 1e-10


def test_scaling_fit_needs_two_heights():
    with pytest.raises(NumericalError):
        scaling_fit([(5.0, 0.01), (5.0, 0.02), (7.0, -0.01)])


def test_cue_eigenphases_through_the_window_pipeline():
    sample = sample_cue_eigenphases(CueParams(1000), seed=21)
    reference = EmpiricalDistributions.empty(1000)
    reference.add_phases(sample.phases[np.newaxis, :])

    # the circle cut open, with the closing spacing repeated in front
    spacings = circular_triples(sample.phases).b[0]
    stream = np.concatenate([spacings[-1:], spacings])
    window = Window.at_height(0, len(stream), 1e6)
    stats = gap_ratio_stats(WindowData(window, np.full(len(stream), 1e6), stream))

    np.testing.assert_array_equal(stats.ratio_tilde.counts, reference.histograms["Pr"].counts)
    assert stats.ratio_tilde.outside == reference.histograms["Pr"].outside
    assert stats.ratio_tilde.total == 1000
