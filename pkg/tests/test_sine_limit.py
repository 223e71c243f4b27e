import math

import numpy as np
import pytest
from scipy.special import roots_legendre

from cuegap.grids import GridSpec
from cuegap.sine_limit import (
    SineState,
    autonomous_rhs,
    integrate_sine_symmetric,
    limit_distributions,
    limit_ratio_summary,
    pc_limit,
    pc_limit_grid,
    pnn_limit,
    pr_limit,
    sine_boundary_state,
    sine_ray_moments,
    sine_symmetric_rhs,
)
from cuegap.zeta import SINE_MEAN_RATIO


def test_trajectory_invariant():
    states, _ = integrate_sine_symmetric(np.linspace(0.2, 6.0, 12))
    for state in states:
        assert abs(state.trajectory_invariant) < 1e-10


def test_autonomous_form():
    q = complex(0.3, 0.2)
    state = SineState(q=q, u=complex(2 * (q * q).imag), logJ=0.0)
    assert autonomous_rhs(q, 0.5) == pytest.approx(sine_symmetric_rhs(state, 0.5).q)


def test_series_domain():
    with pytest.raises(ValueError):
        sine_boundary_state(0.01)
    with pytest.raises(ValueError):
        sine_symmetric_rhs(sine_boundary_state(1e-6), 0.0)


def test_pnn_limit_normalized():
    x, w = roots_legendre(48)
    nodes, weights = 2 * (x + 1), 2 * w
    values = pnn_limit(nodes)
    assert np.all(values >= 0)
    assert np.sum(weights * values) == pytest.approx(1.0, abs=1e-6)


def test_pnn_limit_outside_support():
    np.testing.assert_array_equal(pnn_limit([0.0, 4.5]), [0.0, 0.0])


def test_pc_limit_reflection():
    assert pc_limit(0.7, 1.1) == pytest.approx(pc_limit(1.1, 0.7), rel=1e-8)
    assert pc_limit(0.7, 1.1) > 0
    assert pc_limit(3.0, 3.5) == 0.0
    with pytest.raises(ValueError):
        pc_limit(-0.1, 1.0)


def test_pc_limit_grid_matches_points():
    values = pc_limit_grid([0.5, 1.0], [0.4, 0.8, 1.2])
    for i, a in enumerate([0.5, 1.0]):
        for j, b in enumerate([0.4, 0.8, 1.2]):
            assert values[i, j] == pytest.approx(pc_limit(a, b), rel=1e-8)


@pytest.mark.parametrize("r", [0.5, 0.8, 0.3])
def test_pr_limit_swap_symmetry(r):
    assert pr_limit(r) == pytest.approx(pr_limit(1 / r) / r**2, abs=1e-6)


def test_ray_moments():
    m1, m2 = sine_ray_moments(0.6)
    assert m1 == pr_limit(0.6)
    assert m2 > 0
    with pytest.raises(ValueError):
        sine_ray_moments(0.0)


def test_limit_distributions_share_grid():
    spec = GridSpec(spacing_max=2.0, spacing_points=4, ratio_points=3)
    grids = limit_distributions(spec)
    assert set(grids) == {"Pnn", "Pc", "Pr"}
    assert grids["Pc"].values.shape == (4, 4)
    assert all(grid.n_rank is None for grid in grids.values())


@pytest.mark.slow
def test_mean_gap_ratio_limit():
    summary = limit_ratio_summary()
    assert summary.mean_ratio_tilde == pytest.approx(SINE_MEAN_RATIO, abs=1e-6)
    assert summary.total == pytest.approx(1.0, abs=1e-5)
    assert summary.mean_spacing == pytest.approx(1.0, abs=1e-5)
    assert math.isfinite(summary.mean_spacing)
