import math

import numpy as np
import pytest

from cuegap.common import IntegrationError, NumericalError
from cuegap.kernels import CueParams
from cuegap.nystrom import Interval, janossy_nystrom
from cuegap.tracy_widom import (
    RayPath,
    TwState,
    boundary_state,
    index_shift,
    integrate_path,
    integrate_ray,
    integrate_symmetric,
    janossy_tw,
    resolvents,
    tw_rhs,
)


@pytest.mark.parametrize(
    "a1, a2, limit",
    [
        (-0.3, 0.3, 1e-9),
        (-0.5, 0.3, 1e-9),
        (-0.2, 0.6, 1e-9),
        (-1.0, 0.9, 1e-8),
    ],
)
def test_janossy_matches_nystrom(a1, a2, limit):
    params = CueParams(10)
    reference = janossy_nystrom(Interval(a1, a2), params)
    assert abs(janossy_tw(a1, a2, params) - reference) / reference < limit


@pytest.mark.slow
@pytest.mark.parametrize("n", [8, 16])
def test_janossy_matches_nystrom_other_ranks(n):
    params = CueParams(n)
    spacing = 2 * math.pi / n
    for a1, a2 in ((-0.6 * spacing, 0.9 * spacing), (-1.5 * spacing, 1.2 * spacing)):
        reference = janossy_nystrom(Interval(a1, a2), params)
        assert abs(janossy_tw(a1, a2, params) - reference) / reference < 1e-8


def test_non_integer_rank():
    params = CueParams(11.3)
    reference = janossy_nystrom(Interval(-0.4, 0.3), params)
    assert janossy_tw(-0.4, 0.3, params) == pytest.approx(reference, rel=1e-8)


def test_trivial_intervals():
    params = CueParams(10)
    assert janossy_tw(0.0, 0.0, params) == 1.0
    expected = math.exp(boundary_state(-1e-9, 2e-9, params).logJ)
    assert janossy_tw(-1e-9, 2e-9, params) == expected


def test_boundary_state_is_flip_symmetric():
    params = CueParams(10)
    left = boundary_state(-2e-4, 5e-4, params)
    right = boundary_state(-5e-4, 2e-4, params)
    assert left.logJ == pytest.approx(right.logJ, rel=1e-14)
    with pytest.raises(ValueError):
        boundary_state(-0.1, 0.1, params)


def test_state_vector_layout():
    state = boundary_state(-1e-4, 2e-4, CueParams(10))
    vector = state.to_vector()
    assert vector.shape == (15,)
    assert TwState.from_vector(vector) == state


def test_symmetric_flow_stays_real():
    solution = integrate_symmetric(np.linspace(0.1, 0.9, 9), CueParams(10))
    for state in solution.states:
        assert abs(state.u.imag) < 1e-10
        assert abs(state.v.imag) < 1e-10
        assert abs(state.w.imag) < 1e-10
    # J decreases with the half-width
    assert np.all(np.diff([s.logJ for s in solution.states]) < 0)


def test_symmetric_and_ray_agree():
    params = CueParams(10)
    ray = integrate_ray(RayPath(-0.5, 0.5), params)
    symmetric = integrate_symmetric([0.5], params).final
    assert ray.logJ == pytest.approx(symmetric.logJ, rel=1e-9)


def test_ray_evaluation_points():
    params = CueParams(10)
    path = integrate_path(
        boundary_state(-1e-6, 1e-6, params), (-1e-6, 1e-6), (-0.4, 0.4), params,
        evaluation_fractions=[0.5],
    )
    assert len(path.states) == 2
    assert path.points[-1] == pytest.approx((-0.4, 0.4))
    assert janossy_tw(-0.4, 0.4, params) == pytest.approx(path.final.janossy, rel=1e-9)


def test_leg_evaluation_points_from_array():
    params = CueParams(10)
    start = integrate_ray(RayPath(-0.3, 0.2), params)
    fractions = np.linspace(0.0, 1.0, 4)
    path = integrate_path(start, (-0.3, 0.2), (-0.3, 0.5), params, evaluation_fractions=fractions)
    assert len(path.states) == 4
    assert path.points[1] == pytest.approx((-0.3, 0.3))
    assert path.final.janossy == pytest.approx(janossy_tw(-0.3, 0.5, params), rel=1e-9)


def test_resolvents_are_log_derivatives():
    params = CueParams(10)
    h = 1e-5
    state = integrate_ray(RayPath(-0.4, 0.5), params)
    upper = math.log(janossy_tw(-0.4, 0.5 + h, params))
    lower = math.log(janossy_tw(-0.4, 0.5 - h, params))
    # d log J / d a2 = -R22
    assert -(upper - lower) / (2 * h) == pytest.approx(
        resolvents(state, -0.4, 0.5, params).r22, rel=1e-6
    )


def test_rhs_is_finite():
    params = CueParams(10)
    state = integrate_ray(RayPath(-0.3, 0.2), params)
    derivative = tw_rhs(state, -0.3, 0.2, params, (-0.3, 0.2))
    assert np.all(np.isfinite(derivative.to_vector()))


def test_ray_validation():
    with pytest.raises(ValueError):
        RayPath(0.1, 0.3)
    with pytest.raises(ValueError):
        RayPath(-0.1, 0.3, epsilon=0.1)
    with pytest.raises(ValueError):
        RayPath(-3.5, 3.0)


def test_singular_phase():
    params = CueParams(10)
    state = boundary_state(-1e-6, 1e-6, params)
    with pytest.raises(NumericalError):
        tw_rhs(state, -3.2, 3.2, params, (1.0, 1.0))


def test_index_shift_endpoint():
    state = boundary_state(-1e-4, 1e-4, CueParams(10))
    with pytest.raises(ValueError):
        index_shift(state, 0.1, 3)


def test_integration_error_text():
    error = IntegrationError("Integration failed", "ray r=1", n_rank=10, solver_message="step")
    assert str(error) == "Integration failed, path=ray r=1, N=10, solver: step"
