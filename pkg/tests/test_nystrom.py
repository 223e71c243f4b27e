import math

import numpy as np
import pytest

from cuegap.kernels import CueParams
from cuegap.nystrom import (
    Interval,
    gauss_legendre,
    janossy_nystrom,
    nystrom_det,
    nystrom_state,
)


def test_gauss_legendre_integrates_polynomials():
    quad = gauss_legendre(8, Interval(-1.0, 3.0))
    assert np.sum(quad.weights) == pytest.approx(4.0)
    assert np.sum(quad.weights * quad.nodes**3) == pytest.approx((3.0**4 - 1.0) / 4)


def test_gauss_legendre_order():
    with pytest.raises(ValueError):
        gauss_legendre(1, Interval(0.0, 1.0))


def test_interval_validation():
    with pytest.raises(ValueError):
        Interval(0.5, -0.5)
    with pytest.raises(ValueError):
        Interval(0.1, 0.5).check_janossy()
    with pytest.raises(ValueError):
        Interval(-3.5, 3.0).check_janossy()


def test_rank_one_kernel():
    def constant(x, y):
        return np.full(np.broadcast(x, y).shape, 0.25)

    assert nystrom_det(constant, Interval(0.0, 2.0), 16) == pytest.approx(0.5, rel=1e-12)


def test_empty_interval():
    assert janossy_nystrom(Interval(0.0, 0.0), CueParams(10)) == 1.0


def test_convergence_in_order():
    params = CueParams(10)
    for interval in (Interval(-0.5, 0.3), Interval(-1.2, 0.8)):
        coarse = janossy_nystrom(interval, params, 128)
        fine = janossy_nystrom(interval, params, 256)
        assert abs(coarse - fine) / fine < 1e-10


def test_positive_and_monotone():
    params = CueParams(12)
    previous = 1.0
    for a2 in (0.1, 0.3, 0.6, 1.0, 1.5):
        value = janossy_nystrom(Interval(-0.3, a2), params)
        assert 0 < value <= previous
        previous = value


def test_resolvent_data():
    params = CueParams(10)
    interval = Interval(-0.4, 0.6)
    state = nystrom_state(interval, params)
    assert abs(state.v - state.v_tilde) < 1e-10
    assert state.log_det == pytest.approx(math.log(janossy_nystrom(interval, params)), rel=1e-12)
    # R_11 and R_22 are diagonal resolvent values, positive for a sub-projection
    assert state.r11 > 0
    assert state.r22 > 0


def test_resolvent_data_needs_endpoints_off_origin():
    with pytest.raises(ValueError):
        nystrom_state(Interval(0.0, 0.6), CueParams(10))
