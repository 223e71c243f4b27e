"""
Cross-method consistency checks of the numerical core, run by ``cuegap selftest``.
"""

import math
import time
from dataclasses import dataclass
from logging import getLogger
from typing import Callable, List, Tuple

import numpy as np

from cuegap import distributions, sine_limit
from cuegap.common import NumericalError
from cuegap.kernels import CueParams
from cuegap.nystrom import Interval, janossy_nystrom, nystrom_state
from cuegap.tracy_widom import (
    RayPath,
    TwCoefficients,
    TwState,
    boundary_state,
    endpoint_partials,
    flip_derivative,
    flip_state,
    integrate_path,
    integrate_ray,
    integrate_symmetric,
    janossy_tw,
    nonuniversal_derivatives,
    unfolded_partials,
)
from cuegap.zeta import SINE_MEAN_RATIO

logger = getLogger(__name__)

CHECK_RANK = 10.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    limit: float
    seconds: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.error) and self.error <= self.limit

    def to_json_dict(self):
        return {
            "name": self.name,
            "error": self.error,
            "limit": self.limit,
            "passed": self.passed,
            "seconds": self.seconds,
        }


def _max_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)))


def check_flip_symmetry() -> float:
    """Relative mismatch of the unfolded partials under N -> -N with relabelled state."""
    rng = np.random.default_rng(7)
    parts = rng.normal(size=14)
    state = TwState(*(complex(parts[2 * i], parts[2 * i + 1]) for i in range(7)), logJ=-0.3)
    x1, x2, n = -0.7, 0.4, 8.0
    direct = unfolded_partials(flip_state(state), x1, x2, -n)
    mirrored = [flip_derivative(d) for d in unfolded_partials(state, x1, x2, n)]
    worst = 0.0
    for d, m in zip(direct, mirrored):
        scale = max(1.0, float(np.max(np.abs(m.to_vector()))))
        worst = max(worst, _max_abs(d.to_vector(), m.to_vector()) / scale)
        worst = max(worst, abs(d.logJ.imag - m.logJ.imag) / scale)
    return worst


def check_v_tilde_identity() -> float:
    state = nystrom_state(Interval(-0.4, 0.6), CueParams(CHECK_RANK))
    return abs(state.v - state.v_tilde)


def check_path_independence() -> float:
    """Ray to (a1, a2) against the symmetric system to (-a2, a2) followed by a leg in a1."""
    params = CueParams(CHECK_RANK)
    a1, a2 = -0.5, 0.3
    ray = integrate_ray(RayPath(a1, a2), params)
    corner = integrate_symmetric([a2], params).final.to_tw_state()
    leg = integrate_path(corner, (-a2, a2), (a1, a2), params).final
    return _max_abs(ray.to_vector(), leg.to_vector())


def check_mixed_partial() -> float:
    """Closed-form P_c against finite differences of the Janossy density."""
    params = CueParams(CHECK_RANK)
    worst = 0.0
    for a, b in ((0.6, 0.9), (1.2, 0.5)):
        closed = distributions.pc(a, b, params)
        differenced = distributions.pc_finite_difference(a, b, params)
        worst = max(worst, abs(closed - differenced) / abs(closed))
    return worst


def check_dual_method() -> float:
    params = CueParams(CHECK_RANK)
    worst = 0.0
    for a1, a2 in ((-0.3141, 0.3141), (-0.5, 0.3), (-0.2, 0.6)):
        reference = janossy_nystrom(Interval(a1, a2), params)
        worst = max(worst, abs(janossy_tw(a1, a2, params) - reference) / reference)
    return worst


def check_boundary_series() -> Tuple[float, float]:
    """Integrated log J at |a| = 1e-3 against the cubic series there, with its error budget."""
    params = CueParams(CHECK_RANK)
    eps = 1e-3
    integrated = integrate_ray(RayPath(-eps, eps), params).logJ
    series = boundary_state(-eps, eps, params).logJ
    budget = 10 * eps**4 * params.n_rank**3 / (72 * math.pi)
    return abs(integrated - series), budget


def check_nonuniversal_reduction() -> float:
    """Generic nonuniversal equations against the CUE-specialized endpoint derivatives."""
    params = CueParams(CHECK_RANK)
    a1, a2 = -0.4, 0.5
    state = integrate_ray(RayPath(a1, a2), params)
    generic = nonuniversal_derivatives(state, a1, a2, TwCoefficients.for_cue(params))
    partials = endpoint_partials(state, a1, a2, params.n_rank)
    specialized = np.array([partials.d1.q1, partials.d1.p1, partials.d2.q2, partials.d2.p2])
    return float(np.max(np.abs(np.array(generic) - specialized)))


def check_sine_mean_ratio() -> float:
    return abs(sine_limit.mean_gap_ratio_limit() - SINE_MEAN_RATIO)


def _timed(name: str, func: Callable[[], float], limit: float) -> CheckResult:
    started = time.monotonic()
    try:
        error = func()
    except NumericalError as e:
        logger.warning("Check %s failed to run: %s", name, e)
        error = math.inf
    return CheckResult(name, float(error), limit, time.monotonic() - started)


def run_selftest(full: bool = False) -> List[CheckResult]:
    results = [
        _timed("rhs symmetry under N -> -N", check_flip_symmetry, 1e-10),
        _timed("v-tilde = v", check_v_tilde_identity, 1e-10),
        _timed("path independence", check_path_independence, 1e-8),
        _timed("mixed partial P_c", check_mixed_partial, 1e-6),
        _timed("TW vs Nystrom Janossy", check_dual_method, 1e-9),
        _timed("nonuniversal reduction", check_nonuniversal_reduction, 1e-9),
    ]

    started = time.monotonic()
    error, budget = check_boundary_series()
    results.append(CheckResult("boundary series", error, budget, time.monotonic() - started))

    if full:
        results.append(_timed("sine-limit E[r~]", check_sine_mean_ratio, 1e-6))

    for result in results:
        logger.debug("%s: error %.3g (limit %.3g) in %.1fs", result.name, result.error,
                     result.limit, result.seconds)
    return results
