"""
CUE_N correlation kernel, its conditional (gauge-transformed) counterpart and the unfolded
large-N expansion.

All phase arguments may be floats or numpy arrays (broadcast together); scalar input gives
scalar output.
"""

import math
from dataclasses import dataclass
from logging import getLogger
from typing import Optional, Union

import numpy as np

from cuegap.common import NumericalError

logger = getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# |x - y| (or |x|) below which the sin-ratio is taken from its Taylor series
SERIES_SWITCH = 1e-4
IMAG_RESIDUE_LIMIT = 1e-13
SQRT_2PI = math.sqrt(2 * math.pi)


@dataclass(frozen=True)
class CueParams:
    """Rank of the ensemble. Real values are accepted for the N_e comparisons of the zeta
    pipeline; the kernel formulas stay well defined for non-integer N."""

    n_rank: float

    def __post_init__(self):
        if not self.n_rank >= 2:
            raise ValueError(f"CUE rank must be at least 2, got {self.n_rank}")

    @property
    def mean_spacing(self) -> float:
        return 2 * math.pi / self.n_rank

    @property
    def density(self) -> float:
        return self.n_rank / (2 * math.pi)


@dataclass(frozen=True)
class TwoComponent:
    phi: Union[complex, np.ndarray]
    psi: Union[complex, np.ndarray]


def _unwrap(value):
    if isinstance(value, np.ndarray) and value.ndim == 0:
        return value[()]
    return value


def _dirichlet_ratio(d: ArrayLike, n: float) -> ArrayLike:
    """sin(n d / 2) / (n sin(d / 2)), equal to 1 at d = 0."""
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < SERIES_SWITCH
    safe_d = np.where(small, 1.0, d)
    direct = np.sin(n * safe_d / 2) / (n * np.sin(safe_d / 2))
    d2 = d * d
    series = 1 - (n * n - 1) * d2 / 24 + (n * n - 1) * (3 * n * n - 7) * d2 * d2 / 5760
    return np.where(small, series, direct)


def _dirichlet_ratio_minus_one(d: ArrayLike, n: float) -> ArrayLike:
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < SERIES_SWITCH
    d2 = d * d
    series = -(n * n - 1) * d2 / 24 + (n * n - 1) * (3 * n * n - 7) * d2 * d2 / 5760
    return np.where(small, series, _dirichlet_ratio(d, n) - 1)


def expm1_i(theta: ArrayLike) -> ArrayLike:
    """exp(i theta) - 1 without cancellation at small theta."""
    half = np.sin(np.asarray(theta, dtype=float) / 2)
    return -2 * half * half + 1j * np.sin(theta)


def phi_cue(x: ArrayLike, params: CueParams) -> TwoComponent:
    n = params.n_rank
    x = np.asarray(x, dtype=float)
    common = np.exp(0.5j * x) / SQRT_2PI
    return TwoComponent(
        phi=_unwrap(common * np.exp(0.5j * n * x)),
        psi=_unwrap(common * np.exp(-0.5j * n * x)),
    )


def eval_kernel_cue(x: ArrayLike, y: ArrayLike, params: CueParams) -> ArrayLike:
    n = params.n_rank
    d = np.subtract(x, y, dtype=float)
    return _unwrap(n / (2 * math.pi) * _dirichlet_ratio(d, n))


def phi_tilde(x: ArrayLike, params: CueParams) -> TwoComponent:
    """Gauge-transformed pair; both components vanish at x = 0."""
    n = params.n_rank
    x = np.asarray(x, dtype=float)
    ratio = _dirichlet_ratio(x, n)
    shared = expm1_i(-x / 2) * ratio + _dirichlet_ratio_minus_one(x, n)
    common = np.exp(0.5j * x) / SQRT_2PI
    return TwoComponent(
        phi=_unwrap(common * (expm1_i(n * x / 2) - shared)),
        psi=_unwrap(common * (expm1_i(-n * x / 2) - shared)),
    )


def eval_kernel_tilde(x: ArrayLike, y: ArrayLike, params: CueParams) -> ArrayLike:
    """K(x, y) - K(x, 0) K(0, y) / K(0, 0) with the conditioning point at the origin."""
    n = params.n_rank
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    value = n / (2 * math.pi) * (
        _dirichlet_ratio(x - y, n) - _dirichlet_ratio(x, n) * _dirichlet_ratio(y, n)
    )
    return _unwrap(value)


def eval_kernel_tilde_two_component(x: float, y: float, params: CueParams) -> float:
    """Integrable-form evaluation (phi~(x) psi~(y) - psi~(x) phi~(y)) / (e^{ix} - e^{iy}).

    Only defined off the diagonal; the diagonal belongs to eval_kernel_tilde.
    """
    if abs(x - y) < SERIES_SWITCH:
        return float(eval_kernel_tilde(x, y, params))

    fx = phi_tilde(x, params)
    fy = phi_tilde(y, params)
    value = (fx.phi * fy.psi - fx.psi * fy.phi) / (np.exp(1j * x) - np.exp(1j * y))
    if abs(value.imag) > IMAG_RESIDUE_LIMIT:
        raise NumericalError(
            f"Kernel value at ({x}, {y}) has imaginary residue {value.imag:.3e}"
        )
    return float(value.real)


def unfolded_cue_kernel(delta: ArrayLike, n_rank: float) -> ArrayLike:
    """CUE kernel in variables with mean spacing pi: sin(delta) / (pi N sin(delta / N))."""
    delta = np.asarray(delta, dtype=float)
    return _unwrap(_dirichlet_ratio(2 * delta / n_rank, n_rank) / math.pi)


def sine_kernel_expansion(
    delta: ArrayLike, order: int = 0, n_rank: Optional[float] = None
) -> ArrayLike:
    if order not in (0, 2, 4):
        raise ValueError(f"Expansion order must be 0, 2 or 4, got {order}")
    if order > 0 and n_rank is None:
        raise ValueError("N is required for the finite-N terms")

    delta = np.asarray(delta, dtype=float)
    sin_delta = np.sin(delta)
    value = np.sinc(delta / math.pi) / math.pi
    if order >= 2:
        value = value + delta * sin_delta / (6 * math.pi * n_rank**2)
    if order >= 4:
        value = value + 7 * delta**3 * sin_delta / (360 * math.pi * n_rank**4)
    return _unwrap(value)
