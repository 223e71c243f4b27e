"""
N -> infinity (sine-kernel) limit of the Janossy system.

Internally the endpoints live in the variable tau with mean spacing pi, where the limit
system has its simplest form; the distribution helpers convert to unit mean spacing.
"""

import math
from dataclasses import dataclass, fields
from logging import getLogger
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from cuegap.grids import DistributionGrid, GridSpec
from cuegap.kernels import SQRT_2PI
from cuegap.tracy_widom import DEFAULT_ATOL, DEFAULT_RTOL, solve_real_system

logger = getLogger(__name__)

SINE_SERIES_START = 1e-6
SINE_SERIES_LIMIT = 1e-3
# support caps in unit mean spacings
SINE_SUPPORT_CAP = 6.0
SINE_PNN_CAP = 4.0
GAP_RATIO_ORDER = 64


@dataclass(frozen=True)
class SineState:
    """Symmetric interval [-t, t]: q = q2 = conj(q1), u real."""

    q: complex
    u: complex
    logJ: float

    def to_vector(self) -> np.ndarray:
        return np.array([self.q.real, self.q.imag, self.u.real, self.u.imag, self.logJ])

    @classmethod
    def from_vector(cls, y: Sequence[float]) -> "SineState":
        return cls(q=complex(y[0], y[1]), u=complex(y[2], y[3]), logJ=float(y[4]))

    @property
    def trajectory_invariant(self) -> float:
        """u - 2 Im(q^2); constant (zero) along the symmetric flow."""
        return self.u.real - 2 * (self.q * self.q).imag


@dataclass(frozen=True)
class SineDerivative:
    q: complex
    u: complex
    logJ: complex

    def to_vector(self) -> np.ndarray:
        return np.array([self.q.real, self.q.imag, self.u.real, self.u.imag, self.logJ.real])


@dataclass(frozen=True)
class SinePairState:
    q1: complex
    q2: complex
    u: complex
    logJ: float

    def to_vector(self) -> np.ndarray:
        return np.array(
            [self.q1.real, self.q1.imag, self.q2.real, self.q2.imag, self.u.real, self.u.imag,
             self.logJ]
        )

    @classmethod
    def from_vector(cls, y: Sequence[float]) -> "SinePairState":
        return cls(
            q1=complex(y[0], y[1]), q2=complex(y[2], y[3]), u=complex(y[4], y[5]),
            logJ=float(y[6]),
        )


@dataclass(frozen=True)
class SinePairDerivative:
    q1: complex
    q2: complex
    u: complex
    logJ: complex

    def scaled(self, factor: float) -> "SinePairDerivative":
        return SinePairDerivative(*(getattr(self, f.name) * factor for f in fields(self)))

    def __add__(self, other: "SinePairDerivative") -> "SinePairDerivative":
        return SinePairDerivative(
            *(getattr(self, f.name) + getattr(other, f.name) for f in fields(self))
        )

    def to_vector(self) -> np.ndarray:
        return np.array(
            [self.q1.real, self.q1.imag, self.q2.real, self.q2.imag, self.u.real, self.u.imag,
             self.logJ.real]
        )


@dataclass(frozen=True)
class SinePartials:
    d1: SinePairDerivative
    d2: SinePairDerivative
    r11: float
    r22: float
    r12: float

    @property
    def pc_factor(self) -> float:
        return self.r11 * self.r22 - self.r12 * self.r12


def _series_q(a: float) -> complex:
    return complex(-(a**2) / 3, a - a**3 / 6) / SQRT_2PI


def sine_boundary_state(t: float) -> SineState:
    if not 0 <= t <= SINE_SERIES_LIMIT:
        raise ValueError(f"Half-width {t} is outside the series domain")
    return SineState(
        q=_series_q(t), u=complex(-2 * t**3 / (3 * math.pi)), logJ=-2 * t**3 / (9 * math.pi)
    )


def sine_pair_boundary_state(a1: float, a2: float) -> SinePairState:
    if max(abs(a1), abs(a2)) > SINE_SERIES_LIMIT:
        raise ValueError(f"Endpoints ({a1}, {a2}) are outside the series domain")
    cubes = a1**3 - a2**3
    return SinePairState(
        q1=_series_q(a1),
        q2=_series_q(a2),
        u=complex(cubes / (3 * math.pi)),
        logJ=cubes / (9 * math.pi),
    )


def sine_symmetric_rhs(state: SineState, t: float) -> SineDerivative:
    if t <= 0:
        raise ValueError("Symmetric limit system needs t > 0; start from the series")

    q, u = state.q, state.u
    qc = q.conjugate()
    dq = 1j * q + (u - 1) * qc / t
    q2_minus = q * q - qc * qc
    dlog = 2j * (qc * dq - q * dq.conjugate()) + q2_minus * q2_minus / t
    return SineDerivative(q=dq, u=2 * (q * q + qc * qc), logJ=dlog)


def autonomous_rhs(q: complex, t: float) -> complex:
    """q' with u eliminated through u = 2 Im(q^2)."""
    return 1j * q + (2 * (q * q).imag - 1) * q.conjugate() / t


def sine_asymmetric_rhs(state: SinePairState, a1: float, a2: float) -> SinePartials:
    if not a1 < 0 < a2:
        raise ValueError(f"Endpoints ({a1}, {a2}) must straddle the origin")

    q1, q2, u = state.q1, state.q2, state.u
    r12 = 2 * (q1 * q2.conjugate()).imag / (a1 - a2)
    dq1_1 = (1j * a1 * q1 + (u - 1) * q1.conjugate() - a2 * r12 * q2) / a1
    dq2_2 = (1j * a2 * q2 + (u - 1) * q2.conjugate() + a1 * r12 * q1) / a2
    r11 = 2 * (q1.conjugate() * dq1_1).imag
    r22 = 2 * (q2.conjugate() * dq2_2).imag

    d1 = SinePairDerivative(q1=dq1_1, q2=-r12 * q1, u=-2 * q1 * q1, logJ=complex(r11))
    d2 = SinePairDerivative(q1=r12 * q2, q2=dq2_2, u=2 * q2 * q2, logJ=complex(-r22))
    return SinePartials(d1=d1, d2=d2, r11=r11, r22=r22, r12=r12)


def integrate_sine_symmetric(
    t_values: Sequence[float],
    epsilon: float = SINE_SERIES_START,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Tuple[List[SineState], List[SineDerivative]]:
    t_values = np.asarray(t_values, dtype=float)
    if t_values.size == 0 or np.any(np.diff(t_values) <= 0) or t_values[0] <= epsilon:
        raise ValueError("Half-widths must increase and exceed the series start")

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return sine_symmetric_rhs(SineState.from_vector(y), t).to_vector()

    solution = solve_real_system(
        rhs,
        (epsilon, t_values[-1]),
        sine_boundary_state(epsilon).to_vector(),
        t_values,
        rtol,
        atol,
        f"sine [-t, t], t <= {t_values[-1]:.6g}",
    )
    states = [SineState.from_vector(column) for column in solution.y.T]
    return states, [sine_symmetric_rhs(s, t) for s, t in zip(states, solution.t)]


def integrate_sine_path(
    start_state: SinePairState,
    start: Tuple[float, float],
    end: Tuple[float, float],
    evaluation_fractions: Optional[Sequence[float]] = None,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> List[SinePairState]:
    da1 = end[0] - start[0]
    da2 = end[1] - start[1]

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        partials = sine_asymmetric_rhs(
            SinePairState.from_vector(y), start[0] + s * da1, start[1] + s * da2
        )
        return (partials.d1.scaled(da1) + partials.d2.scaled(da2)).to_vector()

    fractions = [] if evaluation_fractions is None else [float(f) for f in evaluation_fractions]
    if not fractions or fractions[-1] < 1.0:
        fractions.append(1.0)

    solution = solve_real_system(
        rhs,
        (0.0, 1.0),
        start_state.to_vector(),
        fractions,
        rtol,
        atol,
        f"sine ({start[0]:.6g}, {start[1]:.6g}) -> ({end[0]:.6g}, {end[1]:.6g})",
    )
    return [SinePairState.from_vector(column) for column in solution.y.T]


def sine_ray_state(
    a1: float, a2: float, epsilon: float = SINE_SERIES_START
) -> SinePairState:
    start = (epsilon * a1, epsilon * a2)
    return integrate_sine_path(sine_pair_boundary_state(*start), start, (a1, a2))[-1]


def pnn_limit(t_values: Sequence[float]) -> np.ndarray:
    """P_nn^(0) at unit mean spacing; zero beyond the support cap."""
    t_values = np.asarray(t_values, dtype=float)
    result = np.zeros_like(t_values)
    inside = (t_values > 0) & (t_values <= SINE_PNN_CAP)
    if np.any(inside):
        states, derivatives = integrate_sine_symmetric(math.pi * t_values[inside])
        result[inside] = [
            -math.pi * math.exp(s.logJ) * d.logJ.real for s, d in zip(states, derivatives)
        ]
    return result


def pc_limit(a: float, b: float) -> float:
    """P_c^(0)(a, b) at unit mean spacing from the resolvent closed form."""
    if a <= 0 or b <= 0:
        raise ValueError("Spacings must be positive")
    if a + b > SINE_SUPPORT_CAP:
        return 0.0
    a1, a2 = -math.pi * a, math.pi * b
    state = sine_ray_state(a1, a2)
    partials = sine_asymmetric_rhs(state, a1, a2)
    return math.pi**2 * math.exp(state.logJ) * partials.pc_factor


def pc_limit_grid(a_values: Sequence[float], b_values: Sequence[float]) -> np.ndarray:
    """P_c^(0) on a product grid: one ray per a, then a leg along a2 through every b."""
    a_values = np.asarray(a_values, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    if np.any(a_values <= 0) or np.any(np.diff(b_values) <= 0) or b_values[0] <= 0:
        raise ValueError("Grid axes must be positive and b must increase")

    values = np.zeros((len(a_values), len(b_values)))
    for i, a in enumerate(a_values):
        b_inside = b_values[a + b_values <= SINE_SUPPORT_CAP]
        if b_inside.size == 0:
            continue
        a1 = -math.pi * a
        b_start = math.pi * b_inside[0]
        start_state = sine_ray_state(a1, b_start)
        if b_inside.size == 1:
            states = [start_state]
        else:
            b_end = math.pi * b_inside[-1]
            fractions = (math.pi * b_inside - b_start) / (b_end - b_start)
            states = integrate_sine_path(
                start_state, (a1, b_start), (a1, b_end), evaluation_fractions=fractions
            )
        for j, (b, state) in enumerate(zip(b_inside, states)):
            partials = sine_asymmetric_rhs(state, a1, math.pi * b)
            values[i, j] = math.pi**2 * math.exp(state.logJ) * partials.pc_factor
    return values


def sine_ray_moments(
    r: float,
    cap: float = SINE_SUPPORT_CAP,
    epsilon: float = SINE_SERIES_START,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Tuple[float, float]:
    """(int b P_c(r b, b) db, int b^2 P_c(r b, b) db) at unit mean spacing along the ray
    a = r b, integrated together with the state up to a + b = cap."""
    if r <= 0:
        raise ValueError(f"Gap ratio must be positive, got {r}")

    s_max = math.pi * cap / (1 + r)

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        state = SinePairState.from_vector(y[:7])
        partials = sine_asymmetric_rhs(state, -r * s, s)
        flow = partials.d1.scaled(-r) + partials.d2
        density = math.exp(state.logJ) * partials.pc_factor
        return np.concatenate([flow.to_vector(), [s * density, s * s * density]])

    s0 = epsilon / max(1.0, r)
    seed = sine_pair_boundary_state(-r * s0, s0)
    solution = solve_real_system(
        rhs,
        (s0, s_max),
        np.concatenate([seed.to_vector(), [0.0, 0.0]]),
        None,
        rtol,
        atol,
        f"sine ray r={r:.6g}",
    )
    m1, m2 = solution.y[7, -1], solution.y[8, -1]
    return float(m1), float(m2 / math.pi)


def pr_limit(r: float) -> float:
    return sine_ray_moments(r)[0]


@dataclass(frozen=True)
class RatioSummary:
    """Ray-fan integrals over r in (0, 1]; the r > 1 half follows from the swap symmetry."""

    total: float
    mean_ratio_tilde: float
    mean_spacing: float


def summarize_ray_fan(
    moments: Sequence[Tuple[float, float]], nodes: np.ndarray, weights: np.ndarray
) -> RatioSummary:
    m1 = np.array([m[0] for m in moments])
    m2 = np.array([m[1] for m in moments])
    return RatioSummary(
        total=float(2 * np.sum(weights * m1)),
        mean_ratio_tilde=float(2 * np.sum(weights * nodes * m1)),
        mean_spacing=float(np.sum(weights * (1 + nodes) * m2)),
    )


def unit_ratio_nodes(order: int = GAP_RATIO_ORDER) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(order)
    return (x + 1) / 2, w / 2


def limit_ratio_summary(order: int = GAP_RATIO_ORDER) -> RatioSummary:
    nodes, weights = unit_ratio_nodes(order)
    moments = [sine_ray_moments(float(r)) for r in nodes]
    return summarize_ray_fan(moments, nodes, weights)


def mean_gap_ratio_limit(order: int = GAP_RATIO_ORDER) -> float:
    return limit_ratio_summary(order).mean_ratio_tilde


def limit_distributions(spec: GridSpec) -> Dict[str, DistributionGrid]:
    """P_nn^(0), P_c^(0) and P_r^(0) tabulated on ``spec`` at unit mean spacing."""
    metadata = {"series_start": SINE_SERIES_START, "support_cap": SINE_SUPPORT_CAP}
    logger.info("Tabulating sine-kernel limit distributions")

    pnn_grid = DistributionGrid.one_dimensional(
        "Pnn", None, spec.spacing_axis(), pnn_limit(spec.spacing_axis()), metadata
    )
    pc_values = pc_limit_grid(spec.spacing_axis(), spec.spacing_axis())
    pc_grid = DistributionGrid.two_dimensional(
        "Pc", None, spec.spacing_axis(), spec.spacing_axis(), pc_values, metadata
    )
    ratios = spec.ratio_axis()
    pr_grid = DistributionGrid.one_dimensional(
        "Pr", None, ratios, np.array([pr_limit(float(r)) for r in ratios]), metadata
    )
    return {"Pnn": pnn_grid, "Pc": pc_grid, "Pr": pr_grid}
