"""
Tracy-Widom system for the Janossy density J1(0; [a1, a2]) of CUE_N.

The state (q_j, p_j, u, v, w, log J) is integrated as a flat real vector along straight
segments in the (a1, a2) plane, starting from the small-interval series. Resolvents are never
integrated; they are rebuilt from the state whenever needed.
"""

import cmath
import math
from dataclasses import dataclass, fields
from logging import getLogger
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from cuegap.common import IntegrationError, NumericalError
from cuegap.kernels import SQRT_2PI, CueParams, expm1_i

logger = getLogger(__name__)

DEFAULT_RTOL = 1e-12
DEFAULT_ATOL = 1e-14
SERIES_EPSILON = 1e-8
BOUNDARY_SERIES_LIMIT = 1e-3
REALITY_LIMIT = 1e-10

_COMPLEX_FIELDS = ("q1", "p1", "q2", "p2", "u", "v", "w")
_SYMMETRIC_FIELDS = ("q", "p", "u", "v", "w")


@dataclass(frozen=True)
class TwCoefficients:
    """Coefficients of A~, B~, C~ and m~ as polynomials in e^{ix}."""

    b: complex
    mu0: complex
    mu1: complex
    alpha0: float
    alpha1: float
    beta0: float
    gamma0: float

    @classmethod
    def for_cue(cls, params: CueParams) -> "TwCoefficients":
        n = params.n_rank
        return cls(
            b=1j,
            mu0=1j,
            mu1=-1j,
            alpha0=-n / 2 + 1 / n,
            alpha1=n / 2,
            beta0=-1 - 1 / n,
            gamma0=1 - 1 / n,
        )


@dataclass(frozen=True)
class TwState:
    q1: complex
    p1: complex
    q2: complex
    p2: complex
    u: complex
    v: complex
    w: complex
    logJ: float

    def to_vector(self) -> np.ndarray:
        values = [getattr(self, name) for name in _COMPLEX_FIELDS]
        return np.array(
            [part for value in values for part in (value.real, value.imag)] + [self.logJ]
        )

    @classmethod
    def from_vector(cls, y: Sequence[float]) -> "TwState":
        values = [complex(y[2 * i], y[2 * i + 1]) for i in range(len(_COMPLEX_FIELDS))]
        return cls(*values, logJ=float(y[-1]))

    @property
    def janossy(self) -> float:
        return math.exp(self.logJ)


@dataclass(frozen=True)
class TwDerivative:
    """Derivative of every TwState field; the log J component keeps its imaginary residue."""

    q1: complex
    p1: complex
    q2: complex
    p2: complex
    u: complex
    v: complex
    w: complex
    logJ: complex

    def scaled(self, factor: float) -> "TwDerivative":
        return TwDerivative(*(getattr(self, f.name) * factor for f in fields(self)))

    def __add__(self, other: "TwDerivative") -> "TwDerivative":
        return TwDerivative(
            *(getattr(self, f.name) + getattr(other, f.name) for f in fields(self))
        )

    def to_vector(self) -> np.ndarray:
        values = [getattr(self, name) for name in _COMPLEX_FIELDS]
        return np.array(
            [part for value in values for part in (value.real, value.imag)]
            + [self.logJ.real]
        )


@dataclass(frozen=True)
class RayPath:
    target_a1: float
    target_a2: float
    epsilon: float = SERIES_EPSILON
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        if not 0 < self.epsilon <= 1e-4:
            raise ValueError(f"Series start must be in (0, 1e-4], got {self.epsilon}")
        if not self.target_a1 < 0 < self.target_a2:
            raise ValueError(
                f"Ray target ({self.target_a1}, {self.target_a2}) must straddle the origin"
            )
        if self.target_a2 - self.target_a1 >= 2 * math.pi:
            raise ValueError("Ray target interval wraps the full circle")
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("Integrator tolerances must be positive")


@dataclass(frozen=True)
class Resolvents:
    r11: float
    r22: float
    r12: float

    @property
    def pc_factor(self) -> float:
        """R11 R22 - R12^2, the mixed second log-derivative combination."""
        return self.r11 * self.r22 - self.r12 * self.r12


@dataclass(frozen=True)
class EndpointPartials:
    d1: TwDerivative
    d2: TwDerivative
    r11: complex
    r22: complex
    r12: complex


def endpoint_partials(s: TwState, a1: float, a2: float, n: float) -> EndpointPartials:
    """Partial derivatives with respect to a1 and a2. No domain checks: the N -> -N check
    evaluates this at mirrored endpoints and negative N."""
    e1 = complex(expm1_i(a1))
    e2 = complex(expm1_i(a2))
    m1 = -1j * e1
    m2 = -1j * e2
    r12 = (s.q1 * s.p2 - s.p1 * s.q2) / (e1 - e2)

    q_shift = (n + 1) * (s.u - 1 / n)
    p_shift = (n - 1) * (s.w - 1 / n)
    dq1_1 = (-((n + 1) / 2 * -e1 + s.v - 1 / n) * s.q1 + q_shift * s.p1 - m2 * r12 * s.q2) / m1
    dp1_1 = (((n - 1) / 2 * -e1 + s.v - 1 / n) * s.p1 + p_shift * s.q1 - m2 * r12 * s.p2) / m1
    dq2_2 = (-((n + 1) / 2 * -e2 + s.v - 1 / n) * s.q2 + q_shift * s.p2 + m1 * r12 * s.q1) / m2
    dp2_2 = (((n - 1) / 2 * -e2 + s.v - 1 / n) * s.p2 + p_shift * s.q2 + m1 * r12 * s.p1) / m2

    # l'Hopital limit of R_jk at coinciding endpoints
    r11 = -1j * cmath.exp(-1j * a1) * (s.p1 * dq1_1 - s.q1 * dp1_1)
    r22 = -1j * cmath.exp(-1j * a2) * (s.p2 * dq2_2 - s.q2 * dp2_2)

    d1 = TwDerivative(
        q1=dq1_1,
        p1=dp1_1,
        q2=-r12 * s.q1,
        p2=-r12 * s.p1,
        u=-s.q1 * s.q1,
        v=-s.q1 * s.p1,
        w=-s.p1 * s.p1,
        logJ=r11,
    )
    d2 = TwDerivative(
        q1=r12 * s.q2,
        p1=r12 * s.p2,
        q2=dq2_2,
        p2=dp2_2,
        u=s.q2 * s.q2,
        v=s.q2 * s.p2,
        w=s.p2 * s.p2,
        logJ=-r22,
    )
    return EndpointPartials(d1=d1, d2=d2, r11=r11, r22=r22, r12=r12)


def _check_endpoints(a1: float, a2: float) -> None:
    if not a1 < 0 < a2:
        raise ValueError(f"Endpoints ({a1}, {a2}) must straddle the origin")
    if a2 - a1 >= 2 * math.pi:
        raise NumericalError(f"Endpoints ({a1}, {a2}) reach a singular phase")


def solve_real_system(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    span: Tuple[float, float],
    y0: np.ndarray,
    t_eval: Optional[Sequence[float]],
    rtol: float,
    atol: float,
    path_text: str,
    n_rank: Optional[float] = None,
):
    """DOP853 run shared by every system in the package; failures become IntegrationError."""

    def checked(t: float, y: np.ndarray) -> np.ndarray:
        result = rhs(t, y)
        if not np.all(np.isfinite(result)):
            raise IntegrationError(
                f"Non-finite derivative at {t:.6g}", path=path_text, n_rank=n_rank
            )
        return result

    solution = solve_ivp(
        checked, span, y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol
    )
    if not solution.success:
        raise IntegrationError(
            "Integration failed", path=path_text, n_rank=n_rank, solver_message=solution.message
        )
    logger.debug("Integrated %s (N=%r) with %d evaluations", path_text, n_rank, solution.nfev)
    return solution


def _series_q(a: float, n: float) -> complex:
    return complex(
        -(n + 1) * (n + 2) * a**2 / 12, (n + 1) * a / 2 - (n + 1) ** 3 * a**3 / 48
    ) / SQRT_2PI


def _series_p(a: float, n: float) -> complex:
    return complex(
        -(n - 1) * (n - 2) * a**2 / 12, -(n - 1) * a / 2 + (n - 1) ** 3 * a**3 / 48
    ) / SQRT_2PI


def boundary_state(a1: float, a2: float, params: CueParams) -> TwState:
    """Small-interval series, exact through cubic order in the endpoints."""
    if max(abs(a1), abs(a2)) > BOUNDARY_SERIES_LIMIT:
        raise ValueError(
            f"Endpoints ({a1}, {a2}) are outside the series domain |a| <= {BOUNDARY_SERIES_LIMIT}"
        )

    n = params.n_rank
    cubes = a1**3 - a2**3
    return TwState(
        q1=_series_q(a1, n),
        p1=_series_p(a1, n),
        q2=_series_q(a2, n),
        p2=_series_p(a2, n),
        u=complex((n + 1) ** 2 / (24 * math.pi) * cubes),
        v=complex(-(n * n - 1) / (24 * math.pi) * cubes),
        w=complex((n - 1) ** 2 / (24 * math.pi) * cubes),
        logJ=n * (n * n - 1) / (72 * math.pi) * cubes,
    )


def tw_rhs(
    state: TwState,
    a1: float,
    a2: float,
    params: CueParams,
    direction: Tuple[float, float],
) -> TwDerivative:
    """Directional derivative da1 d/da1 + da2 d/da2 of every state field."""
    _check_endpoints(a1, a2)
    partials = endpoint_partials(state, a1, a2, params.n_rank)
    da1, da2 = direction
    return partials.d1.scaled(da1) + partials.d2.scaled(da2)


def resolvents(state: TwState, a1: float, a2: float, params: CueParams) -> Resolvents:
    _check_endpoints(a1, a2)
    partials = endpoint_partials(state, a1, a2, params.n_rank)
    return Resolvents(
        r11=partials.r11.real, r22=partials.r22.real, r12=partials.r12.real
    )


@dataclass(frozen=True)
class PathSolution:
    states: List[TwState]
    points: List[Tuple[float, float]]
    nfev: int

    @property
    def final(self) -> TwState:
        return self.states[-1]


def integrate_path(
    start_state: TwState,
    start: Tuple[float, float],
    end: Tuple[float, float],
    params: CueParams,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    evaluation_fractions: Optional[Sequence[float]] = None,
) -> PathSolution:
    """Integrate along the straight segment from ``start`` to ``end``.

    ``evaluation_fractions`` are positions in [0, 1] along the segment where states are
    reported (in increasing order); the end point is always reported last.
    """
    for point in (start, end):
        _check_endpoints(*point)

    n = params.n_rank
    da1 = end[0] - start[0]
    da2 = end[1] - start[1]

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        partials = endpoint_partials(
            TwState.from_vector(y), start[0] + s * da1, start[1] + s * da2, n
        )
        return (partials.d1.scaled(da1) + partials.d2.scaled(da2)).to_vector()

    fractions = [] if evaluation_fractions is None else [float(f) for f in evaluation_fractions]
    if not fractions or fractions[-1] < 1.0:
        fractions.append(1.0)

    path_text = f"({start[0]:.6g}, {start[1]:.6g}) -> ({end[0]:.6g}, {end[1]:.6g})"
    solution = solve_real_system(
        rhs, (0.0, 1.0), start_state.to_vector(), fractions, rtol, atol, path_text, n
    )
    states = [TwState.from_vector(column) for column in solution.y.T]
    points = [(start[0] + s * da1, start[1] + s * da2) for s in solution.t]
    return PathSolution(states=states, points=points, nfev=solution.nfev)


def integrate_ray(
    path: RayPath,
    params: CueParams,
    evaluation_scales: Optional[Sequence[float]] = None,
) -> TwState:
    """Integrate along (a1, a2) = s (target_a1, target_a2) from s = epsilon to s = 1."""
    return ray_solution(path, params, evaluation_scales).final


def ray_solution(
    path: RayPath,
    params: CueParams,
    evaluation_scales: Optional[Sequence[float]] = None,
) -> PathSolution:
    eps = path.epsilon
    start = (eps * path.target_a1, eps * path.target_a2)
    fractions = None
    if evaluation_scales is not None:
        fractions = [(s - eps) / (1 - eps) for s in evaluation_scales]
    return integrate_path(
        boundary_state(start[0], start[1], params),
        start,
        (path.target_a1, path.target_a2),
        params,
        rtol=path.rtol,
        atol=path.atol,
        evaluation_fractions=fractions,
    )


@dataclass(frozen=True)
class SymmetricState:
    """State on I = [-t, t], where q = q2 = conj(q1), p = p2 = conj(p1)."""

    q: complex
    p: complex
    u: complex
    v: complex
    w: complex
    logJ: float

    def to_vector(self) -> np.ndarray:
        values = [getattr(self, name) for name in _SYMMETRIC_FIELDS]
        return np.array(
            [part for value in values for part in (value.real, value.imag)] + [self.logJ]
        )

    @classmethod
    def from_vector(cls, y: Sequence[float]) -> "SymmetricState":
        values = [complex(y[2 * i], y[2 * i + 1]) for i in range(len(_SYMMETRIC_FIELDS))]
        return cls(*values, logJ=float(y[-1]))

    def to_tw_state(self) -> TwState:
        return TwState(
            q1=self.q.conjugate(),
            p1=self.p.conjugate(),
            q2=self.q,
            p2=self.p,
            u=self.u,
            v=self.v,
            w=self.w,
            logJ=self.logJ,
        )


@dataclass(frozen=True)
class SymmetricDerivative:
    q: complex
    p: complex
    u: complex
    v: complex
    w: complex
    logJ: complex

    def to_vector(self) -> np.ndarray:
        values = [getattr(self, name) for name in _SYMMETRIC_FIELDS]
        return np.array(
            [part for value in values for part in (value.real, value.imag)]
            + [self.logJ.real]
        )


def symmetric_boundary_state(t: float, params: CueParams) -> SymmetricState:
    full = boundary_state(-t, t, params)
    return SymmetricState(q=full.q2, p=full.p2, u=full.u, v=full.v, w=full.w, logJ=full.logJ)


def symmetric_rhs(state: SymmetricState, t: float, params: CueParams) -> SymmetricDerivative:
    """d/dt = d/da2 - d/da1 on the symmetric interval [-t, t]."""
    if t <= 0:
        raise ValueError("Symmetric system needs t > 0; start from the series")
    if t >= math.pi:
        raise NumericalError(f"Half-width {t} reaches a singular phase")

    n = params.n_rank
    q, p, u, v, w = state.q, state.p, state.u, state.v, state.w
    qc, pc = q.conjugate(), p.conjugate()
    e = complex(expm1_i(t))
    m = -1j * e
    d = q * pc - p * qc
    tan_half = math.tan(t / 2)

    dq = (
        -((n + 1) / 2 * -e + v - 1 / n) * q + (n + 1) * (u - 1 / n) * p + tan_half * d * qc
    ) / m
    dp = (
        ((n - 1) / 2 * -e + v - 1 / n) * p + (n - 1) * (w - 1 / n) * q + tan_half * d * pc
    ) / m
    dlog = (
        1j * cmath.exp(-1j * t) * (p * dq - q * dp)
        - 1j * cmath.exp(1j * t) * (pc * dq.conjugate() - qc * dp.conjugate())
        + d * d / math.tan(t)
    )
    return SymmetricDerivative(
        q=dq,
        p=dp,
        u=q * q + qc * qc,
        v=q * p + qc * pc,
        w=p * p + pc * pc,
        logJ=dlog,
    )


@dataclass(frozen=True)
class SymmetricSolution:
    t: np.ndarray
    states: List[SymmetricState]
    derivatives: List[SymmetricDerivative]

    @property
    def final(self) -> SymmetricState:
        return self.states[-1]


def integrate_symmetric(
    t_values: Sequence[float],
    params: CueParams,
    epsilon: float = SERIES_EPSILON,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> SymmetricSolution:
    """States and t-derivatives of the symmetric system at increasing half-widths."""
    t_values = np.asarray(t_values, dtype=float)
    if t_values.size == 0:
        raise ValueError("No half-widths requested")
    if np.any(np.diff(t_values) <= 0) or t_values[0] <= epsilon:
        raise ValueError("Half-widths must increase and exceed the series start")

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return symmetric_rhs(SymmetricState.from_vector(y), t, params).to_vector()

    solution = solve_real_system(
        rhs,
        (epsilon, t_values[-1]),
        symmetric_boundary_state(epsilon, params).to_vector(),
        t_values,
        rtol,
        atol,
        f"[-t, t], t in [{epsilon:.3g}, {t_values[-1]:.6g}]",
        params.n_rank,
    )

    states = [SymmetricState.from_vector(column) for column in solution.y.T]
    derivatives = [symmetric_rhs(s, t, params) for s, t in zip(states, solution.t)]
    return SymmetricSolution(t=solution.t, states=states, derivatives=derivatives)


def index_shift(
    state: TwState, a_j: float, j: int, v_tilde: Optional[complex] = None
) -> Tuple[complex, complex]:
    """(q_1j, p_1j) expressed through the index-zero variables at endpoint j."""
    if j not in (1, 2):
        raise ValueError(f"Endpoint index must be 1 or 2, got {j}")
    q, p = (state.q1, state.p1) if j == 1 else (state.q2, state.p2)
    if v_tilde is None:
        v_tilde = state.v
    phase = cmath.exp(1j * a_j)
    return (
        phase * q - (state.v * q - state.u * p),
        phase * p - (state.w * q - v_tilde * p),
    )


def nonuniversal_derivatives(
    state: TwState,
    a1: float,
    a2: float,
    coefficients: TwCoefficients,
    v_tilde: Optional[complex] = None,
) -> Tuple[complex, complex, complex, complex]:
    """(dq1/da1, dp1/da1, dq2/da2, dp2/da2) from the generic nonuniversal equations for
    linear m(x), with q_1j, p_1j supplied by index_shift."""
    c = coefficients
    if v_tilde is None:
        v_tilde = state.v
    half_b = c.b / 2
    phases = (cmath.exp(c.b * a1), cmath.exp(c.b * a2))
    ms = (c.mu0 + c.mu1 * phases[0], c.mu0 + c.mu1 * phases[1])
    qs = (state.q1, state.q2)
    ps = (state.p1, state.p2)
    r12 = (qs[0] * ps[1] - ps[0] * qs[1]) / (phases[0] - phases[1])

    result = []
    for j, k in ((0, 1), (1, 0)):
        q1j, p1j = index_shift(state, (a1, a2)[j], j + 1, v_tilde)
        sign_k = 1 if k == 1 else -1
        dq = (
            (c.alpha0 + half_b * c.mu0 + (c.alpha1 - half_b * c.mu1) * state.v) * qs[j]
            + (c.alpha1 + half_b * c.mu1) * q1j
            + (c.beta0 + (c.alpha1 + half_b * c.mu1) * state.u) * ps[j]
            - sign_k * ms[k] * r12 * qs[k]
        ) / ms[j]
        dp = (
            (-c.gamma0 + (c.alpha1 - half_b * c.mu1) * state.w) * qs[j]
            + (-c.alpha0 + half_b * c.mu0 + c.alpha1 * v_tilde + half_b * c.mu1 * state.v)
            * ps[j]
            + (-c.alpha1 + half_b * c.mu1) * p1j
            - sign_k * ms[k] * r12 * ps[k]
        ) / ms[j]
        result.extend([dq, dp])
    return result[0], result[1], result[2], result[3]


def flip_state(state: TwState) -> TwState:
    """Relabelling that accompanies N -> -N: q_j <-> conj(p_j), u <-> -conj(w),
    v -> -conj(v)."""
    return TwState(
        q1=state.p1.conjugate(),
        p1=state.q1.conjugate(),
        q2=state.p2.conjugate(),
        p2=state.q2.conjugate(),
        u=-state.w.conjugate(),
        v=-state.v.conjugate(),
        w=-state.u.conjugate(),
        logJ=state.logJ,
    )


def flip_derivative(derivative: TwDerivative) -> TwDerivative:
    return TwDerivative(
        q1=derivative.p1.conjugate(),
        p1=derivative.q1.conjugate(),
        q2=derivative.p2.conjugate(),
        p2=derivative.q2.conjugate(),
        u=-derivative.w.conjugate(),
        v=-derivative.v.conjugate(),
        w=-derivative.u.conjugate(),
        logJ=derivative.logJ.conjugate(),
    )


def unfolded_partials(
    state: TwState, x1: float, x2: float, n_signed: float
) -> Tuple[TwDerivative, TwDerivative]:
    """Partials with respect to the unfolded endpoints x_j = N a_j / 2, for either sign of N."""
    if n_signed == 0:
        raise ValueError("N must be nonzero")
    scale = 2 / n_signed
    partials = endpoint_partials(state, scale * x1, scale * x2, n_signed)
    return partials.d1.scaled(scale), partials.d2.scaled(scale)


def janossy_tw(
    a1: float,
    a2: float,
    params: CueParams,
    epsilon: float = SERIES_EPSILON,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """J1(0; [a1, a2]); symmetric intervals go through the one-variable system."""
    if a1 == 0 and a2 == 0:
        return 1.0
    if max(abs(a1), abs(a2)) <= epsilon:
        return boundary_state(a1, a2, params).janossy

    if a1 == -a2:
        return math.exp(integrate_symmetric([a2], params, epsilon, rtol, atol).final.logJ)
    return integrate_ray(RayPath(a1, a2, epsilon, rtol, atol), params).janossy
