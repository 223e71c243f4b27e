"""
Finite-N spacing distributions derived from the Tracy-Widom state, and their approach to the
sine-kernel limit.

Every public function takes and returns unfolded quantities (unit mean spacing); the raw
eigenphase variables only appear inside.
"""

import math
from dataclasses import dataclass
from functools import partial
from logging import getLogger
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import roots_legendre

from cuegap import sine_limit
from cuegap.cache import TableCache
from cuegap.common import NumericalError
from cuegap.grids import DistributionGrid, GridSpec
from cuegap.kernels import CueParams
from cuegap.parallel import pmap
from cuegap.sine_limit import RatioSummary, summarize_ray_fan, unit_ratio_nodes
from cuegap.tracy_widom import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    SERIES_EPSILON,
    RayPath,
    TwState,
    boundary_state,
    endpoint_partials,
    integrate_path,
    integrate_symmetric,
    ray_solution,
    resolvents,
    solve_real_system,
)

logger = getLogger(__name__)

FINITE_DIFFERENCE_STEP = 1e-4
PNN_MARGINAL_ORDER = 48


def support_cap(n_rank: float) -> float:
    """Largest unfolded a + b evaluated at rank N; beyond it the distributions are set to 0."""
    return min(sine_limit.SINE_SUPPORT_CAP, 0.7 * n_rank)


def pnn_cap(n_rank: float) -> float:
    return min(sine_limit.SINE_PNN_CAP, 0.4 * n_rank)


def _raw(params: CueParams, unfolded: float) -> float:
    return 2 * math.pi * unfolded / params.n_rank


def pnn_values(t_values: Sequence[float], params: CueParams) -> np.ndarray:
    """P_nn(t) = -dJ/dt on [-t, t], read off the symmetric system without differencing."""
    t_values = np.asarray(t_values, dtype=float)
    if np.any(t_values <= 0):
        raise ValueError("Spacings must be positive")

    result = np.zeros_like(t_values)
    inside = t_values <= pnn_cap(params.n_rank)
    if np.any(inside):
        raw = 2 * math.pi * t_values[inside] / params.n_rank
        solution = integrate_symmetric(raw, params)
        result[inside] = [
            -math.exp(s.logJ) * d.logJ.real
            for s, d in zip(solution.states, solution.derivatives)
        ]
    return result * 2 * math.pi / params.n_rank


def pnn(t: float, params: CueParams) -> float:
    return float(pnn_values([t], params)[0])


def _pc_from_state(state: TwState, a1: float, a2: float, params: CueParams) -> float:
    return math.exp(state.logJ) * resolvents(state, a1, a2, params).pc_factor


def _ray_state(a1: float, a2: float, params: CueParams) -> TwState:
    return ray_solution(RayPath(a1, a2), params).final


def pc_finite_difference(
    a: float, b: float, params: CueParams, h: float = FINITE_DIFFERENCE_STEP
) -> float:
    """P_c by centered differences in a1 of dJ/da2 = -J R22, Richardson-extrapolated."""
    a1, a2 = -_raw(params, a), _raw(params, b)
    h_raw = _raw(params, h)

    def d2_janossy(x1: float) -> float:
        state = _ray_state(x1, a2, params)
        return -math.exp(state.logJ) * resolvents(state, x1, a2, params).r22

    def centered(step: float) -> float:
        return (d2_janossy(a1 + step) - d2_janossy(a1 - step)) / (2 * step)

    mixed = (4 * centered(h_raw / 2) - centered(h_raw)) / 3
    return -mixed * (2 * math.pi / params.n_rank) ** 2


def pc(a: float, b: float, params: CueParams, method: str = "resolvent") -> float:
    """Joint density of the left (a) and right (b) spacings around a conditioned level."""
    if a <= 0 or b <= 0:
        raise ValueError("Spacings must be positive")
    if a + b > support_cap(params.n_rank):
        return 0.0

    if method == "finite_difference":
        return pc_finite_difference(a, b, params)
    if method != "resolvent":
        raise ValueError(f"Unknown P_c method {method!r}")

    a1, a2 = -_raw(params, a), _raw(params, b)
    value = _pc_from_state(_ray_state(a1, a2, params), a1, a2, params)
    if not math.isfinite(value):
        logger.warning("Resolvent form of P_c failed at (%g, %g); using finite differences", a, b)
        return pc_finite_difference(a, b, params)
    return value * (2 * math.pi / params.n_rank) ** 2


def _pc_leg(a: float, b_values: np.ndarray, params: CueParams) -> np.ndarray:
    """P_c(a, b) for increasing b: one ray to the first b, then a leg along a2."""
    a1 = -_raw(params, a)
    raw_b = 2 * math.pi * b_values / params.n_rank
    start_state = _ray_state(a1, raw_b[0], params)
    if len(raw_b) == 1:
        states = [start_state]
    else:
        fractions = (raw_b - raw_b[0]) / (raw_b[-1] - raw_b[0])
        states = integrate_path(
            start_state, (a1, raw_b[0]), (a1, raw_b[-1]), params,
            evaluation_fractions=fractions,
        ).states
    values = [_pc_from_state(s, a1, x2, params) for s, x2 in zip(states, raw_b)]
    return np.array(values) * (2 * math.pi / params.n_rank) ** 2


def _pc_row(a: float, b_values: np.ndarray, params: CueParams) -> np.ndarray:
    row = np.zeros(len(b_values))
    inside = a + b_values <= support_cap(params.n_rank)
    if np.any(inside):
        row[inside] = _pc_leg(a, b_values[inside], params)
    return row


def pc_grid(
    a_values: Sequence[float], b_values: Sequence[float], params: CueParams
) -> np.ndarray:
    a_values = np.asarray(a_values, dtype=float)
    b_values = np.asarray(b_values, dtype=float)
    if np.any(a_values <= 0) or b_values[0] <= 0 or np.any(np.diff(b_values) <= 0):
        raise ValueError("Grid axes must be positive and b must increase")
    rows = pmap(partial(_pc_row, b_values=b_values, params=params), list(a_values))
    return np.array(rows)


def pnn_from_pc(t: float, params: CueParams, order: int = PNN_MARGINAL_ORDER) -> float:
    """2 int_t^cap P_c(t, b) db, the nearest-neighbour density as a marginal of P_c."""
    upper = support_cap(params.n_rank) - t
    if upper <= t:
        return 0.0
    x, w = roots_legendre(order)
    half = (upper - t) / 2
    nodes = t + half * (x + 1)
    return float(2 * half * np.sum(w * _pc_leg(t, nodes, params)))


def ray_moments(
    r: float,
    params: CueParams,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Tuple[float, float]:
    """(int b P_c(r b, b) db, int b^2 P_c(r b, b) db) along the ray a = r b, accumulated as
    two extra components of the TW flow up to the support cap."""
    if r <= 0:
        raise ValueError(f"Gap ratio must be positive, got {r}")

    n = params.n_rank
    s_max = 2 * math.pi * support_cap(n) / (n * (1 + r))
    s0 = SERIES_EPSILON / max(1.0, r)

    def rhs(s: float, y: np.ndarray) -> np.ndarray:
        state = TwState.from_vector(y[:15])
        partials = endpoint_partials(state, -r * s, s, n)
        flow = partials.d1.scaled(-r) + partials.d2
        density = math.exp(state.logJ) * (
            partials.r11.real * partials.r22.real - partials.r12.real**2
        )
        return np.concatenate([flow.to_vector(), [s * density, s * s * density]])

    seed = boundary_state(-r * s0, s0, params)
    solution = solve_real_system(
        rhs,
        (s0, s_max),
        np.concatenate([seed.to_vector(), [0.0, 0.0]]),
        None,
        rtol,
        atol,
        f"ray r={r:.6g}",
        n,
    )
    m1, m2 = solution.y[15, -1], solution.y[16, -1]
    return float(m1), float(m2 * n / (2 * math.pi))


def pr(r: float, params: CueParams) -> float:
    """Gap-ratio density at r = a / b (left over right spacing)."""
    return ray_moments(r, params)[0]


def _pr_or_limit(r: float, n_rank: Optional[float]) -> float:
    if n_rank is None:
        return sine_limit.pr_limit(r)
    return pr(r, CueParams(n_rank))


def _moments_or_limit(r: float, n_rank: Optional[float]) -> Tuple[float, float]:
    if n_rank is None:
        return sine_limit.sine_ray_moments(r)
    return ray_moments(r, CueParams(n_rank))


def pr_values(r_values: Sequence[float], n_rank: Optional[float]) -> np.ndarray:
    return np.array(pmap(partial(_pr_or_limit, n_rank=n_rank), [float(r) for r in r_values]))


def ratio_summary(
    n_rank: Optional[float], order: int = sine_limit.GAP_RATIO_ORDER
) -> RatioSummary:
    """Normalization, E[r~] and mean spacing from a Gauss-Legendre fan of rays in r."""
    nodes, weights = unit_ratio_nodes(order)
    moments = pmap(partial(_moments_or_limit, n_rank=n_rank), [float(r) for r in nodes])
    return summarize_ray_fan(moments, nodes, weights)


def mean_gap_ratio(n_rank: Optional[float], order: int = sine_limit.GAP_RATIO_ORDER) -> float:
    return ratio_summary(n_rank, order).mean_ratio_tilde


def _pc_values(spec: GridSpec, n_rank: Optional[float]) -> np.ndarray:
    axis = spec.spacing_axis()
    if n_rank is None:
        return sine_limit.pc_limit_grid(axis, axis)
    return pc_grid(axis, axis, CueParams(n_rank))


def compute_grid(kind: str, n_rank: Optional[float], spec: GridSpec) -> DistributionGrid:
    """Tabulate one distribution at rank N, or the sine limit when ``n_rank`` is None."""
    metadata = {"rtol": DEFAULT_RTOL, "atol": DEFAULT_ATOL, "series_start": SERIES_EPSILON}
    logger.info("Tabulating %s for N=%s", kind, "inf" if n_rank is None else f"{n_rank:g}")
    if kind == "Pnn":
        axis = spec.spacing_axis()
        if n_rank is None:
            values = sine_limit.pnn_limit(axis)
        else:
            values = pnn_values(axis, CueParams(n_rank))
        return DistributionGrid.one_dimensional(kind, n_rank, axis, values, metadata)
    if kind == "Pc":
        axis = spec.spacing_axis()
        return DistributionGrid.two_dimensional(
            kind, n_rank, axis, axis, _pc_values(spec, n_rank), metadata
        )
    if kind == "Pr":
        axis = spec.ratio_axis()
        return DistributionGrid.one_dimensional(
            kind, n_rank, axis, pr_values(axis, n_rank), metadata
        )
    raise ValueError(f"Unknown distribution kind {kind!r}")


def cached_grid(
    kind: str, n_rank: Optional[float], spec: GridSpec, cache: Optional[TableCache] = None
) -> DistributionGrid:
    if cache is None:
        return compute_grid(kind, n_rank, spec)

    key = {"kind": kind, "N": n_rank, "spec": spec.__dict__, "rtol": DEFAULT_RTOL}
    stored = cache.load(key)
    if stored is not None:
        axes = [stored[f"axis{i}"] for i in range(int(stored["n_axes"]))]
        return DistributionGrid(kind, n_rank, axes, stored["values"],
                                {"rtol": DEFAULT_RTOL, "cached": True})

    grid = compute_grid(kind, n_rank, spec)
    arrays = {f"axis{i}": axis for i, axis in enumerate(grid.axes)}
    cache.store(key, values=grid.values, n_axes=np.array(len(grid.axes)), **arrays)
    return grid


def deviation_scaled(
    kind: str,
    n_rank: float,
    power: int,
    spec: Optional[GridSpec] = None,
    limit: Optional[DistributionGrid] = None,
    cache: Optional[TableCache] = None,
) -> DistributionGrid:
    """N^power (P_N - P^(0)) on the grid."""
    spec = spec or GridSpec()
    if limit is None:
        limit = cached_grid(kind, None, spec, cache)
    finite = compute_grid(kind, n_rank, spec)
    return finite.scaled_deviation(limit, power)


def collapse_distance(first: DistributionGrid, second: DistributionGrid) -> float:
    """Sup-norm distance between two scaled deviation curves on the same grid."""
    if not first.same_support(second):
        raise ValueError("Deviation grids have different supports")
    return float(np.max(np.abs(first.values - second.values)))


@dataclass(frozen=True)
class CorrectionFit:
    kind: str
    axes: List[np.ndarray]
    c2: np.ndarray
    c4: np.ndarray
    n_list: List[float]
    residual: np.ndarray

    @property
    def c2_sup(self) -> float:
        return float(np.max(np.abs(self.c2)))

    @property
    def c4_sup(self) -> float:
        return float(np.max(np.abs(self.c4)))


def fit_grids(finite: Sequence[DistributionGrid], limit: DistributionGrid) -> CorrectionFit:
    """Least-squares fit of P_N - P^(0) = c2 / N^2 + c4 / N^4 at every grid point."""
    n_list = [grid.n_rank for grid in finite]
    if len(set(n_list)) < 3:
        raise NumericalError(
            f"Two-term correction fit needs at least 3 distinct N, got {sorted(set(n_list))}"
        )
    for grid in finite:
        if not grid.same_support(limit):
            raise ValueError(f"Grid mismatch at N={grid.n_label}")

    n = np.array(n_list, dtype=float)
    design = np.column_stack([n**-2, n**-4])
    deviations = np.array([(grid.values - limit.values).ravel() for grid in finite])
    coefficients, _, _, _ = np.linalg.lstsq(design, deviations, rcond=None)
    residual = deviations - design @ coefficients
    shape = limit.values.shape
    return CorrectionFit(
        kind=limit.kind,
        axes=limit.axes,
        c2=coefficients[0].reshape(shape),
        c4=coefficients[1].reshape(shape),
        n_list=list(n_list),
        residual=np.sqrt(np.mean(residual**2, axis=0)).reshape(shape),
    )


def fit_correction_orders(
    kind: str,
    n_list: Sequence[float],
    spec: Optional[GridSpec] = None,
    cache: Optional[TableCache] = None,
) -> CorrectionFit:
    if len(set(n_list)) < 3:
        raise NumericalError(
            f"Two-term correction fit needs at least 3 distinct N, got {sorted(set(n_list))}"
        )
    spec = spec or GridSpec()
    limit = cached_grid(kind, None, spec, cache)
    finite = [compute_grid(kind, float(n), spec) for n in n_list]
    return fit_grids(finite, limit)


def limit_distributions_cached(
    spec: GridSpec, cache: Optional[TableCache] = None
) -> Dict[str, DistributionGrid]:
    return {kind: cached_grid(kind, None, spec, cache) for kind in ("Pnn", "Pc", "Pr")}
