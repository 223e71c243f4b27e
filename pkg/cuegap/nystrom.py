"""
Nystrom discretization of Fredholm determinants det(I - K_I) on a single interval and of the
resolvent data entering the Tracy-Widom variables.
"""

import math
from dataclasses import dataclass
from logging import getLogger
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import roots_legendre

from cuegap.common import NumericalError
from cuegap.kernels import CueParams, eval_kernel_tilde, phi_tilde

logger = getLogger(__name__)

DEFAULT_QUADRATURE_ORDER = 256

Kernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Interval:
    a1: float
    a2: float

    def __post_init__(self):
        if self.a1 > self.a2:
            raise ValueError(f"Interval endpoints out of order: [{self.a1}, {self.a2}]")

    @property
    def length(self) -> float:
        return self.a2 - self.a1

    def check_janossy(self) -> None:
        """The triple (a1, 0, a2) must be three consecutive phases on the circle."""
        if not (self.a1 <= 0 <= self.a2):
            raise ValueError(f"Interval [{self.a1}, {self.a2}] must contain the origin")
        if self.length >= 2 * math.pi:
            raise ValueError(f"Interval [{self.a1}, {self.a2}] wraps the full circle")


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    order: int


@dataclass(frozen=True)
class NystromState:
    """Endpoint values of the resolvent data; complex fields follow the TW variables."""

    q1: complex
    p1: complex
    q2: complex
    p2: complex
    u: complex
    v: complex
    v_tilde: complex
    w: complex
    r11: float
    r22: float
    r12: float
    log_det: float


def gauss_legendre(m: int, interval: Interval) -> Quadrature:
    if m < 2:
        raise ValueError(f"Quadrature order must be at least 2, got {m}")

    x, w = roots_legendre(m)
    half = interval.length / 2
    mid = (interval.a1 + interval.a2) / 2
    return Quadrature(nodes=mid + half * x, weights=half * w, order=m)


def _det_of_lu(lu: np.ndarray, piv: np.ndarray) -> float:
    swaps = np.count_nonzero(piv != np.arange(len(piv)))
    diag = np.diag(lu)
    sign = -1.0 if swaps % 2 else 1.0
    sign *= np.prod(np.sign(diag))
    return float(sign * math.exp(np.sum(np.log(np.abs(diag)))))


def _kernel_matrix(kernel: Kernel, quad: Quadrature) -> np.ndarray:
    values = np.asarray(kernel(quad.nodes[:, None], quad.nodes[None, :]), dtype=float)
    if not np.all(np.isfinite(values)):
        raise NumericalError("Kernel produced non-finite values on the quadrature nodes")
    return values


def nystrom_det(
    kernel: Kernel, interval: Interval, m: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    """det[delta_ij - K(x_i, x_j) sqrt(w_i w_j)] via pivoted LU.

    ``kernel`` must accept broadcast numpy arrays.
    """
    if interval.length == 0:
        return 1.0

    quad = gauss_legendre(m, interval)
    sqrt_w = np.sqrt(quad.weights)
    matrix = np.eye(m) - sqrt_w[:, None] * _kernel_matrix(kernel, quad) * sqrt_w[None, :]
    lu, piv = lu_factor(matrix, check_finite=False)
    return _det_of_lu(lu, piv)


def janossy_nystrom(
    interval: Interval, params: CueParams, m: int = DEFAULT_QUADRATURE_ORDER
) -> float:
    interval.check_janossy()
    value = nystrom_det(lambda x, y: eval_kernel_tilde(x, y, params), interval, m)
    logger.debug("Nystrom Janossy on [%r, %r], N=%r, m=%d: %r", interval.a1, interval.a2,
                 params.n_rank, m, value)
    return value


def nystrom_state(
    interval: Interval, params: CueParams, m: int = DEFAULT_QUADRATURE_ORDER
) -> NystromState:
    """Solve the discretized second-kind equations for (I - K)^-1 applied to phi~, psi~ and
    to K(., a_k), then Nystrom-interpolate the solutions to the endpoints."""
    interval.check_janossy()
    if interval.a1 == 0 or interval.a2 == 0:
        raise ValueError("Resolvent data needs both endpoints away from the origin")

    quad = gauss_legendre(m, interval)
    x, w = quad.nodes, quad.weights
    ends = np.array([interval.a1, interval.a2])

    kernel = _kernel_matrix(lambda s, t: eval_kernel_tilde(s, t, params), quad)
    lu, piv = lu_factor(np.eye(m) - kernel * w[None, :], check_finite=False)

    nodes_pair = phi_tilde(x, params)
    ends_pair = phi_tilde(ends, params)
    ends_to_nodes = np.asarray(eval_kernel_tilde(ends[:, None], x[None, :], params))
    nodes_to_ends = np.asarray(eval_kernel_tilde(x[:, None], ends[None, :], params))

    big_q = lu_solve((lu, piv), nodes_pair.phi.astype(complex))
    big_p = lu_solve((lu, piv), nodes_pair.psi.astype(complex))
    q = ends_pair.phi + ends_to_nodes @ (w * big_q)
    p = ends_pair.psi + ends_to_nodes @ (w * big_p)

    resolvent_columns = lu_solve((lu, piv), nodes_to_ends)
    ends_kernel = np.asarray(eval_kernel_tilde(ends[:, None], ends[None, :], params))
    resolvent = ends_kernel + ends_to_nodes @ (w[:, None] * resolvent_columns)

    return NystromState(
        q1=complex(q[0]),
        p1=complex(p[0]),
        q2=complex(q[1]),
        p2=complex(p[1]),
        u=complex(np.sum(w * nodes_pair.phi * big_q)),
        v=complex(np.sum(w * nodes_pair.psi * big_q)),
        v_tilde=complex(np.sum(w * nodes_pair.phi * big_p)),
        w=complex(np.sum(w * nodes_pair.psi * big_p)),
        r11=float(resolvent[0, 0]),
        r22=float(resolvent[1, 1]),
        r12=float(resolvent[0, 1]),
        log_det=math.log(_det_of_lu(lu, piv)),
    )
