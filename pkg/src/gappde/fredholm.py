"""Nystrom discretization of K_n chi_{J^c}, its log-determinant and the
Tracy-Widom endpoint quantities (q_j, p_j, R(a_j, a_k), u, v, w).

Two interchangeable routes produce a :class:`ResolventData`:

* ``"nystrom"`` works on J^c: symmetrized matrix sqrt(w) K sqrt(w), pivoted
  Cholesky of I - M, Nystrom extension to the endpoints.
* ``"orthopoly"`` (see :mod:`gappde.orthopoly`) works on J with the
  orthogonal polynomials of exp(-x^2) restricted to J; it stays accurate when
  the gap probability is astronomically small and I - M is numerically
  singular.

``"auto"`` runs the Nystrom route and falls back to the J-side route when
the smallest Cholesky pivot drops below ``pivot_floor``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .geometry import EndpointConfig, geometric_sign, make_endpoint_config, parity_signs
from .quadrature import (
    KernelSpec,
    QuadratureGrid,
    build_grid,
    hermite_derivatives,
    hermite_functions,
    kernel_dx_matrix,
    kernel_matrix,
)

ENGINES = ("auto", "nystrom", "orthopoly")
SINGULAR_TOL = 1e-12


class FredholmError(ArithmeticError):
    """I - K^J is not numerically positive definite on the chosen grid."""


@dataclass(frozen=True)
class Numerics:
    m_per_interval: int = 40
    tail_tol: float = 1e-16
    panel_width: float = 2.0
    engine: str = "auto"
    pivot_floor: float = 1e-4

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")

    def with_engine(self, engine: str) -> "Numerics":
        return Numerics(self.m_per_interval, self.tail_tol, self.panel_width, engine, self.pivot_floor)


DEFAULT_NUMERICS = Numerics()


@dataclass(frozen=True)
class KernelDiscretization:
    spec: KernelSpec
    grid: QuadratureGrid
    matrix: np.ndarray  # sqrt(w_a) K(x_a, x_b) sqrt(w_b)
    sqrt_w: np.ndarray


@dataclass
class ResolventData:
    """Pointwise Tracy-Widom quantities at one endpoint configuration.

    ``qx``/``px`` are the x-derivatives Q'(a_j), P'(a_j).  ``qprime`` and
    ``pprime`` are the quantities entering the non-universal equations and
    X_j = qprime/q, Y_j = pprime/p:  qprime_j = Q'(a_j) + sum_k s_k R_jk q_k.
    """

    config: EndpointConfig
    n: int
    engine: str
    T: float
    q: np.ndarray
    p: np.ndarray
    qx: np.ndarray
    px: np.ndarray
    R: np.ndarray  # R(a_j, a_k), diagonal included
    Rx_diag: np.ndarray  # d/dx R(x, a_j) at x = a_j
    u: float
    v: float
    w: float
    signs: np.ndarray
    min_pivot: float = math.nan
    extra: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.config.endpoints)

    @property
    def R_diag(self) -> np.ndarray:
        return np.diag(self.R).copy()

    @property
    def R_off(self) -> np.ndarray:
        out = self.R.copy()
        np.fill_diagonal(out, 0.0)
        return out

    @property
    def qprime(self) -> np.ndarray:
        return self.qx + self.R @ (self.signs * self.q)

    @property
    def pprime(self) -> np.ndarray:
        return self.px + self.R @ (self.signs * self.p)

    def _ratio(self, num, den):
        out = np.full(self.N, np.nan)
        ok = np.abs(den) >= SINGULAR_TOL
        out[ok] = num[ok] / den[ok]
        return out

    @property
    def X(self) -> np.ndarray:
        """q'_j / q_j; NaN where |q_j| < 1e-12 (flagged singular)."""
        return self._ratio(self.qprime, self.q)

    @property
    def Y(self) -> np.ndarray:
        return self._ratio(self.pprime, self.p)

    @property
    def singular(self) -> np.ndarray:
        return (np.abs(self.q) < SINGULAR_TOL) | (np.abs(self.p) < SINGULAR_TOL)

    # analytic derivatives in the endpoints ------------------------------
    @property
    def grad_T(self) -> np.ndarray:
        return -self.signs * np.diag(self.R)

    @property
    def hess_T(self) -> np.ndarray:
        s = self.signs
        H = -np.outer(s, s) * self.R**2
        Rd = np.diag(self.R)
        np.fill_diagonal(H, -2.0 * s * self.Rx_diag - Rd**2)
        return H

    @property
    def grad_u(self) -> np.ndarray:
        return self.signs * self.q**2

    @property
    def grad_v(self) -> np.ndarray:
        return self.signs * self.q * self.p

    @property
    def grad_w(self) -> np.ndarray:
        return self.signs * self.p**2

    @property
    def dq_total(self) -> np.ndarray:
        """d q_j / d a_k (matrix indexed [j, k])."""
        D = self.R * (self.signs * self.q)[None, :]
        D[np.diag_indices(self.N)] = self.qx + self.signs * np.diag(self.R) * self.q
        return D

    @property
    def dp_total(self) -> np.ndarray:
        D = self.R * (self.signs * self.p)[None, :]
        D[np.diag_indices(self.N)] = self.px + self.signs * np.diag(self.R) * self.p
        return D

    @property
    def hess_v(self) -> np.ndarray:
        a, du, dw = self.a, self.grad_u, self.grad_w
        N = self.N
        H = np.zeros((N, N))
        for j in range(N):
            for l in range(N):
                if j != l:
                    H[j, l] = (du[j] * dw[l] - du[l] * dw[j]) / (a[j] - a[l])
        dq, dp = np.diag(self.dq_total), np.diag(self.dp_total)
        H[np.diag_indices(N)] = self.signs * (self.p * dq + self.q * dp)
        return H


# ---------------------------------------------------------------------------
# Nystrom route


def discretize(spec: KernelSpec, grid: QuadratureGrid) -> KernelDiscretization:
    sw = np.sqrt(grid.weights)
    K = kernel_matrix(spec.n, grid.nodes, grid.nodes)
    M = sw[:, None] * K * sw[None, :]
    M = 0.5 * (M + M.T)
    return KernelDiscretization(spec, grid, M, sw)


class PivotedCholesky:
    """P^T A P = U^T U via LAPACK dpstrf, with a definiteness certificate."""

    def __init__(self, A: np.ndarray):
        n = A.shape[0]
        U, piv, rank, info = lapack.dpstrf(A, tol=-1.0, lower=0)
        self.U = np.triu(U)
        self.perm = piv - 1
        d = np.diag(self.U)
        if info < 0 or rank < n or np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise FredholmError(
                f"I - M not positive definite (rank {rank} of {n}); grid too coarse or geometry invalid"
            )
        self.pivots = d * d

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.U))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        p = self.perm
        y = solve_triangular(self.U, b[p], trans="T")
        xp = solve_triangular(self.U, y)
        x = np.empty_like(xp)
        x[p] = xp
        return x


def _factor(disc: KernelDiscretization) -> PivotedCholesky:
    A = np.eye(disc.grid.size) - disc.matrix
    return PivotedCholesky(A)


def log_det(disc: KernelDiscretization) -> float:
    """T = ln det(I - K^J); 0 for an empty grid."""
    if disc.grid.is_empty:
        return 0.0
    return _factor(disc).logdet()


def _empty_resolvent(spec: KernelSpec, config: EndpointConfig, engine: str) -> ResolventData:
    n = spec.n
    a = np.asarray(config.endpoints)
    phi, dphi = hermite_derivatives(n, a)
    c = spec.prefactor
    return ResolventData(
        config, n, engine, 0.0,
        c * phi[n], c * phi[n - 1], c * dphi[n], c * dphi[n - 1],
        phi[:n].T @ phi[:n], np.sum(dphi[:n] * phi[:n], axis=0),
        0.0, 0.0, 0.0, np.asarray(parity_signs(config), dtype=float), 1.0,
    )


def resolvent_data(disc: KernelDiscretization, config: EndpointConfig) -> ResolventData:
    spec, grid = disc.spec, disc.grid
    if grid.is_empty:
        return _empty_resolvent(spec, config, "nystrom")
    n = spec.n
    c = spec.prefactor
    chol = _factor(disc)
    x, sw = grid.nodes, disc.sqrt_w
    a = np.asarray(config.endpoints)

    hn = hermite_functions(n, x)
    phi_x, psi_x = c * hn[n], c * hn[n - 1]
    Qt = chol.solve(sw * phi_x)  # sqrt(w) Q at the nodes
    Pt = chol.solve(sw * psi_x)

    h_a, dh_a = hermite_derivatives(n, a)
    K_an = kernel_matrix(n, a, x) * sw[None, :]
    Kx_an = kernel_dx_matrix(n, a, x) * sw[None, :]
    q = c * h_a[n] + K_an @ Qt
    p = c * h_a[n - 1] + K_an @ Pt
    qx = c * dh_a[n] + Kx_an @ Qt
    px = c * dh_a[n - 1] + Kx_an @ Pt

    # resolvent columns R(., a_k) at the nodes, then extended to the endpoints
    Rt = np.column_stack([chol.solve(K_an[k]) for k in range(config.N)])
    R = kernel_matrix(n, a, a) + K_an @ Rt
    R = 0.5 * (R + R.T)
    Rx = kernel_dx_matrix(n, a, a) + Kx_an @ Rt

    u = float((sw * phi_x) @ Qt)
    v = float((sw * psi_x) @ Qt)
    w = float((sw * psi_x) @ Pt)
    return ResolventData(
        config, n, "nystrom", chol.logdet(), q, p, qx, px, R, np.diag(Rx).copy(), u, v, w,
        np.asarray(parity_signs(config), dtype=float), float(np.min(chol.pivots)),
    )


# ---------------------------------------------------------------------------
# calibration of the endpoint sign convention


@lru_cache(maxsize=None)
def calibrate_parity(leftmost: str) -> int:
    """Sign s_1 such that du/da_1 = s_1 q_1^2, found by central differences.

    Probed at n = 2 with a single endpoint at 0.3; the remaining signs
    alternate.
    """
    from .orthopoly import jside_data

    h = 1e-4
    spec = KernelSpec(2)

    def u_at(x):
        cfg = make_endpoint_config([x], leftmost)
        return jside_data(spec, cfg, DEFAULT_NUMERICS, signs=np.ones(1)).u

    cfg = make_endpoint_config([0.3], leftmost)
    du = (u_at(0.3 + h) - u_at(0.3 - h)) / (2 * h)
    q2 = jside_data(spec, cfg, DEFAULT_NUMERICS, signs=np.ones(1)).q[0] ** 2
    s = 1 if du * q2 > 0 else -1
    expected = geometric_sign(cfg, 1)
    if s != expected:  # pragma: no cover - would signal a broken kernel convention
        raise FredholmError(f"parity probe gave {s}, geometry implies {expected}")
    return s


# ---------------------------------------------------------------------------
# high-level entry points


def grid_for(config: EndpointConfig, n: int, numerics: Numerics = DEFAULT_NUMERICS, side: str = "gap") -> QuadratureGrid:
    region = config.gap_region() if side == "gap" else config.eigen_region()
    return build_grid(region, numerics.m_per_interval, numerics.tail_tol, n=n, panel_width=numerics.panel_width)


def point_data(n: int, config: EndpointConfig, numerics: Numerics = DEFAULT_NUMERICS) -> ResolventData:
    """ResolventData at size n, using the engine selected in ``numerics``."""
    from .orthopoly import jside_data

    spec = KernelSpec(n)
    if numerics.engine == "orthopoly":
        return jside_data(spec, config, numerics)
    disc = discretize(spec, grid_for(config, n, numerics))
    try:
        data = resolvent_data(disc, config)
    except FredholmError:
        if numerics.engine == "nystrom":
            raise
        return jside_data(spec, config, numerics)
    if numerics.engine == "auto" and data.min_pivot < numerics.pivot_floor:
        return jside_data(spec, config, numerics)
    return data


def resolve_engine(n: int, config: EndpointConfig, numerics: Numerics = DEFAULT_NUMERICS) -> Numerics:
    """Pin ``auto`` to a concrete engine for this configuration."""
    if numerics.engine != "auto":
        return numerics
    return numerics.with_engine(point_data(n, config, numerics).engine)


def log_gap(n: int, config: EndpointConfig, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    """ln P(all n eigenvalues lie in J); n = 0 gives 0."""
    if n == 0:
        return 0.0
    from .orthopoly import jside_log_gap

    if numerics.engine == "orthopoly":
        return jside_log_gap(n, config, numerics)
    disc = discretize(KernelSpec(n), grid_for(config, n, numerics))
    if disc.grid.is_empty:
        return 0.0
    try:
        chol = _factor(disc)
    except FredholmError:
        if numerics.engine == "nystrom":
            raise
        return jside_log_gap(n, config, numerics)
    if numerics.engine == "auto" and np.min(chol.pivots) < numerics.pivot_floor:
        return jside_log_gap(n, config, numerics)
    return chol.logdet()


def gap_probability(n: int, config: EndpointConfig, numerics: Numerics = DEFAULT_NUMERICS) -> float:
    return math.exp(log_gap(n, config, numerics))


# ---------------------------------------------------------------------------
# determinant ratios at neighbouring sizes


def log_norm(k: int) -> float:
    """ln h_k, h_k = sqrt(pi) k! / 2^k the squared norm of the monic Hermite polynomial."""
    return 0.5 * math.log(math.pi) + math.lgamma(k + 1) - k * math.log(2.0)


@dataclass
class TauData:
    """Determinants at sizes n-1, n, n+1 and the ratios built from them.

    U = tau^J_{n+1}/tau^J_n and W = tau^J_{n-1}/tau^J_n with the full-line
    constants h_n = tau_{n+1}/tau_n restored, so F = U W -> n/2 as J -> R.
    G_j = W dU/da_j - U dW/da_j = F (dT_{n+1}/da_j - dT_{n-1}/da_j).
    """

    n: int
    T_prev: float
    T: float
    T_next: float
    grad_prev: np.ndarray
    grad: np.ndarray
    grad_next: np.ndarray

    @property
    def U_raw(self) -> float:
        return math.exp(self.T_next - self.T)

    @property
    def W_raw(self) -> float:
        return math.exp(self.T_prev - self.T)

    @property
    def U(self) -> float:
        return math.exp(log_norm(self.n) + self.T_next - self.T)

    @property
    def W(self) -> float:
        return math.exp(self.T_prev - self.T - log_norm(self.n - 1))

    @property
    def F(self) -> float:
        return 0.5 * self.n * math.exp(self.T_next + self.T_prev - 2.0 * self.T)

    @property
    def G(self) -> np.ndarray:
        return self.F * (self.grad_next - self.grad_prev)


def tau_ratios(n: int, config: EndpointConfig, numerics: Numerics = DEFAULT_NUMERICS) -> TauData:
    numerics = resolve_engine(n, config, numerics)
    N = config.N
    if n == 1:
        T_prev, g_prev = 0.0, np.zeros(N)
    else:
        d = point_data(n - 1, config, numerics)
        T_prev, g_prev = d.T, d.grad_T
    d0 = point_data(n, config, numerics)
    d1 = point_data(n + 1, config, numerics)
    return TauData(n, T_prev, d0.T, d1.T, g_prev, d0.grad_T, d1.grad_T)
