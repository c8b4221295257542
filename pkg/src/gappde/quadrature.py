"""Gauss-Legendre rules on unions of intervals, Hermite functions and the
Christoffel-Darboux kernel of the Gaussian weight exp(-x^2)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .geometry import Region

PI_M14 = math.pi ** -0.25


@dataclass(frozen=True)
class KernelSpec:
    """Size n of the GUE kernel K_n(x, y) = sum_{k<n} phi_k(x) phi_k(y)."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("kernel size n must be >= 1")

    @property
    def prefactor(self) -> float:
        # phi = c*phi_n and psi = c*phi_{n-1} reproduce the CD numerator
        return (self.n / 2.0) ** 0.25


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    component: np.ndarray  # index of the region component each node lies in
    tail_cutoff: float

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def is_empty(self) -> bool:
        return len(self.nodes) == 0


def _legendre_pair(m: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(P_m(x), P_m'(x)) by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, m + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p1, m * (x * p1 - p0) / (x * x - 1)


@lru_cache(maxsize=64)
def _gauss_legendre_cached(m: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, m + 1)
    # Tricomi initial guess, then Newton
    x = np.cos(np.pi * (4 * k - 1) / (4 * m + 2)) * (1 - (m - 1) / (8.0 * m**3))
    for _ in range(100):
        p, dp = _legendre_pair(m, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    _, dp = _legendre_pair(m, x)
    w = 2.0 / ((1 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    x = 0.5 * (x - x[::-1])  # exact symmetry
    w = 0.5 * (w + w[::-1])
    return x, w


def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Legendre nodes and weights on [-1, 1], nodes ascending."""
    if m < 1:
        raise ValueError("Gauss-Legendre rule needs m >= 1")
    x, w = _gauss_legendre_cached(int(m))
    return x.copy(), w.copy()


def tail_cutoff(n: int, tail_tol: float) -> float:
    """Smallest L > sqrt(n) with exp(-L^2) L^(2n) = tail_tol."""
    if not 0 < tail_tol < 1:
        raise ValueError("tail_tol must lie in (0, 1)")
    n = max(int(n), 1)
    f = lambda x: -x * x + 2 * n * math.log(x) - math.log(tail_tol)
    lo = max(math.sqrt(n), 1.0)
    hi = lo + 1.0
    while f(hi) > 0:
        hi *= 2.0
    if f(lo) <= 0:
        return lo
    return brentq(f, lo, hi, xtol=1e-14)


def build_grid(
    region: Region,
    m_per_interval: int = 40,
    tail_tol: float = 1e-16,
    n: int = 1,
    panel_width: float = 2.0,
) -> QuadratureGrid:
    """Composite Gauss-Legendre rule on ``region``.

    Infinite components are cut at +-L (see :func:`tail_cutoff`); each
    remaining component is split into panels no longer than ``panel_width``
    carrying ``m_per_interval`` nodes apiece.
    """
    if m_per_interval < 4:
        raise ValueError("m_per_interval must be >= 4")
    L = tail_cutoff(n, tail_tol)
    t, w = gauss_legendre(m_per_interval)
    xs, ws, comp = [], [], []
    for c, (lo, hi) in enumerate(region.intervals):
        lo, hi = max(lo, -L), min(hi, L)
        if not lo < hi:
            continue
        panels = max(1, math.ceil((hi - lo) / panel_width - 1e-12))
        edges = np.linspace(lo, hi, panels + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            xs.append(0.5 * (a + b) + half * t)
            ws.append(half * w)
            comp.append(np.full(len(t), c))
    if not xs:
        empty = np.empty(0)
        return QuadratureGrid(empty, empty, np.empty(0, dtype=int), L)
    return QuadratureGrid(np.concatenate(xs), np.concatenate(ws), np.concatenate(comp), L)


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Orthonormal Hermite functions phi_0..phi_{n_max} at x.

    Returns an array of shape (n_max + 1,) + shape(x).
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = PI_M14 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n_max):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_derivatives(n_max: int, x) -> tuple[np.ndarray, np.ndarray]:
    """(phi_k(x), phi_k'(x)) for k = 0..n_max, using phi_k' = -x phi_k + sqrt(2k) phi_{k-1}."""
    phi = hermite_functions(n_max, x)
    x = np.asarray(x, dtype=float)
    dphi = -x * phi
    for k in range(1, n_max + 1):
        dphi[k] += math.sqrt(2.0 * k) * phi[k - 1]
    return phi, dphi


def tw_pair(spec: KernelSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """The functions (phi, psi) = c (phi_n, phi_{n-1}) with c = (n/2)^(1/4)."""
    h = hermite_functions(spec.n, x)
    c = spec.prefactor
    return c * h[spec.n], c * h[spec.n - 1]


def tw_pair_dx(spec: KernelSpec, x) -> tuple[np.ndarray, np.ndarray]:
    _, d = hermite_derivatives(spec.n, x)
    c = spec.prefactor
    return c * d[spec.n], c * d[spec.n - 1]


def _diag_threshold(x: float) -> float:
    return 1e-6 * (1.0 + abs(x))


def kernel_eval(spec: KernelSpec, x: float, y: float) -> float:
    """K_n(x, y) from the Christoffel-Darboux quotient, switching to a
    first-order expansion about the diagonal when |x - y| is tiny."""
    if abs(x - y) >= _diag_threshold(x):
        fx, px = tw_pair(spec, x)
        fy, py = tw_pair(spec, y)
        return float((fx * py - px * fy) / (x - y))
    phi, dphi = hermite_derivatives(spec.n - 1, x)
    kxx = float(np.sum(phi * phi))
    slope = float(np.sum(phi * dphi))  # d/dy K(x, y) at y = x
    return kxx + (y - x) * slope


def kernel_dx(spec: KernelSpec, x: float, y: float) -> float:
    """d/dx K_n(x, y)."""
    if abs(x - y) >= _diag_threshold(x):
        fx, px = tw_pair(spec, x)
        fy, py = tw_pair(spec, y)
        dfx, dpx = tw_pair_dx(spec, x)
        k = (fx * py - px * fy) / (x - y)
        return float((dfx * py - dpx * fy) / (x - y) - k / (x - y))
    _, dphi = hermite_derivatives(spec.n - 1, x)
    phi_y = hermite_functions(spec.n - 1, y)
    return float(np.sum(dphi * phi_y))


def kernel_matrix(n: int, xs, ys) -> np.ndarray:
    """K_n(xs[a], ys[b]) in sum form; exact and symmetric."""
    px = hermite_functions(n - 1, xs)
    py = px if ys is xs else hermite_functions(n - 1, ys)
    return px.T @ py


def kernel_dx_matrix(n: int, xs, ys) -> np.ndarray:
    """d/dx K_n(x, y) at x = xs[a], y = ys[b], in sum form."""
    _, dpx = hermite_derivatives(n - 1, xs)
    py = hermite_functions(n - 1, ys)
    return dpx.T @ py
