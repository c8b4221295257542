"""Gap quantities from orthogonal polynomials on J.

With h_k^J the squared norms of the monic orthogonal polynomials for
exp(-x^2) restricted to J, det(I - K_n chi_{J^c}) = prod_{k<n} h_k^J / h_k.
The recurrence coefficients come from a discretized Stieltjes (Lanczos)
procedure with full reorthogonalization.  Every quantity is a sum of
positive-definite pieces on J, so nothing cancels catastrophically when the
gap probability is tiny.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import EndpointConfig, Region, parity_signs
from .quadrature import KernelSpec, QuadratureGrid, build_grid, tail_cutoff


def _jside_region(config: EndpointConfig, n: int, tail_tol: float) -> Region:
    """J with unbounded ends cut so the neglected mass is tiny relative to J's own."""
    L = tail_cutoff(n + 2, tail_tol)
    log_tol = math.log(tail_tol)
    out = []
    for lo, hi in config.eigen_region().intervals:
        if math.isinf(lo) or math.isinf(hi):
            edge = hi if math.isinf(lo) else lo
            t = 1.0
            # exp(-(x^2 - edge^2)) (x/edge)^(2n+4) small at x = |edge| + t
            while True:
                x = abs(edge) + t
                val = -(x * x - edge * edge) + (2 * n + 4) * math.log(x / max(abs(edge), 1.0))
                if val < log_tol and x >= L:
                    break
                t *= 1.5
            if math.isinf(lo):
                lo = min(-x, hi - 1.0)
            else:
                hi = max(x, lo + 1.0)
        out.append((lo, hi))
    return Region(tuple(out))


def jside_grid(config: EndpointConfig, n: int, numerics) -> QuadratureGrid:
    region = _jside_region(config, n, numerics.tail_tol)
    return build_grid(region, numerics.m_per_interval, numerics.tail_tol, n=n, panel_width=numerics.panel_width)


def stieltjes(x: np.ndarray, log_w: np.ndarray, kmax: int):
    """Recurrence coefficients of the measure sum_i exp(log_w[i]) delta_{x_i}.

    Returns (alpha[0..kmax], beta[1..kmax], log mu_0).
    """
    if len(x) <= kmax:
        raise ValueError("not enough quadrature nodes for the requested degree")
    shift = np.max(log_w)
    s = np.exp(0.5 * (log_w - shift))
    norm = math.sqrt(float(s @ s))
    log_mu0 = 2.0 * math.log(norm) + shift
    Qm = np.zeros((len(x), kmax + 1))
    q = s / norm
    q_prev = np.zeros_like(q)
    alpha = np.zeros(kmax + 1)
    beta = np.zeros(kmax + 1)  # beta[0] unused
    for k in range(kmax + 1):
        Qm[:, k] = q
        z = x * q
        alpha[k] = q @ z
        z = z - alpha[k] * q - (math.sqrt(beta[k]) * q_prev if k else 0.0)
        for _ in range(2):
            z -= Qm[:, : k + 1] @ (Qm[:, : k + 1].T @ z)
        if k == kmax:
            break
        beta[k + 1] = float(z @ z)
        q_prev, q = q, z / math.sqrt(beta[k + 1])
    return alpha, beta[1:], log_mu0


def _log_norm(k: int) -> float:
    return 0.5 * math.log(math.pi) + math.lgamma(k + 1) - k * math.log(2.0)


class JSideBasis:
    """Orthonormal functions e_k = pi_k^J(x) exp(-x^2/2), k = 0..kmax, on J."""

    def __init__(self, config: EndpointConfig, kmax: int, numerics):
        grid = jside_grid(config, kmax, numerics)
        x = grid.nodes
        self.alpha, self.beta, self.log_mu0 = stieltjes(x, np.log(grid.weights) - x * x, kmax)
        self.kmax = kmax
        # ln h_k^J = ln mu_0 + sum_{i<=k} ln beta_i
        self.log_hJ = self.log_mu0 + np.concatenate([[0.0], np.cumsum(np.log(self.beta))])

    def log_gap(self, n: int) -> float:
        return float(sum(self.log_hJ[k] - _log_norm(k) for k in range(n)))

    def values(self, x):
        """(e_k(x), e_k'(x)) for k = 0..kmax."""
        x = np.asarray(x, dtype=float)
        K = self.kmax
        e = np.zeros((K + 1,) + x.shape)
        d = np.zeros_like(e)  # pi_k'(x) exp(-x^2/2)
        e[0] = np.exp(-0.5 * x * x - 0.5 * self.log_mu0)
        sb = np.sqrt(self.beta)
        for k in range(K):
            e[k + 1] = (x - self.alpha[k]) * e[k]
            d[k + 1] = e[k] + (x - self.alpha[k]) * d[k]
            if k:
                e[k + 1] -= sb[k - 1] * e[k - 1]
                d[k + 1] -= sb[k - 1] * d[k - 1]
            e[k + 1] /= sb[k]
            d[k + 1] /= sb[k]
        return e, d - x * e


def jside_log_gap(n: int, config: EndpointConfig, numerics) -> float:
    if n == 0:
        return 0.0
    return JSideBasis(config, n - 1, numerics).log_gap(n)


def jside_data(spec: KernelSpec, config: EndpointConfig, numerics, signs=None):
    from .fredholm import ResolventData

    n = spec.n
    basis = JSideBasis(config, n, numerics)
    a = np.asarray(config.endpoints)
    e, de = basis.values(a)
    c = spec.prefactor
    lh, lhJ = _log_norm, basis.log_hJ
    q_scale = c * math.exp(0.5 * (lhJ[n] - lh(n)))
    p_scale = c * math.exp(0.5 * (lh(n - 1) - lhJ[n - 1]))
    R = e[:n].T @ e[:n]
    Rx = np.sum(de[:n] * e[:n], axis=0)
    u = -c * c * math.expm1(lhJ[n] - lh(n))
    w = c * c * math.expm1(lh(n - 1) - lhJ[n - 1])
    v = -float(np.sum(basis.alpha[:n]))
    if signs is None:
        signs = np.asarray(parity_signs(config), dtype=float)
    return ResolventData(
        config, n, "orthopoly", basis.log_gap(n),
        q_scale * e[n], p_scale * e[n - 1], q_scale * de[n], p_scale * de[n - 1],
        R, Rx, u, v, w, np.asarray(signs, dtype=float),
    )
