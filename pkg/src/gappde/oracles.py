"""Ground truth that shares no code path with the Fredholm engines.

* ``analytic_n1``: for one eigenvalue the density is exp(-x^2)/sqrt(pi).
* ``direct_tau``: the n-fold integral of the squared Vandermonde against
  exp(-sum x_i^2) over J^n, by tensor Gauss-Legendre panels, n <= 3.
* ``sample_gue``: Monte Carlo over Hermitian matrices with density
  proportional to exp(-tr H^2).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .geometry import EndpointConfig, Region

METHODS = ("erf_exact", "direct_quadrature", "monte_carlo")
REAL_LINE = Region(((-math.inf, math.inf),))


@dataclass
class OracleResult:
    value: float
    error_bound: float
    method: str
    samples: int | None = None
    seed: int | None = None
    stderr: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(self.method)


def _region(where: Union[EndpointConfig, Region]) -> Region:
    return where.eigen_region() if isinstance(where, EndpointConfig) else where


def _mass(lo: float, hi: float) -> float:
    """(erf(hi) - erf(lo))/2 without cancellation in the tails."""
    if lo >= 0:
        return 0.5 * (math.erfc(lo) - math.erfc(hi))
    if hi <= 0:
        return 0.5 * (math.erfc(-hi) - math.erfc(-lo))
    return 0.5 * (math.erf(hi) - math.erf(lo))


def analytic_n1(where) -> OracleResult:
    """P(the single eigenvalue lies in J)."""
    val = math.fsum(_mass(lo, hi) for lo, hi in _region(where).intervals)
    return OracleResult(min(max(val, 0.0), 1.0), 4e-16, "erf_exact")


# ---------------------------------------------------------------------------
# direct integration

CUT = 7.5  # exp(-x^2) x^4 < 1e-22 beyond


def _nodes(region: Region, p: int, width: float = 1.0):
    xs, ws = [], []
    t, w = leggauss(p)
    for lo, hi in region.intervals:
        lo, hi = max(lo, -CUT), min(hi, CUT)
        if hi <= lo:
            continue
        m = max(1, math.ceil((hi - lo) / width))
        edges = np.linspace(lo, hi, m + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (b - a) * t + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    x = np.concatenate(xs)
    return x, np.concatenate(ws) * np.exp(-x * x)


def _vandermonde_integral(x: np.ndarray, w: np.ndarray, n: int) -> float:
    if len(x) == 0:
        return 0.0
    if n == 1:
        return float(np.sum(w))
    if n == 2:
        d = (x[:, None] - x[None, :]) ** 2
        return float(w @ d @ w)
    if n == 3:
        d = (x[:, None] - x[None, :]) ** 2
        wd = d * w[None, :]  # wd[i, j] = (x_i - x_j)^2 w_j
        total = 0.0
        for i in range(len(x)):
            # sum_{j,k} w_j w_k (x_i-x_j)^2 (x_i-x_k)^2 (x_j-x_k)^2
            v = wd[i]
            total += w[i] * float(v @ d @ v)
        return total
    raise ValueError("direct integration is limited to n <= 3")


def _integral(region: Region, n: int, tol: float, max_level: int = 4):
    est, err = None, math.inf
    for level in range(max_level):
        p = 12 + 8 * level
        val = _vandermonde_integral(*_nodes(region, p), n)
        if est is not None:
            err = abs(val - est)
            if err <= tol * max(abs(val), 1e-300):
                return val, err
        est = val
    return est, err


def direct_tau(n: int, where, tol: float = 1e-13) -> OracleResult:
    """P(all n eigenvalues in J) = int_{J^n} / int_{R^n}.

    The error bound is the change between the last two refinements (relative
    tolerance ``tol`` on each integral), propagated through the ratio; if the
    tolerance is not reached the bound says so.
    """
    if not 1 <= n <= 3:
        raise ValueError("direct_tau supports n in {1, 2, 3}")
    num, e_num = _integral(_region(where), n, tol)
    Z, e_Z = _integral(REAL_LINE, n, tol)
    val = num / Z
    err = abs(val) * (e_num / max(abs(num), 1e-300) + e_Z / Z) + 1e-15
    return OracleResult(min(max(val, 0.0), 1.0), err, "direct_quadrature")


def partition_function(n: int) -> float:
    """int_{R^n} prod (x_i - x_j)^2 exp(-sum x^2), numerically."""
    return _integral(REAL_LINE, n, 1e-13)[0]


def partition_function_closed(n: int) -> float:
    """n! prod_{k<n} sqrt(pi) k! / 2^k."""
    return math.factorial(n) * math.prod(math.sqrt(math.pi) * math.factorial(k) / 2**k for k in range(n))


# ---------------------------------------------------------------------------
# Monte Carlo

CHUNK = 25_000


def thread_count() -> int:
    try:
        cap = int(os.environ.get("GAPPDE_THREADS", "0"))
    except ValueError:
        cap = 0
    ncpu = os.cpu_count() or 1
    return max(1, min(cap, ncpu) if cap > 0 else ncpu)


def gue_batch(rng: np.random.Generator, n: int, size: int) -> np.ndarray:
    """``size`` Hermitian n x n matrices with density proportional to exp(-tr H^2).

    Diagonal entries N(0, 1/2); real and imaginary parts of the upper
    off-diagonal entries N(0, 1/4) each.
    """
    H = np.zeros((size, n, n), dtype=complex)
    idx = np.arange(n)
    H[:, idx, idx] = rng.normal(0.0, math.sqrt(0.5), (size, n))
    for i, j in combinations(range(n), 2):
        z = rng.normal(0.0, 0.5, (size, 2)) @ np.array([1.0, 1.0j])
        H[:, i, j] = z
        H[:, j, i] = np.conj(z)
    return H


def _inside(eigs: np.ndarray, region: Region) -> np.ndarray:
    ok = np.zeros(eigs.shape, dtype=bool)
    for lo, hi in region.intervals:
        ok |= (eigs > lo) & (eigs < hi)
    return np.all(ok, axis=-1)


def sample_gue(n: int, count: int, seed: int, where, threads: int | None = None) -> OracleResult:
    """Fraction of GUE samples with every eigenvalue in J.

    The stream is split into fixed chunks, each with its own spawned
    SeedSequence, so the result does not depend on the thread count.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    region = _region(where)
    sizes = [CHUNK] * (count // CHUNK) + ([count % CHUNK] if count % CHUNK else [])
    seqs = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(args):
        ss, size = args
        rng = np.random.default_rng(ss)
        eigs = np.linalg.eigvalsh(gue_batch(rng, n, size))
        return int(np.count_nonzero(_inside(eigs, region)))

    workers = threads or thread_count()
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(run, zip(seqs, sizes)))
    else:
        hits = sum(map(run, zip(seqs, sizes)))
    p = hits / count
    se = math.sqrt(p * (1.0 - p) / count)
    return OracleResult(p, 3.0 * se, "monte_carlo", samples=count, seed=seed, stderr=se)
