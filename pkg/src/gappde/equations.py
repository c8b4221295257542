"""Residual functionals for the Tracy-Widom system and the PDEs in T.

Every equation is written as two lists of additive terms, ``lhs`` and
``rhs``, in cleared-denominator form.  The raw residual is
|sum(lhs) - sum(rhs)| and it is normalized by max(1, sum of |terms|).

Two data modes are supported:

* ``closure``: v, F and G_j are read off the T-jet through the Gaussian
  closures 2v = DT, 4F = D^2 T + 2n, 2G_j = (d_j B_0 - 2 a_j d_j D) T, and
  the products dv_j (X_j +- Y_j) use their Gaussian closed forms.
* ``direct``: v comes from the inner product, F and G_j from determinant
  ratios at sizes n - 1, n, n + 1, and X_j, Y_j from the resolvent.
"""

from __future__ import annotations

import fnmatch
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np

from .fredholm import DEFAULT_NUMERICS, Numerics, resolve_engine
from .geometry import EndpointConfig
from .jets import (
    DEFAULT_JET_SETTINGS,
    JetField,
    JetOrderError,
    JetSettings,
    PointCache,
    fd_derivative,
    ladder_jet,
    stencil_steps,
    tau_jets,
)
from .virasoro import B, D, apply_ops, hat_G_jet

MODES = ("closure", "direct")
KM_RANGE = (0, 1, 2)


class Skip(Exception):
    """Raised by an equation that cannot be evaluated on the given data."""


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class RegistrySettings:
    mode: str = "closure"
    jet: JetSettings = DEFAULT_JET_SETTINGS
    numerics: Numerics = DEFAULT_NUMERICS
    km_range: tuple = KM_RANGE
    select: tuple = ("*",)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


class DataBundle:
    """Everything the residuals need at one configuration, computed lazily."""

    def __init__(self, n: int, config: EndpointConfig, settings: RegistrySettings = RegistrySettings(),
                 T_order: int = 4):
        self.n, self.config, self.settings = n, config, settings
        self.mode = settings.mode
        self.T_order = T_order
        self.numerics = resolve_engine(n, config, settings.numerics)
        self.cache = PointCache(n, self.numerics)
        self._ops: dict = {}

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.config.endpoints)

    # primary data ---------------------------------------------------------
    @cached_property
    def res(self):
        return self.cache(self.config)

    @cached_property
    def T(self) -> JetField:
        return ladder_jet(self.cache, self.config, "T", self.T_order, self.settings.jet)

    @cached_property
    def tau(self):
        return tau_jets(self.n, self.config, 2, self.settings.jet, self.settings.numerics,
                        T_jet=self.T)

    @cached_property
    def tw(self) -> dict:
        """Finite-difference derivatives of the directly computed TW quantities.

        tw[name][..., k] is d(name)/da_k.
        """
        steps = stencil_steps(self.config, self.settings.jet)
        lv = self.settings.jet.richardson_levels
        keys = ("q", "p", "u", "v", "w", "T")

        def f(c):
            d = self.cache(c)
            return np.concatenate([d.q, d.p, [d.u, d.v, d.w, d.T]])

        cols, errs = [], []
        for k in range(self.N):
            val, err = fd_derivative(f, self.config, (k,), steps, lv)
            cols.append(val)
            errs.append(err)
        M = np.column_stack(cols)
        N = self.N
        out = {"q": M[:N], "p": M[N:2 * N]}
        for i, name in enumerate(keys[2:]):
            out[name] = M[2 * N + i]
        out["err"] = np.column_stack(errs)
        return out

    @cached_property
    def T_fd_mixed(self) -> np.ndarray:
        """d^2 T / da_j da_l by differencing T values only."""
        steps = stencil_steps(self.config, self.settings.jet, 10.0)
        H = np.zeros((self.N, self.N))
        for j, l in combinations(range(self.N), 2):
            val, _ = fd_derivative(lambda c: self.cache(c).T, self.config, (j, l), steps,
                                   self.settings.jet.richardson_levels)
            H[j, l] = H[l, j] = float(val)
        return H

    # v, F, G ----------------------------------------------------------------
    @cached_property
    def v(self) -> JetField:
        if self.mode == "closure":
            return D(self.T) * 0.5
        return ladder_jet(self.cache, self.config, "v", 3, self.settings.jet)

    @cached_property
    def F(self) -> JetField:
        if self.mode == "closure":
            return (D(D(self.T)) + 2.0 * self.n) * 0.25
        return self.tau.F

    @cached_property
    def G(self) -> list[JetField]:
        if self.mode == "closure":
            B0T, DT = B(0, self.T), D(self.T)
            out = []
            for j in range(self.N):
                aj = JetField.coordinate(self.config, j, self.T.order - 2)
                out.append((B0T.diff(j) - 2.0 * aj * DT.diff(j)) * 0.5)
            return out
        return [self.tau.G(j) for j in range(self.N)]

    @cached_property
    def U(self) -> JetField:
        return self.tau.U

    @cached_property
    def W(self) -> JetField:
        return self.tau.W

    def hatG(self, k: int) -> JetField:
        return hat_G_jet(k, self.G)

    # T-jet operator values ------------------------------------------------
    def t(self, word: tuple, *idx: int) -> float:
        """d_idx (B_word T) at the base point."""
        key = tuple(word)
        jet = self._ops.get(key)
        if jet is None:
            jet = apply_ops(key, self.T)
            self._ops[key] = jet
        return jet[idx]

    def K(self, j: int) -> float:
        """(d_j B_0 - 2 a_j d_j D) T, which equals 2 G_j for Gaussian data."""
        return self.t((0,), j) - 2.0 * self.a[j] * self.t((-1,), j)

    def M(self, k: int) -> float:
        """(B_{k-1} B_0 - 2 B_k D) T."""
        return self.t((k - 1, 0)) - 2.0 * self.t((k, -1))

    @property
    def Fhat(self) -> float:
        return self.t((-1, -1)) + 2.0 * self.n

    # products dv_j (X_j +- Y_j) --------------------------------------------
    def _check_regular(self, j):
        if self.res.singular[j]:
            raise Skip(f"X_{j + 1}/Y_{j + 1} singular (|q| or |p| < 1e-12)")

    def XpY(self, j: int) -> float:
        if self.mode == "closure":
            return 2.0 * self.F[(j,)]
        self._check_regular(j)
        return float(self.res.grad_v[j] * (self.res.X[j] + self.res.Y[j]))

    def YmX(self, j: int) -> float:
        if self.mode == "closure":
            return 2.0 * (self.G[j].value + self.a[j] * self.v[(j,)])
        self._check_regular(j)
        return float(self.res.grad_v[j] * (self.res.Y[j] - self.res.X[j]))

    def Phi(self, k: int) -> float:
        return sum(self.a[j] ** k * self.XpY(j) for j in range(self.N))

    def Gamma(self, k: int) -> float:
        return sum(self.a[j] ** k * self.YmX(j) for j in range(self.N))


# ---------------------------------------------------------------------------
# registry machinery


@dataclass(frozen=True)
class Equation:
    group: str
    name: str
    kind: str  # "j", "ordered", "pair", "global", "k", "km", "two", "one"
    fn: Callable
    order: int = 3  # highest T-derivative entering (closure mode)
    about: str = ""

    @property
    def key(self) -> str:
        return f"{self.group}.{self.name}"


@dataclass(frozen=True)
class EquationId:
    group: str
    name: str
    indices: tuple = ()
    params: tuple = ()

    @property
    def label(self) -> str:
        s = f"{self.group}.{self.name}"
        if self.params:
            s += "[" + ",".join(f"{k}={v}" for k, v in self.params) + "]"
        if self.indices:
            s += "(" + ",".join(str(i + 1) for i in self.indices) + ")"
        return s

    def __str__(self):
        return self.label


@dataclass
class Residual:
    equation: str
    config: str
    residual: float = math.nan
    raw: float = math.nan
    normalization: float = math.nan
    skipped: bool = False
    reason: str = ""


def normalized(lhs: Sequence[float], rhs: Sequence[float]) -> tuple[float, float, float]:
    """(normalized residual, raw, normalization) of sum(lhs) = sum(rhs)."""
    lhs = [float(x) for x in lhs]
    rhs = [float(x) for x in rhs]
    raw = abs(math.fsum(lhs) - math.fsum(rhs))
    norm = max(1.0, math.fsum(abs(x) for x in lhs + rhs))
    return raw / norm, raw, norm


REGISTRY: list[Equation] = []


def _eq(group, name, kind, order=3, about=""):
    def deco(fn):
        REGISTRY.append(Equation(group, name, kind, fn, order, about))
        return fn

    return deco


def _worst(pairs):
    """Pick the worst of several equalities (lhs, rhs)."""
    best = None
    for lhs, rhs in pairs:
        r = normalized(lhs, rhs)
        if best is None or r[0] > best[0][0]:
            best = (r, lhs, rhs)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# TW system (direct resolvent data, finite differences in the endpoints)


def _s(b, k):
    return b.res.signs[k]


@_eq("TW", "qjl", "ordered", 1, "off-diagonal flow of q_j in a_k")
def _qjl(b, j, k):
    r = b.res
    return [b.tw["q"][j, k]], [_s(b, k) * r.R[j, k] * r.q[k]]


@_eq("TW", "pjl", "ordered", 1, "off-diagonal flow of p_j in a_k")
def _pjl(b, j, k):
    r = b.res
    return [b.tw["p"][j, k]], [_s(b, k) * r.R[j, k] * r.p[k]]


@_eq("TW", "Rjl", "pair", 0, "resolvent at two endpoints from q, p")
def _Rjl(b, j, l):
    r = b.res
    return [r.R[j, l] * (b.a[j] - b.a[l])], [r.q[j] * r.p[l], -r.p[j] * r.q[l]]


@_eq("TW", "Rj", "j", 1, "dT/da_j against R_jj and the Wronskian of q_j, p_j")
def _Rj(b, j):
    r = b.res
    dq, dp = b.tw["q"][j, j], b.tw["p"][j, j]
    return _worst([
        ([-_s(b, j) * b.tw["T"][j]], [r.R[j, j]]),
        ([r.R[j, j]], [r.p[j] * dq, -r.q[j] * dp]),
    ])


@_eq("TW", "uj", "j", 1, "flow of u")
def _uj(b, j):
    return [b.tw["u"][j]], [_s(b, j) * b.res.q[j] ** 2]


@_eq("TW", "vj", "j", 1, "flow of v")
def _vj(b, j):
    return [b.tw["v"][j]], [_s(b, j) * b.res.q[j] * b.res.p[j]]


@_eq("TW", "wj", "j", 1, "flow of w")
def _wj(b, j):
    return [b.tw["w"][j]], [_s(b, j) * b.res.p[j] ** 2]


def _cross(b, j, vec):
    r = b.res
    return [-_s(b, k) * r.R[j, k] * vec[k] for k in range(b.N) if k != j]


@_eq("TW", "qjj", "j", 1, "diagonal flow of q_j with the potential-dependent q'_j")
def _qjj(b, j):
    return [b.tw["q"][j, j]], [b.res.qprime[j]] + _cross(b, j, b.res.q)


@_eq("TW", "pjj", "j", 1, "diagonal flow of p_j")
def _pjj(b, j):
    return [b.tw["p"][j, j]], [b.res.pprime[j]] + _cross(b, j, b.res.p)


@_eq("TW", "Rjj", "j", 0, "R_jj through q'_j, p'_j")
def _Rjj(b, j):
    r = b.res
    rhs = [r.p[j] * r.qprime[j], -r.q[j] * r.pprime[j]]
    rhs += [_s(b, k) * r.R[j, k] * (r.q[j] * r.p[k] - r.p[j] * r.q[k]) for k in range(b.N) if k != j]
    return [r.R[j, j]], rhs


# ---------------------------------------------------------------------------
# one- and two-point equations in v, F, G_j


def _d(jet, *idx):
    return jet[idx]


@_eq("THM1", "Tjstar", "j", 3, "one-point equation linking G_j, v, F, T")
def _Tjstar(b, j):
    v, F, G = b.v, b.F, b.G[j]
    return [_d(v, j) * _d(G, j)], [G.value * _d(v, j, j), -b.T[(j,)] * _d(F, j)]


@_eq("THM1", "Pj", "j", 3, "one-point quadratic relation for G_j")
def _Pj(b, j):
    v, F, G = b.v, b.F, b.G[j]
    return [G.value**2], [_d(F, j) ** 2, 4 * F.value * _d(v, j) ** 2]


@_eq("THM1", "Pjl", "pair", 3, "two-point quadratic relation")
def _Pjl(b, j, l):
    v, F, Gj, Gl = b.v, b.F, b.G[j], b.G[l]
    lhs = [_d(F, j) * _d(F, l), -Gj.value * Gl.value, 4 * F.value * _d(v, j) * _d(v, l)]
    return lhs, [2 * F.value * (b.a[j] - b.a[l]) ** 2 * b.T[(j, l)]]


@_eq("THM1", "Ajl", "pair", 3, "two-point antisymmetric relation")
def _Ajl(b, j, l):
    v, F, Gj, Gl = b.v, b.F, b.G[j], b.G[l]
    return [Gl.value * _d(F, j), -Gj.value * _d(F, l)], [2 * F.value * (b.a[j] - b.a[l]) * _d(v, j, l)]


@_eq("THM1", "Ljl", "pair", 3, "linear two-point relation for G")
def _Ljl(b, j, l):
    return [_d(b.G[l], j), -_d(b.G[j], l)], [2 * (b.a[j] - b.a[l]) * _d(b.v, j, l)]


@_eq("THM1", "Gjl", "pair", 3, "symmetrized two-point relation for G")
def _Gjl(b, j, l):
    v, F = b.v, b.F
    dx = b.a[j] - b.a[l]
    return ([dx * _d(b.G[l], j), dx * _d(b.G[j], l)],
            [4 * _d(v, l) * _d(F, j), -4 * _d(v, j) * _d(F, l)])


@_eq("THM1", "Dvj", "j", 3, "d_j Dv through X_j + Y_j")
def _Dvj(b, j):
    return [D(b.v)[(j,)]], [b.XpY(j)]


@_eq("THM1", "Tj", "j", 2, "(d_j B_0 - a_j d_j D) T through Y_j - X_j")
def _Tj(b, j):
    return [b.t((0,), j), -b.a[j] * b.t((-1,), j)], [b.YmX(j)]


# ---------------------------------------------------------------------------
# moment sums of the non-universal pair


@_eq("THM2", "hvk", "k", 3, "weighted sum of Dvj")
def _hvk(b, k):
    return [apply_ops((k - 1, -1), b.v).value], [b.Phi(k)]


@_eq("THM2", "hTk", "k", 2, "weighted sum of Tj")
def _hTk(b, k):
    return [b.t((k - 1, 0)), -b.t((k, -1))], [b.Gamma(k)]


# ---------------------------------------------------------------------------
# moment forms of the two-point series


def _w(word, jet):
    return apply_ops(word, jet).value


@_eq("THM3", "hPkm", "km", 3, "moment form of Pjl")
def _hPkm(b, k, m):
    F, v = b.F, b.v
    lhs = [_w((k - 1,), F) * _w((m - 1,), F), -b.hatG(k).value * b.hatG(m).value,
           4 * F.value * _w((k - 1,), v) * _w((m - 1,), v)]
    rhs = [2 * F.value * (b.t((k + 1, m - 1)) + b.t((k - 1, m + 1)) - 2 * b.t((k, m)))]
    return lhs, rhs


def _vcombo(b, k, m):
    """(B_k B_{m-1} - B_{k-1} B_m + B_{k+m-1}) v."""
    v = b.v
    return _w((k, m - 1), v) - _w((k - 1, m), v) + _w((k + m - 1,), v)


@_eq("THM3", "hAkm", "km", 3, "moment form of Ajl")
def _hAkm(b, k, m):
    F = b.F
    lhs = [b.hatG(m).value * _w((k - 1,), F), -b.hatG(k).value * _w((m - 1,), F)]
    return lhs, [2 * F.value * _vcombo(b, k, m)]


@_eq("THM3", "hLkm", "km", 3, "moment form of Ljl")
def _hLkm(b, k, m):
    lhs = [_w((k - 1,), b.hatG(m)), -_w((m - 1,), b.hatG(k))]
    if k != m:
        lhs.append((k - m) * b.hatG(k + m - 1).value)
    return lhs, [2 * _vcombo(b, k, m)]


@_eq("THM3", "hGkm", "km", 3, "moment form of Gjl")
def _hGkm(b, k, m):
    F, v = b.F, b.v
    lhs = [_w((m - 1,), b.hatG(k + 1)), -_w((m,), b.hatG(k)), -b.hatG(k + m).value]
    vw = _w((k + 1, m - 1), v) + _w((k - 1, m + 1), v) - 2 * _w((k, m), v)
    rhs = [2 * _w((m - 1,), v) * _w((k - 1,), F), -2 * _w((k - 1,), v) * _w((m - 1,), F), -vw]
    return lhs, rhs


# ---------------------------------------------------------------------------
# mixed second derivatives; the one-point fourth-order pair


@_eq("THM4", "Tvjl", "pair", 3, "mixed second derivatives of T and v")
def _Tvjl(b, j, l):
    v, Tjl = b.v, b.T[(j, l)]
    return [_d(v, j, l) ** 2, -(b.a[j] - b.a[l]) ** 2 * Tjl**2, 4 * Tjl * _d(v, j) * _d(v, l)], []


@_eq("THM4", "TvFjl", "pair", 3, "mixed second derivatives of v against F")
def _TvFjl(b, j, l):
    v, F = b.v, b.F
    dx2 = (b.a[j] - b.a[l]) ** 2
    return [dx2 * F.value * _d(v, j, l) ** 2, -dx2 * b.T[(j, l)] * _d(F, j) * _d(F, l),
            -(_d(v, l) * _d(F, j) - _d(v, j) * _d(F, l)) ** 2], []


@_eq("REMARK", "Fjjstar", "j", 4, "second derivative of F in a_j")
def _Fjjstar(b, j):
    v, F = b.v, b.F
    return ([_d(v, j) * _d(F, j, j), 2 * _d(v, j) ** 3],
            [_d(F, j) * _d(v, j, j), -b.T[(j,)] * b.G[j].value])


@_eq("REMARK", "T1j", "j", 4, "squared form of Fjjstar")
def _T1j(b, j):
    v, F = b.v, b.F
    inner = _d(v, j) * (_d(F, j, j) + 2 * _d(v, j) ** 2) - _d(F, j) * _d(v, j, j)
    Tj = b.T[(j,)]
    return [inner**2], [Tj**2 * _d(F, j) ** 2, 4 * F.value * Tj**2 * _d(v, j) ** 2]


# ---------------------------------------------------------------------------
# Gaussian closures


@_eq("GAUSS", "v_closure", "global", 1, "2v = DT")
def _v_closure(b):
    return [2 * b.v.value], [b.t((-1,))]


@_eq("GAUSS", "F_closure", "global", 2, "4F = D^2 T + 2n")
def _F_closure(b):
    return [4 * b.F.value], [b.t((-1, -1)), 2.0 * b.n]


@_eq("GAUSS", "Gj_closure", "j", 2, "2G_j = (d_j B_0 - 2 a_j d_j D) T")
def _Gj_closure(b, j):
    return [2 * b.G[j].value], [b.t((0,), j), -2 * b.a[j] * b.t((-1,), j)]


# ---------------------------------------------------------------------------
# third-order equations in T alone


@_eq("THM5", "Tjstar_g", "j", 3, "Tjstar in T only")
def _Tjstar_g(b, j):
    lhs = [b.t((0,), j) * b.t((-1,), j, j), -b.t((-1,), j) * b.t((0,), j, j)]
    rhs = [b.T[(j,)] * b.t((-1, -1), j), -2 * b.t((-1,), j) ** 2]
    return lhs, rhs


@_eq("THM5", "Pj_g", "j", 3, "Pj in T only")
def _Pj_g(b, j):
    return [b.t((-1, -1), j) ** 2, -4 * b.K(j) ** 2, 4 * b.Fhat * b.t((-1,), j) ** 2], []


@_eq("THM6", "Pjl_g", "pair", 3, "Pjl in T only")
def _Pjl_g(b, j, l):
    lhs = [b.t((-1, -1), j) * b.t((-1, -1), l), -4 * b.K(j) * b.K(l),
           4 * b.Fhat * b.t((-1,), j) * b.t((-1,), l)]
    return lhs, [8 * (b.a[j] - b.a[l]) ** 2 * b.Fhat * b.T[(j, l)]]


@_eq("THM6", "Ajl_g", "pair", 3, "Ajl in T only")
def _Ajl_g(b, j, l):
    lhs = [b.K(l) * b.t((-1, -1), j), -b.K(j) * b.t((-1, -1), l)]
    return lhs, [2 * (b.a[j] - b.a[l]) * b.Fhat * b.t((-1,), j, l)]


@_eq("THM6", "Gjl_g", "pair", 3, "Gjl in T only")
def _Gjl_g(b, j, l):
    dx = b.a[j] - b.a[l]
    lhs = [2 * dx * b.t((0,), j, l), -2 * dx * (b.a[j] + b.a[l]) * b.t((-1,), j, l)]
    rhs = [b.t((-1,), l) * b.t((-1, -1), j), -b.t((-1,), j) * b.t((-1, -1), l)]
    return lhs, rhs


@_eq("THM7", "hPkm_g", "km", 3, "hPkm in T only")
def _hPkm_g(b, k, m):
    lhs = [b.t((k - 1, -1, -1)) * b.t((m - 1, -1, -1)), -4 * b.M(k) * b.M(m),
           4 * b.Fhat * b.t((k - 1, -1)) * b.t((m - 1, -1))]
    rhs = [8 * b.Fhat * (b.t((k + 1, m - 1)) + b.t((k - 1, m + 1)) - 2 * b.t((k, m)))]
    return lhs, rhs


@_eq("THM7", "hAkm_g", "km", 3, "hAkm in T only")
def _hAkm_g(b, k, m):
    lhs = [b.M(m) * b.t((k - 1, -1, -1)), -b.M(k) * b.t((m - 1, -1, -1))]
    combo = b.t((k, m - 1, -1)) - b.t((k - 1, m, -1)) + b.t((k + m - 1, -1))
    return lhs, [2 * b.Fhat * combo]


def _MB(b, outer, k):
    """B_outer (B_{k-1} B_0 - 2 B_k D) T."""
    return b.t((outer, k - 1, 0)) - 2 * b.t((outer, k, -1))


@_eq("THM7", "hGkm_g", "km", 3, "hGkm in T only")
def _hGkm_g(b, k, m):
    lhs = [_MB(b, m - 1, k + 1), -_MB(b, m, k), _MB(b, k, m), -_MB(b, k - 1, m + 1)]
    rhs = [b.t((m - 1, -1)) * b.t((k - 1, -1, -1)), -b.t((k - 1, -1)) * b.t((m - 1, -1, -1))]
    return lhs, rhs


def _B0B0_minus(b):
    """(B_1 D - B_0^2 + B_0) T."""
    return b.t((1, -1)) - b.t((0, 0)) + b.t((0,))


@_eq("THM7", "hP00", "global", 3, "hPkm_g at k = m = 0")
def _hP00(b):
    d2 = b.t((-1, -1))
    lhs = [b.t((-1, -1, -1)) ** 2, -4 * (b.t((-1,)) - b.t((0, -1))) ** 2, 4 * b.Fhat * d2**2]
    return lhs, [16 * b.Fhat * _B0B0_minus(b)]


@_eq("THM7", "hA10", "global", 3, "hAkm_g at k = 1, m = 0")
def _hA10(b):
    lhs = [(b.t((-1,)) - b.t((0, -1))) * b.t((0, -1, -1)),
           -(b.t((0, 0)) - 2 * b.t((1, -1))) * b.t((-1, -1, -1))]
    rhs = [2 * b.Fhat * (b.t((1, -1, -1)) - b.t((0, 0, -1)) + b.t((0, -1)))]
    return lhs, rhs


@_eq("THM7", "hG10", "global", 3, "hGkm_g at k = 1, m = 0")
def _hG10(b):
    lhs = [b.t((-1, 1, 0)) - 2 * b.t((-1, 2, -1)), -2 * (b.t((0, 0, 0)) - 2 * b.t((0, 1, -1))),
           b.t((1, -1)) - b.t((1, 0, -1))]
    rhs = [b.t((-1, -1)) * b.t((0, -1, -1)), -b.t((0, -1)) * b.t((-1, -1, -1))]
    return lhs, rhs


# ---------------------------------------------------------------------------
# second order


@_eq("THM8", "second_order", "pair", 2, "second-order equation for two or more endpoints")
def _second_order(b, j, l):
    Kj, Kl = b.K(j), b.K(l)
    dj, dl = b.t((-1,), j), b.t((-1,), l)
    dx2 = (b.a[j] - b.a[l]) ** 2
    Tjl = b.T[(j, l)]
    lhs = [(dl * Kj - dj * Kl) ** 2]
    rhs = [-4 * dx2 * Tjl * Kj * Kl, 4 * dx2 * Tjl * b.Fhat * (dj * dl - dx2 * Tjl)]
    return lhs, rhs


# ---------------------------------------------------------------------------
# two endpoints


@dataclass
class TwoEndpointState:
    """The two-endpoint variables, with j the right endpoint and l the left one."""

    n: int
    xi_plus: float
    xi_minus: float
    r: float
    r_minus: float
    S: float
    A: float
    Dr: float
    D2r: float
    DS: float
    DA: float
    DmA: float

    @property
    def F_hat(self) -> float:
        return self.Dr + 2.0 * self.n

    @property
    def G_plus(self) -> float:
        """4 G_+ = 2r - xi_+ Dr - xi_- S."""
        return 2 * self.r - self.xi_plus * self.Dr - self.xi_minus * self.S

    @property
    def G_minus(self) -> float:
        """4 G_- = 2r_- - xi_- Dr - xi_+ S - xi_- A."""
        return 2 * self.r_minus - self.xi_minus * self.Dr - self.xi_plus * self.S - self.xi_minus * self.A

    @property
    def D_minus_combo(self) -> float:
        return self.xi_minus * self.DmA + 4 * self.A


def two_endpoint_reduce(jet_T: JetField, config: EndpointConfig, n: int) -> TwoEndpointState:
    if config.N != 2:
        raise ValueError("two-endpoint reduction needs exactly two endpoints")
    a1, a2 = config.endpoints

    def Dm(f):
        return f.diff(1) - f.diff(0)

    r = D(jet_T)
    rm = Dm(jet_T)
    S = D(rm)
    A = D(r) - Dm(rm)
    Dr = D(r)
    return TwoEndpointState(
        n=n, xi_plus=a2 + a1, xi_minus=a2 - a1,
        r=r.value, r_minus=rm.value, S=S.value, A=A.value,
        Dr=Dr.value, D2r=D(Dr).value, DS=D(S).value,
        DA=D(A).value if A.order >= 1 else math.nan,
        DmA=Dm(A).value if A.order >= 1 else math.nan,
    )


def _sec4_state(b) -> TwoEndpointState:
    if b.T.order < 3:
        raise JetOrderError("two-endpoint equations need an order-3 jet")
    st = getattr(b, "_sec4", None)
    if st is None:
        st = b._sec4 = two_endpoint_reduce(b.T, b.config, b.n)
    return st


def sec4_terms(s: TwoEndpointState) -> dict:
    """(lhs, rhs) of every two-endpoint equation, from a state."""
    Gp, Gm, Fh, xm, xp = s.G_plus, s.G_minus, s.F_hat, s.xi_minus, s.xi_plus
    return {
        "P_r": ([Gp**2], [s.D2r**2, 4 * s.Dr**2 * Fh, -4 * xm**2 * Fh * s.A]),
        "Ps": ([Gm**2], [s.DS**2, 4 * s.S**2 * Fh, 4 * xm**2 * Fh * s.A]),
        "Px": ([Gp * Gm], [s.D2r * s.DS, 4 * s.Dr * s.S * Fh]),
        "Ajl2": ([Gp * s.DS, -Gm * s.D2r], [2 * xm * Fh * s.DA]),
        "Gjl2": ([2 * s.S * s.D2r, -2 * s.Dr * s.DS], [xm * xp * s.DA, -xm * xm * s.DmA, -4 * xm * s.A]),
        "rA": ([2 * xm * s.A * s.D2r],
               [(xm * (s.Dr + s.A) - 2 * s.r_minus) * s.DA, s.S * s.D_minus_combo]),
        "SA": ([2 * xm * s.A * s.DS], [(xm * s.S - 2 * s.r) * s.DA, s.Dr * s.D_minus_combo]),
        "twoG": ([(s.Dr * Gm - s.S * Gp) ** 2],
                 [xm**2 * s.A * Gm**2, -xm**2 * s.A * Gp**2,
                  4 * xm**2 * s.A * Fh * (s.Dr**2 - s.S**2 - xm**2 * s.A)]),
    }


_SEC4_ABOUT = {
    "P_r": "quadratic relation for G_+",
    "Ps": "quadratic relation for G_-",
    "Px": "mixed relation for G_+ G_-",
    "Ajl2": "two-endpoint Ajl",
    "Gjl2": "two-endpoint Gjl",
    "rA": "redundant relation for D^2 r",
    "SA": "redundant relation for DS",
    "twoG": "second-order equation in two-endpoint variables",
}


def _sec4(name, order):
    @_eq("SEC4", name, "two", order, _SEC4_ABOUT[name])
    def fn(b):
        return sec4_terms(_sec4_state(b))[name]

    fn.__name__ = f"_sec4_{name}"
    return fn


for _name in ("P_r", "Ps", "Px", "Ajl2", "Gjl2", "rA", "SA"):
    _sec4(_name, 3)
_sec4("twoG", 2)


def redundancy_identities(s: TwoEndpointState) -> dict:
    """rA and SA with DA and the D_- combination eliminated.

    Eliminating DA through the Ajl form and xi_- D_- A + 4A through the Gjl
    form, 2 xi_- F_hat times each equation becomes a combination of the
    Px, Ps and P_r residuals.  Returns normalized residuals of these exact
    algebraic identities.
    """
    t = sec4_terms(s)
    res = {k: math.fsum(l) - math.fsum(r) for k, (l, r) in t.items()}
    Gp, Gm, Fh, xm, xp = s.G_plus, s.G_minus, s.F_hat, s.xi_minus, s.xi_plus
    DA_num = Gp * s.DS - Gm * s.D2r  # = 2 xm Fh DA
    Dm_num = (xp * Gp + 4 * Fh * s.Dr) * s.DS - (xp * Gm + 4 * Fh * s.S) * s.D2r  # = 2 xm Fh D_-combo
    rA_terms = [2 * xm * Fh * 2 * xm * s.A * s.D2r, -(xm * (s.Dr + s.A) - 2 * s.r_minus) * DA_num, -s.S * Dm_num]
    SA_terms = [2 * xm * Fh * 2 * xm * s.A * s.DS, -(xm * s.S - 2 * s.r) * DA_num, -s.Dr * Dm_num]
    rA_rhs = [s.DS * res["Px"], -s.D2r * res["Ps"]]
    SA_rhs = [s.DS * res["P_r"], -s.D2r * res["Px"]]
    return {"rA": normalized(rA_terms, rA_rhs)[0], "SA": normalized(SA_terms, SA_rhs)[0]}


def redundancy_check(bundle: DataBundle) -> dict:
    """Direct and substituted residuals of the two redundant two-endpoint equations."""
    s = _sec4_state(bundle)
    t = sec4_terms(s)
    sub = redundancy_identities(s)
    return {
        "rA_direct": normalized(*t["rA"])[0],
        "SA_direct": normalized(*t["SA"])[0],
        "rA_substituted": sub["rA"],
        "SA_substituted": sub["SA"],
    }


# ---------------------------------------------------------------------------
# identities of the TW variables


@_eq("SEC5", "vuw_identity", "j", 1, "(d_j v)^2 = d_j u d_j w")
def _vuw(b, j):
    return [b.tw["v"][j] ** 2], [b.tw["u"][j] * b.tw["w"][j]]


@_eq("SEC5", "TjlR", "pair", 2, "d_j d_l T = -s_j s_l R_jl^2")
def _TjlR(b, j, l):
    return [b.T_fd_mixed[j, l]], [-_s(b, j) * _s(b, l) * b.res.R[j, l] ** 2]


@_eq("SEC5", "AvM", "pair", 3, "F-weighted symmetry of d_j G_l")
def _AvM(b, j, l):
    F, Gj, Gl = b.F, b.G[j], b.G[l]
    return [F.value * _d(Gl, j), -Gl.value * _d(F, j)], [F.value * _d(Gj, l), -Gj.value * _d(F, l)]


# ---------------------------------------------------------------------------
# one-endpoint chain: U, W, F, G and the fourth-order equations


@_eq("APPX", "A0", "global", 2, "D^2 T = 2(2UW - n)")
def _A0(b):
    return [b.t((-1, -1))], [4 * b.F.value, -2.0 * b.n]


@_eq("APPX", "Aplus", "global", 2, "second-order equation for U")
def _Aplus(b):
    U, W = b.U, b.W
    return [_w((-1, -1), U)], [-2 * _w((0,), U), 4 * b.n * U.value, -8 * U.value**2 * W.value]


@_eq("APPX", "Aminus", "global", 2, "second-order equation for W")
def _Aminus(b):
    U, W = b.U, b.W
    return [_w((-1, -1), W)], [2 * _w((0,), W), 4 * b.n * W.value, -8 * U.value * W.value**2]


@_eq("APPX", "G_def", "global", 2, "G = -(B_0 - 1) DT / 2")
def _G_def(b):
    return [b.hatG(0).value], [-0.5 * b.t((0, -1)), 0.5 * b.t((-1,))]


@_eq("APPX", "FF", "global", 4, "second-order equation for F")
def _FF(b):
    F = b.F
    f, dF, G, G0 = F.value, _w((-1,), F), b.hatG(0).value, b.hatG(1).value
    return [2 * f * _w((-1, -1), F), -dF**2, G**2], [-4 * f * G0, -32 * f * f * (f - 0.5 * b.n)]


@_eq("APPX", "G0", "global", 3, "G_0 in terms of T and F")
def _G0(b):
    F = b.F
    f, dF, G, G0 = F.value, _w((-1,), F), b.hatG(0).value, b.hatG(1).value
    rhs = [4 * f * b.t((0,)), -2 * f * b.t((0, 0)), -16 * f * (f - 0.5 * b.n) ** 2, -dF**2, G**2]
    return [4 * f * G0], rhs


@_eq("APPX", "bT", "global", 4, "fourth-order equation for T")
def _bT(b):
    Fh = b.Fhat
    d2, d3 = b.t((-1, -1)), b.t((-1, -1, -1))
    c = b.t((0, -1)) - b.t((-1,))  # (B_0 - 1) D T
    lhs = [b.t((-1, -1, -1, -1)) * Fh, -4 * b.t((0, 0)) * Fh, 8 * b.t((0,)) * Fh, 8 * b.n * d2 * Fh,
           2 * d2**2 * Fh, -(d3**2), 4 * c**2]
    return lhs, []


@_eq("APPX", "bKP", "global", 4, "fourth-order equation of KP type")
def _bKP(b):
    d2 = b.t((-1, -1))
    lhs = [b.t((-1, -1, -1, -1)), 8 * b.n * d2, 12 * b.t((0, 0)), 24 * b.t((0,)),
           -16 * b.t((-1, 1)), 6 * d2**2]
    return lhs, []


@_eq("APPX", "Pr", "global", 3, "third-order equation for T")
def _Pr(b):
    Fh = b.Fhat
    c = b.t((0, -1)) - b.t((-1,))
    lhs = [b.t((-1, -1, -1)) ** 2, -4 * c**2, 4 * Fh * b.t((-1, -1)) ** 2,
           16 * Fh * (b.t((0, 0)) - b.t((0,)) - b.t((1, -1)))]
    return lhs, []


@_eq("APPX", "P4", "one", 3, "one-endpoint first integral in r = T'")
def _P4(b):
    xi = b.a[0]
    r, rp, rpp = b.T[(0,)], b.T[(0, 0)], b.T[(0, 0, 0)]
    return [rpp**2, -4 * (xi * rp - r) ** 2, 4 * rp**2 * (rp + 2 * b.n)], []


def appendix_combination(bundle: DataBundle) -> float:
    """bT - (D^2 T + 2n) bKP + Pr, which vanishes identically on any jet.

    Returned relative to the sum of absolute terms of the three equations.
    """
    parts = []
    for name, weight in (("bT", 1.0), ("bKP", -bundle.Fhat), ("Pr", 1.0)):
        eq = lookup(f"APPX.{name}")
        lhs, rhs = eq.fn(bundle)
        parts.extend(weight * x for x in lhs)
        parts.extend(-weight * x for x in rhs)
    return abs(math.fsum(parts)) / max(1.0, math.fsum(abs(x) for x in parts))


# ---------------------------------------------------------------------------
# evaluation


def lookup(key: str) -> Equation:
    for eq in REGISTRY:
        if eq.key == key:
            return eq
    raise KeyError(key)


def groups() -> list[str]:
    out = []
    for eq in REGISTRY:
        if eq.group not in out:
            out.append(eq.group)
    return out


def selected(patterns: Iterable[str]) -> list[Equation]:
    pats = list(patterns)
    out = []
    for eq in REGISTRY:
        for p in pats:
            if fnmatch.fnmatchcase(eq.key, p) or fnmatch.fnmatchcase(eq.group, p):
                out.append(eq)
                break
    return out


def instances(eq: Equation, N: int, km_range=KM_RANGE):
    """(EquationId, args) pairs for an equation at N endpoints, or a skip reason."""
    base = (eq.group, eq.name)
    if eq.kind == "j":
        return [(EquationId(*base, (j,)), (j,)) for j in range(N)]
    if eq.kind == "ordered":
        if N < 2:
            return "needs N≥2"
        return [(EquationId(*base, (j, k)), (j, k)) for j in range(N) for k in range(N) if j != k]
    if eq.kind == "pair":
        if N < 2:
            return "needs N≥2"
        return [(EquationId(*base, (j, l)), (j, l)) for j, l in combinations(range(N), 2)]
    if eq.kind == "global":
        return [(EquationId(*base), ())]
    if eq.kind == "k":
        return [(EquationId(*base, params=(("k", k),)), (k,)) for k in km_range]
    if eq.kind == "km":
        return [(EquationId(*base, params=(("k", k), ("m", m))), (k, m)) for k in km_range for m in km_range]
    if eq.kind == "two":
        if N == 2:
            return [(EquationId(*base), ())]
        return "needs N≥2" if N < 2 else "needs N=2"
    if eq.kind == "one":
        return [(EquationId(*base), ())] if N == 1 else "needs N=1"
    raise ValueError(eq.kind)


def config_label(config: EndpointConfig) -> str:
    return ",".join(format(x, ".17g") for x in config.endpoints) + f";left={config.leftmost}"


def evaluate(eq: Equation, bundle: DataBundle, *args) -> Residual:
    """Normalized residual of one equation instance on a bundle; never raises for missing data."""
    eid = EquationId(eq.group, eq.name, args if eq.kind in ("j", "ordered", "pair") else ())
    label = config_label(bundle.config)
    try:
        lhs, rhs = eq.fn(bundle, *args)
    except (Skip, JetOrderError) as exc:
        return Residual(eid.label, label, skipped=True, reason=str(exc))
    val, raw, norm = normalized(lhs, rhs)
    if not math.isfinite(val):
        return Residual(eid.label, label, skipped=True, reason="non-finite residual")
    return Residual(eid.label, label, val, raw, norm)


@dataclass
class ResidualReport:
    rows: list[Residual] = field(default_factory=list)

    def evaluated(self) -> list[Residual]:
        return [r for r in self.rows if not r.skipped]

    def max_residual(self, pattern: str = "*") -> float:
        vals = [r.residual for r in self.evaluated() if fnmatch.fnmatchcase(r.equation, pattern)]
        return max(vals) if vals else 0.0

    def failures(self, tol: float) -> list[Residual]:
        return [r for r in self.evaluated() if r.residual > tol]

    def __len__(self):
        return len(self.rows)


def run_registry(n: int, configs: Sequence[EndpointConfig], settings: RegistrySettings = RegistrySettings(),
                 max_workers: int | None = None) -> ResidualReport:
    """Evaluate every selected equation at every configuration, in a fixed order."""
    eqs = selected(settings.select)
    need4 = any(eq.order >= 4 for eq in eqs)

    def one(config):
        bundle = DataBundle(n, config, settings, T_order=4 if need4 else 3)
        rows = []
        for eq in eqs:
            inst = instances(eq, config.N, settings.km_range)
            if isinstance(inst, str):
                rows.append(Residual(EquationId(eq.group, eq.name).label, config_label(config),
                                     skipped=True, reason=f"skipped: {inst}"))
                continue
            for eid, args in inst:
                r = evaluate(eq, bundle, *args)
                r.equation = eid.label
                rows.append(r)
        return rows

    report = ResidualReport()
    if max_workers and max_workers > 1 and len(configs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for rows in pool.map(one, configs):
                report.rows.extend(rows)
    else:
        for c in configs:
            report.rows.extend(one(c))
    return report
