"""Jets (all partial derivatives up to a fixed order) of scalar fields of
the endpoints, with the algebra needed to apply differential operators
exactly, and the derivative ladder that fills them from resolvent data.

Multi-indices are sorted tuples of 0-based endpoint indices, so
``jet[(0, 0, 1)]`` is d^3/da_1^2 da_2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement, product
from typing import Callable

import numpy as np

from .fredholm import DEFAULT_NUMERICS, Numerics, ResolventData, log_norm, point_data, resolve_engine
from .geometry import EndpointConfig


class JetOrderError(LookupError):
    """A derivative beyond the order carried by a jet was requested."""


@lru_cache(maxsize=None)
def multi_indices(N: int, order: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for k in range(order + 1):
        out.extend(combinations_with_replacement(range(N), k))
    return tuple(out)


def _counts(alpha, N):
    c = [0] * N
    for i in alpha:
        c[i] += 1
    return c


def _from_counts(c):
    return tuple(i for i, k in enumerate(c) for _ in range(k))


@lru_cache(maxsize=None)
def _leibniz_table(N: int, order: int):
    """For each alpha: [(beta, alpha - beta, multinomial weight)]."""
    table = {}
    for alpha in multi_indices(N, order):
        c = _counts(alpha, N)
        terms = []
        for b in product(*(range(k + 1) for k in c)):
            w = 1
            for ci, bi in zip(c, b):
                w *= math.comb(ci, bi)
            rest = [ci - bi for ci, bi in zip(c, b)]
            terms.append((_from_counts(b), _from_counts(rest), w))
        table[alpha] = terms
    return table


class JetField:
    """Partial derivatives of a scalar field of N endpoints up to ``order``."""

    def __init__(self, N: int, order: int, partials: dict | None = None, err: dict | None = None,
                 config: EndpointConfig | None = None):
        self.N, self.order, self.config = N, order, config
        self.partials = {a: 0.0 for a in multi_indices(N, order)}
        if partials:
            for a, v in partials.items():
                self.partials[tuple(sorted(a))] = float(v)
        self.err = {a: 0.0 for a in self.partials}
        if err:
            for a, v in err.items():
                self.err[tuple(sorted(a))] = float(v)

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, N, order, value, config=None):
        return cls(N, order, {(): value}, config=config)

    @classmethod
    def coordinate(cls, config: EndpointConfig, j: int, order: int):
        parts = {(): config.endpoints[j]}
        if order >= 1:
            parts[(j,)] = 1.0
        return cls(config.N, order, parts, config=config)

    def _like(self, order=None):
        return JetField(self.N, self.order if order is None else order, config=self.config)

    # access -----------------------------------------------------------------
    def __getitem__(self, alpha) -> float:
        alpha = tuple(sorted(alpha))
        if len(alpha) > self.order:
            raise JetOrderError(f"derivative of order {len(alpha)} requested from an order-{self.order} jet")
        return self.partials[alpha]

    @property
    def value(self) -> float:
        return self.partials[()]

    def gradient(self) -> np.ndarray:
        return np.array([self[(j,)] for j in range(self.N)])

    def hessian(self) -> np.ndarray:
        return np.array([[self[(j, l)] for l in range(self.N)] for j in range(self.N)])

    def max_err(self, degree: int) -> float:
        vals = [e for a, e in self.err.items() if len(a) == degree]
        return max(vals) if vals else 0.0

    # algebra ----------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, JetField):
            if other.N != self.N:
                raise ValueError("jets over different numbers of endpoints")
            return other
        return JetField.constant(self.N, self.order, other, self.config)

    def _binary_linear(self, other, sign):
        other = self._coerce(other)
        out = JetField(self.N, min(self.order, other.order), config=self.config or other.config)
        for a in out.partials:
            out.partials[a] = self.partials[a] + sign * other.partials[a]
            out.err[a] = self.err[a] + other.err[a]
        return out

    def __add__(self, other):
        return self._binary_linear(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary_linear(other, -1.0)

    def __rsub__(self, other):
        return self._coerce(other)._binary_linear(self, -1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, other):
        if not isinstance(other, JetField):
            out = self._like()
            for a in out.partials:
                out.partials[a] = self.partials[a] * other
                out.err[a] = self.err[a] * abs(other)
            return out
        other = self._coerce(other)
        out = JetField(self.N, min(self.order, other.order), config=self.config or other.config)
        table = _leibniz_table(self.N, out.order)
        for a in out.partials:
            s = e = 0.0
            for b, c, w in table[a]:
                fb, gc = self.partials[b], other.partials[c]
                s += w * fb * gc
                e += w * (abs(fb) * other.err[c] + abs(gc) * self.err[b])
            out.partials[a], out.err[a] = s, e
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, JetField):
            raise TypeError("division by a jet is not supported; clear denominators")
        return self * (1.0 / other)

    def __pow__(self, k: int):
        if k < 0 or int(k) != k:
            raise ValueError("only non-negative integer powers")
        out = JetField.constant(self.N, self.order, 1.0, self.config)
        for _ in range(int(k)):
            out = out * self
        return out

    def diff(self, j: int) -> "JetField":
        """d/da_j, lowering the order by one."""
        if self.order < 1:
            raise JetOrderError("cannot differentiate an order-0 jet")
        out = self._like(self.order - 1)
        for a in out.partials:
            b = tuple(sorted(a + (j,)))
            out.partials[a], out.err[a] = self.partials[b], self.err[b]
        return out

    def truncate(self, order: int) -> "JetField":
        if order > self.order:
            raise JetOrderError("cannot raise the order of a jet")
        out = self._like(order)
        for a in out.partials:
            out.partials[a], out.err[a] = self.partials[a], self.err[a]
        return out

    def exp(self) -> "JetField":
        """exp of the field, by d(e^f) = e^f df applied recursively."""
        out = self._like()
        out.partials[()] = math.exp(self.partials[()])
        out.err[()] = out.partials[()] * self.err[()]
        table = _leibniz_table(self.N, self.order)
        for a in multi_indices(self.N, self.order)[1:]:
            j, rest = a[0], a[1:]
            s = e = 0.0
            for b, c, w in table[rest]:
                dc = tuple(sorted(c + (j,)))
                hb, fc = out.partials[b], self.partials[dc]
                s += w * hb * fc
                e += w * (abs(hb) * self.err[dc] + abs(fc) * out.err[b])
            out.partials[a], out.err[a] = s, e
        return out

    def __repr__(self):
        return f"JetField(N={self.N}, order={self.order}, value={self.value:.6g})"


# ---------------------------------------------------------------------------
# finite differences

_STENCILS = {
    1: ((-1, 1), (-0.5, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 1, 2), (-0.5, 1.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def richardson(values: list, ratio: float = 4.0):
    """Extrapolate D(h), D(h/2), ... assuming an even-power error series.

    Returns (estimate, error estimate); the error is the change between the
    two most refined diagonal entries of the table.
    """
    prev = [np.asarray(v, dtype=float) for v in values]
    diag = [prev[0]]
    for k in range(1, len(values)):
        f = ratio**k
        prev = [prev[i + 1] + (prev[i + 1] - prev[i]) / (f - 1.0) for i in range(len(prev) - 1)]
        diag.append(prev[0])
    best = diag[-1]
    err = np.abs(best - diag[-2]) if len(diag) > 1 else np.full_like(best, np.nan)
    return best, err


def fd_derivative(f: Callable[[EndpointConfig], np.ndarray], config: EndpointConfig, idx: tuple,
                  steps: np.ndarray, levels: int = 2):
    """Central tensor-stencil derivative d^|idx| f / prod da_i, Richardson-extrapolated.

    ``f`` maps a configuration to a float or array; ``steps[j]`` is the base
    step for endpoint j; levels + 1 step sizes h, h/2, ... are used.
    """
    c = _counts(idx, config.N)
    axes = [j for j in range(config.N) if c[j]]
    ests = []
    for lev in range(levels + 1):
        scale = 0.5**lev
        total = 0.0
        for combo in product(*(zip(*_STENCILS[c[j]]) for j in axes)):
            delta = np.zeros(config.N)
            w = 1.0
            for j, (off, wt) in zip(axes, combo):
                h = steps[j] * scale
                delta[j] = off * h
                w *= wt / h ** c[j]
            if w != 0.0:
                total = total + w * np.asarray(f(config.moved(delta)), dtype=float)
        ests.append(total)
    return richardson(ests)


@dataclass(frozen=True)
class JetSettings:
    fd_step: float = 1e-3
    richardson_levels: int = 2
    order4_factor: float = 10.0  # second differences tolerate larger steps
    min_step: float = 1e-6
    collision_factor: float = 20.0


DEFAULT_JET_SETTINGS = JetSettings()


def stencil_steps(config: EndpointConfig, settings: JetSettings = DEFAULT_JET_SETTINGS, factor: float = 1.0):
    """Per-endpoint base steps, shrunk when endpoints are close together."""
    a = np.abs(np.asarray(config.endpoints))
    h = settings.fd_step * factor * np.maximum(1.0, a)
    # the widest stencil reaches 2h from the centre
    gap = config.min_gap()
    if math.isfinite(gap) and gap < settings.collision_factor * h.max():
        h = h * gap / (settings.collision_factor * h.max())
    return np.maximum(h, settings.min_step)


class PointCache:
    """Memoized ResolventData per configuration at fixed size and engine."""

    def __init__(self, n: int, numerics: Numerics = DEFAULT_NUMERICS):
        self.n, self.numerics = n, numerics
        self._store: dict = {}

    def __call__(self, config: EndpointConfig) -> ResolventData:
        key = (config.endpoints, config.leftmost)
        d = self._store.get(key)
        if d is None:
            d = point_data(self.n, config, self.numerics)
            self._store[key] = d
        return d


# ---------------------------------------------------------------------------
# the ladder

_FIELDS = {
    "T": (lambda d: d.T, lambda d: d.grad_T, lambda d: d.hess_T),
    "v": (lambda d: d.v, lambda d: d.grad_v, lambda d: d.hess_v),
}


def ladder_jet(cache: PointCache, config: EndpointConfig, field_name: str = "T", order: int = 3,
               settings: JetSettings = DEFAULT_JET_SETTINGS) -> JetField:
    """Jet of T or v built from the analytic identities where they exist.

    order 0: value; order 1: analytic gradient; order 2: analytic mixed
    entries, diagonal by differencing the analytic gradient; order 3: one
    difference of the analytic Hessian; order 4: second differences of it.
    """
    if order > 4:
        raise ValueError("jets are supported up to order 4")
    value, grad, hess = _FIELDS[field_name]
    N = config.N
    d0 = cache(config)
    jet = JetField(N, order, config=config)
    jet.partials[()] = value(d0)
    if order >= 1:
        g = grad(d0)
        for j in range(N):
            jet.partials[(j,)] = g[j]
    if order >= 2:
        H = hess(d0)
        steps = stencil_steps(config, settings)
        lv = settings.richardson_levels
        for j in range(N):
            for l in range(j + 1, N):
                jet.partials[(j, l)] = H[j, l]
            val, err = fd_derivative(lambda c: grad(cache(c))[j], config, (j,), steps, lv)
            jet.partials[(j, j)], jet.err[(j, j)] = float(val), float(err)
    if order >= 3:
        first = {}
        for i in range(N):
            first[i] = fd_derivative(lambda c: hess(cache(c)), config, (i,), steps, lv)
        for a in combinations_with_replacement(range(N), 3):
            val, err = first[a[0]]
            jet.partials[a], jet.err[a] = float(val[a[1], a[2]]), float(err[a[1], a[2]])
    if order >= 4:
        steps4 = stencil_steps(config, settings, settings.order4_factor)
        second = {}
        for i, k in combinations_with_replacement(range(N), 2):
            second[(i, k)] = fd_derivative(lambda c: hess(cache(c)), config, (i, k), steps4, lv)
        for a in combinations_with_replacement(range(N), 4):
            val, err = second[(a[0], a[1])]
            jet.partials[a], jet.err[a] = float(val[a[2], a[3]]), float(err[a[2], a[3]])
    return jet


def fd_jet(f: Callable[[EndpointConfig], float], config: EndpointConfig, order: int = 2,
           settings: JetSettings = DEFAULT_JET_SETTINGS, factor: float = 10.0) -> JetField:
    """Jet built purely by differencing scalar values of ``f``."""
    steps = stencil_steps(config, settings, factor)
    jet = JetField(config.N, order, config=config)
    jet.partials[()] = float(f(config))
    for a in multi_indices(config.N, order)[1:]:
        val, err = fd_derivative(f, config, a, steps, settings.richardson_levels)
        jet.partials[a], jet.err[a] = float(val), float(err)
    return jet


def _zero_jet(config, order):
    return JetField(config.N, order, config=config)


def jet_T(n: int, config: EndpointConfig, order: int = 3, settings: JetSettings = DEFAULT_JET_SETTINGS,
          numerics: Numerics = DEFAULT_NUMERICS) -> JetField:
    """Jet of T = ln det(I - K_n chi_{J^c}); n = 0 gives the zero jet."""
    if n == 0:
        return _zero_jet(config, order)
    return ladder_jet(PointCache(n, resolve_engine(n, config, numerics)), config, "T", order, settings)


def jet_v(n: int, config: EndpointConfig, order: int = 3, settings: JetSettings = DEFAULT_JET_SETTINGS,
          numerics: Numerics = DEFAULT_NUMERICS) -> JetField:
    return ladder_jet(PointCache(n, resolve_engine(n, config, numerics)), config, "v", order, settings)


def jet_consistency_report(jet_a: JetField, jet_b: JetField) -> dict[int, float]:
    """Max |difference| per derivative order over the common entries."""
    order = min(jet_a.order, jet_b.order)
    out = {k: 0.0 for k in range(order + 1)}
    for a in multi_indices(jet_a.N, order):
        out[len(a)] = max(out[len(a)], abs(jet_a.partials[a] - jet_b.partials[a]))
    return out


# ---------------------------------------------------------------------------
# jets of the tau-ratio variables


@dataclass
class TauJets:
    """Jets of T_{n-1}, T_n, T_{n+1} and of U, W, F, G_j built from them."""

    n: int
    T_prev: JetField
    T: JetField
    T_next: JetField
    extra: dict = field(default_factory=dict)

    @property
    def U(self) -> JetField:
        return (self.T_next - self.T + log_norm(self.n)).exp()

    @property
    def W(self) -> JetField:
        return (self.T_prev - self.T - log_norm(self.n - 1)).exp()

    @property
    def F(self) -> JetField:
        return (self.T_next + self.T_prev - 2.0 * self.T + math.log(0.5 * self.n)).exp()

    def G(self, j: int) -> JetField:
        """G_j = W dU/da_j - U dW/da_j = F d(T_{n+1} - T_{n-1})/da_j."""
        return self.F.truncate(self.F.order - 1) * (self.T_next - self.T_prev).diff(j)


def tau_jets(n: int, config: EndpointConfig, order: int = 2, settings: JetSettings = DEFAULT_JET_SETTINGS,
             numerics: Numerics = DEFAULT_NUMERICS, T_jet: JetField | None = None) -> TauJets:
    prev = jet_T(n - 1, config, order, settings, numerics)
    cur = T_jet.truncate(order) if T_jet is not None else jet_T(n, config, order, settings, numerics)
    nxt = jet_T(n + 1, config, order, settings, numerics)
    return TauJets(n, prev, cur, nxt)
