"""Endpoint configurations and the regions they cut out of the real line.

An ordered list of endpoints a_1 < ... < a_N splits R into N + 1 open
segments.  The segments alternate between the eigenvalue region J and the
gap region J^c; which one comes first is fixed by ``leftmost``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

LEFT_J = "J"
LEFT_JC = "Jc"
_KINDS = (LEFT_J, LEFT_JC)


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    """A sorted union of disjoint open intervals; ends may be infinite."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prev = -math.inf
        for lo, hi in self.intervals:
            if not lo < hi:
                raise GeometryError(f"empty interval ({lo}, {hi})")
            if lo < prev:
                raise GeometryError("intervals must be sorted and disjoint")
            prev = hi

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def finite_endpoints(self) -> list[float]:
        out = []
        for lo, hi in self.intervals:
            for x in (lo, hi):
                if math.isfinite(x) and (not out or out[-1] != x):
                    out.append(x)
        return out

    def contains(self, x: float) -> bool:
        return any(lo < x < hi for lo, hi in self.intervals)


# J^c in the notation of the determinant det(I - K chi_{J^c})
GapRegion = Region


@dataclass(frozen=True)
class EndpointConfig:
    endpoints: tuple[float, ...]
    leftmost: str = LEFT_J

    def __post_init__(self):
        if self.leftmost not in _KINDS:
            raise GeometryError(f"leftmost must be one of {_KINDS}, got {self.leftmost!r}")
        if len(self.endpoints) == 0:
            raise GeometryError("at least one endpoint is required")
        for x in self.endpoints:
            if not math.isfinite(x):
                raise GeometryError(f"non-finite endpoint {x}")
        for a, b in zip(self.endpoints, self.endpoints[1:]):
            if a == b:
                raise GeometryError(f"duplicate endpoint {a}")
            if a > b:
                raise GeometryError("endpoints must be strictly increasing")

    @property
    def N(self) -> int:
        return len(self.endpoints)

    def _segments(self):
        cuts = (-math.inf,) + tuple(self.endpoints) + (math.inf,)
        in_j = self.leftmost == LEFT_J
        for lo, hi in zip(cuts, cuts[1:]):
            yield lo, hi, in_j
            in_j = not in_j

    def gap_region(self) -> Region:
        """Connected components of J^c."""
        return Region(tuple((lo, hi) for lo, hi, in_j in self._segments() if not in_j))

    def eigen_region(self) -> Region:
        """Connected components of J (closure dropped)."""
        return Region(tuple((lo, hi) for lo, hi, in_j in self._segments() if in_j))

    def left_of_is_gap(self, j: int) -> bool:
        """Whether the segment just left of a_j (1-based) belongs to J^c."""
        _check_index(self, j)
        first_gap = self.leftmost == LEFT_JC
        return first_gap if (j - 1) % 2 == 0 else not first_gap

    def moved(self, deltas: Sequence[float]) -> "EndpointConfig":
        return EndpointConfig(
            tuple(a + d for a, d in zip(self.endpoints, deltas)), self.leftmost
        )

    def min_gap(self) -> float:
        if self.N < 2:
            return math.inf
        return min(b - a for a, b in zip(self.endpoints, self.endpoints[1:]))


def make_endpoint_config(endpoints: Sequence[float], leftmost: str = LEFT_J) -> EndpointConfig:
    return EndpointConfig(tuple(float(x) for x in endpoints), _normalize_kind(leftmost))


def _normalize_kind(kind: str) -> str:
    k = kind.strip()
    if k.startswith("left="):
        k = k[5:]
    aliases = {"J": LEFT_J, "Jc": LEFT_JC, "JC": LEFT_JC, "jc": LEFT_JC, "j": LEFT_J, "J^c": LEFT_JC}
    if k not in aliases:
        raise GeometryError(f"unknown region kind {kind!r}; use 'J' or 'Jc'")
    return aliases[k]


def parse_config(text: str, leftmost: str = LEFT_J) -> EndpointConfig:
    """Parse ``"-0.5,0.7"`` (optionally followed by ``";left=Jc"``)."""
    body, _, flag = text.partition(";")
    if flag:
        leftmost = flag
    vals = [float(tok) for tok in body.replace(" ", "").split(",") if tok]
    return make_endpoint_config(vals, leftmost)


def _check_index(config: EndpointConfig, j: int):
    if not 1 <= j <= config.N:
        raise IndexError(f"endpoint index {j} out of range 1..{config.N}")


# Base sign of endpoint 1 per leftmost kind, filled in by the calibration
# probe in gappde.fredholm on first use.
_PARITY_BASE: dict[str, int] = {}


def geometric_sign(config: EndpointConfig, j: int) -> int:
    """+1 when J^c lies just left of a_j (enlarging a_j enlarges J^c)."""
    return 1 if config.left_of_is_gap(j) else -1


def parity_sign(config: EndpointConfig, j: int) -> int:
    """The sign (-1)^j attached to endpoint j, fixed so that du/da_j = sign * q_j^2."""
    _check_index(config, j)
    base = _PARITY_BASE.get(config.leftmost)
    if base is None:
        from .fredholm import calibrate_parity

        base = calibrate_parity(config.leftmost)
        _PARITY_BASE[config.leftmost] = base
    return base if j % 2 == 1 else -base


def parity_signs(config: EndpointConfig) -> list[int]:
    return [parity_sign(config, j) for j in range(1, config.N + 1)]
