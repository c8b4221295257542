"""The operators B_k = sum_j a_j^(k+1) d/da_j (D = B_{-1}) acting on jets.

Operators act on :class:`~gappde.jets.JetField` objects by exact jet
algebra, so an operator word applied to an order-L jet costs L orders and
introduces no further differencing.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .jets import JetField, JetOrderError


@dataclass(frozen=True)
class OperatorWord:
    """B_{k_1} B_{k_2} ... B_{k_L}; the rightmost factor acts first."""

    factors: tuple[int, ...]

    def __post_init__(self):
        for k in self.factors:
            if k < -1:
                raise ValueError(f"B_k needs k >= -1, got {k}")

    def __len__(self):
        return len(self.factors)

    @classmethod
    def parse(cls, text: str) -> "OperatorWord":
        """Parse e.g. ``"B0 D"``, ``"B1 B-1 B-1"``, ``"D^2"``."""
        factors: list[int] = []
        for tok in text.split():
            m = re.fullmatch(r"(D|B(-?\d+))(?:\^(\d+))?", tok)
            if not m:
                raise ValueError(f"cannot parse operator {tok!r}")
            k = -1 if m.group(1) == "D" else int(m.group(2))
            factors.extend([k] * int(m.group(3) or 1))
        return cls(tuple(factors))

    def __str__(self):
        return " ".join("D" if k == -1 else f"B{k}" for k in self.factors) or "1"


def B(k: int, jet: JetField) -> JetField:
    """B_k applied to a jet (order drops by one)."""
    if k < -1:
        raise ValueError("B_k needs k >= -1")
    if jet.order < 1:
        raise JetOrderError("operator needs a jet of order >= 1")
    if jet.config is None:
        raise ValueError("jet carries no endpoint configuration")
    cfg = jet.config
    out = JetField(jet.N, jet.order - 1, config=cfg)
    for j in range(jet.N):
        coeff = JetField.coordinate(cfg, j, jet.order - 1) ** (k + 1)
        out = out + coeff * jet.diff(j)
    return out


def D(jet: JetField) -> JetField:
    return B(-1, jet)


def apply_ops(word: OperatorWord | Sequence[int], jet: JetField) -> JetField:
    factors = word.factors if isinstance(word, OperatorWord) else tuple(word)
    if len(factors) > jet.order:
        raise JetOrderError(f"word of length {len(factors)} needs a jet of order >= {len(factors)}")
    out = jet
    for k in reversed(factors):
        out = B(k, out)
    return out


def apply_word(word: OperatorWord | Sequence[int], jet: JetField) -> float:
    """Value of the word applied to the jet's field at the base point."""
    return apply_ops(word, jet).value


COMMUTATORS = ("com", "com1")


def commutator_residual(pair: str, jet: JetField) -> float:
    """|LHS - RHS| of B_0 D = D (B_0 - 1) ("com") or D B_1 = B_1 D + 2 B_0 ("com1")."""
    if pair == "com":
        lhs = apply_word((0, -1), jet)
        rhs = apply_word((-1, 0), jet) - apply_word((-1,), jet)
    elif pair == "com1":
        lhs = apply_word((-1, 1), jet)
        rhs = apply_word((1, -1), jet) + 2.0 * apply_word((0,), jet)
    else:
        raise ValueError(f"unknown commutation relation {pair!r}; use one of {COMMUTATORS}")
    return abs(lhs - rhs)


def hat_G(k: int, G_values: Sequence[float], config) -> float:
    """sum_j a_j^k G_j."""
    a = np.asarray(config.endpoints, dtype=float)
    G = np.asarray(G_values, dtype=float)
    if G.shape != a.shape:
        raise ValueError("need one G value per endpoint")
    return float(np.sum(a**k * G))


def hat_G_jet(k: int, G_jets: Sequence[JetField]) -> JetField:
    """sum_j a_j^k G_j as a jet."""
    cfg = G_jets[0].config
    out = None
    for j, g in enumerate(G_jets):
        term = (JetField.coordinate(cfg, j, g.order) ** k) * g
        out = term if out is None else out + term
    return out


# right-hand sides of the moment sums ------------------------------------------


def phi_generic(k: int, data) -> float:
    """sum_j a_j^k dv/da_j (X_j + Y_j) from resolvent data; NaN if any X_j, Y_j is singular."""
    a = data.a
    return float(np.sum(a**k * data.grad_v * (data.X + data.Y)))


def gamma_generic(k: int, data) -> float:
    a = data.a
    return float(np.sum(a**k * data.grad_v * (data.Y - data.X)))


def phi_gaussian(k: int, T: JetField) -> float:
    """Gaussian closed form B_{k-1} D^2 T / 2."""
    return 0.5 * apply_word((k - 1, -1, -1), T)


def gamma_gaussian(k: int, T: JetField) -> float:
    """Gaussian closed form (B_{k-1} B_0 - B_k D) T."""
    return apply_word((k - 1, 0), T) - apply_word((k, -1), T)
