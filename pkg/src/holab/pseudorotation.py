"""Pseudorotation level table in exact rational arithmetic.

E(j, m, k) = (j + 1/2) w_rho + m^2 / (2 I) + (k + 1/2) w_z with hbar = 1.
The sign change of the electronic state around the conical intersection
makes the pseudorotation quantum number m half-integral; an integer-m
assignment fitted to the same levels cannot reproduce them.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Sequence

from .errors import DomainError, LabelError

HALF = Fraction(1, 2)


def _frac(x) -> Fraction:
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**9)
    return Fraction(x)


@dataclass(frozen=True)
class Level:
    j: int
    m: Fraction
    k: int
    energy: Fraction

    def to_record(self) -> dict:
        return {"j": self.j, "m": str(self.m), "k": self.k, "energy": str(self.energy),
                "energy_float": float(self.energy)}


def level_energy(j: int, m, k: int, omega_rho, inertia, omega_z) -> Fraction:
    m = Fraction(m)
    if j < 0 or k < 0:
        raise DomainError("vibrational quanta must be non-negative")
    I = _frac(inertia)
    if I <= 0:
        raise DomainError("moment of inertia must be positive")
    return (j + HALF) * _frac(omega_rho) + m * m / (2 * I) + (k + HALF) * _frac(omega_z)


def half_integral_m(m_abs_max) -> list[Fraction]:
    """m in {+-1/2, +-3/2, ...} up to |m| <= m_abs_max."""
    top = Fraction(m_abs_max)
    out = []
    m = HALF
    while m <= top:
        out += [-m, m]
        m += 1
    return sorted(out)


def level_table(omega_rho, inertia, omega_z, j_max: int = 1, k_max: int = 1,
                m_values: Iterable = (Fraction(-3, 2), -HALF, HALF, Fraction(3, 2))) -> list[Level]:
    """Levels sorted by (energy, j, m, k); every m must be half-integral."""
    ms = [Fraction(m) for m in m_values]
    for m in ms:
        if (m - HALF).denominator != 1:
            raise LabelError(f"m = {m} is not half-integral")
    rows = [Level(j, m, k, level_energy(j, m, k, omega_rho, inertia, omega_z))
            for j, m, k in product(range(j_max + 1), ms, range(k_max + 1))]
    return sorted(rows, key=lambda r: (r.energy, r.j, r.m, r.k))


def _solve3(A, b):
    """Exact Gaussian elimination for a small rational system."""
    n = len(b)
    M = [list(row) + [bi] for row, bi in zip(A, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            raise DomainError("singular normal equations")
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


@dataclass(frozen=True)
class FitResult:
    omega_rho: Fraction
    inv_2I: Fraction
    omega_z: Fraction
    residual: Fraction  # sum of squared deviations, exact

    def to_record(self) -> dict:
        return {"omega_rho": str(self.omega_rho), "inv_2I": str(self.inv_2I), "omega_z": str(self.omega_z),
                "residual": str(self.residual), "residual_float": float(self.residual)}


def fit_levels(levels: Sequence[Level], integer_m: bool = False) -> FitResult:
    """Exact least-squares fit of (w_rho, 1/2I, w_z) to the level set.

    With ``integer_m`` each level's |m| is replaced by the integer of the same
    rank (1/2 -> 0, 3/2 -> 1, ...), the assignment an integer-m model would make.
    """
    rows, rhs = [], []
    for lv in levels:
        m = abs(lv.m)
        if integer_m:
            m = m - HALF
        rows.append([lv.j + HALF, m * m, lv.k + HALF])
        rhs.append(lv.energy)
    AtA = [[sum(r[a] * r[b] for r in rows) for b in range(3)] for a in range(3)]
    Atb = [sum(r[a] * y for r, y in zip(rows, rhs)) for a in range(3)]
    x = _solve3(AtA, Atb)
    res = sum((sum(c * v for c, v in zip(r, x)) - y) ** 2 for r, y in zip(rows, rhs))
    return FitResult(x[0], x[1], x[2], res)
