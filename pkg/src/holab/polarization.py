"""Polarization states, the Poincare sphere and Pancharatnam phases.

The Poincare point of a Jones vector A = (Ax, Ay) is the Stokes direction
rotated so that circular polarizations sit at the poles and linear ones on
the equator, with the handedness chosen so that the phase of the closed
product <A|B><B|C><C|A> equals minus half the solid angle of the triangle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abelian import solid_angle_of_loop, triangle_solid_angle, wrap
from .errors import DomainError, UndefinedPhaseError

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class PolarizationState:
    jones: np.ndarray
    intensity: float = 1.0

    def __post_init__(self):
        j = np.asarray(self.jones, complex)
        if j.shape != (2,):
            raise DomainError("Jones vector must have two components")
        n = np.linalg.norm(j)
        if abs(n - 1) > 1e-12:
            raise DomainError(f"Jones vector not normalized (|A| = {n:.15f})")
        if not self.intensity > 0:
            raise DomainError("intensity must be positive")
        object.__setattr__(self, "jones", j)

    @classmethod
    def from_vector(cls, v, intensity: float = 1.0) -> "PolarizationState":
        v = np.asarray(v, complex)
        return cls(v / np.linalg.norm(v), intensity)

    @classmethod
    def linear(cls, angle: float) -> "PolarizationState":
        return cls(np.array([np.cos(angle), np.sin(angle)], complex))

    @classmethod
    def circular(cls, right: bool = True) -> "PolarizationState":
        return cls(np.array([1, 1j if right else -1j]) / np.sqrt(2))

    @classmethod
    def from_poincare(cls, e) -> "PolarizationState":
        """Inverse of :func:`poincare_point` (up to a global phase)."""
        e = np.asarray(e, float)
        e = e / np.linalg.norm(e)
        s1, s2, s3 = e[0], e[1], -e[2]
        # Stokes (s1, s2, s3) -> Jones with Ax real non-negative
        th = np.arccos(np.clip(s1, -1, 1))
        ph = np.arctan2(s3, s2)
        return cls(np.array([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)]))


def stokes(p: PolarizationState) -> np.ndarray:
    ax, ay = p.jones
    return np.array([abs(ax) ** 2 - abs(ay) ** 2, 2 * np.real(np.conj(ax) * ay), 2 * np.imag(np.conj(ax) * ay)])


def poincare_point(p: PolarizationState) -> np.ndarray:
    """Unit vector on the Poincare sphere: (S1, S2, -S3)."""
    s = stokes(p)
    return np.array([s[0], s[1], -s[2]])


def pancharatnam_relative_phase(a: PolarizationState, b: PolarizationState) -> float:
    """arg<A|B> in (-pi, pi]; the phase that puts B in phase with A."""
    ov = np.vdot(a.jones, b.jones)
    if abs(ov) <= ORTHO_TOL:
        raise UndefinedPhaseError("orthogonal polarizations have no relative phase")
    return wrap(float(np.angle(ov)))


def superposed_intensity(a: PolarizationState, b: PolarizationState, extra_phase: float = 0.0) -> float:
    """|sqrt(I_A) A + sqrt(I_B) e^{-i chi} B|^2."""
    v = np.sqrt(a.intensity) * a.jones + np.sqrt(b.intensity) * np.exp(-1j * extra_phase) * b.jones
    return float(np.real(np.vdot(v, v)))


def triangle_phase(a: PolarizationState, b: PolarizationState, c: PolarizationState) -> float:
    """arg(<A|B><B|C><C|A>)."""
    z = np.vdot(a.jones, b.jones) * np.vdot(b.jones, c.jones) * np.vdot(c.jones, a.jones)
    if abs(z) <= ORTHO_TOL:
        raise UndefinedPhaseError("a pair in the triangle is orthogonal")
    return wrap(float(np.angle(z)))


def poincare_triangle_solid_angle(a, b, c) -> float:
    return triangle_solid_angle(poincare_point(a), poincare_point(b), poincare_point(c))


def poincare_loop_solid_angle(states) -> float:
    return solid_angle_of_loop([poincare_point(s) for s in states])
