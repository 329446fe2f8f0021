"""Abelian geometric phases: connections, curvatures, loop phases, monopole census.

Sign convention: the geometric phase of a cycle is ``gamma = -oint A . dR``
with ``A = Im <n|grad n>``, so the spin-1/2 upper state on a cone of
colatitude theta0 acquires ``-pi (1 - cos theta0)``.  The discrete product
is reported with the same sign: ``phase = -arg prod <psi_k|psi_{k+1}>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AccuracyError,
    DomainError,
    GeometryError,
    IllConditionedOverlapError,
    NumericalError,
)
from .spectral import (
    HamiltonianFamily,
    ParameterLoop,
    ParameterSurface,
    _pivot,
    eigendecompose,
    fix_gauge,
    require_nondegenerate,
)

OVERLAP_TOL = 1e-8
METHODS = ("finite-difference", "perturbation-sum", "density-matrix")


def wrap(x: float) -> float:
    """Principal value in (-pi, pi]."""
    y = float(np.angle(np.exp(1j * x)))
    return np.pi if y == -np.pi else y


@dataclass(frozen=True)
class PhaseResult:
    phase: float
    unwrapped: float
    samples: int
    refinement_error: float = float("nan")


@dataclass(frozen=True)
class ConnectionSample:
    A: np.ndarray
    n: int
    R: np.ndarray
    gauge: str


@dataclass(frozen=True)
class CurvatureSample:
    V: np.ndarray
    n: int
    R: np.ndarray
    method: str


@dataclass(frozen=True)
class DegeneracyCensus:
    raw_flux: float
    charge: int
    residual: float
    refinements: int = 0
    history: tuple = ()

    def to_record(self) -> dict:
        return {"raw_flux": self.raw_flux, "charge": self.charge, "residual": self.residual}


@dataclass(frozen=True)
class MetricSample:
    g: np.ndarray
    n: int
    R: np.ndarray


# ---------------------------------------------------------------------------
# discrete products


def berry_phase_discrete(states: Sequence[np.ndarray], closed: bool = True) -> PhaseResult:
    """Gauge-invariant phase of an ordered sequence of states.

    The product runs over consecutive overlaps and always includes the closing
    overlap <psi_N|psi_1>, which makes the result independent of the phase of
    every individual state.  For an open path this is the phase of the path
    completed by a geodesic; for a closed sampled loop (last state on the same
    ray as the first) it is the cycle phase.  ``closed`` only controls the
    consistency check that the endpoints lie on the same ray.
    """
    psi = [np.asarray(s, dtype=complex) for s in states]
    if len(psi) < 2:
        raise DomainError("need at least two states")
    links = []
    for k in range(len(psi)):
        a, b = psi[k], psi[(k + 1) % len(psi)]
        ov = np.vdot(a, b)
        if abs(ov) <= OVERLAP_TOL:
            raise IllConditionedOverlapError(f"overlap between states {k} and {(k + 1) % len(psi)} is {abs(ov):.2e}", k)
        links.append(ov)
    if closed and len(psi) > 2 and abs(links[-1]) < 1 - 1e-6:
        # the sampled cycle does not return to its initial ray
        raise GeometryError("closed sequence: last state is not on the ray of the first")
    links = np.array(links)
    unwrapped = -float(np.sum(np.angle(links)))
    phase = wrap(-np.angle(np.prod(links / np.abs(links))))
    return PhaseResult(phase, unwrapped, len(psi))


def loop_states(family: HamiltonianFamily, n: int, loop: ParameterLoop) -> list[np.ndarray]:
    out = []
    for R in loop.points:
        es = eigendecompose(family, R)
        require_nondegenerate(es, n)
        out.append(es.state(n))
    return out


def berry_phase_loop(family: HamiltonianFamily, n: int, loop: ParameterLoop, tol: float = 1e-6,
                     max_refinements: int = 10) -> PhaseResult:
    """Cycle phase of level ``n`` refined by point doubling until converged to ``tol``."""
    cur = berry_phase_discrete(loop_states(family, n, loop), loop.closed)
    for _ in range(max_refinements):
        loop = loop.refined()
        nxt = berry_phase_discrete(loop_states(family, n, loop), loop.closed)
        err = abs(wrap(nxt.phase - cur.phase))
        cur = PhaseResult(nxt.phase, nxt.unwrapped, nxt.samples, err)
        if err < tol:
            return cur
    raise AccuracyError(f"loop phase not converged to {tol} (last change {cur.refinement_error:.2e})")


# ---------------------------------------------------------------------------
# connection and curvature


def _deriv(f, x0: np.ndarray, h: float, order: int = 4):
    """Central-difference gradient of a (possibly array-valued) function."""
    out = []
    for a in range(len(x0)):
        e = np.zeros_like(x0)
        e[a] = h
        if order == 2:
            out.append((f(x0 + e) - f(x0 - e)) / (2 * h))
        else:
            out.append((f(x0 - 2 * e) - 8 * f(x0 - e) + 8 * f(x0 + e) - f(x0 + 2 * e)) / (12 * h))
    return np.array(out)


def _state(family, n, R, pivot=None):
    es = eigendecompose(family, R)
    v = es.state(n)
    return v if pivot is None else fix_gauge(v, pivot)


def _checked_center(family, n, R):
    R = np.asarray(R, dtype=float)
    es = eigendecompose(family, R)
    require_nondegenerate(es, n)
    return R, es


def berry_connection_fd(family: HamiltonianFamily, n: int, R, step: float = 1e-5, order: int = 2,
                        pivot: int | None = None) -> ConnectionSample:
    """A_n(R) = Im <n|grad n> by central differences.

    Neighbour eigenvectors are gauge-matched to the centre by continuing the
    centre's gauge rule: the component that is the real-positive pivot at R
    is made real positive at R +- h as well.  (Aligning neighbours by
    maximizing Re<n(R)|n(R+-h)> instead would reproduce the parallel-transport
    gauge, in which A vanishes at R identically.)
    """
    if step <= 0 or step < 1e-14 * max(1.0, float(np.linalg.norm(R))):
        raise NumericalError(f"step {step} underflows")
    R, es = _checked_center(family, n, R)
    v0 = es.state(n)
    k = _pivot(v0) if pivot is None else pivot
    v0 = fix_gauge(v0, k)
    dv = _deriv(lambda x: _state(family, n, x, k), R, step, order)
    A = np.imag(dv @ v0.conj())
    return ConnectionSample(A, n, R, f"pivot[{k}]")


def _grad_H(family, R, h):
    return _deriv(family.evaluate, R, h, 4)


def _curv_perturbation(family, n, R, h):
    es = eigendecompose(family, R)
    dH = _grad_H(family, R, h)
    V = es.states
    # matrix elements <m|dH_a|n>
    M = np.einsum("im,aij,jn->amn", V.conj(), dH, V)
    E = es.energies
    d = E[n] - E
    mask = np.arange(len(E)) != n
    w = np.zeros(len(E))
    w[mask] = 1.0 / d[mask] ** 2
    # X_a^b = sum_m <n|dH_a|m><m|dH_b|n> w_m
    X = np.einsum("am,bm,m->ab", M[:, n, :], M[:, :, n], w)
    return np.array([X[1, 2] - X[2, 1], X[2, 0] - X[0, 2], X[0, 1] - X[1, 0]]).imag


def _proj(family, n, R):
    v = eigendecompose(family, R).state(n)
    return np.outer(v, v.conj())


def _curv_density(family, n, R, h):
    P = _proj(family, n, R)
    dP = _deriv(lambda x: _proj(family, n, x), R, h, 4)
    T = np.einsum("ij,ajk,bki->ab", P, dP, dP)
    return np.array([T[1, 2] - T[2, 1], T[2, 0] - T[0, 2], T[0, 1] - T[1, 0]]).imag


def _curv_fd(family, n, R, h_outer, h_inner):
    v0 = eigendecompose(family, R).state(n)
    k = _pivot(v0)

    def A(x):
        return berry_connection_fd(family, n, x, h_inner, order=4, pivot=k).A

    J = _deriv(A, R, h_outer, 4)  # J[a, b] = d_a A_b
    return np.array([J[1, 2] - J[2, 1], J[2, 0] - J[0, 2], J[0, 1] - J[1, 0]])


def berry_curvature(family: HamiltonianFamily, n: int, R, method: str = "perturbation-sum",
                    step: float = 1e-3) -> CurvatureSample:
    """Curvature V_n(R) (3-vector) by one of three independent formulas.

    perturbation-sum: Im sum_m <n|dH|m> x <m|dH|n> / (E_n - E_m)^2
    density-matrix:   Im Tr(rho grad rho x grad rho)
    finite-difference: curl of the finite-difference connection
    """
    if family.param_dim != 3:
        raise DomainError("curvature vector requires a 3-dimensional parameter space")
    R, es = _checked_center(family, n, R)
    if method == "perturbation-sum":
        V = _curv_perturbation(family, n, R, step)
    elif method == "density-matrix":
        V = _curv_density(family, n, R, step)
    elif method == "finite-difference":
        V = _curv_fd(family, n, R, step, step * 0.1)
    else:
        raise DomainError(f"unknown method {method!r}; choose from {METHODS}")
    return CurvatureSample(V, n, R, method)


def two_state_curvature(F, dF, sign: int = +1) -> np.ndarray:
    """Closed-form curvature of H = F(R).sigma for the upper (+1) or lower (-1) level.

    ``F`` is the field vector at R and ``dF[i, j] = dF_i/dR_j``.
    """
    F = np.asarray(F, float)
    dF = np.asarray(dF, float)
    f = np.linalg.norm(F)
    # V_a = (sign/2) eps_ijk F_i (d_b F_j)(d_c F_k) eps_abc / (2 f^3) with the
    # double epsilon contraction written via the cofactor matrix
    cof = np.linalg.det(dF) * np.linalg.inv(dF).T if abs(np.linalg.det(dF)) > 0 else _cofactor(dF)
    return sign * 0.5 * (cof.T @ F) / f**3


def _cofactor(M):
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(M, i, 0), j, 1)
            C[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return C


def curvature_map_rows(family, n, points, method="perturbation-sum"):
    """CSV-ready rows (X, Y, Z, Vx, Vy, Vz, gap) over a list of points."""
    rows = []
    for R in points:
        es = eigendecompose(family, R)
        V = berry_curvature(family, n, R, method).V
        rows.append([*np.asarray(R, float), *V, es.level_gap(n)])
    return rows


# ---------------------------------------------------------------------------
# census


def surface_flux(family, n, surface: ParameterSurface, method="perturbation-sum") -> float:
    dS = surface.area_vectors()
    total = 0.0
    for c, a in zip(surface.centroids(), dS):
        total += float(berry_curvature(family, n, c, method).V @ a)
    return total


def degeneracy_census(family: HamiltonianFamily, n: int, surface: ParameterSurface, tol: float = 1e-3 * 2 * np.pi,
                      max_refinements: int = 3, method: str = "perturbation-sum") -> DegeneracyCensus:
    """Curvature flux of level ``n`` through a closed surface, in units of 2 pi.

    Centroid quadrature over the triangles; the mesh is quadrisected until two
    successive fluxes differ by less than ``tol``.  The first refinement is
    always performed.
    """
    surface.check_watertight()
    history = [surface_flux(family, n, surface, method)]
    surf = surface
    level = 0
    while level < max_refinements:
        surf = surf.quadrisected()
        level += 1
        history.append(surface_flux(family, n, surf, method))
        if abs(history[-1] - history[-2]) < tol:
            break
    raw = history[-1]
    charge = int(np.rint(raw / (2 * np.pi)))
    residual = abs(raw - 2 * np.pi * charge)
    if residual > 0.05 * 2 * np.pi:
        raise AccuracyError(f"census residual {residual:.3e} above 0.05*2pi after {level} refinements")
    return DegeneracyCensus(raw, charge, residual, level, tuple(history))


# ---------------------------------------------------------------------------
# metric and geodesics


def quantum_metric(family: HamiltonianFamily, n: int, R, step: float = 1e-4) -> MetricSample:
    """g_ab = Re <d_a n|(1 - |n><n|)|d_b n> from gauge-continued central differences."""
    R, es = _checked_center(family, n, R)
    v0 = es.state(n)
    k = _pivot(v0)
    v0 = fix_gauge(v0, k)
    dv = _deriv(lambda x: _state(family, n, x, k), R, step, 4)
    Q = np.eye(len(v0)) - np.outer(v0, v0.conj())
    g = np.real(dv.conj() @ Q @ dv.T)
    g = 0.5 * (g + g.T)
    return MetricSample(g, n, R)


def geodesic_states(psi0, psi1, s: float) -> np.ndarray:
    """Point at fraction ``s`` along the projective geodesic from psi0 to psi1."""
    a = np.asarray(psi0, complex)
    b = np.asarray(psi1, complex)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    ov = np.vdot(a, b)
    if abs(ov) < OVERLAP_TOL:
        raise DomainError("orthogonal endpoints: geodesic is not unique")
    b = b * (abs(ov) / ov)
    theta = float(np.arccos(min(1.0, abs(ov))))
    perp = b - a * np.vdot(a, b)
    nrm = np.linalg.norm(perp)
    if nrm < 1e-15:
        return a.copy()
    perp /= nrm
    return np.cos(s * theta) * a + np.sin(s * theta) * perp


# ---------------------------------------------------------------------------
# solid angles


def _apex(p: np.ndarray) -> np.ndarray:
    m = p.mean(axis=0)
    if np.linalg.norm(m) > 0.3:
        return m / np.linalg.norm(m)
    cands = np.vstack([np.eye(3), -np.eye(3)])
    score = [np.min(1 - np.abs(p @ c)) for c in cands]
    return cands[int(np.argmax(score))]


def triangle_solid_angle(a, b, c) -> float:
    """Signed solid angle of the spherical triangle (a, b, c) of unit vectors."""
    num = np.dot(a, np.cross(b, c))
    den = 1 + np.dot(a, b) + np.dot(b, c) + np.dot(c, a)
    return 2 * float(np.arctan2(num, den))


def solid_angle_of_loop(points) -> float:
    """Signed solid angle enclosed by a closed spherical polygon (right-hand orientation).

    Points are normalized to the unit sphere.  A repeated final point is
    accepted.  The value is the sum of oriented triangles fanned from an apex
    and is therefore defined modulo 4 pi.
    """
    p = np.asarray(points, float)
    p = p / np.linalg.norm(p, axis=1)[:, None]
    if np.allclose(p[0], p[-1], atol=0, rtol=0):
        p = p[:-1]
    if len(p) < 3:
        raise GeometryError("need at least three distinct points")
    q = np.roll(p, -1, axis=0)
    if np.any(np.einsum("ij,ij->i", p, q) < -1 + 1e-12):
        raise GeometryError("antipodal consecutive vertices make the loop ambiguous")
    a = _apex(p)
    num = np.einsum("j,ij->i", a, np.cross(p, q))
    den = 1 + p @ a + np.einsum("ij,ij->i", p, q) + q @ a
    return float(2 * np.sum(np.arctan2(num, den)))
