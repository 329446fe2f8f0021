"""Holonomy of degenerate multiplets: matrix connections, Wilson loops, covariant curvature.

Conventions follow the abelian module.  With an orthonormal frame F(R)
(columns spanning the multiplet) the connection is ``A_a = -i F^dag d_a F``
and the holonomy of a loop is the ordered product of unitary overlap
factors ``M_k = polar(F_{k+1}^dag F_k)``, so that for a single level
``U = exp(i gamma)`` with gamma the abelian phase.  A small loop of oriented
area dS gives ``U = 1 - i V.dS``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AccuracyError, MultipletError, NumericalError, TransportBreakdownError
from .spectral import HamiltonianFamily, ParameterLoop, _pivot, eigendecompose

MULTIPLET_TOL = 1e-8  # relative to the spectral range
ALIGN_TOL = 1e-6
BREAKDOWN_TOL = 1e-6


@dataclass(frozen=True)
class MatrixConnection:
    A: np.ndarray  # (3, r, r)
    R: np.ndarray
    residual: float  # size of the anti-Hermitian part discarded


@dataclass(frozen=True)
class CurvatureMatrix:
    V: np.ndarray  # (3, r, r)
    R: np.ndarray
    residual: float


@dataclass(frozen=True)
class HolonomyUnitary:
    U: np.ndarray
    loop: ParameterLoop
    samples: int
    refinement_error: float

    @property
    def eigenphases(self) -> np.ndarray:
        return np.sort(np.angle(np.linalg.eigvals(self.U)))

    def unitarity_defect(self) -> float:
        return float(np.abs(self.U.conj().T @ self.U - np.eye(len(self.U))).max())


# ---------------------------------------------------------------------------
# frames


def _check_levels(levels: Sequence[int], dim: int) -> list[int]:
    lv = sorted(int(i) for i in levels)
    if not lv or lv[0] < 0 or lv[-1] >= dim:
        raise MultipletError(f"level group {levels} out of range for dimension {dim}")
    if lv != list(range(lv[0], lv[-1] + 1)):
        raise MultipletError(f"level group {levels} is not contiguous")
    return lv


def _eigenspace(family: HamiltonianFamily, levels: Sequence[int], R) -> np.ndarray:
    lv = _check_levels(levels, family.dim)
    es = eigendecompose(family, R)
    E = es.energies
    scale = max(es.spectral_range, 1e-300)
    tol = MULTIPLET_TOL * scale
    if E[lv[-1]] - E[lv[0]] > tol:
        raise MultipletError(f"levels {lv} are not degenerate at R={np.asarray(R).tolist()} "
                             f"(spread {E[lv[-1]] - E[lv[0]]:.3e})")
    lo, hi = lv[0], lv[-1]
    if lo > 0 and E[lo] - E[lo - 1] <= tol:
        raise MultipletError(f"levels {lv} touch level {lo - 1}")
    if hi < family.dim - 1 and E[hi + 1] - E[hi] <= tol:
        raise MultipletError(f"levels {lv} touch level {hi + 1}")
    return es.states[:, lv]


def _phase_fix(col: np.ndarray, k: int) -> np.ndarray:
    c = col[k]
    if abs(c) < 1e-14:
        raise NumericalError("gauge pivot vanished; frame continuation failed")
    return col * (abs(c) / c)


def _frame_from_splitter(Q: np.ndarray, S: np.ndarray, pivots):
    w, v = np.linalg.eigh(Q.conj().T @ S @ Q)
    cols = Q @ v
    if pivots is None:
        pivots = [_pivot(cols[:, j]) for j in range(cols.shape[1])]
    return np.column_stack([_phase_fix(cols[:, j], k) for j, k in enumerate(pivots)]), list(pivots)


def _frame_greedy(P: np.ndarray, pivots):
    """Gram-Schmidt on projected standard basis vectors, picked greedily.

    Each column is built from P e_k so that its k-th entry is real positive;
    the frame depends smoothly on P as long as the pivot list is kept.
    """
    dim = P.shape[0]
    r = int(round(np.real(np.trace(P))))
    chosen = [] if pivots is None else list(pivots)
    cols: list[np.ndarray] = []
    for j in range(r):
        if pivots is None:
            best, bestn = -1, -1.0
            for k in range(dim):
                if k in chosen:
                    continue
                v = P[:, k].copy()
                for c in cols:
                    v -= c * np.vdot(c, v)
                nv = np.linalg.norm(v)
                if nv > bestn * (1 + 1e-12):
                    best, bestn = k, nv
            chosen.append(best)
        k = chosen[j]
        v = P[:, k].copy()
        for c in cols:
            v -= c * np.vdot(c, v)
        nv = np.linalg.norm(v)
        if nv < 1e-12:
            raise NumericalError("greedy frame construction lost rank")
        cols.append(_phase_fix(v / nv, k))
    return np.column_stack(cols), chosen


def multiplet_basis(family: HamiltonianFamily, levels: Sequence[int], R, pivots=None,
                    use_splitter: bool = True) -> tuple[np.ndarray, list[int]]:
    """Deterministic orthonormal frame (dim x r) spanning a degenerate multiplet.

    If the family carries a ``splitter`` operator its eigenbasis inside the
    multiplet defines the columns (ascending splitter eigenvalue), otherwise a
    greedy projector-based Gram-Schmidt is used.  Each column has a real
    positive pivot entry.  Returns the frame and the pivot list, which can be
    passed back in to continue the same gauge at nearby points.
    """
    Q = _eigenspace(family, levels, R)
    if Q.shape[1] == 1:
        k = _pivot(Q[:, 0]) if pivots is None else pivots[0]
        return _phase_fix(Q[:, 0], k)[:, None], [k]
    if use_splitter and family.splitter is not None:
        S = np.asarray(family.splitter(np.asarray(R, float)), complex)
        return _frame_from_splitter(Q, S, pivots)
    return _frame_greedy(Q @ Q.conj().T, pivots)


def projector(family: HamiltonianFamily, levels: Sequence[int], R) -> np.ndarray:
    Q = _eigenspace(family, levels, R)
    return Q @ Q.conj().T


# ---------------------------------------------------------------------------
# connection and curvature


def _hermitize(M: np.ndarray) -> tuple[np.ndarray, float]:
    H = 0.5 * (M + np.swapaxes(M.conj(), -1, -2))
    return H, float(np.abs(M - H).max())


def _conn_raw(family, levels, R, step, pivots):
    F0, piv = multiplet_basis(family, levels, R, pivots)
    comps = []
    for a in range(len(R)):
        e = np.zeros(len(R))
        e[a] = step
        fr = [multiplet_basis(family, levels, R + c * e, piv)[0] for c in (-2, -1, 1, 2)]
        dF = (fr[0] - 8 * fr[1] + 8 * fr[2] - fr[3]) / (12 * step)
        comps.append(-1j * F0.conj().T @ dF)
    return np.array(comps), piv


def connection_matrices(family: HamiltonianFamily, levels: Sequence[int], R, step: float = 1e-5,
                        pivots=None) -> MatrixConnection:
    """A_a = -i F^dag d_a F with neighbour frames continuing the centre gauge."""
    R = np.asarray(R, float)
    raw, _ = _conn_raw(family, levels, R, step, pivots)
    A, res = _hermitize(raw)
    if res > ALIGN_TOL:
        raise NumericalError(f"connection alignment failed: anti-Hermitian residual {res:.2e}")
    return MatrixConnection(A, R, res)


def _cross_comm(A: np.ndarray) -> np.ndarray:
    """(A x A)_c = eps_cab A_a A_b = [A_a, A_b] for cyclic (a, b)."""
    return np.array([A[1] @ A[2] - A[2] @ A[1], A[2] @ A[0] - A[0] @ A[2], A[0] @ A[1] - A[1] @ A[0]])


def curvature_matrix(family: HamiltonianFamily, levels: Sequence[int], R, step: float = 1e-3) -> CurvatureMatrix:
    """Covariant curvature V = curl A + i A x A (components Hermitian).

    The relative sign of the commutator term is the one that makes V
    transform as V -> W V W^dag under a frame change F -> F W^dag and that
    reproduces the small-loop holonomy U = 1 - i V.dS.
    """
    R = np.asarray(R, float)
    _, piv = multiplet_basis(family, levels, R)

    def A_at(x):
        return connection_matrices(family, levels, x, step * 0.1, piv).A

    J = []
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        J.append((A_at(R - 2 * e) - 8 * A_at(R - e) + 8 * A_at(R + e) - A_at(R + 2 * e)) / (12 * step))
    J = np.array(J)  # J[a, b] = d_a A_b
    curl = np.array([J[1, 2] - J[2, 1], J[2, 0] - J[0, 2], J[0, 1] - J[1, 0]])
    A0 = A_at(R)
    V, res = _hermitize(curl + 1j * _cross_comm(A0))
    if res > 1e-5:
        raise NumericalError(f"curvature not Hermitian: residual {res:.2e}")
    return CurvatureMatrix(V, R, res)


# ---------------------------------------------------------------------------
# holonomy


def polar_unitary(M: np.ndarray) -> tuple[np.ndarray, float]:
    """Closest unitary to M and its smallest singular value."""
    u, s, vh = np.linalg.svd(M)
    return u @ vh, float(s.min())


def ordered_product(frames: Sequence[np.ndarray]) -> np.ndarray:
    """U = M_{N-1} ... M_0 with M_k = polar(F_{k+1}^dag F_k)."""
    r = frames[0].shape[1]
    U = np.eye(r, dtype=complex)
    for k in range(len(frames) - 1):
        M, smin = polar_unitary(frames[k + 1].conj().T @ frames[k])
        if smin < BREAKDOWN_TOL:
            raise TransportBreakdownError(f"overlap between samples {k} and {k + 1} is rank deficient (s_min={smin:.2e})")
        U = M @ U
    return U


def loop_frames(family, levels, loop: ParameterLoop, remix: Callable[[np.ndarray], np.ndarray] | None = None):
    frames = [multiplet_basis(family, levels, R)[0] for R in loop.points]
    if remix is not None:
        frames = [F @ np.asarray(remix(R), complex).conj().T for F, R in zip(frames, loop.points)]
    if loop.closed:
        frames[-1] = frames[0]
    return frames


def wilson_loop(family: HamiltonianFamily, levels: Sequence[int], loop: ParameterLoop, tol: float = 1e-6,
                max_refinements: int = 8, refine: bool = True) -> HolonomyUnitary:
    """Holonomy unitary of a multiplet around a loop, in the frame at the start point."""
    U = ordered_product(loop_frames(family, levels, loop))
    if not refine:
        return HolonomyUnitary(U, loop, len(loop.points), float("nan"))
    for _ in range(max_refinements):
        loop = loop.refined()
        U2 = ordered_product(loop_frames(family, levels, loop))
        err = float(np.linalg.norm(U2 - U, 2))
        U = U2
        if err < tol:
            return HolonomyUnitary(U, loop, len(loop.points), err)
    raise AccuracyError(f"Wilson loop not converged to {tol} (last change {err:.2e})")


@dataclass(frozen=True)
class CovarianceReport:
    U: np.ndarray
    U_remixed: np.ndarray
    eigenvalue_deviation: float
    conjugation_deviation: float

    @property
    def ok(self) -> bool:
        return self.eigenvalue_deviation < 1e-10 and self.conjugation_deviation < 1e-10


def _eig_sorted(U):
    ev = np.linalg.eigvals(U)
    return ev[np.lexsort((np.round(ev.imag, 9), np.round(np.angle(ev), 9)))]


def gauge_covariance_check(family: HamiltonianFamily, levels: Sequence[int], loop: ParameterLoop,
                           W: Callable[[np.ndarray], np.ndarray]) -> CovarianceReport:
    """Recompute the holonomy in frames F W^dag and compare with W U W^dag."""
    U = ordered_product(loop_frames(family, levels, loop))
    U2 = ordered_product(loop_frames(family, levels, loop, remix=W))
    W0 = np.asarray(W(loop.points[0]), complex)
    ev_dev = float(np.abs(_eig_sorted(U) - _eig_sorted(U2)).max())
    conj_dev = float(np.abs(U2 - W0 @ U @ W0.conj().T).max())
    return CovarianceReport(U, U2, ev_dev, conj_dev)


def random_unitary(r: int, rng: np.random.Generator) -> np.ndarray:
    Z = rng.normal(size=(r, r)) + 1j * rng.normal(size=(r, r))
    q, t = np.linalg.qr(Z)
    return q * (np.diag(t) / np.abs(np.diag(t)))


def holonomy_record(h: HolonomyUnitary) -> dict:
    return {
        "U_real": np.round(h.U.real, 15).tolist(),
        "U_imag": np.round(h.U.imag, 15).tolist(),
        "eigenphases": h.eigenphases.tolist(),
        "samples": h.samples,
        "refinement_error": h.refinement_error,
    }
