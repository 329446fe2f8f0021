import numpy as np
import pytest

from holab import abelian as ab, nonabelian as na, spectral as sp
from holab.errors import MultipletError

Q = sp.quadrupole(1.0)
R0 = np.array([0.3, -0.2, 0.9])


def test_frame_and_projector():
    F, _ = na.multiplet_basis(Q, [2, 3], R0)
    assert F.shape == (4, 2)
    assert np.allclose(F.conj().T @ F, np.eye(2), atol=1e-12)
    P = na.projector(Q, [2, 3], R0)
    W = na.random_unitary(2, np.random.default_rng(0))
    G = F @ W
    assert np.allclose(G @ G.conj().T, P, atol=1e-12)
    with pytest.raises(MultipletError):
        na.multiplet_basis(Q, [1, 2], R0)


def test_connection_off_diagonals():
    # rotation about a fixed axis: the +-3/2 pair does not mix, the +-1/2 pair does
    hi = na.connection_matrices(Q, [2, 3], R0).A
    lo = na.connection_matrices(Q, [0, 1], R0).A
    assert np.abs(hi[:, 0, 1]).max() < 1e-8
    assert np.abs(lo[:, 0, 1]).max() > 1e-2
    for A in (hi, lo):
        assert np.allclose(A, np.conj(np.transpose(A, (0, 2, 1))), atol=1e-12)


def test_rank_one_reduces_to_abelian():
    z = sp.zeeman()
    loop = sp.colatitude_loop(0.9, n=200)
    u = na.wilson_loop(z, [1], loop, refine=False).U[0, 0]
    g = ab.berry_phase_discrete(ab.loop_states(z, 1, loop)).phase
    assert abs(ab.wrap(float(np.angle(u)) - g)) < 1e-8
    A1 = na.connection_matrices(z, [1], [0.2, 0.4, 0.8]).A[:, 0, 0]
    assert np.allclose(A1.real, ab.berry_connection_fd(z, 1, [0.2, 0.4, 0.8]).A, atol=1e-7)


def test_doublet_holonomy_diagonal_conjugate():
    th = 0.7
    h = na.wilson_loop(Q, [2, 3], sp.colatitude_loop(th, n=200), tol=1e-7)
    assert abs(h.U[0, 1]) < 1e-8 and abs(h.U[1, 0]) < 1e-8
    assert h.unitarity_defect() < 1e-10
    a, b = np.angle(h.U[0, 0]), np.angle(h.U[1, 1])
    assert abs(ab.wrap(a + b)) < 1e-8
    assert abs(abs(np.linalg.det(h.U)) - 1) < 1e-12


def test_reversal_and_rate_independence():
    loop = sp.circle_loop(R0, 0.3, (0.2, 0.5, 1.0), 96)
    U = na.wilson_loop(Q, [0, 1], loop, refine=False).U
    Ur = na.wilson_loop(Q, [0, 1], loop.reversed(), refine=False).U
    assert np.abs(Ur - U.conj().T).max() < 1e-8
    f = loop.func
    warped = sp.ParameterLoop.from_function(lambda s: f(s + 0.08 * np.sin(2 * np.pi * s)), 96)
    Uc = na.wilson_loop(Q, [0, 1], loop, tol=1e-6).U
    Uw = na.wilson_loop(Q, [0, 1], warped, tol=1e-6).U
    eig = np.sort(np.angle(np.linalg.eigvals(Uc)))
    assert np.abs(eig - np.sort(np.angle(np.linalg.eigvals(Uw)))).max() < 1e-5


def test_gauge_remix():
    loop = sp.circle_loop(R0, 0.3, (0, 0, 1), 64)
    rng = np.random.default_rng(3)
    W = na.random_unitary(2, rng)
    const = na.gauge_covariance_check(Q, [0, 1], loop, lambda R: W)
    assert const.ok
    G = na.random_unitary(2, rng)
    H = 0.5 * (G + G.conj().T)
    from scipy.linalg import expm
    moving = na.gauge_covariance_check(Q, [0, 1], loop, lambda R: W @ expm(1j * R[0] * H))
    assert moving.eigenvalue_deviation < 1e-10


def test_small_loop_matches_curvature():
    n = np.array([0.4, 0.5, 0.76])
    n /= np.linalg.norm(n)
    Vn = np.einsum("i,ijk->jk", n, na.curvature_matrix(Q, [0, 1], R0).V)
    errs = []
    for h in (0.02, 0.01):
        U = na.wilson_loop(Q, [0, 1], sp.circle_loop(R0, h / np.sqrt(np.pi), n, 64), tol=1e-9).U
        errs.append(np.abs(U - (np.eye(2) - 1j * Vn * h * h)).max())
    assert errs[0] / errs[1] == pytest.approx(8, rel=0.05)


def test_curvature_rank_one_and_covariance():
    z = sp.zeeman()
    R = [0.2, 0.3, 0.9]
    V1 = na.curvature_matrix(z, [1], R).V[:, 0, 0].real
    assert np.allclose(V1, ab.berry_curvature(z, 1, R).V, rtol=1e-5)
    cm = na.curvature_matrix(Q, [0, 1], R0)
    for k in range(3):
        assert np.allclose(cm.V[k], cm.V[k].conj().T, atol=1e-10)
