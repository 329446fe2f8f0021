import numpy as np
import pytest

from holab import abelian as ab, dynamics as dy, spectral as sp
from holab.errors import DomainError, UndefinedPhaseError


def _rand_H(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    B = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    A, B = A + A.conj().T, B + B.conj().T
    return lambda t: A + np.sin(1.3 * t) * B


def test_constant_eigenstate():
    H = np.diag([0.7, -0.4]).astype(complex)
    tr = dy.propagate_hamiltonian(lambda t: H, 0, 5.0, [1, 0], 100)
    assert np.allclose(tr.final, np.exp(-0.7j * 5.0) * np.array([1, 0]), atol=1e-8)
    d = dy.aa_phase(tr)
    assert abs(d.geometric) < 1e-10
    assert abs(ab.wrap(d.dynamical + 3.5)) < 1e-8


def test_norm_drift_long_run():
    tr = dy.propagate_hamiltonian(_rand_H(1), 0, 200.0, [1, 0], 100000, adaptive=False)
    assert np.abs(tr.norms - 1).max() < 1e-9


def test_initial_state_checks():
    with pytest.raises(DomainError):
        dy.propagate_hamiltonian(lambda t: np.eye(2), 0, 1, [1, 1], 10)
    with pytest.raises(DomainError):
        dy.Schedule(lambda t: t, -1.0)


def test_redecoration_and_reparameterization():
    th, w = 1.0, 1.0
    psi0 = np.array([np.cos(th / 2), np.sin(th / 2)], complex)
    Hz = 0.5 * w * np.diag([1.0, -1.0]).astype(complex)
    T = 2 * np.pi / w
    tr = dy.propagate_hamiltonian(lambda s: Hz, 0, T, psi0, 16000, tol=1e-10, method="magnus4")
    d = dy.aa_phase(tr)
    rng = np.random.default_rng(0)
    ph = np.exp(1j * rng.uniform(0, 2 * np.pi, len(tr.times)))
    red = dy.TrajectoryRecord(tr.times, tr.states * ph[:, None], tr.norms)
    assert abs(ab.wrap(dy.aa_phase(red).geometric - d.geometric)) < 1e-10
    tr2 = dy.propagate_hamiltonian(lambda s: (1 + 0.5 * np.cos(s)) * Hz, 0, T, psi0, 16000, tol=1e-10,
                                   method="magnus4")
    assert abs(ab.wrap(dy.aa_phase(tr2).geometric - d.geometric)) < 1e-8


def test_dynamical_phase_two_forms():
    H = _rand_H(2)
    tr = dy.propagate_hamiltonian(H, 0, 3.0, [1, 0], 2000, tol=1e-10, method="magnus4")
    assert dy.aa_phase(tr, closed=False).dynamical == pytest.approx(dy.dynamical_phase_expectation(tr, H), abs=1e-5)


def test_closed_mode_orthogonal_endpoints():
    X = np.array([[0, 1], [1, 0]], complex)
    tr = dy.propagate_hamiltonian(lambda t: X, 0, np.pi / 2, [1, 0], 200)
    with pytest.raises(UndefinedPhaseError):
        dy.aa_phase(tr)
    assert np.isfinite(dy.aa_phase(tr, closed=False).geometric)


def test_adiabatic_scan_shrinks():
    th = np.pi / 3
    cyc = lambda s: (np.sin(th) * np.cos(2 * np.pi * s), np.sin(th) * np.sin(2 * np.pi * s), np.cos(th))  # noqa: E731
    rows = dy.adiabatic_error_scan(sp.zeeman(), cyc, 1, [0.1, 0.05, 0.025], tol=1e-7, steps_per_unit=10)
    leak = [r["leakage"] for r in rows]
    err = [r["phase_error"] for r in rows]
    assert leak[0] > leak[1] > leak[2]
    assert err[0] > err[1] > err[2]


def test_helix_probability_matches_closed_form():
    P = dy.transition_probability(dy.helix_field(1.2, 0.05, 1.0), 0.2, 8.0)
    assert P == pytest.approx(dy.helix_probability_exact(1.2, 0.05, 1.0, 0.2), rel=1e-4)


def test_amplitude_fit_needs_four_points():
    with pytest.raises(DomainError):
        dy.geometric_amplitude_fit(dy.landau_zener_field(0.8, 1.0), [0.2, 0.3, 0.4])


def test_planar_intercept_zero(monkeypatch):
    monkeypatch.setenv("HOLAB_THREADS", "2")
    f = dy.geometric_amplitude_fit(lambda t: np.array([0.6 + 0.1 * np.tanh(t), 0.0, t]), [0.15, 0.2, 0.25, 0.3])
    assert abs(f.intercept) < 0.05 and f.r2 > 0.99


def test_spectrum_peaks_sorted():
    dt = 0.01
    t = np.arange(20000) * dt
    sig = np.cos(3.0 * t) + 0.5 * np.cos(5.0 * t)
    rep = dy.spectrum(sig, dt, n_peaks=2, fmin=0.0)
    assert rep.peaks[0][1] >= rep.peaks[1][1]
    assert rep.peaks[0][0] == pytest.approx(3.0, abs=rep.bin_width)
    assert rep.peaks[1][0] == pytest.approx(5.0, abs=rep.bin_width)


def test_nmr_unmodulated_peak():
    r = dy.nmr_shift_scenario(10.0, 0.0, 20.0, 20)
    assert abs(r["shift"]) < r["bin_width"]


def test_tycko_static_single_line():
    rep = dy.nqr_tycko_scenario(1.0, 0.0, 0.9, n_periods=1, samples_per_period=8192)
    assert rep.peaks[0][0] == pytest.approx(2.0, abs=rep.bin_width)
    assert len([p for p in rep.peaks if p[1] > 0.05 * rep.peaks[0][1]]) == 1
