"""Time-dependent Schrodinger propagation and the phases extracted from it.

Units: hbar = 1.  A :class:`Schedule` carries a parameter path over [0, T];
``propagate`` steps the state with exact small-matrix exponentials of the
Hamiltonian at the step midpoint (or a fourth-order Magnus step), halving the
step until the final state stops changing.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .abelian import berry_phase_loop, wrap
from .errors import AccuracyError, DomainError, NumericalError, UndefinedPhaseError
from .spectral import SIGMA, HamiltonianFamily, ParameterLoop, eigendecompose, require_nondegenerate

NORM_TOL = 1e-9


@dataclass(frozen=True)
class Schedule:
    path: Callable[[float], np.ndarray]
    T: float
    epsilon: float = float("nan")
    n_steps: int = 1000

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError("schedule duration must be positive")
        if self.n_steps < 1:
            raise DomainError("need at least one step")

    @classmethod
    def from_loop(cls, func: Callable[[float], Sequence[float]], epsilon: float, n_steps: int = 1000) -> "Schedule":
        """Slow traversal of a cycle s in [0,1] -> R with duration T = 1/epsilon."""
        T = 1.0 / epsilon
        return cls(lambda t: np.asarray(func(t / T), float), T, epsilon, n_steps)

    def reparameterized(self, warp: Callable[[float], float]) -> "Schedule":
        """Same path, new clock: warp is a monotone map [0,1] -> [0,1]."""
        T = self.T
        return Schedule(lambda t: self.path(T * warp(t / T)), T, self.epsilon, self.n_steps)


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim)
    norms: np.ndarray
    steps: int = 0
    halvings: int = 0

    def __post_init__(self):
        drift = float(np.abs(self.norms - 1.0).max())
        if drift > NORM_TOL:
            raise NumericalError(f"norm drift {drift:.2e} exceeds {NORM_TOL}")

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class PhaseDecomposition:
    total: float
    dynamical: float
    geometric: float
    open_path: bool

    def to_record(self) -> dict:
        return {"total": self.total, "dynamical": self.dynamical, "geometric": self.geometric,
                "open_path": self.open_path}


# ---------------------------------------------------------------------------
# propagation


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HOLAB_THREADS", "1")))
    except ValueError:
        return 1


def _stack_H(H: Callable[[float], np.ndarray], ts: np.ndarray) -> np.ndarray:
    return np.array([H(t) for t in ts])


def _expm_herm(Hs: np.ndarray, dt) -> np.ndarray:
    """exp(-i H dt) for a stack of Hermitian matrices (dt scalar or per-matrix)."""
    w, v = np.linalg.eigh(Hs)
    ph = np.exp(-1j * w * np.reshape(dt, (-1, 1)))
    return np.einsum("nij,nj,nkj->nik", v, ph, v.conj())


def _step_unitaries(H, t0: float, t1: float, n: int, method: str) -> tuple[np.ndarray, np.ndarray]:
    ts = np.linspace(t0, t1, n + 1)
    dt = (t1 - t0) / n
    if method == "midpoint":
        Hs = _stack_H(H, 0.5 * (ts[:-1] + ts[1:]))
        return ts, _expm_herm(Hs, dt)
    if method == "magnus4":
        c = np.sqrt(3) / 6
        H1 = _stack_H(H, ts[:-1] + (0.5 - c) * dt)
        H2 = _stack_H(H, ts[:-1] + (0.5 + c) * dt)
        # Omega = -i dt (H1+H2)/2 - (sqrt3/12) dt^2 [H2, H1]  ->  exp(Omega) = exp(-i K dt)
        comm = np.einsum("nij,njk->nik", H2, H1) - np.einsum("nij,njk->nik", H1, H2)
        K = 0.5 * (H1 + H2) - 1j * (np.sqrt(3) / 12) * dt * comm
        K = 0.5 * (K + np.conj(np.swapaxes(K, 1, 2)))
        return ts, _expm_herm(K, dt)
    raise DomainError(f"unknown integrator {method!r}")


def _run(Us: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    out = np.empty((len(Us) + 1, len(psi0)), dtype=complex)
    out[0] = psi0
    psi = psi0
    for k, U in enumerate(Us):
        psi = U @ psi
        out[k + 1] = psi
    return out


def propagate_hamiltonian(H: Callable[[float], np.ndarray], t0: float, t1: float, psi0, n_steps: int = 1000,
                          tol: float = 1e-8, method: str = "midpoint", max_halvings: int = 12,
                          adaptive: bool = True) -> TrajectoryRecord:
    """Propagate i dpsi/dt = H(t) psi from t0 to t1.

    The step count is doubled until the final state changes by less than
    ``tol``; the record holds the finest grid.
    """
    psi0 = np.asarray(psi0, complex)
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1) > 1e-10:
        raise DomainError(f"initial state not normalized (|psi|={nrm:.12f})")
    n = n_steps
    ts, Us = _step_unitaries(H, t0, t1, n, method)
    states = _run(Us, psi0)
    halvings = 0
    if adaptive:
        while True:
            if halvings >= max_halvings:
                raise NumericalError(f"step-size underflow: not converged after {halvings} halvings")
            n *= 2
            ts2, Us2 = _step_unitaries(H, t0, t1, n, method)
            st2 = _run(Us2, psi0)
            halvings += 1
            change = float(np.linalg.norm(st2[-1] - states[-1]))
            ts, states = ts2, st2
            if change < tol:
                break
    norms = np.linalg.norm(states, axis=1)
    return TrajectoryRecord(ts, states, norms, n, halvings)


def propagate(family: HamiltonianFamily, schedule: Schedule, psi0, tol: float = 1e-8, method: str = "midpoint",
              adaptive: bool = True) -> TrajectoryRecord:
    """Propagate a state along a schedule of a Hamiltonian family."""
    psi0 = np.asarray(psi0, complex)
    if psi0.shape != (family.dim,):
        raise DomainError(f"state has shape {psi0.shape}, family dimension is {family.dim}")

    def H(t):
        return family.evaluate(schedule.path(t))

    return propagate_hamiltonian(H, 0.0, schedule.T, psi0, schedule.n_steps, tol, method, adaptive=adaptive)


# ---------------------------------------------------------------------------
# Aharonov-Anandan decomposition


def aa_phase(traj: TrajectoryRecord, closed: bool = True) -> PhaseDecomposition:
    """beta = arg<psi(0)|psi(T)>, beta_d = Im int <psi|dpsi>, beta_g = beta - beta_d.

    The dynamical part is accumulated as sum_k arg<psi_k|psi_{k+1}>, the
    discrete form of Im int <psi|psi_dot> dt; it makes beta_g exactly
    invariant under a phase redecoration of the stored states.
    """
    S = traj.states
    ov_end = np.vdot(S[0], S[-1])
    if closed and abs(ov_end) < 1e-6:
        raise UndefinedPhaseError(f"endpoint overlap {abs(ov_end):.2e}: closed-path phase undefined")
    links = np.einsum("ij,ij->i", S[:-1].conj(), S[1:])
    if np.any(np.abs(links) < 1e-8):
        raise NumericalError("consecutive stored states nearly orthogonal; grid too coarse")
    beta = float(np.angle(ov_end)) if abs(ov_end) > 0 else 0.0
    beta_d = float(np.sum(np.angle(links)))
    return PhaseDecomposition(beta, beta_d, wrap(beta - beta_d), not closed)


def dynamical_phase_expectation(traj: TrajectoryRecord, H: Callable[[float], np.ndarray]) -> float:
    """-int <psi|H|psi> dt by the trapezoid rule (equals beta_d for exact solutions)."""
    e = np.array([np.real(np.vdot(s, H(t) @ s)) for t, s in zip(traj.times, traj.states)])
    trap = getattr(np, "trapezoid", None) or np.trapz
    return -float(trap(e, traj.times))


def adiabatic_error_scan(family: HamiltonianFamily, cycle: Callable[[float], Sequence[float]], n: int,
                         epsilons: Sequence[float], tol: float = 1e-8, steps_per_unit: float = 40.0,
                         method: str = "magnus4") -> list[dict]:
    """Leakage and geometric-phase error of slow cycles, one row per epsilon."""
    R0 = np.asarray(cycle(0.0), float)
    es0 = eigendecompose(family, R0)
    require_nondegenerate(es0, n)
    loop = ParameterLoop.from_function(cycle, 256)
    gamma = berry_phase_loop(family, n, loop, tol=1e-7, max_refinements=12).phase
    rows = []
    for eps in epsilons:
        sch = Schedule.from_loop(cycle, eps, max(64, int(steps_per_unit / eps)))
        tr = propagate(family, sch, es0.state(n), tol=tol, method=method)
        esT = eigendecompose(family, np.asarray(cycle(1.0), float))
        leak = 1.0 - abs(np.vdot(esT.state(n), tr.final)) ** 2
        dec = aa_phase(tr)
        rows.append({"epsilon": float(eps), "leakage": float(max(leak, 0.0)), "beta_g": dec.geometric,
                     "gamma": gamma, "phase_error": abs(wrap(dec.geometric - gamma))})
    return rows


def extrapolate_zero(xs: Sequence[float], ys: Sequence[float], degree: int = 1) -> float:
    """Polynomial extrapolation of ys(x) to x = 0 by least squares."""
    c = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), degree)
    return float(c[-1])


# ---------------------------------------------------------------------------
# geometric amplitude


def field_hamiltonian(B: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("i,ijk->jk", B, SIGMA)


def _spin_state(v: np.ndarray, upper: bool) -> np.ndarray:
    w, U = np.linalg.eigh(field_hamiltonian(v))
    return U[:, 1 if upper else 0]


def _taylor(field: Callable, t0: float, order: int, radius: float = 0.5, M: int = 64) -> np.ndarray:
    """Taylor coefficients of an analytic vector field at t0 by a Cauchy integral in complex time."""
    z = t0 + radius * np.exp(2j * np.pi * np.arange(M) / M)
    vals = np.array([np.asarray(field(zz), complex) for zz in z])
    c = np.fft.fft(vals, axis=0) / M
    scale = radius ** np.arange(order + 1)
    return (c[: order + 1].real.T / scale).T


# truncated power series ("jets"): arrays of Taylor coefficients, leading axis = order

def _jscale(s, v):
    """Product of a scalar jet and a vector jet."""
    return np.array([sum(s[j] * v[n - j] for j in range(n + 1)) for n in range(len(s))])


def _jdot(a, b):
    return np.array([sum(a[j] @ b[n - j] for j in range(n + 1)) for n in range(a.shape[0])])


def _jcross(a, b):
    return np.array([sum(np.cross(a[j], b[n - j]) for j in range(n + 1)) for n in range(a.shape[0])])


def _jsqrt(a):
    s = np.zeros_like(a)
    s[0] = np.sqrt(a[0])
    for n in range(1, len(a)):
        s[n] = (a[n] - sum(s[j] * s[n - j] for j in range(1, n))) / (2 * s[0])
    return s


def _jrecip(a):
    r = np.zeros_like(a)
    r[0] = 1 / a[0]
    for n in range(1, len(a)):
        r[n] = -sum(a[j] * r[n - j] for j in range(1, n + 1)) / a[0]
    return r


def _jderiv(a):
    out = np.zeros_like(a)
    k = np.arange(1, len(a)).reshape((-1,) + (1,) * (a.ndim - 1))
    out[:-1] = k * a[1:]
    return out


def superadiabatic_vectors(field: Callable, tau: float, eps: float, order: int = 4,
                           radius: float = 0.5) -> list[np.ndarray]:
    """Effective fields B_0 .. B_order at ``tau``, all in lab coordinates.

    Stage k+1 is |B_k| b_k - eps W_k with W_k = b_k x D_k b_k, where D_k is
    the time derivative seen in the frame of stage k (dv/dtau minus the
    accumulated frame angular velocity crossed with v).  The spin state
    along B_k is the order-k superadiabatic state.  Derivatives are carried
    exactly as truncated Taylor series of the (analytic) field.
    """
    B = _taylor(field, tau, 2 * order + 2, radius)
    Om = np.zeros_like(B)
    out = [B[0].copy()]
    for _ in range(order):
        m = _jsqrt(_jdot(B, B))
        b = _jscale(_jrecip(m), B)
        db = _jderiv(b) - _jcross(Om, b)
        W = _jcross(b, db)
        B = _jscale(m, b) - eps * W
        Om = Om + W
        out.append(B[0].copy())
    return out


@dataclass(frozen=True)
class AmplitudeFit:
    epsilons: np.ndarray
    logP: np.ndarray
    slope: float
    intercept: float
    r2: float
    gamma_estimate: float

    def to_record(self) -> dict:
        return {"epsilons": self.epsilons.tolist(), "logP": self.logP.tolist(), "slope": self.slope,
                "intercept": self.intercept, "r2": self.r2, "gamma_estimate": self.gamma_estimate}


def transition_probability(field: Callable[[float], np.ndarray], eps: float, tau_max: float,
                           steps_per_unit: float = 100.0, tol: float = 1e-9, order: int = 4) -> float:
    """P(+ -> -) for i eps dpsi/dtau = (1/2) R(tau).sigma psi over [-tau_max, tau_max].

    Initial and final states are taken in the superadiabatic basis of the
    given order.  Fields whose direction keeps turning at the horizon (the
    helix) couple the adiabatic levels with a strength decaying only like
    1/tau, so the plain adiabatic basis would leave a large ripple in P.
    """
    psi0 = _spin_state(superadiabatic_vectors(field, -tau_max, eps, order)[-1], upper=True)

    def H(t):
        return field_hamiltonian(np.asarray(field(t), float)) / eps

    n = int(2 * tau_max * steps_per_unit)
    tr = propagate_hamiltonian(H, -tau_max, tau_max, psi0, n, tol, "magnus4")
    lower = _spin_state(superadiabatic_vectors(field, tau_max, eps, order)[-1], upper=False)
    return float(abs(np.vdot(lower, tr.final)) ** 2)


AMPLITUDE_CALIBRATION = np.pi


def geometric_amplitude_fit(field: Callable[[float], np.ndarray], epsilons: Sequence[float], tau_max: float = 8.0,
                            steps_per_unit: float = 100.0, tol: float = 1e-9, order: int = 4) -> AmplitudeFit:
    """Least-squares fit ln P = intercept + slope / eps.

    ``gamma_estimate`` is intercept / AMPLITUDE_CALIBRATION.  The constant is
    fixed by the helix, which maps exactly onto a Landau-Zener sweep of
    slope A - 2 eps omega in the frame co-rotating with the field azimuth:
    ln P = -pi a^2 / (2 eps |A - 2 eps omega|), whose 1/eps expansion has the
    constant term -pi a^2 omega sgn(A) / A^2, i.e. pi times the closed-form
    exponent of :func:`helix_gamma`.
    """
    eps = np.asarray(epsilons, float)
    if len(eps) < 4:
        raise DomainError("need at least four epsilon values")
    def one(e):
        return transition_probability(field, e, tau_max, steps_per_unit, tol, order)

    nt = _threads()
    if nt > 1:
        with ThreadPoolExecutor(max_workers=nt) as pool:
            P = np.array(list(pool.map(one, eps)))
    else:
        P = np.array([one(e) for e in eps])
    if np.any(P < 1e-14):
        raise AccuracyError(f"transition probability {P.min():.2e} below 1e-14; use larger epsilon")
    y = np.log(P)
    x = 1.0 / eps
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    return AmplitudeFit(eps, y, float(slope), float(intercept), r2, float(intercept) / AMPLITUDE_CALIBRATION)


def helix_field(a: float, omega: float, A: float) -> Callable[[float], np.ndarray]:
    return lambda t: np.array([a * np.cos(omega * t * t), a * np.sin(omega * t * t), A * t])


def helix_gamma(a: float, omega: float, A: float) -> float:
    """Closed-form geometric amplitude exponent of the helix schedule."""
    return -a * a * omega * np.sign(A) / A**2


def helix_probability_exact(a: float, omega: float, A: float, eps: float) -> float:
    """Infinite-time transition probability of the helix from the co-rotating Landau-Zener map."""
    return float(np.exp(-np.pi * a * a / (2 * eps * abs(A - 2 * eps * omega))))


def landau_zener_field(a: float, A: float) -> Callable[[float], np.ndarray]:
    return lambda t: np.array([a, a, A * t])


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectrumReport:
    frequencies: np.ndarray
    magnitude: np.ndarray
    peaks: list  # (frequency, height), descending by height
    bin_width: float
    warnings: tuple = ()

    def to_record(self) -> dict:
        return {"peaks": [[float(f), float(h)] for f, h in self.peaks], "bin_width": self.bin_width,
                "warnings": list(self.warnings)}


def spectrum(signal: np.ndarray, dt: float, n_peaks: int = 5, fmin: float | None = None,
             fmax: float | None = None, rel_height: float = 0.05, pad: int = 1) -> SpectrumReport:
    """Hann-windowed magnitude spectrum (angular frequency) with 3-bin quadratic peak interpolation."""
    x = np.asarray(signal)
    x = x - x.mean()
    w = np.hanning(len(x))
    nfft = len(x) * pad
    F = np.fft.fft(x * w, nfft)
    freqs = 2 * np.pi * np.fft.fftfreq(nfft, dt)
    order = np.argsort(freqs)
    freqs, mag = freqs[order], np.abs(F[order])
    bw = 2 * np.pi / (len(x) * dt)
    sel = np.ones(len(freqs), bool)
    if fmin is not None:
        sel &= freqs >= fmin
    if fmax is not None:
        sel &= freqs <= fmax
    idx = np.flatnonzero(sel)
    peaks = []
    top = mag[idx].max() if len(idx) else 0.0
    for i in idx:
        if 0 < i < len(mag) - 1 and mag[i] >= mag[i - 1] and mag[i] > mag[i + 1] and mag[i] >= rel_height * top:
            a, b, c = np.log(mag[i - 1] + 1e-300), np.log(mag[i] + 1e-300), np.log(mag[i + 1] + 1e-300)
            den = a - 2 * b + c
            d = 0.5 * (a - c) / den if den != 0 else 0.0
            df = freqs[i + 1] - freqs[i]
            peaks.append((float(freqs[i] + d * df), float(np.exp(b - 0.25 * (a - c) * d))))
    peaks.sort(key=lambda p: -p[1])
    return SpectrumReport(freqs, mag, peaks[:n_peaks], float(bw))


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * K @ K


def cone_field(omega_rot: float, theta: float, T: float, clockwise: bool = True) -> Callable[[float], np.ndarray]:
    """Field of constant magnitude whose direction circles a cone of half-angle theta with period T."""
    s = -1.0 if clockwise else 1.0

    def B(t):
        ph = s * 2 * np.pi * t / T
        return omega_rot * np.array([np.sin(theta) * np.cos(ph), np.sin(theta) * np.sin(ph), np.cos(theta)])

    return B


def nmr_shift_scenario(omega_rot: float, theta: float, T: float, cycles: int = 40, samples_per_cycle: int = 512,
                       clockwise: bool = True) -> dict:
    """Spectrum of <sigma_x> for a spin-1/2 whose rotating-frame field circles a cone.

    Returns the measured precession peak, the predicted shift -alpha/T with
    alpha the solid angle of the field cycle (positive for the clockwise
    sense seen from +z, the orientation used for the shift law), and the
    spectrum report.
    """
    if T * omega_rot < 10 * 2 * np.pi:
        warn = ("modulation period not long compared with the precession period",)
    else:
        warn = ()
    B = cone_field(omega_rot, theta, T, clockwise)
    H = lambda t: field_hamiltonian(B(t))  # noqa: E731
    # start in an equal superposition of the instantaneous levels
    w, U = np.linalg.eigh(H(0.0))
    psi0 = (U[:, 0] + U[:, 1]) / np.sqrt(2)
    n = cycles * samples_per_cycle
    ts, Us = _step_unitaries(H, 0.0, cycles * T, n, "magnus4")
    st = _run(Us, psi0)
    sx = np.real(np.einsum("ni,ij,nj->n", st.conj(), SIGMA[0], st))
    dt = ts[1] - ts[0]
    rep = spectrum(sx, dt, n_peaks=6, fmin=0.0)
    sgn = 1.0 if clockwise else -1.0
    alpha = sgn * 2 * np.pi * (1 - np.cos(theta))
    main = max((p for p in rep.peaks if abs(p[0] - omega_rot) < 0.5 * omega_rot), key=lambda p: p[1])
    return {"omega_rot": omega_rot, "peak": main[0], "shift": main[0] - omega_rot, "predicted_shift": -alpha / T,
            "alpha": alpha, "bin_width": rep.bin_width, "spectrum": SpectrumReport(rep.frequencies, rep.magnitude,
                                                                                   rep.peaks, rep.bin_width, warn)}


def _quad_matrix(n: np.ndarray, omega_q: float) -> np.ndarray:
    from .spectral import spin_matrices

    S = spin_matrices(1.5)
    Sn = np.einsum("i,ijk->jk", n, S)
    return omega_q * (Sn @ Sn - 1.25 * np.eye(4))


def nqr_tycko_scenario(omega_q: float, omega_r: float, tilt: float, n_periods: int = 24, samples_per_period: int = 256,
                       axis_tilt: float | None = None, observable: str = "z", pad: int = 1) -> SpectrumReport:
    """Magnetic-moment spectrum of a spin-3/2 quadrupole whose axis rotates at omega_r.

    The quadrupole axis n makes angle ``tilt`` with the rotation axis, which
    is itself inclined by ``axis_tilt`` (default 0) from the z axis along
    which the moment is recorded.  The initial state is a coherent
    superposition of the m = 3/2 and m = 1/2 levels along n(0).
    """
    from .spectral import spin_matrices

    S = spin_matrices(1.5)
    ax = np.array([np.sin(axis_tilt or 0.0), 0.0, np.cos(axis_tilt or 0.0)])
    perp = np.cross(ax, [0.0, 1.0, 0.0])
    if np.linalg.norm(perp) < 1e-12:
        perp = np.array([1.0, 0.0, 0.0])
    perp /= np.linalg.norm(perp)
    n0 = np.cos(tilt) * ax + np.sin(tilt) * perp

    def n_at(t):
        return _rot(ax, omega_r * t) @ n0

    H = lambda t: _quad_matrix(n_at(t), omega_q)  # noqa: E731
    Sn = np.einsum("i,ijk->jk", n0, S)
    w, V = np.linalg.eigh(Sn)
    # V columns ascend in m: -3/2, -1/2, 1/2, 3/2
    psi0 = (V[:, 3] + V[:, 2] + V[:, 1] + V[:, 0]) / 2.0
    Tr = 2 * np.pi / omega_r if omega_r > 0 else 2 * np.pi / (0.05 * omega_q)
    total = n_periods * Tr
    n = int(n_periods * samples_per_period)
    ts, Us = _step_unitaries(H, 0.0, total, n, "magnus4")
    st = _run(Us, psi0)
    comp = {"x": 0, "y": 1, "z": 2}[observable]
    m = np.real(np.einsum("ni,ij,nj->n", st.conj(), S[comp], st))
    warn = () if omega_r < 0.1 * omega_q else ("rotation not slow compared with the quadrupole frequency",)
    rep = spectrum(m, ts[1] - ts[0], n_peaks=8, fmin=0.5 * omega_q, fmax=3.5 * omega_q, rel_height=0.02, pad=pad)
    return SpectrumReport(rep.frequencies, rep.magnitude, rep.peaks, rep.bin_width, warn)
