"""Superadiabatic iteration for a spin-1/2 in a slowly varying field.

Field convention: H = (1/2) B(tau).sigma with tau = eps t, so the
Schrodinger equation reads ``i eps dpsi/dtau = H psi``.  Iteration k goes to
the frame whose z axis follows b_k = B_k/|B_k| with no twist about b_k
(omega_k . b_k = 0); in that frame the field is

    B_{k+1} = |B_k| z - eps * omega_k,

and each stage contributes gamma_k = (1/2) * (signed solid angle of the
B_k loop), the geometric phase of the lower state of stage k.

The late terms shrink like (k! (eps/W)^k)^2 before growing again, so they
reach 1e-20 and below.  Double precision cannot resolve them: roundoff and
the truncated tails of the field seed modes that each iteration amplifies.
The default backend therefore runs the whole iteration in multiprecision
(gmpy2 mpfr/mpc in numpy object arrays) on a periodic FFT grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, NumericalError


# ---------------------------------------------------------------------------
# arithmetic backends


class _FloatBackend:
    name = "float64"

    def __init__(self):
        self.pi = np.pi

    def num(self, x):
        return float(x)

    def grid(self, L, N):
        return -L + (2 * L / N) * np.arange(N)

    sqrt = staticmethod(np.sqrt)
    cos = staticmethod(np.cos)
    sin = staticmethod(np.sin)
    exp = staticmethod(np.exp)
    tanh = staticmethod(np.tanh)

    @staticmethod
    def sech(x):
        return 1.0 / np.cosh(x)

    @staticmethod
    def fft(x):
        return np.fft.fft(x)

    @staticmethod
    def ifft(x):
        return np.fft.ifft(x)

    @staticmethod
    def real(z):
        return np.real(z)

    @staticmethod
    def to_float(x):
        return np.asarray(x, float)


class _MPBackend:
    """Vectorized multiprecision arithmetic with a radix-2 FFT over object arrays."""

    name = "mpfr"

    def __init__(self, bits: int):
        import gmpy2

        self.g = gmpy2
        self.ctx = gmpy2.context(precision=bits)
        self._twiddles: dict[tuple[int, bool], np.ndarray] = {}
        self._bitrev: dict[int, np.ndarray] = {}
        with self._ctx():
            self.pi = gmpy2.const_pi()
        wrap = np.frompyfunc
        self._sqrt = wrap(gmpy2.sqrt, 1, 1)
        self._cos = wrap(gmpy2.cos, 1, 1)
        self._sin = wrap(gmpy2.sin, 1, 1)
        self._exp = wrap(gmpy2.exp, 1, 1)
        self._tanh = wrap(gmpy2.tanh, 1, 1)
        self._sech = wrap(gmpy2.sech, 1, 1)
        self._real = wrap(lambda z: z.real, 1, 1)
        self._float = wrap(float, 1, 1)

    def _ctx(self):
        # a fresh copy per use keeps nested blocks independent
        if hasattr(self.g, "local_context") and self.g.version() < "2.2":
            return self.g.local_context(self.ctx)
        return self.g.context(self.ctx)

    def num(self, x):
        with self._ctx():
            return self.g.mpfr(str(x)) if isinstance(x, float) else self.g.mpfr(x)

    def grid(self, L, N):
        with self._ctx():
            Lm = self.num(L)
            dt = 2 * Lm / N
            return np.array([-Lm + dt * j for j in range(N)], dtype=object)

    def _apply(self, f, x):
        with self._ctx():
            return f(x)

    def sqrt(self, x):
        return self._apply(self._sqrt, x)

    def cos(self, x):
        return self._apply(self._cos, x)

    def sin(self, x):
        return self._apply(self._sin, x)

    def exp(self, x):
        return self._apply(self._exp, x)

    def tanh(self, x):
        return self._apply(self._tanh, x)

    def sech(self, x):
        return self._apply(self._sech, x)

    def real(self, z):
        return self._real(z)

    def to_float(self, x):
        return np.asarray(self._float(x), float)

    def _tables(self, N, inverse):
        if N not in self._bitrev:
            b = N.bit_length() - 1
            self._bitrev[N] = np.array([int(format(i, f"0{b}b")[::-1], 2) for i in range(N)])
        key = (N, inverse)
        if key not in self._twiddles:
            g = self.g
            tw = {}
            with self._ctx():
                sgn = 2 if inverse else -2
                m = 2
                while m <= N:
                    tw[m] = np.array([g.exp(g.mpc(0, sgn) * self.pi * j / m) for j in range(m // 2)], dtype=object)
                    m *= 2
            self._twiddles[key] = tw
        return self._bitrev[N], self._twiddles[key]

    def _fft(self, x, inverse):
        N = len(x)
        if N & (N - 1):
            raise DomainError("multiprecision FFT needs a power-of-two grid")
        br, tw = self._tables(N, inverse)
        with self._ctx():
            a = np.asarray(x, dtype=object)[br]
            m = 2
            while m <= N:
                a = a.reshape(-1, m)
                u = a[:, : m // 2]
                v = a[:, m // 2:] * tw[m]
                a = np.concatenate([u + v, u - v], axis=1).ravel()
                m *= 2
            if inverse:
                a = a / N
        return a

    def fft(self, x):
        return self._fft(x, False)

    def ifft(self, x):
        return self._fft(x, True)


def backend(precision_bits: int | None):
    """float64 arithmetic for None/53, multiprecision otherwise."""
    if precision_bits is None or precision_bits <= 53:
        return _FloatBackend()
    return _MPBackend(int(precision_bits))


# ---------------------------------------------------------------------------
# spectral calculus on a periodic grid


class _Grid:
    def __init__(self, xp, L: float, N: int, cutoff: float | None):
        self.xp = xp
        self.N = N
        self.L = L
        self.tau = xp.grid(L, N)
        ctx = getattr(xp, "_ctx", None)
        if isinstance(xp, _MPBackend):
            with xp._ctx():
                Lm = xp.num(L)
                kap = [2 * xp.pi * (j if j < N // 2 else j - N) / (2 * Lm) for j in range(N)]
                self.kappa = np.array(kap, dtype=object)
                self.ikappa = np.array([xp.g.mpc(0, k) for k in kap], dtype=object)
                if cutoff is None:
                    self.filt = None
                else:
                    kc = xp.num(cutoff)
                    self.filt = np.array([xp.g.exp(-(abs(k) / kc) ** 16) for k in kap], dtype=object)
                self.dt = 2 * Lm / N
        else:
            self.kappa = 2 * np.pi * np.fft.fftfreq(N, 2 * L / N)
            self.ikappa = 1j * self.kappa
            self.filt = None if cutoff is None else np.exp(-(np.abs(self.kappa) / cutoff) ** 16)
            self.dt = 2 * L / N
        del ctx

    def _ctx(self):
        if isinstance(self.xp, _MPBackend):
            return self.xp._ctx()
        import contextlib

        return contextlib.nullcontext()

    def D(self, f):
        xp = self.xp
        with self._ctx():
            F = xp.fft(f) * self.ikappa
            if self.filt is not None:
                F = F * self.filt
            return xp.real(xp.ifft(F))

    def smooth(self, f):
        if self.filt is None:
            return f
        xp = self.xp
        with self._ctx():
            return xp.real(xp.ifft(xp.fft(f) * self.filt))

    def antider(self, g):
        """Antiderivative vanishing at the left end; the mean is integrated as a linear term."""
        xp = self.xp
        with self._ctx():
            m = g.sum() / self.N
            G = xp.fft(g - m)
            k = self.ikappa.copy()
            k[0] = k[0] + 1
            H = G / k
            H[0] = H[0] * 0
            F = xp.real(xp.ifft(H))
            F = F - F[0]
            return F + m * (self.tau - self.tau[0])

    def integral(self, f):
        with self._ctx():
            return f.sum() * self.dt


# ---------------------------------------------------------------------------
# fixtures


def sech_field(a: float = 1.0, b: float = 1.0) -> Callable:
    """B0(tau) = (a sech tau, a sech tau tanh tau, b): a closed excursion from (0, 0, b)."""

    def f(tau, xp):
        s = xp.sech(tau)
        A, B = xp.num(a), xp.num(b)
        return [A * s, A * s * xp.tanh(tau), B + 0 * tau]

    f.asymptote = (0.0, 0.0, b)
    return f


def gaussian_field(a: float = 1.0, b: float = 1.0) -> Callable:
    def f(tau, xp):
        s = xp.exp(-tau * tau)
        A, B = xp.num(a), xp.num(b)
        return [A * s, 2 * A * s * tau, B + 0 * tau]

    f.asymptote = (0.0, 0.0, b)
    return f


FIXTURES = {"sech": sech_field, "gaussian": gaussian_field}


# ---------------------------------------------------------------------------
# iteration


@dataclass
class SuperadiabaticSeries:
    epsilon: float
    tau: np.ndarray
    cycles: list  # float copies of B_k samples, each (3, N)
    terms: list  # gamma_k
    excess: list  # (1/2) int (|B_k| - B_inf) dtau
    min_field: list
    optimal_k: int
    breakdown: str | None = None
    backend: str = "float64"
    asymptote: float = 1.0

    def to_record(self) -> dict:
        return {"epsilon": self.epsilon, "terms": [float(t) for t in self.terms], "optimal_k": self.optimal_k,
                "min_field": [float(m) for m in self.min_field], "breakdown": self.breakdown,
                "backend": self.backend}

    def predicted_phase(self, K: int) -> float:
        """Lower-state phase from truncating after K geometric terms.

        Sum of gamma_0..gamma_{K-1} plus the dynamical phase of the stage-K
        field measured against the asymptotic field: the adiabatic phase of
        the lower level of B_K, which the truncation treats as exact.
        """
        if K < 0 or K >= len(self.terms):
            raise DomainError(f"truncation index {K} outside computed range")
        return float(sum(self.terms[:K])) + self.excess[K] / self.epsilon


def superadiabatic_iterate(field, epsilon: float, k_max: int, L: float = 80.0, N: int = 4096,
                           precision_bits: int | None = 256, cutoff: float | None = 60.0,
                           b_min: float | None = None, keep_cycles: bool = True) -> SuperadiabaticSeries:
    """Iterate rotating frames and record each stage's geometric phase.

    ``field(tau, xp)`` returns the three components of B0 on the grid using
    the backend ``xp`` (see :func:`sech_field`).  The grid is periodic on
    [-L, L), so the field must settle to a constant well inside the window.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    xp = backend(precision_bits)
    g = _Grid(xp, L, N, cutoff)
    with g._ctx():
        B = [np.asarray(c) for c in field(g.tau, xp)]
        eps = xp.num(epsilon)
    B_inf = float(np.linalg.norm(getattr(field, "asymptote", (0.0, 0.0, 1.0))))
    bmin0 = float(xp.to_float(_mag(B, xp, g)).min())
    if bmin0 <= 0:
        raise DomainError("field passes through a degeneracy on the grid")
    floor = 1e-6 * bmin0 if b_min is None else b_min
    terms, excess, mins, cycles = [], [], [], []
    breakdown = None
    for k in range(k_max + 1):
        with g._ctx():
            mag = _mag(B, xp, g)
            mmin = float(xp.to_float(mag).min())
            mins.append(mmin)
            if mmin <= floor:
                breakdown = f"|B_{k}| fell to {mmin:.3e} on the grid"
                mins.pop()
                break
            terms.append(float(_solid(B, mag, g) / 2))
            excess.append(float(g.integral(mag - xp.num(B_inf)) / 2))
            if keep_cycles:
                cycles.append(np.array([xp.to_float(c) for c in B]))
            if k == k_max:
                break
            B = _step(B, mag, eps, g)
    mags = [abs(t) for t in terms]
    kopt = int(np.argmin(mags)) if mags else 0
    return SuperadiabaticSeries(float(epsilon), xp.to_float(g.tau), cycles, terms, excess, mins, kopt, breakdown,
                                xp.name, B_inf)


def _mag(B, xp, g):
    with g._ctx():
        return xp.sqrt(B[0] * B[0] + B[1] * B[1] + B[2] * B[2])


def _solid(B, mag, g):
    """Signed solid angle swept by B/|B| about the +z axis (the open ends sit on the axis)."""
    x, y, z = B
    with g._ctx():
        integrand = (x * g.D(y) - y * g.D(x)) / (mag * (mag + z))
        return g.integral(integrand)


def _step(B, mag, eps, g):
    xp = g.xp
    bx, by, bz = B[0] / mag, B[1] / mag, B[2] / mag
    dbx, dby, dbz = g.D(bx), g.D(by), g.D(bz)
    q = 1 + bz
    # reference frame regular away from the south pole
    f1 = [1 - bx * bx / q, -bx * by / q, -bx]
    f2 = [-bx * by / q, 1 - by * by / q, -by]
    df2 = [-(dbx * by + bx * dby) / q + bx * by * dbz / (q * q),
           -(2 * by * dby) / q + by * by * dbz / (q * q),
           -dby]
    # rotate (f1, f2) about b so the frame does not twist: chi' = f1 . f2'
    chi = g.antider(f1[0] * df2[0] + f1[1] * df2[1] + f1[2] * df2[2])
    c, s = xp.cos(chi), xp.sin(chi)
    e1 = [c * f1[i] + s * f2[i] for i in range(3)]
    e2 = [-s * f1[i] + c * f2[i] for i in range(3)]
    db = [dbx, dby, dbz]
    wx = -(db[0] * e2[0] + db[1] * e2[1] + db[2] * e2[2])
    wy = db[0] * e1[0] + db[1] * e1[1] + db[2] * e1[2]
    return [g.smooth(-eps * wx), g.smooth(-eps * wy), mag]


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class SeriesDiagnostics:
    optimal_k: int
    window: tuple
    order_ratio_slope: float
    order_ratio_intercept: float
    raw_ratio_slope: float
    decreases_then_increases: bool

    def to_record(self) -> dict:
        return {"optimal_k": self.optimal_k, "window": list(self.window),
                "order_ratio_slope": self.order_ratio_slope, "order_ratio_intercept": self.order_ratio_intercept,
                "raw_ratio_slope": self.raw_ratio_slope, "decreases_then_increases": self.decreases_then_increases}


def series_diagnostics(series: SuperadiabaticSeries, window: tuple | None = None) -> SeriesDiagnostics:
    """Optimal index and growth of successive-term ratios.

    Each gamma_k is quadratic in the stage-k transverse field, which is of
    order eps^k, so gamma_k carries eps^(2k).  The ratio per power of eps is
    r_k = sqrt|gamma_{k+1}/gamma_k|; its slope in k is reported as
    ``order_ratio_slope`` next to the slope of the raw ratio.
    """
    t = np.abs(np.asarray(series.terms, float))
    if len(t) < 4:
        raise NumericalError("too few terms for diagnostics")
    kopt = int(np.argmin(t))
    lo, hi = window if window is not None else (max(1, kopt // 2), min(len(t) - 2, kopt + 2))
    ks = np.arange(lo, hi + 1)
    raw = t[ks + 1] / t[ks]
    order = np.sqrt(raw)
    s, c = np.polyfit(ks, order, 1)
    sr, _ = np.polyfit(ks, raw, 1)
    dec = bool(np.all(np.diff(t[: kopt + 1]) < 0) and kopt < len(t) - 1 and np.all(np.diff(t[kopt:]) > 0))
    return SeriesDiagnostics(kopt, (int(lo), int(hi)), float(s), float(c), float(sr), dec)


def exact_lower_phase(field_float: Callable[[float], np.ndarray], epsilon: float, L: float,
                      asymptote: float, steps_per_unit: float = 200.0, tol: float = 1e-11) -> float:
    """Phase of the lower state after exact propagation over [-L, L].

    Propagates i eps dpsi/dtau = ((1/2) B.sigma + (1/2) B_inf) psi so that the
    asymptotic dynamical phase is removed, starting and ending in the lower
    eigenstate of the (identical) asymptotic field.
    """
    from .dynamics import field_hamiltonian, propagate_hamiltonian

    Binf = np.asarray(field_float(-L), float)
    w, U = np.linalg.eigh(field_hamiltonian(Binf))
    lower = U[:, 0]

    def H(t):
        return (field_hamiltonian(np.asarray(field_float(t), float)) + 0.5 * asymptote * np.eye(2)) / epsilon

    tr = propagate_hamiltonian(H, -L, L, lower, int(2 * L * steps_per_unit), tol, "magnus4")
    return float(np.angle(np.vdot(lower, tr.final)))
