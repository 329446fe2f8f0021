"""Classical geometric phases.

Hannay angles of slowly cycled integrable systems, the bead on a rotating
loop, the Foucault pendulum, the rigid-body reconstruction phase, zero
angular momentum reorientation by shape change, and parallel transport of a
tangent vector along a path of directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .abelian import solid_angle_of_loop, wrap
from .errors import (
    AdiabaticityError,
    ChartError,
    DomainError,
    GeometryError,
    NumericalError,
    PeriodDetectionError,
    SingularityError,
)

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])  # z_dot = J2 grad H for z = (q, p)


# ---------------------------------------------------------------------------
# one-degree-of-freedom systems


@dataclass(frozen=True)
class OneDofSystem:
    """H(q, p, R).  ``quadratic`` returns M(R) when H = z.M(R).z / 2 exactly."""

    name: str
    hamiltonian: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    quadratic: Callable[[np.ndarray], np.ndarray] | None = None
    equilibrium: Callable[[np.ndarray], tuple] = lambda R: (0.0, 0.0)
    time_reversal: bool = False

    def energy(self, q, p, R):
        return self.hamiltonian(np.asarray(q, float), np.asarray(p, float), np.asarray(R, float))

    def gradient(self, q, p, R, h: float = 1e-6):
        if self.quadratic is not None:
            return self.quadratic(np.asarray(R, float)) @ np.array([q, p])
        Hq = (self.energy(q + h, p, R) - self.energy(q - h, p, R)) / (2 * h)
        Hp = (self.energy(q, p + h, R) - self.energy(q, p - h, R)) / (2 * h)
        return np.array([Hq, Hp])

    def frequency(self, R, I: float | None = None) -> float:
        if self.quadratic is not None:
            d = np.linalg.det(self.quadratic(np.asarray(R, float)))
            if d <= 0:
                raise DomainError("orbit unbounded: quadratic form not positive definite")
            return float(np.sqrt(d))
        if I is None:
            raise DomainError("frequency of a non-quadratic system needs the action")
        h = 1e-5 * max(I, 1e-8)
        E1 = energy_at_action(self, I - h, R)
        E2 = energy_at_action(self, I + h, R)
        return (E2 - E1) / (2 * h)


def generalized_oscillator() -> OneDofSystem:
    """H = (Z+X) q^2/2 + Y q p + (Z-X) p^2/2; bounded for X^2 + Y^2 < Z^2, Z > 0.

    Frequency sqrt(Z^2 - X^2 - Y^2).
    """
    def M(R):
        X, Y, Z = R
        return np.array([[Z + X, Y], [Y, Z - X]], float)

    def H(q, p, R):
        X, Y, Z = R
        return 0.5 * (Z + X) * q * q + Y * q * p + 0.5 * (Z - X) * p * p

    return OneDofSystem("generalized-oscillator", H, M)


def harmonic_oscillator(omega: float = 1.0) -> OneDofSystem:
    def H(q, p, R):
        return 0.5 * p * p + 0.5 * omega**2 * q * q

    return OneDofSystem("harmonic", H, lambda R: np.diag([omega**2, 1.0]), time_reversal=True)


def quartic_oscillator() -> OneDofSystem:
    """H = p^2/2 + R0 q^2/2 + R1 q^4/4 (non-quadratic test system)."""
    def H(q, p, R):
        return 0.5 * p * p + 0.5 * R[0] * q * q + 0.25 * R[1] * q**4

    return OneDofSystem("quartic", H, None, time_reversal=True)


def _ray_radius(system, E, R, c, s, q0, p0, r_max=1e6):
    f = lambda r: float(system.energy(q0 + r * c, p0 + r * s, R)) - E  # noqa: E731
    lo, hi = 0.0, 1e-3
    while f(hi) < 0:
        lo, hi = hi, hi * 2
        if hi > r_max:
            raise DomainError(f"orbit at energy {E} is unbounded in direction ({c:.3f}, {s:.3f})")
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-14)


def action(system: OneDofSystem, E: float, R, tol: float = 1e-8, n0: int = 32, max_n: int = 1 << 14) -> float:
    """(1/2 pi) x phase-plane area inside H = E, by ray tracing from the equilibrium.

    The region must be star-shaped about the equilibrium (true for the
    convex orbits used here).  Rays are doubled until the relative change is
    below ``tol``.
    """
    R = np.asarray(R, float)
    q0, p0 = system.equilibrium(R)
    if E <= float(system.energy(q0, p0, R)):
        raise DomainError("energy at or below the equilibrium value")

    def area(n):
        phi = 2 * np.pi * np.arange(n) / n
        r = np.array([_ray_radius(system, E, R, np.cos(a), np.sin(a), q0, p0) for a in phi])
        # polar form of the enclosed area; periodic trapezoid, spectrally accurate
        return 0.5 * float(np.sum(r * r)) * (2 * np.pi / n)

    n = n0
    prev = area(n)
    while n < max_n:
        n *= 2
        cur = area(n)
        if abs(cur - prev) <= tol * abs(cur):
            return cur / (2 * np.pi)
        prev = cur
    raise NumericalError(f"action not converged to {tol}")


def energy_at_action(system: OneDofSystem, I: float, R) -> float:
    R = np.asarray(R, float)
    if system.quadratic is not None:
        return I * system.frequency(R)
    q0, p0 = system.equilibrium(R)
    e0 = float(system.energy(q0, p0, R))
    hi = e0 + 1.0
    while action(system, hi, R) < I:
        hi = e0 + 2 * (hi - e0)
    return brentq(lambda E: action(system, E, R) - I, e0 + 1e-14, hi, xtol=1e-14, rtol=1e-12)


# ---------------------------------------------------------------------------
# action-angle chart


def _quad_chart(M: np.ndarray, I: float, theta: np.ndarray) -> np.ndarray:
    """Points (q, p) at angles theta on the orbit of action I; theta = 0 on the +q axis."""
    w = np.sqrt(np.linalg.det(M))
    E = I * w
    z0 = np.array([np.sqrt(2 * E / M[0, 0]), 0.0])
    A = J2 @ M
    # exp(A t) for a 2x2 matrix with A^2 = -w^2
    t = np.asarray(theta, float) / w
    c, s = np.cos(w * t), np.sin(w * t)
    Az0 = A @ z0
    return (c[:, None] * z0[None, :] + (s / w)[:, None] * Az0[None, :])


def chart_points(system: OneDofSystem, I: float, R, theta: np.ndarray) -> np.ndarray:
    """(q, p) on the torus of action I at parameters R, for each angle in theta.

    The angle is 2 pi x (orbit time since the reference point) / period, the
    reference point being where the orbit crosses p = p_eq with q > q_eq.
    """
    R = np.asarray(R, float)
    if system.quadratic is not None:
        return _quad_chart(system.quadratic(R), I, theta)
    E = energy_at_action(system, I, R)
    q0, p0 = system.equilibrium(R)
    r = _ray_radius(system, E, R, 1.0, 0.0, q0, p0)
    start = np.array([q0 + r, p0])
    period = _orbit_period(system, R, start)

    def rhs(t, z):
        return J2 @ system.gradient(z[0], z[1], R)

    ts = np.asarray(theta, float) * period / (2 * np.pi)
    sol = solve_ivp(rhs, (0, max(ts.max(), 1e-12)), start, method="DOP853", t_eval=np.sort(ts), rtol=1e-12,
                    atol=1e-12)
    order = np.argsort(np.argsort(ts))
    return sol.y.T[order]


def _orbit_period(system, R, start):
    q0, p0 = system.equilibrium(R)

    def rhs(t, z):
        return J2 @ system.gradient(z[0], z[1], R)

    def sec(t, z):
        return z[1] - p0

    sec.direction = 1.0  # p increasing through p_eq happens on the q < q_eq side; use the return instead
    ev = lambda t, z: (z[1] - p0) if t > 0 else 1.0  # noqa: E731
    ev.direction = -1.0
    # crossing p = p_eq from above with q > q_eq closes the orbit
    def closing(t, z):
        return z[1] - p0

    closing.direction = 1.0
    sol = solve_ivp(rhs, (0, 1e4), start, method="DOP853", events=closing, rtol=1e-12, atol=1e-12,
                    dense_output=True)
    hits = [t for t, y in zip(sol.t_events[0], sol.y_events[0]) if y[0] > q0 and t > 1e-9]
    if not hits:
        raise ChartError("orbit did not close within the horizon")
    return float(hits[0])


def chart_angle(system: OneDofSystem, q: float, p: float, R) -> tuple[float, float]:
    """(theta, I) of a phase point in the instantaneous chart at R."""
    R = np.asarray(R, float)
    if system.quadratic is not None:
        M = system.quadratic(R)
        w = np.sqrt(np.linalg.det(M))
        z = np.array([q, p])
        I = 0.5 * z @ M @ z / w
        # orbit-time from the reference point: invert z = cos(wt) z0 + sin(wt)/w A z0
        z0 = np.array([np.sqrt(2 * I * w / M[0, 0]), 0.0])
        B = np.column_stack([z0, (J2 @ M @ z0) / w])
        cs = np.linalg.solve(B, z)
        return float(np.mod(np.arctan2(cs[1], cs[0]), 2 * np.pi)), float(I)
    E = float(system.energy(q, p, R))
    I = action(system, E, R)
    q0, p0 = system.equilibrium(R)
    start = np.array([q0 + _ray_radius(system, E, R, 1.0, 0.0, q0, p0), p0])
    period = _orbit_period(system, R, start)

    def rhs(t, z):
        return J2 @ system.gradient(z[0], z[1], R)

    def closing(t, z):
        return z[1] - p0

    closing.direction = 1.0
    sol = solve_ivp(rhs, (0, 2 * period), [q, p], method="DOP853", events=closing, rtol=1e-12, atol=1e-12)
    hits = [t for t, y in zip(sol.t_events[0], sol.y_events[0]) if y[0] > q0 and t > 1e-12]
    if not hits:
        raise ChartError("could not locate the reference section")
    return float(np.mod(2 * np.pi * (1 - hits[0] / period), 2 * np.pi)), float(I)


# ---------------------------------------------------------------------------
# Hannay connection and curvature


@dataclass(frozen=True)
class HannayResult:
    angle: float
    unwrapped: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def hannay_vector_potential(system: OneDofSystem, I: float, R, step: float = 1e-5, n_theta: int = 64) -> np.ndarray:
    """A(I, R) = (1/2 pi) oint p grad_R q dtheta at fixed (theta, I)."""
    R = np.asarray(R, float)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = chart_points(system, I, R, th)
    A = np.zeros(len(R))
    for a in range(len(R)):
        e = np.zeros(len(R))
        e[a] = step
        dq = (chart_points(system, I, R + e, th)[:, 0] - chart_points(system, I, R - e, th)[:, 0]) / (2 * step)
        A[a] = np.mean(z[:, 1] * dq)
    return A


def hannay_curvature(system: OneDofSystem, I: float, R, step: float = 1e-4) -> np.ndarray:
    """V = curl_R A(I, R) by central differences."""
    R = np.asarray(R, float)
    J = np.zeros((3, 3))
    for a in range(3):
        e = np.zeros(3)
        e[a] = step
        J[a] = (hannay_vector_potential(system, I, R + e, step * 0.1) -
                hannay_vector_potential(system, I, R - e, step * 0.1)) / (2 * step)
    return np.array([J[1, 2] - J[2, 1], J[2, 0] - J[0, 2], J[0, 1] - J[1, 0]])


def oscillator_curvature(I: float, R) -> np.ndarray:
    """Closed form for the generalized oscillator: V = -(I/2) R / (Z^2 - X^2 - Y^2)^{3/2}."""
    X, Y, Z = R
    return -0.5 * I * np.asarray(R, float) / (Z * Z - X * X - Y * Y) ** 1.5


def _loop_integral(system, I, cycle, n_loop):
    s = np.arange(n_loop) / n_loop
    pts = np.array([np.asarray(cycle(x), float) for x in s])
    h = 1e-5
    tang = np.array([(np.asarray(cycle(x + h), float) - np.asarray(cycle(x - h), float)) / (2 * h) for x in s])
    vals = [hannay_vector_potential(system, I, p) @ t for p, t in zip(pts, tang)]
    return float(np.mean(vals))


def hannay_connection(system: OneDofSystem, I: float, cycle: Callable[[float], Sequence[float]],
                      n_loop: int = 128, rel_step: float = 1e-3) -> HannayResult:
    """theta_g = -d/dI oint A(I, R).dR (central difference in I)."""
    dI = rel_step * I
    try:
        lp = _loop_integral(system, I + dI, cycle, n_loop)
        lm = _loop_integral(system, I - dI, cycle, n_loop)
    except (DomainError, NumericalError) as exc:
        raise ChartError(f"action-angle chart failed along the cycle: {exc}") from exc
    val = -(lp - lm) / (2 * dI)
    return HannayResult(wrap(val), val, "connection-integral", {"n_loop": n_loop})


def oscillator_hannay_angle_cone(Z0: float, rho: float) -> float:
    """Analytic Hannay angle for the horizontal circle X^2+Y^2 = rho^2 at height Z0 (counterclockwise)."""
    if rho >= Z0:
        raise DomainError("cycle leaves the bounded-orbit cone")
    return float(np.pi * (Z0 / np.sqrt(Z0 * Z0 - rho * rho) - 1.0))


def oscillator_hannay_angle_flux(cycle: Callable[[float], Sequence[float]], n: int = 400) -> float:
    """-(1/I) x flux of V through the cone spanned from the origin: projection-area law.

    For the oscillator theta_g = (1/2) x (hyperbolic solid angle subtended by
    the cycle), computed as the flux of R / (Z^2 - X^2 - Y^2)^{3/2} through
    the ruled surface joining the cycle to the apex direction (0, 0, 1).
    """
    s = np.arange(n) / n
    tot = 0.0
    # surface: R(s, u) = (1-u) * apex(s) + u * cycle(s), apex on the axis at the cycle's height scale
    u = (np.arange(n) + 0.5) / n
    for i in range(n):
        a = np.asarray(cycle(s[i]), float)
        b = np.asarray(cycle(s[(i + 1) % n] if i + 1 < n else 1.0), float)
        za = np.array([0.0, 0.0, a[2]])
        zb = np.array([0.0, 0.0, b[2]])
        for k in range(n):
            p00 = za + u[k] * (a - za) - 0.5 / n * (a - za)
            p01 = za + (u[k] + 0.5 / n) * (a - za)
            p10 = zb + (u[k] - 0.5 / n) * (b - zb)
            p11 = zb + (u[k] + 0.5 / n) * (b - zb)
            c = 0.25 * (p00 + p01 + p10 + p11)
            dS = 0.5 * np.cross(p11 - p00, p10 - p01)
            X, Y, Z = c
            tot += float(c @ dS) / (Z * Z - X * X - Y * Y) ** 1.5
    return 0.5 * tot


def _cayley_steps(Ms: np.ndarray, dt: float) -> np.ndarray:
    """Implicit-midpoint (Cayley) step matrices for z_dot = J2 M z."""
    A = np.einsum("ij,njk->nik", J2, Ms) * (0.5 * dt)
    eye = np.eye(2)[None]
    P = eye + A
    Q = eye - A
    detQ = Q[:, 0, 0] * Q[:, 1, 1] - Q[:, 0, 1] * Q[:, 1, 0]
    Qi = np.empty_like(Q)
    Qi[:, 0, 0], Qi[:, 1, 1] = Q[:, 1, 1] / detQ, Q[:, 0, 0] / detQ
    Qi[:, 0, 1], Qi[:, 1, 0] = -Q[:, 0, 1] / detQ, -Q[:, 1, 0] / detQ
    return np.einsum("nij,njk->nik", Qi, P)


def _chain(mats: np.ndarray) -> np.ndarray:
    """Ordered product mats[-1] @ ... @ mats[0] by pairwise reduction."""
    m = mats
    while len(m) > 1:
        if len(m) % 2:
            m = np.concatenate([m, np.eye(m.shape[1])[None]], axis=0)
        m = np.einsum("nij,njk->nik", m[1::2], m[0::2])
    return m[0]


def hannay_trajectory_extrapolated(system: OneDofSystem, I0: float, cycle, T: float, **kw) -> HannayResult:
    """Runs at T and 2T combined as 2 theta(2T) - theta(T), cancelling the O(1/T) term."""
    a = hannay_trajectory(system, I0, cycle, T, **kw)
    b = hannay_trajectory(system, I0, cycle, 2 * T, **kw)
    val = b.angle + wrap(b.angle - a.angle)
    diag = {"T": T, "theta_T": a.angle, "theta_2T": b.angle,
            "action_drift": max(a.diagnostics["action_drift"], b.diagnostics["action_drift"])}
    return HannayResult(wrap(val), val, "trajectory-subtraction", diag)


def hannay_trajectory(system: OneDofSystem, I0: float, cycle: Callable[[float], Sequence[float]], T: float,
                      steps_per_unit: float = 200.0, checkpoints: int = 200, drift_limit: float = 0.01,
                      smooth: bool = True) -> HannayResult:
    """Measured Hannay angle: final angle - initial angle - int omega dt (mod 2 pi).

    Quadratic systems are stepped with the implicit midpoint rule (exactly a
    Cayley transform, symplectic).  The action is monitored at checkpoints
    and a drift above ``drift_limit`` raises an adiabaticity error.  With
    ``smooth`` the cycle is entered and left at zero speed, which removes the
    switching transient from the O(1/T) error.
    """
    if smooth:
        base = cycle
        cycle = lambda x: base(x - np.sin(2 * np.pi * x) / (2 * np.pi))  # noqa: E731
    if system.quadratic is None:
        return _hannay_trajectory_general(system, I0, cycle, T, drift_limit)
    n = int(np.ceil(T * steps_per_unit / checkpoints)) * checkpoints
    dt = T / n
    tm = (np.arange(n) + 0.5) * dt
    Ms = np.array([system.quadratic(np.asarray(cycle(t / T), float)) for t in tm])
    steps = _cayley_steps(Ms, dt)
    R0 = np.asarray(cycle(0.0), float)
    z = _quad_chart(system.quadratic(R0), I0, np.array([0.0]))[0]
    drift = 0.0
    per = n // checkpoints
    for c in range(checkpoints):
        z = _chain(steps[c * per:(c + 1) * per]) @ z
        Rc = np.asarray(cycle((c + 1) * per * dt / T), float)
        M = system.quadratic(Rc)
        Ic = 0.5 * z @ M @ z / np.sqrt(np.linalg.det(M))
        drift = max(drift, abs(Ic - I0) / I0)
    if drift > drift_limit:
        raise AdiabaticityError(f"action drift {drift:.3e} exceeds {drift_limit}")
    th_f, _ = chart_angle(system, z[0], z[1], np.asarray(cycle(1.0), float))
    # dynamical angle of the discrete map: a Cayley step turns by 2 atan(w dt / 2)
    w = np.sqrt(Ms[:, 0, 0] * Ms[:, 1, 1] - Ms[:, 0, 1] * Ms[:, 1, 0])
    dyn = float(np.sum(2 * np.arctan(0.5 * w * dt)))
    geo = wrap(th_f - dyn)
    return HannayResult(geo, geo, "trajectory-subtraction", {"action_drift": drift, "dynamical": dyn, "T": T})


def _simpson(y, x):
    n = len(x) - 1
    if n % 2:
        raise DomainError("Simpson rule needs an even number of intervals")
    h = (x[-1] - x[0]) / n
    return h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())


def _hannay_trajectory_general(system, I0, cycle, T, drift_limit):
    R0 = np.asarray(cycle(0.0), float)
    z0 = chart_points(system, I0, R0, np.array([0.0]))[0]

    def rhs(t, z):
        return J2 @ system.gradient(z[0], z[1], np.asarray(cycle(t / T), float))

    sol = solve_ivp(rhs, (0, T), z0, method="DOP853", rtol=1e-11, atol=1e-12, dense_output=True)
    zf = sol.y[:, -1]
    th_f, I_f = chart_angle(system, zf[0], zf[1], np.asarray(cycle(1.0), float))
    drift = abs(I_f - I0) / I0
    if drift > drift_limit:
        raise AdiabaticityError(f"action drift {drift:.3e} exceeds {drift_limit}")
    tt = np.linspace(0, T, 401)
    w = np.array([system.frequency(np.asarray(cycle(t / T), float), I0) for t in tt])
    dyn = float(_simpson(w, tt))
    geo = wrap(th_f - dyn)
    return HannayResult(geo, geo, "trajectory-subtraction", {"action_drift": drift, "dynamical": dyn, "T": T})


# ---------------------------------------------------------------------------
# bead on a rotating loop


@dataclass(frozen=True)
class PlanarCurve:
    """Closed planar curve resampled by arc length (periodic cubic spline)."""

    points: np.ndarray  # (n, 2), not repeating the first point
    name: str = "curve"

    def __post_init__(self):
        p = np.asarray(self.points, float)
        if p.ndim != 2 or p.shape[1] != 2 or len(p) < 8:
            raise GeometryError("curve needs at least 8 planar points")
        if _self_intersects(p):
            raise GeometryError("curve is self-intersecting")
        object.__setattr__(self, "points", p)

    @property
    def _spline(self):
        p = np.vstack([self.points, self.points[:1]])
        seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
        u = np.concatenate([[0], np.cumsum(seg)])
        sx = CubicSpline(u, p[:, 0], bc_type="periodic")
        sy = CubicSpline(u, p[:, 1], bc_type="periodic")
        # arc length of the spline by Gauss-Legendre per knot interval
        xg, wg = np.polynomial.legendre.leggauss(8)
        lens = []
        for a, b in zip(u[:-1], u[1:]):
            t = 0.5 * (b - a) * xg + 0.5 * (a + b)
            lens.append(0.5 * (b - a) * np.sum(wg * np.hypot(sx(t, 1), sy(t, 1))))
        s_knots = np.concatenate([[0], np.cumsum(lens)])
        return sx, sy, u, s_knots

    def arc_parameterization(self, n: int = 4096):
        """Splines r(s), s in [0, C), with s true arc length."""
        sx, sy, u, s_knots = self._spline
        C = float(s_knots[-1])
        # invert s(u) on a fine grid
        uu = np.linspace(0, u[-1], 40 * len(u) + 1)
        speed = np.hypot(sx(uu, 1), sy(uu, 1))
        ss = np.concatenate([[0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(uu))])
        ss *= C / ss[-1]
        sg = np.linspace(0, C, n + 1)
        ug = np.interp(sg, ss, uu)
        X = CubicSpline(sg, np.append(sx(ug[:-1]), sx(ug[0])), bc_type="periodic")
        Y = CubicSpline(sg, np.append(sy(ug[:-1]), sy(ug[0])), bc_type="periodic")
        return X, Y, C

    def area(self) -> float:
        p = self.points
        return 0.5 * float(np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]))


def _self_intersects(p: np.ndarray) -> bool:
    n = len(p)
    a = p
    e = np.roll(p, -1, axis=0) - p

    def cr(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    for i in range(n - 2):
        j = np.arange(i + 2, n - 1 if i == 0 else n)
        if not len(j):
            continue
        d1 = cr(e[i], a[j] - a[i])
        d2 = cr(e[i], a[j] + e[j] - a[i])
        d3 = cr(e[j], a[i] - a[j])
        d4 = cr(e[j], a[i] + e[i] - a[j])
        if np.any((d1 * d2 < 0) & (d3 * d4 < 0)):
            return True
    return False


def ellipse_curve(a: float, b: float, n: int = 512, center=(0.0, 0.0)) -> PlanarCurve:
    t = 2 * np.pi * np.arange(n) / n
    return PlanarCurve(np.column_stack([center[0] + a * np.cos(t), center[1] + b * np.sin(t)]), f"ellipse-{a}x{b}")


def circle_curve(r: float, n: int = 512, center=(0.0, 0.0)) -> PlanarCurve:
    return ellipse_curve(r, r, n, center)


def stadium_curve(length: float, radius: float, n: int = 512) -> PlanarCurve:
    per = 2 * length + 2 * np.pi * radius
    s = per * np.arange(n) / n
    pts = []
    for x in s:
        if x < length:
            pts.append((-length / 2 + x, -radius))
        elif x < length + np.pi * radius:
            a = (x - length) / radius - np.pi / 2
            pts.append((length / 2 + radius * np.cos(a), radius * np.sin(a)))
        elif x < 2 * length + np.pi * radius:
            pts.append((length / 2 - (x - length - np.pi * radius), radius))
        else:
            a = (x - 2 * length - np.pi * radius) / radius + np.pi / 2
            pts.append((-length / 2 + radius * np.cos(a), radius * np.sin(a)))
    return PlanarCurve(np.array(pts), f"stadium-{length}-{radius}")


def curve_from_file(path) -> PlanarCurve:
    try:
        pts = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise DomainError(f"cannot read curve points from {path}: {exc}") from exc
    return PlanarCurve(pts[:, :2], str(path))


def bead_slip_analytic(curve: PlanarCurve) -> float:
    """Geometric slip distance for one slow counterclockwise turn: -4 pi A / C."""
    _, _, C = curve.arc_parameterization()
    return -4 * np.pi * curve_area(curve) / C


@dataclass(frozen=True)
class BeadResult:
    slip: float
    analytic: float
    action_drift: float
    circumference: float
    area: float
    T: float


def _fourier_loop(X, Y, C, n: int = 4096, rel: float = 1e-14):
    """Fourier modes of r(s) on [0, C); drops modes below ``rel`` of the largest."""
    s = C * np.arange(n) / n
    fx, fy = np.fft.fft(X(s)) / n, np.fft.fft(Y(s)) / n
    m = np.fft.fftfreq(n, 1.0 / n)
    amp = np.maximum(np.abs(fx), np.abs(fy))
    keep = amp > rel * amp.max()
    return m[keep], fx[keep], fy[keep]


def bead_slip(curve: PlanarCurve, T: float = 400.0, v0: float = 1.0, s0: float = 0.0, samples: int = 20001) -> BeadResult:
    """Simulate a frictionless bead while the loop turns once counterclockwise about the origin.

    The turn follows Phi(t) = 2 pi (t/T - sin(2 pi t/T) / 2 pi), so the loop
    starts and stops at rest.  In arc length s:
    s'' = -Phi'' g(s) + Phi'^2 (r . t), with g = (r x t)_z.  The slip is
    s(T) - s(0) - v0 T measured against a marker co-rotating with the loop.
    The canonical momentum p = s' + Phi' g(s) stands in for the action
    (I = C p / 2 pi on the frozen loop); its largest relative excursion is the
    reported drift.
    """
    X, Y, C = curve.arc_parameterization()
    k = 2 * np.pi / T
    # smooth periodic representation for the integrator (spline knots would
    # cap the step size of a high-order method)
    m, cx, cy = _fourier_loop(X, Y, C)
    w = 2 * np.pi * m / C

    def phid(t):
        return k * (1 - np.cos(k * t))

    def phidd(t):
        return k * k * np.sin(k * t)

    def geom(s):
        e = np.exp(1j * np.multiply.outer(np.asarray(s, float), w))
        x, y = (e @ cx).real, (e @ cy).real
        tx, ty = (e @ (1j * w * cx)).real, (e @ (1j * w * cy)).real
        return x * ty - y * tx, x * tx + y * ty

    def rhs(t, y):
        g, rt = geom(y[0])
        return [y[1], -phidd(t) * g + phid(t) ** 2 * rt]

    sol = solve_ivp(rhs, (0, T), [s0, v0], method="DOP853", rtol=1e-11, atol=1e-11, dense_output=True)
    tt = np.linspace(0, T, samples)
    ys = sol.sol(tt)
    p = ys[1] + phid(tt) * geom(ys[0])[0]
    drift = float(np.abs(p - v0).max() / abs(v0))
    slip = float(sol.y[0, -1] - s0 - v0 * T)
    A = curve_area(curve)
    return BeadResult(slip, -4 * np.pi * A / C, drift, C, A, T)


def curve_area(curve: PlanarCurve) -> float:
    """Enclosed area of the arc-length spline (Green's theorem, Gauss-Legendre)."""
    X, Y, C = curve.arc_parameterization()
    xg, wg = np.polynomial.legendre.leggauss(16)
    knots = X.x
    tot = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        s = 0.5 * (b - a) * xg + 0.5 * (a + b)
        tot += 0.5 * (b - a) * np.sum(wg * (X(s) * Y(s, 1) - Y(s) * X(s, 1)))
    return 0.5 * float(tot)


# ---------------------------------------------------------------------------
# Foucault pendulum


def foucault_precession(alpha: float) -> float:
    """Daily turn of the swing plane relative to the earth at colatitude alpha: 2 pi (1 - cos alpha)."""
    if not 0 <= alpha <= np.pi:
        raise DomainError("colatitude must lie in [0, pi]")
    return float(2 * np.pi * (1 - np.cos(alpha)))


def foucault_simulation(alpha: float, day: float = 200.0, omega0: float = 2 * np.pi, amplitude: float = 1e-2,
                        samples: int = 4000) -> dict:
    """Small-amplitude pendulum in the tangent plane of a vertical carried around a cone.

    The bob displacement x stays in the plane normal to n(t); the constraint
    force along n is eliminated analytically.  The swing line is read from
    the tensor omega0^2 x x^T + v v^T in the local (east, north) frame and
    unwrapped with period pi.  The holonomy is 2 pi plus the accumulated
    turn relative to that frame.
    """
    Om = 2 * np.pi / day
    sa, ca = np.sin(alpha), np.cos(alpha)

    def n_vec(t):
        ph = Om * t
        return np.array([sa * np.cos(ph), sa * np.sin(ph), ca])

    def nd(t):
        ph = Om * t
        return Om * np.array([-sa * np.sin(ph), sa * np.cos(ph), 0.0])

    def ndd(t):
        ph = Om * t
        return -Om * Om * np.array([sa * np.cos(ph), sa * np.sin(ph), 0.0])

    def rhs(t, y):
        x, v = y[:3], y[3:]
        n = n_vec(t)
        lam = -2 * v @ nd(t) - x @ ndd(t)
        return np.concatenate([v, -omega0**2 * x + lam * n])

    def frame(t):
        n = n_vec(t)
        east = np.cross([0.0, 0.0, 1.0], n)
        east /= np.linalg.norm(east)
        north = np.cross(n, east)
        return east, north

    e0, _ = frame(0.0)
    x0 = amplitude * e0
    v0 = -np.cross(nd(0.0), x0) * 0.0  # start at rest relative to the inertial frame
    sol = solve_ivp(rhs, (0, day), np.concatenate([x0, v0]), method="DOP853", rtol=1e-10, atol=1e-13,
                    dense_output=True)
    ts = np.linspace(0, day, samples + 1)
    angles = []
    for t in ts:
        y = sol.sol(t)
        e, nvec = frame(t)
        xl = np.array([y[:3] @ e, y[:3] @ nvec])
        vl = np.array([y[3:] @ e, y[3:] @ nvec])
        Q = omega0**2 * np.outer(xl, xl) + np.outer(vl, vl)
        w, V = np.linalg.eigh(Q)
        u = V[:, -1]
        angles.append(np.arctan2(u[1], u[0]))
    a = np.array(angles)
    a = np.unwrap(2 * a) / 2  # line orientation: period pi
    turn = float(a[-1] - a[0])
    holonomy = 2 * np.pi + turn
    return {"alpha": alpha, "turn_in_local_frame": turn, "holonomy": holonomy,
            "predicted": foucault_precession(alpha)}


# ---------------------------------------------------------------------------
# rigid body


def _hat(w):
    return np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])


@dataclass(frozen=True)
class RigidBodyPhase:
    delta_psi: float
    dynamical: float
    geometric: float
    period: float
    energy_drift: float
    momentum_drift: float
    orthogonality: float

    @property
    def identity_residual(self) -> float:
        return abs(wrap(self.delta_psi - self.dynamical - self.geometric))


def _align_to_z(v):
    """Rotation taking unit vector v to +z (body-to-space at t = 0)."""
    v = v / np.linalg.norm(v)
    z = np.array([0.0, 0.0, 1.0])
    c = float(v @ z)
    k = np.cross(v, z)
    s = np.linalg.norm(k)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    K = _hat(k / s)
    return np.eye(3) + s * K + (1 - c) * K @ K


def rigid_body_phase(inertia, L0, horizon_periods: float = 3.0, rtol: float = 1e-12) -> RigidBodyPhase:
    """One period of the body angular momentum path and the resulting rotation about l.

    Euler's equations in the body frame, dL/dt = L x Omega with
    Omega = I^{-1} L, together with dR/dt = R [Omega]_x for the body-to-space
    rotation R.  Initially R maps L to |L| z.  After one period of L,
    R(T) R(0)^{-1} is a rotation about z by delta_psi; the identity to check is
    delta_psi = 2 E T / |L| + oint cos(theta) dphi with (theta, phi) the polar
    angles of L in the body frame.
    """
    I = np.asarray(inertia, float)
    if I.shape == (3,):
        I = np.diag(I)
    if not np.allclose(I, I.T) or np.any(np.linalg.eigvalsh(I) <= 0):
        raise DomainError("inertia must be symmetric positive definite")
    Iinv = np.linalg.inv(I)
    L0 = np.asarray(L0, float)
    Lm = np.linalg.norm(L0)
    E0 = 0.5 * L0 @ Iinv @ L0
    R0 = _align_to_z(L0)

    def rhs(t, y):
        L = y[:3]
        R = y[3:12].reshape(3, 3)
        W = Iinv @ L
        dL = np.cross(L, W)
        dR = R @ _hat(W)
        # d/dt int cos(theta) dphi
        rho2 = L[0] ** 2 + L[1] ** 2
        dphi = (L[0] * dL[1] - L[1] * dL[0]) / rho2
        return np.concatenate([dL, dR.ravel(), [L[2] / Lm * dphi]])

    v0 = np.cross(L0, Iinv @ L0)
    if np.linalg.norm(v0) < 1e-14 * Lm:
        # stationary rotation (principal axis or spherical top)
        W = Iinv @ L0
        T = 2 * np.pi / max(np.linalg.norm(W), 1e-300)
        return RigidBodyPhase(wrap(2 * E0 * T / Lm), 2 * E0 * T / Lm, 0.0, T, 0.0, 0.0, 0.0)

    def ret(t, y):
        return (y[:3] - L0) @ v0

    ret.direction = 1.0
    scale = 2 * np.pi / np.linalg.norm(Iinv @ L0)
    y0 = np.concatenate([L0, R0.ravel(), [0.0]])
    sol = solve_ivp(rhs, (0, horizon_periods * 50 * scale), y0, method="DOP853", events=ret, rtol=rtol, atol=1e-13)
    hits = [(t, y) for t, y in zip(sol.t_events[0], sol.y_events[0]) if t > 1e-6 * scale
            and np.linalg.norm(y[:3] - L0) < 1e-6 * Lm]
    if not hits:
        raise PeriodDetectionError("angular momentum path did not close within the horizon")
    T, yT = hits[0]
    LT = yT[:3]
    RT = yT[3:12].reshape(3, 3)
    Rrel = RT @ R0.T
    delta = float(np.arctan2(Rrel[1, 0], Rrel[0, 0]))
    dyn = 2 * E0 * T / Lm
    geo = float(yT[12])
    E_T = 0.5 * LT @ Iinv @ LT
    return RigidBodyPhase(delta, dyn, geo, float(T), abs(E_T - E0) / E0, abs(np.linalg.norm(LT) - Lm) / Lm,
                          float(np.abs(RT.T @ RT - np.eye(3)).max()))


def symmetric_top_geometric(theta: float) -> float:
    """oint cos(theta) dphi for a cone of constant polar angle theta traversed once: 2 pi cos(theta)."""
    return 2 * np.pi * np.cos(theta)


# ---------------------------------------------------------------------------
# shape change at zero angular momentum


@dataclass(frozen=True)
class ShapeCycle:
    masses: np.ndarray
    positions: Callable[[float], np.ndarray]  # s -> (n, 3) body-frame coordinates

    def centered(self, s: float) -> np.ndarray:
        r = np.asarray(self.positions(s), float)
        m = np.asarray(self.masses, float)
        return r - (m[:, None] * r).sum(0) / m.sum()

    def velocity(self, s: float, h: float = 1e-6) -> np.ndarray:
        return (self.centered(s - 2 * h) - 8 * self.centered(s - h) + 8 * self.centered(s + h)
                - self.centered(s + 2 * h)) / (12 * h)


def _inertia(m, r):
    I = np.zeros((3, 3))
    for mk, rk in zip(m, r):
        I += mk * ((rk @ rk) * np.eye(3) - np.outer(rk, rk))
    return I


def body_angular_velocity(shape: ShapeCycle, s: float) -> np.ndarray:
    """Omega per unit shape parameter: -I^{-1} sum m r x dr/ds."""
    m = np.asarray(shape.masses, float)
    r = shape.centered(s)
    v = shape.velocity(s)
    I = _inertia(m, r)
    if np.linalg.cond(I) > 1e12:
        raise SingularityError(f"inertia tensor singular at s={s:.4f}")
    L = (m[:, None] * np.cross(r, v)).sum(0)
    return -np.linalg.solve(I, L)


def shape_reorientation(shape: ShapeCycle, warp: Callable[[float], float] | None = None, T: float = 1.0,
                        rtol: float = 1e-12) -> np.ndarray:
    """Net rotation R(T) R(0)^{-1} from dR/dt = R [Omega]_x with zero angular momentum.

    ``warp`` maps clock fraction t/T to the shape parameter (monotone, 0->0,
    1->1) so that the same cycle can be run at different rates.
    """
    m = np.asarray(shape.masses, float)
    if np.any(m <= 0):
        raise DomainError("masses must be positive")
    wfun = (lambda x: x) if warp is None else warp
    h = 1e-7

    def sdot(t):
        x = t / T
        return (wfun(min(x + h, 1.0)) - wfun(max(x - h, 0.0))) / ((min(x + h, 1.0) - max(x - h, 0.0)) * T)

    def rhs(t, y):
        R = y.reshape(3, 3)
        s = wfun(t / T)
        W = body_angular_velocity(shape, s) * sdot(t)
        return (R @ _hat(W)).ravel()

    sol = solve_ivp(rhs, (0, T), np.eye(3).ravel(), method="DOP853", rtol=rtol, atol=1e-14)
    R = sol.y[:, -1].reshape(3, 3)
    u, _, vh = np.linalg.svd(R)
    return u @ vh


def rotation_angle(R: np.ndarray) -> float:
    return float(np.arccos(np.clip((np.trace(R) - 1) / 2, -1, 1)))


def kabsch(P: np.ndarray, Q: np.ndarray, w=None) -> np.ndarray:
    """Rotation minimizing sum w |R p - q|^2."""
    w = np.ones(len(P)) if w is None else np.asarray(w, float)
    H = (P * w[:, None]).T @ Q
    u, _, vh = np.linalg.svd(H)
    d = np.sign(np.linalg.det(vh.T @ u.T))
    D = np.diag([1.0, 1.0, d])
    return vh.T @ D @ u.T


def reorientation_oracle(shape: ShapeCycle, rtol: float = 1e-12) -> np.ndarray:
    """Independent check: integrate space-frame positions with the angular velocity that keeps L = 0.

    x_a' = w x x_a + u_a, with u_a the shape velocity rotated into space and
    w solving I_space w = -sum m x_a x u_a; the net rotation is the Kabsch fit
    of the final configuration onto the initial one.
    """
    m = np.asarray(shape.masses, float)
    r0 = shape.centered(0.0)
    n = len(m)

    def rhs(s, y):
        x = y[: 3 * n].reshape(n, 3)
        Rm = y[3 * n:].reshape(3, 3)
        u = shape.velocity(s) @ Rm.T
        I = _inertia(m, x)
        w = -np.linalg.solve(I, (m[:, None] * np.cross(x, u)).sum(0))
        dx = np.cross(w[None, :], x) + u
        dR = _hat(w) @ Rm
        return np.concatenate([dx.ravel(), dR.ravel()])

    y0 = np.concatenate([r0.ravel(), np.eye(3).ravel()])
    sol = solve_ivp(rhs, (0, 1), y0, method="DOP853", rtol=rtol, atol=1e-14)
    xf = sol.y[: 3 * n, -1].reshape(n, 3)
    return kabsch(r0, xf, m)


def cat_cycle(seed: int = 7, amplitude: float = 0.35) -> ShapeCycle:
    """Seeded planar three-mass shape cycle (all masses in the body xy plane)."""
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.5, 2.0, 3)
    base = np.array([[1.0, 0.0, 0.0], [-0.5, 0.9, 0.0], [-0.5, -0.9, 0.0]])
    c1 = rng.normal(size=(3, 2)) * amplitude
    c2 = rng.normal(size=(3, 2)) * amplitude

    def pos(s):
        a, b = np.cos(2 * np.pi * s) - 1.0, np.sin(2 * np.pi * s)
        d = np.zeros((3, 3))
        d[:, :2] = a * c1 + b * c2
        return base + d

    return ShapeCycle(m, pos)


def retraced(shape: ShapeCycle) -> ShapeCycle:
    """The cycle run forward to its midpoint and back along the same path."""
    def pos(s):
        u = 2 * s if s <= 0.5 else 2 * (1 - s)
        return shape.positions(0.5 * (1 - np.cos(np.pi * u)))

    return ShapeCycle(shape.masses, pos)


# ---------------------------------------------------------------------------
# parallel transport of a tangent vector on the sphere


def sphere_parallel_transport(d0, t_path) -> tuple[np.ndarray, np.ndarray]:
    """Transport d along unit directions t_k by projection onto each new tangent plane.

    Returns the final vector and the history of |d| and d.t (which must stay
    1 and 0).
    """
    t = np.asarray(t_path, float)
    t = t / np.linalg.norm(t, axis=1)[:, None]
    d = np.asarray(d0, float)
    if abs(d @ t[0]) > 1e-10:
        raise DomainError("initial vector must be perpendicular to the initial direction")
    d = d / np.linalg.norm(d)
    if np.any(np.einsum("ij,ij->i", t[:-1], t[1:]) < -1 + 1e-9):
        raise GeometryError("antipodal step in the direction path")
    checks = []
    for k in range(1, len(t)):
        d = d - (d @ t[k]) * t[k]
        d /= np.linalg.norm(d)
        checks.append((np.linalg.norm(d), d @ t[k]))
    return d, np.array(checks)


def transport_rotation(d0, df, t0) -> float:
    """Signed angle turning d0 into df about t0 (right-hand rule)."""
    return float(np.arctan2(np.cross(d0, df) @ t0, d0 @ df))


def helix_directions(pitch_angle: float, n: int = 40000) -> np.ndarray:
    """Tangent directions of one turn of a helix: a circle of colatitude pitch_angle, closed."""
    s = 2 * np.pi * np.arange(n + 1) / n
    st = np.sin(pitch_angle)
    return np.column_stack([st * np.cos(s), st * np.sin(s), np.full(n + 1, np.cos(pitch_angle))])


def fiber_rotation(t_path, d0=None) -> dict:
    """Rotation of the polarization direction after a closed direction cycle, with the solid angle."""
    t = np.asarray(t_path, float)
    t = t / np.linalg.norm(t, axis=1)[:, None]
    if d0 is None:
        a = np.array([1.0, 0.0, 0.0]) if abs(t[0, 0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        d0 = a - (a @ t[0]) * t[0]
    d0 = np.asarray(d0, float) / np.linalg.norm(d0)
    df, checks = sphere_parallel_transport(d0, t)
    rot = transport_rotation(d0, df, t[0])
    omega = solid_angle_of_loop(t)
    return {"rotation": rot, "solid_angle": omega, "norm_dev": float(np.abs(checks[:, 0] - 1).max()),
            "perp_dev": float(np.abs(checks[:, 1]).max())}
