"""Named scenarios: schemas, runners and deterministic report emission.

Every scenario binds module operations to a typed parameter schema and a
list of expectations.  The runner returns an :class:`Outcome`; ``run``
validates a config, executes the runner and builds the report dictionary.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .errors import ConfigError, HolabError

MAGIC_ANGLE = math.acos(1 / math.sqrt(3))


# ---------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # float | int | bool | str | floats | ints
    default: Any
    doc: str
    choices: tuple = ()

    def coerce(self, value, where: str):
        k = self.kind
        bad = ConfigError(f"{where}.{self.name}: expected {k}, got {value!r}")
        if k == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise bad
            return float(value)
        if k == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise bad
            return int(value)
        if k == "bool":
            if not isinstance(value, bool):
                raise bad
            return value
        if k == "str":
            if not isinstance(value, str):
                raise bad
            if self.choices and value not in self.choices:
                raise ConfigError(f"{where}.{self.name}: {value!r} not in {list(self.choices)}")
            return value
        if k in ("floats", "ints"):
            if not isinstance(value, list):
                raise bad
            inner = Param(self.name, k[:-1], None, "")
            return [inner.coerce(v, where) for v in value]
        raise ConfigError(f"unknown parameter kind {k}")

    def describe(self) -> dict:
        d = {"type": self.kind, "default": self.default, "doc": self.doc}
        if self.choices:
            d["choices"] = list(self.choices)
        return d


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    expected: float
    tolerance: float
    passed: bool
    note: str = ""

    def to_record(self) -> dict:
        d = {"name": self.name, "value": self.value, "expected": self.expected, "tolerance": self.tolerance,
             "pass": self.passed}
        if self.note:
            d["note"] = self.note
        return d


def close(name, value, expected, tol, rel=False, note="") -> Check:
    err = abs(value - expected)
    if rel:
        err /= abs(expected)
    return Check(name, float(value), float(expected), float(tol), bool(err <= tol), note)


def below(name, value, limit, note="") -> Check:
    return Check(name, float(value), 0.0, float(limit), bool(abs(value) <= limit), note)


def truth(name, ok: bool, note="") -> Check:
    return Check(name, 1.0 if ok else 0.0, 1.0, 0.0, bool(ok), note)


@dataclass
class Outcome:
    results: dict  # name -> (value, unit)
    checks: list
    diagnostics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file stem -> (headers, rows)


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    anchor: str
    params: tuple
    tolerances: tuple
    runner: Callable[[dict, dict, int], Outcome]
    tables: dict = field(default_factory=dict)  # file stem -> headers

    def schema(self) -> dict:
        return {"parameters": {p.name: p.describe() for p in self.params},
                "tolerances": {p.name: p.describe() for p in self.tolerances},
                "tables": {k: list(v) for k, v in self.tables.items()}}


def P(name, kind, default, doc, choices=()):
    return Param(name, kind, default, doc, tuple(choices))


# ---------------------------------------------------------------------------
# runners


def _spin_cone(p, t, seed):
    from . import abelian as ab, dynamics as dy, spectral as sp

    th = p["theta0"]
    z = sp.zeeman()
    loop = sp.colatitude_loop(th, 1.0, p["n_points"])
    disc = ab.berry_phase_discrete(ab.loop_states(z, 1, loop)).phase
    exact = -np.pi * (1 - np.cos(th))
    res = {"geometric_phase": (disc, "rad"), "exact": (exact, "rad")}
    checks = [close("discrete_vs_exact", disc, exact, t["phase"])]
    tables = {}
    if p["ode"]:
        cyc = lambda s: np.array([np.sin(th) * np.cos(2 * np.pi * s), np.sin(th) * np.sin(2 * np.pi * s),  # noqa: E731
                                  np.cos(th)])
        rows = dy.adiabatic_error_scan(z, cyc, 1, p["epsilons"], tol=1e-6, steps_per_unit=10)
        eps = [r["epsilon"] for r in rows]
        bg = np.unwrap([r["beta_g"] for r in rows])
        ext = dy.extrapolate_zero(eps, bg, min(2, len(eps) - 1))
        res["ode_extrapolated"] = (ext, "rad")
        checks.append(close("ode_extrapolated_vs_exact", ext, exact, t["ode"]))
        tables["scan"] = (["epsilon", "leakage", "beta_g", "phase_error"],
                          [[r["epsilon"], r["leakage"], r["beta_g"], r["phase_error"]] for r in rows])
    return Outcome(res, checks, {"n_points": p["n_points"]}, tables)


def _monopole(p, t, seed):
    from . import abelian as ab, spectral as sp

    M = np.eye(3) if p["orientation"] == "positive" else np.diag([1.0, 1.0, -1.0])
    fam = sp.two_state_linear(M)
    surf = sp.icosphere(p["radius"], p["center"], p["subdivisions"])
    c = ab.degeneracy_census(fam, 1, surf, tol=t["residual"])
    first = c.history[0]
    expected = 1 if p["orientation"] == "positive" else -1
    enclosed = np.linalg.norm(p["center"]) < p["radius"]
    return Outcome(
        {"charge": (c.charge, "2pi"), "raw_flux": (c.raw_flux, "rad"), "residual": (c.residual, "rad")},
        [close("charge", c.charge, expected if enclosed else 0, 0.0),
         below("residual_after_refinement", c.residual, t["residual"]),
         below("residual_before_refinement", abs(first - 2 * np.pi * c.charge), 0.05 * 2 * np.pi)],
        {"refinements": c.refinements, "flux_history": list(c.history)})


def _curvature_methods(p, t, seed):
    from . import abelian as ab, spectral as sp

    fam = sp.random_family(p["dim"], seed)
    rng = np.random.default_rng(seed + 1)
    rows, worst, used = [], 0.0, 0
    while used < p["n_points"]:
        R = rng.uniform(-1, 1, 3)
        es = sp.eigendecompose(fam, R)
        if es.level_gap(p["level"]) < 0.05:
            continue
        V = [ab.berry_curvature(fam, p["level"], R, m).V for m in ("finite-difference", "perturbation-sum",
                                                                    "density-matrix")]
        scale = np.linalg.norm(V[1])
        d = max(np.linalg.norm(V[0] - V[1]), np.linalg.norm(V[2] - V[1])) / scale
        worst = max(worst, d)
        rows.append([*R, *V[0], *V[1], *V[2], d])
        used += 1
    head = ["X", "Y", "Z", "fd_x", "fd_y", "fd_z", "ps_x", "ps_y", "ps_z", "dm_x", "dm_y", "dm_z", "rel_dev"]
    return Outcome({"max_relative_disagreement": (worst, "1")},
                   [below("methods_agree", worst, t["relative"])], {"points": used}, {"points": (head, rows)})


def _wilson_nqr(p, t, seed):
    from . import abelian as ab, nonabelian as na, spectral as sp

    th = p["theta0"]
    q = sp.quadrupole(p["omega_q"])
    loop = sp.colatitude_loop(th, 1.0, p["n_points"])
    h = na.wilson_loop(q, [2, 3], loop, tol=1e-7)
    omega = 2 * np.pi * (1 - np.cos(th))
    eig = np.sort(np.angle(np.linalg.eigvals(h.U)))
    expected = np.sort([ab.wrap(1.5 * omega), ab.wrap(-1.5 * omega)])
    off = float(max(abs(h.U[0, 1]), abs(h.U[1, 0])))
    z = sp.zeeman()
    l1 = sp.colatitude_loop(th, 1.0, p["n_points"])
    u1 = na.wilson_loop(z, [1], l1, refine=False).U[0, 0]
    ab1 = ab.berry_phase_discrete(ab.loop_states(z, 1, l1)).phase
    rng = np.random.default_rng(seed)
    W0 = na.random_unitary(2, rng)
    W1 = na.random_unitary(2, rng)
    gen = 1j * (W1 - W1.conj().T)

    def remix(R):
        from scipy.linalg import expm
        return W0 @ expm(1j * float(R[0]) * gen)

    cov = na.gauge_covariance_check(q, [2, 3], loop, remix)
    return Outcome(
        {"eigenphases": (eig.tolist(), "rad"), "expected": (expected.tolist(), "rad"), "off_diagonal": (off, "1"),
         "abelian_reduction_error": (abs(ab.wrap(float(np.angle(u1)) - ab1)), "rad"),
         "remix_spectrum_deviation": (cov.eigenvalue_deviation, "1")},
        [below("doublet_off_diagonal", off, t["off_diagonal"]),
         below("eigenphases", float(np.abs(eig - expected).max()), t["phase"]),
         below("r1_reduction", abs(ab.wrap(float(np.angle(u1)) - ab1)), t["reduction"]),
         below("gauge_remix", cov.eigenvalue_deviation, t["remix"])],
        {"samples": h.samples, "refinement_error": h.refinement_error, "unitarity_defect": h.unitarity_defect()})


def _aa_phase(p, t, seed):
    from . import abelian as ab, dynamics as dy

    th, w = p["theta"], p["omega"]
    psi0 = np.array([np.cos(th / 2), np.sin(th / 2)], complex)
    Hz = 0.5 * w * np.diag([1.0, -1.0]).astype(complex)
    T = 2 * np.pi / w
    tr = dy.propagate_hamiltonian(lambda s: Hz, 0.0, T, psi0, p["n_steps"], tol=1e-10, method="magnus4")
    d1 = dy.aa_phase(tr)
    # same cyclic evolution with a nonuniform clock
    a = p["warp"]
    rate = lambda s: 1 + a * np.cos(2 * np.pi * s / T)  # noqa: E731
    tr2 = dy.propagate_hamiltonian(lambda s: rate(s) * Hz, 0.0, T, psi0, p["n_steps"], tol=1e-10, method="magnus4")
    d2 = dy.aa_phase(tr2)
    expected = ab.wrap(-np.pi * (1 - np.cos(th)))
    # open path and its geodesic closure
    n_open = len(tr.times) // 3
    sub = tr.states[: n_open + 1]
    op = dy.aa_phase(dy.TrajectoryRecord(tr.times[: n_open + 1], sub, np.linalg.norm(sub, axis=1)), closed=False)
    geo = [ab.geodesic_states(sub[-1], sub[0], s) for s in np.linspace(0, 1, 65)[1:-1]]
    closed = ab.berry_phase_discrete(list(sub) + geo, closed=False).phase
    return Outcome(
        {"beta_g": (d1.geometric, "rad"), "beta_g_warped": (d2.geometric, "rad"), "expected": (expected, "rad"),
         "open_beta_g": (op.geometric, "rad"), "geodesic_closed_phase": (closed, "rad")},
        [close("cone_value", d1.geometric, expected, t["value"]),
         below("reparameterization", abs(ab.wrap(d1.geometric - d2.geometric)), t["reparam"]),
         below("geodesic_closure", abs(ab.wrap(op.geometric - closed)), t["geodesic"])],
        {"steps": tr.steps})


_SA_CACHE: dict = {}


def _superadiabatic(p, t, seed):
    from . import superadiabatic as sa

    key = (p["epsilon"], p["k_max"], p["precision_bits"], p["grid"], p["half_width"], p["cutoff"])
    if key not in _SA_CACHE:
        _SA_CACHE[key] = sa.superadiabatic_iterate(sa.sech_field(1.0, 1.0), p["epsilon"], p["k_max"],
                                                   L=p["half_width"], N=p["grid"],
                                                   precision_bits=p["precision_bits"], cutoff=p["cutoff"])
    s = _SA_CACHE[key]
    d = sa.series_diagnostics(s)
    ff = lambda x: np.array([1 / np.cosh(x), np.tanh(x) / np.cosh(x), 1.0])  # noqa: E731
    exact = sa.exact_lower_phase(ff, p["epsilon"], 25.0, 1.0)
    e0 = abs(np.angle(np.exp(1j * (s.predicted_phase(0) - exact))))
    K = p["truncation"] if p["truncation"] > 0 else min(d.optimal_k, len(s.terms))
    eK = abs(np.angle(np.exp(1j * (s.predicted_phase(K) - exact))))
    ratio = e0 / max(eK, 1e-300)
    inv = 1 / p["epsilon"]
    rows = [[k, float(g), float(abs(s.terms[k + 1] / g)) if k + 1 < len(s.terms) and g != 0 else float("nan")]
            for k, g in enumerate(s.terms)]
    return Outcome(
        {"terms": ([float(x) for x in s.terms], "rad"), "optimal_k": (d.optimal_k, "1"),
         "order_ratio_slope": (d.order_ratio_slope, "1"), "raw_ratio_slope": (d.raw_ratio_slope, "1"),
         "error_k0": (e0, "rad"), "error_truncated": (eK, "rad"), "exact_phase": (exact, "rad")},
        [truth("decrease_then_increase", d.decreases_then_increases),
         close("optimal_index", d.optimal_k, inv, t["index"], rel=True),
         close("ratio_slope", d.order_ratio_slope, p["epsilon"], t["slope"], rel=True,
               note="per-order ratio sqrt|g(k+1)/g(k)|; raw ratio slope reported separately"),
         Check("truncation_gain", float(ratio), 10.0, 0.0, bool(ratio >= 10.0))],
        {"window": list(d.window), "truncation_order": K, "breakdown": s.breakdown or ""},
        {"terms": (["k", "gamma_k", "ratio_next"], rows)})


def _amplitude(p, t, seed):
    from . import dynamics as dy

    a, w, A = p["a"], p["omega"], p["A"]
    f = dy.geometric_amplitude_fit(dy.helix_field(a, w, A), p["epsilons"], tau_max=p["tau_max"])
    target = dy.helix_gamma(a, w, A)
    lz = dy.geometric_amplitude_fit(dy.landau_zener_field(p["lz_a"], p["lz_A"]), p["lz_epsilons"],
                                    tau_max=p["tau_max"])
    rows = [[e, y] for e, y in zip(f.epsilons, f.logP)]
    return Outcome(
        {"gamma_estimate": (f.gamma_estimate, "1"), "closed_form": (target, "1"), "intercept": (f.intercept, "1"),
         "slope": (f.slope, "1"), "r2": (f.r2, "1"), "lz_intercept": (lz.intercept, "1")},
        [close("helix_gamma", f.gamma_estimate, target, t["relative"], rel=True),
         Check("fit_r2", f.r2, 1.0, 0.01, bool(f.r2 > 0.99)),
         below("landau_zener_intercept", lz.intercept, t["lz"])],
        {"calibration": dy.AMPLITUDE_CALIBRATION}, {"helix_fit": (["epsilon", "lnP"], rows)})


def _nmr(p, t, seed):
    from . import dynamics as dy

    r1 = dy.nmr_shift_scenario(p["omega_rot"], p["theta"], p["T"], p["cycles"])
    r2 = dy.nmr_shift_scenario(p["omega_rot"], p["theta"], 2 * p["T"], p["cycles"])
    ratio = r1["shift"] / r2["shift"]
    # the ratio of two shifts each known to one bin
    ratio_tol = abs(ratio) * (r1["bin_width"] / abs(r1["shift"]) + r2["bin_width"] / abs(r2["shift"]))
    return Outcome(
        {"shift_T": (r1["shift"], "rad/time"), "shift_2T": (r2["shift"], "rad/time"),
         "predicted_T": (r1["predicted_shift"], "rad/time"), "predicted_2T": (r2["predicted_shift"], "rad/time"),
         "alpha": (r1["alpha"], "sr"), "bin_T": (r1["bin_width"], "rad/time"), "bin_2T": (r2["bin_width"], "rad/time")},
        [close("shift_T", r1["shift"], r1["predicted_shift"], r1["bin_width"] * t["bins"]),
         close("shift_2T", r2["shift"], r2["predicted_shift"], r2["bin_width"] * t["bins"]),
         close("halving", ratio, 2.0, ratio_tol)],
        {}, {"spectrum_T": (["omega", "magnitude"], np.column_stack([r1["spectrum"].frequencies,
                                                                      r1["spectrum"].magnitude]).tolist())})


def _tycko(p, t, seed):
    from . import dynamics as dy

    wq, wr = p["omega_q"], p["omega_r"]
    rep = dy.nqr_tycko_scenario(wq, wr, np.radians(p["tilt_deg"]), n_periods=p["n_periods"],
                                samples_per_period=p["samples_per_period"])
    peaks = sorted(rep.peaks[:3], key=lambda x: x[0])
    offs = [(f - 2 * wq) / wr for f, _ in peaks]
    b = rep.bin_width
    derived = [-np.sqrt(3), 0.0, np.sqrt(3)]
    literal = [-np.sqrt(3) / np.pi, 0.0, np.sqrt(3) / np.pi]
    dev_d = max(abs(o - e) for o, e in zip(offs, derived)) * wr
    dev_l = max(abs(o - e) for o, e in zip(offs, literal)) * wr
    return Outcome(
        {"peak_offsets": (offs, "omega_r"), "bin_width": (b / wr, "omega_r")},
        [truth("three_peaks", len(rep.peaks) >= 3),
         below("sidebands_sqrt3", dev_d, b * t["bins"], note="center and +-sqrt(3) omega_r at the magic angle"),
         below("sidebands_sqrt3_over_pi", dev_l, b * t["bins"],
               note="literal +-sqrt(3)/pi coefficient; unattainable with integer sidebands")],
        {"tilt_deg": p["tilt_deg"], "warnings": list(rep.warnings)},
        {"spectrum": (["omega", "magnitude"], np.column_stack([rep.frequencies, rep.magnitude]).tolist())})


def _hannay(p, t, seed):
    from . import classical as cl

    S = cl.generalized_oscillator()
    Z0, rho = p["Z0"], p["rho"]
    cyc = lambda s: (rho * np.cos(2 * np.pi * s), rho * np.sin(2 * np.pi * s), Z0)  # noqa: E731
    analytic = cl.oscillator_hannay_angle_cone(Z0, rho)
    conn = [cl.hannay_connection(S, I, cyc).unwrapped for I in p["actions"]]
    spread = (max(conn) - min(conn)) / abs(np.mean(conn))
    traj = cl.hannay_trajectory_extrapolated(S, 1.0, cyc, p["T"], steps_per_unit=p["steps_per_unit"])
    rng = np.random.default_rng(seed)
    worst = 0.0
    rows = []
    for _ in range(p["curvature_points"]):
        Z = rng.uniform(1.0, 2.0)
        r = rng.uniform(0, 0.7 * Z)
        ph = rng.uniform(0, 2 * np.pi)
        R = np.array([r * np.cos(ph), r * np.sin(ph), Z])
        V = cl.hannay_curvature(S, 1.0, R)
        Vx = cl.oscillator_curvature(1.0, R)
        dev = float(np.linalg.norm(V - Vx) / np.linalg.norm(Vx))
        worst = max(worst, dev)
        rows.append([*R, *V, *Vx, dev])
    return Outcome(
        {"analytic": (analytic, "rad"), "connection": (conn[len(conn) // 2], "rad"),
         "trajectory": (traj.angle, "rad"), "action_spread": (spread, "1"), "curvature_deviation": (worst, "1")},
        [close("connection_vs_analytic", conn[len(conn) // 2], analytic, t["methods"]),
         close("trajectory_vs_connection", traj.angle, conn[len(conn) // 2], t["methods"]),
         below("independent_of_action", spread, t["action"]),
         below("curvature_pointwise", worst, t["curvature"])],
        {"theta_T": traj.diagnostics["theta_T"], "theta_2T": traj.diagnostics["theta_2T"],
         "action_drift": traj.diagnostics["action_drift"]},
        {"curvature": (["X", "Y", "Z", "Vx", "Vy", "Vz", "Vx_ref", "Vy_ref", "Vz_ref", "rel_dev"], rows)})


def _curve(p):
    from . import classical as cl

    kind = p["curve"]
    if kind == "ellipse":
        return cl.ellipse_curve(p["a"], p["b"])
    if kind == "circle":
        return cl.circle_curve(p["a"])
    if kind == "stadium":
        return cl.stadium_curve(p["a"], p["b"])
    if not p["file"]:
        raise ConfigError("parameters.file is required for curve = 'file'")
    return cl.curve_from_file(p["file"])


def _bead(p, t, seed):
    from . import classical as cl

    cur = _curve(p)
    r1 = cl.bead_slip(cur, p["T"])
    r2 = cl.bead_slip(cur, 2 * p["T"])
    ratio = r1.action_drift / r2.action_drift
    rows = [[r.T, r.slip, r.analytic, r.action_drift] for r in (r1, r2)]
    return Outcome(
        {"slip": (r1.slip, "length"), "analytic": (r1.analytic, "length"), "circumference": (r1.circumference, "length"),
         "area": (r1.area, "length^2"), "action_drift_T": (r1.action_drift, "1"),
         "action_drift_2T": (r2.action_drift, "1"), "drift_ratio": (ratio, "1")},
        [close("slip_vs_formula", r1.slip, r1.analytic, t["slip"], rel=True),
         below("action_drift", r1.action_drift, t["drift"]),
         close("drift_halves", ratio, 2.0, t["halving"])],
        {}, {"runs": (["T", "slip", "analytic", "action_drift"], rows)})


def _foucault(p, t, seed):
    from . import classical as cl

    r = cl.foucault_simulation(p["alpha"], day=p["day"], omega0=p["omega0"])
    return Outcome({"holonomy": (r["holonomy"], "rad"), "predicted": (r["predicted"], "rad"),
                    "turn_in_local_frame": (r["turn_in_local_frame"], "rad")},
                   [close("precession", r["holonomy"], r["predicted"], t["relative"], rel=True)])


def _rigid(p, t, seed):
    from . import classical as cl

    r = cl.rigid_body_phase(p["inertia"], p["L0"])
    return Outcome(
        {"delta_psi": (r.delta_psi, "rad"), "dynamical": (r.dynamical, "rad"), "geometric": (r.geometric, "rad"),
         "period": (r.period, "time"), "identity_residual": (r.identity_residual, "rad")},
        [below("identity", r.identity_residual, t["identity"]),
         below("energy_conservation", r.energy_drift, t["conservation"]),
         below("momentum_conservation", r.momentum_drift, t["conservation"])],
        {"orthogonality": r.orthogonality})


def _cat(p, t, seed):
    from . import classical as cl

    c = cl.cat_cycle(seed, p["amplitude"])
    R1 = cl.shape_reorientation(c)
    R2 = cl.shape_reorientation(c, warp=lambda x: x + p["warp"] * np.sin(2 * np.pi * x) / (2 * np.pi),
                                T=p["slow_factor"])
    Ro = cl.reorientation_oracle(c)
    Rr = cl.shape_reorientation(cl.retraced(c))
    return Outcome(
        {"rotation_angle": (cl.rotation_angle(R1), "rad"), "rotation": (R1.tolist(), "1"),
         "rate_deviation": (float(np.abs(R1 - R2).max()), "1"), "oracle_deviation": (float(np.abs(R1 - Ro).max()), "1"),
         "retrace_deviation": (float(np.abs(Rr - np.eye(3)).max()), "1")},
        [below("rate_invariance", np.abs(R1 - R2).max(), t["rate"]),
         below("oracle", np.abs(R1 - Ro).max(), t["oracle"]),
         below("retrace_identity", np.abs(Rr - np.eye(3)).max(), t["rate"])],
        {"masses": c.masses.tolist()})


def _fiber(p, t, seed):
    from . import classical as cl

    h = cl.fiber_rotation(cl.helix_directions(p["pitch_angle"], p["n_points"]))
    flat = cl.fiber_rotation(cl.helix_directions(np.pi / 2, p["n_points"]))
    from .abelian import wrap

    dev = abs(wrap(h["rotation"] - h["solid_angle"]))
    return Outcome(
        {"rotation": (h["rotation"], "rad"), "solid_angle": (h["solid_angle"], "sr"),
         "planar_rotation": (flat["rotation"], "rad")},
        [below("helix_rotation_vs_solid_angle", dev, t["helix"]),
         below("planar_unchanged", abs(flat["rotation"]), t["planar"]),
         below("norm_preserved", h["norm_dev"], 1e-10), below("perpendicular", h["perp_dev"], 1e-10)])


def _pancharatnam(p, t, seed):
    from . import polarization as po

    pts = [p["a"], p["b"], p["c"]]
    st = [po.PolarizationState.from_poincare(x) for x in pts]
    ph = po.triangle_phase(*st)
    om = po.poincare_triangle_solid_angle(*st)
    rel = po.pancharatnam_relative_phase(st[0], st[1])
    grid = np.linspace(-np.pi, np.pi, 20001)
    inten = [po.superposed_intensity(st[0], st[1], x) for x in grid]
    best = float(grid[int(np.argmax(inten))])
    return Outcome(
        {"phase": (ph, "rad"), "solid_angle": (om, "sr"), "relative_phase_ab": (rel, "rad"),
         "intensity_argmax": (best, "rad")},
        [close("half_solid_angle", ph, -0.5 * om, t["phase"]),
         close("interference_maximum", best, rel, 2 * np.pi / 20000 + 1e-12)])


def _hofstadter(p, t, seed):
    from . import lattice as la

    rep = la.band_chern((p["p"], p["q"]), p["nk"])
    rep2 = la.band_chern((p["p"], p["q"]), p["nk"], redecorate=np.random.default_rng(seed))
    dio = [la.diophantine_chern((p["p"], p["q"]), n + 1) for n in range(p["q"])] if not rep.touching else []
    raw_dev = max(abs(x - round(x)) for x in rep.raw) if not rep.touching else float("nan")
    checks = [close("total_zero", rep.total, 0, 0.0),
              below("gauge_redecoration", float(np.abs(np.array(rep.raw) - np.array(rep2.raw)).max()), 1e-12)]
    if rep.touching:
        checks.append(truth("touching_flagged", True, note=f"touching pairs {rep.touching}"))
    else:
        checks.append(below("integrality", raw_dev, t["integrality"]))
        checks.append(truth("matches_diophantine", rep.per_band == dio))
    if p["sweep_q_max"] > 0:
        ok, bad = _sweep(p["sweep_q_max"], p["nk"])
        checks.append(truth("sweep", ok, note="; ".join(bad)))
    g = la.band_grid((p["p"], p["q"]), p["nk"])
    rows = [[float(kx), float(ky), *map(float, g.energies[i, j])] for i, kx in enumerate(g.kx)
            for j, ky in enumerate(g.ky)]
    head = ["kx", "ky"] + [f"E{n}" for n in range(p["q"])]
    return Outcome({"per_band": (rep.per_band, "1"), "diophantine": (dio, "1"), "raw": (rep.raw, "1"),
                    "gaps": (rep.gaps, "energy")}, checks, {"report": rep.to_record()}, {"bands": (head, rows)})


def _sweep(q_max, nk):
    from math import gcd

    from . import lattice as la

    bad = []
    for q in range(1, q_max + 1):
        for pp in range(1, q):
            if gcd(pp, q) != 1:
                continue
            rep = la.band_chern((pp, q), nk)
            cum = 0
            for a, b, c in rep.groups:
                cum += c
                if b < q - 1 and la.gap_label((pp, q), b + 1) != cum:
                    bad.append(f"{pp}/{q} gap {b + 1}")
    return not bad, bad


def _kubo(p, t, seed):
    from . import lattice as la

    f = (p["p"], p["q"])
    rep = la.band_chern(f, p["nk"])
    kr = la.kubo_converged(f, p["nk"])
    sig = float(kr.per_band[: p["fermi_index"]].sum())
    chern = sum(c for a, b, c in rep.groups if b < p["fermi_index"])
    per_dev = float(np.abs(kr.per_band - np.array(rep.raw)).max()) if not rep.touching else float("nan")
    return Outcome({"sigma": (sig, "e^2/h"), "chern_sum": (chern, "1"), "kubo_per_band": (kr.per_band.tolist(), "1"),
                    "mesh": (kr.nk, "1")},
                   [close("kubo_vs_chern", sig, chern, t["kubo"]), below("per_band", per_dev, t["kubo"])],
                   {"refinement_change": kr.refinement_change})


def _pseudorotation(p, t, seed):
    from . import pseudorotation as ps

    fr = lambda s: Fraction(s)  # noqa: E731
    ms = ps.half_integral_m(fr(p["m_abs_max"]))
    lv = ps.level_table(fr(p["omega_rho"]), fr(p["inertia"]), fr(p["omega_z"]), p["j_max"], p["k_max"], ms)
    half = ps.fit_levels(lv)
    whole = ps.fit_levels(lv, integer_m=True)
    rows = [[r.j, str(r.m), r.k, str(r.energy), float(r.energy)] for r in lv]
    return Outcome(
        {"levels": (len(lv), "1"), "half_integer_residual": (str(half.residual), "energy^2"),
         "integer_residual": (str(whole.residual), "energy^2")},
        [truth("half_integral_m", all((r.m - Fraction(1, 2)).denominator == 1 for r in lv)),
         truth("exact_fit", half.residual == 0),
         truth("integer_fit_worse", whole.residual > half.residual)],
        {"fit": half.to_record(), "integer_fit": whole.to_record()},
        {"levels": (["j", "m", "k", "energy", "energy_float"], rows)})


# ---------------------------------------------------------------------------
# catalog


CATALOG: dict[str, Scenario] = {s.name: s for s in [
    Scenario("spin-cone", "spin-1/2 carried around a cone of field directions", "solid-angle phase of a spin-1/2",
             (P("theta0", "float", math.pi / 3, "cone colatitude"),
              P("n_points", "int", 400, "loop samples for the discrete product"),
              P("ode", "bool", True, "also propagate and extrapolate in epsilon"),
              P("epsilons", "floats", [0.04, 0.02, 0.01], "adiabaticity parameters")),
             (P("phase", "float", 1e-4, "discrete vs exact"), P("ode", "float", 1e-2, "extrapolated ODE vs exact")),
             _spin_cone, {"scan": ["epsilon", "leakage", "beta_g", "phase_error"]}),
    Scenario("monopole-census", "curvature flux through a closed surface counts degeneracies",
             "degeneracies as monopoles of curvature",
             (P("radius", "float", 1.0, "sphere radius"), P("center", "floats", [0.0, 0.0, 0.0], "sphere center"),
              P("subdivisions", "int", 2, "icosphere level"),
              P("orientation", "str", "positive", "sign of det dF/dR", ("positive", "negative"))),
             (P("residual", "float", 1e-3 * 2 * math.pi, "flux residual after refinement"),), _monopole),
    Scenario("curvature-methods", "three independent curvature formulas on a random family",
             "curvature by perturbation sum, projector and connection curl",
             (P("dim", "int", 4, "Hilbert space dimension"), P("level", "int", 1, "level index"),
              P("n_points", "int", 50, "random nondegenerate points")),
             (P("relative", "float", 1e-6, "max relative disagreement"),), _curvature_methods,
             {"points": ["X", "Y", "Z", "fd_x", "fd_y", "fd_z", "ps_x", "ps_y", "ps_z", "dm_x", "dm_y", "dm_z",
                         "rel_dev"]}),
    Scenario("wilson-nqr", "holonomy of the spin-3/2 quadrupole doublet", "nonabelian holonomy of a Kramers doublet",
             (P("theta0", "float", 0.7, "cone colatitude of the axis"), P("omega_q", "float", 1.0, "quadrupole scale"),
              P("n_points", "int", 200, "loop samples")),
             (P("off_diagonal", "float", 1e-8, "off-diagonal magnitude"), P("phase", "float", 1e-6, "eigenphases"),
              P("reduction", "float", 1e-8, "rank-one vs abelian"), P("remix", "float", 1e-10, "gauge remix")),
             _wilson_nqr),
    Scenario("aa-phase", "cyclic evolution phase of a precessing spin", "phase of a cyclic evolution",
             (P("theta", "float", 1.0, "initial polar angle"), P("omega", "float", 1.0, "precession frequency"),
              P("warp", "float", 0.5, "clock modulation depth (|warp| < 1)"),
              P("n_steps", "int", 16000, "initial step count (discrete dynamical phase error ~ steps^-2)")),
             (P("value", "float", 1e-6, "vs closed form"), P("reparam", "float", 1e-8, "clock invariance"),
              P("geodesic", "float", 1e-6, "open path vs geodesic closure")), _aa_phase),
    Scenario("superadiabatic", "superadiabatic frame iteration on a sech field pulse",
             "asymptotic series of geometric phase corrections",
             (P("epsilon", "float", 0.05, "adiabaticity"), P("k_max", "int", 30, "iterations"),
              P("precision_bits", "int", 256, "mantissa bits (<= 53 uses doubles)"),
              P("grid", "int", 4096, "Fourier grid size (power of two)"), P("half_width", "float", 80.0, "tau range"),
              P("cutoff", "float", 60.0, "spectral filter wavenumber"),
              P("truncation", "int", 0, "truncation order (0 = optimal)")),
             (P("index", "float", 0.3, "relative tolerance on the optimal index"),
              P("slope", "float", 0.3, "relative tolerance on the ratio slope")), _superadiabatic,
             {"terms": ["k", "gamma_k", "ratio_next"]}),
    Scenario("geometric-amplitude", "exponentially small transition probabilities and their prefactor",
             "geometric amplitude from a complex degeneracy",
             (P("a", "float", 1.2, "helix radius"), P("omega", "float", 0.05, "helix twist"),
              P("A", "float", 1.0, "sweep rate"),
              P("epsilons", "floats", [0.1, 0.12, 0.14, 0.17, 0.2, 0.25], "adiabaticity values"),
              P("lz_a", "float", 0.8, "Landau-Zener gap field"), P("lz_A", "float", 1.0, "Landau-Zener sweep"),
              P("lz_epsilons", "floats", [0.15, 0.2, 0.25, 0.3, 0.35, 0.4], "Landau-Zener adiabaticity values"),
              P("tau_max", "float", 8.0, "half-duration of the sweep")),
             (P("relative", "float", 0.1, "helix estimate vs closed form"), P("lz", "float", 0.05, "|LZ intercept|")),
             _amplitude, {"helix_fit": ["epsilon", "lnP"]}),
    Scenario("nmr-shift", "precession line shift from a conically modulated field", "NMR frequency shift",
             (P("omega_rot", "float", 10.0, "precession frequency"), P("theta", "float", 0.6, "cone half-angle"),
              P("T", "float", 20.0, "modulation period"), P("cycles", "int", 40, "modulation periods recorded")),
             (P("bins", "float", 1.0, "tolerance in FFT bins"),), _nmr, {"spectrum_T": ["omega", "magnitude"]}),
    Scenario("tycko", "spin-3/2 quadrupole spectrum under sample rotation", "NQR sidebands under rotation",
             (P("omega_q", "float", 1.0, "quadrupole frequency"), P("omega_r", "float", 0.02, "rotation frequency"),
              P("tilt_deg", "float", math.degrees(MAGIC_ANGLE), "axis tilt in degrees"),
              P("n_periods", "int", 12, "rotation periods"), P("samples_per_period", "int", 4096, "samples")),
             (P("bins", "float", 1.0, "tolerance in FFT bins"),), _tycko, {"spectrum": ["omega", "magnitude"]}),
    Scenario("hannay-oscillator", "Hannay angle of the generalized oscillator", "classical angle holonomy",
             (P("Z0", "float", 1.0, "cycle height"), P("rho", "float", 0.5, "cycle radius"),
              P("actions", "floats", [0.5, 1.0, 2.0], "actions for the connection method"),
              P("T", "float", 800.0, "cycle duration (also run at 2T)"),
              P("steps_per_unit", "float", 100.0, "integrator steps per unit time"),
              P("curvature_points", "int", 5, "random points for the curvature check")),
             (P("methods", "float", 1e-3, "method agreement"), P("action", "float", 1e-6, "relative spread over I"),
              P("curvature", "float", 1e-3, "pointwise curvature")), _hannay,
             {"curvature": ["X", "Y", "Z", "Vx", "Vy", "Vz", "Vx_ref", "Vy_ref", "Vz_ref", "rel_dev"]}),
    Scenario("bead", "bead slip on a slowly turned loop", "geometric slip of a bead",
             (P("curve", "str", "ellipse", "loop shape", ("ellipse", "circle", "stadium", "file")),
              P("a", "float", 2.0, "semi-axis / radius / straight length"), P("b", "float", 1.0, "semi-axis / radius"),
              P("file", "str", "", "CSV of x,y points for curve = file"),
              P("T", "float", 1200.0, "rotation time (also run at 2T)")),
             (P("slip", "float", 0.01, "relative slip tolerance"), P("drift", "float", 0.01, "max action drift"),
              P("halving", "float", 0.4, "tolerance on drift ratio 2")), _bead,
             {"runs": ["T", "slip", "analytic", "action_drift"]}),
    Scenario("foucault", "pendulum swing plane over one day", "Foucault precession",
             (P("alpha", "float", math.pi / 4, "colatitude"), P("day", "float", 200.0, "day length"),
              P("omega0", "float", 2 * math.pi, "pendulum frequency")),
             (P("relative", "float", 0.01, "relative tolerance"),), _foucault),
    Scenario("rigid-body", "free asymmetric top over one period of L", "rigid-body reconstruction phase",
             (P("inertia", "floats", [1.0, 2.0, 3.0], "principal moments"),
              P("L0", "floats", [0.3, 0.5, 0.8], "initial body angular momentum")),
             (P("identity", "float", 1e-4, "phase identity residual"), P("conservation", "float", 1e-8, "E and |L|")),
             _rigid),
    Scenario("falling-cat", "reorientation at zero angular momentum by shape change", "falling cat",
             (P("amplitude", "float", 0.35, "shape deformation size"), P("warp", "float", 0.5, "clock warp depth"),
              P("slow_factor", "float", 3.0, "duration of the second run")),
             (P("rate", "float", 1e-8, "rate invariance and retrace"), P("oracle", "float", 1e-4, "vs oracle")),
             _cat),
    Scenario("coiled-fiber", "polarization rotation in a helically wound fiber", "fiber polarization holonomy",
             (P("pitch_angle", "float", 0.7, "angle between fiber tangent and helix axis"),
              P("n_points", "int", 40000, "direction samples")),
             (P("helix", "float", 1e-4, "rotation vs solid angle"), P("planar", "float", 1e-6, "planar rotation")),
             _fiber),
    Scenario("pancharatnam-triangle", "phase of a triangle of polarization states", "Pancharatnam phase",
             (P("a", "floats", [1.0, 0.0, 0.0], "Poincare point A"), P("b", "floats", [0.0, 1.0, 0.0], "Poincare point B"),
              P("c", "floats", [0.0, 0.0, 1.0], "Poincare point C")),
             (P("phase", "float", 1e-6, "phase vs -solid angle / 2"),), _pancharatnam),
    Scenario("hofstadter-chern", "Chern numbers of Harper bands", "quantized Hall bands at rational flux",
             (P("p", "int", 1, "flux numerator"), P("q", "int", 3, "flux denominator"), P("nk", "int", 24, "mesh"),
              P("sweep_q_max", "int", 6, "also sweep all p/q with q up to this (0 = off)")),
             (P("integrality", "float", 1e-6, "raw deviation from integers"),), _hofstadter,
             {"bands": ["kx", "ky", "E0..E(q-1)"]}),
    Scenario("kubo", "Hall conductance from the Kubo curvature sum", "Kubo formula",
             (P("p", "int", 1, "flux numerator"), P("q", "int", 3, "flux denominator"),
              P("nk", "int", 24, "starting mesh"), P("fermi_index", "int", 1, "filled bands")),
             (P("kubo", "float", 1e-6, "Kubo vs Chern"),), _kubo),
    Scenario("pseudorotation-levels", "level table with half-integral pseudorotation quantum number",
             "sign change around a conical intersection",
             (P("omega_rho", "str", "3/2", "radial frequency (exact rational)"),
              P("inertia", "str", "2", "pseudorotation moment (exact rational)"),
              P("omega_z", "str", "5/7", "out-of-plane frequency (exact rational)"),
              P("j_max", "int", 1, "radial quanta"), P("k_max", "int", 1, "out-of-plane quanta"),
              P("m_abs_max", "str", "3/2", "largest |m|")),
             (), _pseudorotation, {"levels": ["j", "m", "k", "energy", "energy_float"]}),
]}


def list_scenarios() -> list[dict]:
    return [{"name": s.name, "summary": s.summary, "anchor": s.anchor, "schema": s.schema()}
            for s in CATALOG.values()]


# ---------------------------------------------------------------------------
# config validation and running


TOP_KEYS = {"scenario", "seed", "parameters", "tolerances", "output"}
OUTPUT_KEYS = {"directory", "formats"}
FORMATS = ("json", "csv")


@dataclass
class ScenarioConfig:
    scenario: str
    parameters: dict
    tolerances: dict
    seed: int
    out_dir: str | None
    formats: tuple


def _section(doc, key, allowed: tuple, where):
    raw = doc.get(key, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"[{key}] must be a table")
    names = {p.name: p for p in allowed}
    extra = sorted(set(raw) - set(names))
    if extra:
        raise ConfigError(f"unknown key(s) in [{key}]: {extra}; allowed: {sorted(names)}")
    out = {}
    for p in allowed:
        out[p.name] = p.coerce(raw[p.name], where) if p.name in raw else p.default
    return out


def validate_config(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a table")
    extra = sorted(set(doc) - TOP_KEYS)
    if extra:
        raise ConfigError(f"unknown top-level key(s): {extra}; allowed: {sorted(TOP_KEYS)}")
    name = doc.get("scenario")
    if not isinstance(name, str):
        raise ConfigError("missing 'scenario' name")
    if name not in CATALOG:
        raise ConfigError(f"unknown scenario {name!r}; run 'holab list'")
    sc = CATALOG[name]
    params = _section(doc, "parameters", sc.params, "parameters")
    tols = _section(doc, "tolerances", sc.tolerances, "tolerances")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    out = doc.get("output", {})
    if not isinstance(out, dict):
        raise ConfigError("[output] must be a table")
    bad = sorted(set(out) - OUTPUT_KEYS)
    if bad:
        raise ConfigError(f"unknown key(s) in [output]: {bad}")
    fmts = out.get("formats", list(FORMATS))
    fmts = _formats(fmts)
    od = out.get("directory")
    if od is not None and not isinstance(od, str):
        raise ConfigError("output.directory must be a string")
    return ScenarioConfig(name, params, tols, seed, od, fmts)


def _formats(fmts) -> tuple:
    if isinstance(fmts, str):
        fmts = [f.strip() for f in fmts.split(",") if f.strip()]
    if not isinstance(fmts, list) or not fmts or any(f not in FORMATS for f in fmts):
        raise ConfigError(f"formats must be a non-empty subset of {list(FORMATS)}")
    return tuple(f for f in FORMATS if f in fmts)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    if isinstance(x, Fraction):
        return str(x)
    return x


@dataclass
class RunResult:
    report: dict
    tables: dict
    wall_time: float

    @property
    def passed(self) -> bool:
        return bool(self.report["pass"])


def run(cfg: ScenarioConfig) -> RunResult:
    sc = CATALOG[cfg.scenario]
    t0 = time.perf_counter()
    out = sc.runner(cfg.parameters, cfg.tolerances, cfg.seed)
    wall = time.perf_counter() - t0
    report = {
        "scenario": sc.name,
        "anchor": sc.anchor,
        "inputs": {"parameters": cfg.parameters, "tolerances": cfg.tolerances, "seed": cfg.seed},
        "results": {k: {"value": v, "unit": u} for k, (v, u) in out.results.items()},
        "expectations": [c.to_record() for c in out.checks],
        "diagnostics": out.diagnostics,
        "pass": all(c.passed for c in out.checks),
    }
    return RunResult(_plain(report), out.tables, wall)


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def table_csv(headers, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(headers)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def emit(result: RunResult, out_dir, formats=FORMATS) -> list[Path]:
    """Write report.json, one CSV per table and timing.json (wall time kept apart for byte-stable reports)."""
    d = Path(out_dir)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise HolabError(f"cannot create output directory {d}: {exc}") from exc
    written = []

    def put(name, text):
        path = d / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise HolabError(f"cannot write {path}: {exc}") from exc
        written.append(path)

    if "json" in formats:
        put("report.json", report_json(result.report))
    if "csv" in formats:
        for stem, (head, rows) in sorted(result.tables.items()):
            put(f"{stem}.csv", table_csv(head, rows))
    put("timing.json", json.dumps({"wall_time_s": round(result.wall_time, 6)}, sort_keys=True) + "\n")
    return written
