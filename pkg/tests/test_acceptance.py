"""Acceptance criteria, one test each, each printing a PASS/FAIL line.

Scenario-backed criteria run the shipped configs under scenarios/ through the
same code path as ``holab run`` and then re-check the numbers here against the
stated tolerances, independently of the scenario's own expectations.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from holab import abelian as ab, nonabelian as na, spectral as sp
from holab import classical as cl
from holab import scenarios as sc
from holab.config import load_structured

from conftest import VERDICTS

CONFIGS = Path(__file__).resolve().parents[1] / "scenarios"


def verdict(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    VERDICTS.append(line)
    assert ok, line


def scenario(name, **params):
    doc = load_structured(CONFIGS / f"{name}.toml")
    doc.pop("output", None)
    doc["parameters"] = dict(doc.get("parameters", {}), **params)
    t0 = time.perf_counter()
    res = sc.run(sc.validate_config(doc))
    return res.report, time.perf_counter() - t0


def val(rep, key):
    return rep["results"][key]["value"]


def checks(rep):
    return {e["name"]: e["pass"] for e in rep["expectations"]}


def test_c01_spin_cone():
    rep, dt = scenario("spin-cone", theta0=np.pi / 3, n_points=400)
    exact = -np.pi / 2
    d_disc = abs(val(rep, "geometric_phase") - exact)
    d_ode = abs(val(rep, "ode_extrapolated") - exact)
    ok = d_disc < 1e-4 and d_ode < 1e-2 and dt < 10 and abs(val(rep, "exact") - exact) < 1e-15
    verdict(1, ok, f"discrete err {d_disc:.2e}, ODE err {d_ode:.2e}, {dt:.1f} s")


def test_c02_monopole_census():
    pos, _ = scenario("monopole-census", orientation="positive")
    neg, _ = scenario("monopole-census", orientation="negative")
    hist = pos["diagnostics"]["flux_history"]
    before = abs(hist[0] - 2 * np.pi)
    after = val(pos, "residual")
    ok = (val(pos, "charge") == 1 and val(neg, "charge") == -1
          and before < 0.05 * 2 * np.pi and after < 1e-3 * 2 * np.pi)
    verdict(2, ok, f"charges {val(pos, 'charge')}/{val(neg, 'charge')}, residual {before:.3e} -> {after:.3e}")


def test_c03_curvature_methods():
    rep, _ = scenario("curvature-methods", dim=4, n_points=50)
    worst = val(rep, "max_relative_disagreement")
    ok = worst < 1e-6 and rep["diagnostics"]["points"] == 50
    verdict(3, ok, f"max relative disagreement {worst:.2e} over 50 points")


def test_c04_time_reversal():
    fam = sp.real_planar()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        loop = sp.circle_loop(rng.uniform(-1, 1, 3), rng.uniform(0.1, 0.5), rng.normal(size=3), 128)
        ph = ab.berry_phase_loop(fam, 0, loop).phase
        worst = max(worst, min(abs(ph), abs(abs(ph) - np.pi)))
    around = [ab.berry_phase_loop(fam, 0, sp.circle_loop([0, 0, z], r, (0, 0, 1), 128)).phase
              for z, r in ((0.3, 0.5), (-0.4, 0.2))]
    d_pi = max(abs(abs(x) - np.pi) for x in around)
    verdict(4, worst < 1e-6 and d_pi < 1e-6, f"max distance to {{0, pi}} {worst:.2e}; encircling loops off pi by {d_pi:.2e}")


def test_c05_wilson_loops():
    rep, _ = scenario("wilson-nqr")
    red = val(rep, "abelian_reduction_error")
    off = val(rep, "off_diagonal")
    remix = val(rep, "remix_spectrum_deviation")
    # infinitesimal loop: U = 1 - i (V.n) dS + O(h^3)
    Q = sp.quadrupole(1.0)
    R0 = np.array([0.3, -0.2, 0.9])
    n = np.array([0.4, 0.5, 0.76])
    n /= np.linalg.norm(n)
    Vn = np.einsum("i,ijk->jk", n, na.curvature_matrix(Q, [0, 1], R0).V)
    hs = (0.02, 0.01, 0.005)
    scaled = []
    for h in hs:
        U = na.wilson_loop(Q, [0, 1], sp.circle_loop(R0, h / np.sqrt(np.pi), n, 64), tol=1e-10).U
        scaled.append(np.abs(U - (np.eye(2) - 1j * Vn * h * h)).max() / h**3)
    cubic = max(scaled) / min(scaled) < 1.2
    ok = red < 1e-8 and off < 1e-8 and remix < 1e-10 and cubic
    verdict(5, ok, f"r=1 {red:.1e}, off-diag {off:.1e}, remix {remix:.1e}, "
                   f"remainder/h^3 {', '.join(f'{x:.3f}' for x in scaled)}")


def test_c06_aa_phase_and_pancharatnam():
    rep, _ = scenario("aa-phase")
    rp = abs(ab.wrap(val(rep, "beta_g") - val(rep, "beta_g_warped")))
    geo = abs(ab.wrap(val(rep, "open_beta_g") - val(rep, "geodesic_closed_phase")))
    tri, _ = scenario("pancharatnam-triangle")
    d_tri = abs(val(tri, "phase") + np.pi / 4)
    ok = rp < 1e-8 and geo < 1e-6 and d_tri < 1e-6
    verdict(6, ok, f"reparameterization {rp:.1e}, geodesic closure {geo:.1e}, octant err {d_tri:.1e}")


def test_c07_superadiabatic():
    rep, _ = scenario("superadiabatic", epsilon=0.05)
    c = checks(rep)
    k = val(rep, "optimal_k")
    slope = val(rep, "order_ratio_slope")
    gain = val(rep, "error_k0") / val(rep, "error_truncated")
    ok = (c["decrease_then_increase"] and abs(k - 20) <= 0.3 * 20 and abs(slope - 0.05) <= 0.3 * 0.05
          and gain >= 10)
    verdict(7, ok, f"optimal k {k} (1/eps = 20), ratio slope {slope:.4f}, truncation gain {gain:.1f}x")


def test_c08_geometric_amplitude():
    rep, dt = scenario("geometric-amplitude")
    est, target = val(rep, "gamma_estimate"), val(rep, "closed_form")
    rel = abs(est - target) / abs(target)
    r2 = val(rep, "r2")
    lz = abs(val(rep, "lz_intercept"))
    n_eps = len(rep["inputs"]["parameters"]["epsilons"])
    ok = rel < 0.1 and r2 > 0.99 and n_eps >= 5 and lz < 0.05 and dt < 300
    verdict(8, ok, f"helix rel err {rel:.3f}, r2 {r2:.5f} over {n_eps} eps, LZ {lz:.3f}, {dt:.1f} s")


def test_c09_hannay():
    rep, _ = scenario("hannay-oscillator", actions=[0.5, 1.0, 2.0])
    curv = val(rep, "curvature_deviation")
    spread = val(rep, "action_spread")
    meth = abs(val(rep, "trajectory") - val(rep, "connection"))
    ok = curv < 1e-3 and spread < 1e-6 and meth < 1e-3
    verdict(9, ok, f"curvature {curv:.1e}, action spread {spread:.1e}, methods {meth:.1e}")


def test_c10_bead():
    rep, _ = scenario("bead", curve="ellipse", a=2.0, b=1.0)
    C, A = val(rep, "circumference"), val(rep, "area")
    # -4 pi A / C^2 times C / 2 pi is per radian of turn; one full turn gives -4 pi A / C
    formula = -4 * np.pi * A / C**2 * (C / (2 * np.pi)) * 2 * np.pi
    rel = abs(val(rep, "slip") - formula) / abs(formula)
    d1, d2 = val(rep, "action_drift_T"), val(rep, "action_drift_2T")
    circ = cl.bead_slip(cl.circle_curve(1.0), 200.0)
    c_rel = abs(circ.slip + circ.circumference) / circ.circumference
    ok = rel < 0.01 and d1 < 0.01 and abs(d1 / d2 - 2) < 0.4 and c_rel < 0.01
    verdict(10, ok, f"ellipse slip rel err {rel:.1e}, drift {d1:.4f} -> {d2:.4f}, circle rel err {c_rel:.1e}")


def test_c11_foucault():
    rep, _ = scenario("foucault", alpha=np.pi / 4)
    h = val(rep, "holonomy")
    target = 2 * np.pi * (1 - np.cos(np.pi / 4))
    rel = abs(h - target) / target
    verdict(11, rel < 0.01 and abs(target - 1.8403) < 1e-4, f"precession {h:.5f} vs {target:.5f} (rel {rel:.1e})")


def test_c12_rigid_body():
    rep, _ = scenario("rigid-body")
    res = val(rep, "identity_residual")
    c = checks(rep)
    ok = res < 1e-4 and c["energy_conservation"] and c["momentum_conservation"]
    assert rep["inputs"]["tolerances"]["conservation"] <= 1e-8
    verdict(12, ok, f"identity residual {res:.1e}; E and |L| conserved to 1e-8")


def test_c13_falling_cat():
    rep, _ = scenario("falling-cat")
    rate, orc, ret = val(rep, "rate_deviation"), val(rep, "oracle_deviation"), val(rep, "retrace_deviation")
    ok = rate < 1e-8 and orc < 1e-4 and ret < 1e-8 and val(rep, "rotation_angle") > 1e-3
    verdict(13, ok, f"rate {rate:.1e}, oracle {orc:.1e}, retrace {ret:.1e}")


def test_c14_coiled_fiber():
    rep, _ = scenario("coiled-fiber")
    dev = abs(ab.wrap(val(rep, "rotation") - val(rep, "solid_angle")))
    flat = abs(val(rep, "planar_rotation"))
    verdict(14, dev < 1e-4 and flat < 1e-6, f"helix {dev:.1e} rad, planar {flat:.1e} rad")


def test_c15_hofstadter_kubo():
    t0 = time.perf_counter()
    rep, _ = scenario("hofstadter-chern", p=1, q=3, nk=24, sweep_q_max=6)
    kub, _ = scenario("kubo", p=1, q=3)
    dt = time.perf_counter() - t0
    raw = np.array(val(rep, "raw"))
    per = val(rep, "per_band")
    dev = float(np.abs(raw - np.rint(raw)).max())
    kdev = float(np.abs(np.array(val(kub, "kubo_per_band")) - raw).max())
    c = checks(rep)
    ok = (dev < 1e-6 and per == val(rep, "diophantine") and sum(per) == 0 and kdev < 1e-6
          and c["sweep"] and dt < 120)
    verdict(15, ok, f"per band {per}, raw dev {dev:.1e}, Kubo dev {kdev:.1e}, sweep q<=6 ok, {dt:.1f} s")


def test_c16a_nmr_and_tycko_sqrt3():
    rep, _ = scenario("nmr-shift")
    c = checks(rep)
    ty, _ = scenario("tycko")
    offs = val(ty, "peak_offsets")
    b = val(ty, "bin_width")
    dev = max(abs(o - e) for o, e in zip(offs, (-np.sqrt(3), 0.0, np.sqrt(3))))
    ok = c["shift_T"] and c["shift_2T"] and c["halving"] and dev <= b
    verdict("16a", ok, f"NMR shift {val(rep, 'shift_T'):.5f} vs {val(rep, 'predicted_T'):.5f}, "
                       f"ratio T/2T {val(rep, 'shift_T') / val(rep, 'shift_2T'):.3f}; "
                       f"Tycko offsets {[round(o, 3) for o in offs]} omega_r vs +-sqrt(3) within {b:.3f}")


@pytest.mark.xfail(strict=True, reason="+-sqrt(3)/pi omega_r sidebands are not produced at any tilt; see ledger")
def test_c16b_tycko_literal_coefficient():
    ty, _ = scenario("tycko")
    offs = val(ty, "peak_offsets")
    b = val(ty, "bin_width")
    dev = max(abs(o - e) for o, e in zip(offs, (-np.sqrt(3) / np.pi, 0.0, np.sqrt(3) / np.pi)))
    verdict("16b", dev <= b, f"Tycko offsets {[round(o, 3) for o in offs]} omega_r vs +-sqrt(3)/pi "
                             f"= +-{np.sqrt(3) / np.pi:.3f}: off by {dev:.3f} > bin {b:.3f}")


def test_c17_pseudorotation():
    rep, _ = scenario("pseudorotation-levels")
    c = checks(rep)
    from fractions import Fraction
    half = Fraction(val(rep, "half_integer_residual"))
    whole = Fraction(val(rep, "integer_residual"))
    ok = c["half_integral_m"] and half == 0 and whole > half
    verdict(17, ok, f"{val(rep, 'levels')} levels, half-integral residual {half}, integer-m residual {whole}")
