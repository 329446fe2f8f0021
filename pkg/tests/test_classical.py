import numpy as np
import pytest
from scipy.integrate import quad

from holab import classical as cl
from holab.abelian import wrap
from holab.errors import DomainError, GeometryError, SingularityError


def test_action_harmonic_and_generalized():
    assert cl.action(cl.harmonic_oscillator(2.0), 3.0, [0, 0, 0]) == pytest.approx(1.5, rel=1e-8)
    assert cl.action(cl.generalized_oscillator(), 1.0, [0, 0, 1.0]) == pytest.approx(1.0, rel=1e-8)


def test_action_quartic_against_quadrature():
    E = 0.8
    # H = q^2/2 + q^4/4 + p^2/2
    qmax = np.sqrt(-1 + np.sqrt(1 + 4 * E))
    ref = 2 * quad(lambda q: np.sqrt(max(2 * (E - q * q / 2 - q**4 / 4), 0.0)), -qmax, qmax)[0] / (2 * np.pi)
    assert cl.action(cl.quartic_oscillator(), E, [1.0, 1.0, 0.0]) == pytest.approx(ref, rel=1e-6)


def test_oscillator_curvature_pointwise():
    S = cl.generalized_oscillator()
    for R in ([0.2, -0.1, 1.3], [0.0, 0.5, 1.1]):
        V = cl.hannay_curvature(S, 1.0, R)
        Vx = cl.oscillator_curvature(1.0, R)
        assert np.linalg.norm(V - Vx) / np.linalg.norm(Vx) < 1e-4


def test_connection_matches_cone_formula():
    S = cl.generalized_oscillator()
    Z0, rho = 1.0, 0.5
    cyc = lambda s: (rho * np.cos(2 * np.pi * s), rho * np.sin(2 * np.pi * s), Z0)  # noqa: E731
    assert cl.hannay_connection(S, 1.0, cyc).unwrapped == pytest.approx(
        cl.oscillator_hannay_angle_cone(Z0, rho), abs=1e-4)
    with pytest.raises(DomainError):
        cl.oscillator_hannay_angle_cone(1.0, 1.2)


def test_in_plane_cycle_has_no_angle():
    # Y = 0 keeps the orbit family real symmetric: zero connection flux
    S = cl.generalized_oscillator()
    cyc = lambda s: (0.3 * np.cos(2 * np.pi * s), 0.0, 1.0 + 0.3 * np.sin(2 * np.pi * s))  # noqa: E731
    assert abs(cl.hannay_connection(S, 1.0, cyc).unwrapped) < 1e-6


def test_retraced_cycle_trajectory_zero():
    S = cl.generalized_oscillator()

    def cyc(s):
        u = 0.5 * (1 - np.cos(2 * np.pi * s))
        return (0.4 * u, 0.2 * np.sin(np.pi * u), 1.0)

    r = cl.hannay_trajectory_extrapolated(S, 1.0, cyc, 400.0, steps_per_unit=100)
    assert abs(r.angle) < 5e-3


def test_bead_on_circle():
    cur = cl.circle_curve(1.0)
    r = cl.bead_slip(cur, 200.0)
    assert r.slip == pytest.approx(-r.circumference, rel=1e-5)
    assert r.analytic == pytest.approx(-2 * np.pi, rel=1e-6)


def test_bead_analytic_and_self_intersection():
    st = cl.stadium_curve(6.0, 0.1)
    _, _, C = st.arc_parameterization()
    assert cl.bead_slip_analytic(st) == pytest.approx(-4 * np.pi * cl.curve_area(st) / C)
    # thin loop: small area, small slip
    assert abs(cl.bead_slip_analytic(st)) < 0.1 * C
    s = np.linspace(0, 2 * np.pi, 400, endpoint=False) + 0.004
    eight = np.column_stack([np.sin(s), np.sin(s) * np.cos(s)])
    with pytest.raises(GeometryError):
        cl.PlanarCurve(eight)


def test_foucault_closed_form_and_simulation():
    assert cl.foucault_precession(0.0) == 0.0
    assert cl.foucault_precession(np.pi / 2) == pytest.approx(2 * np.pi)
    r = cl.foucault_simulation(np.pi / 3, day=200.0)
    assert r["holonomy"] == pytest.approx(r["predicted"], rel=1e-3)


def test_rigid_body_tops():
    sph = cl.rigid_body_phase([2.0, 2.0, 2.0], [0.3, 0.5, 0.8])
    assert abs(wrap(sph.geometric)) < 1e-8
    L0 = np.array([0.3, 0.4, 0.8])
    sym = cl.rigid_body_phase([1.0, 1.0, 2.0], L0)
    th = np.arccos(L0[2] / np.linalg.norm(L0))
    assert sym.geometric == pytest.approx(cl.symmetric_top_geometric(th), abs=1e-6)
    assert sym.identity_residual < 1e-8


def test_triaxial_identity():
    r = cl.rigid_body_phase([1.0, 2.0, 3.0], [0.3, 0.5, 0.8])
    assert r.identity_residual < 1e-8
    assert r.energy_drift < 1e-10 and r.momentum_drift < 1e-10


def test_frozen_shape_gives_identity():
    still = cl.ShapeCycle(np.array([1.0, 2.0, 1.5]),
                          lambda s: np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, -0.5, 0.3]]))
    assert np.abs(cl.shape_reorientation(still) - np.eye(3)).max() < 1e-9


def test_cat_retrace_and_oracle():
    c = cl.cat_cycle(7, 0.35)
    R = cl.shape_reorientation(c)
    assert cl.rotation_angle(R) > 1e-3
    assert np.abs(R - cl.reorientation_oracle(c)).max() < 1e-8
    assert np.abs(cl.shape_reorientation(cl.retraced(c)) - np.eye(3)).max() < 1e-8


def test_collinear_shape_singular():
    line = cl.ShapeCycle(np.ones(3), lambda s: np.array([[0, 0, 0], [1.0 + 0.1 * s, 0, 0], [2.0, 0, 0]]))
    with pytest.raises(SingularityError):
        cl.body_angular_velocity(line, 0.3)


def test_fiber_rotation():
    h = cl.fiber_rotation(cl.helix_directions(0.7, 40000))
    assert abs(wrap(h["rotation"] - h["solid_angle"])) < 1e-4
    assert h["norm_dev"] < 1e-12 and h["perp_dev"] < 1e-12
    assert abs(cl.fiber_rotation(cl.helix_directions(np.pi / 2, 2000))["rotation"]) < 1e-12


def test_transport_rejects_bad_paths():
    with pytest.raises(GeometryError):
        cl.sphere_parallel_transport([1.0, 0, 0], [[0, 0, 1.0], [0, 0, -1.0]])
    with pytest.raises(DomainError):
        cl.sphere_parallel_transport([0, 0, 1.0], [[0, 0, 1.0], [0, 1.0, 0]])
