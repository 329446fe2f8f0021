import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holab import abelian as ab, spectral as sp
from holab.errors import DegeneracyError, GeometryError, IllConditionedOverlapError

SPIN_CONE = -np.pi / 2  # -pi (1 - cos pi/3)


def _rand_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def test_discrete_phase_trivial_cases():
    rng = np.random.default_rng(0)
    a, b = _rand_state(rng, 3), _rand_state(rng, 3)
    assert ab.berry_phase_discrete([a, b], closed=False).phase == pytest.approx(0, abs=1e-14)
    assert ab.berry_phase_discrete([a, a, a, a]).phase == pytest.approx(0, abs=1e-14)


def test_spin_cone_discrete():
    z = sp.zeeman()
    ph = ab.berry_phase_discrete(ab.loop_states(z, 1, sp.colatitude_loop(np.pi / 3, n=400))).phase
    assert ph == pytest.approx(SPIN_CONE, abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_discrete_phase_gauge_invariant(seed):
    rng = np.random.default_rng(seed)
    base = [_rand_state(rng, 3) for _ in range(7)]
    base.append(base[0])
    again = [v * np.exp(1j * rng.uniform(0, 2 * np.pi)) for v in base]
    p1 = ab.berry_phase_discrete(base).phase
    p2 = ab.berry_phase_discrete(again).phase
    assert abs(ab.wrap(p1 - p2)) < 1e-12


def test_ill_conditioned_overlap_names_index():
    a = np.array([1, 0], complex)
    b = np.array([0, 1], complex)
    with pytest.raises(IllConditionedOverlapError) as ei:
        ab.berry_phase_discrete([a, a, b], closed=False)
    assert ei.value.index == 1


def test_connection_monopole_and_real_family():
    A = ab.berry_connection_fd(sp.zeeman(), 1, [1.0, 0.0, 0.0]).A
    assert np.allclose(A, [0, 0.5, 0], atol=1e-8)
    Ar = ab.berry_connection_fd(sp.random_family(3, 2, real=True), 0, [0.1, 0.3, -0.2]).A
    assert np.allclose(Ar, 0, atol=1e-12)


def test_connection_step_richardson():
    fam = sp.random_family(3, 5)
    R = [0.2, -0.1, 0.4]
    a1 = ab.berry_connection_fd(fam, 1, R, step=1e-3).A
    a2 = ab.berry_connection_fd(fam, 1, R, step=5e-4).A
    rich = (4 * a2 - a1) / 3
    assert np.abs(a2 - rich).max() < 1e-6


def test_monopole_curvature_both_levels():
    R = np.array([0.3, 0.4, 1.2])
    ref = R / (2 * np.linalg.norm(R) ** 3)
    for m in ab.METHODS:
        assert np.allclose(ab.berry_curvature(sp.zeeman(), 1, R, m).V, ref, rtol=1e-6)
        assert np.allclose(ab.berry_curvature(sp.zeeman(), 0, R, m).V, -ref, rtol=1e-6)


def test_curvature_refuses_degeneracy():
    with pytest.raises(DegeneracyError):
        ab.berry_curvature(sp.zeeman(), 1, [0, 0, 0])


def test_sum_rule():
    fam = sp.random_family(4, 9)
    R = [0.1, 0.5, -0.3]
    tot = sum(ab.berry_curvature(fam, n, R).V for n in range(4))
    assert np.abs(tot).max() < 1e-8


def test_two_state_generic_closed_form():
    M = np.array([[1.0, 0.2, 0.0], [0.1, 0.8, 0.3], [0.0, -0.2, 1.1]])
    fam = sp.two_state_linear(M, offset=(0.1, 0.0, -0.05))
    R = np.array([0.2, -0.3, 0.5])
    V = ab.berry_curvature(fam, 1, R).V
    assert np.allclose(V, ab.two_state_curvature(M @ R + [0.1, 0, -0.05], M, +1), rtol=1e-6)


def test_census_charges():
    c = ab.degeneracy_census(sp.zeeman(), 1, sp.icosphere(1.0))
    assert c.charge == 1 and c.residual < 1e-3 * 2 * np.pi
    flip = sp.two_state_linear(np.diag([1.0, 1.0, -1.0]))
    assert ab.degeneracy_census(flip, 1, sp.icosphere(1.0)).charge == -1
    assert ab.degeneracy_census(sp.zeeman(), 1, sp.icosphere(0.5, (0, 0, 2.0))).charge == 0


def test_metric_round_sphere_and_zero_direction():
    th = 1.0
    R = np.array([np.sin(th), 0, np.cos(th)])
    g = ab.quantum_metric(sp.zeeman(), 1, R).g
    e_th = np.array([np.cos(th), 0, -np.sin(th)])
    e_ph = np.array([0, 1.0, 0])
    g_thth = e_th @ g @ e_th
    g_phph = np.sin(th) ** 2 * (e_ph @ g @ e_ph)
    assert g_phph / g_thth == pytest.approx(np.sin(th) ** 2, rel=1e-6)
    # radial direction does not change the state
    assert abs(R @ g @ R) < 1e-8


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_metric_psd(seed):
    fam = sp.random_family(3, seed % 1000)
    R = np.random.default_rng(seed).uniform(-1, 1, 3)
    if sp.gap(fam, R, 0) < 1e-2:
        return
    g = ab.quantum_metric(fam, 0, R).g
    assert np.array_equal(g, g.T)
    assert np.linalg.eigvalsh(g).min() > -1e-12


def test_geodesic_endpoints_and_closure():
    rng = np.random.default_rng(4)
    a, b = _rand_state(rng, 3), _rand_state(rng, 3)
    g0, g1 = ab.geodesic_states(a, b, 0.0), ab.geodesic_states(a, b, 1.0)
    assert abs(abs(np.vdot(g0, a)) - 1) < 1e-12 and abs(abs(np.vdot(g1, b)) - 1) < 1e-12
    c = a * np.exp(0.7j)
    assert abs(abs(np.vdot(ab.geodesic_states(a, c, 0.5), a)) - 1) < 1e-12


def test_solid_angles():
    octant = [np.array(v, float) for v in ([1, 0, 0], [0, 1, 0], [0, 0, 1])]
    assert ab.solid_angle_of_loop(octant) == pytest.approx(np.pi / 2, abs=1e-12)
    th = 0.8
    circ = sp.colatitude_loop(th, n=2000).points[:-1]
    assert ab.solid_angle_of_loop(circ) == pytest.approx(2 * np.pi * (1 - np.cos(th)), abs=1e-5)
    with pytest.raises(GeometryError):
        ab.solid_angle_of_loop([np.array([1.0, 0, 0]), np.array([-1.0, 0, 0]), np.array([0, 0, 1.0])])


def test_time_reversal_phases():
    fam = sp.real_planar()
    rng = np.random.default_rng(1)
    for _ in range(10):
        loop = sp.circle_loop(rng.uniform(-1, 1, 3), rng.uniform(0.1, 0.4), rng.normal(size=3), 128)
        ph = ab.berry_phase_loop(fam, 0, loop).phase
        assert min(abs(ph), abs(abs(ph) - np.pi)) < 1e-6
    around = ab.berry_phase_loop(fam, 0, sp.circle_loop([0, 0, 0.3], 0.5, (0, 0, 1), 128)).phase
    assert abs(abs(around) - np.pi) < 1e-6
