import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holab import polarization as po
from holab.errors import DomainError, UndefinedPhaseError


def _state(seed):
    rng = np.random.default_rng(seed)
    return po.PolarizationState.from_vector(rng.normal(size=2) + 1j * rng.normal(size=2))


def test_poles_and_equator():
    assert abs(abs(po.poincare_point(po.PolarizationState.circular(True))[2]) - 1) < 1e-12
    assert abs(po.poincare_point(po.PolarizationState.linear(0.3))[2]) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_orthogonal_states_antipodal(seed):
    a = _state(seed)
    ax, ay = a.jones
    b = po.PolarizationState(np.array([-np.conj(ay), np.conj(ax)]))
    assert np.allclose(po.poincare_point(a), -po.poincare_point(b), atol=1e-12)
    e = po.poincare_point(a)
    back = po.poincare_point(po.PolarizationState.from_poincare(e))
    assert np.allclose(back, e, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(s1=st.integers(0, 10**6), s2=st.integers(0, 10**6), s3=st.integers(0, 10**6))
def test_triangle_minus_half_solid_angle(s1, s2, s3):
    a, b, c = _state(s1), _state(s2), _state(s3)
    try:
        ph = po.triangle_phase(a, b, c)
    except UndefinedPhaseError:
        return
    om = po.poincare_triangle_solid_angle(a, b, c)
    assert abs(np.angle(np.exp(1j * (ph + 0.5 * om)))) < 1e-6


def test_octant_triangle():
    pts = [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
    st_ = [po.PolarizationState.from_poincare(p) for p in pts]
    assert po.triangle_phase(*st_) == pytest.approx(-np.pi / 4, abs=1e-6)


def test_relative_phase_maximizes_intensity():
    a, b = _state(1), _state(2)
    chi = po.pancharatnam_relative_phase(a, b)
    i0 = po.superposed_intensity(a, b, chi)
    for d in (-0.1, 0.1, 1.0):
        assert po.superposed_intensity(a, b, chi + d) < i0
    assert po.pancharatnam_relative_phase(a, a) == 0.0


def test_errors():
    with pytest.raises(UndefinedPhaseError):
        po.pancharatnam_relative_phase(po.PolarizationState.linear(0), po.PolarizationState.linear(np.pi / 2))
    with pytest.raises(DomainError):
        po.PolarizationState(np.array([1.0, 1.0]))
