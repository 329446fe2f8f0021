import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holab import spectral as sp
from holab.errors import DegeneracyError, DomainError, GeometryError, ModelError


def _herm(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (A + A.conj().T)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 6))
def test_gauge_pivot_real_positive(seed, n):
    es = sp.eigendecompose_matrix(_herm(seed, n))
    H = _herm(seed, n)
    for j in range(n):
        v = es.state(j)
        k = int(np.argmax(np.abs(v)))
        assert abs(v[k].imag) == 0.0 and v[k].real > 0
        assert np.allclose(H @ v, es.energies[j] * v, atol=1e-10)
    assert np.all(np.diff(es.energies) >= 0)


def test_identical_input_bitwise_identical():
    fam = sp.random_family(4, 11)
    a = sp.eigendecompose(fam, [0.2, -0.4, 0.7])
    b = sp.eigendecompose(fam, [0.2, -0.4, 0.7])
    assert a.energies.tobytes() == b.energies.tobytes()
    assert a.states.tobytes() == b.states.tobytes()


def test_zeeman_levels_and_degeneracy():
    z = sp.zeeman()
    es = sp.eigendecompose(z, [0, 0, 2.0])
    assert np.allclose(es.energies, [-1, 1])
    at0 = sp.eigendecompose(z, [0, 0, 0])
    assert at0.is_degenerate(0)
    with pytest.raises(DegeneracyError):
        sp.require_nondegenerate(at0, 0)


def test_family_validation():
    bad = sp.HamiltonianFamily("bad", 2, lambda R: np.array([[0, 1], [0, 0]]))
    with pytest.raises(ModelError):
        bad([0, 0, 0])
    with pytest.raises(DomainError):
        sp.zeeman()([0, 0])
    with pytest.raises(DomainError):
        sp.get_family("nope")


def test_loops_and_surfaces():
    with pytest.raises(GeometryError):
        sp.ParameterLoop(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]]))
    loop = sp.colatitude_loop(0.5, n=16)
    assert loop.refined().n_segments == 32
    assert np.allclose(loop.reversed().points[0], loop.points[-1])
    s = sp.icosphere(1.0, subdivisions=1)
    assert np.allclose(s.area_vectors().sum(0), 0, atol=1e-12)
    with pytest.raises(GeometryError):
        sp.ParameterSurface(s.vertices, s.triangles[:-1])


def test_quadrupole_doublets():
    es = sp.eigendecompose(sp.quadrupole(1.0), [0.3, 0.1, 1.0])
    assert np.allclose(es.energies, [0.25, 0.25, 2.25, 2.25])


def test_coefficient_table(tmp_path):
    p = tmp_path / "fam.toml"
    p.write_text('name = "x"\ndim = 2\n[[term]]\nmonomial = [1, 0, 0]\nreal = [[0, 1], [1, 0]]\n'
                 '[[term]]\nmonomial = [0, 0, 1]\nreal = [[1, 0], [0, -1]]\n')
    fam = sp.load_coefficient_table(p)
    assert np.allclose(fam([0.5, 0, 2.0]), [[2, 0.5], [0.5, -2]])
    p.write_text('name = "x"\ndim = 2\nextra = 1\n')
    with pytest.raises(ModelError):
        sp.load_coefficient_table(p)
