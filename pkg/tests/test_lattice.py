from math import gcd

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holab import lattice as la
from holab.errors import DegeneracyError, DomainError, LabelError


def test_bloch_matrix_hermitian_and_periodic():
    f = (2, 5)
    k = np.array([0.37, 1.1])
    H = la.harper_hamiltonian(f, k)
    assert np.allclose(H, H.conj().T)
    assert np.allclose(la.harper_hamiltonian(f, k + [2 * np.pi / 5, 0]), H, atol=1e-12)
    assert np.allclose(la.harper_hamiltonian(f, k + [0, 2 * np.pi]), H, atol=1e-12)


def test_flux_validation():
    with pytest.raises(DomainError):
        la.band_chern((2, 4), 8)


def test_one_third():
    rep = la.band_chern((1, 3), 24)
    assert rep.per_band == [1, -2, 1]
    assert rep.total == 0 and not rep.touching


@settings(max_examples=12, deadline=None)
@given(q=st.integers(2, 5), p=st.integers(1, 4))
def test_odd_denominator_matches_diophantine(q, p):
    if p >= q or gcd(p, q) != 1 or q % 2 == 0:
        return
    rep = la.band_chern((p, q), 16)
    assert rep.total == 0
    assert rep.per_band == [la.diophantine_chern((p, q), n + 1) for n in range(q)]
    for r in range(q + 1):
        t = la.gap_label((p, q), r)
        assert (r - p * t) % q == 0 and abs(t) <= q / 2


def test_redecoration_leaves_raw_unchanged():
    a = la.band_chern((2, 5), 16)
    b = la.band_chern((2, 5), 16, redecorate=np.random.default_rng(5))
    assert np.abs(np.array(a.raw) - np.array(b.raw)).max() < 1e-12


def test_even_denominator_touching():
    rep = la.band_chern((1, 4), 24)
    assert rep.touching == [(1, 2)]
    assert rep.per_band[1] is None and rep.groups[1] == (1, 2, -2)
    with pytest.raises(LabelError):
        la.gap_label((1, 4), 2)
    with pytest.raises(DegeneracyError):
        la.kubo_sigma((1, 4), 24, 2)


def test_kubo_agrees_with_plaquettes():
    k = la.kubo_converged((1, 3), 24)
    assert np.allclose(k.per_band, [1, -2, 1], atol=1e-6)
    assert la.kubo_sigma((1, 3), 24, 1) == pytest.approx(1.0, abs=1e-6)
    assert la.kubo_sigma((1, 3), 24, 0) == 0.0


def test_butterfly_bounds():
    rows = la.butterfly(4, nk=2)
    assert np.abs(rows[:, 1]).max() <= 4 + 1e-12
    assert set(np.round(rows[:, 0], 6)) >= {0.0, 0.5, 1.0}
