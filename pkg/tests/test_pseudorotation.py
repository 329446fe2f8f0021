from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from holab import pseudorotation as pr
from holab.errors import DomainError, LabelError


def test_half_integral_labels():
    assert pr.half_integral_m(Fraction(5, 2)) == [Fraction(k, 2) for k in (-5, -3, -1, 1, 3, 5)]
    with pytest.raises(LabelError):
        pr.level_table(1, 1, 1, m_values=(0, 1))


def test_level_energy_exact():
    e = pr.level_energy(1, Fraction(3, 2), 0, Fraction(3, 2), 2, Fraction(5, 7))
    assert e == Fraction(3, 2) * Fraction(3, 2) + Fraction(9, 4) / 4 + Fraction(5, 14)
    with pytest.raises(DomainError):
        pr.level_energy(0, Fraction(1, 2), 0, 1, 0, 1)


def test_fit_recovers_and_integer_fails():
    lv = pr.level_table("3/2", "2", "5/7")
    fit = pr.fit_levels(lv)
    assert fit.residual == 0
    assert (fit.omega_rho, fit.inv_2I, fit.omega_z) == (Fraction(3, 2), Fraction(1, 4), Fraction(5, 7))
    bad = pr.fit_levels(lv, integer_m=True)
    assert bad.residual == Fraction(1, 160)


rat = st.fractions(min_value=Fraction(1, 10), max_value=Fraction(10), max_denominator=50)


@settings(max_examples=30, deadline=None)
@given(w=rat, inertia=rat, wz=rat)
def test_fit_exact_for_random_rationals(w, inertia, wz):
    lv = pr.level_table(w, inertia, wz)
    fit = pr.fit_levels(lv)
    assert fit.residual == 0 and fit.inv_2I == 1 / (2 * inertia)
    assert pr.fit_levels(lv, integer_m=True).residual > 0
