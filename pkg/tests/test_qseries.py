from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petmin.qseries import (
    FormSpace,
    Group,
    QSeries,
    coordinates_in,
    cusp_charts,
    delta_series,
    eisenstein_e4_series,
    gamma0_cusp_basis,
    gamma0_dimension,
    hauptmodul_series,
    integral_cusp_basis,
    j_series,
    sub_basis_indices,
    truncated_sub_basis,
)

TRUNC = 12

coeff = st.fractions(min_value=-50, max_value=50, max_denominator=7)


@st.composite
def series(draw, trunc=TRUNC):
    start = draw(st.integers(min_value=-2, max_value=4))
    cs = draw(st.lists(coeff, min_size=0, max_size=trunc - start))
    return QSeries.make(start, cs, trunc)


def agree(a: QSeries, b: QSeries) -> bool:
    """Equal on every coefficient both series know."""
    top = min(a.trunc_order, b.trunc_order)
    lo = min(a.valuation, b.valuation, top)
    return a.coefficient_list(lo, top) == b.coefficient_list(lo, top)


@given(series(), series())
def test_addition_commutes(a, b):
    assert a + b == b + a


@given(series(), series(), series())
def test_multiplication_associates(a, b, c):
    assert agree((a * b) * c, a * (b * c))


@given(series(), series(), series())
def test_multiplication_distributes(a, b, c):
    assert agree(a * (b + c), a * b + a * c)


@given(series())
def test_one_is_identity_and_subtraction_cancels(a):
    assert agree(a * QSeries.one(TRUNC), a)
    assert (a - a).is_zero()


@given(series(), st.integers(min_value=0, max_value=3))
def test_power_matches_repeated_product(a, e):
    expected = QSeries.one(TRUNC)
    for _ in range(e):
        expected = expected * a
    assert agree(a**e, expected)


@given(series())
def test_json_round_trip(a):
    assert QSeries.from_json(json.loads(json.dumps(a.to_json()))) == a


def test_delta_leading_coefficients():
    d = delta_series(10)
    assert [int(d[n]) for n in range(1, 11)] == [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920]
    assert d.valuation == 1 and d.is_integral()


def test_j_times_delta_is_e4_cubed():
    assert agree(j_series(30) * delta_series(31), eisenstein_e4_series(30) ** 3)


def test_j_coefficients():
    j = j_series(4)
    assert (j[-1], j[0], j[1], j[2], j[3]) == (1, 744, 196884, 21493760, 864299970)


def test_truncated_coefficient_access_raises():
    with pytest.raises(IndexError):
        delta_series(5)[6]


def test_level_one_basis_is_echelon_and_integral():
    sp = integral_cusp_basis(4)
    assert sp.dim == 4
    assert sp.valuations == (4, 3, 2, 1)
    for i, b in enumerate(sp.basis):
        assert b.is_integral()
        assert b[b.valuation] == 1
        for other in sp.valuations[:i]:
            assert b[other] == 0


def test_basis_first_element_is_delta_power():
    sp = integral_cusp_basis(3)
    assert agree(sp.basis[0], delta_series(sp.trunc_order) ** 3)


@pytest.mark.parametrize("level", [2, 3, 5, 7])
def test_gamma0_dimensions(level):
    assert gamma0_cusp_basis(level, 1).dim == gamma0_dimension(level, 1) == level
    assert gamma0_dimension(level, 2) == 2 * (level + 1) - 1


def test_hauptmodul_level_two():
    t = hauptmodul_series(2, 5)
    # (eta(2 tau)/eta(tau))^24 = q + 24 q^2 + 300 q^3 + ...
    assert [int(t[n]) for n in (1, 2, 3)] == [1, 24, 300]


def test_level_one_forms_embed_in_gamma0():
    sp = gamma0_cusp_basis(2, 1)
    c = coordinates_in(sp, delta_series(sp.trunc_order - 1))
    assert c == [Fraction(-24), Fraction(1)]


def test_coordinates_reject_foreign_series():
    sp = integral_cusp_basis(2)
    with pytest.raises(ValueError):
        coordinates_in(sp, delta_series(sp.trunc_order - 1))


def test_truncated_sub_basis_selects_high_vanishing():
    sp = integral_cusp_basis(6)
    sub = truncated_sub_basis(sp, 3)
    assert sub.valuations == (6, 5, 4, 3)
    assert sub_basis_indices(sp, 3) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        truncated_sub_basis(sp, 0)
    with pytest.raises(ValueError):
        truncated_sub_basis(sp, 8)


def test_form_space_json_round_trip():
    sp = integral_cusp_basis(2)
    back = FormSpace.from_json(json.loads(json.dumps(sp.to_json())))
    assert back.basis == sp.basis and back.basis_hash() == sp.basis_hash()


def test_group_parsing():
    assert str(Group.parse("Gamma1")) == "Gamma1"
    assert Group.parse("Gamma0(5)").index == 6
    with pytest.raises(ValueError):
        Group.parse("Gamma0(11)")


def test_cusp_charts_level_two_have_both_widths():
    charts = cusp_charts(gamma0_cusp_basis(2, 1))
    assert sorted(c.width for c in charts) == [1, 2]


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=3, max_size=3))
def test_combination_coordinates_round_trip(coords):
    sp = integral_cusp_basis(3)
    f = sp.combination(coords)
    assert coordinates_in(sp, f) == [Fraction(c) for c in coords]


def test_truncated_sub_basis_dimensions():
    sp = integral_cusp_basis(4)
    assert truncated_sub_basis(sp, 1).dim == 4
    assert truncated_sub_basis(sp, 3).dim == 2
    assert truncated_sub_basis(sp, 5).dim == 0
