from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from petmin.analytic import GramMatrix, petersson_gram
from petmin.lattice import (
    EnumerationBudgetExceeded,
    HeightedLattice,
    IndefiniteGramError,
    adelic_height,
    filtration_profile,
    integerize,
    lambda_table_rows,
    primitive_rescale,
    sub_quotient_maxima,
    successive_minima,
    write_lambda_table,
)
from petmin.qseries import integral_cusp_basis


def exact(rows):
    return GramMatrix.from_rows(rows)


@st.composite
def pd_forms(draw, dim=3):
    b = draw(st.lists(st.lists(st.integers(-4, 4), min_size=dim, max_size=dim), min_size=dim, max_size=dim))
    m = np.array(b)
    assume(abs(round(np.linalg.det(m))) >= 1)
    return (m.T @ m).tolist()


def test_identity_minima():
    res = successive_minima(exact([[1, 0, 0], [0, 1, 0], [0, 0, 1]]))
    assert res.minima == (1.0, 1.0, 1.0)
    assert res.maxima == (0.0, 0.0, 0.0)


def test_diagonal_minima():
    res = successive_minima(exact([[1, 0], [0, 4]]))
    assert res.minima == (1.0, 2.0)
    assert res.maxima[1] == -math.log(2.0)


def test_hexagonal_minima_are_equal():
    res = successive_minima(exact([[2, 1], [1, 2]]))
    assert res.minima[0] == res.minima[1] == math.sqrt(2)


@settings(max_examples=40, deadline=None)
@given(pd_forms())
def test_minima_satisfy_minkowski_bounds(a):
    res = successive_minima(exact(a))
    det = Fraction(round(np.linalg.det(np.array(a, dtype=float))))
    prod = 1
    for n in res.norms2:
        prod *= Fraction(n, 2**res.shift)
    # det <= prod mu_i^2 <= gamma_3^3 det with gamma_3^3 = 2
    assert det <= prod <= 2 * det
    assert list(res.minima) == sorted(res.minima)


@settings(max_examples=40, deadline=None)
@given(pd_forms())
def test_witnesses_are_independent_and_attain_minima(a):
    res = successive_minima(exact(a))
    w = np.array(res.witnesses)
    assert np.linalg.matrix_rank(w) == 3
    for v, n in zip(res.witnesses, res.norms2):
        assert int(np.array(v) @ np.array(a) @ np.array(v)) << res.shift == n


@settings(max_examples=30, deadline=None)
@given(pd_forms())
def test_profile_agrees_with_minima_on_random_forms(a):
    g = exact(a)
    res = successive_minima(g)
    prof = filtration_profile(g)
    assert sorted(prof.jump_norms2()) == sorted(res.norms2)
    assert prof.dims[-1] == 3


@settings(max_examples=30, deadline=None)
@given(pd_forms(), st.integers(0, 2))
def test_sub_plus_quotient_is_full_multiset(a, axis):
    g = exact(a)
    prof = filtration_profile(g)
    unit = [[1 if j == axis else 0 for j in range(3)]]
    sub, quot = sub_quotient_maxima(g, unit, prof)
    assert len(sub) == 1 and len(quot) == 2
    assert sorted(sub + quot) == sorted(prof.jump_multiset())


def test_sub_quotient_on_diagonal():
    sub, quot = sub_quotient_maxima(exact([[1, 0], [0, 4]]), [[0, 1]])
    assert sub == (-math.log(2.0),)
    assert quot == (0.0,)


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=6))
def test_primitive_rescale(v):
    assume(any(v))
    p = primitive_rescale(v)
    assert math.gcd(*p) == 1
    g = math.gcd(*v)
    assert [c * g for c in p] in ([*v], [-c for c in v])


def test_adelic_height_of_primitive_vector_is_minus_log_norm():
    g = exact([[4, 0], [0, 9]])
    assert math.isclose(adelic_height([2, 0], g), -math.log(2.0))
    assert math.isclose(adelic_height([0, 1], g), -math.log(3.0))
    assert HeightedLattice(g).height([1, 0]) == adelic_height([1, 0], g)


def test_indefinite_gram_is_rejected():
    with pytest.raises(IndefiniteGramError):
        successive_minima(exact([[1, 2], [2, 1]]))


def test_budget_exceeded_is_reported():
    with pytest.raises(EnumerationBudgetExceeded):
        successive_minima(exact([[1, 0, 0], [0, 1, 0], [0, 0, 1]]), budget=1)


def test_integerize_error_bounds_cover_radii():
    sp = integral_cusp_basis(3)
    g = petersson_gram(sp, 128)
    ig = integerize(g)
    assert ig.dim == 3 and ig.shift > 0


def test_level_one_minima_first_is_delta_power():
    # lambda_1 at k=1 is -log ||Delta||, known to about 8 digits
    g = petersson_gram(integral_cusp_basis(1), 128)
    res = successive_minima(g)
    assert math.isclose(res.maxima[0], -8.2957657922758, abs_tol=1e-10)
    assert res.witnesses == ((1,),)


def test_level_one_profile_matches_minima():
    for k in (2, 3, 4):
        g = petersson_gram(integral_cusp_basis(k), 128)
        res = successive_minima(g)
        prof = filtration_profile(g)
        assert sorted(prof.jump_multiset(), reverse=True) == sorted(res.maxima, reverse=True)
        assert res.slack < 1e-20


def test_lambda_table_csv(tmp_path):
    res = successive_minima(exact([[1, 0], [0, 4]]))
    rows = lambda_table_rows("Gamma1", 1, res)
    text = write_lambda_table(rows, tmp_path / "t.csv")
    assert text.splitlines()[0].startswith("group,k,i,mu_i")
    assert (tmp_path / "t.csv").read_text() == text
    assert len(text.splitlines()) == 3
