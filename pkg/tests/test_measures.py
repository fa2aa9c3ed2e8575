from __future__ import annotations

import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from petmin.measures import (
    EmpiricalMeasure,
    MultisetError,
    clamp,
    empirical_measure,
    exp_window,
    indicator,
    integrate,
    levy_distance,
    lower_bound_check,
    lower_bound_terms,
    mixture_decompose,
    psi,
    quasi_filtration_margins,
    tightness_report,
    truncation_gap_check,
    update_constants_ledger,
    upper_bound_check,
)

values = st.lists(st.integers(-40, 40).map(lambda n: n / 4), min_size=1, max_size=12)


def measure(vals, k=1):
    return EmpiricalMeasure.from_values(vals, k)


def brute_levy(m1: EmpiricalMeasure, m2: EmpiricalMeasure) -> float:
    """Smallest eps on a fine grid with F1(x - eps) - eps <= F2(x) <= F1(x + eps) + eps for all x."""
    xs = sorted(set(m1.atoms) | set(m2.atoms))
    probe = [x + d for x in xs for d in (-1e-9, 0.0, 1e-9)]
    for step in range(0, 4001):
        eps = step / 4000
        ok = all(
            float(m1.cdf(x - eps)) - eps <= float(m2.cdf(x)) + 1e-12
            and float(m2.cdf(x)) <= float(m1.cdf(x + eps)) + eps + 1e-12
            and float(m2.cdf(x - eps)) - eps <= float(m1.cdf(x)) + 1e-12
            and float(m1.cdf(x)) <= float(m2.cdf(x + eps)) + eps + 1e-12
            for x in probe
        )
        if ok:
            return eps
    return 1.0


def test_levy_of_two_point_masses_is_one():
    # F_delta0 and F_delta1 differ by 1 on [0, 1): no eps < 1 closes the gap
    assert levy_distance(measure([0.0]), measure([1.0])) == 1


def test_levy_of_nearby_point_masses_is_their_distance():
    assert math.isclose(levy_distance(measure([0.0]), measure([0.25])), 0.25)


@settings(max_examples=40, deadline=None)
@given(values, values)
def test_levy_is_symmetric_and_bounded(a, b):
    m1, m2 = measure(a), measure(b)
    d = levy_distance(m1, m2)
    assert 0 <= d <= 1
    assert math.isclose(d, levy_distance(m2, m1), abs_tol=1e-12)
    assert levy_distance(m1, m1) == 0


@settings(max_examples=25, deadline=None)
@given(values, values)
def test_levy_matches_grid_search(a, b):
    m1, m2 = measure(a), measure(b)
    assert abs(float(levy_distance(m1, m2)) - brute_levy(m1, m2)) <= 1 / 4000 + 1e-9


@settings(max_examples=25, deadline=None)
@given(values, values, values)
def test_levy_triangle_inequality(a, b, c):
    m1, m2, m3 = measure(a), measure(b), measure(c)
    assert levy_distance(m1, m3) <= levy_distance(m1, m2) + levy_distance(m2, m3) + 1e-12


@given(values)
def test_from_values_merges_and_normalizes(vals):
    m = measure(vals)
    assert sum(m.weights) == 1
    assert len(m.atoms) == len(set(vals))
    assert m.cdf(max(vals)) == 1 and m.cdf(min(vals) - 1) == 0
    counts = m.multiplicities(len(vals))
    assert sum(counts.values()) == len(vals)


@given(values)
def test_measure_json_round_trip(vals):
    m = measure(vals, 3)
    assert EmpiricalMeasure.from_json(json.loads(json.dumps(m.to_json()))) == m


def test_invalid_measures_rejected():
    with pytest.raises(ValueError):
        EmpiricalMeasure((1.0, 0.0), (Fraction(1, 2), Fraction(1, 2)))
    with pytest.raises(ValueError):
        EmpiricalMeasure((0.0,), (Fraction(1, 2),))
    with pytest.raises(ValueError):
        EmpiricalMeasure.from_values([])


def test_empirical_measure_divides_by_k():
    m = empirical_measure([-8.0, -16.0], 2)
    assert m.atoms == (-8.0, -4.0) and m.k == 2


def test_test_function_catalog():
    assert clamp(2)(5) == 2 and clamp(2)(-5) == -2
    assert exp_window(0, 1)(0) == 1
    assert indicator(0)(-1) == 1 and indicator(0)(0) == 0
    assert integrate(measure([-1.0, 1.0]), clamp(0.5)) == 0
    with pytest.raises(ValueError):
        clamp(0)
    with pytest.raises(TypeError):
        integrate(measure([0.0]), abs)


@given(values, st.sampled_from([clamp(1.0), clamp(3.0), exp_window(-2.0, 1.0), indicator(0.0)]))
def test_integral_bounded_by_sup(vals, h):
    assert abs(integrate(measure(vals), h)) <= h.sup_abs + 1e-12


def test_upper_bound_stable_constant():
    tables = {k: [-8.5 * k, -9.0 * k] for k in range(2, 8)}
    rep = upper_bound_check(tables)
    assert rep.passed and rep.fitted_constants["C_hat"] == -8.5
    assert min(rep.margins) >= 0


def test_upper_bound_flags_growth():
    tables = {k: [float(k * k)] for k in range(2, 8)}
    assert not upper_bound_check(tables).passed


def test_lower_bound_terms():
    assert lower_bound_terms(3, 1, 1) == 6 * math.log(2 / 3)
    assert lower_bound_terms(3, 3, 1) is None


def test_lower_bound_check_requires_k_above_k0():
    with pytest.raises(ValueError):
        lower_bound_check({1: [-8.0]}, 1)


def test_truncation_gap_respects_sub_multiset_bound():
    full = measure([-1.0, -2.0, -3.0, -4.0], 4)
    trunc = measure([-3.0, -4.0], 4)
    rep = truncation_gap_check([(4, 2, full, trunc)], clamp(10.0))
    assert rep.passed
    assert math.isclose(rep.margins[0], abs(-2.5 - -3.5) * 2)


def test_mixture_decompose_exact():
    full = measure([-1.0, -2.0, -2.0, -5.0], 1)
    sub = measure([-2.0, -5.0], 1)
    omega = mixture_decompose(full, sub, 4, 2)
    assert omega.atoms == (-2.0, -1.0) and sum(omega.weights) == 1
    with pytest.raises(MultisetError):
        mixture_decompose(full, measure([-7.0]), 4, 1)
    with pytest.raises(MultisetError):
        mixture_decompose(full, full, 4, 4)


def test_tightness_report():
    good = [measure([-0.5, -0.1]), measure([-0.2]), measure([-0.3, -0.4])]
    assert tightness_report(good).passed
    bad = [measure([-9.0]), measure([-9.0]), measure([-9.0])]
    assert not tightness_report(bad).passed


def test_psi_and_quasi_margins():
    c1, c2 = 0.98, 2.0
    assert math.isclose(psi(1, c1, c2), math.log(2.0) - 0.5 * math.log(0.98))
    sample = {"k1": 1, "k2": 1, "log_f": 1.0, "log_g": 1.0, "log_fg": 2.0}
    assert quasi_filtration_margins([sample], c1, c2).passed
    sample["log_fg"] = 10.0
    assert not quasi_filtration_margins([sample], c1, c2).passed


def test_constants_ledger_keys_by_inputs(tmp_path):
    path = tmp_path / "ledger.json"
    e1 = update_constants_ledger(path, {"C": 1.5}, {"k": [1, 2]})
    update_constants_ledger(path, {"C": 2.5}, {"k": [1, 3]})
    data = json.loads(path.read_text())
    assert len(data) == 2 and e1["constants"]["C"] == 1.5
