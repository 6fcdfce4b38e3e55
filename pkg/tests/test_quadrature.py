import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from casimir_neq.quadrature import (QuadratureError, SeriesError, integrate_adaptive, integrate_rows_with_peaks,
                                    integrate_to_infinity, integrate_with_peaks, locate_minima, sum_with_tail)

# (integrand, lo, hi, exact) with closed forms; several have endpoint singularities,
# kinks, jumps or narrow peaks
FIXTURES = [
    (lambda x: x**2, 0.0, 1.0, 1.0 / 3.0),
    (np.sin, 0.0, math.pi, 2.0),
    (np.exp, 0.0, 1.0, math.e - 1.0),
    (lambda x: 1.0 / (1.0 + x * x), 0.0, 1.0, math.pi / 4.0),
    (np.sqrt, 0.0, 1.0, 2.0 / 3.0),
    (np.log, 0.0, 1.0, -1.0),
    (lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, 2.0),
    (lambda x: np.cos(50.0 * x), 0.0, 1.0, math.sin(50.0) / 50.0),
    (lambda x: np.exp(-x * x), -5.0, 5.0, math.sqrt(math.pi) * math.erf(5.0)),
    (lambda x: x * np.exp(-x), 0.0, 10.0, 1.0 - 11.0 * math.exp(-10.0)),
    (lambda x: 1.0 / ((x - 0.5) ** 2 + 1e-6), 0.0, 1.0, 2000.0 * math.atan(500.0)),
    (lambda x: np.abs(x - 1.0 / 3.0), 0.0, 1.0, 5.0 / 18.0),
    (lambda x: x**20, 0.0, 1.0, 1.0 / 21.0),
    (np.tanh, -1.0, 2.0, math.log(math.cosh(2.0)) - math.log(math.cosh(1.0))),
    (lambda x: 1.0 / (x + 0.01), 0.0, 1.0, math.log(101.0)),
    (lambda x: np.sin(10.0 * x) ** 2, 0.0, math.pi, math.pi / 2.0),
    (lambda x: x**-0.25, 0.0, 1.0, 4.0 / 3.0),
    (lambda x: 1.0 / (2.0 + np.cos(x)), 0.0, 2.0 * math.pi, 2.0 * math.pi / math.sqrt(3.0)),
    (lambda x: x * np.log(x), 0.0, 1.0, -0.25),
    (lambda x: np.sign(x - 0.3), 0.0, 1.0, 0.4),
]


def test_polynomial_exact():
    res = integrate_adaptive(lambda x: x**2, 0.0, 1.0)
    assert abs(res.value - 1.0 / 3.0) < 1e-12


def test_gamma_three_on_half_line():
    res = integrate_to_infinity(lambda y: y * y * np.exp(-y), rel_tol=1e-10)
    assert res.value == pytest.approx(2.0, rel=1e-10)


def test_sharp_peak_against_arctan():
    exact = 2000.0 * math.atan(500.0)
    f = lambda x: 1.0 / ((x - 0.5) ** 2 + 1e-6)  # noqa: E731
    assert integrate_adaptive(f, 0.0, 1.0, rel_tol=1e-10).value == pytest.approx(exact, rel=1e-10)
    peaked = integrate_with_peaks(f, 0.0, 1.0, centres=[0.5], widths=[1e-3], rel_tol=1e-10)
    assert peaked.value == pytest.approx(exact, rel=1e-10)
    assert peaked.panels_used < integrate_adaptive(f, 0.0, 1.0, rel_tol=1e-10).panels_used


def test_error_estimates_are_honest():
    honest = 0
    for f, lo, hi, exact in FIXTURES:
        res = integrate_adaptive(f, lo, hi, rel_tol=1e-8)
        true_err = abs(res.value - exact)
        assert true_err <= 1e-6 * max(1.0, abs(exact))
        honest += res.error_estimate >= true_err
    assert honest >= 19


def test_vector_valued_components_meet_their_own_tolerance():
    f = lambda x: np.stack([np.sin(x), 1e-6 * np.cos(x)])  # noqa: E731
    res = integrate_adaptive(f, 0.0, 1.0, rel_tol=1e-10)
    exact = np.array([1.0 - math.cos(1.0), 1e-6 * math.sin(1.0)])
    assert np.all(np.abs(res.value - exact) <= 1e-10 * np.abs(exact))


def test_joint_tolerance_ignores_negligible_component():
    f = lambda x: np.stack([np.exp(x), 1e-14 * np.sign(x - 0.3)])  # noqa: E731
    joint = integrate_adaptive(f, 0.0, 1.0, rel_tol=1e-10, joint=True)
    alone = integrate_adaptive(f, 0.0, 1.0, rel_tol=1e-10)
    assert joint.panels_used < alone.panels_used
    assert float(np.sum(joint.value)) == pytest.approx(math.e - 1.0, rel=1e-10)


def test_panel_budget_error_carries_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate_adaptive(lambda x: np.sin(1.0 / x), 1e-6, 1.0, rel_tol=1e-13, max_panels=20)
    assert info.value.result is not None
    assert np.isfinite(info.value.result.value)


def test_invalid_interval():
    with pytest.raises(ValueError):
        integrate_adaptive(np.sin, 1.0, 1.0)


def test_breakpoints_capture_jump():
    res = integrate_adaptive(lambda x: np.where(x < 0.3, 1.0, 0.0), 0.0, 1.0, breakpoints=[0.3])
    assert res.value == pytest.approx(0.3, rel=1e-14)


def test_reported_noise_stops_refinement():
    rng = np.random.default_rng(1)

    def noisy(x):
        return np.cos(x) * (1.0 + 1e-9 * rng.standard_normal(x.shape)), np.full(x.shape, 1e-9)

    res = integrate_adaptive(noisy, 0.0, 1.0, rel_tol=1e-14, noise="returned", max_panels=200)
    assert res.value == pytest.approx(math.sin(1.0), rel=1e-8)
    assert res.warnings


def test_rows_with_peaks_match_rowwise_integrals():
    centres = [[0.3], [0.7, 0.2]]
    widths = [[1e-4], [1e-3, 1e-5]]

    def f(x):
        out = np.zeros_like(x)
        for k, (cs, ws) in enumerate(zip(centres, widths)):
            for c, w in zip(cs, ws):
                out[k] += w / ((x[k] - c) ** 2 + w * w)
        return out

    res = integrate_rows_with_peaks(f, 0.0, 1.0, centres, widths, rel_tol=1e-10)
    exact = [sum(math.atan((1 - c) / w) + math.atan(c / w) for c, w in zip(cs, ws))
             for cs, ws in zip(centres, widths)]
    assert np.allclose(res.value, exact, rtol=1e-9)


def test_locate_minima_finds_both_dips():
    g = lambda x: (x - 0.25) ** 2 * (x - 0.75) ** 2 + 1e-8  # noqa: E731
    centres, _, _ = locate_minima(g, np.linspace(0.0, 1.0, 41))
    found = np.sort(np.asarray(centres))
    assert np.any(np.abs(found - 0.25) < 1e-3)
    assert np.any(np.abs(found - 0.75) < 1e-3)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=11),
       st.floats(-3, 3), st.floats(0.01, 5))
def test_polynomials_of_degree_up_to_ten(coeffs, lo, width):
    hi = lo + width
    poly = np.polynomial.Polynomial(coeffs)
    anti = poly.integ()
    exact = anti(hi) - anti(lo)
    res = integrate_adaptive(poly, lo, hi, rel_tol=1e-12)
    scale = np.polynomial.Polynomial(np.abs(coeffs)).integ()
    bound = abs(scale(max(abs(lo), abs(hi)))) * 2 + 1e-300
    assert abs(res.value - exact) <= 1e-11 * bound


def test_geometric_series():
    res = sum_with_tail(lambda l: 0.5**l, tail_tol=1e-12)
    assert res.value == pytest.approx(2.0, rel=1e-11)


def test_tail_estimate_covers_remainder():
    res = sum_with_tail(lambda l: 0.5**l, tail_tol=2.0**-31)
    remainder = 2.0 - res.value
    assert res.tail_estimate >= remainder * (1 - 1e-12)


@given(st.floats(0.05, 0.95))
def test_tail_estimate_covers_remainder_for_any_ratio(q):
    res = sum_with_tail(lambda l: q**l, tail_tol=1e-10)
    remainder = q**res.terms_used / (1.0 - q)
    assert res.tail_estimate >= remainder * (1 - 1e-9)
    assert abs(res.value + remainder - 1.0 / (1.0 - q)) <= 1e-13 / (1.0 - q)


def test_non_decaying_series_raises():
    with pytest.raises(SeriesError):
        sum_with_tail(lambda l: 1.0 + l, max_terms=1000)


def test_series_budget_raises():
    with pytest.raises(SeriesError):
        sum_with_tail(lambda l: 1.0 / (l + 1) ** 1.01, tail_tol=1e-12, max_terms=200)


def test_batched_sum_is_worker_independent():
    term = lambda ls: np.exp(-0.1 * ls) / (1.0 + ls)  # noqa: E731
    values = {sum_with_tail(term, tail_tol=1e-12, batch=7, workers=w).value for w in (1, 2, 4)}
    assert len(values) == 1
