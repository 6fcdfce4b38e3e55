import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from casimir_neq.constants import C, HBAR, KB
from casimir_neq.dielectric import Constant, Drude, Plasma
from casimir_neq.equilibrium import (QuadratureSettings, SystemConfig, _matsubara_terms, matsubara_zeta,
                                     pressure_eq, pressure_eq_detailed, pressure_eq_gradient)
from casimir_neq.quadrature import SeriesError
from casimir_neq.reflection import VACUUM, LayeredPlate, Polarization, plate_reflection_imag


def ideal_metal_system(model):
    plate = LayeredPlate(model, 1e-6, VACUUM)
    return SystemConfig(plate, plate, 1e-6, 1.0, 1.0)


def simpson_pressure(config, T, terms=1000, points=10_001, halve_zero=True):
    """Fixed-grid reference: Simpson's rule in y for each of ``terms`` Matsubara terms."""
    a = config.a
    z1 = float(matsubara_zeta(a, T, 1))
    total = 0.0
    for l in range(terms):
        zeta = z1 * l
        if zeta > 745.0:
            break  # exp(-y) underflows: this and all later terms are exactly zero in double precision
        y = np.linspace(zeta, zeta + 60.0, points)
        integrand = np.zeros_like(y)
        for pol in Polarization:
            rr = (plate_reflection_imag(config.plate1, zeta, y, a, pol)
                  * plate_reflection_imag(config.plate2, zeta, y, a, pol))
            x = rr * np.exp(-y)
            # 1 - x written so that the y -> 0 limit of a unit reflection stays finite
            den = -np.expm1(-y) + (1.0 - rr) * np.exp(-y)
            integrand += np.where(den > 0, y * y * x / np.where(den > 0, den, 1.0), 0.0)
        weight = 0.5 if (l == 0 and halve_zero) else 1.0
        total += weight * simpson(integrand, x=y)
    return -KB * T / (8.0 * math.pi * a**3) * total


def test_matsubara_zeta():
    assert matsubara_zeta(1e-6, 300.0, 0) == 0.0
    assert matsubara_zeta(1e-6, 300.0, 1) == pytest.approx(1.646, rel=1e-3)
    assert matsubara_zeta(1e-6, 300.0, 6) == 2 * matsubara_zeta(1e-6, 300.0, 3)
    with pytest.raises(ValueError):
        matsubara_zeta(1e-6, 300.0, -1)


def test_system_validation(drude):
    plate = LayeredPlate(drude, 1e-6, VACUUM)
    with pytest.raises(ValueError):
        SystemConfig(plate, plate, 0.0, 300.0, 300.0)
    with pytest.raises(ValueError):
        SystemConfig(plate, plate, 1e-6, 300.0, -1.0)
    assert SystemConfig(plate, plate, 1e-6, 300.0, 310.0).T3 == 300.0


def test_settings_validation():
    with pytest.raises(ValueError):
        QuadratureSettings(rel_tol=0.1)
    with pytest.raises(ValueError):
        QuadratureSettings(max_matsubara_terms=10)
    with pytest.raises(ValueError):
        QuadratureSettings(workers=0)


def test_no_reflection_no_pressure():
    plate = LayeredPlate(VACUUM, 1e-6, VACUUM)
    config = SystemConfig(plate, plate, 1e-6, 300.0, 300.0)
    assert pressure_eq(config, 300.0) == 0.0
    assert pressure_eq_gradient(config, 300.0) == 0.0


@pytest.mark.parametrize("model", [Plasma.from_ev(9000.0), Drude.from_ev(9000.0, 0.035)])
def test_ideal_metal_limit(model):
    config = ideal_metal_system(model)
    exact = -math.pi**2 * HBAR * C / (240.0 * config.a**4)
    assert exact == pytest.approx(-1.300e-3, rel=1e-3)
    assert pressure_eq(config, 1.0) == pytest.approx(exact, rel=5e-3)
    assert pressure_eq_gradient(config, 1.0) == pytest.approx(-4.0 * exact / config.a, rel=5e-3)


def test_against_simpson_reference(drude):
    plate = LayeredPlate(drude, 1e-6, VACUUM)
    config = SystemConfig(plate, plate, 2e-6, 300.0, 300.0)
    ref = simpson_pressure(config, 300.0)
    assert pressure_eq(config, 300.0) == pytest.approx(ref, rel=1e-6)


def test_zero_frequency_term_is_halved(plasma):
    plate = LayeredPlate(plasma, 1e-6, VACUUM)
    config = SystemConfig(plate, plate, 2e-6, 300.0, 300.0)
    value = pressure_eq(config, 300.0)
    unhalved = simpson_pressure(config, 300.0, halve_zero=False)
    halved = simpson_pressure(config, 300.0)
    assert value == pytest.approx(halved, rel=1e-6)
    assert abs(value - unhalved) > 1e3 * abs(value - halved)


def test_tail_estimate_bounds_extended_sum(drude):
    plate = LayeredPlate(drude, 1e-6, VACUUM)
    config = SystemConfig(plate, plate, 2e-6, 300.0, 300.0)
    settings = QuadratureSettings()
    res = pressure_eq_detailed(config, 300.0, settings)
    n = res.terms_used
    extra = float(np.sum(_matsubara_terms(config, 300.0, settings, False)(np.arange(n, 4 * n))))
    remainder = abs(res.prefactor * extra)
    assert res.tail_estimate >= remainder
    assert remainder < 1e-9 * abs(res.value)


@pytest.mark.parametrize("model", ["drude", "plasma"])
def test_gradient_formula_matches_finite_difference(model, drude, plasma):
    m = drude if model == "drude" else plasma
    plate = LayeredPlate(m, 1e-6, VACUUM)
    config = SystemConfig(plate, plate, 5e-6, 300.0, 300.0)
    h = config.a * 1e-3
    fd = (pressure_eq(replace(config, a=config.a + h), 300.0)
          - pressure_eq(replace(config, a=config.a - h), 300.0)) / (2 * h)
    assert pressure_eq_gradient(config, 300.0) == pytest.approx(fd, rel=1e-4)


def test_attractive_and_decreasing(drude, plasma):
    for m in (drude, plasma):
        plate = LayeredPlate(m, 1e-6, VACUUM)
        config = SystemConfig(plate, plate, 1e-6, 300.0, 300.0)
        values = [pressure_eq(replace(config, a=a), 300.0) for a in np.linspace(1e-6, 10e-6, 7)]
        assert all(v < 0 for v in values)
        assert all(abs(x) > abs(y) for x, y in zip(values, values[1:]))


def test_plasma_stronger_than_drude(drude, plasma):
    for a in (1e-6, 3e-6, 6e-6):
        pd = SystemConfig(LayeredPlate(drude, 1e-6, VACUUM), LayeredPlate(drude, 1e-6, VACUUM), a, 300.0, 300.0)
        pp = SystemConfig(LayeredPlate(plasma, 1e-6, VACUUM), LayeredPlate(plasma, 1e-6, VACUUM), a, 300.0, 300.0)
        assert abs(pressure_eq(pp, 300.0)) >= abs(pressure_eq(pd, 300.0))


@settings(max_examples=25)
@given(st.floats(1.0, 2000.0), st.floats(1e-7, 2e-5))
def test_dielectric_halfspaces_attract(eps, a):
    plate = LayeredPlate(Constant(eps), 1e-6, Constant(eps))
    config = SystemConfig(plate, plate, a, 300.0, 300.0)
    p = pressure_eq(config, 300.0, QuadratureSettings(rel_tol=1e-6))
    assert p <= 0.0
    if eps > 1.0:
        assert p < 0.0


def test_worker_count_does_not_change_result(drude):
    plate = LayeredPlate(drude, 2e-7, Constant(11.66))
    config = SystemConfig(plate, LayeredPlate(drude, 1e-6, Constant(3.81)), 3e-6, 300.0, 300.0)
    values = {pressure_eq(config, 300.0, QuadratureSettings(workers=w, matsubara_batch=4)) for w in (1, 2, 3)}
    assert len(values) == 1


def test_non_convergence_raises(drude):
    plate = LayeredPlate(drude, 1e-6, VACUUM)
    config = SystemConfig(plate, plate, 1e-6, 1.0, 1.0)
    with pytest.raises(SeriesError):
        pressure_eq(config, 1.0, QuadratureSettings(max_matsubara_terms=100))
