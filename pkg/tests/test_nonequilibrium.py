import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from casimir_neq.constants import C, HBAR, SIGMA
from casimir_neq.dielectric import Constant, Drude
from casimir_neq.equilibrium import QuadratureSettings, SystemConfig, pressure_eq, pressure_eq_gradient
from casimir_neq.nonequilibrium import (blackbody_term, bose_occupation, delta_p_neq, differential_gradient,
                                        differential_pressure, evanescent_kernel, occupation_difference,
                                        plate_blackbody, propagating_kernel, resonance_onsets, thick_coating,
                                        total_pressure, total_pressure_gradient, u_cutoff)
from casimir_neq.reflection import VACUUM, LayeredPlate, Polarization, real_axis_coefficients

_CACHE = {}


def neq(config, settings=QuadratureSettings(rel_tol=1e-7)):
    key = (config, settings)
    if key not in _CACHE:
        _CACHE[key] = delta_p_neq(config, settings)
    return _CACHE[key]


def swapped(config):
    return replace(config, plate1=config.plate2, plate2=config.plate1)


def quad_reference(config, settings=QuadratureSettings()):
    """Nested scipy quadrature in the original transverse variable ``t``."""
    a = config.a

    def refl(plate, u, t):
        co = real_axis_coefficients(plate, u, (1.0 - t) * (1.0 + t), a)
        return [complex(co.r(p)) for p in Polarization]

    def prop(t, u):
        c = math.sqrt(1.0 - t * t)
        phase = complex(math.cos(u * c), math.sin(u * c))
        out = 0.0
        for r1, r2 in zip(refl(config.plate1, u, t), refl(config.plate2, u, t)):
            out += (abs(r2) ** 2 - abs(r1) ** 2) / abs(1.0 - r1 * r2 * phase) ** 2
        return t * c * out

    def evan(t, u):
        damp = math.exp(-u * math.sqrt(t * t - 1.0))
        out = 0.0
        for r1, r2 in zip(refl(config.plate1, u, t), refl(config.plate2, u, t)):
            num = r1.imag * r2.real - r1.real * r2.imag
            out += num / abs(1.0 - r1 * r2 * damp) ** 2
        return t * math.sqrt(t * t - 1.0) * damp * out

    def outer(u):
        dn = float(occupation_difference(u, a, config.T1, config.T2))
        p = quad(prop, 0.0, 1.0, args=(u,), epsabs=0, epsrel=1e-8, limit=200)[0]
        t_max = math.sqrt(1.0 + (40.0 / u) ** 2)
        e = quad(evan, 1.0, t_max, args=(u,), epsabs=0, epsrel=1e-8, limit=200, points=[1.0 + 1e-6])[0]
        return u**3 * dn * (p - 2.0 * e)

    umax = u_cutoff(config, settings)
    total = quad(outer, 0.0, umax, epsabs=0, epsrel=1e-6, limit=200)[0]
    return HBAR * C / (64.0 * math.pi**2 * a**4) * total


def test_bose_occupation_values():
    a = 1e-6
    T = HBAR * C / (2.0 * a) / 1.380649e-23  # hbar omega_c / kB, so that x = u
    assert bose_occupation(1.0, a, T) == pytest.approx(1.0 / (math.e - 1.0), rel=1e-14)
    assert bose_occupation(1.0, a, T) == pytest.approx(0.5820, abs=1e-4)
    assert bose_occupation(800.0, a, T) == 0.0
    assert np.all(np.diff(bose_occupation(np.linspace(0.1, 10, 50), a, 300.0)) < 0)


def test_blackbody_term_values():
    k = 2.0 * SIGMA / (3.0 * C)
    assert blackbody_term(300.0, 310.0, difference=True) == pytest.approx(k * (310.0**4 - 300.0**4), rel=1e-15)
    assert blackbody_term(300.0, 310.0, difference=True) == pytest.approx(0.143e-6, abs=5e-10)
    assert blackbody_term(300.0, 300.0) == pytest.approx(2.04e-6, rel=1e-2)
    with pytest.raises(ValueError):
        blackbody_term(0.0, 300.0)


def test_plate_blackbody():
    plate = LayeredPlate(Drude.from_ev(9.0, 0.035), 1e-6, VACUUM)
    cfg = SystemConfig(plate, plate, 2e-6, 300.0, 500.0, 300.0)
    assert plate_blackbody(cfg, 2) == 0.0
    assert plate_blackbody(cfg, 1) == pytest.approx(blackbody_term(300.0, 500.0, difference=True), rel=1e-14)
    with pytest.raises(ValueError):
        plate_blackbody(cfg, 3)


def test_identical_plates_give_zero(thick_drude_system):
    cfg = replace(thick_drude_system, T2=500.0)
    assert delta_p_neq(cfg).total == 0.0


@given(st.floats(0.1, 30.0), st.floats(0.0, 1.0), st.floats(0.0, 40.0))
def test_kernels_vanish_pointwise_for_identical_plates(u, c, sig):
    plate = LayeredPlate(Drude.from_ev(9.0, 0.035), 2e-7, Constant(11.66))
    cfg = SystemConfig(plate, plate, 2e-6, 300.0, 400.0)
    assert propagating_kernel(cfg, u, c) == 0.0
    assert evanescent_kernel(cfg, u, sig) == 0.0


def test_equal_temperatures_give_zero(dissimilar_system):
    cfg = replace(dissimilar_system, T2=dissimilar_system.T1)
    assert delta_p_neq(cfg).total == 0.0


def test_antisymmetric_under_plate_swap(dissimilar_system):
    value = neq(dissimilar_system).total
    assert value != 0.0
    assert neq(swapped(dissimilar_system)).total == pytest.approx(-value, rel=1e-6)


def test_against_nested_quad_reference(dissimilar_system):
    value = neq(dissimilar_system)
    ref = quad_reference(dissimilar_system)
    assert value.total == pytest.approx(ref, rel=1e-5)
    assert value.propagating + value.evanescent == value.total


def test_breakdown_identity(dissimilar_system):
    cfg = dissimilar_system
    res = neq(cfg)
    p1, p2 = pressure_eq(cfg, cfg.T1), pressure_eq(cfg, cfg.T2)
    k = 2.0 * SIGMA / (3.0 * C)
    inner = 0.5 * (p1 + p2) + res.total + k * (cfg.T1**4 + cfg.T2**4)
    for i, ti in ((1, cfg.T1), (2, cfg.T2)):
        br = total_pressure(cfg, i, neq=res)
        assert br.total == br.eq_mean + br.delta_neq + br.blackbody
        assert br.total == pytest.approx(inner - k * (ti**4 + cfg.T3**4), rel=1e-12, abs=1e-18)
    diff = total_pressure(cfg, 1, neq=res).total - total_pressure(cfg, 2, neq=res).total
    assert diff == pytest.approx(blackbody_term(cfg.T1, cfg.T2, difference=True), rel=1e-9)


def test_equilibrium_limit(thick_drude_system):
    cfg = thick_drude_system
    assert total_pressure(cfg, 2).total == pressure_eq(cfg, 300.0)
    assert total_pressure(cfg, 1).total == pressure_eq(cfg, 300.0)
    assert total_pressure_gradient(cfg).total == pressure_eq_gradient(cfg, 300.0)


def test_differential_quantities_vanish_in_equilibrium(thick_drude_system):
    cfg = thick_drude_system
    d = differential_pressure(cfg)
    assert d.value == 0.0 and d.without_constant == 0.0 and d.constant == 0.0
    assert differential_gradient(cfg) == 0.0


def test_differential_pressure_constant(thick_drude_system):
    cfg = replace(thick_drude_system, T2=310.0)
    d = differential_pressure(cfg)
    assert d.constant == pytest.approx(0.143e-6, abs=5e-10)
    assert d.value - d.without_constant == d.constant


def test_identical_thick_gradient_matches_finite_difference(thick_drude_system):
    cfg = replace(thick_drude_system, a=5e-6, T2=500.0)
    h = cfg.a * 1e-3
    fd = (total_pressure(replace(cfg, a=cfg.a + h), 2).total
          - total_pressure(replace(cfg, a=cfg.a - h), 2).total) / (2.0 * h)
    g = total_pressure_gradient(cfg)
    assert g.neq_included
    assert g.total == pytest.approx(fd, rel=1e-4)


def test_fast_path_metadata(drude):
    thick = LayeredPlate(drude, 1e-6, Constant(3.81))
    thin = LayeredPlate(drude, 2e-8, Constant(11.66))
    assert thick_coating(SystemConfig(thick, thick, 5e-6, 300.0, 310.0))
    assert not thick_coating(SystemConfig(thin, thick, 5e-6, 300.0, 310.0))
    cfg = SystemConfig(thick, thick, 5e-6, 300.0, 310.0)
    fast = total_pressure_gradient(cfg, fast=True)
    assert not fast.neq_included and fast.delta_neq == 0.0


def test_thick_coating_hides_substrate(drude):
    loose = QuadratureSettings(rel_tol=1e-7)
    base = None
    for eps in (11.66, 5.83, 17.49):
        plate = LayeredPlate(drude, 1e-6, Constant(eps))
        value = pressure_eq(SystemConfig(plate, plate, 3e-6, 300.0, 300.0), 300.0, loose)
        base = value if base is None else base
        assert value == pytest.approx(base, rel=1e-6)


def test_evanescent_part_decays_with_separation():
    p1 = LayeredPlate(Drude.from_ev(9.0, 0.5), 20e-9, Constant(11.66))
    p2 = LayeredPlate(Drude.from_ev(9.0, 0.5), 60e-9, Constant(3.81))
    loose = QuadratureSettings(rel_tol=1e-6)
    near = delta_p_neq(SystemConfig(p1, p2, 0.5e-6, 300.0, 400.0), loose)
    far = delta_p_neq(SystemConfig(p1, p2, 2e-6, 300.0, 400.0), loose)
    assert abs(far.evanescent) < abs(near.evanescent)


def test_resonance_onsets_for_ideal_mirrors():
    # a perfect mirror has R = -1 for TE, so R1 R2 = 1 and modes enter at u = 2 pi n
    metal = LayeredPlate(Drude.from_ev(9000.0, 1e-6), 1e-6, VACUUM)
    cfg = SystemConfig(metal, metal, 10e-6, 300.0, 300.0)
    roots = resonance_onsets(cfg, 30.0)
    assert roots.size == 4
    assert np.allclose(roots, 2.0 * math.pi * np.arange(1, 5), rtol=1e-3)


@settings(max_examples=20)
@given(st.floats(0.05, 0.3), st.floats(1.0, 5.0))
def test_occupation_difference_sign(u, ratio):
    a = 1e-6
    assert occupation_difference(u, a, 300.0, 300.0 * ratio) <= 0.0
