"""Pressure between plates held at different temperatures.

The pressure on the inner faces is

    P(a, T1, T2) = (P_eq(a, T1) + P_eq(a, T2)) / 2 + dP_neq(a, T1, T2) + (2 sigma / 3c)(T1^4 + T2^4)

and the total pressure on plate ``i`` in an environment at ``T3`` subtracts the
radiation arriving on its blackened outer face, ``(2 sigma / 3c)(Ti^4 + T3^4)``.

The antisymmetric term is an integral over real frequencies ``u = 2 a omega / c``,

    dP_neq = hbar c / (64 pi^2 a^4) int_0^inf u^3 [n(u, T1) - n(u, T2)] sum_alpha (prop - 2 evan) du

with a propagating part over ``0 <= t < 1`` and an evanescent part over
``t > 1``. The code uses ``c = sqrt(1 - t^2)`` for the first and
``sigma = u sqrt(t^2 - 1)`` for the second:

    prop = int_0^1 c^2 (A1 - A2) / |1 - R1 R2 exp(i u c)|^2 dc
    u^3 evan = int_0^inf sigma^2 exp(-sigma) (Im R1 Re R2 - Re R1 Im R2) / |1 - R1 R2 exp(-sigma)|^2 dsigma

where ``A = 1 - |R|^2`` so that ``|R2|^2 - |R1|^2 = A1 - A2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .constants import HBAR, KB, SIGMA, C
from .equilibrium import (DEFAULT_SETTINGS, QuadratureSettings, SystemConfig, pressure_eq,
                          pressure_eq_gradient)
from .quadrature import _EPS, QuadratureError, integrate_adaptive, integrate_rows_with_peaks, locate_minima_rows
from .dielectric import eps_real_axis
from .reflection import Polarization, real_axis_coefficients

# floor on |D|^2 for lossless resonances
D2_FLOOR = 1e-30

# evanescent integrals stop at sigma = u sqrt(t^2 - 1) = SIGMA_MAX, where sigma^2 exp(-sigma) < 1e-14
SIGMA_MAX = 40.0


def bose_occupation(u, a, T):
    """Mean photon number ``1 / (exp(hbar omega_c u / kB T) - 1)`` with ``omega_c = c / 2a``."""
    x = HBAR * C / (2.0 * a) * np.asarray(u, dtype=float) / (KB * T)
    with np.errstate(over="ignore", divide="ignore"):
        out = np.where(x > 700.0, 0.0, 1.0 / np.expm1(np.minimum(x, 700.0)))
    return out


def occupation_difference(u, a, T1, T2):
    return bose_occupation(u, a, T1) - bose_occupation(u, a, T2)


def blackbody_term(T_a: float, T_b: float, difference: bool = False) -> float:
    """``(2 sigma / 3c)(T_a^4 + T_b^4)``, or ``(2 sigma / 3c)(T_b^4 - T_a^4)`` with ``difference``."""
    if not (T_a > 0 and T_b > 0):
        raise ValueError("temperatures must be positive")
    k = 2.0 * SIGMA / (3.0 * C)
    if difference:
        return k * (T_b**4 - T_a**4)
    return k * (T_a**4 + T_b**4)


@dataclass
class NeqResult:
    """Antisymmetric pressure term (Pa) split into propagating and evanescent waves."""

    propagating: float
    evanescent: float
    total: float
    error_estimate: float = 0.0
    floor_hits: int = 0
    warnings: list[str] = field(default_factory=list)


class _Counter:
    def __init__(self):
        self.floor_hits = 0
        self.messages: list[str] = []

    def warn(self, message):
        if message not in self.messages:
            self.messages.append(message)

    def floor(self, d2):
        hits = int(np.count_nonzero(d2 < D2_FLOOR))
        if hits:
            self.floor_hits += hits
        return np.maximum(d2, D2_FLOOR)


def _relative(value, abs_noise):
    """Relative evaluation error ``abs_noise / |value|`` (zero where the value is zero)."""
    mag = np.abs(value)
    return np.divide(abs_noise, mag, out=np.zeros_like(mag), where=mag > 0)


def propagating_kernel(config: SystemConfig, u, cvar, counter: _Counter | None = None,
                       with_noise: bool = False):
    """Integrand of the propagating part in ``c = sqrt(1 - t^2)``, summed over polarizations.

    With ``with_noise`` the relative rounding error of each value is also
    returned; ``A1 - A2`` cancels badly when both plates absorb alike.
    """
    u, cvar = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(cvar, dtype=float))
    q = cvar * cvar
    a = config.a
    c1 = real_axis_coefficients(config.plate1, u, q, a, absorptivity=True, rounding=with_noise)
    c2 = real_axis_coefficients(config.plate2, u, q, a, absorptivity=True, rounding=with_noise)
    phase = np.exp(1j * u * cvar)
    total = np.zeros(u.shape)
    noise = np.zeros(u.shape)
    for pol in Polarization:
        r1, r2 = c1.r(pol), c2.r(pol)
        d = 1.0 - r1 * r2 * phase
        d2 = counter.floor(np.abs(d) ** 2) if counter is not None else np.maximum(np.abs(d) ** 2, D2_FLOOR)
        a1, a2 = c1.absorptivity(pol), c2.absorptivity(pol)
        total += (a1 - a2) / d2
        if with_noise:
            e1, e2 = c1.rounding(pol), c2.rounding(pol)
            dprod = np.abs(r2) * e1 + np.abs(r1) * e2 + 4.0 * _EPS * (1.0 + u * cvar)
            noise += ((8.0 * _EPS * (np.abs(a1) + np.abs(a2)) + 2.0 * (np.abs(r1) * e1 + np.abs(r2) * e2))
                      + np.abs(a1 - a2) * 2.0 * dprod / np.sqrt(d2)) / d2
    if with_noise:
        return q * total, _relative(total, noise)
    return q * total


def evanescent_kernel(config: SystemConfig, u, sig, counter: _Counter | None = None,
                      with_noise: bool = False):
    """Integrand of ``u^3`` times the evanescent part in ``sigma = u sqrt(t^2 - 1)``."""
    u, sig = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(sig, dtype=float))
    s = sig / u
    q = -s * s
    a = config.a
    c1 = real_axis_coefficients(config.plate1, u, q, a, rounding=with_noise)
    c2 = real_axis_coefficients(config.plate2, u, q, a, rounding=with_noise)
    damp = np.exp(-sig)
    total = np.zeros(u.shape)
    noise = np.zeros(u.shape)
    for pol in Polarization:
        r1, r2 = c1.r(pol), c2.r(pol)
        d2 = np.abs(1.0 - r1 * r2 * damp) ** 2
        d2 = counter.floor(d2) if counter is not None else np.maximum(d2, D2_FLOOR)
        num = r1.imag * r2.real - r1.real * r2.imag
        total += num / d2
        if with_noise:
            e1, e2 = c1.rounding(pol), c2.rounding(pol)
            dprod = np.abs(r2) * e1 + np.abs(r1) * e2
            noise += (4.0 * _EPS * (np.abs(r1.imag * r2.real) + np.abs(r1.real * r2.imag)) + dprod
                      + np.abs(num) * 2.0 * damp * dprod / np.sqrt(d2)) / d2
    if with_noise:
        return sig * sig * damp * total, _relative(total, noise)
    return sig * sig * damp * total


def _resonance_denominator(config, u, x, evanescent):
    """Smallest ``|D_alpha|^2`` over polarizations, used to locate resonances."""
    u, x = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(x, dtype=float))
    if evanescent:
        s = x / u
        q = -s * s
        factor = np.exp(-x)
    else:
        q = x * x
        factor = np.exp(1j * u * x)
    c1 = real_axis_coefficients(config.plate1, u, q, config.a)
    c2 = real_axis_coefficients(config.plate2, u, q, config.a)
    return np.minimum(*(np.abs(1.0 - c1.r(p) * c2.r(p) * factor) ** 2 for p in Polarization))


def _inner_rel(settings: QuadratureSettings) -> float:
    return settings.rel_tol * 0.1


# frequencies whose transverse integrals share one vector-valued quadrature
INNER_CHUNK = 8


def _inner_batch(config: SystemConfig, us, settings: QuadratureSettings, counter: _Counter,
                 part: str) -> np.ndarray:
    """Inner transverse integrals and their error estimates for every frequency in ``us``.

    Neighbouring frequencies have similar resonance structure, so they are
    sorted and integrated together in small chunks.
    """
    us = np.asarray(us, dtype=float)
    order = np.argsort(us, kind="stable")
    out = np.empty(us.size)
    err = np.empty(us.size)
    for k in range(0, us.size, INNER_CHUNK):
        sel = order[k:k + INNER_CHUNK]
        out[sel], err[sel] = _inner_chunk(config, us[sel], settings, counter, part)
    return out, err


def _inner_chunk(config, us, settings, counter, part):
    evanescent = part == "evan"
    if evanescent:
        lo, hi = 0.0, SIGMA_MAX
        # guided modes of nearly lossless plates can sit about 0.1 apart in sigma
        grid = np.unique(np.concatenate([np.linspace(0.0, SIGMA_MAX, 801),
                                         np.geomspace(1e-6, SIGMA_MAX, 161)]))
        kernel = evanescent_kernel
    else:
        lo, hi = 0.0, 1.0
        # Fabry-Perot resonances are spaced by about 2 pi / u in c; the grid holds
        # 8 points per pi / u so that each one is bracketed
        npan = math.ceil(float(np.max(us)) / math.pi) + 8
        grid = np.linspace(0.0, 1.0, 8 * npan + 1)
        kernel = propagating_kernel
    rows, x0, g0, w = locate_minima_rows(
        lambda r, x: _resonance_denominator(config, us[r], x, evanescent), grid, us.size)
    # D also vanishes at grazing incidence (c = 0 or sigma = 0), where the integrand
    # weight vanishes faster; a minimum in the first grid cell next to such a zero is
    # that zero, not a resonance. Only narrow, deep minima get a peak map
    # (|D|^2 near 1 is rounding noise).
    at_lo = _resonance_denominator(config, us[rows], np.full(rows.size, lo), evanescent)
    grazing = (x0 < grid[1]) & (at_lo < 1e-20)
    keep = (w < 0.05 * (hi - lo)) & (x0 - lo > w) & (x0 <= hi) & (g0 < 0.5) & ~grazing
    centres = [x0[keep & (rows == k)] for k in range(us.size)]
    widths = [w[keep & (rows == k)] for k in range(us.size)]

    def f(x):
        return kernel(config, us[:, None], x, counter, with_noise=True)

    res = integrate_rows_with_peaks(f, lo, hi, centres, widths, rel_tol=_inner_rel(settings),
                                    max_panels=settings.max_panels, reports_noise=True)
    for m in res.warnings:
        counter.warn(f"{part}: {m}")
    return (np.atleast_1d(np.asarray(res.value, dtype=float)),
            np.atleast_1d(np.asarray(res.error_estimate, dtype=float)))


def resonance_onsets(config: SystemConfig, umax: float) -> np.ndarray:
    """Frequencies ``u < umax`` at which a gap resonance enters at normal incidence.

    A resonance sits where ``u c + arg(R1 R2) = 2 pi n``; it appears at ``c = 1``
    when ``u`` crosses a root of ``u + arg(R1 R2) - 2 pi n``. For nearly lossless
    plates the inner integrals jump there, so these points are used as breakpoints
    of the frequency integral. The product ``R1 R2`` is the same for both
    polarizations at normal incidence.
    """
    def phase(u):
        c1 = real_axis_coefficients(config.plate1, u, 1.0, config.a)
        c2 = real_axis_coefficients(config.plate2, u, 1.0, config.a)
        return np.angle(c1.r_te * c2.r_te)

    n = max(64, int(math.ceil(umax / (2.0 * math.pi))) * 32)
    grid = np.linspace(umax / (4 * n), umax, n)
    wrapped = phase(grid)
    total = grid + np.unwrap(wrapped)
    k = np.floor(total / (2.0 * math.pi))
    roots = []
    for i in np.nonzero(np.diff(k) != 0)[0]:
        target = 2.0 * math.pi * max(k[i], k[i + 1])
        branch = total[i] - grid[i] - wrapped[i]  # multiple of 2 pi fixing the unwrapped sheet

        def g(u, i=i, branch=branch, target=target):
            p = phase(np.array([u]))[0] + branch
            # stay on the sheet continuous with the left grid point
            p += 2.0 * math.pi * round((total[i] - grid[i] - p) / (2.0 * math.pi))
            return u + p - target

        roots.append(brentq(g, grid[i], grid[i + 1], xtol=1e-14, rtol=4 * _EPS))
    return np.asarray(roots)


def u_cutoff(config: SystemConfig, settings: QuadratureSettings) -> float:
    """Upper frequency limit where ``hbar omega / (kB max(T1, T2))`` reaches the cutoff exponent."""
    omega_c = C / (2.0 * config.a)
    return settings.u_cutoff_exponent * KB * max(config.T1, config.T2) / (HBAR * omega_c)


def plates_identical(config: SystemConfig) -> bool:
    return config.plate1 == config.plate2


def delta_p_neq(config: SystemConfig, settings: QuadratureSettings = DEFAULT_SETTINGS) -> NeqResult:
    """Antisymmetric nonequilibrium pressure term in Pa.

    Identical plates or equal temperatures give exactly zero without integrating.
    """
    if plates_identical(config) or config.T1 == config.T2:
        return NeqResult(0.0, 0.0, 0.0)
    a = config.a
    pref = HBAR * C / (64.0 * math.pi**2 * a**4)
    umax = u_cutoff(config, settings)
    counter = _Counter()

    def outer(us):
        us = np.asarray(us, dtype=float)
        dn = occupation_difference(us, a, config.T1, config.T2)
        live = dn != 0.0
        out = np.zeros((2, us.size))
        rel = np.zeros((2, us.size))
        if np.any(live):
            ul = us[live]
            prop, perr = _inner_batch(config, ul, settings, counter, "prop")
            evan, eerr = _inner_batch(config, ul, settings, counter, "evan")
            out[0, live] = ul**3 * dn[live] * prop
            out[1, live] = -2.0 * dn[live] * evan
            # the inner integrals are only as accurate as their own error estimates;
            # the outer refinement must not chase that noise
            rel[0, live] = _relative(prop, perr)
            rel[1, live] = _relative(evan, eerr)
        return out, rel

    abs_tol = settings.abs_tol / pref if settings.abs_tol > 0 else 0.0
    try:
        res = integrate_adaptive(outer, 0.0, umax, rel_tol=settings.rel_tol, abs_tol=abs_tol,
                                 initial_panels=8, max_panels=settings.max_panels, noise="returned",
                                 joint=True, breakpoints=resonance_onsets(config, umax))
    except QuadratureError as exc:
        raise QuadratureError(f"nonequilibrium frequency integral: {exc}", exc.result) from None
    prop, evan = (float(v) for v in res.value)
    err = float(np.sum(res.error_estimate))
    msgs = list(res.warnings) + counter.messages
    if counter.floor_hits:
        msgs.append(f"|D|^2 floor of {D2_FLOOR:g} applied at {counter.floor_hits} points")
    return NeqResult(pref * prop, pref * evan, pref * (prop + evan), pref * err, counter.floor_hits, msgs)


@dataclass(frozen=True)
class PressureBreakdown:
    """Components of the total pressure on one plate (Pa); ``total`` is their sum."""

    eq_mean: float
    delta_neq: float
    blackbody: float
    total: float
    plate_index: int

    @classmethod
    def assemble(cls, eq_mean, delta_neq, blackbody, plate_index):
        return cls(eq_mean, delta_neq, blackbody, eq_mean + delta_neq + blackbody, plate_index)


def _eq_pair(config, settings, gradient=False):
    fn = pressure_eq_gradient if gradient else pressure_eq
    p1 = fn(config, config.T1, settings)
    p2 = p1 if config.T2 == config.T1 else fn(config, config.T2, settings)
    return p1, p2


def plate_blackbody(config: SystemConfig, plate_index: int) -> float:
    """``(2 sigma / 3c)(T1^4 + T2^4 - Ti^4 - T3^4)``."""
    if plate_index not in (1, 2):
        raise ValueError("plate_index must be 1 or 2")
    ti = config.T1 if plate_index == 1 else config.T2
    k = 2.0 * SIGMA / (3.0 * C)
    return k * ((config.T1**4 - ti**4) + (config.T2**4 - config.T3**4))


def total_pressure(config: SystemConfig, plate_index: int = 2,
                   settings: QuadratureSettings = DEFAULT_SETTINGS, neq: NeqResult | None = None) -> PressureBreakdown:
    """Total pressure on plate 1 (upper) or 2 (lower), negative for attraction."""
    bb = plate_blackbody(config, plate_index)
    p1, p2 = _eq_pair(config, settings)
    if neq is None:
        neq = delta_p_neq(config, settings)
    return PressureBreakdown.assemble(0.5 * (p1 + p2), neq.total, bb, plate_index)


@dataclass(frozen=True)
class GradientResult:
    """Separation gradient of the total pressure (Pa/m)."""

    eq_mean: float
    delta_neq: float
    total: float
    neq_included: bool


def thick_coating(config: SystemConfig, threshold: float = 1e-6) -> bool:
    """Whether both coatings are opaque across the thermal band.

    The normal-incidence power attenuation ``exp(-2 d Im k)`` through each
    coating must stay below ``threshold`` for ``hbar omega / (kB T)`` between
    0.1 and 10. Then the substrates are invisible in reflection and the fast
    gradient path drops the antisymmetric term. That is an approximation, not a
    consequence: with nearly lossless coatings a gap mode that leaks through one
    plate only thermalizes at that plate's temperature however weak the leak,
    and the antisymmetric term stays comparable to the temperature dependence
    of the equilibrium gradient.
    """
    T = max(config.T1, config.T2)
    omega = np.geomspace(0.1, 10.0, 41) * KB * T / HBAR
    for plate in (config.plate1, config.plate2):
        kappa = np.sqrt(eps_real_axis(plate.coating, omega)).imag * omega / C
        if np.max(np.exp(-2.0 * plate.thickness * kappa)) > threshold:
            return False
    return True


def delta_p_neq_gradient(config: SystemConfig, settings: QuadratureSettings = DEFAULT_SETTINGS,
                         rel_step: float = 1e-3) -> float:
    """Central finite difference of the antisymmetric term with step ``rel_step * a``."""
    h = rel_step * config.a
    up = delta_p_neq(replace(config, a=config.a + h), settings).total
    down = delta_p_neq(replace(config, a=config.a - h), settings).total
    return (up - down) / (2.0 * h)


def total_pressure_gradient(config: SystemConfig, settings: QuadratureSettings = DEFAULT_SETTINGS,
                            fast: bool = False) -> GradientResult:
    """Gradient of the total pressure; identical for both plates since the radiation terms are constant.

    With ``fast`` the antisymmetric term is dropped when :func:`thick_coating`
    holds; ``neq_included`` records whether it was computed.
    """
    g1, g2 = _eq_pair(config, settings, gradient=True)
    mean = 0.5 * (g1 + g2)
    if fast and thick_coating(config):
        return GradientResult(mean, 0.0, mean, False)
    dneq = delta_p_neq_gradient(config, settings)
    return GradientResult(mean, dneq, mean + dneq, True)


@dataclass(frozen=True)
class DifferentialResult:
    """Upper-plate pressure minus the equilibrium pressure at ``T1``."""

    value: float
    without_constant: float
    constant: float


def differential_pressure(config: SystemConfig, settings: QuadratureSettings = DEFAULT_SETTINGS,
                          neq: NeqResult | None = None) -> DifferentialResult:
    """``P_tot(1)(a, T1, T2) - P_eq(a, T1)`` with and without the separation-independent term."""
    br = total_pressure(config, 1, settings, neq=neq)
    p1 = pressure_eq(config, config.T1, settings)
    value = br.total - p1
    return DifferentialResult(value, value - br.blackbody, br.blackbody)


def differential_gradient(config: SystemConfig, settings: QuadratureSettings = DEFAULT_SETTINGS,
                          fast: bool = False) -> float:
    """``P_tot(1)'(a, T1, T2) - P_eq'(a, T1)``."""
    g = total_pressure_gradient(config, settings, fast=fast)
    return g.total - pressure_eq_gradient(config, config.T1, settings)
