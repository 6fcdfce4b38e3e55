"""Reflection coefficients of a metal film on a semi-infinite substrate.

All wavevectors are handled in the dimensionless form ``K = 2 a k`` internally,
so the film phase is ``2 d k = (d / a) K``.

Imaginary axis (Matsubara) variables: ``zeta = 2 a xi / c`` and
``y = 2 a sqrt(k_perp^2 + xi^2 / c^2) >= zeta``, with
``K(eps) = sqrt((eps - 1) zeta^2 + y^2)``.

Real axis variables: ``u = 2 a omega / c`` and ``t = k_perp c / omega``, with
``K(eps) = u sqrt(eps - t^2)`` on the branch ``Im K >= 0`` (``Re K >= 0`` when
real). Propagating vacuum waves have ``t < 1``, evanescent ones ``t > 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .constants import C
from .dielectric import Constant, DielectricModel, eps_imag_axis, eps_real_axis, static_limit

VACUUM = Constant(1.0)

# exponent beyond which exp(-x) is taken as exactly zero
UNDERFLOW_EXPONENT = 700.0


class Polarization(enum.Enum):
    TM = "TM"
    TE = "TE"


class BranchError(ArithmeticError):
    """A square root landed on the wrong Riemann sheet."""


@dataclass(frozen=True)
class LayeredPlate:
    """Metallic coating of thickness ``thickness`` (m) on a semi-infinite substrate."""

    coating: DielectricModel
    thickness: float
    substrate: DielectricModel

    def __post_init__(self):
        if not self.thickness > 0:
            raise ValueError(f"coating thickness must be positive, got {self.thickness}")


def k_imag(eps, zeta, y, a):
    """Wavevector ``(1/2a) sqrt((eps - 1) zeta^2 + y^2)`` in 1/m."""
    return np.sqrt((np.asarray(eps) - 1.0) * np.asarray(zeta) ** 2 + np.asarray(y) ** 2) / (2.0 * a)


def fresnel(eps, eps_tilde, k_eps, k_eps_tilde, pol: Polarization):
    """Reflection amplitude of the interface from medium ``eps`` to ``eps_tilde``.

    ``r_TM = (eps_t k - eps k_t) / (eps_t k + eps k_t)`` and
    ``r_TE = (k - k_t) / (k + k_t)``. Works for real and complex arguments.
    """
    if pol is Polarization.TM:
        num_a = eps_tilde * k_eps
        num_b = eps * k_eps_tilde
    else:
        num_a = k_eps
        num_b = k_eps_tilde
    den = num_a + num_b
    if np.any(den == 0):
        if np.any((num_a == 0) & (num_b == 0)):
            raise ZeroDivisionError("degenerate Fresnel denominator")
    return (num_a - num_b) / den


def _film(r1, r2, e):
    return (r1 + r2 * e) / (1.0 + r1 * r2 * e)


def _decay(x):
    """``exp(-x)`` with exact zero beyond the underflow exponent."""
    x = np.asarray(x, dtype=float)
    return np.where(x > UNDERFLOW_EXPONENT, 0.0, np.exp(-np.minimum(x, UNDERFLOW_EXPONENT)))


def _static_ratio(p_num, c_num, p_den, c_den):
    """Limit of ``eps_num / eps_den`` as ``xi -> 0`` for the given asymptotic orders."""
    eps_num = 1.0 + c_num if p_num == 0 else np.inf
    eps_den = 1.0 + c_den if p_den == 0 else np.inf
    if p_num == 0 and p_den == 0:
        return eps_num / eps_den
    if p_num > p_den:
        return np.inf
    if p_num < p_den:
        return 0.0
    return c_num / c_den


def _static_k(p, c, y, a):
    if p == 2:
        return np.sqrt(c * (2.0 * a / C) ** 2 + y * y)
    return y


def _static_fresnel(m1, m2, y, a, pol):
    (p1, c1), (p2, c2) = static_limit(m1), static_limit(m2)
    k1 = _static_k(p1, c1, y, a)
    k2 = _static_k(p2, c2, y, a)
    # at y = 0 both wavevectors can vanish; the ratio then has its y -> 0+ limit
    k1, k2 = np.broadcast_arrays(k1, k2)
    both_zero = (k1 + k2) == 0
    den = np.where(both_zero, 1.0, k1 + k2)
    if pol is Polarization.TE:
        return np.where(both_zero, 0.0, (k1 - k2) / den)
    rho = _static_ratio(p2, c2, p1, c1)  # eps2 / eps1
    if np.isinf(rho):
        return np.ones_like(y)
    if rho == 0:
        return -np.ones_like(y)
    return np.where(both_zero, (rho - 1.0) / (rho + 1.0),
                    (rho * k1 - k2) / np.where(both_zero, 1.0, rho * k1 + k2))


def _static_reflection(plate, y, a, pol):
    r1 = _static_fresnel(VACUUM, plate.coating, y, a, pol)
    r2 = _static_fresnel(plate.coating, plate.substrate, y, a, pol)
    p, c = static_limit(plate.coating)
    km = _static_k(p, c, y, a)
    e = _decay(plate.thickness / a * km)
    # a unimodular r1 is reproduced exactly by the film formula; taking it directly
    # also covers the 0/0 at y = 0
    perfect = np.abs(r1) == 1.0
    return np.where(perfect, r1, _film(r1, r2, np.where(perfect, 0.0, e)))


def plate_reflection_imag(plate: LayeredPlate, zeta, y, a, pol: Polarization):
    """Plate reflection coefficient at imaginary frequency, real with ``|R| <= 1``.

    ``zeta = 0`` entries use the analytic zero-frequency limits of the
    permittivities (see :func:`casimir_neq.dielectric.static_limit`).
    """
    zeta, y = np.broadcast_arrays(np.asarray(zeta, dtype=float), np.asarray(y, dtype=float))
    out = np.empty(zeta.shape)
    zero = zeta == 0
    if np.any(zero):
        out[zero] = _static_reflection(plate, y[zero], a, pol)
    pos = ~zero
    if np.any(pos):
        z, yy = zeta[pos], y[pos]
        xi = z * C / (2.0 * a)
        em = eps_imag_axis(plate.coating, xi)
        es = eps_imag_axis(plate.substrate, xi)
        km = np.sqrt((em - 1.0) * z * z + yy * yy)
        ks = np.sqrt((es - 1.0) * z * z + yy * yy)
        r1 = fresnel(1.0, em, yy, km, pol)
        r2 = fresnel(em, es, km, ks, pol)
        out[pos] = _film(r1, r2, _decay(plate.thickness / a * km))
    return out


def branch_sqrt(z):
    """Square root with ``Im >= 0`` and, on the real axis, ``Re >= 0``."""
    s = np.sqrt(np.asarray(z, dtype=complex))
    # -0.0 imaginary parts would otherwise select the lower sheet
    s = np.where(s.imag < 0, -s, s)
    if np.any(s.imag < 0):
        raise BranchError("square root with negative imaginary part")
    return s


@dataclass(frozen=True)
class RealAxisCoefficients:
    """Reflection amplitudes and, for propagating waves, absorptivities ``1 - |R|^2``.

    ``e_tm`` and ``e_te`` bound the rounding error of the amplitudes when requested.
    """

    r_tm: np.ndarray
    r_te: np.ndarray
    a_tm: np.ndarray | None = None
    a_te: np.ndarray | None = None
    e_tm: np.ndarray | None = None
    e_te: np.ndarray | None = None

    def r(self, pol: Polarization):
        return self.r_tm if pol is Polarization.TM else self.r_te

    def absorptivity(self, pol: Polarization):
        return self.a_tm if pol is Polarization.TM else self.a_te

    def rounding(self, pol: Polarization):
        return self.e_tm if pol is Polarization.TM else self.e_te


def _one_minus_abs2(num_a, num_b):
    """``1 - |(A - B) / (A + B)|^2 = 4 Re(A conj(B)) / |A + B|^2``."""
    return 4.0 * (num_a * np.conj(num_b)).real / np.abs(num_a + num_b) ** 2


def real_axis_coefficients(plate: LayeredPlate, u, one_minus_t2, a, absorptivity: bool = False,
                           rounding: bool = False):
    """Plate reflection at real frequency for both polarizations.

    The transverse variable enters as ``1 - t^2``, which keeps full precision on
    either side of the light line; evanescent waves have ``1 - t^2 < 0``.
    With ``absorptivity`` (propagating waves only) ``1 - |R|^2`` is also
    returned, computed without the cancellation of the direct difference.
    With ``rounding`` a first-order bound on the rounding error of each amplitude
    is returned; it is dominated by the film phase when ``(d/a) |K|`` is large.
    """
    u, q = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(one_minus_t2, dtype=float))
    omega = u * C / (2.0 * a)
    em = eps_real_axis(plate.coating, omega)
    es = eps_real_axis(plate.substrate, omega)
    k0 = u * branch_sqrt(q + 0j)
    km = u * branch_sqrt(em - 1.0 + q)
    ks = u * branch_sqrt(es - 1.0 + q)
    arg = (plate.thickness / a) * km
    phase = np.exp(1j * arg)
    eps = np.finfo(float).eps
    out = {}
    for pol, (a1, b1, a2, b2) in (
        (Polarization.TM, (em * k0, km, es * km, em * ks)),
        (Polarization.TE, (k0, km, km, ks)),
    ):
        r1 = (a1 - b1) / (a1 + b1)
        r2 = (a2 - b2) / (a2 + b2)
        v = r2 * phase
        den = 1.0 + r1 * v
        out["r_" + pol.value.lower()] = (r1 + v) / den
        if rounding:
            # dR/dr1 = (1 - v^2) / den^2, dR/dv = (1 - r1^2) / den^2
            dv = 4.0 * eps * np.abs(v) * (1.0 + np.abs(arg))
            out["e_" + pol.value.lower()] = (
                (4.0 * eps * np.abs(1.0 - v * v) + dv * np.abs(1.0 - r1 * r1)) / np.abs(den) ** 2
                + 4.0 * eps * np.abs(out["r_" + pol.value.lower()]))
        if absorptivity:
            # 1 - |v|^2 = (1 - |E|^2) + |E|^2 (1 - |r2|^2)
            e2 = np.abs(phase) ** 2
            lossy = -np.expm1(-2.0 * (plate.thickness / a) * km.imag)
            one_v = lossy + e2 * _one_minus_abs2(a2, b2)
            num = _one_minus_abs2(a1, b1) * one_v - 4.0 * r1.imag * v.imag
            out["a_" + pol.value.lower()] = num / np.abs(den) ** 2
    return RealAxisCoefficients(**out)


def plate_reflection_real(plate: LayeredPlate, u, t, a, pol: Polarization):
    """Complex plate reflection coefficient at ``u = 2 a omega / c`` and ``t = k_perp c / omega``."""
    t = np.asarray(t, dtype=float)
    return real_axis_coefficients(plate, u, (1.0 - t) * (1.0 + t), a).r(pol)
