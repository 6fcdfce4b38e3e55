"""Equilibrium Lifshitz pressure and its separation gradient.

With ``x = R1 R2 exp(-y)`` for each polarization,

    P(a, T)  = -(kB T / 8 pi a^3) sum'_l int_{zeta_l}^inf y^2 x / (1 - x) dy
    P'(a, T) = +(kB T / 8 pi a^4) sum'_l int_{zeta_l}^inf y^3 x / (1 - x)^2 dy

where the primed sum halves the ``l = 0`` term and
``zeta_l = 4 pi a kB T l / (hbar c)``. Reflection coefficients depend on ``a``
only through the dimensionless variables, so the gradient formula is the exact
derivative of the pressure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR, KB, C
from .quadrature import SeriesResult, integrate_adaptive, sum_with_tail
from .reflection import LayeredPlate, Polarization, plate_reflection_imag


@dataclass(frozen=True)
class SystemConfig:
    """Two plates at separation ``a`` (m), plate temperatures ``T1``, ``T2`` and environment ``T3`` (K).

    ``T3`` defaults to ``T1``.
    """

    plate1: LayeredPlate
    plate2: LayeredPlate
    a: float
    T1: float
    T2: float
    T3: float | None = None

    def __post_init__(self):
        if self.T3 is None:
            object.__setattr__(self, "T3", self.T1)
        if not self.a > 0:
            raise ValueError(f"separation must be positive, got {self.a}")
        for name in ("T1", "T2", "T3"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances and truncation rules shared by all pressure computations.

    rel_tol
        Relative tolerance of every one-dimensional integral.
    abs_tol
        Absolute tolerance (Pa, or Pa/m for gradients) of the nonequilibrium integrals.
    matsubara_tail_tol
        Matsubara summation stops once a term falls below this fraction of the sum.
    max_matsubara_terms
        Hard limit on the number of Matsubara terms.
    y_cutoff_decades
        The y-integral is truncated where ``y^n exp(-y)`` is this many decades below its peak.
    u_cutoff_exponent
        Frequency integrals stop at ``hbar omega / (kB max(T1, T2))`` equal to this value.
    matsubara_batch
        Matsubara terms integrated together in one vector-valued quadrature.
    workers
        Threads used for independent batches; results do not depend on it.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 0.0
    matsubara_tail_tol: float = 1e-9
    max_matsubara_terms: int = 100000
    y_cutoff_decades: float = 16.0
    u_cutoff_exponent: float = 40.0
    matsubara_batch: int = 32
    workers: int = 1
    max_panels: int = 20000

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol}")
        if self.max_matsubara_terms < 100:
            raise ValueError("max_matsubara_terms must be at least 100")
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be nonnegative")
        if self.workers < 1 or self.matsubara_batch < 1:
            raise ValueError("workers and matsubara_batch must be >= 1")


DEFAULT_SETTINGS = QuadratureSettings()


@dataclass(frozen=True)
class MatsubaraResult:
    value: float
    tail_estimate: float
    terms_used: int
    prefactor: float


def matsubara_zeta(a, T, l):
    """Dimensionless Matsubara frequency ``4 pi a kB T l / (hbar c)``."""
    l = np.asarray(l)
    if np.any(l < 0):
        raise ValueError("Matsubara index must be nonnegative")
    return 4.0 * math.pi * a * KB * T * l / (HBAR * C)


def _y_cutoff(zeta, power, decades):
    """Length ``S`` such that ``y^power exp(-y)`` at ``y = zeta + S`` is ``decades`` below its peak."""
    ymax = np.maximum(zeta, float(power))
    target = decades * math.log(10.0) + ymax - zeta
    s = np.asarray(target, dtype=float)
    for _ in range(30):
        s_new = target + power * np.log((zeta + s) / ymax)
        if np.all(np.abs(s_new - s) < 1e-6):
            s = s_new
            break
        s = s_new
    return np.maximum(s, 1.0)


def _one_minus(x_r, y):
    """``1 - r exp(-y)`` as ``-expm1(-y) + (1 - r) exp(-y)``; exact near ``r = 1``, ``y = 0``."""
    return -np.expm1(-y) + (1.0 - x_r) * np.exp(-y)


def _integrand_factory(config: SystemConfig, zeta, gradient: bool):
    zeta = np.asarray(zeta, dtype=float)
    a = config.a

    def f(s):
        y = zeta[:, None] + s[None, :]
        z = np.broadcast_to(zeta[:, None], y.shape)
        total = np.zeros(y.shape)
        for pol in Polarization:
            rr = plate_reflection_imag(config.plate1, z, y, a, pol) * plate_reflection_imag(config.plate2, z, y, a, pol)
            ey = np.exp(-y)
            den = _one_minus(rr, y)
            x = rr * ey
            if gradient:
                total += y**3 * x / den**2
            else:
                total += y**2 * x / den
        return total

    return f


def _matsubara_terms(config: SystemConfig, T: float, settings: QuadratureSettings, gradient: bool):
    z1 = float(matsubara_zeta(config.a, T, 1))
    power = 3 if gradient else 2

    def term(ls):
        ls = np.atleast_1d(ls)
        zeta = z1 * ls
        hi = float(np.max(_y_cutoff(zeta, power, settings.y_cutoff_decades)))
        res = integrate_adaptive(_integrand_factory(config, zeta, gradient), 0.0, hi,
                                 rel_tol=settings.rel_tol, initial_panels=4,
                                 max_panels=settings.max_panels)
        vals = np.atleast_1d(np.asarray(res.value, dtype=float)).copy()
        vals[ls == 0] *= 0.5
        return vals

    return term


def _matsubara_sum(config, T, settings, gradient) -> MatsubaraResult:
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    term = _matsubara_terms(config, T, settings, gradient)
    res: SeriesResult = sum_with_tail(term, tail_tol=settings.matsubara_tail_tol,
                                      max_terms=settings.max_matsubara_terms,
                                      batch=settings.matsubara_batch, workers=settings.workers)
    a = config.a
    if gradient:
        pref = KB * T / (8.0 * math.pi * a**4)
    else:
        pref = -KB * T / (8.0 * math.pi * a**3)
    return MatsubaraResult(pref * res.value, abs(pref) * res.tail_estimate, res.terms_used, pref)


def pressure_eq_detailed(config: SystemConfig, T: float,
                         settings: QuadratureSettings = DEFAULT_SETTINGS) -> MatsubaraResult:
    """Equilibrium pressure with its Matsubara tail bound (Pa)."""
    return _matsubara_sum(config, T, settings, gradient=False)


def pressure_eq(config: SystemConfig, T: float, settings: QuadratureSettings = DEFAULT_SETTINGS) -> float:
    """Equilibrium Casimir pressure in Pa at temperature ``T``; negative means attraction."""
    return _matsubara_sum(config, T, settings, gradient=False).value


def pressure_eq_gradient_detailed(config: SystemConfig, T: float,
                                  settings: QuadratureSettings = DEFAULT_SETTINGS) -> MatsubaraResult:
    return _matsubara_sum(config, T, settings, gradient=True)


def pressure_eq_gradient(config: SystemConfig, T: float, settings: QuadratureSettings = DEFAULT_SETTINGS) -> float:
    """Separation derivative ``dP_eq/da`` in Pa/m."""
    return _matsubara_sum(config, T, settings, gradient=True).value
