"""Dielectric response of metals and substrates.

Models are immutable and evaluated in SI units (angular frequencies in rad/s).
Photon energies in eV are accepted only by the ``from_ev`` constructors and the
optical-data reader, and converted once.

On the imaginary axis the permittivity is real: ``eps_imag_axis(model, xi)``
returns ``eps(i xi)``. At real frequencies ``eps_real_axis`` returns a complex
array with nonnegative imaginary part.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Union

import numpy as np

from .constants import ev_to_rad_s, rad_s_to_ev
from .quadrature import integrate_adaptive


class DomainError(ValueError):
    """Frequency outside the domain of an evaluation."""


class ModelError(ValueError):
    """Inconsistent or incomplete model parameters."""


class OpticalDataError(ValueError):
    """Malformed optical data file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Drude:
    """Lossy free-electron metal, ``eps = 1 - wp^2 / (w (w + i gamma))``."""

    omega_p: float
    gamma: float

    def __post_init__(self):
        if not self.omega_p > 0:
            raise ModelError(f"plasma frequency must be positive, got {self.omega_p}")
        if not self.gamma >= 0:
            raise ModelError(f"relaxation frequency must be nonnegative, got {self.gamma}")

    @classmethod
    def from_ev(cls, omega_p_ev: float, gamma_ev: float) -> "Drude":
        return cls(ev_to_rad_s(omega_p_ev), ev_to_rad_s(gamma_ev))


@dataclass(frozen=True)
class Plasma:
    """Lossless free-electron metal, ``eps = 1 - wp^2 / w^2``."""

    omega_p: float

    def __post_init__(self):
        if not self.omega_p > 0:
            raise ModelError(f"plasma frequency must be positive, got {self.omega_p}")

    @classmethod
    def from_ev(cls, omega_p_ev: float) -> "Plasma":
        return cls(ev_to_rad_s(omega_p_ev))


@dataclass(frozen=True)
class Constant:
    """Dispersionless dielectric."""

    eps: float

    def __post_init__(self):
        if not self.eps >= 1:
            raise ModelError(f"constant permittivity must be >= 1, got {self.eps}")


@dataclass(frozen=True)
class OpticalDataTable:
    """Refractive index ``n + i k`` sampled at strictly increasing photon energies (eV)."""

    energy_ev: np.ndarray
    n: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energy_ev, dtype=float)
        n = np.asarray(self.n, dtype=float)
        k = np.asarray(self.k, dtype=float)
        if not (e.ndim == n.ndim == k.ndim == 1 and e.size == n.size == k.size):
            raise OpticalDataError("energy, n and k must be 1-D arrays of equal length")
        if e.size < 2:
            raise OpticalDataError("an optical table needs at least 2 rows")
        if np.any(np.diff(e) <= 0) or e[0] <= 0:
            raise OpticalDataError("photon energies must be positive and strictly increasing")
        if np.any(n < 0) or np.any(k < 0):
            raise OpticalDataError("n and k must be nonnegative")
        for name, arr in (("energy_ev", e), ("n", n), ("k", k)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def eps_imag_part(self) -> np.ndarray:
        """Absorptive part ``Im eps = 2 n k`` at the table energies."""
        return 2.0 * self.n * self.k

    @property
    def omega(self) -> np.ndarray:
        return ev_to_rad_s(self.energy_ev)

    def __eq__(self, other):
        if not isinstance(other, OpticalDataTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in ("energy_ev", "n", "k"))

    def __hash__(self):
        return hash((self.energy_ev.tobytes(), self.n.tobytes(), self.k.tobytes()))


@dataclass(frozen=True)
class Tabulated:
    """Optical data inside the table, a free-electron model below it, vacuum above it.

    Interpolation of ``n`` and ``k`` is linear in log-log coordinates. Zero
    values of ``n`` or ``k`` fall back to linear interpolation for that column.
    """

    table: OpticalDataTable
    tail: Union[Drude, Plasma, None] = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.tail is not None and not isinstance(self.tail, (Drude, Plasma)):
            raise ModelError("tabulated tail must be a Drude or Plasma model")

    @cached_property
    def _log_nodes(self):
        return np.log(self.table.omega)


DielectricModel = Union[Drude, Plasma, Constant, Tabulated]


def _interp_column(x, xp, fp):
    if np.all(fp > 0):
        return np.exp(np.interp(np.log(x), np.log(xp), np.log(fp)))
    return np.interp(np.log(x), np.log(xp), fp)


def _tabulated_nk(model: Tabulated, omega):
    """Interpolated ``(n, k)`` inside the table range."""
    tab = model.table
    return _interp_column(omega, tab.omega, tab.n), _interp_column(omega, tab.omega, tab.k)


def _require_tail(model: Tabulated):
    if model.tail is None:
        raise ModelError("tabulated model needs a Drude or Plasma low-frequency tail")
    return model.tail


def eps_real_axis(model: DielectricModel, omega) -> np.ndarray:
    """Complex permittivity at real angular frequency ``omega > 0`` (rad/s)."""
    w = np.asarray(omega, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("real-axis permittivity requires omega > 0")
    if isinstance(model, Drude) and model.gamma > 0:
        return 1.0 - model.omega_p**2 / (w * (w + 1j * model.gamma))
    if isinstance(model, (Plasma, Drude)):
        return (1.0 - (model.omega_p / w) ** 2) + 0j
    if isinstance(model, Constant):
        return np.full(w.shape, model.eps, dtype=complex)
    if isinstance(model, Tabulated):
        tail = _require_tail(model)
        lo, hi = model.table.omega[0], model.table.omega[-1]
        out = np.ones(w.shape, dtype=complex)
        below = w < lo
        inside = (w >= lo) & (w <= hi)
        if np.any(below):
            out[below] = eps_real_axis(tail, w[below])
        if np.any(inside):
            n, k = _tabulated_nk(model, w[inside])
            out[inside] = (n * n - k * k) + 2j * n * k
        return out
    raise ModelError(f"unknown dielectric model {model!r}")


def static_limit(model: DielectricModel) -> tuple[int, float]:
    """Small-frequency behaviour ``eps(i xi) - 1 ~ C / xi**p``; returns ``(p, C)``.

    ``p = 1`` for a lossy metal (``C = wp^2 / gamma``), ``p = 2`` for a lossless
    one (``C = wp^2``) and ``p = 0`` for a dielectric (``C = eps - 1``).
    """
    if isinstance(model, Drude):
        if model.gamma == 0:
            return 2, model.omega_p**2
        return 1, model.omega_p**2 / model.gamma
    if isinstance(model, Plasma):
        return 2, model.omega_p**2
    if isinstance(model, Constant):
        return 0, model.eps - 1.0
    if isinstance(model, Tabulated):
        return static_limit(_require_tail(model))
    raise ModelError(f"unknown dielectric model {model!r}")


def eps_imag_axis(model: DielectricModel, xi, allow_static: bool = False) -> np.ndarray:
    """Permittivity ``eps(i xi)`` at imaginary frequency ``xi >= 0`` (rad/s).

    Metals diverge at ``xi = 0``. Such points raise :class:`DomainError` unless
    ``allow_static`` is set, in which case they evaluate to ``inf``; the zero
    frequency term of a Matsubara sum should instead go through
    :func:`static_limit`.
    """
    x = np.asarray(xi, dtype=float)
    if np.any(~(x >= 0)):
        raise DomainError("imaginary-axis permittivity requires xi >= 0")
    if isinstance(model, Constant):
        return np.full(x.shape, float(model.eps))
    zero = x == 0
    if np.any(zero) and not allow_static:
        raise DomainError("metallic permittivity diverges at xi = 0; use static_limit")
    safe = np.where(zero, 1.0, x)
    if isinstance(model, (Plasma, Drude)):
        # subnormal xi overflows to inf, the correct static limit
        with np.errstate(divide="ignore", over="ignore"):
            if isinstance(model, Drude) and model.gamma > 0:
                out = 1.0 + model.omega_p**2 / (safe * (safe + model.gamma))
            else:
                out = 1.0 + (model.omega_p / safe) ** 2
    elif isinstance(model, Tabulated):
        out = _kramers_kronig(model, safe)
    else:
        raise ModelError(f"unknown dielectric model {model!r}")
    return np.where(zero, np.inf, out)


def _drude_tail_integral(tail: Drude, w_max: float, xi: np.ndarray) -> np.ndarray:
    """``(2/pi) int_0^w_max w Im eps_D(w) / (w^2 + xi^2) dw`` in closed form."""
    wp2, g = tail.omega_p**2, tail.gamma
    if g == 0:
        return np.zeros_like(xi)
    d = xi * xi - g * g
    near = np.abs(d) < 1e-6 * xi * xi
    dd = np.where(near, 1.0, d)
    closed = wp2 * g / dd * (np.arctan(w_max / g) / g - np.arctan(w_max / xi) / xi)
    # xi close to gamma: the two arctan terms cancel, take the derivative form instead
    b = xi
    lim = wp2 * g * (np.arctan(w_max / b) / (2 * b**3) + w_max / (2 * b * b * (w_max * w_max + b * b)))
    return (2.0 / np.pi) * np.where(near, lim, closed)


def _kramers_kronig(model: Tabulated, xi: np.ndarray, rel_tol: float = 1e-9) -> np.ndarray:
    """``1 + (2/pi) int_0^inf w Im eps(w) / (w^2 + xi^2) dw`` for a tabulated model."""
    tail = _require_tail(model)
    flat = np.atleast_1d(xi).ravel()
    out = np.empty(flat.shape)
    key = (rel_tol,)
    cache = model._cache.setdefault(key, {})
    todo = [i for i, v in enumerate(flat) if v not in cache]
    if todo:
        uniq = np.unique(flat[todo])
        nodes = model._log_nodes
        w_min = model.table.omega[0]

        def integrand(s):
            w = np.exp(s)
            n, k = _tabulated_nk(model, w)
            # dw = w ds
            return (2.0 * n * k * w * w)[None, :] / (w[None, :] ** 2 + uniq[:, None] ** 2)

        res = integrate_adaptive(integrand, nodes[0], nodes[-1], rel_tol=rel_tol,
                                 breakpoints=nodes, max_panels=200000)
        table_part = (2.0 / np.pi) * np.atleast_1d(res.value)
        if isinstance(tail, Drude):
            low = _drude_tail_integral(tail, w_min, uniq)
        else:
            # a lossless tail contributes only through its zero-frequency pole
            low = (tail.omega_p / uniq) ** 2
        for v, val in zip(uniq, 1.0 + table_part + low):
            cache[float(v)] = float(val)
    for i, v in enumerate(flat):
        out[i] = cache[float(v)]
    return out.reshape(np.shape(xi))


def ingest_optical_table(text) -> OpticalDataTable:
    """Parse three whitespace-separated columns: photon energy (eV), n, k.

    ``text`` is a string or a text stream. Blank lines and lines starting with
    ``#`` are skipped. Energies must be strictly increasing.
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    rows = []
    last_line = 0
    for lineno, line in enumerate(text, start=1):
        last_line = lineno
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        parts = body.split()
        if len(parts) != 3:
            raise OpticalDataError(f"expected 3 columns (energy n k), found {len(parts)}", lineno)
        try:
            e, n, k = (float(p) for p in parts)
        except ValueError as exc:
            raise OpticalDataError(f"non-numeric value ({exc})", lineno) from None
        if not all(np.isfinite((e, n, k))):
            raise OpticalDataError("non-finite value", lineno)
        if e <= 0:
            raise OpticalDataError(f"photon energy must be positive, got {e}", lineno)
        if n < 0 or k < 0:
            raise OpticalDataError("n and k must be nonnegative", lineno)
        if rows and e <= rows[-1][1]:
            what = "duplicate" if e == rows[-1][1] else "decreasing"
            raise OpticalDataError(f"{what} photon energy {e} (energies must be strictly increasing)", lineno)
        rows.append((lineno, e, n, k))
    if len(rows) < 2:
        raise OpticalDataError(f"an optical table needs at least 2 rows, found {len(rows)}", last_line or None)
    arr = np.array([r[1:] for r in rows])
    return OpticalDataTable(arr[:, 0], arr[:, 1], arr[:, 2])


def read_optical_table(path) -> OpticalDataTable:
    with open(path, encoding="utf-8") as fh:
        return ingest_optical_table(fh)


def format_optical_table(table: OpticalDataTable, header: str = "") -> str:
    lines = [f"# {h}" for h in header.splitlines()]
    lines.append("# energy_eV n k")
    lines += [f"{e:.10e} {n:.10e} {k:.10e}" for e, n, k in zip(table.energy_ev, table.n, table.k)]
    return "\n".join(lines) + "\n"


def refractive_index(eps) -> tuple[np.ndarray, np.ndarray]:
    """``(n, k)`` with ``n + i k = sqrt(eps)`` and ``k >= 0``."""
    eps = np.asarray(eps, dtype=complex)
    mod = np.abs(eps)
    re, im = eps.real, eps.imag
    # pick the well-conditioned root first, then recover the other from im = 2 n k
    n_direct = np.sqrt(np.maximum(0.5 * (mod + re), 0.0))
    k_direct = np.sqrt(np.maximum(0.5 * (mod - re), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        n = np.where(re >= 0, n_direct, np.where(k_direct > 0, im / (2 * k_direct), 0.0))
        k = np.where(re >= 0, np.where(n_direct > 0, im / (2 * n_direct), 0.0), k_direct)
    return n, np.abs(k)


def synthetic_drude_table(model: Drude, e_min_ev: float = 0.1, e_max_ev: float = 100.0,
                          points: int = 400) -> OpticalDataTable:
    """Sample a Drude model on a log-spaced energy grid."""
    energy = np.geomspace(e_min_ev, e_max_ev, points)
    n, k = refractive_index(eps_real_axis(model, ev_to_rad_s(energy)))
    return OpticalDataTable(energy, n, k)


def bundled_gold_table() -> OpticalDataTable:
    """Synthetic gold data shipped with the package (Drude, 9.0 eV / 0.035 eV, 0.1-100 eV)."""
    ref = resources.files("casimir_neq") / "data" / "au_drude_synthetic.txt"
    with ref.open("r", encoding="utf-8") as fh:
        return ingest_optical_table(fh)


def describe(model: DielectricModel) -> str:
    if isinstance(model, Drude):
        return f"Drude(wp={rad_s_to_ev(model.omega_p):.4g} eV, gamma={rad_s_to_ev(model.gamma):.4g} eV)"
    if isinstance(model, Plasma):
        return f"Plasma(wp={rad_s_to_ev(model.omega_p):.4g} eV)"
    if isinstance(model, Constant):
        return f"Constant(eps={model.eps:g})"
    tail = describe(model.tail) if model.tail is not None else "none"
    return f"Tabulated({model.table.energy_ev.size} rows, tail={tail})"
