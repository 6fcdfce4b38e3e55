"""Physical constants (CODATA, SI) used throughout the package."""

from __future__ import annotations

from dataclasses import dataclass

from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    kB: float = _sc.Boltzmann
    hbar: float = _sc.hbar
    c: float = _sc.c
    sigma: float = _sc.Stefan_Boltzmann
    eV: float = _sc.eV


CONST = PhysicalConstants()

KB = CONST.kB
HBAR = CONST.hbar
C = CONST.c
SIGMA = CONST.sigma
EV = CONST.eV


def ev_to_rad_s(energy_ev):
    """Convert a photon energy in eV to an angular frequency in rad/s."""
    return energy_ev * EV / HBAR


def rad_s_to_ev(omega):
    return omega * HBAR / EV
