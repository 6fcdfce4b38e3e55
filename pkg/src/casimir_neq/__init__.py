"""Equilibrium and nonequilibrium Casimir pressures between layered plates."""

from .constants import CONST, PhysicalConstants
from .dielectric import (Constant, Drude, OpticalDataTable, Plasma, Tabulated, bundled_gold_table,
                         eps_imag_axis, eps_real_axis, read_optical_table)
from .equilibrium import (DEFAULT_SETTINGS, QuadratureSettings, SystemConfig, pressure_eq,
                          pressure_eq_gradient)
from .nonequilibrium import (DifferentialResult, GradientResult, NeqResult, PressureBreakdown, delta_p_neq,
                             delta_p_neq_gradient, differential_gradient, differential_pressure,
                             total_pressure, total_pressure_gradient)
from .quadrature import QuadratureError, SeriesError, integrate_adaptive
from .reflection import VACUUM, LayeredPlate, Polarization, plate_reflection_imag, plate_reflection_real

__version__ = "0.1.0"

__all__ = [
    "CONST", "PhysicalConstants",
    "Constant", "Drude", "OpticalDataTable", "Plasma", "Tabulated", "bundled_gold_table",
    "eps_imag_axis", "eps_real_axis", "read_optical_table",
    "DEFAULT_SETTINGS", "QuadratureSettings", "SystemConfig", "pressure_eq", "pressure_eq_gradient",
    "DifferentialResult", "GradientResult", "NeqResult", "PressureBreakdown", "delta_p_neq",
    "delta_p_neq_gradient", "differential_gradient", "differential_pressure", "total_pressure",
    "total_pressure_gradient",
    "QuadratureError", "SeriesError", "integrate_adaptive",
    "VACUUM", "LayeredPlate", "Polarization", "plate_reflection_imag", "plate_reflection_real",
]
