"""Command-line front end: presets, sweeps, discriminability reports and unit conversion.

Data go to standard output (or ``--out``) as CSV with unit-suffixed headers;
progress and warnings go to standard error.

Subcommands::

    casimir-neq pressure   total pressure on one plate with its breakdown
    casimir-neq gradient   gradient of the total pressure
    casimir-neq sweep      a quantity against separation or T2 for several models
    casimir-neq report     model differences compared with the sensor sensitivities
    casimir-neq asymptote  the antisymmetric term at large separations
    casimir-neq convert    pressure to spring extension
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Callable, Iterable, Sequence

import numpy as np
import yaml

from .dielectric import (Constant, DielectricModel, Drude, Plasma, Tabulated, bundled_gold_table,
                         read_optical_table)
from .equilibrium import DEFAULT_SETTINGS, QuadratureSettings, SystemConfig, pressure_eq
from .nonequilibrium import (delta_p_neq, differential_gradient, differential_pressure, total_pressure,
                             total_pressure_gradient)
from .quadrature import QuadratureError, SeriesError
from .reflection import VACUUM, LayeredPlate

log = logging.getLogger("casimir_neq")

# gold, from the plasma frequency and the relaxation frequency at room temperature
GOLD_PLASMA_EV = 9.0
GOLD_GAMMA_EV = 0.035

# low-frequency permittivities of the CANNEX substrates; overridable
EPS_SILICON = 11.66
EPS_SILICA = 3.81

MODELS = ("drude", "plasma", "tabulated")


def gold(model: str = "drude", data: str | None = None, tail: str = "drude") -> DielectricModel:
    """Gold permittivity: ``drude``, ``plasma`` or ``tabulated`` (file ``data`` or the bundled table)."""
    if model == "drude":
        return Drude.from_ev(GOLD_PLASMA_EV, GOLD_GAMMA_EV)
    if model == "plasma":
        return Plasma.from_ev(GOLD_PLASMA_EV)
    if model == "tabulated":
        table = read_optical_table(data) if data else bundled_gold_table()
        return Tabulated(table, gold(tail))
    raise ValueError(f"unknown model {model!r}; expected one of {', '.join(MODELS)}")


@dataclass(frozen=True)
class SensorConfig:
    """Plate sensor of radius ``radius`` (m) on springs.

    ``spring_constant`` (N/m) and ``effective_mass`` (kg) have no defaults;
    the sensitivities are for pressure (Pa) and pressure gradient (Pa/m), and
    measurements of differences are ``differential_factor`` times less sensitive.
    """

    radius: float = 5.742e-3
    pressure_sensitivity: float = 1e-9
    gradient_sensitivity: float = 1e-3
    differential_factor: float = 2.0
    spring_constant: float | None = None
    effective_mass: float | None = None

    def __post_init__(self):
        for f in ("radius", "pressure_sensitivity", "gradient_sensitivity", "differential_factor"):
            if not getattr(self, f) > 0:
                raise ValueError(f"{f} must be positive, got {getattr(self, f)}")
        for f in ("spring_constant", "effective_mass"):
            v = getattr(self, f)
            if v is not None and not v > 0:
                raise ValueError(f"{f} must be positive when given, got {v}")

    @property
    def differential_pressure_sensitivity(self) -> float:
        return self.differential_factor * self.pressure_sensitivity

    @property
    def differential_gradient_sensitivity(self) -> float:
        return self.differential_factor * self.gradient_sensitivity

    @property
    def resonance_frequency(self) -> float | None:
        """``sqrt(k / m_eff)`` in rad/s, or None unless both are known."""
        if self.spring_constant is None or self.effective_mass is None:
            return None
        return math.sqrt(self.spring_constant / self.effective_mass)


def spring_extension(pressure: float, sensor: SensorConfig) -> float:
    """Signed change of the spring extension, ``pi R^2 P / k`` (m)."""
    if sensor.spring_constant is None:
        raise ValueError("spring_extension needs a spring constant")
    return math.pi * sensor.radius**2 * pressure / sensor.spring_constant


def preset_cannex(model: str = "drude", data: str | None = None) -> tuple[SystemConfig, SensorConfig]:
    """CANNEX plates: 200 nm Au on Si (upper) and 1 um Au on SiO2 (lower), 300 K / 310 K, a = 5 um."""
    au = gold(model, data)
    upper = LayeredPlate(au, 200e-9, Constant(EPS_SILICON))
    lower = LayeredPlate(au, 1e-6, Constant(EPS_SILICA))
    return SystemConfig(upper, lower, 5e-6, 300.0, 310.0, 300.0), SensorConfig()


def preset_thick(model: str = "drude", data: str | None = None) -> tuple[SystemConfig, SensorConfig]:
    """Two identical 1 um Au plates (vacuum behind the coating), 300 K / 500 K, a = 2 um."""
    plate = LayeredPlate(gold(model, data), 1e-6, VACUUM)
    return SystemConfig(plate, plate, 2e-6, 300.0, 500.0, 300.0), SensorConfig()


PRESETS: dict[str, Callable[..., tuple[SystemConfig, SensorConfig]]] = {
    "cannex": preset_cannex,
    "thick": preset_thick,
}


def with_model(config: SystemConfig, model: DielectricModel) -> SystemConfig:
    """Replace both coatings by ``model``, keeping thicknesses and substrates."""
    return replace(config, plate1=replace(config.plate1, coating=model),
                   plate2=replace(config.plate2, coating=model))


# quantity -> output columns (name, unit suffix)
QUANTITIES: dict[str, tuple[tuple[str, str], ...]] = {
    "pressure": (("total", "Pa"), ("eq_mean", "Pa"), ("delta_neq", "Pa"), ("blackbody", "Pa")),
    "gradient": (("gradient", "Pa_per_m"), ("gradient_eq_mean", "Pa_per_m"),
                 ("gradient_delta_neq", "Pa_per_m")),
    "differential": (("differential", "Pa"), ("differential_no_const", "Pa")),
    "differential_gradient": (("differential_gradient", "Pa_per_m"),),
    "ratio": (("ratio_to_eq", "1"),),
}


def quantity_columns(quantity: str) -> list[str]:
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}; expected one of {', '.join(QUANTITIES)}")
    return [f"{name}_{unit}" for name, unit in QUANTITIES[quantity]]


def evaluate(config: SystemConfig, quantities: Sequence[str], settings: QuadratureSettings = DEFAULT_SETTINGS,
             plate: int = 2, fast: bool = False) -> dict[str, float]:
    """Evaluate the requested quantities; the antisymmetric term is computed at most once."""
    out: dict[str, float] = {}
    neq = None
    if {"pressure", "differential", "ratio"} & set(quantities):
        neq = delta_p_neq(config, settings)
        for w in neq.warnings:
            log.warning("a=%g m: %s", config.a, w)
    for q in quantities:
        cols = quantity_columns(q)
        if q == "pressure":
            br = total_pressure(config, plate, settings, neq=neq)
            vals = (br.total, br.eq_mean, br.delta_neq, br.blackbody)
        elif q == "gradient":
            g = total_pressure_gradient(config, settings, fast=fast)
            vals = (g.total, g.eq_mean, g.delta_neq)
        elif q == "differential":
            d = differential_pressure(config, settings, neq=neq)
            vals = (d.value, d.without_constant)
        elif q == "differential_gradient":
            vals = (differential_gradient(config, settings, fast=fast),)
        else:
            p2 = total_pressure(config, 2, settings, neq=neq).total
            vals = (p2 / pressure_eq(config, config.T1, settings),)
        out.update(zip(cols, vals))
    return out


@dataclass(frozen=True)
class SweepSpec:
    """Sweep of ``variable`` (``a`` in m or ``T2`` in K) over ``points`` values from ``lo`` to ``hi``.

    Every point starts from ``template``; for each label in ``models`` both
    coatings are replaced by :func:`gold` of that label (``data`` feeds the
    tabulated model). ``variable="separation"`` is accepted for ``a``.
    """

    variable: str
    lo: float
    hi: float
    points: int
    template: SystemConfig
    models: tuple[str, ...] = ("drude",)
    quantities: tuple[str, ...] = ("pressure",)
    plate: int = 2
    fast: bool = False
    data: str | None = None

    def __post_init__(self):
        if self.variable == "separation":
            object.__setattr__(self, "variable", "a")
        if self.variable not in ("a", "T2"):
            raise ValueError(f"sweep variable must be 'a' or 'T2', got {self.variable!r}")
        if not self.lo < self.hi:
            raise ValueError("sweep range needs lo < hi")
        if self.points < 2:
            raise ValueError("sweep needs at least 2 points")
        if not self.models:
            raise ValueError("sweep needs at least one model")
        for m in self.models:
            if m not in MODELS:
                raise ValueError(f"unknown model {m!r}; expected one of {', '.join(MODELS)}")
        for q in self.quantities:
            quantity_columns(q)
        if self.plate not in (1, 2):
            raise ValueError("plate must be 1 or 2")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def header(self) -> list[str]:
        cols = ["a_m" if self.variable == "a" else "T2_K"]
        for m in self.models:
            for q in self.quantities:
                cols += [f"{m}_{c}" for c in quantity_columns(q)]
            cols.append(f"{m}_status")
        return cols


def _safe_point(config, spec: SweepSpec, settings, columns) -> tuple[dict, str]:
    try:
        return evaluate(config, spec.quantities, settings, spec.plate, spec.fast), "ok"
    except (QuadratureError, SeriesError, FloatingPointError, ArithmeticError) as exc:
        log.warning("%s=%g failed: %s", spec.variable, getattr(config, spec.variable), exc)
        return {c: math.nan for c in columns}, f"failed: {exc}"


def run_sweep(spec: SweepSpec, settings: QuadratureSettings = DEFAULT_SETTINGS) -> tuple[list[str], list[list]]:
    """Evaluate ``spec``; returns the header and the rows in sweep order.

    Points are evaluated concurrently with ``settings.workers`` threads. A point
    that fails to converge becomes a row with NaN values and a ``failed``
    status instead of aborting the sweep.
    """
    configs = {m: with_model(spec.template, gold(m, spec.data)) for m in spec.models}
    columns = [c for q in spec.quantities for c in quantity_columns(q)]
    jobs = [(v, m) for v in spec.values() for m in spec.models]

    def run(job):
        v, m = job
        log.info("%s = %g, model %s", spec.variable, v, m)
        return _safe_point(replace(configs[m], **{spec.variable: float(v)}), spec, settings, columns)

    if settings.workers > 1:
        with ThreadPoolExecutor(settings.workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    rows = []
    it = iter(results)
    for v in spec.values():
        row = [float(v)]
        for _ in spec.models:
            vals, status = next(it)
            row += [vals[c] for c in columns] + [status]
        rows.append(row)
    return spec.header(), rows


REPORT_QUANTITIES = {
    # quantity -> (column, sensitivity attribute)
    "pressure": ("total_Pa", "pressure_sensitivity"),
    "gradient": ("gradient_Pa_per_m", "gradient_sensitivity"),
    "differential": ("differential_Pa", "differential_pressure_sensitivity"),
    "differential_gradient": ("differential_gradient_Pa_per_m", "differential_gradient_sensitivity"),
}


def discriminability_report(configs: dict[str, SystemConfig], sensor: SensorConfig, a_values: Iterable[float],
                            settings: QuadratureSettings = DEFAULT_SETTINGS,
                            quantities: Sequence[str] = ("gradient",), fast: bool = False,
                            plate: int = 1) -> tuple[list[str], list[list]]:
    """Differences between the predictions of two models against the sensor sensitivities.

    For each separation and quantity the row holds both predictions, their
    difference, its ratio to the relevant sensitivity and whether that ratio
    exceeds one. Pressure rows refer to plate ``plate``.
    """
    if len(configs) != 2:
        raise ValueError("a discriminability report compares exactly two models")
    (m1, c1), (m2, c2) = configs.items()
    unknown = [q for q in quantities if q not in REPORT_QUANTITIES]
    if unknown:
        raise ValueError(f"unknown report quantities {unknown}")
    header = ["a_m", "quantity", f"{m1}_value", f"{m2}_value", "difference", "sensitivity", "ratio",
              "discriminable"]
    rows = []
    for a in a_values:
        v1 = evaluate(replace(c1, a=float(a)), quantities, settings, plate, fast)
        v2 = evaluate(replace(c2, a=float(a)), quantities, settings, plate, fast)
        for q in quantities:
            col, attr = REPORT_QUANTITIES[q]
            sens = getattr(sensor, attr)
            diff = v2[col] - v1[col]
            ratio = abs(diff) / sens
            rows.append([float(a), q, v1[col], v2[col], diff, sens, ratio, int(ratio > 1.0)])
    return header, rows


def large_separation_asymptote(config: SystemConfig, a_values: Sequence[float],
                               settings: QuadratureSettings = DEFAULT_SETTINGS) -> tuple[list[str], list[list]]:
    """Antisymmetric term and total separation-independent pressure at growing separations.

    The propagating part contains a contribution that does not depend on ``a``;
    it shows up as the limit of ``delta_neq`` as ``a`` grows. The plate-2 column
    adds the separation-independent radiation terms.
    """
    from .nonequilibrium import plate_blackbody

    header = ["a_m", "propagating_Pa", "evanescent_Pa", "delta_neq_Pa", "error_estimate_Pa",
              "delta_neq_plus_blackbody_plate1_Pa", "delta_neq_plus_blackbody_plate2_Pa"]
    rows = []
    for a in sorted(a_values):
        cfg = replace(config, a=float(a))
        r = delta_p_neq(cfg, settings)
        rows.append([float(a), r.propagating, r.evanescent, r.total, r.error_estimate,
                     r.total + plate_blackbody(cfg, 1), r.total + plate_blackbody(cfg, 2)])
    return header, rows


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "%.15e" % v
    return str(v)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])


# ---------------------------------------------------------------------------
# configuration files

def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    unknown = set(doc) - {"preset", "model", "data", "system", "sensor", "settings", "sweep", "report"}
    if unknown:
        raise ValueError(f"{path}: unknown sections {sorted(unknown)}")
    return doc


def _plate_from(doc: dict, base: LayeredPlate, coating: DielectricModel) -> LayeredPlate:
    unknown = set(doc) - {"thickness", "substrate_eps"}
    if unknown:
        raise ValueError(f"unknown plate keys {sorted(unknown)}")
    substrate = Constant(float(doc["substrate_eps"])) if "substrate_eps" in doc else base.substrate
    return LayeredPlate(coating, float(doc.get("thickness", base.thickness)), substrate)


def build_config(doc: dict, model: str, data: str | None) -> tuple[SystemConfig, SensorConfig]:
    """System and sensor from a configuration mapping on top of its preset (``cannex`` by default)."""
    preset = doc.get("preset", "cannex")
    if preset not in PRESETS:
        raise ValueError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    config, sensor = PRESETS[preset](model, data)
    sysdoc = dict(doc.get("system") or {})
    coating = config.plate1.coating
    p1 = _plate_from(sysdoc.pop("plate1", {}) or {}, config.plate1, coating)
    p2 = _plate_from(sysdoc.pop("plate2", {}) or {}, config.plate2, coating)
    unknown = set(sysdoc) - {"a", "T1", "T2", "T3"}
    if unknown:
        raise ValueError(f"unknown system keys {sorted(unknown)}")
    config = replace(config, plate1=p1, plate2=p2, **{k: float(v) for k, v in sysdoc.items()})
    sens = doc.get("sensor") or {}
    names = {f.name for f in fields(SensorConfig)}
    if set(sens) - names:
        raise ValueError(f"unknown sensor keys {sorted(set(sens) - names)}")
    sensor = replace(sensor, **{k: float(v) for k, v in sens.items()})
    return config, sensor


def build_settings(doc: dict, tol: float | None, workers: int | None) -> QuadratureSettings:
    s = dict(doc.get("settings") or {})
    names = {f.name for f in fields(QuadratureSettings)}
    if set(s) - names:
        raise ValueError(f"unknown settings keys {sorted(set(s) - names)}")
    if tol is not None:
        s["rel_tol"] = tol
    if workers is not None:
        s["workers"] = workers
    ints = {"max_matsubara_terms", "matsubara_batch", "workers", "max_panels"}
    return QuadratureSettings(**{k: (int(v) if k in ints else float(v)) for k, v in s.items()})


# ---------------------------------------------------------------------------
# command line

def _models(text: str | None, default: Sequence[str]) -> list[str]:
    if not text:
        return list(default)
    out = [m.strip() for m in text.split(",") if m.strip()]
    for m in out:
        if m not in MODELS:
            raise ValueError(f"unknown model {m!r}; expected one of {', '.join(MODELS)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS), help="base configuration (default cannex)")
    common.add_argument("--model", choices=MODELS, help="gold permittivity model (default drude)")
    common.add_argument("--data", help="optical data file (energy eV, n, k) for --model tabulated")
    common.add_argument("--config", help="YAML configuration file; flags override it")
    common.add_argument("--a", type=float, help="separation (m)")
    common.add_argument("--t1", type=float, help="temperature of plate 1 (K)")
    common.add_argument("--t2", type=float, help="temperature of plate 2 (K)")
    common.add_argument("--t3", type=float, help="environment temperature (K)")
    common.add_argument("--plate", type=int, choices=(1, 2), help="plate whose pressure is reported")
    common.add_argument("--out", help="CSV output path (default standard output)")
    common.add_argument("--tol", type=float, help="relative tolerance of every integral")
    common.add_argument("--workers", type=int, help="threads for independent evaluations")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")

    p = argparse.ArgumentParser(prog="casimir-neq", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("pressure", parents=[common], help="total pressure on one plate with its breakdown")
    g = sub.add_parser("gradient", parents=[common], help="gradient of the total pressure")
    g.add_argument("--fast", action="store_true", help="omit the antisymmetric term for thick coatings")
    s = sub.add_parser("sweep", parents=[common], help="sweep separation or T2")
    s.add_argument("--variable", choices=("a", "separation", "T2"), help="swept parameter (default a)")
    s.add_argument("--range", nargs=3, type=float, metavar=("LO", "HI", "POINTS"), help="sweep range")
    s.add_argument("--models", help="comma-separated models (default: --model)")
    s.add_argument("--quantities", help=f"comma-separated subset of {', '.join(QUANTITIES)}")
    s.add_argument("--fast", action="store_true", help="omit the antisymmetric gradient for thick coatings")
    r = sub.add_parser("report", parents=[common], help="model differences against sensor sensitivities")
    r.add_argument("--range", nargs=3, type=float, metavar=("LO", "HI", "POINTS"),
                   help="separations in m (default 4e-6 10e-6 7)")
    r.add_argument("--models", help="two comma-separated models (default drude,plasma)")
    r.add_argument("--quantities", help=f"comma-separated subset of {', '.join(REPORT_QUANTITIES)}")
    r.add_argument("--fast", action="store_true", help="omit the antisymmetric gradient for thick coatings")
    a = sub.add_parser("asymptote", parents=[common], help="antisymmetric term at large separations")
    a.add_argument("--separations", help="comma-separated separations in m (default 5e-6,1e-5,2e-5)")
    c = sub.add_parser("convert", parents=[common], help="pressure to spring extension")
    c.add_argument("--pressure", type=float, required=True, help="pressure (Pa)")
    c.add_argument("--spring-constant", type=float, help="spring constant (N/m)")
    c.add_argument("--radius", type=float, help="sensor radius (m)")
    return p


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except (ValueError, OSError, QuadratureError, SeriesError) as exc:
        log.error("%s", exc)
        return 2


def _run(args) -> int:
    doc = load_config_file(args.config) if args.config else {}
    if args.preset:
        doc["preset"] = args.preset
    model = args.model or doc.get("model", "drude")
    data = args.data or doc.get("data")
    config, sensor = build_config(doc, model, data)
    overrides = {k: v for k, v in (("a", args.a), ("T1", args.t1), ("T2", args.t2), ("T3", args.t3))
                 if v is not None}
    config = replace(config, **overrides)
    settings = build_settings(doc, args.tol, args.workers)
    plate = args.plate or 2

    def configs_for(models):
        return {m: with_model(config, gold(m, data)) for m in models}

    if args.command == "convert":
        sensor = replace(sensor, **{k: v for k, v in (("spring_constant", args.spring_constant),
                                                      ("radius", args.radius)) if v is not None})
        header = ["pressure_Pa", "radius_m", "spring_constant_N_per_m", "extension_m"]
        rows = [[args.pressure, sensor.radius, sensor.spring_constant if sensor.spring_constant else "",
                 spring_extension(args.pressure, sensor)]]
    elif args.command in ("pressure", "gradient"):
        q = "pressure" if args.command == "pressure" else "gradient"
        vals = evaluate(config, [q], settings, plate, getattr(args, "fast", False))
        header = ["a_m", "T1_K", "T2_K", "T3_K"] + (["plate"] if q == "pressure" else []) + list(vals)
        rows = [[config.a, config.T1, config.T2, config.T3] + ([plate] if q == "pressure" else [])
                + list(vals.values())]
    elif args.command == "sweep":
        sw = dict(doc.get("sweep") or {})
        variable = args.variable or sw.get("variable", "a")
        lo, hi, n = args.range if args.range else (sw.get("lo"), sw.get("hi"), sw.get("points"))
        if lo is None or hi is None or n is None:
            raise ValueError("sweep needs --range LO HI POINTS or a sweep section in the config file")
        models = _models(args.models, sw.get("models") or [model])
        quantities = (args.quantities.split(",") if args.quantities else sw.get("quantities") or ["pressure"])
        spec = SweepSpec(variable, float(lo), float(hi), int(n), config, tuple(models), tuple(quantities),
                         plate, args.fast, data)
        header, rows = run_sweep(spec, settings)
    elif args.command == "report":
        rep = dict(doc.get("report") or {})
        lo, hi, n = args.range if args.range else (rep.get("lo", 4e-6), rep.get("hi", 10e-6), rep.get("points", 7))
        models = _models(args.models, rep.get("models") or ["drude", "plasma"])
        quantities = (args.quantities.split(",") if args.quantities else rep.get("quantities") or ["gradient"])
        header, rows = discriminability_report(configs_for(models), sensor, np.linspace(lo, hi, int(n)),
                                               settings, quantities, args.fast, args.plate or 1)
    else:
        seps = ([float(x) for x in args.separations.split(",")] if args.separations else [5e-6, 1e-5, 2e-5])
        header, rows = large_separation_asymptote(config, seps, settings)

    out = _open_out(args.out)
    try:
        write_csv(header, rows, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
