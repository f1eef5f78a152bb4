"""INI configuration: one flat ``key = value`` section per component.

Every key is optional and falls back to the built-in defaults. Unknown
sections and unknown keys are errors. Lists are comma separated.
"""
from __future__ import annotations

import configparser
import typing
from dataclasses import dataclass, field, fields

from .dlcz import (
    DETECTION_ANGLE,
    MEASURED_TAU,
    STORAGE_G2_AT_ZERO,
    STORAGE_WRITE_POWER,
    WRITE_WAVELENGTH,
    DephasingModel,
    delta_k_from_geometry,
)
from .errors import ConfigError, DlczQfcError
from .params import ExperimentParams, PhysicalConstants, validate
from .qfc import (
    CALIBRATION_PUMP_POWER,
    FIBER_LOSS_NIR,
    FIBER_LOSS_TELECOM,
    OPERATING_PUMP_POWER,
    ConversionDevice,
)
from .reference import published_table


@dataclass(frozen=True)
class DephasingSection:
    """Either ``temperature`` or ``tau`` fixes the cloud temperature; ``delta_k``
    overrides the geometry keys."""

    atomic_mass: float = PhysicalConstants().rb87_mass
    temperature: float | None = None
    tau: float | None = None
    delta_k: float | None = None
    lambda_write: float = WRITE_WAVELENGTH
    lambda_photon: float = WRITE_WAVELENGTH
    angle: float = DETECTION_ANGLE

    def build(self, constants: PhysicalConstants) -> DephasingModel:
        if self.temperature is not None and self.tau is not None:
            raise ConfigError("[dephasing] give either temperature or tau, not both")
        dk = self.delta_k
        if dk is None:
            dk = delta_k_from_geometry(self.lambda_write, self.lambda_photon, self.angle)
        if self.temperature is not None:
            return DephasingModel(self.atomic_mass, self.temperature, dk, constants.boltzmann_k)
        tau = MEASURED_TAU if self.tau is None else self.tau
        T = self.atomic_mass / (constants.boltzmann_k * (tau * dk) ** 2)
        return DephasingModel(self.atomic_mass, T, dk, constants.boltzmann_k)


@dataclass(frozen=True)
class SimulationSection:
    storage_time: float = 0.0
    n_trials: int = 10**6
    seed: int = 0
    converted: bool = True
    pump_power: float = OPERATING_PUMP_POWER


@dataclass(frozen=True)
class QfcCurveSection:
    pump_min: float = 0.0
    pump_max: float = 0.9
    pump_points: int = 46
    mu_in: float = 0.16
    include_optimum: bool = True
    extra_pumps: tuple[float, ...] = (CALIBRATION_PUMP_POWER,)


@dataclass(frozen=True)
class SnrCurveSection:
    pump_power: float = CALIBRATION_PUMP_POWER
    mu_values: tuple[float, ...] = (0.05, 0.1, 0.16, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0)
    n_trials: int = 10**8


@dataclass(frozen=True)
class CorrelationsSection:
    write_powers: tuple[float, ...] = (
        0.01e-3, 0.02e-3, 0.05e-3, 0.1e-3, 0.17e-3, 0.333e-3, 0.65e-3, 1.0e-3, 1.5e-3, 2.39e-3,
    )
    storage_time: float = 0.0
    pump_power: float = OPERATING_PUMP_POWER
    n_trials: int = 10**8


@dataclass(frozen=True)
class StorageDecaySection:
    t_max: float = 60e-6
    t_points: int = 13
    write_power: float = STORAGE_WRITE_POWER
    g2_at_zero: float = STORAGE_G2_AT_ZERO
    pump_power: float = OPERATING_PUMP_POWER
    n_trials: int = 10**8


@dataclass(frozen=True)
class Table1Section:
    mode: str = "A"
    write_powers: tuple[float, ...] = tuple(row.write_power for row in published_table())
    storage_time: float = 0.0
    n_trials: int = 10**8


@dataclass(frozen=True)
class LinkBudgetSection:
    eta_devs: tuple[float, ...] = (0.10, 0.50)
    atten_near: float = FIBER_LOSS_NIR
    atten_telecom: float = FIBER_LOSS_TELECOM
    storage_times: tuple[float, ...] = (1e-6, 10e-6, 23.6e-6, 40e-6, 100e-6)


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentParams = field(default_factory=ExperimentParams)
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    device: ConversionDevice = field(default_factory=ConversionDevice)
    dephasing: DephasingSection = field(default_factory=DephasingSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    qfc_curve: QfcCurveSection = field(default_factory=QfcCurveSection)
    snr_curve: SnrCurveSection = field(default_factory=SnrCurveSection)
    correlations: CorrelationsSection = field(default_factory=CorrelationsSection)
    storage_decay: StorageDecaySection = field(default_factory=StorageDecaySection)
    table1: Table1Section = field(default_factory=Table1Section)
    link_budget: LinkBudgetSection = field(default_factory=LinkBudgetSection)

    def deph(self) -> DephasingModel:
        return self.dephasing.build(self.constants)


SECTIONS = tuple(f.name for f in fields(RunConfig))


def _section_types(cls):
    return typing.get_type_hints(cls)


def _parse_value(raw: str, hint, where: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    text = raw.strip()
    try:
        if hint is bool:
            low = text.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if hint is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError(f"not an integer: {raw!r}")
            return int(value)
        if hint is float:
            return float(text)
        if hint is str:
            return text
        if origin is tuple:
            return tuple(float(item) for item in text.split(",") if item.strip())
        if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)) and type(None) in args:
            if text.lower() in ("", "none"):
                return None
            inner = next(a for a in args if a is not type(None))
            return _parse_value(text, inner, where)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unsupported type {hint!r}")


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _build_section(name: str, cls, items: dict):
    hints = _section_types(cls)
    known = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(items) - known)
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(unknown)}")
    kwargs = {key: _parse_value(raw, hints[key], f"[{name}] {key}") for key, raw in items.items()}
    try:
        return cls(**kwargs)
    except DlczQfcError as exc:
        raise ConfigError(f"[{name}] {exc}") from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    unknown = sorted(set(parser.sections()) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(unknown)}")
    types = {f.name: f.default_factory for f in fields(RunConfig)}
    built = {}
    for name in parser.sections():
        cls = type(types[name]())
        built[name] = _build_section(name, cls, dict(parser[name]))
    config = RunConfig(**built)
    report = validate(config.experiment)
    if report:
        raise ConfigError("[experiment] " + "; ".join(report))
    try:
        config.deph()
    except DlczQfcError as exc:
        raise ConfigError(f"[dephasing] {exc}") from None
    if config.table1.mode not in ("A", "B"):
        raise ConfigError("[table1] mode must be A or B")
    return config


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_section(name: str, obj) -> str:
    lines = [f"[{name}]"]
    for f in fields(obj):
        if f.init:
            lines.append(f"{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"


def dump_config(config: RunConfig) -> str:
    return "\n".join(dump_section(name, getattr(config, name)) for name in SECTIONS)


def params_to_ini(params: ExperimentParams) -> str:
    return dump_section("experiment", params)


def params_from_ini(text: str) -> ExperimentParams:
    return parse_config(text).experiment
