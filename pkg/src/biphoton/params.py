"""Unit system and validated parameter records.

All internal computation happens in units of the natural linewidth: rates and
frequencies are multiples of Gamma, times are multiples of 1/Gamma, and the
medium coordinate runs over [0, 1] in units of its length L.  SI values only
appear at the I/O boundary.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import numpy as np

RB87_D2_GAMMA = 2 * math.pi * 6.0666e6  # rad/s


class ConfigError(ValueError):
    """Raised for malformed or out-of-range configuration input."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class UnitSystem:
    gamma_rad_per_s: float = RB87_D2_GAMMA

    def __post_init__(self):
        _require(math.isfinite(self.gamma_rad_per_s) and self.gamma_rad_per_s > 0,
                 "gamma_rad_per_s must be > 0")

    @property
    def time_unit_s(self) -> float:
        return 1.0 / self.gamma_rad_per_s

    @property
    def time_unit_ns(self) -> float:
        return 1e9 / self.gamma_rad_per_s

    def to_seconds(self, t):
        return np.asarray(t) / self.gamma_rad_per_s if np.ndim(t) else t / self.gamma_rad_per_s

    def from_seconds(self, t_s):
        return np.asarray(t_s) * self.gamma_rad_per_s if np.ndim(t_s) else t_s * self.gamma_rad_per_s

    def rate_to_per_s(self, r):
        """Convert a rate in Gamma-units (per 1/Gamma) to counts per second."""
        return r * self.gamma_rad_per_s

    def rate_from_per_s(self, r_si):
        return r_si / self.gamma_rad_per_s

    def angular_from_hz(self, f_hz):
        """Angular frequency 2*pi*f expressed in Gamma-units."""
        return 2 * math.pi * f_hz / self.gamma_rad_per_s

    def angular_to_hz(self, w):
        return w * self.gamma_rad_per_s / (2 * math.pi)


@dataclass(frozen=True)
class PhysicalParams:
    """Atomic and optical inputs, Gamma-normalized.

    ``omega_c``/``omega_d`` are full Rabi frequencies (the interaction terms
    carry Omega/2), ``delta_c``/``delta_d`` are signed one-photon detunings
    (field minus transition frequency), ``delta_k_L`` is the geometric phase
    mismatch accumulated over the medium in radians.
    """

    od: float
    omega_c: float
    omega_d: float
    delta_c: float = 0.0
    delta_d: float = 10.0
    gamma21: float = 0.0
    delta_k_L: float = 0.0
    medium_length_m: float | None = None
    branching_to_1: float = 0.5
    optical_dephasing: bool = True

    def __post_init__(self):
        for name in ("od", "omega_c", "omega_d", "delta_c", "delta_d", "gamma21", "delta_k_L"):
            v = getattr(self, name)
            _require(isinstance(v, (int, float)) and math.isfinite(v), f"{name} must be a finite number")
        _require(self.od > 0, "od must be > 0")
        _require(self.omega_c >= 0, "omega_c must be >= 0")
        _require(self.omega_d >= 0, "omega_d must be >= 0")
        _require(self.gamma21 >= 0, "gamma21 must be >= 0")
        _require(0.0 <= self.branching_to_1 <= 1.0, "branching_to_1 must be in [0, 1]")
        if self.medium_length_m is not None:
            _require(self.medium_length_m > 0, "medium_length_m must be > 0")

    @property
    def delta_k_per_m(self) -> float | None:
        if self.medium_length_m is None:
            return None
        return self.delta_k_L / self.medium_length_m

    @property
    def raman_offset(self) -> float:
        """Frame frequency of the Stokes/anti-Stokes sideband at omega = 0."""
        return self.delta_d - self.delta_c

    def with_(self, **changes) -> "PhysicalParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DetectionParams:
    eta_s: float = 0.02
    eta_as: float = 0.01
    noise_rate_s: float = 0.0
    noise_rate_as: float = 0.0
    receptions: int = 2**18
    time_bin_s: float = 6.4e-9

    def __post_init__(self):
        _require(0.0 <= self.eta_s <= 1.0, "eta_s must be in [0, 1]")
        _require(0.0 <= self.eta_as <= 1.0, "eta_as must be in [0, 1]")
        _require(self.noise_rate_s >= 0, "noise_rate_s must be >= 0")
        _require(self.noise_rate_as >= 0, "noise_rate_as must be >= 0")
        _require(int(self.receptions) == self.receptions and self.receptions >= 1,
                 "receptions must be an integer >= 1")
        _require(self.time_bin_s > 0, "time_bin_s must be > 0")


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform, zero-symmetric grid of detunings omega (Gamma-units).

    ``count`` is even and the points sit at half-integer multiples of the
    spacing, so omega = 0 is never sampled exactly and the grid is its own
    mirror image.
    """

    half_width: float = 48.0
    count: int = 32768

    def __post_init__(self):
        _require(self.half_width > 0, "half_width must be > 0")
        _require(int(self.count) == self.count and self.count >= 2 and self.count % 2 == 0,
                 "count must be an even integer >= 2")

    @property
    def spacing(self) -> float:
        return 2 * self.half_width / self.count

    @property
    def omega_values(self) -> np.ndarray:
        d = self.spacing
        return (np.arange(self.count) - (self.count - 1) / 2) * d

    @property
    def tau_max(self) -> float:
        """Largest delay (1/Gamma units) before the discrete Fourier sum aliases."""
        return 2 * math.pi / self.spacing

    def refined(self, factor: int = 2) -> "FrequencyGrid":
        return FrequencyGrid(self.half_width, self.count * factor)


def derived_times(p: PhysicalParams, units: UnitSystem = UnitSystem()) -> dict[str, float | None]:
    """Resonant-case characteristic times in seconds.

    ``tau_R`` is the damped Rabi period 2*pi/sqrt(Omega_c^2 - Gamma^2/4) and is
    ``None`` in the overdamped case Omega_c <= Gamma/2; ``tau_EIT`` is the EIT
    group delay Gamma*OD/Omega_c^2.  Both are only meaningful for delta_c = 0.
    """
    radicand = p.omega_c**2 - 0.25
    tau_r = 2 * math.pi / math.sqrt(radicand) if radicand > 0 else None
    tau_eit = p.od / p.omega_c**2 if p.omega_c > 0 else None
    return {
        "tau_R": None if tau_r is None else tau_r * units.time_unit_s,
        "tau_EIT": None if tau_eit is None else tau_eit * units.time_unit_s,
    }


# --- config ingestion -------------------------------------------------------

_PHYS_FIELDS = {f.name for f in fields(PhysicalParams)}
_DET_FIELDS = {f.name for f in fields(DetectionParams)}
_GRID_FIELDS = {f.name for f in fields(FrequencyGrid)}

# Fields whose SI form is accepted as {"value": x, "unit": u}.
_RATE_LIKE = {"omega_c", "omega_d", "delta_c", "delta_d", "gamma21"}


def _number(section: str, name: str, raw: Any) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{section}.{name} must be a number, got {raw!r}")
    return float(raw)


def _convert_field(name: str, raw: Any, units: UnitSystem) -> Any:
    """Turn one physical field into Gamma-units.

    Plain numbers are taken as Gamma-units (radians for delta_k_L, meters for
    medium_length_m).  Objects ``{"value": v, "unit": u}`` declare the unit
    explicitly; supported units are ``gamma``, ``MHz``/``Hz`` (cyclic
    frequency) and ``rad/s`` for rate-like fields, ``pi`` / ``rad`` for
    delta_k_L, and ``m``/``mm`` for the length.
    """
    if name in ("branching_to_1",):
        return _number("physical", name, raw)
    if name == "optical_dephasing":
        if not isinstance(raw, bool):
            raise ConfigError("physical.optical_dephasing must be true or false")
        return raw
    if isinstance(raw, Mapping):
        if set(raw) != {"value", "unit"}:
            raise ConfigError(f"physical.{name} must be a number or {{value, unit}}")
        value = _number("physical", name, raw["value"])
        unit = str(raw["unit"])
    else:
        value = _number("physical", name, raw)
        unit = None
    if unit is None:
        return value
    if name in _RATE_LIKE:
        if unit.lower() == "gamma":
            return value
        if unit == "MHz":
            return units.angular_from_hz(value * 1e6)
        if unit == "Hz":
            return units.angular_from_hz(value)
        if unit == "rad/s":
            return value / units.gamma_rad_per_s
    elif name == "delta_k_L":
        if unit == "pi":
            return value * math.pi
        if unit == "rad":
            return value
    elif name == "medium_length_m":
        if unit == "m":
            return value
        if unit == "mm":
            return value * 1e-3
    elif name == "od" and unit in ("", "1"):
        return value
    raise ConfigError(f"physical.{name}: unsupported unit {unit!r}")


def params_from_dict(doc: Mapping[str, Any]):
    """Build validated records from an already-parsed config mapping.

    Returns ``(PhysicalParams, DetectionParams, FrequencyGrid, UnitSystem)``.
    """
    if not isinstance(doc, Mapping):
        raise ConfigError("config root must be an object")
    unknown = set(doc) - {"physical", "detection", "grid", "units"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    units_doc = doc.get("units", {})
    if not isinstance(units_doc, Mapping):
        raise ConfigError("units must be an object")
    bad = set(units_doc) - {"gamma_rad_per_s"}
    if bad:
        raise ConfigError(f"units: unknown field(s) {sorted(bad)}")
    units = UnitSystem(**{k: _number("units", k, v) for k, v in units_doc.items()})

    phys_doc = doc.get("physical")
    if not isinstance(phys_doc, Mapping):
        raise ConfigError("missing 'physical' section")
    bad = set(phys_doc) - _PHYS_FIELDS - {"delta_k_per_m"}
    if bad:
        raise ConfigError(f"physical: unknown field(s) {sorted(bad)}")
    phys = {k: _convert_field(k, v, units) for k, v in phys_doc.items() if k != "delta_k_per_m"}
    if "delta_k_per_m" in phys_doc:
        if "delta_k_L" in phys_doc:
            raise ConfigError("physical: give either delta_k_L or delta_k_per_m, not both")
        if "medium_length_m" not in phys:
            raise ConfigError("physical.delta_k_per_m requires medium_length_m")
        raw = phys_doc["delta_k_per_m"]
        if isinstance(raw, Mapping):
            if raw.get("unit") == "pi/m":
                dk = _number("physical", "delta_k_per_m", raw.get("value")) * math.pi
            elif raw.get("unit") == "rad/m":
                dk = _number("physical", "delta_k_per_m", raw.get("value"))
            else:
                raise ConfigError(f"physical.delta_k_per_m: unsupported unit {raw.get('unit')!r}")
        else:
            dk = _number("physical", "delta_k_per_m", raw)
        phys["delta_k_L"] = dk * phys["medium_length_m"]
    for required in ("od", "omega_c", "omega_d", "delta_c", "delta_d", "gamma21", "delta_k_L"):
        if required not in phys:
            raise ConfigError(f"physical.{required} is required")

    det_doc = doc.get("detection", {})
    if not isinstance(det_doc, Mapping):
        raise ConfigError("detection must be an object")
    bad = set(det_doc) - _DET_FIELDS
    if bad:
        raise ConfigError(f"detection: unknown field(s) {sorted(bad)}")
    det = {}
    for k, v in det_doc.items():
        det[k] = _number("detection", k, v)
    if "receptions" in det:
        if det["receptions"] != int(det["receptions"]):
            raise ConfigError("receptions must be an integer >= 1")
        det["receptions"] = int(det["receptions"])

    grid_doc = doc.get("grid", {})
    if not isinstance(grid_doc, Mapping):
        raise ConfigError("grid must be an object")
    bad = set(grid_doc) - _GRID_FIELDS
    if bad:
        raise ConfigError(f"grid: unknown field(s) {sorted(bad)}")
    grid = {k: _number("grid", k, v) for k, v in grid_doc.items()}
    if "count" in grid:
        if grid["count"] != int(grid["count"]):
            raise ConfigError("count must be an even integer >= 2")
        grid["count"] = int(grid["count"])

    return PhysicalParams(**phys), DetectionParams(**det), FrequencyGrid(**grid), units


def from_config(document: str | bytes):
    """Parse a JSON config document into validated records."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return params_from_dict(doc)


def load_config(path: str | Path):
    return from_config(Path(path).read_text(encoding="utf-8"))


def params_to_dict(phys: PhysicalParams, det: DetectionParams | None = None,
                   grid: FrequencyGrid | None = None, units: UnitSystem | None = None) -> dict:
    """Inverse of :func:`params_from_dict` (all values in Gamma-units)."""
    doc: dict[str, Any] = {"physical": {k: v for k, v in asdict(phys).items() if v is not None}}
    if det is not None:
        doc["detection"] = asdict(det)
    if grid is not None:
        doc["grid"] = asdict(grid)
    if units is not None:
        doc["units"] = asdict(units)
    return doc
