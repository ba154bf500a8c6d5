"""Named parameter sets matching the published figure captions.

fig2a-f and fig4a-f are single wavepackets (coupling Rabi frequency 1 and 2
Gamma, coupling detuning 0, +1, -1, +2, -2, +3 Gamma); fig3 and fig5 are the
resonant bases of the corresponding detuning sweeps.
"""
from __future__ import annotations

import copy
import math

SWEEP_DELTA_C = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
# phase-mismatch scenarios compared in the sweep figures, in units of pi
SCENARIOS_PI = (0.0, 0.37, 0.74)

_COMMON = {
    "od": 10.0,
    "omega_d": 1.0,
    "delta_d": 10.0,
    "gamma21": 0.001,
    "delta_k_L": {"value": 0.37, "unit": "pi"},
    "medium_length_m": 0.004,
}
_PANEL_DELTA_C = {"a": 0.0, "b": 1.0, "c": -1.0, "d": 2.0, "e": -2.0, "f": 3.0}


def _doc(omega_c: float, delta_c: float) -> dict:
    phys = dict(_COMMON, omega_c=omega_c, delta_c=delta_c)
    return {
        "physical": phys,
        "detection": {"eta_s": 0.02, "eta_as": 0.01, "noise_rate_s": 0.0, "noise_rate_as": 0.0,
                      "receptions": 2**18, "time_bin_s": 6.4e-9},
    }


PRESETS: dict[str, dict] = {}
for _fig, _oc in (("fig2", 1.0), ("fig4", 2.0)):
    for _panel, _dc in _PANEL_DELTA_C.items():
        PRESETS[f"{_fig}{_panel}"] = _doc(_oc, _dc)
PRESETS["fig3"] = _doc(1.0, 0.0)
PRESETS["fig5"] = _doc(2.0, 0.0)

SWEEP_PRESETS = ("fig3", "fig5")


def preset(name: str) -> dict:
    """A fresh copy of the named config document."""
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}") from None


def scenario_delta_k_L() -> tuple[float, ...]:
    return tuple(x * math.pi for x in SCENARIOS_PI)
