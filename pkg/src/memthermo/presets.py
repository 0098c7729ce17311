"""Resistive-level presets.

Electroforming itself is out of scope; programmed levels enter the model
as preset 300 K reference resistances with calibrated thermal drops and
matching thermionic IV parameters. The IV parameters are chosen so that

* R(0.2 V, 300 K) reproduces the level's reference resistance, and
* the apparent barrier at the read voltage (phi_b - alpha_pos*sqrt(0.2))
  equals the level's fitted thermal barrier,

which keeps the IV route and the read-out route mutually consistent.
Pristine and L1 get unequal barrier-lowering factors per polarity (the
high-resistance states show visibly asymmetric IVs); the low levels are
symmetric.
"""
from __future__ import annotations

import math

from .constants import K_B_EV, T_REF, V_READ
from .device import DeviceState, ThermalFit, ThermionicParams, calibrate_phi_from_drop

LEVEL_ORDER = ("pristine", "L1", "L2", "L3", "L4")

# label -> (r_ref at 300 K, alpha_pos, alpha_neg)
_LEVELS = {
    "pristine": (3e6, 0.050, 0.030),
    "L1": (1e6, 0.040, 0.025),
    "L2": (250e3, 0.020, 0.020),
    "L3": (15e3, 0.060, 0.060),
    "L4": (8e3, 0.100, 0.100),
}


def level_resistance(level: str) -> float:
    try:
        return _LEVELS[level][0]
    except KeyError:
        raise ValueError(f"unknown level {level!r}; choose from {LEVEL_ORDER}") from None


def device_preset(level: str) -> DeviceState:
    """Fresh device at the level's reference resistance."""
    return DeviceState(r_persistent=level_resistance(level))


def iv_preset(level: str, fit: ThermalFit | None = None) -> ThermionicParams:
    """Thermionic parameters consistent with the level's thermal fit."""
    r_ref, alpha_pos, alpha_neg = _LEVELS[level]
    fit = fit or ThermalFit.default()
    phi_app = fit.phi_for_state(r_ref)
    phi_b = phi_app + alpha_pos * math.sqrt(V_READ)
    if phi_b < 0:
        raise ValueError(f"level {level}: alpha_pos too small for its barrier")
    a = V_READ / (r_ref * T_REF**2 * math.exp(-phi_app / (K_B_EV * T_REF)))
    return ThermionicParams(
        a_prefactor=a, phi_b=phi_b, alpha_pos=alpha_pos, alpha_neg=alpha_neg
    )


__all__ = [
    "LEVEL_ORDER",
    "level_resistance",
    "device_preset",
    "iv_preset",
    "calibrate_phi_from_drop",
]
