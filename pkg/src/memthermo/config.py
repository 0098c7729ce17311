"""Flat key-value run configuration.

One plain-text format everywhere: `section.key = value` lines, `#`
comments. Flat keys keep the files diffable and the parser dependency
free. Every physical parameter carries its documented default; unknown
keys are rejected rather than ignored. Environment variables prefixed
MEMTHERMO_ override file values (run.seed -> MEMTHERMO_RUN_SEED), and
explicit CLI overrides sit on top.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

from .device import LevelAnchor, SwitchingParams, ThermalFit
from .thermal import ThermalPlant


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class _Key:
    name: str
    type: type
    default: object
    help: str


def _k(name, type_, default, help_):
    return _Key(name=name, type=type_, default=default, help=help_)


REGISTRY: dict[str, _Key] = {k.name: k for k in [
    _k("run.experiment", str, "", "subcommand that produced the run"),
    _k("run.seed", int, 0, "single seed feeding all named rng sub-streams"),
    _k("run.out_dir", str, "out", "output directory"),

    _k("device.level", str, "pristine", "resistive level preset "
       "(pristine, L1, L2, L3, L4)"),
    _k("device.r_ohm", float, 0.0, "explicit 300 K resistance; 0 uses the "
       "level preset"),

    _k("fit.r_pristine_ohm", float, 3e6, "pristine anchor resistance"),
    _k("fit.drop_pristine", float, 0.61, "pristine 300->360 K drop"),
    _k("fit.r_l1_ohm", float, 1e6, "L1 anchor resistance"),
    _k("fit.drop_l1", float, 0.58, "L1 drop"),
    _k("fit.r_l2_ohm", float, 250e3, "L2 anchor resistance"),
    _k("fit.drop_l2", float, 0.39, "L2 drop"),
    _k("fit.r_l3_ohm", float, 15e3, "L3 anchor resistance"),
    _k("fit.drop_l3", float, 0.22, "L3 drop"),
    _k("fit.r_l4_ohm", float, 8e3, "L4 anchor resistance"),
    _k("fit.drop_l4", float, 0.11, "L4 drop"),

    _k("plant.preset", str, "packaged", "packaged or on_wafer"),
    _k("plant.tau_air_s", float, 180.0, "chamber air time constant"),
    _k("plant.tau_dev_s", float, 0.0, "device time constant; 0 uses the "
       "preset (720 packaged, 60 on-wafer)"),

    _k("switching.v_th_v", float, 0.5, "hard switching threshold"),
    _k("switching.g_14_310", float, 0.22, "train fraction at 1.4 V, 310 K"),
    _k("switching.g_14_360", float, 0.27, "train fraction at 1.4 V, 360 K"),
    _k("switching.beta_per_v", float, math.log(11.0) / 0.7,
       "voltage steepness of the train fraction"),
    _k("switching.n_tau", float, 20.0, "train saturation scale in pulses"),
    _k("switching.eta_nv", float, 0.4, "non-volatile fraction of change"),
    _k("switching.tau_ret", float, 50.0, "retention constant, read intervals"),
    _k("switching.burn_in_gain", float, 1.0, "first-train multiplier"),
    _k("switching.taper_v_start", float, 1.4, "thermal ramp full up to here"),
    _k("switching.taper_v_end", float, 1.5, "thermal ramp tapered from here"),
    _k("switching.taper_min", float, 0.35, "ramp coupling at/above taper end"),

    _k("schedule.hold_s", float, 3600.0, "hold per setpoint"),
    _k("schedule.read_period_s", float, 6.0, "read cadence during holds"),
    _k("schedule.setpoints", str, "", "explicit comma-separated setpoints "
       "(K); empty scrambles the 300-360 K grid from the seed"),

    _k("cycle.drift_scale", float, 0.0, "slow drift bound per cycle; 0=off, "
       "0.05 reproduces the 5 % revisit discrepancy"),

    _k("hsr.t_test_k", float, 360.0, "test temperature"),
    _k("hsr.v_prog_v", float, 1.5, "programming amplitude"),
    _k("hsr.pulse_count", int, 200, "programming pulses"),
    _k("hsr.retention_reads", int, 200, "retention reads"),
    _k("hsr.retention_period_s", float, 6.0, "retention read interval"),

    _k("iv.temps_k", str, "300,330,360", "IV sweep temperatures"),
    _k("iv.v_min_v", float, 0.05, "smallest sweep amplitude"),
    _k("iv.v_max_v", float, 0.4, "largest sweep amplitude (< threshold)"),
    _k("iv.points", int, 8, "points per polarity"),
    _k("iv.input_csv", str, "", "extract from this IV CSV instead of "
       "simulating (signature command)"),

    _k("thermometer.noise_sigma", float, 0.0, "relative read noise"),
    _k("thermometer.trials", int, 1, "noisy inversions per settled hold"),

    _k("neuron.theta", float, 12.5, "spike threshold"),
    _k("neuron.window", int, 25, "steps (and spikes) per rate window"),
    _k("neuron.dt_s", float, 1.0, "seconds per step"),
    _k("neuron.map_mode", str, "table", "feedforward: affine, table, fixed"),
    _k("neuron.kappa", float, 60.0, "affine feedforward gain, K per load"),
    _k("neuron.t_fixed_k", float, 300.0, "setpoint in fixed mode"),
    _k("neuron.gamma", float, 0.3, "residual slope of the table target"),
    _k("neuron.spread_sigma", float, 0.0, "device-to-device log-normal "
       "spread of synapse resistance"),

    _k("homeostasis.pattern", str, "0.20:6000,0.30:6000",
       "inline segments load:steps,..."),
    _k("homeostasis.pattern_csv", str, "", "optional CSV (step,load) "
       "overriding the inline pattern"),

    _k("baseline.loads", str, "0.15,0.20,0.25,0.30,0.35,0.40",
       "loads for the baseline curve"),
    _k("baseline.feedforward", str, "off", "off (gain 0) or calibrated"),
    _k("baseline.settle_steps", int, 4000, "settling steps per load"),
    _k("baseline.measure_steps", int, 2000, "measurement steps per load"),

    _k("calibrate.mode", str, "table", "gain calibration mode"),
    _k("calibrate.loads", str, "0.15,0.20,0.25,0.30,0.35,0.40",
       "calibration loads"),
    _k("calibrate.kappa_max", float, 240.0, "affine grid upper edge"),
    _k("calibrate.kappa_step", float, 1.0, "affine grid step"),
]}


def _parse_value(key: _Key, raw: str):
    raw = raw.strip()
    try:
        if key.type is int:
            return int(raw)
        if key.type is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"bad value for {key.name}: {raw!r} is not {key.type.__name__}"
        ) from None


def _format_value(value) -> str:
    # repr round-trips floats exactly, so a manifest reproduces the run
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', "
                              f"got {stripped!r}")
        values[key.strip()] = value.strip()
    return values


class RunConfig:
    """Resolved configuration: defaults, file, environment, overrides."""

    def __init__(self, values: dict[str, object]):
        self._values = values

    def __getitem__(self, name: str):
        try:
            return self._values[name]
        except KeyError:
            raise ConfigError(f"unknown config key '{name}'") from None

    def floats(self, name: str) -> list[float]:
        raw = str(self[name]).strip()
        if not raw:
            return []
        try:
            return [float(part) for part in raw.split(",")]
        except ValueError:
            raise ConfigError(f"bad float list for {name}: {raw!r}") from None

    def serialize(self) -> str:
        lines = [f"{name} = {_format_value(self._values[name])}"
                 for name in REGISTRY]
        return "\n".join(lines) + "\n"

    # --- builders -------------------------------------------------------

    def thermal_fit(self) -> ThermalFit:
        return ThermalFit(anchors=(
            LevelAnchor("pristine", self["fit.r_pristine_ohm"],
                        self["fit.drop_pristine"]),
            LevelAnchor("L1", self["fit.r_l1_ohm"], self["fit.drop_l1"]),
            LevelAnchor("L2", self["fit.r_l2_ohm"], self["fit.drop_l2"]),
            LevelAnchor("L3", self["fit.r_l3_ohm"], self["fit.drop_l3"]),
            LevelAnchor("L4", self["fit.r_l4_ohm"], self["fit.drop_l4"]),
        ))

    def switching_params(self) -> SwitchingParams:
        return SwitchingParams(
            v_th=self["switching.v_th_v"],
            g_14_310=self["switching.g_14_310"],
            g_14_360=self["switching.g_14_360"],
            beta=self["switching.beta_per_v"],
            n_tau=self["switching.n_tau"],
            eta_nv=self["switching.eta_nv"],
            tau_ret=self["switching.tau_ret"],
            burn_in_gain=self["switching.burn_in_gain"],
            taper_v_start=self["switching.taper_v_start"],
            taper_v_end=self["switching.taper_v_end"],
            taper_min=self["switching.taper_min"],
        )

    def plant(self) -> ThermalPlant:
        preset = self["plant.preset"]
        if preset not in ("packaged", "on_wafer"):
            raise ConfigError(f"plant.preset must be packaged or on_wafer, "
                              f"got {preset!r}")
        tau_dev = self["plant.tau_dev_s"]
        if tau_dev == 0.0:
            tau_dev = 720.0 if preset == "packaged" else 60.0
        return ThermalPlant(tau_air_s=self["plant.tau_air_s"],
                            tau_dev_s=tau_dev)


def resolve_config(
    config_path: str | None = None,
    env: dict[str, str] | None = None,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    values: dict[str, object] = {k.name: k.default for k in REGISTRY.values()}

    def apply(raw_values: dict[str, str], source: str):
        for name, raw in raw_values.items():
            key = REGISTRY.get(name)
            if key is None:
                raise ConfigError(f"unknown config key '{name}' ({source})")
            values[name] = _parse_value(key, raw)

    if config_path:
        try:
            with open(config_path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        apply(parse_config_text(text, source=config_path), config_path)

    env = os.environ if env is None else env
    env_lookup = {k.replace(".", "_").upper(): k for k in REGISTRY}
    for var, raw in env.items():
        if not var.startswith("MEMTHERMO_"):
            continue
        name = env_lookup.get(var[len("MEMTHERMO_"):])
        if name is None:
            raise ConfigError(f"unknown config key in environment: {var}")
        values[name] = _parse_value(REGISTRY[name], raw)

    if overrides:
        apply(overrides, "command line")

    return RunConfig(values)
