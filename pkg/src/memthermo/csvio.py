"""CSV emission with a fixed, locale-free wire format.

Headers are pinned per schema; floats are serialized with 9 significant
digits, newline is '\\n', encoding UTF-8. Bit-exact text is the contract:
identical runs must produce identical bytes.
"""
from __future__ import annotations

SCHEMAS: dict[str, tuple[str, ...]] = {
    "cycle": ("t_s", "t_set_K", "t_air_K", "t_dev_K", "r_ohm", "phase"),
    "cycle_holds": ("hold", "t_set_K", "r_steady_ohm", "r_first_ohm",
                    "r_last_ohm", "settled"),
    "levels": ("level", "r_ref_ohm", "drop_frac", "sensitivity_pct_per_K"),
    "iv": ("level", "T_K", "v_V", "i_A"),
    "signature": ("polarity", "a_per_K2", "phi_b_eV", "alpha_eV_per_sqrtV",
                  "r2_stage1_min", "r2_stage2", "intercept_spread"),
    "hsr": ("t_s", "t_set_K", "t_air_K", "t_dev_K", "r_ohm", "phase",
            "pulse_index", "v_V"),
    "hsr_summary": ("T_test_K", "v_prog_V", "frac_state", "frac_at_T",
                    "frac_vs_300", "recovered_frac", "reset_pulses"),
    "nullcline": ("v_V", "T_K", "frac"),
    "nullcline_fit": ("g_14_310", "g_14_360", "beta_per_V",
                      "r2_voltage_min", "r2_temperature"),
    "thermometer": ("t_s", "T_true_K", "trial", "r_ohm", "T_est_K", "err_K"),
    "baseline": ("load", "rate_spikes_per_step"),
    "homeostasis_rates": ("window", "t_mid_s", "rate_spikes_per_step"),
    "homeostasis_spike_windows": ("window", "t_start_s", "t_end_s",
                                  "rate_spikes_per_step"),
    "homeostasis_trace": ("step", "t_s", "load", "t_set_K", "t_dev_K",
                          "spikes"),
    "calibrate_gain": ("mode", "kappa", "spread_uncompensated",
                       "spread_calibrated"),
    "calibrate_table": ("load", "t_set_K"),
    "calibrate_barriers": ("level", "r_ref_ohm", "total_drop", "phi_app_eV"),
}


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def emit_csv(path, schema_id: str, rows) -> str:
    """Write rows under the schema's pinned header; returns the path."""
    header = SCHEMAS.get(schema_id)
    if header is None:
        raise ValueError(f"unknown CSV schema {schema_id!r}")
    lines = [",".join(header)]
    for row in rows:
        row = tuple(row)
        if len(row) != len(header):
            raise ValueError(
                f"schema {schema_id}: row has {len(row)} fields, "
                f"expected {len(header)}"
            )
        lines.append(",".join(format_value(v) for v in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return str(path)


def parse_csv(path, schema_id: str | None = None):
    """Read a CSV written by emit_csv; returns (header, rows of strings)."""
    with open(path, encoding="utf-8", newline="\n") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = tuple(lines[0].split(","))
    if schema_id is not None and header != SCHEMAS[schema_id]:
        raise ValueError(f"{path}: header does not match schema {schema_id}")
    rows = [tuple(line.split(",")) for line in lines[1:]]
    return header, rows


def write_manifest(path, config, experiment: str, version: str) -> str:
    """Echo the fully resolved configuration; the manifest alone is enough
    to reproduce the run byte for byte."""
    text = (
        f"# memthermo run manifest\n"
        f"# version = {version}\n"
        f"# experiment = {experiment}\n"
        + config.serialize()
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return str(path)
