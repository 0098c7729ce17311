"""Compact model of a temperature-dependent metal-oxide memristor.

Physics
-------
Conduction is interface-limited (thermionic emission over a Schottky-like
barrier), which gives three coupled facts the model reproduces:

* current:      I(v, T) = A * T^2 * exp(-(phi_b - alpha*sqrt(|v|)) / (kB*T))
* read-out:     R(T) / R(300 K) = (300/T)^2 * exp((phi_app/kB) * (1/T - 1/300))
* sensitivity:  the fractional R drop over 300->360 K shrinks as the
                programmed resistance drops (state-dependent apparent
                barrier phi_app).

State model
-----------
The plastic state variable is the resistance at 300 K under the read
voltage, split into a persistent part and a volatile excess that relaxes
during retention. Temperature enters read-out only through the ratio
factor above; programming moves the 300 K state. Supra-threshold pulse
trains follow a saturating curve; the asymptotic train fraction is
calibrated at 1.4 V to +22 % (310 K) and +27 % (360 K), and the
temperature ramp tapers above 1.4 V so that 1.5 V trains stay within a
10 % cross-temperature spread.

All operations are pure functions of their inputs; device states are
small frozen values, safe to copy and share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from scipy.optimize import brentq

from .constants import K_B_EV, R_CEILING, R_FLOOR, T_MAX, T_MIN, T_REF

# phi_app at or below -2*kB*300 K would make R(T) non-monotone on the
# chamber window; everything below is rejected at construction.
PHI_APP_MIN = -2.0 * K_B_EV * T_REF


class CalibrationError(ValueError):
    """A fit target is outside the range the model can produce."""


class ResetError(RuntimeError):
    """Reset did not converge; carries the last achieved resistance."""

    def __init__(self, message: str, last_resistance: float, pulses: int):
        super().__init__(message)
        self.last_resistance = last_resistance
        self.pulses = pulses


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ThermionicParams:
    """Parameters of the thermionic IV law.

    a_prefactor folds the Richardson constant and the effective device
    area (A/K^2). alpha_pos/alpha_neg are the barrier-lowering factors
    (eV/sqrt(V)) for positive and negative bias; unequal values produce
    the asymmetric IV response seen on high-resistance states.
    """

    a_prefactor: float
    phi_b: float
    alpha_pos: float = 0.0
    alpha_neg: float = 0.0

    def __post_init__(self):
        for name in ("a_prefactor", "phi_b", "alpha_pos", "alpha_neg"):
            _require_finite(name, getattr(self, name))
        if self.a_prefactor <= 0:
            raise ValueError("a_prefactor must be > 0")
        if self.phi_b < 0:
            raise ValueError("phi_b must be >= 0")
        if self.alpha_pos < 0 or self.alpha_neg < 0:
            raise ValueError("barrier-lowering factors must be >= 0")


def thermionic_current(v: float, T: float, p: ThermionicParams) -> float:
    """Current through the barrier at bias v and temperature T.

    The sign of the current follows the sign of v; the magnitude at v=0
    is the zero-bias emission A*T^2*exp(-phi_b/(kB*T)).
    """
    v = _require_finite("v", v)
    T = _require_finite("T", T)
    if T <= 0:
        raise ValueError("T must be > 0")
    alpha = p.alpha_pos if v >= 0 else p.alpha_neg
    barrier = p.phi_b - alpha * math.sqrt(abs(v))
    magnitude = p.a_prefactor * T * T * math.exp(-barrier / (K_B_EV * T))
    return -magnitude if v < 0 else magnitude


def rho_temperature_factor(T: float, phi_app: float) -> float:
    """Read-out resistance ratio R(T)/R(300 K) for apparent barrier phi_app.

    Equals 1 at 300 K and is strictly decreasing on [300, 360] K for any
    phi_app above the monotonicity bound.
    """
    T = _require_finite("T", T)
    phi_app = _require_finite("phi_app", phi_app)
    if not (T_MIN - 1e-9 <= T <= T_MAX + 1e-9):
        raise ValueError(f"T={T} outside [{T_MIN}, {T_MAX}] K")
    if phi_app <= PHI_APP_MIN:
        raise ValueError(
            f"phi_app={phi_app:.6f} eV at or below monotonicity bound "
            f"{PHI_APP_MIN:.6f} eV"
        )
    return (T_REF / T) ** 2 * math.exp((phi_app / K_B_EV) * (1.0 / T - 1.0 / T_REF))


def barrier_shift_response(T: float, phi_app: float, dphi: float) -> float:
    """Fractional read-out change at T caused by a barrier shift dphi.

    Normalisation is the fixed pre-shift 300 K resistance, so this is the
    ratio-space form of the differential switching response; its
    magnitude decreases with temperature for any positive barrier.
    """
    return rho_temperature_factor(T, phi_app) * math.expm1(dphi / (K_B_EV * T))


# Achievable 300->360 K fractional drops: the T^-2 prefactor alone gives
# ~30.6 %; barriers below zero (down to the monotonicity bound) reduce it
# to ~3.1 %, positive barriers raise it toward 100 %.
_PHI_SEARCH_MAX = 2.0
MIN_TOTAL_DROP = 1.0 - rho_temperature_factor(T_MAX, PHI_APP_MIN + 1e-12)
MAX_TOTAL_DROP = 1.0 - rho_temperature_factor(T_MAX, _PHI_SEARCH_MAX)


def calibrate_phi_from_drop(total_drop: float) -> float:
    """Invert the ratio law: find phi_app with rho(360 K) = 1 - total_drop.

    Bracketed root find, converged to 1e-10 absolute in the ratio.
    """
    total_drop = _require_finite("total_drop", total_drop)
    if not (MIN_TOTAL_DROP < total_drop < MAX_TOTAL_DROP):
        raise CalibrationError(
            f"total_drop={total_drop:.4f} outside achievable range "
            f"({MIN_TOTAL_DROP:.4f}, {MAX_TOTAL_DROP:.4f}) for the "
            f"300->360 K window"
        )
    target = 1.0 - total_drop

    def residual(phi):
        return rho_temperature_factor(T_MAX, phi) - target

    phi = brentq(residual, PHI_APP_MIN + 1e-12, _PHI_SEARCH_MAX, xtol=1e-14)
    if abs(residual(phi)) > 1e-10:
        raise CalibrationError(f"root find left residual {residual(phi):.2e}")
    return phi


@dataclass(frozen=True)
class LevelAnchor:
    """One calibrated resistive level: reference resistance and its
    fractional drop over the full 300->360 K window."""

    label: str
    r_ref: float
    total_drop: float


@dataclass(frozen=True)
class ThermalFit:
    """Apparent-barrier table mapping resistive state to thermal sensitivity.

    Anchors are ordered by strictly decreasing reference resistance; each
    drop is converted to a signed phi_app. States between anchors get a
    piecewise-linear phi in log10(R); states outside the table clamp to
    the end anchors.
    """

    anchors: tuple[LevelAnchor, ...]
    t_ref: float = T_REF

    def __post_init__(self):
        if not self.anchors:
            raise ValueError("anchor table must not be empty")
        if self.t_ref != T_REF:
            raise ValueError(f"t_ref is fixed at {T_REF} K")
        r_refs = [a.r_ref for a in self.anchors]
        if any(r <= 0 for r in r_refs):
            raise ValueError("anchor resistances must be > 0")
        if any(hi <= lo for hi, lo in zip(r_refs, r_refs[1:])):
            raise ValueError("anchors must be strictly decreasing in r_ref")
        phis = tuple(calibrate_phi_from_drop(a.total_drop) for a in self.anchors)
        # ascending in log10(r) for interpolation
        object.__setattr__(self, "_log_r", tuple(math.log10(r) for r in reversed(r_refs)))
        object.__setattr__(self, "_phi_asc", tuple(reversed(phis)))
        object.__setattr__(self, "phi_of_anchor", phis)

    @classmethod
    def default(cls) -> "ThermalFit":
        """Five-level default table.

        Pristine (61 %) and L4 (11 %) drops are measured end points; the
        L1-L3 drops are set so their settled-trace sensitivities land at
        ~0.95, ~0.65 and ~0.37 %/K respectively.
        """
        return cls(anchors=(
            LevelAnchor("pristine", 3e6, 0.61),
            LevelAnchor("L1", 1e6, 0.58),
            LevelAnchor("L2", 250e3, 0.39),
            LevelAnchor("L3", 15e3, 0.22),
            LevelAnchor("L4", 8e3, 0.11),
        ))

    def phi_for_state(self, r_eff: float) -> float:
        if r_eff <= 0:
            raise ValueError("r_eff must be > 0")
        x = math.log10(r_eff)
        xs, ys = self._log_r, self._phi_asc
        if x <= xs[0]:
            return ys[0]
        if x >= xs[-1]:
            return ys[-1]
        # bisect into the table; len(xs) is tiny so a scan is fine
        for i in range(1, len(xs)):
            if x <= xs[i]:
                f = (x - xs[i - 1]) / (xs[i] - xs[i - 1])
                return ys[i - 1] + f * (ys[i] - ys[i - 1])
        return ys[-1]


def phi_for_state(r_eff: float, fit: ThermalFit) -> float:
    """Apparent barrier for a device whose 300 K resistance is r_eff."""
    return fit.phi_for_state(r_eff)


@dataclass(frozen=True)
class TrainEra:
    """Progress along one saturating pulse-train curve.

    A train era is pinned to the (v, T) it started with; consecutive
    trains at the same amplitude and temperature continue the same curve,
    which makes splitting a train into segments exactly equivalent to one
    long train. Retention and resets invalidate the era.
    """

    v: float
    T: float
    fraction: float      # asymptotic train fraction, burn-in folded in
    n: int               # pulses already delivered on this curve
    r_start: float       # r_eff at era start
    persistent_start: float
    volatile_start: float


@dataclass(frozen=True)
class DeviceState:
    """Plastic state of one device: 300 K resistance split into a
    persistent part and a volatile excess, plus the lifetime pulse count."""

    r_persistent: float
    r_volatile_excess: float = 0.0
    pulse_count: int = 0
    era: TrainEra | None = None

    def __post_init__(self):
        _require_finite("r_persistent", self.r_persistent)
        _require_finite("r_volatile_excess", self.r_volatile_excess)
        if self.r_persistent <= 0:
            raise ValueError("r_persistent must be > 0")
        if self.r_persistent + self.r_volatile_excess <= 0:
            raise ValueError("effective resistance must be > 0")

    @property
    def r_eff(self) -> float:
        return self.r_persistent + self.r_volatile_excess


def read_resistance(state: DeviceState, fit: ThermalFit, T: float) -> float:
    """Non-perturbing read-out at temperature T.

    Reads happen at 0.2 V, far below the switching threshold, so they
    never mutate the state.
    """
    r_eff = state.r_eff
    return r_eff * rho_temperature_factor(T, fit.phi_for_state(r_eff))


@dataclass(frozen=True)
class SwitchingParams:
    """Pulse-train switching behaviour.

    v_th gates sub-threshold pulses to zero effect. The asymptotic train
    fraction at amplitude |v| and temperature T is

        F = sign(v) * g_14_310 * exp(beta*(|v| - 1.4)) * s(T, |v|)

    where s ramps linearly from 1 at 310 K to g_14_360/g_14_310 at 360 K
    and the ramp is tapered to taper_min between taper_v_start and
    taper_v_end (the measured cross-temperature spread shrinks above the
    1.4 V calibration point). A train of n pulses achieves
    F*(1 - exp(-n/n_tau)); a fraction eta_nv of the induced change is
    persistent, the rest volatile with retention constant tau_ret (in
    read intervals).
    """

    v_th: float = 0.5
    g_14_310: float = 0.22
    g_14_360: float = 0.27
    beta: float = math.log(11.0) / 0.7   # G(0.7 V) = 0.02
    n_tau: float = 20.0
    eta_nv: float = 0.4
    tau_ret: float = 50.0
    burn_in_gain: float = 1.0
    taper_v_start: float = 1.4
    taper_v_end: float = 1.5
    taper_min: float = 0.35

    def __post_init__(self):
        if not (0.0 < self.v_th < 0.7):
            raise ValueError("v_th must sit between reads (0.2 V) and the "
                             "lowest programming amplitude (0.7 V)")
        if not (self.g_14_360 > self.g_14_310 > 0.0):
            raise ValueError("need g_14_360 > g_14_310 > 0")
        if not (0.0 < self.eta_nv < 1.0):
            raise ValueError("eta_nv must be in (0, 1): recovery exists "
                             "but is incomplete")
        if self.beta < 0 or self.n_tau <= 0 or self.tau_ret <= 0:
            raise ValueError("beta >= 0, n_tau > 0, tau_ret > 0 required")
        if self.burn_in_gain <= 0:
            raise ValueError("burn_in_gain must be > 0")
        if not (0.0 < self.taper_min <= 1.0) or self.taper_v_end <= self.taper_v_start:
            raise ValueError("invalid thermal-ramp taper")


def _ramp_coupling(v_abs: float, p: SwitchingParams) -> float:
    if v_abs <= p.taper_v_start:
        return 1.0
    if v_abs >= p.taper_v_end:
        return p.taper_min
    f = (v_abs - p.taper_v_start) / (p.taper_v_end - p.taper_v_start)
    return 1.0 + f * (p.taper_min - 1.0)


def train_switch_fraction(v: float, T: float, params: SwitchingParams) -> float:
    """Asymptotic fractional state change of a full saturating train."""
    v = _require_finite("v", v)
    T = _require_finite("T", T)
    v_abs = abs(v)
    if v_abs < params.v_th:
        return 0.0
    g = params.g_14_310 * math.exp(params.beta * (v_abs - 1.4))
    t_clamped = min(max(T, 310.0), 360.0)
    ramp = (t_clamped - 310.0) / 50.0 * (params.g_14_360 / params.g_14_310 - 1.0)
    s = 1.0 + ramp * _ramp_coupling(v_abs, params)
    return math.copysign(g * s, v)


def _clamp_r(r: float) -> float:
    return min(max(r, R_FLOOR), R_CEILING)


def apply_pulse_train(
    state: DeviceState,
    v: float,
    count: int,
    T: float,
    params: SwitchingParams,
    fit: ThermalFit,
    width_s: float = 100e-6,
) -> tuple[DeviceState, list[float]]:
    """Apply `count` identical pulses; return the new state and the
    per-pulse read-out trace at T.

    Sub-threshold trains leave the state untouched (flat trace). The
    cumulative change follows F*(1 - exp(-n/n_tau)) along the era curve;
    eta_nv of each increment goes to the persistent part.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    _require_finite("v", v)
    _require_finite("width_s", width_s)
    if width_s <= 0:
        raise ValueError("pulse width must be > 0")

    if abs(v) < params.v_th:
        r = read_resistance(state, fit, T)
        return state, [r] * count

    era = state.era
    if era is None or era.v != v or era.T != T:
        fraction = train_switch_fraction(v, T, params)
        if state.pulse_count == 0:
            fraction *= params.burn_in_gain
        era = TrainEra(
            v=v, T=T, fraction=fraction, n=0,
            r_start=state.r_eff,
            persistent_start=state.r_persistent,
            volatile_start=state.r_volatile_excess,
        )

    trace = []
    persistent = state.r_persistent
    volatile = state.r_volatile_excess
    r_prev = persistent + volatile
    for k in range(1, count + 1):
        n = era.n + k
        r_n = _clamp_r(era.r_start * (1.0 + era.fraction * -math.expm1(-n / params.n_tau)))
        delta = r_n - r_prev
        persistent += params.eta_nv * delta
        volatile += (1.0 - params.eta_nv) * delta
        r_prev = r_n
        trace.append(r_n * rho_temperature_factor(T, fit.phi_for_state(r_n)))

    new_state = DeviceState(
        r_persistent=persistent,
        r_volatile_excess=volatile,
        pulse_count=state.pulse_count + count,
        era=replace(era, n=era.n + count),
    )
    return new_state, trace


def retention_run(
    state: DeviceState,
    n_reads: int,
    dt_s: float,
    T: float,
    params: SwitchingParams,
    fit: ThermalFit,
) -> tuple[DeviceState, list[float]]:
    """Let the volatile excess relax while reading n_reads times.

    The excess decays by exp(-1/tau_ret) per read interval; the
    persistent part is untouched. Relaxation ends any train era.
    """
    if n_reads < 1:
        raise ValueError("n_reads must be >= 1")
    if dt_s <= 0:
        raise ValueError("dt_s must be > 0")
    decay = math.exp(-1.0 / params.tau_ret)
    volatile = state.r_volatile_excess
    trace = []
    for _ in range(n_reads):
        volatile *= decay
        r_eff = state.r_persistent + volatile
        trace.append(r_eff * rho_temperature_factor(T, fit.phi_for_state(r_eff)))
    new_state = DeviceState(
        r_persistent=state.r_persistent,
        r_volatile_excess=volatile,
        pulse_count=state.pulse_count,
        era=None,
    )
    return new_state, trace


@dataclass(frozen=True)
class ResetResult:
    state: DeviceState
    pulses: int
    resistances: tuple[float, ...]   # 300 K read after each pulse


def reset_to_reference(
    state: DeviceState,
    target_r: float,
    params: SwitchingParams,
    fit: ThermalFit,
    T: float = T_REF,
    v_amplitude: float = 1.5,
    tolerance: float = 0.01,
    max_pulses: int = 10_000,
) -> ResetResult:
    """Drive the persistent state back to target_r with programming trains.

    The volatile excess is zeroed up front (the protocol waits out the
    relaxation before comparing). Pulses are applied one at a time with
    polarity toward the target; when a train era saturates without
    reaching the band the era is restarted, so convergence is geometric
    from any starting point inside the hard resistance bounds. Fails with
    the last achieved resistance after max_pulses.
    """
    if target_r <= 0:
        raise ValueError("target_r must be > 0")
    if not (R_FLOOR <= target_r <= R_CEILING):
        raise ResetError(
            f"target {target_r:.4g} Ohm outside hard bounds "
            f"[{R_FLOOR:.4g}, {R_CEILING:.4g}] Ohm",
            last_resistance=state.r_eff, pulses=0,
        )

    def in_band(r):
        return abs(r - target_r) / target_r < tolerance

    if state.r_volatile_excess == 0.0 and in_band(state.r_persistent):
        return ResetResult(state=state, pulses=0, resistances=())

    current = DeviceState(
        r_persistent=state.r_persistent,
        r_volatile_excess=0.0,
        pulse_count=state.pulse_count,
        era=None,
    )
    reads: list[float] = []
    pulses = 0
    while not in_band(current.r_persistent):
        if pulses >= max_pulses:
            raise ResetError(
                f"no convergence to {target_r:.4g} Ohm within {max_pulses} "
                f"pulses", last_resistance=current.r_persistent, pulses=pulses,
            )
        v = -v_amplitude if current.r_persistent > target_r else v_amplitude
        before = current.r_persistent
        current, trace = apply_pulse_train(current, v, 1, T, params, fit)
        pulses += 1
        reads.append(trace[-1])
        # era saturated without reaching the band: restart the curve
        if abs(current.r_persistent - before) < 1e-5 * target_r:
            current = replace(current, era=None)

    final = DeviceState(
        r_persistent=current.r_persistent,
        r_volatile_excess=0.0,
        pulse_count=current.pulse_count,
        era=None,
    )
    return ResetResult(state=final, pulses=pulses, resistances=tuple(reads))
