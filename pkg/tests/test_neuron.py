"""Homeostatic neuron system tests."""
import numpy as np
import pytest

from memthermo import (
    CalibrationError,
    FeedforwardMap,
    InputPattern,
    NeuronSystem,
    baseline_curve,
    calibrate_gain,
    feedforward_setpoint,
    neuron_step,
    run_homeostasis,
    settled_rate,
    synapse_weight,
)
from memthermo.neuron import DEFAULT_CALIBRATION_LOADS


def _system(fmap=None, **kwargs):
    return NeuronSystem.build(fmap=fmap or FeedforwardMap(kappa=0.0), **kwargs)


# ---------------------------------------------------------------------------
# weights


def test_weight_unity_at_reference():
    assert synapse_weight(1e6, 1e6) == 1.0


def test_weight_rejects_bad_reference():
    with pytest.raises(ValueError):
        synapse_weight(1e6, 0.0)


def test_pristine_weight_at_hot_end(fit):
    system = _system()
    w = system.weights_at(360.0)
    assert w == pytest.approx(np.full(25, 0.39), abs=1e-9)


def test_weights_strictly_decreasing_in_temperature():
    system = _system()
    temps = np.arange(300.0, 361.0, 5.0)
    sums = [system.weights_at(T).sum() for T in temps]
    assert all(b < a for a, b in zip(sums, sums[1:]))


# ---------------------------------------------------------------------------
# stepping


def test_zero_input_never_spikes():
    system = _system()
    for _ in range(100):
        assert system.step(0.0) == 0
    assert system.accumulator == 0.0


def test_drive_equal_to_threshold_spikes_every_step():
    system = _system(theta=25.0)   # drive = 25 * 1.0 at full load, 300 K
    fired = [system.step(1.0) for _ in range(20)]
    assert all(f == 1 for f in fired[:3])   # before any heating bites


def test_neuron_step_is_pure_value_wrapper():
    system = _system()
    before = system.accumulator
    advanced, spiked = neuron_step(system, 0.3)
    assert system.accumulator == before
    assert isinstance(spiked, bool)
    assert advanced.accumulator != before


def test_long_run_rate_matches_drive_over_theta():
    # fixed temperature, constant load: spike count follows the exact
    # carry-over accumulator, verified against a brute-force loop
    system = _system(fmap=FeedforwardMap(mode="fixed", t_fixed=300.0))
    drive = float(system.weights_at(300.0).sum()) * 0.25
    steps = 500
    spikes = sum(system.step(0.25) for _ in range(steps))
    acc, expected = 0.0, 0
    for _ in range(steps):
        acc += drive
        while acc >= system.theta:
            acc -= system.theta
            expected += 1
    assert spikes == expected
    assert abs(spikes / steps - drive / system.theta) <= 1.0 / system.window


def test_accumulator_invariant_under_heavy_drive():
    system = _system(theta=3.0)
    for _ in range(50):
        system.step(1.0)
        assert 0.0 <= system.accumulator < system.theta


# ---------------------------------------------------------------------------
# feedforward map


def test_affine_map_anchors():
    fmap = FeedforwardMap(kappa=60.0)
    assert feedforward_setpoint(0.0, fmap) == 300.0
    assert feedforward_setpoint(1.0, fmap) == 360.0
    assert feedforward_setpoint(0.25, fmap) == 315.0


def test_affine_map_clamps_to_chamber():
    fmap = FeedforwardMap(kappa=200.0)
    assert feedforward_setpoint(0.9, fmap) == 360.0


def test_map_validation():
    with pytest.raises(ValueError):
        FeedforwardMap(kappa=-1.0)
    with pytest.raises(ValueError):
        FeedforwardMap(mode="table", table_loads=(0.1,), table_temps=(310.0,))
    with pytest.raises(ValueError, match="non-decreasing"):
        FeedforwardMap(mode="table", table_loads=(0.1, 0.2),
                       table_temps=(320.0, 310.0))
    fmap = FeedforwardMap()
    with pytest.raises(ValueError):
        fmap.setpoint(1.5)


# ---------------------------------------------------------------------------
# gain calibration


def test_calibrate_single_load_tie_breaks_to_smallest_kappa():
    cal = calibrate_gain([0.25], _system(), mode="affine")
    assert cal.kappa == 0.0


def test_uncompensated_rates_strictly_increase_with_load():
    cal = calibrate_gain(system=_system(), mode="affine")
    assert all(b > a for a, b in
               zip(cal.rates_uncompensated, cal.rates_uncompensated[1:]))


@pytest.mark.parametrize("mode", ["affine", "table"])
def test_calibration_shrinks_cross_load_spread(mode):
    cal = calibrate_gain(system=_system(), mode=mode)
    assert cal.spread_calibrated < cal.spread_uncompensated
    # compensation must not destroy the monotone residual read-out
    assert all(b > a for a, b in
               zip(cal.rates_calibrated, cal.rates_calibrated[1:]))


def test_table_calibration_infeasible_range_raises():
    with pytest.raises(CalibrationError, match="feasible"):
        calibrate_gain([0.10, 0.25, 0.40], _system(), mode="table")


def test_settled_rate_fixed_point_matches_simulation():
    cal = calibrate_gain(system=_system(), mode="table")
    system = _system(fmap=cal.fmap)
    predicted = settled_rate(system, 0.30)
    curve = baseline_curve([0.30], system, settle_steps=6000,
                           measure_steps=4000)
    assert curve[0][1] == pytest.approx(predicted, abs=2e-3)


# ---------------------------------------------------------------------------
# homeostasis runs


@pytest.fixture(scope="module")
def table_map():
    return calibrate_gain(system=NeuronSystem.build(
        fmap=FeedforwardMap(kappa=0.0)), mode="table").fmap


def test_negative_feedback_sign():
    cold = _system(fmap=FeedforwardMap(mode="fixed", t_fixed=320.0))
    hot = _system(fmap=FeedforwardMap(mode="fixed", t_fixed=350.0))
    assert settled_rate(hot, 0.3) < settled_rate(cold, 0.3)


def test_constant_pattern_rate_constant_after_settling(table_map):
    system = NeuronSystem.build(fmap=table_map)
    res = run_homeostasis(InputPattern.constant(0.25, 6000), system)
    rates = [r for _, t, r in res.window_rates() if t > 5000.0]
    assert max(rates) - min(rates) <= 1.0 / system.window + 1e-12


def _step_response(table_map, load_a, load_b):
    system = NeuronSystem.build(fmap=table_map)
    pattern = InputPattern(segments=((6000, load_a), (6000, load_b)))
    res = run_homeostasis(pattern, system)
    rates = res.window_rates()
    w = res.window
    pre = [r for k, _, r in rates if 5000 <= (k + 1) * w <= 6000]
    base = float(np.mean(pre))
    first_post = next(r for k, _, r in rates if k * w >= 6000)
    post_peak = max(abs(r - base) for k, _, r in rates
                    if 6000 <= k * w < 6000 + 10 * w)
    tail = [r for k, _, r in rates if k * w >= 6000 + 5 * 720]
    residual = float(np.mean(tail)) - base
    return base, first_post, post_peak, residual


def test_step_up_polarity_and_transient_dominance(table_map):
    base, first_post, peak, residual = _step_response(table_map, 0.20, 0.30)
    assert first_post > base          # polarity matches the input change
    assert residual > 0               # small distinct baseline shift
    assert peak >= 3.0 * abs(residual)


def test_step_down_polarity(table_map):
    base, first_post, peak, residual = _step_response(table_map, 0.30, 0.20)
    assert first_post < base
    assert residual < 0
    assert peak >= 3.0 * abs(residual)


def test_homeostasis_deterministic(table_map):
    pattern = InputPattern(segments=((500, 0.2), (500, 0.3)))
    a = run_homeostasis(pattern, NeuronSystem.build(fmap=table_map), seed=4)
    b = run_homeostasis(pattern, NeuronSystem.build(fmap=table_map), seed=4)
    assert np.array_equal(a.spikes, b.spikes)
    assert np.array_equal(a.t_dev, b.t_dev)


def test_both_windowings_emitted(table_map):
    system = NeuronSystem.build(fmap=table_map)
    res = run_homeostasis(InputPattern.constant(0.3, 2000), system)
    assert len(res.window_rates()) == 2000 // 25
    spike_windows = res.spike_count_windows()
    assert spike_windows, "no spike-count windows recorded"
    total_spikes = int(res.spikes.sum())
    assert len(spike_windows) == total_spikes // 25


# ---------------------------------------------------------------------------
# baseline curve


def test_baseline_zero_load_is_silent():
    curve = baseline_curve([0.0], _system(), settle_steps=50,
                           measure_steps=200)
    assert curve[0][1] == 0.0


def test_baseline_without_feedforward_is_linear():
    curve = baseline_curve(DEFAULT_CALIBRATION_LOADS, _system(),
                           settle_steps=200, measure_steps=2000)
    loads = np.array([l for l, _ in curve])
    rates = np.array([r for _, r in curve])
    assert all(b > a for a, b in zip(rates, rates[1:]))
    slope, intercept = np.polyfit(loads, rates, 1)
    pred = slope * loads + intercept
    r2 = 1.0 - np.sum((rates - pred) ** 2) / np.sum((rates - rates.mean()) ** 2)
    assert r2 >= 0.95


def test_baseline_flattens_then_knees_above_operating_range(table_map):
    # within the calibrated band compensation keeps the slope shallow;
    # past 0.40 the table clamps and the rate climbs uncompensated
    system = NeuronSystem.build(fmap=table_map)
    curve = baseline_curve([0.30, 0.40, 0.50, 0.60], system,
                           settle_steps=5000, measure_steps=2000)
    rates = dict(curve)
    slope_inside = (rates[0.40] - rates[0.30]) / 0.10
    slope_outside = (rates[0.60] - rates[0.50]) / 0.10
    assert slope_outside > 2.0 * slope_inside


def test_vector_loads_drive_the_same_mean_feedforward(table_map):
    # a concentrated input and a uniform input with equal mean heat the
    # chamber identically but drive different synapse subsets
    hot = np.zeros(25)
    hot[:5] = 1.0
    uniform = InputPattern.constant(0.2, 300)
    concentrated = InputPattern(segments=((300, tuple(hot)),))
    res_u = run_homeostasis(uniform, NeuronSystem.build(fmap=table_map))
    res_c = run_homeostasis(concentrated, NeuronSystem.build(fmap=table_map))
    assert np.allclose(res_u.t_set, res_c.t_set)
    # identical synapses: equal drive, equal spike trains
    assert np.array_equal(res_u.spikes, res_c.spikes)


def test_pattern_parsing_and_validation():
    pattern = InputPattern.parse("0.20:100,0.35:50")
    assert pattern.total_steps == 150
    with pytest.raises(ValueError):
        InputPattern.parse("0.2")
    with pytest.raises(ValueError):
        InputPattern(segments=((0, 0.5),))
    with pytest.raises(ValueError):
        InputPattern(segments=((10, 1.5),))
    vec = InputPattern(segments=((5, tuple([0.5] * 25)),))
    assert vec.total_steps == 5


def test_system_requires_exactly_25_synapses(fit):
    from memthermo import DeviceState, ThermalPlant

    with pytest.raises(ValueError, match="25"):
        NeuronSystem(
            synapses=[DeviceState(r_persistent=1e6)] * 10,
            fit=fit, plant=ThermalPlant.packaged(),
            fmap=FeedforwardMap(),
        )
