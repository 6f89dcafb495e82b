import warnings
from dataclasses import replace

import numpy as np
import pytest

from fbgforce import (CalibrationError, EstimatorConfig, ForceVector, MeasuredCurvature, NodeGrid,
                      NoiseModel, SensorLayout, calibrate_location_bias, calibrate_stiffness,
                      curvature_loss, estimate_forces, force_count_sweep, model_curvature,
                      reconstruct_shape, select_force_count, shape_loss, simulate_fbg)
from fbgforce.bench import REFERENCE_LOC_REL_ERR, REFERENCE_MAG_REL_ERR, TRIPLE_SCENARIO
from fbgforce.estimator import _FeasibleSet, _isotonic

SINGLE = ForceVector.of((0.2, 0.3, 0.0))
DOUBLE = ForceVector.of((0.12, 0.6, 0.0), (0.22, -0.5, 0.3))


@pytest.fixture(scope="module")
def single_meas(rod):
    return simulate_fbg(SINGLE, rod, q=250)


# ---------- losses ----------
def test_self_consistent_loss_is_zero(rod, grid250, single_meas):
    assert curvature_loss(SINGLE, single_meas, rod, grid250) < 1e-16


def test_shifted_location_has_positive_loss(rod, grid250, single_meas):
    assert curvature_loss(SINGLE.shifted(0.010), single_meas, rod, grid250) > 0


def test_shape_loss_self_consistency_and_rotation(rod, grid250):
    sg = SensorLayout().locations
    shape = reconstruct_shape(model_curvature(SINGLE, rod, grid250)).sample_positions(sg)
    assert shape_loss(SINGLE, shape, sg, rod, grid250) < 1e-16
    c, s = np.cos(0.4), np.sin(0.4)
    rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert shape_loss(SINGLE, shape @ rz.T, sg, rod, grid250) > 1e-8
    with pytest.raises(ValueError):
        shape_loss(SINGLE, shape[:3], sg, rod, grid250)


def test_curvature_loss_rotation_invariant(rod, grid250):
    meas = simulate_fbg(DOUBLE, rod, q=250, noise=NoiseModel(0.05, 4))
    cand = ForceVector.of((0.11, 0.5, 0.1), (0.23, -0.4, 0.2))
    base = curvature_loss(cand, meas, rod, grid250)
    for angle in (0.5, 2.0, -1.2):
        rotated = curvature_loss(cand.rotated(angle), meas.rotated(angle), rod, grid250)
        assert rotated == pytest.approx(base, rel=1e-9)


# ---------- measured curvature / config ----------
def test_measured_curvature_validation(rod):
    with pytest.raises(ValueError):
        MeasuredCurvature([0.1], [0.0], [0.0])
    with pytest.raises(ValueError):
        MeasuredCurvature([0.1, 0.1], [0.0, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        MeasuredCurvature([0.1, 0.2], [0.0], [0.0, 0.0])
    with pytest.raises(ValueError):
        MeasuredCurvature([0.1, 0.4], [0.0, 0.0], [0.0, 0.0]).check_fits(rod.length)


@pytest.mark.parametrize("kw", [dict(loss_threshold=0), dict(max_force_count=0), dict(magnitude_bound=-1),
                                dict(min_separation=0), dict(q=1), dict(model="dp")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EstimatorConfig(**kw)


def test_isotonic_and_projection():
    np.testing.assert_allclose(_isotonic(np.array([3.0, 1.0, 2.0])), [2.0, 2.0, 2.0])
    np.testing.assert_allclose(_isotonic(np.array([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])
    fs = _FeasibleSet(3, 0.02, 0.29, 0.02, 2.5)
    x = fs.project(np.array([0.1, 3.0, -9.0, 0.09, 0.0, 0.0, 0.5, 1.0, 1.0]))
    s = x[0::3]
    assert np.all(np.diff(s) >= 0.02 - 1e-15) and s[0] >= 0.02 and s[-1] <= 0.29
    assert np.all(np.abs(x[1::3]) <= 2.5) and np.all(np.abs(x[2::3]) <= 2.5)


# ---------- estimation ----------
def test_single_force_round_trip(rod, grid250, single_meas):
    res = estimate_forces(single_meas, 1, rod)
    f = res.forces.forces[0]
    assert abs(f.magnitude - 0.3) < 0.01 * 0.3
    assert abs(f.s - 0.2) < grid250.spacing
    assert res.loss <= min(res.seed_losses)
    assert res.h_selected == 1 and not res.no_contact


def test_estimate_is_deterministic(rod, single_meas):
    a = estimate_forces(single_meas, 2, rod)
    b = estimate_forces(single_meas, 2, rod)
    assert a.forces == b.forces and a.loss == b.loss and a.evaluations == b.evaluations


def test_respects_bounds_and_separation(rod):
    meas = simulate_fbg(DOUBLE.scaled(3.0), rod, q=250)
    cfg = EstimatorConfig(magnitude_bound=1.0)
    res = estimate_forces(meas, 2, rod, cfg)
    assert np.all(np.abs(res.forces.components) <= 1.0 + 1e-12)
    assert np.all(np.diff(res.forces.locations) >= cfg.min_separation - 1e-12)
    assert res.forces.locations[0] >= cfg.min_separation - 1e-12


def test_zero_curvature_is_no_contact(rod):
    s = SensorLayout().locations
    meas = MeasuredCurvature(s, np.zeros_like(s), np.zeros_like(s))
    res = estimate_forces(meas, 1, rod)
    assert res.no_contact and res.loss == 0 and res.h_selected == 0 and res.forces.h == 0
    sel = select_force_count(meas, rod)
    assert sel.no_contact and sel.h_selected == 0


def test_rejects_bad_h(rod, single_meas):
    with pytest.raises(ValueError):
        estimate_forces(single_meas, 0, rod)


def test_bvp_objective_agrees(rod):
    meas = simulate_fbg(SINGLE, rod, q=1000)
    cfg = EstimatorConfig(q=50, model="bvp_lm")
    a = estimate_forces(meas, 1, rod, cfg)
    b = estimate_forces(meas, 1, rod, replace(cfg, model="simplified"))
    assert abs(a.forces.locations[0] - b.forces.locations[0]) < 1e-5
    assert abs(a.forces.magnitudes[0] - b.forces.magnitudes[0]) < 1e-4


# ---------- force count ----------
def test_single_force_selects_one(rod, single_meas):
    res = select_force_count(single_meas, rod)
    assert res.h_selected == 1 and res.threshold_met is True and res.loss < 3.0


def test_double_force_selects_two(rod):
    meas = simulate_fbg(DOUBLE, rod, q=250)
    sweep = force_count_sweep(meas, rod, h_max=3)
    losses = [r.loss for r in sweep]
    assert losses[0] > 3.0 and losses[0] / max(losses[1], 1e-300) > 100
    assert losses[0] >= losses[1] >= losses[2]
    res = select_force_count(meas, rod)
    assert res.h_selected == 2 and res.threshold_met


def test_unmet_threshold_returns_best(rod):
    meas = simulate_fbg(DOUBLE, rod, q=250)
    res = select_force_count(meas, rod, EstimatorConfig(max_force_count=1))
    assert res.threshold_met is False and res.h_selected == 1 and res.loss > 3.0


# ---------- calibration ----------
CAL_SITES = (0.12, 0.18, 0.24)


def test_location_bias_recovers_shift(rod, grid250):
    cases = [(simulate_fbg(ForceVector.of((s + 0.003, 0.5, 0.2)), rod, q=1000), s) for s in CAL_SITES]
    assert calibrate_location_bias(cases, rod) == pytest.approx(-0.003, abs=grid250.spacing)
    cases = [(simulate_fbg(ForceVector.of((s, 0.5, 0.2)), rod, q=1000), s) for s in CAL_SITES]
    assert abs(calibrate_location_bias(cases, rod)) < grid250.spacing


def test_location_bias_excludes_failed_cases(rod):
    s = SensorLayout().locations
    zero = MeasuredCurvature(s, np.zeros_like(s), np.zeros_like(s))
    good = (simulate_fbg(ForceVector.of((0.15, 0.5, 0.0)), rod, q=1000), 0.15)
    with pytest.warns(UserWarning):
        bias = calibrate_location_bias([(zero, 0.1), good], rod)
    assert abs(bias) < 1e-3
    with pytest.raises(CalibrationError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        calibrate_location_bias([(zero, 0.1)], rod)


def _mag_cases(props):
    f = ForceVector.of((0.0, 0.5, 0.2)).magnitudes[0]
    return [(simulate_fbg(ForceVector.of((s, 0.5, 0.2)), props, q=1000), f) for s in CAL_SITES]


def test_stiffness_scale_recovered(rod):
    assert calibrate_stiffness(_mag_cases(rod.scaled(1.1)), rod) == pytest.approx(1.1, rel=0.02)
    assert calibrate_stiffness(_mag_cases(rod), rod) == pytest.approx(1.0, rel=0.01)


def test_stiffness_bracket_failure(rod):
    with pytest.raises(CalibrationError):
        calibrate_stiffness(_mag_cases(rod.scaled(3.0)), rod)
    with pytest.raises(CalibrationError):
        calibrate_stiffness([], rod)


def test_location_insensitive_to_stiffness(rod, grid250):
    for meas, _ in _mag_cases(rod):
        locs = [estimate_forces(meas, 1, rod.scaled(k)).forces.locations[0] for k in (0.9, 1.0, 1.1)]
        assert max(locs) - min(locs) < grid250.spacing


# ---------- noisy Monte-Carlo ----------
@pytest.mark.slow
def test_noisy_triple_force_errors_in_ballpark(rod):
    truth = TRIPLE_SCENARIO.forces
    mag, loc = [], []
    for seed in range(50):
        meas = simulate_fbg(truth, rod, q=1000, noise=NoiseModel(0.02, seed))
        res = estimate_forces(meas, 3, rod)
        mag.extend(np.abs(res.forces.magnitudes - truth.magnitudes) / truth.magnitudes)
        loc.extend(np.abs(res.forces.locations - truth.locations) / rod.length)
    m, l = float(np.mean(mag)), float(np.mean(loc))
    # order of magnitude of the reported experimental ranges
    assert REFERENCE_MAG_REL_ERR[0] / 10 < m < REFERENCE_MAG_REL_ERR[1] * 4
    assert REFERENCE_LOC_REL_ERR[0] / 10 < l < REFERENCE_LOC_REL_ERR[1] * 4
