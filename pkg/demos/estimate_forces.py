"""
Estimating contact forces from FBG readings
===========================================

Simulate 14 gratings on a rod touched at three places, add 2 % noise and let
the estimator pick the number of contacts and their loads.
"""
import numpy as np

from fbgforce import (CALIBRATED_LOCATION_BIAS, CALIBRATED_ROD, ForceVector, NoiseModel, select_force_count,
                      simulate_fbg)
from fbgforce.bench import force_number_curve

rod = CALIBRATED_ROD
truth = ForceVector.of((0.08, 0.5, 0.2), (0.16, -0.6, 0.3), (0.25, 0.4, 0.5))

meas = simulate_fbg(truth, rod, noise=NoiseModel(sigma_rel=0.02, seed=1), q=1000)
print("gratings at (mm):", np.round(1e3 * meas.grating_locations).astype(int))

# best loss for each candidate contact count
for h, loss in force_number_curve(meas, rod):
    print("h=%d  loss=%.4g" % (h, loss))

res = select_force_count(meas, rod)
print("selected h=%d (threshold met: %s), %d evaluations in %.2f s"
      % (res.h_selected, res.threshold_met, res.evaluations, res.elapsed))
for f, t in zip(res.forces, truth):
    print("  s=%6.1f mm (true %6.1f)  |f|=%.3f N (true %.3f)" % (1e3 * f.s, 1e3 * t.s, f.magnitude, t.magnitude))

# on hardware the calibrated offset is added to every location
print("calibrated locations (mm):", np.round(1e3 * res.estimated_locations(CALIBRATED_LOCATION_BIAS), 2))
