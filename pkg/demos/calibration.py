"""
Calibrating location offset and stiffness
=========================================

Synthetic calibration weights: the 'physical' rod is 10 % stiffer than the
model and the contact sits 3 mm further out than the label says.
"""
import numpy as np

from fbgforce import CALIBRATED_ROD, ForceVector, calibrate_location_bias, calibrate_stiffness, simulate_fbg

model = CALIBRATED_ROD
physical = model.scaled(1.1)
labels = (0.12, 0.18, 0.24)
weight = (0.5, 0.2)
mag = float(np.hypot(*weight))

cases = [simulate_fbg(ForceVector.of((s + 0.003, *weight)), physical, q=1000) for s in labels]

scale = calibrate_stiffness([(m, mag) for m in cases], model)
print("stiffness scale %.4f -> E = %.2f GPa" % (scale, model.youngs_modulus * scale / 1e9))

bias = calibrate_location_bias(list(zip(cases, labels)), model.scaled(scale))
print("location offset %.3f mm" % (1e3 * bias))
