"""Contact force estimation on continuum rods from FBG curvature readings."""
from .rod import (BVPConvergenceError, CurvatureField, DistributedLoad, NodeGrid, RodProperties,
                  RodState, TipLoad, bending_stiffness, integrate_curvature_backward,
                  reconstruct_shape, solve_bvp_reference)
from .forces import (DegenerateForceVectorError, ForceVector, PointForce, distribute_forces,
                     pack_parameters, tip_load, unpack_parameters)
from .estimator import (CalibrationError, EstimationResult, EstimatorConfig, MeasuredCurvature,
                        calibrate_location_bias, calibrate_stiffness, curvature_loss,
                        estimate_forces, force_count_sweep, model_curvature,
                        select_force_count, shape_loss)
from .sensors import (MeasurementFormatError, NoiseModel, SensorLayout, read_measurement,
                      simulate_fbg, write_measurement)

# Calibrated nitinol tube (mm and GPa converted to SI)
CALIBRATED_ROD = RodProperties(length=0.290, d_in=1.118e-3, d_out=1.397e-3, youngs_modulus=67e9)
CALIBRATED_LOCATION_BIAS = -3.12e-3

__version__ = "0.1.0"
