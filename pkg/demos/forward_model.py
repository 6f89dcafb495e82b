"""
Curvature of a loaded rod
=========================

A single sweep from the tip to the clamp gives the curvature of a straight
nitinol tube under point forces. The shooting solution of the full rod
equations is slower but should agree node by node.
"""
import time

import numpy as np

from fbgforce import (CALIBRATED_ROD, ForceVector, NodeGrid, bending_stiffness, integrate_curvature_backward,
                      reconstruct_shape, solve_bvp_reference)
from fbgforce.forces import loads

rod = CALIBRATED_ROD
grid = NodeGrid(rod.length, 250)
print("bending stiffness EI = %.4e N m^2" % bending_stiffness(rod)[0])

# two contacts, (s, f_x, f_y) in m and N
fv = ForceVector.of((0.12, 0.6, 0.0), (0.22, -0.5, 0.3))
dist, tip = loads(fv, grid)

t0 = time.perf_counter()
field = integrate_curvature_backward(rod, dist, tip)
t_sweep = time.perf_counter() - t0

t0 = time.perf_counter()
state = solve_bvp_reference(rod, dist, tip)
t_bvp = time.perf_counter() - t0

ref = state.curvature
diff = np.max(np.abs(np.column_stack([field.u_x, field.u_y]) - ref[:, :2])) / np.max(np.abs(ref[:, :2]))
print("curvature at the clamp: u_x = %.4f, u_y = %.4f 1/m" % (field.u_x[0], field.u_y[0]))
print("sweep vs shooting: max relative difference %.1e, torsion %.1e" % (diff, np.max(np.abs(ref[:, 2]))))
print("sweep %.2f ms, shooting %.1f ms (first calls include compilation)" % (1e3 * t_sweep, 1e3 * t_bvp))

# positions follow from the curvature alone
shape = reconstruct_shape(field)
print("tip position (mm):", np.round(1e3 * shape.tip, 3))
print("tip position from shooting (mm):", np.round(1e3 * state.tip, 3))
