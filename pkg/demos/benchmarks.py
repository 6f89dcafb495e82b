"""
Speed and accuracy against node count
=====================================

Time single-force estimation with the sweep objective and with the shooting
objective, then check how Monte-Carlo errors shrink as the grid is refined.
Writes CSV reports to the given directory (default: a fresh temporary directory).
"""
import sys
import tempfile

from fbgforce import NoiseModel
from fbgforce.bench import accuracy_vs_q, random_scenarios, speedups, timing_compare, write_reports

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="fbgforce-")
print("writing CSV reports to", out)

timing = timing_compare([50, 100], repetitions=10)
for (sc, q), r in sorted(speedups(timing).items()):
    print("q=%d: sweep objective %.0fx faster" % (q, r))
write_reports(out + "/timing.csv", timing)

acc = accuracy_vs_q(random_scenarios(20, 0), [10, 50, 250], NoiseModel(0.02, 0), draws=2)
for r in acc:
    print("q=%3d  magnitude RMSE %.4f N  location RMSE %.2f mm" % (r.q, r.mag_rmse_N, 1e3 * r.loc_rmse_m))
write_reports(out + "/accuracy.csv", acc)
