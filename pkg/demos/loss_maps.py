"""
Loss landscapes for a single contact
====================================

Scan candidate single forces (s, f, 0) against noiseless readings from a
0.3 N contact at 200 mm and compare how sharply the curvature loss and the
shape loss pin down the truth.
"""
import sys
import tempfile

from fbgforce import ForceVector
from fbgforce.bench import loss_map

truth = ForceVector.of((0.200, 0.3, 0.0))
out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="fbgforce-")
print("writing CSV reports to", out)

for kind in ("curvature", "shape"):
    lm = loss_map(truth, (0.100, 0.290), (0.0, 0.5), (96, 51), kind)
    i, j = lm.argmin
    print("%-9s argmin s=%.1f mm f=%.2f N, sublevel set %d cells" % (kind, 1e3 * lm.s[i], lm.f[j],
                                                                     lm.sublevel_size()))
    lm.write_csv("%s/lossmap_%s.csv" % (out, kind))

# the curvature valley is the tighter one: fewer cells sit near the minimum
