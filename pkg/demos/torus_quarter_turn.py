"""The quarter-turn of the flat torus has no invariant geodesic.

Every random start shrinks onto one of the two fixed points, (0, 0) or (1/2, 1/2).
"""

from collections import Counter

import numpy as np

from invgeo import FlatTorus, Isometry, SearchConfig, seed_library
from invgeo.optimizer import run_batch

t2 = FlatTorus(2)
rot = Isometry.torus_rotation90(t2)
outs = run_batch(seed_library(t2, rot, "random", N=64, n=50, seed=7), SearchConfig(energy_cap=100.0))

ends = Counter(tuple(float(v) for v in np.round(o.final_path.samples[0], 3) % 1.0) for o in outs)
print("statuses:", Counter(o.status for o in outs))
for point, count in sorted(ends.items()):
    print(f"collapsed onto {point}: {count}")
