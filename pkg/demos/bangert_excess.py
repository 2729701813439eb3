"""Energy excess of the block homotopy shrinks like 1/(mp)."""

from invgeo import verify_estimate
from invgeo.families import LOOP_FAMILIES, loop_family

for name in sorted(LOOP_FAMILIES):
    rep = verify_estimate(loop_family(name), [2, 4, 8, 16])
    scaled = "  ".join(f"{c:.4f}" for c in rep.scaled_excess)
    print(f"{name:22s} excess*mp: {scaled}  passed={rep.passed}")
