"""S^1 x S^2 with a product of rotations: one invariant geodesic per winding.

The seeds are iota(Sigma_m(q)) for m = 0..4; each relaxes to a helix whose
energy is (psi + 2 pi m)^2 + (phi + 2 pi k)^2.
"""

import numpy as np

from invgeo import Isometry, ProductSceneConfig, SearchConfig, Sphere, dedup_orbits, find_critical, iota, sigma_m
from invgeo.homotopy_maps import circle_loop

PSI, PHI = 0.3, 1.0

s1, s2 = Sphere(1), Sphere(2)
iso = Isometry.product(Isometry.sphere_rotation(s1, PSI), Isometry.sphere_rotation(s2, PHI))
scene = ProductSceneConfig(s1, s2, circle_loop(s1, 64), iso)
q = np.array([1.0, 0.0, 0.0])

records = []
for m in range(5):
    out = find_critical(iota(sigma_m(scene, m, q), iso), SearchConfig(energy_cap=1e4))
    if out.record:
        records.append(out.record)

for fam in dedup_orbits(records):
    rec = fam.members[0]
    m, k = rec.winding[0][0], rec.winding[1][0]
    closed = (PSI + 2 * np.pi * m) ** 2 + (PHI + 2 * np.pi * k) ** 2
    print(f"(m, k)=({m}, {k})  E={rec.energy:.10f}  closed form={closed:.10f}")
