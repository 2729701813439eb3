"""Invariant geodesics of a rotation of the 2-sphere.

Starts near the equator with winding k relax onto the equator traversed at
speed theta + 2 pi k; the script prints energies next to the closed form.
"""

import numpy as np

from invgeo import Isometry, SearchConfig, Sphere, dedup_orbits, find_critical, seed_library

THETA = 1.0

s2 = Sphere(2)
rot = Isometry.sphere_rotation(s2, THETA)
seeds = seed_library(s2, rot, "equator", N=128, windings=[-2, -1, 0, 1, 2], amplitude=0.3, seed=11)
records = [out.record for out in (find_critical(s, SearchConfig(energy_cap=1000.0)) for s in seeds) if out.record]

for fam in dedup_orbits(records):
    for rec in fam.members:
        k = rec.winding[0][0]
        print(f"k={k:+d}  E={rec.energy:.12f}  closed form={(THETA + 2 * np.pi * k) ** 2:.12f}  "
              f"index={rec.index_report.index}  period={rec.basic_period:.6f}")
