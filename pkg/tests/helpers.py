"""Path builders shared by the test modules."""

import numpy as np

from invgeo import DiscretePath, FlatTorus, Isometry, ProductManifold, Sphere


def torus_loop(N=64, cls=(1, 0), amp=0.0, phase=0.0, base=(0.0, 0.0)):
    t2 = FlatTorus(2)
    t = np.arange(N) / N
    x = np.asarray(base, float) + np.outer(t, np.asarray(cls, float))
    x[:, 1] += amp * np.sin(2 * np.pi * t + phase)
    return DiscretePath(t2, Isometry.identity(t2), 1.0, x)


def random_path(manifold, isometry, rng, N=32, amplitude=0.3, noise=0.02, shift=1.0):
    """Homotopy track of a random point, bent by a few random harmonics and jittered.

    Without a homotopy track the curve is a small loop around a random point,
    which is enough for the local identities tested here.
    """
    x0 = manifold.random_point(rng)
    harmonics = [manifold.random_tangent(rng, x0) for _ in range(3)]
    out = np.empty((N, manifold.ambient_dim))
    for k in range(N):
        t = k / N
        y = isometry.homotopy(t, x0) if isometry.has_homotopy else x0
        v = sum(np.sin(2 * np.pi * (j + 1) * t) * h for j, h in enumerate(harmonics)) * amplitude / 3
        v = manifold.project(y, v) + noise * manifold.random_tangent(rng, y)
        out[k] = manifold.exp(y, v)
    return DiscretePath(manifold, isometry, shift, out)


def exp_variation(path, field, eps):
    m = path.manifold
    return path.with_samples(m.exp(path.samples, eps * field))


def corpus_manifolds():
    t2, s2 = FlatTorus(2), Sphere(2)
    s1 = Sphere(1)
    prod = ProductManifold([s1, s2])
    return {
        "torus": [Isometry.identity(t2), Isometry.torus_translation(t2, [0.3, 0.1])],
        "sphere": [Isometry.identity(s2), Isometry.sphere_rotation(s2, 1.0)],
        "product": [Isometry.product(Isometry.sphere_rotation(s1, 0.3), Isometry.sphere_rotation(s2, 1.0))],
    }


def random_corpus(count, seed=7, N=32):
    rng = np.random.default_rng(seed)
    isos = [iso for group in corpus_manifolds().values() for iso in group]
    paths = []
    for i in range(count):
        iso = isos[i % len(isos)]
        paths.append(random_path(iso.manifold, iso, rng, N=N, shift=float(rng.uniform(0.5, 3.0))))
    return paths
