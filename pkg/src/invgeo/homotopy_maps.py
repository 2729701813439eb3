"""Maps between free loops and twisted loops on products M1 x M2.

``sigma_m`` wraps a base loop of M1 m times at a fixed point of M2, ``iota``
turns a free loop into an I-twisted one by appending the track of the homotopy
``I_t``, and ``ev`` reads off the M2 factor at time zero.  Components of the
loop spaces are told apart by integer winding markers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, MissingHomotopyError
from .isometry import Isometry
from .manifold import FlatTorus, Manifold, ManifoldPoint, ProductManifold, Sphere
from .pathspace import DiscretePath

__all__ = ["ProductSceneConfig", "sigma_m", "iota", "ev", "winding_markers", "circle_loop"]


@dataclass(frozen=True, eq=False)
class ProductSceneConfig:
    m1: Manifold
    m2: Manifold
    sigma: np.ndarray
    isometry: Isometry

    def __post_init__(self):
        sig = self.m1.normalize(np.asarray(self.sigma, dtype=float))
        if sig.ndim != 2 or sig.shape[1] != self.m1.ambient_dim:
            raise ArgumentError("sigma must be an (N, d1) sample array on M1")
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)
        if self.isometry.manifold != self.product:
            raise ArgumentError("isometry must act on M1 x M2")

    @property
    def product(self) -> ProductManifold:
        return ProductManifold([self.m1, self.m2])

    @property
    def N(self) -> int:
        return len(self.sigma)


def circle_loop(m1: Manifold, N: int) -> np.ndarray:
    """Unit-speed generator of the first homology of a circle factor."""
    t = np.arange(N) / N
    if isinstance(m1, FlatTorus) and m1.n == 1:
        return t[:, None]
    if isinstance(m1, Sphere) and m1.n == 1:
        return np.stack([np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)], axis=1)
    raise ArgumentError("circle_loop needs a 1-torus or the unit circle")


def sigma_m(cfg: ProductSceneConfig, m: int, q) -> DiscretePath:
    """The free loop t -> (sigma(m t), q), sampled N * max(m, 1) times."""
    m = int(m)
    if m < 0:
        raise ArgumentError("m must be non-negative")
    q = np.asarray(q.coords if isinstance(q, ManifoldPoint) else q, dtype=float)
    if q.shape != (cfg.m2.ambient_dim,) or not cfg.m2.check_point(q, 1e-9):
        raise ArgumentError("q is not a point of M2")
    if m == 0:
        first = np.repeat(cfg.sigma[:1], cfg.N, axis=0)
    else:
        first = np.tile(cfg.sigma, (m, 1))
    second = np.repeat(cfg.m2.normalize(q)[None, :], len(first), axis=0)
    prod = cfg.product
    return DiscretePath(prod, Isometry.identity(prod), 1.0, np.concatenate([first, second], axis=1))


def iota(zeta: DiscretePath, isometry: Isometry) -> DiscretePath:
    """Free loop -> I-twisted loop: run zeta at double speed, then follow I_t from zeta(0)."""
    if not zeta.isometry.is_identity:
        raise ArgumentError("iota takes a free loop")
    if abs(zeta.shift - 1.0) > 1e-12:
        raise ArgumentError("iota takes loops of shift 1")
    if isometry.manifold != zeta.manifold:
        raise ArgumentError("isometry acts on a different manifold")
    if not isometry.has_homotopy:
        raise MissingHomotopyError(f"{isometry.kind} has no homotopy track to the identity")
    n = zeta.N
    x0 = zeta.samples[0]
    tail = np.stack([isometry.homotopy(j / n, x0) for j in range(n)])
    return DiscretePath(zeta.manifold, isometry, 1.0, np.concatenate([zeta.samples, tail]))


def ev(zeta: DiscretePath, first_factors: int = 1) -> ManifoldPoint:
    """The M2 factor of zeta(0); M1 is the first ``first_factors`` factors."""
    m = zeta.manifold
    if not isinstance(m, ProductManifold) or not 0 < first_factors < len(m.factors):
        raise ArgumentError("ev needs a product manifold")
    rest = m.factors[first_factors:]
    start = m.slices[first_factors].start
    m2 = rest[0] if len(rest) == 1 else ProductManifold(rest)
    return ManifoldPoint(m2, zeta.samples[0, start:])


# -- winding markers --------------------------------------------------------------


def _factor_isometries(iso: Isometry, count: int):
    if iso.kind == "product":
        return list(iso.children) if len(iso.children) == count else None
    if count == 1:
        return [iso]
    if iso.is_identity:
        return [None] * count  # identity on every factor
    return None


def _planar_sweep(a: np.ndarray, b: np.ndarray) -> float:
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    return float(np.sum(np.arctan2(cross, dot)))


def _factor_marker(m: Manifold, iso: Optional[Isometry], x: np.ndarray, y: np.ndarray):
    kind = "identity" if iso is None or iso.is_identity else iso.kind
    if isinstance(m, FlatTorus):
        disp = np.sum(m.log(x, y), axis=0)
        if kind == "identity":
            base = np.zeros(m.n)
        elif kind == "torus_translation":
            base = np.asarray(iso.params["vector"], dtype=float)
        else:
            return None
        return [int(v) for v in np.round(disp - base)]
    if isinstance(m, Sphere) and m.n in (1, 2):
        if m.n == 2 and np.min(np.hypot(x[:, 0], x[:, 1])) < 1e-9:
            return None
        if kind == "identity":
            base = 0.0
        elif kind == "sphere_rotation":
            base = iso.params["angle"]
            if m.n == 2:
                axis = np.asarray(iso.params["axis"], dtype=float)
                axis = axis / np.linalg.norm(axis)
                if not np.allclose(np.abs(axis), [0.0, 0.0, 1.0], atol=1e-12):
                    return None
                base *= float(np.sign(axis[2]))
        else:
            return None
        return [int(round((_planar_sweep(x, y) - base) / (2 * math.pi)))]
    return None


def winding_markers(path: DiscretePath) -> Optional[list]:
    """Integer winding data per factor, or None where no marker is defined.

    Tori report lifted displacement minus the twist's translation, circles and
    2-spheres report the azimuthal sweep about the z-axis minus the twist's
    rotation angle, in units of full turns.
    """
    m = path.manifold
    factors = m.factors if isinstance(m, ProductManifold) else [m]
    isos = _factor_isometries(path.isometry, len(factors))
    if isos is None:
        return None
    x = path.samples
    y = path.next_samples()
    if isinstance(m, ProductManifold):
        xs, ys = m.split(x), m.split(y)
    else:
        xs, ys = [x], [y]
    out = []
    for fm, fi, a, b in zip(factors, isos, xs, ys):
        mark = _factor_marker(fm, fi, a, b)
        out.append(mark)
    if all(v is None for v in out):
        return None
    return out


def sigma_grid(cfg: ProductSceneConfig, ms: Sequence[int], qs: Sequence) -> list:
    """ev(iota(sigma_m(q))) for every (m, q); convenience for identity checks."""
    return [[ev(iota(sigma_m(cfg, m, q), cfg.isometry)).coords for q in qs] for m in ms]
