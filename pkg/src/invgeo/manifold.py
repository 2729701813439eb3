"""Model Riemannian manifolds: flat tori, round spheres and metric products.

All manifolds work on batches of points stored as arrays of shape ``(..., d)``
where ``d`` is the ambient coordinate dimension:

* ``FlatTorus(n)``: the unit-square torus R^n / Z^n, coordinates in [0, 1)^n.
* ``Sphere(n)``: the unit sphere S^n embedded in R^(n+1).
* ``ProductManifold(factors)``: concatenated coordinates, product metric.

Tangent vectors are stored in the same ambient coordinates.  Every method is a
pure function of its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ArgumentError, NonUniqueGeodesicError

__all__ = [
    "Manifold",
    "FlatTorus",
    "Sphere",
    "ProductManifold",
    "ManifoldPoint",
    "TangentVector",
    "metric_eval",
    "shortest_geodesic",
    "injectivity_radius_bound",
    "manifold_from_config",
]

_TINY = 1e-15


class Manifold:
    """Base class.  Subclasses implement the vectorized geometry kernels."""

    ambient_dim: int
    dim: int

    @property
    def id(self) -> str:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, Manifold) and self.id == other.id

    def __hash__(self):
        return hash(self.id)

    def __repr__(self):
        return f"{type(self).__name__}({self.id})"

    # -- kernels (vectorized over leading axes) -------------------------------
    def normalize(self, x):
        raise NotImplementedError

    def project(self, x, v):
        raise NotImplementedError

    def inner(self, x, u, v):
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def log(self, x, y):
        raise NotImplementedError

    def exp(self, x, v):
        raise NotImplementedError

    def dist(self, x, y):
        raise NotImplementedError

    def transport(self, x, y):
        """Matrices of parallel transport T_x -> T_y along the minimizing geodesic."""
        raise NotImplementedError

    def tangent_frame(self, x):
        """Orthonormal frames of shape ``(..., ambient_dim, dim)``."""
        raise NotImplementedError

    def projector(self, x):
        """Ambient matrices of the orthogonal projection onto T_x."""
        raise NotImplementedError

    def dist2_hessian_blocks(self, a, b):
        """Second derivative of ``d(a, b)**2`` on M x M.

        Returns ambient matrices ``(Haa, Hab, Hbb)`` such that for tangent vectors
        u at a and w at b the quadratic form is
        ``u.Haa.u + 2 u.Hab.w + w.Hbb.w``.
        """
        raise NotImplementedError

    def injectivity_radius_bound(self) -> float:
        raise NotImplementedError

    def random_point(self, rng, size=None):
        raise NotImplementedError

    def check_point(self, x, tol=1e-12) -> bool:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    # -- derived helpers ------------------------------------------------------
    def geodesic_interp(self, x, y, lam):
        """Point at fraction ``lam`` along the minimizing geodesic from x to y."""
        lam = np.asarray(lam, dtype=float)[..., None]
        return self.exp(x, lam * self.log(x, y))

    def random_tangent(self, rng, x):
        x = np.asarray(x, dtype=float)
        return self.project(x, rng.standard_normal(x.shape))

    def point(self, coords) -> "ManifoldPoint":
        return ManifoldPoint(self, coords)

    @property
    def factors(self) -> List["Manifold"]:
        return [self]


@dataclass(frozen=True, eq=False)
class FlatTorus(Manifold):
    n: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError("torus dimension must be positive")

    @property
    def ambient_dim(self):
        return self.n

    @property
    def dim(self):
        return self.n

    @property
    def id(self):
        return f"T{self.n}"

    def normalize(self, x):
        x = np.asarray(x, dtype=float)
        y = x - np.floor(x)
        return np.where(y >= 1.0, 0.0, y)

    def project(self, x, v):
        return np.array(v, dtype=float)

    def log(self, x, y):
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return d - np.round(d)

    def exp(self, x, v):
        return self.normalize(np.asarray(x, dtype=float) + v)

    def dist(self, x, y):
        return np.linalg.norm(self.log(x, y), axis=-1)

    def transport(self, x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))[:-1]
        return np.broadcast_to(np.eye(self.n), shape + (self.n, self.n)).copy()

    def tangent_frame(self, x):
        shape = np.shape(x)[:-1]
        return np.broadcast_to(np.eye(self.n), shape + (self.n, self.n)).copy()

    def projector(self, x):
        return self.tangent_frame(x)

    def dist2_hessian_blocks(self, a, b):
        shape = np.broadcast_shapes(np.shape(a), np.shape(b))[:-1]
        eye = np.broadcast_to(np.eye(self.n), shape + (self.n, self.n))
        return 2.0 * eye, -2.0 * eye, 2.0 * eye

    def injectivity_radius_bound(self):
        # half the shortest closed lattice vector of Z^n
        return 0.5

    def random_point(self, rng, size=None):
        shape = (self.n,) if size is None else tuple(np.atleast_1d(size)) + (self.n,)
        return rng.random(shape)

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        return x.shape[-1] == self.n and bool(np.all((x >= 0.0) & (x < 1.0)))

    def to_config(self):
        return {"type": "torus", "dim": self.n}


@dataclass(frozen=True, eq=False)
class Sphere(Manifold):
    n: int = 2

    def __post_init__(self):
        if self.n < 1:
            raise ArgumentError("sphere dimension must be positive")

    @property
    def ambient_dim(self):
        return self.n + 1

    @property
    def dim(self):
        return self.n

    @property
    def id(self):
        return f"S{self.n}"

    def normalize(self, x):
        x = np.asarray(x, dtype=float)
        nrm = np.linalg.norm(x, axis=-1, keepdims=True)
        if np.any(nrm < _TINY):
            raise ArgumentError("cannot normalize the zero vector onto the sphere")
        # leave unit vectors untouched so normalizing is idempotent
        return np.where(np.abs(nrm - 1.0) <= 4e-16, x, x / nrm)

    def project(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return v - np.sum(x * v, axis=-1, keepdims=True) * x

    def log(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = np.clip(np.sum(x * y, axis=-1, keepdims=True), -1.0, 1.0)
        w = y - c * x
        nw = np.linalg.norm(w, axis=-1, keepdims=True)
        theta = np.arctan2(nw, c)
        scale = np.where(nw > _TINY, theta / np.where(nw > _TINY, nw, 1.0), 1.0)
        return scale * w

    def exp(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(nv > _TINY, nv, 1.0)
        out = np.cos(nv) * x + np.where(nv > _TINY, np.sin(nv) / safe, 1.0) * v
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def dist(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = np.sum(x * y, axis=-1)
        s = np.linalg.norm(y - c[..., None] * x, axis=-1)
        return np.arctan2(s, c)

    def transport(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        c = np.sum(x * y, axis=-1)[..., None, None]
        eye = np.eye(self.n + 1)
        return eye - (x + y)[..., :, None] * y[..., None, :] / (1.0 + c)

    def tangent_frame(self, x):
        x = np.asarray(x, dtype=float)
        # rows 1: of Vh span the orthogonal complement of x
        _, _, vh = np.linalg.svd(x[..., None, :])
        return np.swapaxes(vh[..., 1:, :], -1, -2)

    def projector(self, x):
        x = np.asarray(x, dtype=float)
        return np.eye(self.n + 1) - x[..., :, None] * x[..., None, :]

    def dist2_hessian_blocks(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        a, b = np.broadcast_arrays(a, b)
        d = self.n + 1
        eye = np.eye(d)
        la = self.log(a, b)
        lb = self.log(b, a)
        r = np.linalg.norm(la, axis=-1)
        small = r < 1e-9
        rs = np.where(small, 1.0, r)
        ea = la / rs[..., None]
        eb = -lb / rs[..., None]
        rho = np.where(small, 1.0, r / np.where(small, 1.0, np.sin(rs)))[..., None, None]
        cosr = np.cos(r)[..., None, None]
        na = eye - ea[..., :, None] * ea[..., None, :]
        nb = eye - eb[..., :, None] * eb[..., None, :]
        p = self.transport(a, b)
        haa = 2.0 * ea[..., :, None] * ea[..., None, :] + 2.0 * rho * cosr * na
        hbb = 2.0 * eb[..., :, None] * eb[..., None, :] + 2.0 * rho * cosr * nb
        hab = -2.0 * ea[..., :, None] * eb[..., None, :] - 2.0 * rho * (
            na @ np.swapaxes(p, -1, -2) @ nb
        )
        if np.any(small):
            pt = np.swapaxes(p, -1, -2)
            haa = np.where(small[..., None, None], 2.0 * eye, haa)
            hbb = np.where(small[..., None, None], 2.0 * eye, hbb)
            hab = np.where(small[..., None, None], -2.0 * pt, hab)
        return haa, hab, hbb

    def injectivity_radius_bound(self):
        return float(np.pi)

    def random_point(self, rng, size=None):
        shape = (self.n + 1,) if size is None else tuple(np.atleast_1d(size)) + (self.n + 1,)
        return self.normalize(rng.standard_normal(shape))

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        return x.shape[-1] == self.n + 1 and bool(
            np.all(np.abs(np.linalg.norm(x, axis=-1) - 1.0) < tol)
        )

    def to_config(self):
        return {"type": "sphere", "dim": self.n}


class ProductManifold(Manifold):
    """Metric product of factor manifolds; coordinates are concatenated."""

    def __init__(self, factors: Sequence[Manifold]):
        flat: List[Manifold] = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, ProductManifold) else [f])
        if len(flat) < 2:
            raise ArgumentError("a product needs at least two factors")
        self._factors = tuple(flat)
        offsets = np.cumsum([0] + [f.ambient_dim for f in flat])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        tdims = np.cumsum([0] + [f.dim for f in flat])
        self.tslices = [slice(int(a), int(b)) for a, b in zip(tdims[:-1], tdims[1:])]

    @property
    def factors(self):
        return list(self._factors)

    @property
    def ambient_dim(self):
        return sum(f.ambient_dim for f in self._factors)

    @property
    def dim(self):
        return sum(f.dim for f in self._factors)

    @property
    def id(self):
        return "x".join(f.id for f in self._factors)

    def split(self, x):
        x = np.asarray(x, dtype=float)
        return [x[..., s] for s in self.slices]

    def _map(self, name, *arrays):
        parts = [self.split(a) for a in arrays]
        return [getattr(f, name)(*(p[i] for p in parts)) for i, f in enumerate(self._factors)]

    def normalize(self, x):
        return np.concatenate(self._map("normalize", x), axis=-1)

    def project(self, x, v):
        return np.concatenate(self._map("project", x, v), axis=-1)

    def log(self, x, y):
        return np.concatenate(self._map("log", x, y), axis=-1)

    def exp(self, x, v):
        return np.concatenate(self._map("exp", x, v), axis=-1)

    def dist(self, x, y):
        return np.sqrt(sum(d**2 for d in self._map("dist", x, y)))

    def _block_diag(self, blocks, cols=None):
        shape = blocks[0].shape[:-2]
        cols = cols or self.slices
        out = np.zeros(shape + (self.ambient_dim, cols[-1].stop))
        for s, c, blk in zip(self.slices, cols, blocks):
            out[..., s, c] = blk
        return out

    def transport(self, x, y):
        return self._block_diag(self._map("transport", x, y))

    def tangent_frame(self, x):
        return self._block_diag(self._map("tangent_frame", x), cols=self.tslices)

    def projector(self, x):
        return self._block_diag(self._map("projector", x))

    def dist2_hessian_blocks(self, a, b):
        per = self._map("dist2_hessian_blocks", a, b)
        return tuple(self._block_diag([blk[i] for blk in per]) for i in range(3))

    def injectivity_radius_bound(self):
        return min(f.injectivity_radius_bound() for f in self._factors)

    def random_point(self, rng, size=None):
        return np.concatenate([f.random_point(rng, size) for f in self._factors], axis=-1)

    def check_point(self, x, tol=1e-12):
        x = np.asarray(x)
        if x.shape[-1] != self.ambient_dim:
            return False
        return all(f.check_point(p, tol) for f, p in zip(self._factors, self.split(x)))

    def to_config(self):
        return {"type": "product", "factors": [f.to_config() for f in self._factors]}


def manifold_from_config(cfg: dict) -> Manifold:
    kind = cfg.get("type")
    if kind == "torus":
        return FlatTorus(int(cfg.get("dim", 2)))
    if kind == "sphere":
        return Sphere(int(cfg.get("dim", 2)))
    if kind == "product":
        return ProductManifold([manifold_from_config(f) for f in cfg["factors"]])
    raise ArgumentError(f"unknown manifold type {kind!r}")


# -- point-level API ----------------------------------------------------------


class ManifoldPoint:
    """A single point, stored in canonical coordinates."""

    __slots__ = ("manifold", "coords")

    def __init__(self, manifold: Manifold, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (manifold.ambient_dim,):
            raise ArgumentError(
                f"{manifold.id} points need {manifold.ambient_dim} coordinates, got {coords.shape}"
            )
        self.manifold = manifold
        self.coords = manifold.normalize(coords)
        self.coords.setflags(write=False)

    @property
    def manifold_id(self) -> str:
        return self.manifold.id

    def __repr__(self):
        return f"ManifoldPoint({self.manifold.id}, {np.array2string(self.coords, precision=6)})"


class TangentVector:
    __slots__ = ("base", "components")

    def __init__(self, base: ManifoldPoint, components, tol: float = 1e-10):
        comp = np.asarray(components, dtype=float)
        if comp.shape != base.coords.shape:
            raise ArgumentError("tangent components must match the base coordinates")
        if np.linalg.norm(base.manifold.project(base.coords, comp) - comp) > tol * max(
            1.0, np.linalg.norm(comp)
        ):
            raise ArgumentError("vector is not tangent at its base point")
        self.base = base
        self.components = comp

    def __repr__(self):
        return f"TangentVector(at={self.base!r}, {self.components})"


def _same_point(p: ManifoldPoint, q: ManifoldPoint) -> bool:
    return p.manifold == q.manifold and np.array_equal(p.coords, q.coords)


def metric_eval(p: ManifoldPoint, u: TangentVector, v: TangentVector) -> float:
    """g_p(u, v)."""
    if not (_same_point(p, u.base) and _same_point(p, v.base)):
        raise ArgumentError("tangent vectors must be based at p")
    return float(p.manifold.inner(p.coords, u.components, v.components))


def injectivity_radius_bound(manifold: Manifold) -> float:
    return manifold.injectivity_radius_bound()


def shortest_geodesic(a: ManifoldPoint, b: ManifoldPoint, samples: int) -> List[ManifoldPoint]:
    """Constant-speed sampling of the unique minimizing geodesic from a to b.

    Raises NonUniqueGeodesicError when ``dist(a, b)`` reaches the injectivity bound.
    """
    if a.manifold != b.manifold:
        raise ArgumentError("points live on different manifolds")
    if samples < 2:
        raise ArgumentError("need at least the two endpoints")
    m = a.manifold
    d = float(m.dist(a.coords, b.coords))
    if d >= m.injectivity_radius_bound() - 1e-12:
        raise NonUniqueGeodesicError(
            f"distance {d:.6g} is not below the injectivity bound {m.injectivity_radius_bound():.6g}"
        )
    lam = np.linspace(0.0, 1.0, samples)[1:-1]
    inner = m.geodesic_interp(a.coords[None, :], b.coords[None, :], lam)
    return [a] + [ManifoldPoint(m, c) for c in inner] + [b]
