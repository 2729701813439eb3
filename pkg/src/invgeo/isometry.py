"""Built-in isometries, their homotopy tracks and closed-form fixed-point sets.

Every built-in kind reduces to a closed form that is cached on the instance:

* torus isometries are affine maps ``x -> A x + b (mod 1)`` with ``A`` orthogonal
  and integral;
* sphere isometries are orthogonal matrices ``Q``;
* product isometries carry one closed form per factor.

``power`` and ``compose`` nodes reduce through those closed forms, so applying
``power(I, 2)`` and ``compose(I, I)`` runs the same arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from .errors import ArgumentError, MissingHomotopyError, UnsupportedError
from .manifold import (
    FlatTorus,
    Manifold,
    ManifoldPoint,
    ProductManifold,
    Sphere,
    TangentVector,
    manifold_from_config,
)

__all__ = [
    "Isometry",
    "FixedPointSet",
    "apply_isometry",
    "differential",
    "fixed_point_set",
    "evaluate_homotopy",
    "isometry_from_config",
]

_ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _rotation_matrix(axis, angle: float, dim: int) -> np.ndarray:
    if dim == 2:
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s], [s, c]])
    if dim == 3:
        k = np.asarray(axis, dtype=float)
        k = k / np.linalg.norm(k)
        kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * (kx @ kx)
    raise ArgumentError("sphere rotations are built in for S^1 and S^2 only")


# closed forms: ("affine", A, b) | ("orth", Q) | ("product", [forms])


def _identity_form(m: Manifold):
    if isinstance(m, FlatTorus):
        return ("affine", np.eye(m.n), np.zeros(m.n))
    if isinstance(m, Sphere):
        return ("orth", np.eye(m.n + 1))
    return ("product", [_identity_form(f) for f in m.factors])


def _compose_forms(f, g):
    """Closed form of f after g."""
    if f[0] != g[0]:
        raise UnsupportedError("cannot compose isometries of different structure")
    if f[0] == "affine":
        return ("affine", f[1] @ g[1], f[1] @ g[2] + f[2])
    if f[0] == "orth":
        return ("orth", f[1] @ g[1])
    if len(f[1]) != len(g[1]):
        raise UnsupportedError("product isometries with different factor counts")
    return ("product", [_compose_forms(a, b) for a, b in zip(f[1], g[1])])


def _invert_form(f):
    if f[0] == "affine":
        ainv = np.round(f[1].T)  # integral orthogonal matrix
        return ("affine", ainv, -ainv @ f[2])
    if f[0] == "orth":
        return ("orth", f[1].T)
    return ("product", [_invert_form(a) for a in f[1]])


def _power_form(f, k: int, m: Manifold):
    if k < 0:
        return _power_form(_invert_form(f), -k, m)
    out = _identity_form(m)
    for _ in range(k):
        out = _compose_forms(f, out)
    return out


class Isometry:
    """An isometry of a built-in manifold, described by a kind tree.

    Use the constructors (``Isometry.identity``, ``Isometry.sphere_rotation``, ...)
    rather than ``__init__``.
    """

    KINDS = (
        "identity",
        "torus_translation",
        "torus_rotation90",
        "sphere_rotation",
        "sphere_reflection",
        "product",
        "power",
        "compose",
    )

    def __init__(self, manifold: Manifold, kind: str, params: Optional[dict] = None, children=()):
        if kind not in self.KINDS:
            raise ArgumentError(f"unknown isometry kind {kind!r}")
        self.manifold = manifold
        self.kind = kind
        self.params = dict(params or {})
        self.children = tuple(children)
        self._form  # validate eagerly

    # -- constructors ---------------------------------------------------------
    @classmethod
    def identity(cls, manifold: Manifold) -> "Isometry":
        return cls(manifold, "identity")

    @classmethod
    def torus_translation(cls, manifold: Manifold, vector) -> "Isometry":
        if not isinstance(manifold, FlatTorus):
            raise ArgumentError("torus_translation needs a flat torus")
        v = np.asarray(vector, dtype=float)
        if v.shape != (manifold.n,):
            raise ArgumentError("translation vector has the wrong length")
        return cls(manifold, "torus_translation", {"vector": v.tolist()})

    @classmethod
    def torus_rotation90(cls, manifold: Manifold) -> "Isometry":
        if not (isinstance(manifold, FlatTorus) and manifold.n == 2):
            raise ArgumentError("torus_rotation90 needs the 2-torus")
        return cls(manifold, "torus_rotation90")

    @classmethod
    def sphere_rotation(cls, manifold: Manifold, angle: float, axis=(0.0, 0.0, 1.0)) -> "Isometry":
        if not isinstance(manifold, Sphere):
            raise ArgumentError("sphere_rotation needs a sphere")
        params = {"angle": float(angle)}
        if manifold.n == 2:
            params["axis"] = [float(a) for a in axis]
        return cls(manifold, "sphere_rotation", params)

    @classmethod
    def sphere_reflection(cls, manifold: Manifold, normal) -> "Isometry":
        if not isinstance(manifold, Sphere):
            raise ArgumentError("sphere_reflection needs a sphere")
        return cls(manifold, "sphere_reflection", {"normal": [float(a) for a in normal]})

    @classmethod
    def product(cls, *factors: "Isometry") -> "Isometry":
        if len(factors) == 1 and not isinstance(factors[0], Isometry):
            factors = tuple(factors[0])
        return cls(ProductManifold([f.manifold for f in factors]), "product", children=factors)

    @classmethod
    def power(cls, base: "Isometry", k: int) -> "Isometry":
        return cls(base.manifold, "power", {"exponent": int(k)}, (base,))

    @classmethod
    def compose(cls, outer: "Isometry", inner: "Isometry") -> "Isometry":
        """``outer`` after ``inner``."""
        if outer.manifold != inner.manifold:
            raise ArgumentError("cannot compose isometries of different manifolds")
        return cls(outer.manifold, "compose", children=(outer, inner))

    # -- closed form ----------------------------------------------------------
    @cached_property
    def _form(self):
        m = self.manifold
        k = self.kind
        if k == "identity":
            return _identity_form(m)
        if k == "torus_translation":
            return ("affine", np.eye(m.n), np.asarray(self.params["vector"], dtype=float))
        if k == "torus_rotation90":
            return ("affine", _ROT90.copy(), np.array([1.0, 0.0]))
        if k == "sphere_rotation":
            return ("orth", _rotation_matrix(self.params.get("axis"), self.params["angle"], m.n + 1))
        if k == "sphere_reflection":
            nrm = np.asarray(self.params["normal"], dtype=float)
            if nrm.shape != (m.n + 1,):
                raise ArgumentError("reflection normal has the wrong length")
            nrm = nrm / np.linalg.norm(nrm)
            return ("orth", np.eye(m.n + 1) - 2.0 * np.outer(nrm, nrm))
        if k == "product":
            return ("product", [c._form for c in self.children])
        if k == "power":
            return _power_form(self.children[0]._form, self.params["exponent"], m)
        return _compose_forms(self.children[0]._form, self.children[1]._form)

    @cached_property
    def jacobian(self) -> np.ndarray:
        """Ambient matrix of the differential (constant for all built-ins)."""

        def mat(f):
            if f[0] == "affine":
                return f[1]
            if f[0] == "orth":
                return f[1]
            blocks = [mat(g) for g in f[1]]
            size = sum(b.shape[0] for b in blocks)
            out = np.zeros((size, size))
            i = 0
            for b in blocks:
                out[i : i + len(b), i : i + len(b)] = b
                i += len(b)
            return out

        return mat(self._form)

    @cached_property
    def is_identity(self) -> bool:
        def ident(f):
            if f[0] == "affine":
                b = f[2]
                return np.allclose(f[1], np.eye(len(b))) and np.allclose(b - np.round(b), 0, atol=1e-14)
            if f[0] == "orth":
                return np.allclose(f[1], np.eye(len(f[1])), atol=1e-14)
            return all(ident(g) for g in f[1])

        return ident(self._form)

    # -- evaluation -----------------------------------------------------------
    def apply(self, x):
        """Image of points ``x`` of shape (..., d), in canonical coordinates."""
        x = np.asarray(x, dtype=float)

        def run(f, m, pts):
            if f[0] == "affine":
                return m.normalize(pts @ f[1].T + f[2])
            if f[0] == "orth":
                return pts @ f[1].T
            parts = m.split(pts)
            return np.concatenate([run(g, fm, p) for g, fm, p in zip(f[1], m.factors, parts)], axis=-1)

        return run(self._form, self.manifold, x)

    __call__ = apply

    def differential(self, x, v):
        return np.asarray(v, dtype=float) @ self.jacobian.T

    def inverse(self) -> "Isometry":
        return Isometry.power(self, -1)

    def __pow__(self, k: int) -> "Isometry":
        return Isometry.power(self, k)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return Isometry.compose(self, other)

    # -- homotopy to the identity ---------------------------------------------
    @property
    def has_homotopy(self) -> bool:
        try:
            self.track(0.5)
        except MissingHomotopyError:
            return False
        return True

    def track(self, t: float) -> "Isometry":
        """The isometry I_t of the built-in homotopy; I_0 = id and I_1 = I."""
        k = self.kind
        m = self.manifold
        if k == "identity":
            return self
        if k == "torus_translation":
            return Isometry.torus_translation(m, t * np.asarray(self.params["vector"]))
        if k == "sphere_rotation":
            return Isometry(m, "sphere_rotation", {**self.params, "angle": t * self.params["angle"]})
        if k == "product":
            return Isometry.product(*[c.track(t) for c in self.children])
        if k == "power":
            return Isometry.power(self.children[0].track(t), self.params["exponent"])
        if k == "compose":
            return Isometry.compose(self.children[0].track(t), self.children[1].track(t))
        raise MissingHomotopyError(f"{k} has no built-in homotopy to the identity")

    def homotopy(self, t: float, x):
        if not 0.0 <= t <= 1.0:
            raise ArgumentError("homotopy parameter must lie in [0, 1]")
        if t == 0.0:
            self.track(0.0)  # raises when there is no track
            return self.manifold.normalize(np.asarray(x, dtype=float))
        if t == 1.0:
            self.track(1.0)
            return self.apply(x)
        return self.track(t).apply(x)

    # -- fixed points ---------------------------------------------------------
    def fixed_point_set(self) -> "FixedPointSet":
        return _fixed_set(self._form, self.manifold)

    # -- serialization --------------------------------------------------------
    def to_config(self) -> dict:
        cfg = {"kind": self.kind, **self.params}
        if self.kind == "product":
            cfg["factors"] = [c.to_config() for c in self.children]
        elif self.kind == "power":
            cfg["base"] = self.children[0].to_config()
        elif self.kind == "compose":
            cfg["outer"] = self.children[0].to_config()
            cfg["inner"] = self.children[1].to_config()
        return cfg

    def __repr__(self):
        return f"Isometry({self.manifold.id}, {self.to_config()})"


def isometry_from_config(cfg: dict, manifold: Manifold) -> Isometry:
    kind = cfg.get("kind")
    if kind == "identity":
        return Isometry.identity(manifold)
    if kind == "torus_translation":
        return Isometry.torus_translation(manifold, cfg["vector"])
    if kind == "torus_rotation90":
        return Isometry.torus_rotation90(manifold)
    if kind == "sphere_rotation":
        return Isometry.sphere_rotation(manifold, cfg["angle"], cfg.get("axis", (0.0, 0.0, 1.0)))
    if kind == "sphere_reflection":
        return Isometry.sphere_reflection(manifold, cfg["normal"])
    if kind == "product":
        if not isinstance(manifold, ProductManifold) or len(manifold.factors) != len(cfg["factors"]):
            raise ArgumentError("product isometry does not match the manifold factors")
        return Isometry.product(
            *[isometry_from_config(c, f) for c, f in zip(cfg["factors"], manifold.factors)]
        )
    if kind == "power":
        return Isometry.power(isometry_from_config(cfg["base"], manifold), cfg["exponent"])
    if kind == "compose":
        return Isometry.compose(
            isometry_from_config(cfg["outer"], manifold), isometry_from_config(cfg["inner"], manifold)
        )
    raise ArgumentError(f"unknown isometry kind {kind!r}")


# -- fixed-point sets -----------------------------------------------------------


@dataclass
class FixedPointSet:
    """Exact description of ``{p : I(p) = p}``.

    ``kind`` is one of ``whole_manifold``, ``empty``, ``finite_points``,
    ``great_circle`` (S^2 only, ``axis`` is its normal), ``great_subsphere``
    (``basis`` rows span it) or ``product_of`` (``parts``).
    """

    manifold: Manifold
    kind: str
    points: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None
    axis: Optional[np.ndarray] = None
    parts: List["FixedPointSet"] = field(default_factory=list)

    @property
    def description(self) -> dict:
        if self.kind == "finite_points":
            return {"kind": self.kind, "points": self.points.tolist()}
        if self.kind == "great_circle":
            return {"kind": self.kind, "axis": self.axis.tolist()}
        if self.kind == "great_subsphere":
            return {"kind": self.kind, "basis": self.basis.tolist()}
        if self.kind == "product_of":
            return {"kind": self.kind, "parts": [p.description for p in self.parts]}
        return {"kind": self.kind}

    def distance(self, x) -> np.ndarray:
        """Distance from each point of ``x`` to the set (inf for the empty set)."""
        x = np.asarray(x, dtype=float)
        m = self.manifold
        if self.kind == "whole_manifold":
            return np.zeros(x.shape[:-1])
        if self.kind == "empty":
            return np.full(x.shape[:-1], np.inf)
        if self.kind == "finite_points":
            d = m.dist(x[..., None, :], self.points)
            return d.min(axis=-1)
        if self.kind in ("great_circle", "great_subsphere"):
            par = x @ self.basis.T @ self.basis
            perp = x - par
            return np.arctan2(np.linalg.norm(perp, axis=-1), np.linalg.norm(par, axis=-1))
        parts = m.split(x)
        return np.sqrt(sum(p.distance(xi) ** 2 for p, xi in zip(self.parts, parts)))

    def contains(self, x, tol: float = 1e-8) -> np.ndarray:
        return self.distance(x) < tol

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"


def _fixed_set(form, m: Manifold) -> FixedPointSet:
    if form[0] == "affine":
        a, b = form[1], form[2]
        n = len(b)
        mat = a - np.eye(n)
        if np.allclose(mat, 0):
            if np.allclose(b - np.round(b), 0, atol=1e-12):
                return FixedPointSet(m, "whole_manifold")
            return FixedPointSet(m, "empty")
        det = np.linalg.det(mat)
        if abs(det) < 0.5:
            raise UnsupportedError("torus isometry with a positive-dimensional fixed set")
        # x = mat^{-1}(z - b) for integer z in the image box of the unit cube
        corners = np.array(list(itertools.product([0.0, 1.0], repeat=n))) @ mat.T + b
        lo = np.floor(corners.min(axis=0)).astype(int)
        hi = np.ceil(corners.max(axis=0)).astype(int)
        inv = np.linalg.inv(mat)
        found = {}
        for z in itertools.product(*[range(l, h + 1) for l, h in zip(lo, hi)]):
            x = m.normalize(inv @ (np.asarray(z, dtype=float) - b))
            x = np.where(np.abs(x - np.round(x)) < 1e-12, np.round(x) % 1.0, x)
            found.setdefault(tuple(np.round(x, 9)), x)
        pts = np.array([found[k] for k in sorted(found)])
        return FixedPointSet(m, "finite_points", points=pts)
    if form[0] == "orth":
        q = form[1]
        _, s, vh = np.linalg.svd(q - np.eye(len(q)))
        basis = vh[s < 1e-10]
        k = len(basis)
        if k == 0:
            return FixedPointSet(m, "empty")
        if k == len(q):
            return FixedPointSet(m, "whole_manifold")
        if k == 1:
            v = basis[0] / np.linalg.norm(basis[0])
            return FixedPointSet(m, "finite_points", points=np.array([v, -v]))
        if k == 2 and len(q) == 3:
            return FixedPointSet(m, "great_circle", basis=basis, axis=np.cross(basis[0], basis[1]))
        return FixedPointSet(m, "great_subsphere", basis=basis)
    parts = [_fixed_set(f, fm) for f, fm in zip(form[1], m.factors)]
    if any(p.is_empty for p in parts):
        return FixedPointSet(m, "empty")
    if all(p.kind == "whole_manifold" for p in parts):
        return FixedPointSet(m, "whole_manifold")
    return FixedPointSet(m, "product_of", parts=parts)


# -- point-level API ----------------------------------------------------------


def _check_manifold(iso: Isometry, p: ManifoldPoint):
    if iso.manifold != p.manifold:
        raise ArgumentError(f"isometry acts on {iso.manifold.id}, point lives on {p.manifold.id}")


def apply_isometry(iso: Isometry, p: ManifoldPoint) -> ManifoldPoint:
    _check_manifold(iso, p)
    return ManifoldPoint(p.manifold, iso.apply(p.coords))


def differential(iso: Isometry, u: TangentVector) -> TangentVector:
    _check_manifold(iso, u.base)
    base = apply_isometry(iso, u.base)
    return TangentVector(base, iso.differential(u.base.coords, u.components))


def fixed_point_set(iso: Isometry) -> FixedPointSet:
    return iso.fixed_point_set()


def evaluate_homotopy(iso: Isometry, t: float, p: ManifoldPoint) -> ManifoldPoint:
    _check_manifold(iso, p)
    return ManifoldPoint(p.manifold, iso.homotopy(t, p.coords))
