"""Built-in reference curves and loop families used by scenarios and demos."""

from __future__ import annotations

from typing import Callable, Dict, Tuple

import numpy as np

from .bangert import LoopPath
from .errors import ArgumentError
from .isometry import Isometry
from .manifold import FlatTorus, Manifold, Sphere
from .pathspace import DiscretePath


def equator_path(N: int = 64, winding: int = 1, isometry: Isometry = None, phase: float = 0.0) -> DiscretePath:
    """Uniformly sampled equator of the unit 2-sphere, traversed ``winding`` times per shift.

    With a rotation about z as twist, the path covers the twist angle plus
    ``winding`` full turns.
    """
    s2 = Sphere(2)
    iso = Isometry.identity(s2) if isometry is None else isometry
    theta = 0.0 if iso.is_identity else iso.params["angle"] * float(np.sign(iso.params["axis"][2]))
    phi = phase + (theta + 2 * np.pi * winding) * np.arange(N) / N
    return DiscretePath(s2, iso, 1.0, np.stack([np.cos(phi), np.sin(phi), np.zeros(N)], axis=1))


def torus_line(N: int = 64, cls=(1, 0), base=(0.0, 0.0)) -> DiscretePath:
    t2 = FlatTorus(2)
    t = np.arange(N) / N
    x = np.asarray(base, dtype=float) + np.outer(t, np.asarray(cls, dtype=float))
    return DiscretePath(t2, Isometry.identity(t2), 1.0, x)


REFERENCE_CURVES = {"equator": equator_path, "torus_line": torus_line}


# -- loop families Gamma(s)(t) --------------------------------------------------------------


def _sphere_pts(x, y, z):
    v = np.stack([x, y, z], axis=-1)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _rot_x(v, a):
    c, s = np.cos(a), np.sin(a)
    return np.stack([v[..., 0], c * v[..., 1] - s * v[..., 2], s * v[..., 1] + c * v[..., 2]], axis=-1)


def _rot_z(v, a):
    c, s = np.cos(a), np.sin(a)
    return np.stack([c * v[..., 0] - s * v[..., 1], s * v[..., 0] + c * v[..., 1], v[..., 2]], axis=-1)


def _circle(t, p):
    a = 2 * np.pi * t / p
    return _sphere_pts(np.cos(a), np.sin(a), 0 * a)


_TORUS = FlatTorus(2)
_SPHERE = Sphere(2)

# name -> (manifold, p, fn(s, t))
LOOP_FAMILIES: Dict[str, Tuple[Manifold, float, Callable]] = {
    "torus_constant_line": (_TORUS, 1.0, lambda s, t: np.stack([t, 0 * t], -1)),
    "torus_bump": (_TORUS, 1.0, lambda s, t: np.stack([t, 0.2 * np.sin(np.pi * s) * np.sin(2 * np.pi * t)], -1)),
    "torus_wiggle": (
        _TORUS,
        1.0,
        lambda s, t: np.stack(
            [t + 0.1 * np.sin(np.pi * s) * np.sin(2 * np.pi * t), 0.3 * s + 0.05 * s * (1 - s) * np.sin(4 * np.pi * t)],
            -1,
        ),
    ),
    "torus_slide": (_TORUS, 1.0, lambda s, t: np.stack([t + 0.25 * s, 0.5 * s + 0 * t], -1)),
    "torus_period2": (
        _TORUS,
        2.0,
        lambda s, t: np.stack([t / 2 + 0.1 * s, 0.15 * np.sin(np.pi * s) * np.sin(np.pi * t) + 0.2 * s], -1),
    ),
    "sphere_tilt": (_SPHERE, 1.0, lambda s, t: _rot_x(_circle(t, 1.0), 0.6 * s)),
    "sphere_spin_tilt": (_SPHERE, 1.0, lambda s, t: _rot_z(_rot_x(_circle(t, 1.0), 0.5 * s), 0.8 * s)),
    "sphere_latitude": (
        _SPHERE,
        1.0,
        lambda s, t: _sphere_pts(
            np.cos(2 * np.pi * t) * np.sqrt(1 - (0.5 * s) ** 2),
            np.sin(2 * np.pi * t) * np.sqrt(1 - (0.5 * s) ** 2),
            0.5 * s + 0 * t,
        ),
    ),
    "sphere_wobble": (
        _SPHERE,
        1.0,
        lambda s, t: _sphere_pts(
            np.cos(2 * np.pi * t), np.sin(2 * np.pi * t), 0.3 * np.sin(np.pi * s) * np.sin(4 * np.pi * t) + 0.2 * s
        ),
    ),
    "sphere_shift_phase": (
        _SPHERE,
        1.0,
        lambda s, t: _rot_x(_rot_z(_circle(t, 1.0), 1.2 * s), 0.3 * np.sin(np.pi * s)),
    ),
}


def loop_family(name: str, S: int = 9, N: int = 32) -> LoopPath:
    try:
        manifold, p, fn = LOOP_FAMILIES[name]
    except KeyError:
        raise ArgumentError(f"unknown loop family {name!r}; known: {sorted(LOOP_FAMILIES)}")
    return LoopPath.from_function(manifold, p, fn, S, N)
