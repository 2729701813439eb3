import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invgeo import (
    ArgumentError,
    FlatTorus,
    Isometry,
    ManifoldPoint,
    MissingHomotopyError,
    ProductManifold,
    Sphere,
    TangentVector,
    UnsupportedError,
    apply_isometry,
    differential,
    evaluate_homotopy,
    fixed_point_set,
    isometry_from_config,
)

T2 = FlatTorus(2)
S2 = Sphere(2)
S1 = Sphere(1)


def test_rotation90_example():
    rot = Isometry.torus_rotation90(T2)
    out = apply_isometry(rot, T2.point([0.2, 0.1]))
    assert np.allclose(out.coords, [0.9, 0.2], atol=1e-15)


def test_sphere_quarter_rotation():
    rot = Isometry.sphere_rotation(S2, np.pi / 2)
    out = apply_isometry(rot, S2.point([1, 0, 0]))
    assert np.allclose(out.coords, [0, 1, 0], atol=1e-15)


def test_identity_fixes_points():
    p = S2.point([0.6, 0.0, 0.8])
    assert np.array_equal(apply_isometry(Isometry.identity(S2), p).coords, p.coords)


def test_manifold_mismatch():
    with pytest.raises(ArgumentError):
        apply_isometry(Isometry.identity(S2), T2.point([0.1, 0.1]))


def test_differential_rotates_tangent():
    rot = Isometry.sphere_rotation(S2, np.pi / 2)
    p = S2.point([1, 0, 0])
    u = differential(rot, TangentVector(p, [0, 1, 0]))
    assert np.allclose(u.base.coords, [0, 1, 0])
    assert np.allclose(u.components, [-1, 0, 0])


def _grid_fixed_points(iso, n=120):
    # brute force: all grid points moved by less than the grid resolution, then clustered
    g = (np.arange(n) + 0.0) / n
    pts = np.array(list(itertools.product(g, g)))
    moved = T2.dist(iso.apply(pts), pts)
    hits = pts[moved < 1e-9]
    return {tuple(np.round(h, 9)) for h in hits}


def test_rotation90_fixed_points_match_grid_search():
    rot = Isometry.torus_rotation90(T2)
    fset = fixed_point_set(rot)
    assert fset.kind == "finite_points"
    found = {tuple(np.round(p, 9)) for p in fset.points}
    assert found == _grid_fixed_points(rot)
    assert (0.5, 0.5) in found


def test_half_turn_fixed_points_match_grid_search():
    half = Isometry.power(Isometry.torus_rotation90(T2), 2)
    found = {tuple(np.round(p, 9)) for p in fixed_point_set(half).points}
    assert found == {(a, b) for a in (0.0, 0.5) for b in (0.0, 0.5)}
    assert found == _grid_fixed_points(half)


def test_sphere_rotation_fixes_axis():
    axis = np.array([1.0, 2.0, 2.0]) / 3
    fset = fixed_point_set(Isometry.sphere_rotation(S2, 0.7, axis))
    assert fset.kind == "finite_points"
    pts = sorted(map(tuple, np.round(fset.points, 12)))
    assert np.allclose(pts, sorted(map(tuple, np.round([axis, -axis], 12))))


def test_fixed_sets_of_special_kinds():
    assert fixed_point_set(Isometry.identity(S2)).kind == "whole_manifold"
    assert fixed_point_set(Isometry.torus_translation(T2, [0.3, 0.0])).is_empty
    assert fixed_point_set(Isometry.sphere_reflection(S2, [0, 0, 1])).kind == "great_circle"
    full_turn = Isometry.sphere_rotation(S2, 2 * np.pi)
    assert fixed_point_set(full_turn).kind == "whole_manifold"


def test_structural_mismatch_is_unsupported():
    prod = Isometry.product(Isometry.identity(T2), Isometry.identity(S2))
    other = Isometry.product(Isometry.identity(T2), Isometry.identity(S2), Isometry.identity(S1))
    with pytest.raises((UnsupportedError, ArgumentError)):
        Isometry.compose(prod, other)


def test_homotopy_examples():
    theta = 1.3
    rot = Isometry.sphere_rotation(S2, theta)
    p = S2.point([1, 0, 0])
    half = evaluate_homotopy(rot, 0.5, p)
    assert np.allclose(half.coords, [np.cos(theta / 2), np.sin(theta / 2), 0], atol=1e-15)
    assert np.array_equal(evaluate_homotopy(rot, 0.0, p).coords, p.coords)
    assert np.allclose(evaluate_homotopy(rot, 1.0, p).coords, apply_isometry(rot, p).coords, atol=0)

    tr = Isometry.torus_translation(T2, [0.3, 0.9])
    q = T2.point([0.8, 0.4])
    for t in (0.0, 0.25, 0.7, 1.0):
        expect = (np.array([0.8, 0.4]) + t * np.array([0.3, 0.9])) % 1.0
        assert np.allclose(evaluate_homotopy(tr, t, q).coords, expect, atol=1e-15)


def test_rotation90_has_no_homotopy():
    rot = Isometry.torus_rotation90(T2)
    assert not rot.has_homotopy
    with pytest.raises(MissingHomotopyError):
        evaluate_homotopy(rot, 0.5, T2.point([0.1, 0.1]))


def test_compose_homotopy_is_pointwise_composition():
    a = Isometry.sphere_rotation(S2, 0.4, [0, 0, 1])
    b = Isometry.sphere_rotation(S2, 0.9, [1, 0, 0])
    c = Isometry.compose(a, b)
    x = np.array([0.0, 0.6, 0.8])
    t = 0.3
    assert np.allclose(c.homotopy(t, x), a.track(t).apply(b.track(t).apply(x)))


def test_config_roundtrip():
    prod = Isometry.product(Isometry.sphere_rotation(S1, 0.3), Isometry.sphere_rotation(S2, 1.0))
    again = isometry_from_config(prod.to_config(), prod.manifold)
    x = prod.manifold.random_point(np.random.default_rng(1))
    assert np.allclose(again.apply(x), prod.apply(x))


def _isometries():
    return [
        Isometry.torus_rotation90(T2),
        Isometry.torus_translation(T2, [0.37, 0.81]),
        Isometry.sphere_rotation(S2, 1.0, [0.3, -0.4, 0.866]),
        Isometry.sphere_reflection(S2, [1, 1, 0]),
        Isometry.power(Isometry.torus_rotation90(T2), 3),
        Isometry.product(Isometry.sphere_rotation(S1, 0.3), Isometry.sphere_rotation(S2, 1.0)),
    ]


ISOS = _isometries()


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), which=st.sampled_from(range(len(ISOS))))
def test_isometries_preserve_metric_and_distance(seed, which):
    iso = ISOS[which]
    m = iso.manifold
    rng = np.random.default_rng(seed)
    x = m.random_point(rng)
    y = m.exp(x, 0.3 * m.random_tangent(rng, x))
    u, v = m.random_tangent(rng, x), m.random_tangent(rng, x)
    ix = iso.apply(x)
    lhs = m.inner(ix, iso.differential(x, u), iso.differential(x, v))
    assert abs(lhs - m.inner(x, u, v)) < 1e-10
    assert abs(m.dist(ix, iso.apply(y)) - m.dist(x, y)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(which=st.sampled_from(range(len(ISOS))))
def test_fixed_point_members_are_fixed(which):
    iso = ISOS[which]
    fset = iso.fixed_point_set()
    if fset.kind == "finite_points":
        for p in fset.points:
            assert iso.manifold.dist(iso.apply(p), p) < 1e-10
    elif fset.kind == "great_circle":
        a, b = fset.basis
        for phi in np.linspace(0, 2 * np.pi, 7):
            p = np.cos(phi) * a + np.sin(phi) * b
            assert iso.manifold.dist(iso.apply(p), p) < 1e-10
