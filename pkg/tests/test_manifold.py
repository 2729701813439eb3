import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from invgeo import (
    ArgumentError,
    FlatTorus,
    ManifoldPoint,
    NonUniqueGeodesicError,
    ProductManifold,
    Sphere,
    TangentVector,
    injectivity_radius_bound,
    manifold_from_config,
    metric_eval,
    shortest_geodesic,
)


def test_metric_eval_torus_orthogonal():
    t2 = FlatTorus(2)
    p = ManifoldPoint(t2, [0.3, 0.7])
    assert metric_eval(p, TangentVector(p, [1, 0]), TangentVector(p, [0, 1])) == 0.0


def test_metric_eval_sphere_unit_tangent():
    s2 = Sphere(2)
    p = ManifoldPoint(s2, [1, 0, 0])
    u = TangentVector(p, [0, 1, 0])
    assert metric_eval(p, u, u) == 1.0


def test_metric_eval_product_sums_factors():
    m = ProductManifold([FlatTorus(2), Sphere(2)])
    p = ManifoldPoint(m, [0.1, 0.2, 0, 0, 1])
    u = TangentVector(p, [1.0, 2.0, 0.5, -1.0, 0.0])
    v = TangentVector(p, [3.0, -1.0, 2.0, 2.0, 0.0])
    assert metric_eval(p, u, v) == pytest.approx((3 - 2) + (1 - 2))


def test_metric_eval_rejects_foreign_base():
    s2 = Sphere(2)
    p = ManifoldPoint(s2, [1, 0, 0])
    q = ManifoldPoint(s2, [0, 1, 0])
    with pytest.raises(ArgumentError):
        metric_eval(p, TangentVector(q, [1, 0, 0]), TangentVector(q, [1, 0, 0]))


def test_tangent_vector_must_be_tangent():
    p = ManifoldPoint(Sphere(2), [1, 0, 0])
    with pytest.raises(ArgumentError):
        TangentVector(p, [1, 0, 0])


def _polyline_length(manifold, pts):
    c = np.array([p.coords for p in pts])
    return float(np.sum(manifold.dist(c[:-1], c[1:])))


def test_shortest_geodesic_torus_segment():
    t2 = FlatTorus(2)
    pts = shortest_geodesic(t2.point([0, 0]), t2.point([0.4, 0]), 9)
    c = np.array([p.coords for p in pts])
    assert np.allclose(c[:, 1], 0)
    assert np.allclose(c[:, 0], np.linspace(0, 0.4, 9))
    assert _polyline_length(t2, pts) == pytest.approx(0.4, abs=1e-14)


def test_shortest_geodesic_sphere_quarter_circle_against_ode():
    s2 = Sphere(2)
    a, b = s2.point([1, 0, 0]), s2.point([0, 1, 0])
    pts = shortest_geodesic(a, b, 33)
    length = _polyline_length(s2, pts)
    assert length == pytest.approx(np.pi / 2, rel=1e-12)

    # geodesic equation x'' = -|x'|^2 x, unit speed from a towards b
    def rhs(_, y):
        x, v = y[:3], y[3:]
        return np.concatenate([v, -np.dot(v, v) * x])

    sol = solve_ivp(rhs, (0, length), [1, 0, 0, 0, 1, 0], rtol=1e-12, atol=1e-12)
    assert np.allclose(sol.y[:3, -1], b.coords, atol=1e-9)
    mid = solve_ivp(rhs, (0, length / 2), [1, 0, 0, 0, 1, 0], rtol=1e-12, atol=1e-12).y[:3, -1]
    assert np.allclose(mid, pts[16].coords, atol=1e-9)


def test_shortest_geodesic_torus_antipodal_is_ambiguous():
    t2 = FlatTorus(2)
    with pytest.raises(NonUniqueGeodesicError):
        shortest_geodesic(t2.point([0, 0]), t2.point([0.5, 0.5]), 5)


def test_shortest_geodesic_endpoints_exact():
    s2 = Sphere(2)
    a = s2.point([0.6, 0.0, 0.8])
    b = s2.point([0.0, -0.6, 0.8])
    pts = shortest_geodesic(a, b, 17)
    assert np.array_equal(pts[0].coords, a.coords)
    assert np.array_equal(pts[-1].coords, b.coords)


def test_injectivity_bounds():
    assert injectivity_radius_bound(FlatTorus(2)) == 0.5
    assert injectivity_radius_bound(Sphere(2)) == pytest.approx(np.pi)
    assert injectivity_radius_bound(ProductManifold([FlatTorus(2), Sphere(2)])) == 0.5


def test_torus_bound_has_two_minimizers():
    # the bound is sharp: (0.5, 0) is reached from the origin in both directions
    t2 = FlatTorus(2)
    a = np.zeros(2)
    b = np.array([0.5, 0.0])
    forward = t2.normalize(a + np.array([0.5, 0.0]))
    backward = t2.normalize(a - np.array([0.5, 0.0]))
    assert np.allclose(forward, b) and np.allclose(backward, b)
    assert t2.dist(a, b) == pytest.approx(0.5)


def test_sphere_bound_is_antipodal_distance():
    s2 = Sphere(2)
    assert s2.dist(np.array([0, 0, 1.0]), np.array([0, 0, -1.0])) == pytest.approx(np.pi)


def test_manifold_from_config_roundtrip():
    m = ProductManifold([FlatTorus(1), Sphere(2)])
    again = manifold_from_config(m.to_config())
    assert again == m
    with pytest.raises(ArgumentError):
        manifold_from_config({"kind": "klein_bottle"})


MANIFOLDS = [FlatTorus(2), Sphere(2), ProductManifold([FlatTorus(1), Sphere(2)])]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), which=st.sampled_from(range(len(MANIFOLDS))),
       n=st.integers(3, 20))
def test_shortest_geodesic_is_equidistant(seed, which, n):
    m = MANIFOLDS[which]
    rng = np.random.default_rng(seed)
    a = m.random_point(rng)
    v = m.random_tangent(rng, a)
    v *= 0.9 * m.injectivity_radius_bound() * rng.uniform(0.05, 1) / max(np.linalg.norm(v), 1e-12)
    b = m.exp(a, v)
    pts = shortest_geodesic(m.point(a), m.point(b), n)
    c = np.array([p.coords for p in pts])
    gaps = m.dist(c[:-1], c[1:])
    assert np.max(np.abs(gaps - gaps.mean())) <= 1e-9 * max(gaps.mean(), 1e-300)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_product_energy_is_pythagorean(seed):
    rng = np.random.default_rng(seed)
    t2, s2 = FlatTorus(2), Sphere(2)
    m = ProductManifold([t2, s2])
    n = 12
    a = np.concatenate([t2.random_point(rng), s2.random_point(rng)])
    steps = [a]
    for _ in range(n):
        v = m.random_tangent(rng, steps[-1]) * 0.05
        steps.append(m.exp(steps[-1], v))
    c = np.array(steps)
    total = np.sum(m.dist(c[:-1], c[1:]) ** 2)
    parts = m.split(c)
    by_factor = sum(np.sum(f.dist(x[:-1], x[1:]) ** 2) for f, x in zip(m.factors, parts))
    assert total == pytest.approx(by_factor, rel=1e-9)
