import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invgeo import (
    ArgumentError,
    FlatTorus,
    LoopPath,
    PreconditionError,
    ResolutionError,
    Sphere,
    bangert_path,
    bangert_path_continuous,
    connecting_homotopy,
    verify_estimate,
)
from invgeo.bangert import block_segments, default_delta
from invgeo.families import LOOP_FAMILIES, _circle, _rot_x, _rot_z, loop_family

S2 = Sphere(2)


def _row_as_period(gamma, s, t):
    return gamma.evaluate(np.full_like(t, s), t)


def _out_times(res):
    g = res.result
    return np.arange(g.N) * (g.p / g.N)


def test_endpoint_identities():
    gamma = loop_family("torus_wiggle")
    res = bangert_path(gamma, 4)
    t = _out_times(res)
    m = res.result.manifold
    assert np.max(m.dist(res.result.grid[0], _row_as_period(gamma, 0.0, t))) < 1e-12
    assert np.max(m.dist(res.result.grid[-1], _row_as_period(gamma, 1.0, t))) < 1e-12
    # the last row is the m-fold iterate: it repeats with period p
    last = res.result.grid[-1]
    per = gamma.N * 4
    assert np.max(m.dist(last[:per], last[per: 2 * per])) < 1e-12


def test_output_shape_and_period():
    gamma = loop_family("sphere_tilt", S=5, N=16)
    res = bangert_path(gamma, 3)
    assert res.result.grid.shape == (3 * 4 + 1, 4 * 3 * 16, 3)
    assert res.result.p == 3 * gamma.p
    assert len(res.energy_profile) == res.result.S


def test_constant_family_excess_constant():
    gamma = loop_family("torus_constant_line")
    assert np.allclose(gamma.row_energies(), 1.0, atol=1e-12)
    rep = verify_estimate(gamma, [2, 4, 8])
    assert all(e >= 0 for e in rep.excess)
    c = np.array(rep.scaled_excess)
    assert np.max(np.abs(c - c[0])) < 1e-9 * c[0]
    assert rep.excess[-1] < rep.excess[0]


def test_estimate_on_bump_family():
    gamma = loop_family("torus_bump")
    e = gamma.row_energies()
    assert e[0] == pytest.approx(1.0) and e[-1] == pytest.approx(1.0) and e.max() <= 2.0
    rep = verify_estimate(gamma, [2, 4, 8, 16])
    assert rep.passed and rep.bounded and rep.decreasing
    assert all(a > b for a, b in zip(rep.excess, rep.excess[1:]))


def test_verify_estimate_needs_m():
    with pytest.raises(ArgumentError):
        verify_estimate(loop_family("torus_bump"), [])
    with pytest.raises(ArgumentError):
        bangert_path(loop_family("torus_bump"), 1)


def test_block_pieces_tile_the_period():
    for m in (2, 3, 5):
        for b in range(m):
            for s in (0.0, 0.3, 1.0):
                segs = block_segments(m, 1.5, b, s)
                assert segs[0].t0 == 0.0 and segs[-1].t1 == pytest.approx(m * 1.5)
                for left, right in zip(segs, segs[1:]):
                    assert left.t1 == pytest.approx(right.t0, abs=1e-12)


def _curved_family(S=33, N=32, wobble=0.3):
    fn = lambda s, t: _rot_z(_rot_x(_circle(t + wobble * np.sin(np.pi * s), 1.0), 0.6 * s), 0.4 * s)  # noqa: E731
    return LoopPath.from_function(S2, 1.0, fn, S, N)


def test_continuous_variant_converges_quadratically():
    gamma = _curved_family()
    smooth = bangert_path(gamma, 2).result.grid
    errs = []
    for delta in (1 / 16, 1 / 32, 1 / 64):
        cont = bangert_path_continuous(gamma, 2, delta)
        assert cont.max_junction < 1e-9
        errs.append(float(np.max(S2.dist(smooth, cont.result.grid))))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


@pytest.mark.parametrize("name", sorted(LOOP_FAMILIES))
def test_continuous_variant_close_at_default_resolution(name):
    gamma = loop_family(name)
    smooth = bangert_path(gamma, 2).result.grid
    cont = bangert_path_continuous(gamma, 2, gamma.p / 64)
    assert np.max(gamma.manifold.dist(smooth, cont.result.grid)) < 1e-3


def test_continuous_variant_of_constant_family_is_exact():
    gamma = loop_family("torus_constant_line")
    a = bangert_path(gamma, 3).result.grid
    b = bangert_path_continuous(gamma, 3).result.grid
    assert np.max(gamma.manifold.dist(a, b)) < 1e-15


def test_delta_precondition():
    gamma = loop_family("torus_slide")
    assert 0 < default_delta(gamma) <= gamma.p / 64
    with pytest.raises(PreconditionError) as err:
        bangert_path_continuous(gamma, 2, delta=gamma.p / 4)
    assert "delta" in str(err.value)


def test_connecting_homotopy():
    gamma = loop_family("sphere_wobble", S=5, N=16)
    m = 2
    res = bangert_path(gamma, m)
    t = _out_times(res)
    start = connecting_homotopy(gamma, m, 0.0)
    for i, s in enumerate(start.s_values):
        assert np.max(S2.dist(start.grid[i], _row_as_period(gamma, s, t))) < 1e-12
    end = connecting_homotopy(gamma, m, 1.0)
    assert np.max(S2.dist(end.grid, res.result.grid)) < 1e-12
    for r in (0.0, 0.3, 0.7, 1.0):
        h = connecting_homotopy(gamma, m, r)
        assert np.max(S2.dist(h.grid[0], start.grid[0])) < 1e-12
        assert np.max(S2.dist(h.grid[-1], start.grid[-1])) < 1e-12
    with pytest.raises(ArgumentError):
        connecting_homotopy(gamma, m, 1.5)


def test_under_resolved_input():
    fn = lambda s, t: np.stack([3 * t, 0 * t], -1)  # noqa: E731
    gamma = LoopPath.from_function(FlatTorus(2), 1.0, fn, 3, 4)
    with pytest.raises(ResolutionError):
        bangert_path(gamma, 2)


def test_serialization(tmp_path):
    gamma = loop_family("torus_period2", S=3, N=8)
    again = LoopPath.from_dict(gamma.to_dict())
    assert np.array_equal(again.grid, gamma.grid) and again.p == 2.0
    gamma.write_csv(tmp_path / "grid.csv")
    rows = list(csv.reader(open(tmp_path / "grid.csv")))
    assert len(rows) == 3 and len(rows[0]) == 8
    res = bangert_path(gamma, 2)
    res.write_profile_csv(tmp_path / "profile.csv")
    prof = list(csv.reader(open(tmp_path / "profile.csv")))
    assert prof[0] == ["s", "energy"] and len(prof) == res.result.S + 1
    assert res.to_dict()["m"] == 2


@settings(max_examples=20, deadline=None)
@given(name=st.sampled_from(sorted(LOOP_FAMILIES)), m=st.integers(2, 6))
def test_seams_and_endpoints(name, m):
    gamma = loop_family(name, S=5, N=16)
    res = bangert_path(gamma, m)
    assert res.max_junction < 1e-9
    t = _out_times(res)
    mf = gamma.manifold
    assert np.max(mf.dist(res.result.grid[0], _row_as_period(gamma, 0.0, t))) < 1e-12
    assert np.max(mf.dist(res.result.grid[-1], _row_as_period(gamma, 1.0, t))) < 1e-12
