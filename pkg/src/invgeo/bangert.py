"""Bangert's homotopy for paths of periodic loops.

Given a path s -> Gamma(s) of p-periodic loops, :func:`bangert_path` builds the
path Gamma_<m> of mp-periodic loops that first drags a single copy of Gamma(s)
through m - 1 copies of Gamma(0), then trades those copies for Gamma(1) one at
a time.  Its energy exceeds the endpoint energies by O(1/(mp)), which
:func:`verify_estimate` measures.

Every row of the output is assembled from "loop" pieces, which replay a row of
Gamma with an affine change of time, and "star" pieces, which run along the
s-direction at the base point t = 0.  The continuous variant replaces star
pieces by broken geodesics with nodes every ``delta`` in time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ArgumentError, PreconditionError, ResolutionError
from .manifold import Manifold, manifold_from_config

__all__ = [
    "LoopPath",
    "BangertResult",
    "EstimateReport",
    "bangert_path",
    "bangert_path_continuous",
    "connecting_homotopy",
    "verify_estimate",
    "default_delta",
    "segments",
]

_SNAP = 1e-12


@dataclass(frozen=True, eq=False)
class LoopPath:
    """S x N grid: row i is the p-periodic loop Gamma(s_i) sampled at t = j p / N."""

    manifold: Manifold
    p: float
    grid: np.ndarray
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        if g.ndim != 3 or g.shape[2] != self.manifold.ambient_dim:
            raise ArgumentError("grid must have shape (S, N, d)")
        if g.shape[0] < 2 or g.shape[1] < 4:
            raise ArgumentError("need at least 2 rows and 4 columns")
        if not self.p > 0:
            raise ArgumentError("period must be positive")
        a, b = self.domain
        if not b > a:
            raise ArgumentError("domain must be a proper interval")
        g = self.manifold.normalize(g)
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "domain", (float(a), float(b)))

    @classmethod
    def from_function(cls, manifold: Manifold, p: float, fn: Callable, S: int, N: int) -> "LoopPath":
        """Sample ``fn(s, t)`` (vectorized, s in [0, 1]) on an S x N grid."""
        s = np.linspace(0.0, 1.0, S)[:, None]
        t = (np.arange(N) * (p / N))[None, :]
        return cls(manifold, p, fn(s + 0 * t, t + 0 * s))

    @property
    def S(self) -> int:
        return self.grid.shape[0]

    @property
    def N(self) -> int:
        return self.grid.shape[1]

    @property
    def s_values(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.S)

    def check_resolution(self, fraction: float = 1.0 / 3.0):
        m = self.manifold
        bound = m.injectivity_radius_bound() * fraction
        along = m.dist(self.grid, np.roll(self.grid, -1, axis=1))
        if np.max(along) >= bound:
            raise ResolutionError(f"rows under-resolved in t: step {np.max(along):.3g} >= {bound:.3g}")

    def row_energies(self) -> np.ndarray:
        """E^p of every row (broken-geodesic energy, free-loop closure)."""
        d = self.manifold.dist(self.grid, np.roll(self.grid, -1, axis=1))
        return self.N / self.p**2 * np.sum(d**2, axis=1)

    def evaluate(self, sigma, t) -> np.ndarray:
        """Gamma(sigma)(t) by geodesic interpolation, first in t, then in s."""
        m = self.manifold
        sigma, t = np.broadcast_arrays(np.asarray(sigma, dtype=float), np.asarray(t, dtype=float))
        shape = sigma.shape
        sigma = np.clip(sigma.ravel(), 0.0, 1.0)
        t = t.ravel()
        pos = np.mod(t, self.p) / (self.p / self.N)
        near = np.round(pos)
        pos = np.where(np.abs(pos - near) < _SNAP * self.N, near, pos)
        pos = np.mod(pos, self.N)
        k0 = np.floor(pos).astype(int) % self.N
        ft = pos - np.floor(pos)
        u = sigma * (self.S - 1)
        near = np.round(u)
        u = np.where(np.abs(u - near) < _SNAP * self.S, near, u)
        i0 = np.minimum(np.floor(u).astype(int), self.S - 2)
        fs = u - i0

        def along_t(i):
            a = self.grid[i, k0]
            b = self.grid[i, (k0 + 1) % self.N]
            moved = m.geodesic_interp(a, b, ft)
            return np.where((ft == 0.0)[:, None], a, moved)

        lo, hi = along_t(i0), along_t(i0 + 1)
        out = m.geodesic_interp(lo, hi, fs)
        out = np.where((fs == 0.0)[:, None], lo, np.where((fs == 1.0)[:, None], hi, out))
        return out.reshape(shape + (m.ambient_dim,))

    def restricted(self, r: float) -> Callable:
        """Evaluator of Gamma_r(u) = Gamma(r u)."""
        return lambda sigma, t: self.evaluate(r * np.asarray(sigma, dtype=float), t)

    def lipschitz_s(self) -> float:
        d = self.manifold.dist(self.grid[1:], self.grid[:-1])
        return float(np.max(d)) * (self.S - 1)

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold.to_config(),
            "p": self.p,
            "domain": list(self.domain),
            "grid": self.grid.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LoopPath":
        return cls(manifold_from_config(data["manifold"]), data["p"], np.asarray(data["grid"]), tuple(data["domain"]))

    def write_csv(self, path: str) -> None:
        """One CSV row per s, one cell per t, coordinates joined by ';'."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row in self.grid:
                w.writerow([";".join(repr(float(c)) for c in pt) for pt in row])


# -- the piecewise formulas ----------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """t in [t0, t1]; loop: Gamma(sigma)(a t + c); star: Gamma(alpha + beta t)(0)."""

    kind: str
    t0: float
    t1: float
    sigma: float = 0.0
    a: float = 1.0
    c: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0


def block_segments(m: int, p: float, block: int, s: float) -> List[Segment]:
    """Pieces of Gamma_<m>((block + s) / m) over one period [0, mp]."""
    if m < 2:
        raise ArgumentError("m must be at least 2")
    if not 0 <= block < m:
        raise ArgumentError("block out of range")
    L, S = "loop", "star"
    q = 4.0 / p
    if block == 0:
        return [
            Segment(L, 0.0, (1 - s / 2) * p, sigma=s, a=2 / (2 - s)),
            Segment(S, (1 - s / 2) * p, (1 - s / 4) * p, alpha=4 - s, beta=-q),
            Segment(L, (1 - s / 4) * p, (m - s / 4) * p, sigma=0.0, c=s * p / 4),
            Segment(S, (m - s / 4) * p, m * p, alpha=s - 4 * m, beta=q),
        ]
    if block < m - 1:
        k = block
        return [
            Segment(L, 0.0, p / 2, sigma=1.0, a=2.0),
            Segment(L, p / 2, (k - 0.5) * p, sigma=1.0, c=-p / 2),
            Segment(S, (k - 0.5) * p, (k - (1 + s) / 4) * p, alpha=4 * k - 1, beta=-q),
            Segment(L, (k - (1 + s) / 4) * p, (k + (3 - s) / 4) * p, sigma=s, c=(1 + s) * p / 4),
            Segment(S, (k + (3 - s) / 4) * p, (k + 0.75) * p, alpha=4 * k + 3, beta=-q),
            Segment(L, (k + 0.75) * p, (m - 0.25) * p, sigma=0.0, c=p / 4),
            Segment(S, (m - 0.25) * p, m * p, alpha=1 - 4 * m, beta=q),
        ]
    return [
        Segment(L, 0.0, (1 + s) * p / 2, sigma=1.0, a=2 / (1 + s)),
        Segment(L, (1 + s) * p / 2, (m + (s - 3) / 2) * p, sigma=1.0, c=(1 - s) * p / 2),
        Segment(S, (m + (s - 3) / 2) * p, (m + (s - 5) / 4) * p, alpha=2 * s + 4 * m - 5, beta=-q),
        Segment(L, (m + (s - 5) / 4) * p, (m + (s - 1) / 4) * p, sigma=s, c=(1 - s) * p / 4),
        Segment(S, (m + (s - 1) / 4) * p, m * p, alpha=1 - 4 * m, beta=q),
    ]


def _block_of(m: int, s_prime: float):
    u = s_prime * m
    near = round(u)
    if abs(u - near) < 1e-12:
        u = float(near)
    b = min(int(np.floor(u)), m - 1)
    return b, min(max(u - b, 0.0), 1.0)


def segments(m: int, p: float, s_prime: float) -> List[Segment]:
    """The pieces of Gamma_<m>(s_prime) over one period [0, mp]."""
    return block_segments(m, p, *_block_of(m, s_prime))


def _eval_segment(gamma: Callable, manifold: Manifold, seg: Segment, t: np.ndarray, delta: Optional[float]):
    if seg.kind == "loop":
        return gamma(np.full_like(t, seg.sigma), seg.a * t + seg.c)
    if delta is None:
        return gamma(seg.alpha + seg.beta * t, np.zeros_like(t))
    # broken geodesic through the star curve, nodes every delta, constant speed on each piece
    length = seg.t1 - seg.t0
    count = max(int(np.ceil(length / delta - 1e-12)), 1)
    nodes = np.minimum(seg.t0 + delta * np.arange(count + 1), seg.t1)
    vals = gamma(seg.alpha + seg.beta * nodes, np.zeros_like(nodes))
    k = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, count - 1)
    span = nodes[k + 1] - nodes[k]
    lam = np.where(span > 0, (t - nodes[k]) / np.where(span > 0, span, 1.0), 0.0)
    lam = np.clip(lam, 0.0, 1.0)
    out = manifold.geodesic_interp(vals[k], vals[k + 1], lam)
    out = np.where((lam == 1.0)[:, None], vals[k + 1], out)
    return np.where((lam == 0.0)[:, None], vals[k], out)


def _eval_row(gamma, manifold, segs: List[Segment], t: np.ndarray, delta) -> np.ndarray:
    out = np.empty((len(t), manifold.ambient_dim))
    done = np.zeros(len(t), dtype=bool)
    for i, seg in enumerate(segs):
        last = i == len(segs) - 1
        if seg.t1 <= seg.t0 and not last:
            continue
        mask = (t >= seg.t0) & ((t <= seg.t1) if last else (t < seg.t1)) & ~done
        if np.any(mask):
            out[mask] = _eval_segment(gamma, manifold, seg, t[mask], delta)
            done |= mask
    return manifold.normalize(out)


def _row_seams(gamma, manifold, segs: List[Segment], period: float, delta) -> float:
    """Largest jump between consecutive pieces of one row, including the wrap at t = mp."""
    live = [g for g in segs if g.t1 > g.t0]
    worst = 0.0
    for left, right in zip(live[:-1], live[1:]):
        tb = np.array([right.t0])
        a = _eval_segment(gamma, manifold, left, tb, delta)
        b = _eval_segment(gamma, manifold, right, tb, delta)
        worst = max(worst, float(manifold.dist(a, b)[0]))
    end = _eval_segment(gamma, manifold, live[-1], np.array([period]), delta)
    start = _eval_segment(gamma, manifold, live[0], np.array([0.0]), delta)
    return max(worst, float(manifold.dist(end, start)[0]))


def _block_seams(gamma, manifold, m, p, t, delta) -> float:
    """Jumps in s' at k/m, comparing block k-1 at s = 1 with block k at s = 0."""
    worst = 0.0
    for b in range(1, m):
        left = block_segments(m, p, b - 1, 1.0)
        right = block_segments(m, p, b, 0.0)
        probe = np.unique(np.concatenate([t, [g.t0 for g in left + right], [g.t1 for g in left + right]]))
        a = _eval_row(gamma, manifold, left, probe, delta)
        c = _eval_row(gamma, manifold, right, probe, delta)
        worst = max(worst, float(np.max(manifold.dist(a, c))))
    return worst


# -- public operations ------------------------------------------------------------------


@dataclass
class BangertResult:
    m: int
    result: LoopPath
    junction_report: dict
    energy_profile: np.ndarray
    s_values: np.ndarray = field(repr=False, default=None)
    delta: Optional[float] = None

    @property
    def max_junction(self) -> float:
        return max(self.junction_report.values())

    def write_profile_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "energy"])
            for s, e in zip(self.s_values, self.energy_profile):
                w.writerow([repr(float(s)), repr(float(e))])

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "delta": self.delta,
            "junction_report": self.junction_report,
            "s": self.s_values.tolist(),
            "energy_profile": self.energy_profile.tolist(),
            "result": self.result.to_dict(),
        }


def _build(gamma: Callable, manifold: Manifold, p: float, N: int, S: int, m: int, delta, s_values=None):
    m = int(m)
    if m < 2:
        raise ArgumentError("m must be at least 2")
    n_out = 4 * m * N
    t = np.arange(n_out) * (m * p / n_out)
    s_values = np.linspace(0.0, 1.0, m * (S - 1) + 1) if s_values is None else np.asarray(s_values, dtype=float)
    rows = []
    row_seam = 0.0
    for sp in s_values:
        segs = segments(m, p, sp)
        rows.append(_eval_row(gamma, manifold, segs, t, delta))
        row_seam = max(row_seam, _row_seams(gamma, manifold, segs, m * p, delta))
    grid = np.stack(rows)
    out = LoopPath(manifold, m * p, grid)
    out.check_resolution()
    report = {"t_seams": row_seam, "s_seams": _block_seams(gamma, manifold, m, p, t, delta)}
    return BangertResult(m, out, report, out.row_energies(), s_values, delta)


def bangert_path(gamma: LoopPath, m: int) -> BangertResult:
    """Gamma_<m> on the output grid of m (S - 1) + 1 rows and 4 m N columns."""
    gamma.check_resolution()
    return _build(gamma.evaluate, gamma.manifold, gamma.p, gamma.N, gamma.S, m, None)


def default_delta(gamma: LoopPath) -> float:
    lip = gamma.lipschitz_s()
    inj = gamma.manifold.injectivity_radius_bound()
    cap = gamma.p / 64
    return cap if lip == 0 else min(cap, inj * gamma.p / (8 * lip))


def check_delta(gamma: LoopPath, delta: float) -> None:
    """Scan row pairs with |r0 - r1| <= 4 delta / p for distances reaching the injectivity bound."""
    reach = 4 * delta / gamma.p
    inj = gamma.manifold.injectivity_radius_bound()
    s = gamma.s_values
    step = s[1] - s[0]
    # rows of the grid plus their midpoints bound the continuum from below well enough at this resolution
    span = int(np.floor(reach / step + 1e-12))
    for off in range(1, span + 1):
        d = gamma.manifold.dist(gamma.grid[off:], gamma.grid[:-off])
        i, j = np.unravel_index(int(np.argmax(d)), d.shape)
        if d[i, j] >= inj:
            raise PreconditionError(
                f"delta={delta:.4g} too large: d(Gamma({s[i + off]:.4g})(t), Gamma({s[i]:.4g})(t)) = "
                f"{d[i, j]:.4g} >= {inj:.4g} at t={j * gamma.p / gamma.N:.4g}"
            )
    if span == 0 or reach > s[-1] - s[0]:
        probe = np.linspace(0.0, 1.0, 2 * gamma.S - 1)
        t = np.arange(gamma.N) * (gamma.p / gamma.N)
        for r0 in probe:
            r1 = np.clip(r0 + reach, 0.0, 1.0)
            d = gamma.manifold.dist(gamma.evaluate(np.full_like(t, r0), t), gamma.evaluate(np.full_like(t, r1), t))
            j = int(np.argmax(d))
            if d[j] >= inj:
                raise PreconditionError(
                    f"delta={delta:.4g} too large: d(Gamma({r1:.4g})(t), Gamma({r0:.4g})(t)) = "
                    f"{d[j]:.4g} >= {inj:.4g} at t={t[j]:.4g}"
                )


def bangert_path_continuous(gamma: LoopPath, m: int, delta: Optional[float] = None) -> BangertResult:
    """Variant for merely continuous Gamma: star pieces become broken geodesics with time step delta."""
    delta = default_delta(gamma) if delta is None else float(delta)
    if not delta > 0:
        raise ArgumentError("delta must be positive")
    check_delta(gamma, delta)
    gamma.check_resolution()
    return _build(gamma.evaluate, gamma.manifold, gamma.p, gamma.N, gamma.S, m, delta)


def connecting_homotopy(gamma: LoopPath, m: int, r: float) -> LoopPath:
    """h_Gamma(r, .): Gamma(s) for s >= r and (Gamma restricted to [0, r])_<m>(s / r) below."""
    if not 0.0 <= r <= 1.0:
        raise ArgumentError("r must lie in [0, 1]")
    m = int(m)
    if m < 2:
        raise ArgumentError("m must be at least 2")
    gamma.check_resolution()
    p, N = gamma.p, gamma.N
    n_out = 4 * m * N
    t = np.arange(n_out) * (m * p / n_out)
    s_values = np.linspace(0.0, 1.0, m * (gamma.S - 1) + 1)
    inner = gamma.restricted(r)
    rows = []
    for s in s_values:
        if s >= r:
            rows.append(gamma.evaluate(np.full_like(t, s), t))
        else:
            rows.append(_eval_row(inner, gamma.manifold, segments(m, p, s / r), t, None))
    out = LoopPath(gamma.manifold, m * p, np.stack(rows))
    out.check_resolution()
    return out


@dataclass
class EstimateReport:
    m_values: List[int]
    excess: List[float]
    scaled_excess: List[float]
    max_energy: List[float]
    endpoint_energy: float
    c_hat: float
    passed: bool
    bounded: bool
    decreasing: bool
    max_junction: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verify_estimate(gamma: LoopPath, m_list: Sequence[int], growth_tol: float = 0.05) -> EstimateReport:
    """Measure excess(m) = max_s E^{mp}(Gamma_<m>(s)) - max(E^p(Gamma(0)), E^p(Gamma(1))).

    ``c_hat`` is the largest excess(m) * mp; ``bounded`` asks that the scaled
    excess at the largest m does not exceed the earlier maximum by more than
    ``growth_tol`` (relative).
    """
    ms = [int(m) for m in m_list]
    if not ms:
        raise ArgumentError("m_list is empty")
    e_rows = gamma.row_energies()
    e_end = float(max(e_rows[0], e_rows[-1]))
    excess, scaled, peaks, junction = [], [], [], 0.0
    for m in ms:
        res = bangert_path(gamma, m)
        peak = float(np.max(res.energy_profile))
        peaks.append(peak)
        excess.append(peak - e_end)
        scaled.append((peak - e_end) * m * gamma.p)
        junction = max(junction, res.max_junction)
    c_hat = max(scaled)
    passed = all(ex <= c_hat / (m * gamma.p) * (1 + 1e-9) + 1e-15 for ex, m in zip(excess, ms))
    order = np.argsort(ms)
    sc = [scaled[i] for i in order]
    if len(sc) > 1:
        ref = max(abs(v) for v in sc[:-1])
        bounded = sc[-1] <= max(sc[:-1]) + growth_tol * max(ref, 1e-12)
    else:
        bounded = True
    decreasing = excess[order[-1]] < excess[order[0]] if len(ms) > 1 else False
    return EstimateReport(ms, excess, scaled, peaks, e_end, c_hat, passed, bool(bounded), bool(decreasing), junction)
