"""Multistart search for invariant geodesics and bookkeeping of the results.

Descent follows the H^1 gradient of the discrete energy with an Armijo
backtracking line search and switches to Newton steps once the gradient is
small.  Converged paths become :class:`GeodesicRecord` objects, which can be
grouped into geometric families with :func:`dedup_orbits`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np
import scipy.optimize
from scipy.spatial import cKDTree

from .errors import ArgumentError, ResolutionError
from .isometry import Isometry
from .manifold import FlatTorus, Manifold, ProductManifold, Sphere
from .pathspace import (
    DiscretePath,
    IndexReport,
    differential_l2,
    energy,
    gradient,
    gradient_norm,
    hessian_matrices,
    hessian_report,
)
from .homotopy_maps import ProductSceneConfig, circle_loop, iota, sigma_m, winding_markers

log = logging.getLogger(__name__)

__all__ = [
    "SearchConfig",
    "SearchOutcome",
    "GeodesicRecord",
    "Family",
    "find_critical",
    "run_batch",
    "recheck",
    "detect_period",
    "image_distance",
    "dedup_orbits",
    "seed_library",
    "write_jsonl",
    "read_jsonl",
    "write_summary_csv",
]


@dataclass(frozen=True)
class SearchConfig:
    max_iterations: int = 3000
    gradient_tolerance: float = 1e-8
    step_rule: str = "backtracking"
    armijo_c: float = 1e-4
    rho: float = 0.5
    initial_step: float = 0.5
    energy_cap: float = 1e4
    seed: int = 0
    newton: bool = True
    newton_threshold: float = 1e-3
    zero_energy: float = 1e-6
    speed_tolerance: float = 1e-6

    def __post_init__(self):
        if self.gradient_tolerance <= 0 or self.speed_tolerance <= 0 or self.zero_energy <= 0:
            raise ArgumentError("tolerances must be positive")
        if self.energy_cap <= 0:
            raise ArgumentError("energy_cap must be positive")
        if self.step_rule not in ("fixed", "backtracking"):
            raise ArgumentError("step_rule must be 'fixed' or 'backtracking'")
        if not (0 < self.armijo_c < 1 and 0 < self.rho < 1 and self.initial_step > 0):
            raise ArgumentError("invalid line-search parameters")
        if self.max_iterations < 1:
            raise ArgumentError("max_iterations must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class GeodesicRecord:
    path: DiscretePath
    energy: float
    gradient_norm: float
    index_report: IndexReport
    basic_period: Optional[float] = None
    winding: Optional[list] = None
    image_fingerprint: str = ""
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "gradient_norm": self.gradient_norm,
            "index_report": self.index_report.to_dict(),
            "basic_period": self.basic_period,
            "winding": self.winding,
            "image_fingerprint": self.image_fingerprint,
            "label": self.label,
            "path": self.path.to_dict(),
        }


@dataclass
class SearchOutcome:
    """Result of one descent run; ``record`` is None unless ``status == 'converged'``."""

    status: str  # converged | stalled | diverged | budget | failed
    record: Optional[GeodesicRecord]
    diagnostic: str
    iterations: int
    final_energy: float
    final_path: Optional[DiscretePath] = field(default=None, repr=False)
    energies: List[float] = field(default_factory=list, repr=False)
    step_kinds: List[str] = field(default_factory=list, repr=False)


# -- descent ----------------------------------------------------------------------


def _max_edge_ok(path: DiscretePath) -> bool:
    return float(np.max(path.edge_lengths())) < path.manifold.injectivity_radius_bound() / 3.0


def _move(path: DiscretePath, field_: np.ndarray, step: float) -> Optional[DiscretePath]:
    cand = path.with_samples(path.manifold.exp(path.samples, step * field_))
    return cand if _max_edge_ok(cand) else None


def _newton_step(path: DiscretePath) -> Optional[DiscretePath]:
    hmat, _, frames = hessian_matrices(path)
    e = differential_l2(path)
    g = np.einsum("kdn,kd->kn", frames, e).ravel()
    v, *_ = np.linalg.lstsq(hmat, -g, rcond=1e-10)
    x = np.einsum("kdn,kn->kd", frames, v.reshape(len(frames), -1))
    return _move(path, x, 1.0)


def speed_spread(path: DiscretePath) -> float:
    sp = path.speeds()
    mean = float(np.mean(sp))
    return 0.0 if mean == 0 else float((np.max(sp) - np.min(sp)) / mean)


def find_critical(seed_path: DiscretePath, cfg: SearchConfig = SearchConfig()) -> SearchOutcome:
    """Descend from ``seed_path`` to a critical point of the energy.

    Never raises for numerical trouble: exceeding ``energy_cap`` reports
    ``diverged``, running out of iterations reports ``budget``, and landing on a
    constant path at a fixed point (energy below ``zero_energy``) reports
    ``stalled``.
    """
    path = seed_path
    if not _max_edge_ok(path):
        return SearchOutcome("failed", None, "seed under-resolved: refine N", 0, float("nan"), path)
    e_cur = energy(path)
    energies = [e_cur]
    kinds = ["seed"]
    if e_cur > cfg.energy_cap:
        return SearchOutcome("diverged", None, f"seed energy {e_cur:.4g} above cap", 0, e_cur, path, energies, kinds)
    alpha0 = cfg.initial_step * path.shift
    status, diag, it = "budget", f"no convergence in {cfg.max_iterations} iterations", 0
    for it in range(1, cfg.max_iterations + 1):
        z = gradient(path)
        g2 = max(float(differential_l2(path).ravel() @ z.ravel()), 0.0)
        gn = math.sqrt(g2)
        if gn < cfg.gradient_tolerance:
            status, diag = "converged", f"gradient norm {gn:.3e}"
            break
        if cfg.newton and gn < cfg.newton_threshold and e_cur > cfg.zero_energy:
            cand = _newton_step(path)
            if cand is not None:
                gn_new = gradient_norm(cand)
                e_new = energy(cand)
                if gn_new < 0.5 * gn and e_new <= cfg.energy_cap:
                    path, e_cur = cand, e_new
                    energies.append(e_cur)
                    kinds.append("newton")
                    continue
        if cfg.step_rule == "fixed":
            cand = _move(path, -z, alpha0)
            if cand is None:
                status, diag = "failed", "fixed step left the resolution bound"
                break
            e_new = energy(cand)
        else:
            alpha = alpha0
            cand = None
            while alpha > 1e-16 * alpha0:
                trial = _move(path, -z, alpha)
                if trial is not None:
                    e_new = energy(trial)
                    if e_new <= e_cur - cfg.armijo_c * alpha * g2:
                        cand = trial
                        break
                alpha *= cfg.rho
            if cand is None:
                status, diag = "failed", f"line search failed at gradient norm {gn:.3e}"
                break
        if e_new > cfg.energy_cap:
            status, diag = "diverged", f"energy {e_new:.4g} exceeded cap {cfg.energy_cap:.4g}"
            path, e_cur = cand, e_new
            energies.append(e_cur)
            kinds.append("descent")
            break
        path, e_cur = cand, e_new
        energies.append(e_cur)
        kinds.append("descent")
    if status == "converged" and e_cur <= cfg.zero_energy:
        status = "stalled"
        where = np.round(path.samples[0], 6).tolist()
        diag = f"stalled at a constant path near {where} (E={e_cur:.2e})"
    elif status in ("failed", "budget") and e_cur <= cfg.zero_energy:
        status = "stalled"
        diag = f"stalled near a fixed point (E={e_cur:.2e}); {diag}"
    if status != "converged":
        return SearchOutcome(status, None, diag, it, e_cur, path, energies, kinds)
    spread = speed_spread(path)
    if spread > cfg.speed_tolerance:
        return SearchOutcome("failed", None, f"speed not constant (spread {spread:.2e})", it, e_cur, path, energies, kinds)
    record = make_record(path, cfg)
    return SearchOutcome("converged", record, diag, it, e_cur, path, energies, kinds)


def make_record(path: DiscretePath, cfg: SearchConfig = SearchConfig()) -> GeodesicRecord:
    rep = hessian_report(path, critical_tol=cfg.gradient_tolerance)
    rec = GeodesicRecord(
        path=path,
        energy=rep.energy,
        gradient_norm=rep.gradient_norm,
        index_report=rep,
        winding=winding_markers(path),
        image_fingerprint=image_fingerprint(path),
    )
    rec.basic_period = detect_period(rec)
    return rec


def recheck(record: GeodesicRecord, cfg: SearchConfig = SearchConfig()) -> bool:
    """Independent re-evaluation of criticality and constant speed."""
    path = record.path
    return gradient_norm(path) < cfg.gradient_tolerance and speed_spread(path) <= cfg.speed_tolerance


def _run_one(args):
    seed, cfg = args
    return find_critical(seed, cfg)


def run_batch(seeds: Sequence[DiscretePath], cfg: SearchConfig = SearchConfig(), threads: int = 1) -> List[SearchOutcome]:
    """find_critical over many seeds, optionally across worker processes; order is preserved."""
    if threads <= 1 or len(seeds) < 2:
        return [find_critical(s, cfg) for s in seeds]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_one, [(s, cfg) for s in seeds], chunksize=max(1, len(seeds) // (4 * threads))))


def threads_from_env(default: int = 1) -> int:
    raw = os.environ.get("INVGEO_THREADS")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ArgumentError(f"INVGEO_THREADS must be an integer, got {raw!r}")
    return max(1, min(n, os.cpu_count() or 1))


# -- periods --------------------------------------------------------------------


def _period_defect(path: DiscretePath, p: float) -> float:
    t = path.times
    return float(np.max(path.manifold.dist(path.evaluate(t + p), path.samples)))


def _sharpen(path: DiscretePath, p: float, defect: float, speed: float) -> float:
    # the defect is V-shaped with slope ~speed near a period; intersect both legs
    delta = max(10 * defect / max(speed, 1e-300), 1e-9)
    a, b = p - delta, p + delta
    da, db = _period_defect(path, a), _period_defect(path, b)
    if da + db <= 0:
        return p
    cand = (a * db + b * da) / (da + db)
    return cand if _period_defect(path, cand) < defect else p


def detect_period(record, max_multiplier: int = 16, tol: float = 1e-6) -> Optional[float]:
    """Smallest p <= shift * max_multiplier with sup_t d(z(t + p), z(t)) < tol, else None."""
    path = record.path if isinstance(record, GeodesicRecord) else record
    h = path.step
    count = max_multiplier * path.N
    grid = np.arange(1, count + 1) * h
    ext = path.extended(count + path.N)
    windows = np.lib.stride_tricks.sliding_window_view(ext[1:], path.N, axis=0)  # (count, d, N)
    base = np.broadcast_to(path.samples.T, windows.shape)
    defects = np.max(path.manifold.dist(np.swapaxes(windows, 1, 2), np.swapaxes(base, 1, 2)), axis=1)
    speed = float(np.mean(path.speeds()))
    coarse = max(2.0 * speed * h, 10 * tol)
    below = np.flatnonzero(defects < coarse)
    if len(below) == 0:
        return None
    groups = np.split(below, np.flatnonzero(np.diff(below) > 1) + 1)
    for grp in groups:
        j = grp[np.argmin(defects[grp])]
        if defects[j] < 1e-3 * tol:
            return float(grid[j])
        res = scipy.optimize.minimize_scalar(
            lambda p: _period_defect(path, p),
            bounds=(max(grid[j] - h, 0.5 * h), grid[j] + h),
            method="bounded",
            options={"xatol": 1e-14},
        )
        if res.fun < tol:
            if res.fun >= defects[j]:
                return float(grid[j])
            return _sharpen(path, float(res.x), float(res.fun), speed)
    return None


# -- images and families ----------------------------------------------------------


def _embed(manifold: Manifold, x: np.ndarray) -> np.ndarray:
    """Euclidean embedding used only for nearest-neighbour lookups."""
    factors = manifold.factors
    parts = manifold.split(x) if isinstance(manifold, ProductManifold) else [x]
    out = []
    for f, p in zip(factors, parts):
        if isinstance(f, FlatTorus):
            ang = 2 * np.pi * p
            out.extend([np.cos(ang) / (2 * np.pi), np.sin(ang) / (2 * np.pi)])
        else:
            out.append(p)
    return np.concatenate(out, axis=-1)


def image_cloud(path: DiscretePath, shifts_before: int = 0, shifts_after: int = 1, densify: int = 1) -> np.ndarray:
    """Samples of the extended curve over [-before, after) shifts, optionally densified."""
    start = -shifts_before * path.N
    count = (shifts_before + shifts_after) * path.N
    if densify <= 1:
        return path.extended(count, start=start)
    t = (start + np.arange(count * densify) / densify) * path.step
    return path.evaluate(t)


def image_fingerprint(path: DiscretePath, decimals: int = 6) -> str:
    pts = np.round(path.samples, decimals) + 0.0
    pts = pts[np.lexsort(pts.T[::-1])]
    return hashlib.sha1(pts.tobytes()).hexdigest()[:16]


class _Image:
    def __init__(self, path: DiscretePath, window: int, densify: int):
        self.path = path
        self.own = path.samples
        self.cloud = image_cloud(path, window, window + 1, densify)
        self.tree = cKDTree(_embed(path.manifold, self.cloud))

    def distance_from(self, pts: np.ndarray) -> float:
        m = self.path.manifold
        _, idx = self.tree.query(_embed(m, pts))
        best = m.dist(pts, self.cloud[idx])
        y = self.cloud[idx]
        u = m.log(y, pts)
        for nb in (np.clip(idx - 1, 0, len(self.cloud) - 1), np.clip(idx + 1, 0, len(self.cloud) - 1)):
            w = m.log(y, self.cloud[nb])
            ww = np.sum(w * w, axis=-1)
            lam = np.where(ww > 0, np.clip(np.sum(u * w, axis=-1) / np.where(ww > 0, ww, 1), 0, 1), 0)
            best = np.minimum(best, np.linalg.norm(u - lam[:, None] * w, axis=-1))
        return float(np.max(best))


def image_distance(a: DiscretePath, b: DiscretePath, window: int = 8, densify: int = 8) -> float:
    """Symmetric distance between the images of two invariant curves.

    Each curve's samples over one shift are measured against the other curve's
    densified polyline over ``window`` shifts on either side.
    """
    if a.manifold != b.manifold:
        return float("inf")
    ia, ib = _Image(a, window, densify), _Image(b, window, densify)
    return max(ib.distance_from(a.samples), ia.distance_from(b.samples))


@dataclass
class Family:
    family_id: int
    members: List[GeodesicRecord]

    @property
    def representative(self) -> GeodesicRecord:
        return self.members[0]

    @property
    def energies(self) -> List[float]:
        return [r.energy for r in self.members]


def _sort_key(rec: GeodesicRecord):
    return (round(rec.energy, 9), rec.image_fingerprint)


def dedup_orbits(records: Iterable[GeodesicRecord], tol: float = 1e-4, window: int = 8, densify: int = 8) -> List[Family]:
    """Partition records into geometric-geodesic families by image distance.

    Records are sorted by energy and fingerprint first, so the partition does not
    depend on the order in which results arrived.  Members are labeled
    ``w<winding>`` when winding data exists, otherwise by energy rank.
    """
    recs = sorted(records, key=_sort_key)
    families: List[Family] = []
    images: List[_Image] = []
    for rec in recs:
        mine = _Image(rec.path, window, densify)
        for fam, img in zip(families, images):
            if fam.representative.path.manifold != rec.path.manifold:
                continue
            d = max(img.distance_from(rec.path.samples), mine.distance_from(fam.representative.path.samples))
            if d < tol:
                fam.members.append(rec)
                break
        else:
            families.append(Family(len(families), [rec]))
            images.append(mine)
    for fam in families:
        for j, rec in enumerate(fam.members):
            rec.label = f"w{rec.winding}" if rec.winding is not None else f"#{j}"
    return families


# -- seeds ----------------------------------------------------------------------


def _closing_curve(manifold: Manifold, iso: Isometry, x0: np.ndarray, t: np.ndarray, lattice=None) -> np.ndarray:
    """A curve from x0 at t=0 to I(x0) at t=1, sampled at t."""
    x1 = iso.apply(x0[None, :])[0]
    if iso.has_homotopy:
        base = np.stack([iso.homotopy(float(s), x0) if s < 1 else x1 for s in t])
        if lattice is not None:
            base = manifold.normalize(base + np.outer(t, lattice))
        return base
    d = manifold.log(x0[None, :], x1[None, :])[0]
    if lattice is not None:
        d = d + lattice
    if float(np.linalg.norm(d)) >= manifold.injectivity_radius_bound() and lattice is None:
        raise ResolutionError("no minimizing geodesic to close the seed")
    return manifold.exp(np.repeat(x0[None, :], len(t), axis=0), np.outer(t, d))


def _bump_field(manifold: Manifold, rng, x: np.ndarray, t: np.ndarray, amplitude: float, modes: int = 3):
    coef = rng.standard_normal((modes, x.shape[1])) * amplitude
    raw = sum(np.outer(np.sin(np.pi * (j + 1) * t), coef[j]) for j in range(modes))
    return manifold.project(x, raw)


def seed_library(manifold: Manifold, isometry: Isometry, strategy: str, N: int = 64, **kw) -> List[DiscretePath]:
    """Deterministic seed paths for a search.

    Strategies:
      ``torus_classes``   straight lattice-class lines (optionally wiggled), ``bound`` limits |a|, |b|
      ``random``          ``n`` random closed-up curves with random lattice classes, ``seed`` fixes the RNG
      ``equator``         equatorial curves for rotations about z, ``windings`` lists the classes
      ``product_windings``  iota(Sigma_m(q)) for a circle factor, ``windings`` and ``q`` given
      ``helix``           (m, k) helices on S1 x S2 with in-plane wiggles, ``classes`` given
    """
    rng = np.random.default_rng(kw.get("seed", 0))
    t = np.arange(N) / N
    amp = kw.get("amplitude", 0.0)
    shift = kw.get("shift", 1.0)
    seeds: List[DiscretePath] = []
    if strategy == "torus_classes":
        if not isinstance(manifold, FlatTorus):
            raise ArgumentError("torus_classes needs a flat torus")
        bound = int(kw.get("bound", 2))
        ranges = [range(-bound, bound + 1)] * manifold.n
        x0 = np.asarray(kw.get("base", np.zeros(manifold.n)), dtype=float)
        for cls in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(manifold.n, -1).T:
            x = _closing_curve(manifold, isometry, x0, t, lattice=cls.astype(float))
            if amp:
                x = manifold.exp(x, _bump_field(manifold, rng, x, t, amp))
            seeds.append(DiscretePath(manifold, isometry, shift, x))
        return seeds
    if strategy == "random":
        n = int(kw.get("n", 200))
        bound = int(kw.get("bound", 2))
        amp = kw.get("amplitude", 0.1)
        for _ in range(n):
            x0 = manifold.random_point(rng)
            lattice = None
            if isinstance(manifold, FlatTorus):
                lattice = rng.integers(-bound, bound + 1, size=manifold.n).astype(float)
            x = _closing_curve(manifold, isometry, x0, t, lattice)
            x = manifold.exp(x, _bump_field(manifold, rng, x, t, amp))
            seeds.append(DiscretePath(manifold, isometry, shift, x))
        return seeds
    if strategy == "equator":
        if not (isinstance(manifold, Sphere) and manifold.n == 2 and isometry.kind == "sphere_rotation"):
            raise ArgumentError("equator seeds need a rotation of the 2-sphere")
        theta = isometry.params["angle"] * float(np.sign(isometry.params["axis"][2]))
        windings = kw.get("windings", [0])
        per = int(kw.get("per_winding", 1))
        lift = kw.get("lift", 0.0)
        for k in windings:
            for _ in range(per):
                phi = rng.uniform(0, 2 * np.pi) + (theta + 2 * np.pi * k) * t
                phi = phi + amp * np.sin(2 * np.pi * t) * rng.standard_normal()
                z = lift * rng.standard_normal() * np.sin(np.pi * t) if lift else np.zeros_like(t)
                x = np.stack([np.cos(phi), np.sin(phi), z], axis=1)
                seeds.append(DiscretePath(manifold, isometry, shift, manifold.normalize(x)))
        return seeds
    if strategy == "product_windings":
        if not isinstance(manifold, ProductManifold) or len(manifold.factors) != 2:
            raise ArgumentError("product_windings needs M1 x M2")
        m1, m2 = manifold.factors
        q = np.asarray(kw.get("q", _north(m2)), dtype=float)
        cfg = ProductSceneConfig(m1, m2, circle_loop(m1, N // 2), isometry)
        for m in kw.get("windings", range(5)):
            seeds.append(iota(sigma_m(cfg, m, q), isometry) if isometry.has_homotopy else sigma_m(cfg, m, q))
        return seeds
    if strategy == "helix":
        if not isinstance(manifold, ProductManifold) or isometry.kind != "product":
            raise ArgumentError("helix seeds need a product isometry on S1 x S2")
        psi = isometry.children[0].params["angle"]
        phi = isometry.children[1].params["angle"]
        for m, k in kw.get("classes", [(0, 0)]):
            a = rng.uniform(0, 2 * np.pi) + (psi + 2 * np.pi * m) * t + amp * np.sin(2 * np.pi * t)
            b = rng.uniform(0, 2 * np.pi) + (phi + 2 * np.pi * k) * t + amp * np.sin(4 * np.pi * t)
            x = np.stack([np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.zeros_like(b)], axis=1)
            seeds.append(DiscretePath(manifold, isometry, shift, x))
        return seeds
    raise ArgumentError(f"unknown seed strategy {strategy!r}")


def _north(m: Manifold) -> np.ndarray:
    if isinstance(m, Sphere):
        e = np.zeros(m.ambient_dim)
        e[-1] = 1.0
        return e
    return np.zeros(m.ambient_dim)


# -- output -----------------------------------------------------------------------


def write_jsonl(records: Iterable[GeodesicRecord], path: str) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def read_jsonl(path: str, cfg: SearchConfig = SearchConfig(), validate: bool = True) -> List[GeodesicRecord]:
    """Load records, recomputing reports; with ``validate`` every record must pass :func:`recheck`."""
    out = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            rec = make_record(DiscretePath.from_dict(data["path"]), cfg)
            rec.label = data.get("label", "")
            if validate and not recheck(rec, cfg):
                raise ArgumentError(f"record with energy {rec.energy} fails the re-check")
            out.append(rec)
    return out


SUMMARY_COLUMNS = ["family", "label", "energy", "index", "nullity", "period", "winding"]


def write_summary_csv(families: Sequence[Family], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for fam in families:
            for rec in fam.members:
                w.writerow([
                    fam.family_id,
                    rec.label,
                    repr(rec.energy),
                    rec.index_report.index,
                    rec.index_report.nullity,
                    "" if rec.basic_period is None else repr(rec.basic_period),
                    json.dumps(rec.winding),
                ])
