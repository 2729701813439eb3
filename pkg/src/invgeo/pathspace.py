"""Discrete twisted path spaces and the energy functional.

A :class:`DiscretePath` stores N samples ``x_k = z(k tau / N)`` of a curve with
``I(z(t)) = z(t + tau)``.  Consecutive samples are joined by minimizing
geodesics, so the discrete energy

    E^tau = (1 / tau) * sum_k d(x_k, x_{k+1})**2 * (N / tau),   x_N = I(x_0)

is exact on broken geodesics.  Tangent fields along a path are ``(N, d)`` arrays
in ambient coordinates; the implied value at ``x_N`` is ``dI . X_0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ArgumentError, ClosureError, NotInSubspaceError, ResolutionError
from .isometry import Isometry, isometry_from_config
from .manifold import Manifold, manifold_from_config

__all__ = [
    "DiscretePath",
    "IndexReport",
    "AverageIndexEstimate",
    "energy",
    "h1_inner",
    "differential_l2",
    "gradient",
    "gradient_norm",
    "hessian_matrices",
    "hessian_report",
    "iterate",
    "rescale",
    "embed_periodic_subspace",
    "restrict_to_fixed_set",
    "average_index",
    "EPS_NULL",
]

EPS_NULL = 1e-6
SPECTRUM_HEAD = 16
MIN_SAMPLES = 8


@dataclass(frozen=True, eq=False)
class DiscretePath:
    manifold: Manifold
    isometry: Isometry
    shift: float
    samples: np.ndarray

    def __post_init__(self):
        if self.isometry.manifold != self.manifold:
            raise ArgumentError("twist acts on a different manifold")
        if not self.shift > 0:
            raise ArgumentError("shift must be positive")
        x = np.array(self.samples, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.manifold.ambient_dim:
            raise ArgumentError(f"samples must have shape (N, {self.manifold.ambient_dim})")
        if len(x) < MIN_SAMPLES:
            raise ArgumentError(f"need at least {MIN_SAMPLES} samples")
        x = self.manifold.normalize(x)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "shift", float(self.shift))

    @property
    def N(self) -> int:
        return len(self.samples)

    @property
    def step(self) -> float:
        return self.shift / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N) * self.step

    def with_samples(self, samples) -> "DiscretePath":
        return DiscretePath(self.manifold, self.isometry, self.shift, samples)

    def next_samples(self) -> np.ndarray:
        """x_{k+1} for k = 0..N-1, with x_N = I(x_0)."""
        return np.concatenate([self.samples[1:], self.isometry.apply(self.samples[:1])])

    def prev_samples(self) -> np.ndarray:
        """x_{k-1} for k = 0..N-1, with x_{-1} = I^{-1}(x_{N-1})."""
        last = self.isometry.inverse().apply(self.samples[-1:])
        return np.concatenate([last, self.samples[:-1]])

    def edge_lengths(self) -> np.ndarray:
        return self.manifold.dist(self.samples, self.next_samples())

    def speeds(self) -> np.ndarray:
        return self.edge_lengths() / self.step

    def extended(self, count: int, start: int = 0) -> np.ndarray:
        """Samples x_j for j = start..start+count-1 via x_{k+jN} = I^j(x_k)."""
        idx = np.arange(start, start + count)
        blocks, rem = np.divmod(idx, self.N)
        out = np.empty((count, self.manifold.ambient_dim))
        for b in np.unique(blocks):
            sel = blocks == b
            pts = self.samples[rem[sel]]
            out[sel] = pts if b == 0 or self.isometry.is_identity else (self.isometry ** int(b)).apply(pts)
        return out

    def evaluate(self, times) -> np.ndarray:
        """z(t) at arbitrary times, by the extension rule and geodesic interpolation."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        blocks = np.floor(t / self.shift).astype(int)
        s = t - blocks * self.shift
        pos = s / self.step
        k0 = np.clip(np.floor(pos).astype(int), 0, self.N - 1)
        frac = pos - k0
        nxt = self.next_samples()
        a = self.samples[k0]
        b = nxt[k0]
        pts = np.where((frac == 0.0)[:, None], a, self.manifold.geodesic_interp(a, b, frac))
        if not self.isometry.is_identity:
            for blk in np.unique(blocks):
                if blk != 0:
                    sel = blocks == blk
                    pts[sel] = (self.isometry ** int(blk)).apply(pts[sel])
        return pts

    def rotate(self, k: int = 1) -> "DiscretePath":
        """Orbit translation by k sample steps: t -> z(t + k tau / N)."""
        return self.with_samples(self.extended(self.N, start=k))

    def to_dict(self) -> dict:
        return {
            "manifold": self.manifold.to_config(),
            "isometry": self.isometry.to_config(),
            "shift": self.shift,
            "samples": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DiscretePath":
        m = manifold_from_config(data["manifold"])
        return cls(m, isometry_from_config(data["isometry"], m), data["shift"], np.asarray(data["samples"]))


def _check_resolution(path: DiscretePath, lengths=None):
    lengths = path.edge_lengths() if lengths is None else lengths
    bound = path.manifold.injectivity_radius_bound()
    worst = float(np.max(lengths))
    if worst >= bound - 1e-12:
        raise ResolutionError(
            f"consecutive samples {worst:.4g} apart, injectivity bound {bound:.4g}; refine N"
        )
    return lengths


def energy(path: DiscretePath) -> float:
    """Discrete E^tau of the broken geodesic through the samples."""
    lengths = _check_resolution(path)
    return float(path.N / path.shift**2 * np.sum(lengths**2))


# -- first order ----------------------------------------------------------------


def differential_l2(path: DiscretePath) -> np.ndarray:
    """Tangent field e with dE(V) = sum_k <e_k, V_k>."""
    _check_resolution(path)
    m = path.manifold
    x = path.samples
    c = path.N / path.shift**2
    return -2.0 * c * (m.log(x, path.next_samples()) + m.log(x, path.prev_samples()))


def _edge_transports(path: DiscretePath) -> np.ndarray:
    """T_k : T_{x_{k+1}} -> T_{x_k}, with the twist's differential folded into T_{N-1}."""
    m = path.manifold
    x = path.samples
    t = m.transport(path.next_samples(), x)
    t[-1] = t[-1] @ path.isometry.jacobian
    return t


def _block_sparse(n_blocks: int, d: int, rows, cols, blocks) -> sp.csc_matrix:
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    ii = (rows[:, None, None] * d + np.arange(d)[None, :, None]) + 0 * np.arange(d)[None, None, :]
    jj = (cols[:, None, None] * d + np.arange(d)[None, None, :]) + 0 * np.arange(d)[None, :, None]
    size = n_blocks * d
    return sp.coo_matrix(
        (np.asarray(blocks).ravel(), (ii.ravel(), jj.ravel())), shape=(size, size)
    ).tocsc()


def h1_matrix(path: DiscretePath) -> sp.csc_matrix:
    """Ambient matrix of the H^1 metric G, identity on normal directions.

    G(X, Y) = h sum <X_k, Y_k> + (1/h) sum <T_k X_{k+1} - X_k, T_k Y_{k+1} - Y_k>.
    """
    n, d = path.N, path.manifold.ambient_dim
    h = path.step
    tr = _edge_transports(path)
    proj = path.manifold.projector(path.samples)
    eye = np.eye(d)
    nxt = (np.arange(n) + 1) % n
    prv = (np.arange(n) - 1) % n
    ttt = np.swapaxes(tr, -1, -2) @ tr  # lands on x_{k+1}
    diag = h * eye + (eye + ttt[prv]) / h
    diag = proj @ diag @ proj + (eye - proj)
    off = -(proj @ tr @ proj[nxt]) / h
    rows = np.concatenate([np.arange(n), np.arange(n), nxt])
    cols = np.concatenate([np.arange(n), nxt, np.arange(n)])
    blocks = np.concatenate([diag, off, np.swapaxes(off, -1, -2)])
    return _block_sparse(n, d, rows, cols, blocks)


def _closure_fix(path: DiscretePath, X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape == (path.N + 1, path.manifold.ambient_dim):
        expected = path.isometry.differential(path.samples[0], X[0])
        if np.max(np.abs(X[-1] - expected)) > 1e-8:
            raise ClosureError(f"{name} violates the twisted closure dI.X_0 = X_N")
        return X[:-1]
    if X.shape != path.samples.shape:
        raise ArgumentError(f"{name} must have shape (N, d) or (N + 1, d)")
    return X


def h1_inner(path: DiscretePath, X, Y) -> float:
    """Discrete H^1 inner product G(X, Y) of tangent fields along the path."""
    X = _closure_fix(path, X, "X")
    Y = _closure_fix(path, Y, "Y")
    return float(X.ravel() @ (h1_matrix(path) @ Y.ravel()))


def _solve_h1(path: DiscretePath, rhs: np.ndarray) -> np.ndarray:
    a = h1_matrix(path)
    z = spla.splu(a).solve(rhs.ravel())
    return z.reshape(rhs.shape)


def gradient(path: DiscretePath) -> np.ndarray:
    """H^1 gradient: the tangent field Z with G(Z, .) = dE(.)."""
    return _solve_h1(path, differential_l2(path))


def gradient_norm(path: DiscretePath, grad: Optional[np.ndarray] = None) -> float:
    e = differential_l2(path)
    z = _solve_h1(path, e) if grad is None else grad
    return float(math.sqrt(max(float(e.ravel() @ z.ravel()), 0.0)))


# -- second order ---------------------------------------------------------------


def _frame_matrix(path: DiscretePath):
    frames = path.manifold.tangent_frame(path.samples)  # (N, d, n)
    n, d, k = frames.shape
    rows = (np.arange(n)[:, None, None] * d + np.arange(d)[None, :, None]).repeat(k, axis=2)
    cols = (np.arange(n)[:, None, None] * k + np.arange(k)[None, None, :]).repeat(d, axis=1)
    fbig = sp.coo_matrix((frames.ravel(), (rows.ravel(), cols.ravel())), shape=(n * d, n * k)).tocsc()
    return frames, fbig


def hessian_matrices(path: DiscretePath):
    """(H, A, F): Hessian of E and metric G in tangent-frame coordinates, and frames.

    Coordinates are ``c`` with ``X_k = F_k c_k``.  H is assembled from the exact
    second derivative of squared distance on each edge.
    """
    _check_resolution(path)
    m = path.manifold
    n = path.N
    frames, fbig = _frame_matrix(path)
    k = frames.shape[2]
    x = path.samples
    y = path.next_samples()
    haa, hab, hbb = m.dist2_hessian_blocks(x, y)
    c = n / path.shift**2
    nxt = (np.arange(n) + 1) % n
    w = frames[nxt].copy()
    w[-1] = path.isometry.jacobian @ frames[0]
    ft = np.swapaxes(frames, -1, -2)
    wt = np.swapaxes(w, -1, -2)
    b_aa = c * ft @ haa @ frames
    b_bb = c * wt @ hbb @ w
    b_ab = c * ft @ hab @ w
    hmat = np.zeros((n * k, n * k))
    idx = np.arange(k)
    for blk, r, q in (
        (b_aa, np.arange(n), np.arange(n)),
        (b_bb, nxt, nxt),
        (b_ab, np.arange(n), nxt),
        (np.swapaxes(b_ab, -1, -2), nxt, np.arange(n)),
    ):
        ii = (r[:, None, None] * k + idx[None, :, None]).repeat(k, axis=2)
        jj = (q[:, None, None] * k + idx[None, None, :]).repeat(k, axis=1)
        np.add.at(hmat, (ii, jj), blk)
    amat = (fbig.T @ h1_matrix(path) @ fbig).toarray()
    return hmat, amat, frames


@dataclass
class IndexReport:
    energy: float
    gradient_norm: float
    spectrum_head: List[float]
    index: int
    nullity: int
    positive: int
    kernel_dim: int
    scale: float
    eps_null: float
    warning: Optional[str] = None
    spectrum: np.ndarray = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "gradient_norm": self.gradient_norm,
            "spectrum_head": list(self.spectrum_head),
            "index": self.index,
            "nullity": self.nullity,
            "positive": self.positive,
            "kernel_dim": self.kernel_dim,
            "scale": self.scale,
            "eps_null": self.eps_null,
            "warning": self.warning,
        }


def classify_spectrum(eigs: np.ndarray, eps_null: float = EPS_NULL):
    """(index, kernel_dim, positive, scale) with the relative null threshold."""
    eigs = np.sort(np.asarray(eigs, dtype=float))
    scale = float(np.max(np.abs(eigs))) if len(eigs) else 0.0
    thr = eps_null * scale
    index = int(np.sum(eigs < -thr))
    kernel = int(np.sum(np.abs(eigs) <= thr))
    return index, kernel, len(eigs) - index - kernel, scale


def hessian_report(path: DiscretePath, eps_null: float = EPS_NULL, critical_tol: float = 1e-6) -> IndexReport:
    """Morse index and nullity from the G-preconditioned Hessian spectrum.

    The nullity is the kernel dimension minus one (the reparametrization
    direction), floored at zero.
    """
    hmat, amat, _ = hessian_matrices(path)
    eigs = scipy.linalg.eigh(hmat, amat, eigvals_only=True)
    index, kernel, positive, scale = classify_spectrum(eigs, eps_null)
    gnorm = gradient_norm(path)
    warning = None
    if gnorm > critical_tol:
        warning = f"path is not critical: gradient norm {gnorm:.3e} > {critical_tol:.1e}"
    return IndexReport(
        energy=energy(path),
        gradient_norm=gnorm,
        spectrum_head=[float(v) for v in eigs[:SPECTRUM_HEAD]],
        index=index,
        nullity=max(kernel - 1, 0),
        positive=positive,
        kernel_dim=kernel,
        scale=scale,
        eps_null=eps_null,
        warning=warning,
        spectrum=eigs,
    )


# -- iterates, rescalings, embeddings ---------------------------------------------


def _is_integer(x: float, tol: float = 1e-9) -> bool:
    return abs(x - round(x)) < tol


def iterate(path: DiscretePath, k: float, twist: str = "auto") -> DiscretePath:
    """The iterate t -> z(k t), keeping the shift.

    For integer k the kN samples are read off the extension rule exactly and the
    twist becomes I^k; with ``twist="auto"`` it is simplified back to I when
    I^(k-1) fixes every sample.  ``twist="keep"`` insists on the original twist
    (needed for non-integer k = mp + 1) and raises ClosureError if the iterate
    leaves that path space.
    """
    if k <= 0:
        raise ArgumentError("iterate needs k > 0")
    if twist not in ("auto", "keep"):
        raise ArgumentError("twist must be 'auto' or 'keep'")
    iso = path.isometry
    if _is_integer(k):
        k = int(round(k))
        if k == 1:
            return path
        samples = path.extended(k * path.N)
        if iso.is_identity:
            return DiscretePath(path.manifold, iso, path.shift, samples)
        fixes = restrict_to_fixed_set(path, k - 1)
        if fixes:
            return DiscretePath(path.manifold, iso, path.shift, samples)
        if twist == "keep":
            raise ClosureError(f"I^{k - 1} does not fix the curve; iterate leaves the twisted space")
        return DiscretePath(path.manifold, iso**k, path.shift, samples)
    if twist != "keep":
        raise ArgumentError("non-integer iterates need twist='keep'")
    n_new = int(math.ceil(k)) * path.N
    t = np.arange(n_new) * (k * path.shift / n_new)
    samples = path.evaluate(t)
    out = DiscretePath(path.manifold, iso, path.shift, samples)
    end = path.evaluate(np.array([k * path.shift]))
    if path.manifold.dist(end[0], iso.apply(samples[0])) > 1e-8:
        raise ClosureError("z(k tau) != I(z(0)): k breaks the twisted closure")
    return out


def rescale(path: DiscretePath) -> DiscretePath:
    """The shift-1 path t -> z(tau t); E(result) = tau^2 E^tau(path)."""
    return DiscretePath(path.manifold, path.isometry, 1.0, path.samples)


def embed_periodic_subspace(
    path: DiscretePath, m: int, p: float, isometry: Isometry, tol: float = 1e-8
) -> DiscretePath:
    """Read a (mu p)-periodic loop as an element of the shift-(mp+1) space of ``isometry``.

    ``path`` is a free loop (identity twist) of shift mu*p.  Membership in the
    intersection of both spaces is checked on the samples.
    """
    if not path.isometry.is_identity:
        raise NotInSubspaceError("input must be a periodic loop (identity twist)")
    mu = path.shift / p
    if not _is_integer(mu) or round(mu) < 1:
        raise NotInSubspaceError(f"loop period {path.shift} is not a multiple of p={p}")
    target = m * p + 1.0
    shifted = path.evaluate(path.times + target)
    mismatch = path.manifold.dist(isometry.apply(path.samples), shifted)
    if np.max(mismatch) > tol:
        raise NotInSubspaceError(f"I(z(t)) != z(t + mp + 1) (max mismatch {np.max(mismatch):.2e})")
    ratio = target / path.shift * path.N
    if _is_integer(ratio):
        n_new = int(round(ratio))
    else:
        n_new = int(math.ceil(target / path.shift)) * path.N
    samples = path.evaluate(np.arange(n_new) * (target / n_new))
    return DiscretePath(path.manifold, isometry, target, samples)


def restrict_to_fixed_set(path: DiscretePath, alpha: int, tol: float = 1e-8) -> bool:
    """True iff every sample lies in fix(I^alpha)."""
    fset = (path.isometry**alpha).fixed_point_set()
    return bool(np.all(fset.contains(path.samples, tol)))


@dataclass
class AverageIndexEstimate:
    samples: List[tuple]
    slope_estimate: float
    converged: bool
    reports: List[IndexReport] = field(default_factory=list, repr=False)

    @property
    def indices(self) -> List[int]:
        return [i for _, i in self.samples]


def average_index(
    path: DiscretePath, p: float, m_list: Sequence[int], eps_null: float = EPS_NULL
) -> AverageIndexEstimate:
    """Indices of the iterates z^(mp+1) and the slope of m -> ind."""
    pairs = []
    reports = []
    for m in m_list:
        rep = hessian_report(iterate(path, m * p + 1, twist="keep"), eps_null)
        pairs.append((int(m), rep.index))
        reports.append(rep)
    if len(pairs) < 2:
        return AverageIndexEstimate(pairs, float("nan"), False, reports)
    ms = np.array([a for a, _ in pairs], dtype=float)
    ind = np.array([b for _, b in pairs], dtype=float)
    slope = float(np.polyfit(ms, ind, 1)[0])
    ratios = ind / ms
    converged = bool(abs(ratios[-1] - ratios[-2]) < 0.1)
    return AverageIndexEstimate(pairs, slope, converged, reports)
