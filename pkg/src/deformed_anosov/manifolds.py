"""Strong-unstable curves, the local stable disk of p, and Phc+ coverage estimates.

Curves are polylines on T^3 stored in flat arrays so that thousands of them
can be grown together: ``pts`` holds the points of all curves back to back,
``cid`` the owning curve and ``anchor`` marks the image of each seed point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, RefinementWarning
from .geometry import CHART_LIMIT, displacement, grid_points, sobol, to_chart, wrap_array
from .maps import SmoothMap


@dataclass(frozen=True)
class StableDisk:
    """Disk {u = 0, |(v, w)| < radius} in the chart of ``frame`` at ``center``."""

    center: np.ndarray
    frame: np.ndarray
    radius: float

    def __post_init__(self):
        if not (0 < self.radius < CHART_LIMIT):
            raise InvalidInput("disk radius must lie in (0, 1/2)")

    def points(self, n: int, seed: int = 0) -> np.ndarray:
        u = sobol(n, 2, seed)
        r = self.radius * np.sqrt(u[:, 0])
        a = 2 * np.pi * u[:, 1]
        V = np.stack([np.zeros(n), r * np.cos(a), r * np.sin(a)], axis=1)
        return wrap_array(self.center + V @ self.frame.T)


def disk_invariance(f: SmoothMap, disk: StableDisk, n: int = 4000, seed: int = 0) -> tuple[float, float]:
    """(max |u| of images, max radius ratio |f(x)| / |x|) over disk samples."""
    X = disk.points(n, seed)
    U0 = to_chart(X, disk.center, disk.frame)
    U1 = to_chart(f(X), disk.center, disk.frame)
    r0 = np.hypot(U0[:, 1], U0[:, 2])
    r1 = np.hypot(U1[:, 1], U1[:, 2])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(r0 > 0, r1 / r0, 0.0)
    return float(np.abs(U1[:, 0]).max()), float(ratio.max())


def largest_stable_disk(f: SmoothMap, center, frame, r_max: float, n: int = 4000, seed: int = 0,
                        contraction: float = 0.98) -> StableDisk:
    """Largest radius (bisection, 1e-3 resolution) whose disk maps into itself, contracted.

    The plane u = 0 must be mapped into itself exactly (to 1e-12).
    """
    lo, hi = 0.0, r_max
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        du, ratio = disk_invariance(f, StableDisk(np.asarray(center, float), frame, mid), n, seed)
        if du <= 1e-12 and ratio <= contraction:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise InvalidInput("no invariant stable disk found in the plane u = 0")
    return StableDisk(np.asarray(center, float), frame, lo)


@dataclass
class UnstableCurve:
    points: np.ndarray
    seed: np.ndarray
    anchor: int
    generation: int

    @property
    def arc_length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.linalg.norm(displacement(self.points[:-1], self.points[1:]), axis=1).sum())

    def spacing(self) -> np.ndarray:
        return np.linalg.norm(displacement(self.points[:-1], self.points[1:]), axis=1)

    def tangents(self) -> np.ndarray:
        d = displacement(self.points[:-1], self.points[1:])
        return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass
class Intersections:
    points: np.ndarray  # chart coordinates of transverse crossings
    angles: np.ndarray
    segments: np.ndarray
    nontransverse: np.ndarray  # angles of crossings below the threshold


# ----------------------------------------------------------------------------
# batched growth


class CurveBatch:
    """Many polylines grown together under a map."""

    def __init__(self, seeds: np.ndarray, directions: np.ndarray, half_lengths, n_seed: int = 3):
        seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        hl = np.broadcast_to(np.asarray(half_lengths, dtype=float), (len(seeds),))
        s = np.linspace(-1.0, 1.0, n_seed)
        self.pts = wrap_array((seeds[:, None, :] + s[None, :, None] * hl[:, None, None] * d[:, None, :]).reshape(-1, 3))
        self.cid = np.repeat(np.arange(len(seeds)), n_seed)
        self.anchor = np.tile(s == 0.0, len(seeds))
        self.seeds = seeds
        self.generation = 0

    def _pairs(self):
        return np.nonzero(self.cid[:-1] == self.cid[1:])[0]

    def step(self, f: SmoothMap, h_max: float, max_rounds: int = 40):
        pre = self.pts
        pts = f(pre)
        cid, anc = self.cid, self.anchor
        for _ in range(max_rounds):
            i = np.nonzero(cid[:-1] == cid[1:])[0]
            seg = np.linalg.norm(displacement(pts[i], pts[i + 1]), axis=1)
            long = i[seg > h_max]
            if long.size == 0:
                break
            mid_pre = wrap_array(pre[long] + 0.5 * displacement(pre[long], pre[long + 1]))
            mid = f(mid_pre)
            at = long + 1
            pts = np.insert(pts, at, mid, axis=0)
            pre = np.insert(pre, at, mid_pre, axis=0)
            cid = np.insert(cid, at, cid[long])
            anc = np.insert(anc, at, False)
        else:
            warnings.warn("curve refinement did not reach the spacing bound", RefinementWarning)
        self.pts, self.cid, self.anchor = pts, cid, anc
        self.generation += 1

    def arc_from_anchor(self) -> np.ndarray:
        """Signed arc length of each point from its curve's anchor."""
        n = len(self.pts)
        seg = np.zeros(n)
        same = self.cid[1:] == self.cid[:-1]
        seg[1:] = np.where(same, np.linalg.norm(displacement(self.pts[:-1], self.pts[1:]), axis=1), 0.0)
        cum = np.cumsum(seg)
        start = np.r_[True, ~same]
        # reset the cumulative sum at each curve start
        base = np.maximum.accumulate(np.where(start, np.arange(n), 0))
        cum = cum - cum[base]
        anc_pos = np.zeros(self.cid.max() + 1 if n else 0)
        anc_pos[self.cid[self.anchor]] = cum[self.anchor]
        return cum - anc_pos[self.cid]

    def prune(self, half_length: float):
        a = self.arc_from_anchor()
        keep = np.abs(a) <= half_length
        self.pts, self.cid, self.anchor = self.pts[keep], self.cid[keep], self.anchor[keep]

    def drop(self, curves: np.ndarray):
        keep = ~np.isin(self.cid, curves)
        self.pts, self.cid, self.anchor = self.pts[keep], self.cid[keep], self.anchor[keep]

    def curve(self, c: int) -> UnstableCurve:
        m = self.cid == c
        idx = np.nonzero(m)[0]
        a = int(np.nonzero(self.anchor[idx])[0][0]) if self.anchor[idx].any() else -1
        return UnstableCurve(self.pts[m].copy(), self.seeds[c].copy(), a, self.generation)


def _crossings(pts, cid, disk: StableDisk):
    """Segments of consecutive points crossing the disk plane inside the disk."""
    i = np.nonzero(cid[:-1] == cid[1:])[0]
    U0 = to_chart(pts[i], disk.center, disk.frame)
    near = np.linalg.norm(U0, axis=1) < min(CHART_LIMIT * 0.9, disk.radius + 0.1)
    i, U0 = i[near], U0[near]
    D = displacement(pts[i], pts[i + 1]) @ disk.frame
    U1 = U0 + D
    # half-open test so a vertex on the plane is counted once
    a, b = U0[:, 0], U1[:, 0]
    cross = ((a <= 0.0) & (b > 0.0)) | ((b <= 0.0) & (a > 0.0))
    i, U0, D = i[cross], U0[cross], D[cross]
    s = U0[:, 0] / (U0[:, 0] - (U0[:, 0] + D[:, 0]))
    P = U0 + s[:, None] * D
    inside = np.hypot(P[:, 1], P[:, 2]) < disk.radius
    i, P, D, s = i[inside], P[inside], D[inside], s[inside]
    ang = np.arcsin(np.clip(np.abs(D[:, 0]) / np.linalg.norm(D, axis=1), 0.0, 1.0))
    return i, P, ang, s


def transverse_hit(curve: UnstableCurve, disk: StableDisk, angle_min: float = 1e-3) -> Intersections:
    """Crossings of the polyline with the disk, split by the transversality threshold."""
    if angle_min <= 0:
        raise InvalidInput("angle_min must be positive")
    pts = np.atleast_2d(curve.points)
    i, P, ang, _ = _crossings(pts, np.zeros(len(pts), dtype=int), disk)
    ok = ang >= angle_min
    return Intersections(P[ok], ang[ok], i[ok], ang[~ok])


def uu_directions(f: SmoothMap, X: np.ndarray, m: int = 20, return_growth: bool = False):
    """Strong-unstable directions at ``X`` by pushing a generic vector along the backward orbit."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    orbit = [X]
    for _ in range(m):
        orbit.append(f.inverse(orbit[-1]))
    v = np.broadcast_to(np.array([0.5773, 0.5774, 0.5775]), X.shape).copy()
    for x in reversed(orbit[1:]):
        v = np.einsum("nij,nj->ni", f.jacobian(x), v)
        v /= np.linalg.norm(v, axis=1, keepdims=True)
    if return_growth:
        return v, orbit
    return v


def grow_unstable_curve(f: SmoothMap, x, L: float, N: int, h_max: float, direction=None,
                        seed_length: float = 1e-6) -> UnstableCurve:
    """Apply ``f`` N times to a short segment along E^uu(x), refining and pruning to length L."""
    if L <= 0 or h_max <= 0 or N < 0:
        raise InvalidInput("need L > 0, h_max > 0, N >= 0")
    x = np.asarray(x, dtype=float)
    if direction is None:
        from .lyapunov import oseledets_directions

        direction = oseledets_directions(f, x, 20).uu
    b = CurveBatch(x[None], np.asarray(direction, float)[None], 0.5 * seed_length)
    for _ in range(N):
        b.step(f, h_max)
        b.prune(0.5 * L)
    return b.curve(0)


def local_unstable_curves(f: SmoothMap, X: np.ndarray, half_length: float, backsteps: int,
                          h_max: float) -> list[UnstableCurve]:
    """Local strong-unstable curves through ``X``, grown from seeds ``backsteps`` preimages back."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) == 0:
        return []
    v, orbit = uu_directions(f, X, 20, return_growth=True)
    seeds = orbit[backsteps]
    d = uu_directions(f, seeds, 20)
    # growth of the seed direction over the backsteps sets the seed length
    g = np.ones(len(X))
    w = d.copy()
    for k in range(backsteps, 0, -1):
        w = np.einsum("nij,nj->ni", f.jacobian(orbit[k]), w)
        nw = np.linalg.norm(w, axis=1)
        g *= nw
        w /= nw[:, None]
    b = CurveBatch(seeds, d, 1.5 * half_length / g)
    for _ in range(backsteps):
        b.step(f, h_max)
        b.prune(half_length)
    return [b.curve(c) for c in range(len(X))]


# ----------------------------------------------------------------------------
# coverage


@dataclass
class CoverageReport:
    grid: int
    N: int
    L: float
    fraction: float
    failures: np.ndarray
    first_hit: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"grid": self.grid, "N": self.N, "L": self.L, "fraction": self.fraction,
                "n_failures": int(len(self.failures))}


def coverage_generations(f: SmoothMap, X: np.ndarray, disk: StableDisk, N: int, L_ladder,
                         tube=None, h_max: float = 0.05, angle_min: float = 1e-3, m_dir: int = 20,
                         seed_length: float = 1e-6, chunk: int = 2048) -> np.ndarray:
    """First generation at which each point's unstable curve meets the disk, per length budget.

    Returns an integer array ``(len(X), len(L_ladder))`` holding the first
    generation g <= N with a transverse crossing within arc distance L/2 of the
    anchor, or -1.  Points inside ``tube`` (a region with ``contains``) count
    as hits at generation 0.  Curves are pruned to the largest budget, and a
    curve stops once it has hit under the smallest one.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Ls = np.sort(np.asarray(L_ladder, dtype=float))
    out = -np.ones((len(X), len(Ls)), dtype=int)
    for s in range(0, len(X), chunk):
        Xc = X[s:s + chunk]
        gen = -np.ones((len(Xc), len(Ls)), dtype=int)
        if tube is not None:
            gen[tube.contains(Xc)] = 0
        todo = np.nonzero(gen[:, 0] < 0)[0]
        if todo.size and N > 0:
            d = uu_directions(f, Xc[todo], m_dir)
            b = CurveBatch(Xc[todo], d, 0.5 * seed_length)
            for g in range(1, N + 1):
                b.step(f, h_max)
                b.prune(0.5 * Ls[-1])
                i, P, ang, t = _crossings(b.pts, b.cid, disk)
                ok = ang >= angle_min
                if ok.any():
                    arc = b.arc_from_anchor()
                    i, t = i[ok], t[ok]
                    dist = np.abs(arc[i] + t * (arc[i + 1] - arc[i]))
                    c = b.cid[i]
                    for k, Lk in enumerate(Ls):
                        hitc = np.unique(c[dist <= 0.5 * Lk])
                        rows = todo[hitc]
                        fresh = gen[rows, k] < 0
                        gen[rows[fresh], k] = g
                    done = np.nonzero(gen[todo, 0] >= 0)[0]
                    b.drop(done)
                if b.pts.shape[0] == 0:
                    break
        out[s:s + chunk] = gen
    return out


def phc_plus_coverage(f: SmoothMap, disk: StableDisk, grid: int = 32, N: int = 30, L: float = 50.0,
                      tube=None, h_max: float = 0.05, angle_min: float = 1e-3) -> CoverageReport:
    """Fraction of grid points whose unstable curve (budget N, L) meets the stable disk transversely."""
    X = grid_points(grid)
    gen = coverage_generations(f, X, disk, N, [L], tube, h_max, angle_min)[:, 0]
    fail = gen < 0
    return CoverageReport(grid, N, L, float(1.0 - fail.mean()), X[fail], gen)


def coverage_ladder(f: SmoothMap, disk: StableDisk, grid: int, N_ladder, L_ladder, tube=None,
                    h_max: float = 0.05, angle_min: float = 1e-3, points: np.ndarray | None = None) -> list[CoverageReport]:
    """Coverage reports over all (N, L) pairs from a single run."""
    X = grid_points(grid) if points is None else points
    Ls = np.sort(np.asarray(L_ladder, float))
    gen = coverage_generations(f, X, disk, int(max(N_ladder)), Ls, tube, h_max, angle_min)
    out = []
    for N in sorted(N_ladder):
        for k, L in enumerate(Ls):
            hit = (gen[:, k] >= 0) & (gen[:, k] <= N)
            out.append(CoverageReport(grid, int(N), float(L), float(hit.mean()), X[~hit], gen[:, k]))
    return out


def bad_set_estimate(f: SmoothMap, disk: StableDisk, grid: int, N_sequence, L: float = 50.0, tube=None,
                     h_max: float = 0.05) -> list[CoverageReport]:
    """Failure clouds at increasing horizons; they are nested by construction of the first-hit record.

    A :class:`RefinementWarning` is issued if nesting is ever violated.
    """
    N_sequence = list(N_sequence)
    if any(b <= a for a, b in zip(N_sequence, N_sequence[1:])):
        raise InvalidInput("horizons must increase")
    reps = coverage_ladder(f, disk, grid, N_sequence, [L], tube, h_max)
    for a, b in zip(reps, reps[1:]):
        fa = {tuple(r) for r in np.round(a.failures, 12)}
        fb = {tuple(r) for r in np.round(b.failures, 12)}
        if not fb <= fa:
            warnings.warn("failure clouds are not nested", RefinementWarning)
    return reps


def u_saturation_proxy(f: SmoothMap, disk: StableDisk, failures: np.ndarray, N: int, L: float,
                       delta: float = 1e-3, tube=None, h_max: float = 0.05, max_points: int = 64) -> float:
    """Fraction of unstable-curve neighbours of failure points that also fail at horizon N."""
    F = np.atleast_2d(failures)[:max_points]
    if len(F) == 0:
        return 1.0
    d = uu_directions(f, F)
    nb = wrap_array(np.concatenate([F + delta * d, F - delta * d]))
    gen = coverage_generations(f, nb, disk, N, [L], tube, h_max)[:, 0]
    return float((gen < 0).mean())


def unstable_box_coverage(f: SmoothMap, p, direction, L: float = 50.0, boxes: int = 32,
                          h_max: float | None = None, max_gen: int = 200) -> dict:
    """Proxy for Phc-: fraction of the boxes^3 partition visited by the unstable curve of p.

    This only measures how far W^u(p) spreads; it does not compute Pesin
    stable manifolds.
    """
    h = h_max if h_max is not None else 0.5 / boxes
    b = CurveBatch(np.asarray(p, float)[None], np.asarray(direction, float)[None], 1e-6)
    length = 0.0
    for _ in range(max_gen):
        b.step(f, h)
        b.prune(0.5 * L)
        length = UnstableCurve(b.pts, b.seeds[0], 0, b.generation).arc_length
        if length >= 0.999 * L:
            break
    idx = np.floor(b.pts * boxes).astype(int) % boxes
    visited = np.unique(idx[:, 0] + boxes * (idx[:, 1] + boxes * idx[:, 2]))
    return {"proxy": "unstable-curve box coverage", "L": L, "arc_length": length, "boxes": boxes,
            "fraction": float(len(visited) / boxes**3), "generations": b.generation}
