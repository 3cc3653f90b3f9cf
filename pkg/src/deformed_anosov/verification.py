"""Sampled checks of volume preservation, cone invariance, domination, support and membership in V.

Every check returns a :class:`VerificationReport`.  Samples are scrambled
Sobol points, so reports are reproducible from the seed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .geometry import (CHART_LIMIT, ConeSpec, ball_points, displacement, eig_sorted, grid_points, image_ratios,
                       sobol, to_chart)
from .maps import SmoothMap

CHUNK = 8192


@dataclass
class VerificationReport:
    name: str
    verdict: str  # "pass" | "fail" | "inconclusive"
    margin: float
    witness: list | None
    n_samples: int
    tolerances: dict
    wall_time: float = 0.0
    details: dict = field(default_factory=dict)
    children: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict == "fail" and self.witness is None:
            raise InvalidInput(f"failing report {self.name!r} needs a witness")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "name": self.name,
            "verdict": self.verdict,
            "margin": _jsonable(self.margin),
            "witness": _jsonable(self.witness),
            "n_samples": self.n_samples,
            "tolerances": _jsonable(self.tolerances),
            "details": _jsonable(self.details),
            "children": [c.to_dict(timing) for c in self.children],
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


@dataclass(frozen=True)
class RegionSpec:
    """Chart-aligned tube |u| < half_length, |(v, w)| < radius around the local stable disk."""

    center: np.ndarray
    frame: np.ndarray
    half_length: float
    radius: float
    chart_radius: float

    def __post_init__(self):
        if self.half_length <= 0 or self.radius <= 0:
            raise InvalidInput("tube dimensions must be positive")
        if math.hypot(self.half_length, self.radius) >= self.chart_radius:
            raise InvalidInput("tube must lie inside the chart ball")
        if self.chart_radius >= CHART_LIMIT:
            raise InvalidInput("chart radius must be below 1/2")

    def contains(self, points) -> np.ndarray:
        U = np.atleast_2d(to_chart(points, self.center, self.frame))
        return (np.abs(U[:, 0]) < self.half_length) & (np.hypot(U[:, 1], U[:, 2]) < self.radius)


def sample_points(n: int, seed: int = 0, focus: tuple | None = None) -> np.ndarray:
    """Sobol points on T^3; with ``focus = (center, radius)`` half of them lie in that ball."""
    if focus is None:
        return sobol(n, 3, seed)
    k = n // 2
    return np.concatenate([ball_points(k, focus[0], focus[1], seed=seed + 1), sobol(n - k, 3, seed)])


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        rep = fn(*a, **kw)
        rep.wall_time = time.perf_counter() - t0
        return rep

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_volume(f: SmoothMap, n_samples: int = 10_000, tol: float = 1e-8, seed: int = 0,
                 focus: tuple | None = None) -> VerificationReport:
    """max |det Df(x) - 1| over ``n_samples`` points."""
    if n_samples < 1:
        raise InvalidInput("need at least one sample")
    X = sample_points(n_samples, seed, focus)
    dev = np.concatenate([np.abs(np.linalg.det(f.jacobian(X[s:s + CHUNK])) - 1.0)
                          for s in range(0, len(X), CHUNK)])
    k = int(np.argmax(dev))
    ok = bool(dev[k] <= tol)
    return VerificationReport("volume", "pass" if ok else "fail", float(dev[k]), X[k].tolist(), len(X),
                              {"tol": tol}, details={"max_deviation": float(dev[k])})


@_timed
def check_cone_invariance(f: SmoothMap, gamma, xi: float, n_points: int = 10_000, n_boundary: int = 64,
                          seed: int = 0, focus: tuple | None = None, frame=None,
                          region: tuple | None = None) -> VerificationReport:
    """Check Df(x) C_gamma inside C_xi at sampled points.

    ``gamma`` is a float or a :class:`ConeSpec`; ``region = (center, radius)``
    restricts sampling to a ball.  The margin is (xi - worst) / xi.
    """
    cone = gamma if isinstance(gamma, ConeSpec) else ConeSpec(gamma, np.eye(3) if frame is None else frame)
    if not (0 < xi < cone.gamma):
        raise InvalidInput("need 0 < xi < gamma")
    if region is not None:
        X = ball_points(n_points, region[0], region[1], seed=seed)
    else:
        X = sample_points(n_points, seed, focus)
    worst = np.concatenate([image_ratios(f.jacobian(X[s:s + CHUNK]), cone, n_boundary)
                            for s in range(0, len(X), CHUNK)])
    k = int(np.argmax(worst))
    margin = (xi - worst[k]) / xi
    ok = bool(worst[k] <= xi)
    return VerificationReport("cone_invariance", "pass" if ok else "fail", float(margin), X[k].tolist(), len(X),
                              {"gamma": cone.gamma, "xi": xi, "n_boundary": n_boundary},
                              details={"worst_ratio": float(worst[k])})


def cocycle_logsv(f: SmoothMap, X: np.ndarray, n: int):
    """Log singular values and extreme singular directions of Df^n at each row of ``X``.

    Forward and inverse products are accumulated with scalar renormalization,
    so the top and bottom singular values are accurate over long horizons; the
    middle one follows from the determinant.  Returns
    ``(logsv (N, 3), top_left (N, 3), bottom_right (N, 3), endpoints)``.
    """
    N = len(X)
    P = np.broadcast_to(np.eye(3), (N, 3, 3)).copy()
    Pi = P.copy()
    lp = np.zeros(N)
    lpi = np.zeros(N)
    ldet = np.zeros(N)
    x = X.copy()
    for _ in range(n):
        J = f.jacobian(x)
        ldet += np.log(np.abs(np.linalg.det(J)))
        P = J @ P
        Pi = Pi @ np.linalg.inv(J)
        c = np.linalg.norm(P, axis=(1, 2))
        ci = np.linalg.norm(Pi, axis=(1, 2))
        P /= c[:, None, None]
        Pi /= ci[:, None, None]
        lp += np.log(c)
        lpi += np.log(ci)
        x = f(x)
    U, S, Vt = np.linalg.svd(P)
    Ui, Si, Vti = np.linalg.svd(Pi)
    l1 = lp + np.log(S[:, 0])
    l3 = -(lpi + np.log(Si[:, 0]))
    l2 = ldet - l1 - l3
    # bottom right singular vector of D = top left singular vector of D^-1
    return np.stack([l1, l2, l3], axis=1), U[:, :, 0], Ui[:, :, 0], x


def domination_offset(log_gap: np.ndarray, n: int) -> np.ndarray:
    """Smallest n0 >= 0 with gap >= 2^(n - n0)."""
    return np.maximum(0, np.ceil(n - log_gap / math.log(2.0) - 1e-9)).astype(int)


@_timed
def check_domination(f: SmoothMap, n_time: int = 30, n_points: int = 1000, cone: ConeSpec | None = None,
                     seed: int = 0, n0_max: int | None = None, points: np.ndarray | None = None,
                     focus: tuple | None = None) -> VerificationReport:
    """Finite-time domination: sigma1/sigma2 of Df^n(x) >= 2^(n - n0) with n0 <= n0_max.

    The top image direction must also lie in ``cone`` when one is given.  A
    failure at horizons below 10 is reported as inconclusive.
    """
    if n_time < 1:
        raise InvalidInput("n_time must be at least 1")
    n0_max = n_time // 2 if n0_max is None else n0_max
    X = sample_points(n_points, seed, focus) if points is None else np.asarray(points, dtype=float)
    n0 = np.empty(len(X), dtype=int)
    in_cone = np.ones(len(X), dtype=bool)
    gaps = np.empty(len(X))
    for s in range(0, len(X), CHUNK):
        L, top, _, _ = cocycle_logsv(f, X[s:s + CHUNK], n_time)
        gaps[s:s + CHUNK] = L[:, 0] - L[:, 1]
        n0[s:s + CHUNK] = domination_offset(L[:, 0] - L[:, 1], n_time)
        if cone is not None:
            w = top @ cone.frame
            in_cone[s:s + CHUNK] = np.hypot(w[:, 1], w[:, 2]) <= cone.gamma * np.abs(w[:, 0])
    k = int(np.argmax(n0 + (~in_cone) * (n_time + 1)))
    ok = bool(n0.max() <= n0_max and in_cone.all())
    verdict = "pass" if ok else ("inconclusive" if n_time < 10 else "fail")
    return VerificationReport("domination", verdict, float(n0_max - n0.max()), None if ok else X[k].tolist(),
                              len(X), {"n_time": n_time, "n0_max": n0_max},
                              details={"n0": int(n0.max()), "min_log2_gap_rate": float(gaps.min() / n_time / math.log(2)),
                                       "top_direction_in_cone": bool(in_cone.all())})


@dataclass
class FixedPointSpectrum:
    values: np.ndarray
    moduli: np.ndarray
    arguments: np.ndarray
    condition: np.ndarray
    complex_stable_pair: bool

    def to_dict(self) -> dict:
        return {"real": self.values.real.tolist(), "imag": self.values.imag.tolist(),
                "moduli": self.moduli.tolist(), "arguments": self.arguments.tolist(),
                "condition": self.condition.tolist(), "complex_stable_pair": self.complex_stable_pair}


def fixed_point_spectrum(f: SmoothMap, p, period: int = 1) -> FixedPointSpectrum:
    """Eigenvalues of Df^period(p), sorted by decreasing modulus.

    A complex pair of modulus below 1 rules out any invariant splitting of the
    stable plane into two lines at p.
    """
    from .construction import orbit_linearization

    _, D = orbit_linearization(f, p, period)
    sp = eig_sorted(D)
    stable = sp.values[sp.moduli < 1.0]
    cpx = bool(len(stable) == 2 and abs(stable[0].imag) > 1e-12)
    return FixedPointSpectrum(sp.values, sp.moduli, sp.arguments, sp.condition, cpx)


@_timed
def check_support(f: SmoothMap, base: SmoothMap, center, radius: float, n_samples: int = 10_000,
                  tol: float = 1e-12, seed: int = 0) -> VerificationReport:
    """d(f(x), base(x)) <= tol for sampled x outside B(center, radius), half on a thin outer shell."""
    center = np.asarray(center, dtype=float)
    k = n_samples // 2
    shell_hi = min(radius * 1.1, CHART_LIMIT * 0.999)
    shell = ball_points(k, center, shell_hi, seed=seed + 3, shell=(radius * (1 + 1e-9), shell_hi))
    pts = sobol(4 * (n_samples - k), 3, seed)
    pts = pts[np.linalg.norm(displacement(center, pts), axis=1) > radius][: n_samples - k]
    X = np.concatenate([shell, pts])
    err = np.linalg.norm(displacement(base(X), f(X)), axis=1)
    j = int(np.argmax(err))
    ok = bool(err[j] <= tol)
    return VerificationReport("support", "pass" if ok else "fail", float(err[j]), X[j].tolist(), len(X),
                              {"tol": tol, "radius": radius}, details={"max_error": float(err[j])})


def _avoiding(f: SmoothMap, X: np.ndarray, region: RegionSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Mask of points whose orbit segment f^-n .. f^n avoids the region, and f^-n of each point."""
    keep = ~region.contains(X)
    x = X.copy()
    for _ in range(n):
        x = f(x)
        keep &= ~region.contains(x)
    back = X.copy()
    for _ in range(n):
        back = f.inverse(back)
        keep &= ~region.contains(back)
    return keep, back


@_timed
def check_V_membership(f: SmoothMap, region: RegionSpec, p, n_time: int = 30, gamma: float = 1.0,
                       xi: float | None = None, grid: int = 32, cone_points: int = 10_000,
                       n_boundary: int = 64, disk_radius: float | None = None, seed: int = 0,
                       uu_half_length: float = 0.3, uu_backsteps: int = 8, h_max: float = 0.02,
                       angle_min: float = 1e-3) -> VerificationReport:
    """Composite check of the three defining conditions of V.

    (1) cone invariance plus finite-time domination on the grid;
    (2) local strong-unstable curves through grid points of the tube meet the
        local stable disk of p transversely;
    (3) grid points whose orbit segment of length 2 n_time avoids the tube
        carry a three-way split with uu/ss directions in the base cones.
    """
    from .manifolds import StableDisk, local_unstable_curves, transverse_hit

    frame = region.frame
    uu = ConeSpec(gamma, frame)
    ss = ConeSpec(gamma, frame[:, [2, 0, 1]])
    X = grid_points(grid)
    focus = (region.center, region.chart_radius)
    children = []
    # (1)
    if xi is not None:
        children.append(check_cone_invariance(f, uu, xi, cone_points, n_boundary, seed=seed, focus=focus))
    children.append(check_domination(f, n_time, cone=uu, points=X))
    c1 = all(c.passed for c in children)
    # (2)
    t0 = time.perf_counter()
    disk = StableDisk(np.asarray(p, float), frame, disk_radius if disk_radius else region.chart_radius * 0.7)
    inside = X[region.contains(X)]
    curves = local_unstable_curves(f, inside, uu_half_length, uu_backsteps, h_max)
    hit = np.array([len(transverse_hit(c, disk, angle_min).points) > 0 for c in curves], dtype=bool)
    c2 = bool(hit.all()) and len(inside) > 0
    miss = inside[~hit]
    children.append(VerificationReport(
        "V2_transverse_intersection", "pass" if c2 else "fail", float(hit.mean()) if len(hit) else 0.0,
        None if c2 else (miss[0].tolist() if len(miss) else np.asarray(p).tolist()), len(inside),
        {"angle_min": angle_min, "disk_radius": disk.radius, "half_length": uu_half_length},
        wall_time=time.perf_counter() - t0, details={"tube_points": len(inside), "hits": int(hit.sum())}))
    # (3)
    t0 = time.perf_counter()
    keep, back = _avoiding(f, X, region, n_time)
    starts = back[keep]
    N = 2 * n_time
    L = np.empty((0, 3))
    ok_dirs = np.ones(0, bool)
    for s in range(0, len(starts), CHUNK):
        Ls, top, bottom, _ = cocycle_logsv(f, starts[s:s + CHUNK], N)
        L = np.concatenate([L, Ls])
        wt = top @ uu.frame
        wb = bottom @ ss.frame
        ok = (np.hypot(wt[:, 1], wt[:, 2]) <= gamma * np.abs(wt[:, 0])) & \
             (np.hypot(wb[:, 1], wb[:, 2]) <= gamma * np.abs(wb[:, 0]))
        ok_dirs = np.concatenate([ok_dirs, ok])
    gap = np.minimum(L[:, 0] - L[:, 1], L[:, 1] - L[:, 2]) if len(L) else np.zeros(0)
    n0 = domination_offset(gap, N) if len(gap) else np.zeros(0, int)
    n0_max = N // 2
    c3_ok = bool(len(starts) > 0 and n0.max() <= n0_max and ok_dirs.all())
    j = int(np.argmax(n0 + (~ok_dirs) * (N + 1))) if len(starts) else 0
    children.append(VerificationReport(
        "V3_partial_hyperbolicity_off_tube", "pass" if c3_ok else "fail",
        float(n0_max - n0.max()) if len(n0) else -1.0,
        None if c3_ok else (starts[j].tolist() if len(starts) else np.asarray(p).tolist()), int(len(starts)),
        {"segment_length": N, "n0_max": n0_max}, wall_time=time.perf_counter() - t0,
        details={"avoiding_fraction": float(keep.mean()), "n0": int(n0.max()) if len(n0) else None,
                 "directions_in_cones": bool(ok_dirs.all())}))
    conds = [c1, c2, c3_ok]
    failing = [i + 1 for i, c in enumerate(conds) if not c]
    ok = not failing
    wit = None
    if not ok:
        wit = next(c.witness for c in children if not c.passed and c.witness is not None)
    return VerificationReport("V_membership", "pass" if ok else "fail", float(min(c.margin for c in children)),
                              wit, len(X), {"n_time": n_time, "grid": grid},
                              details={"failing_conditions": failing}, children=children)
