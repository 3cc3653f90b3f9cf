"""Torus arithmetic, small dense linear algebra and axis cones.

Points on T^3 = R^3/Z^3 are stored as float arrays with coordinates in
[0, 1).  Most functions accept a single point of shape ``(3,)`` or a batch of
shape ``(N, 3)`` and return the matching shape.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.stats import qmc

from .errors import ApertureInfinite, InvalidInput

CHART_LIMIT = 0.5  # balls of radius < 1/2 embed in T^3


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise InvalidInput(f"coordinate {name}={v!r} not reduced to [0,1); use wrap()")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class ChartPoint:
    """Local coordinates (u, v, w) around a chart center."""

    u: float
    v: float
    w: float
    radius: float

    def __post_init__(self):
        if not np.linalg.norm([self.u, self.v, self.w]) < self.radius:
            raise InvalidInput("chart point outside the chart radius")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])


def wrap_array(raw) -> np.ndarray:
    """Reduce coordinates mod 1 into [0, 1) (array version of :func:`wrap`)."""
    a = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidInput("non-finite coordinates")
    out = np.mod(a, 1.0)
    # mod of a tiny negative number rounds up to exactly 1.0
    out[out >= 1.0] = 0.0
    return out


def wrap(raw) -> TorusPoint:
    a = wrap_array(np.asarray(raw, dtype=float).reshape(3))
    return TorusPoint(float(a[0]), float(a[1]), float(a[2]))


def _coords(p) -> np.ndarray:
    if isinstance(p, TorusPoint):
        return p.as_array()
    return np.asarray(p, dtype=float)


def displacement(a, b) -> np.ndarray:
    """Shortest lattice representative of ``b - a``, components in [-1/2, 1/2)."""
    d = _coords(b) - _coords(a)
    return d - np.floor(d + 0.5)


def distance(a, b) -> np.ndarray | float:
    d = np.linalg.norm(displacement(a, b), axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def to_chart(points, center, frame) -> np.ndarray:
    """Chart coordinates ``frame.T @ displacement(center, x)``."""
    return displacement(center, points) @ np.asarray(frame)


def from_chart(coords, center, frame) -> np.ndarray:
    return wrap_array(_coords(center) + np.asarray(coords) @ np.asarray(frame).T)


# ----------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeSpec:
    """C_gamma = {v : |(v2, v3)| <= gamma |v1|} in the coordinates of ``frame``.

    ``frame`` is an orthonormal 3x3 matrix whose first column is the cone axis;
    the default is the standard basis.
    """

    gamma: float
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise InvalidInput("cone aperture must be positive")
        f = np.asarray(self.frame, dtype=float)
        if f.shape != (3, 3) or not np.allclose(f.T @ f, np.eye(3), atol=1e-12):
            raise InvalidInput("cone frame must be an orthonormal 3x3 matrix")
        object.__setattr__(self, "frame", f)

    def with_gamma(self, gamma: float) -> "ConeSpec":
        return ConeSpec(gamma, self.frame)

    def boundary_vectors(self, samples: int) -> np.ndarray:
        """Unit vectors (frame coordinates) on the cone boundary, uniform in angle."""
        phi = 2.0 * np.pi * np.arange(samples) / samples
        v = np.stack([np.ones(samples), self.gamma * np.cos(phi), self.gamma * np.sin(phi)], axis=1)
        return v / np.sqrt(1.0 + self.gamma**2)


def cone_contains(c: ConeSpec, v) -> bool:
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise InvalidInput("zero vector has no direction")
    w = c.frame.T @ v
    return bool(np.hypot(w[1], w[2]) <= c.gamma * abs(w[0]))


def cone_ratio(c: ConeSpec, v) -> np.ndarray:
    """|(w2, w3)| / |w1| of vectors ``v`` (last axis) in frame coordinates."""
    w = np.asarray(v) @ c.frame
    with np.errstate(divide="ignore"):
        return np.hypot(w[..., 1], w[..., 2]) / np.abs(w[..., 0])


def image_ratios(matrices, c: ConeSpec, samples: int) -> np.ndarray:
    """Worst boundary image ratio for each matrix in a ``(N, 3, 3)`` stack.

    Returns ``inf`` where some boundary vector lands on the plane ``w1 = 0``.
    """
    M = np.asarray(matrices, dtype=float)
    B = c.frame.T @ M @ c.frame
    V = c.boundary_vectors(samples)
    W = np.einsum("nij,kj->nki", B, V)
    first = np.abs(W[..., 0])
    rest = np.hypot(W[..., 1], W[..., 2])
    scale = np.linalg.norm(W, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(first > 1e-300 + 1e-15 * scale, rest / first, np.inf)
    return r.max(axis=-1)


def cone_image_aperture(A, c: ConeSpec, samples: int) -> float:
    """Largest sampled aperture of the image cone ``A C``.

    The boundary circle is sampled at ``samples`` equally spaced angles; the
    value is a lower bound for the exact image aperture.
    """
    if samples < 8:
        raise InvalidInput("need at least 8 boundary samples")
    A = np.asarray(A, dtype=float)
    if abs(np.linalg.det(A)) == 0.0:
        raise InvalidInput("matrix is singular")
    r = float(image_ratios(A[None], c, samples)[0])
    if not np.isfinite(r):
        raise ApertureInfinite("a boundary vector is mapped off the cone axis entirely")
    return r


# ----------------------------------------------------------------------------
# linear algebra


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by decreasing modulus with eigenvector condition numbers."""

    values: np.ndarray
    condition: np.ndarray

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def arguments(self) -> np.ndarray:
        return np.angle(self.values)


def eig_sorted(A) -> Spectrum:
    A = np.asarray(A, dtype=float)
    w, vl, vr = scipy.linalg.eig(A, left=True, right=True)
    order = np.lexsort((-w.imag, -np.abs(w)))
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    dots = np.abs(np.einsum("ij,ij->j", vl.conj(), vr))
    norms = np.linalg.norm(vl, axis=0) * np.linalg.norm(vr, axis=0)
    with np.errstate(divide="ignore"):
        cond = np.where(dots > 0, norms / dots, np.inf)
    return Spectrum(w, cond)


def symmetric_eigenframe(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (decreasing) and a right-handed orthonormal eigenframe of symmetric ``A``."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, A.T):
        raise InvalidInput("matrix is not symmetric")
    w, V = np.linalg.eigh(A)
    w, V = w[::-1], V[:, ::-1]
    # fix signs deterministically: largest component of each column positive
    for j in range(3):
        k = np.argmax(np.abs(V[:, j]))
        if V[k, j] < 0:
            V[:, j] = -V[:, j]
    if np.linalg.det(V) < 0:
        V[:, 2] = -V[:, 2]
    return w, V


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


# ----------------------------------------------------------------------------
# sampling


def sobol(n: int, d: int = 3, seed: int = 0) -> np.ndarray:
    """``n`` scrambled Sobol points in [0, 1)^d, deterministic in ``seed``."""
    eng = qmc.Sobol(d=d, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        return eng.random(n)


def ball_points(n: int, center, radius: float, seed: int = 0, shell: tuple[float, float] | None = None) -> np.ndarray:
    """Low-discrepancy points in a ball (or spherical shell) on the torus."""
    u = sobol(n, 3, seed)
    lo, hi = (0.0, radius) if shell is None else shell
    r = np.cbrt(lo**3 + u[:, 0] * (hi**3 - lo**3))
    cz = 1.0 - 2.0 * u[:, 1]
    phi = 2.0 * np.pi * u[:, 2]
    sz = np.sqrt(np.clip(1.0 - cz**2, 0.0, None))
    d = np.stack([sz * np.cos(phi), sz * np.sin(phi), cz], axis=1) * r[:, None]
    return wrap_array(_coords(center) + d)


def grid_points(n: int) -> np.ndarray:
    """Cell-centered regular grid of ``n**3`` points in T^3 (x fastest)."""
    g = (np.arange(n) + 0.5) / n
    Z, Y, X = np.meshgrid(g, g, g, indexing="ij")
    return np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
