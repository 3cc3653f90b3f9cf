"""Lyapunov exponents (QR cocycle method), Oseledets directions and the cs Birkhoff average."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import Inconclusive, InvalidInput, Underflow
from .geometry import ConeSpec, sobol
from .maps import SmoothMap

DELTA_NUH = 1e-3


@njit(cache=True)
def _qr_logs(J, Q0, renorm_every):
    """Propagate the frame Q0 through J[0], J[1], ...; returns summed logs and the trace.

    Modified Gram-Schmidt applied twice keeps the frame orthonormal to
    machine precision.  ``status`` is nonzero on frame degeneracy.
    """
    n = J.shape[0]
    Q = Q0.copy()
    logs = np.zeros(3)
    trace = np.zeros((n, 3))
    status = 0
    for k in range(n):
        Q = J[k] @ Q
        if (k + 1) % renorm_every == 0 or k == n - 1:
            for j in range(3):
                r = 0.0
                for _pass in range(2):
                    for i in range(j):
                        c = 0.0
                        for m in range(3):
                            c += Q[m, i] * Q[m, j]
                        for m in range(3):
                            Q[m, j] -= c * Q[m, i]
                    s = 0.0
                    for m in range(3):
                        s += Q[m, j] * Q[m, j]
                    s = np.sqrt(s)
                    if _pass == 0:
                        r = s
                    else:
                        r *= s
                    if s < 1e-300:
                        status = 1
                        return logs, trace, status
                    for m in range(3):
                        Q[m, j] /= s
                logs[j] += np.log(r)
        for j in range(3):
            trace[k, j] = logs[j] / (k + 1)
    return logs, trace, status


@njit(cache=True)
def _align(J, renorm_every):
    """Frame after pushing the identity through J, orthonormalized as in :func:`_qr_logs`."""
    Q = np.eye(3)
    for k in range(J.shape[0]):
        Q = J[k] @ Q
        if (k + 1) % renorm_every == 0 or k == J.shape[0] - 1:
            for j in range(3):
                for _pass in range(2):
                    for i in range(j):
                        c = 0.0
                        for m in range(3):
                            c += Q[m, i] * Q[m, j]
                        for m in range(3):
                            Q[m, j] -= c * Q[m, i]
                    s = np.sqrt(Q[0, j] ** 2 + Q[1, j] ** 2 + Q[2, j] ** 2)
                    if s < 1e-300:
                        return Q, 1
                    for m in range(3):
                        Q[m, j] /= s
    return Q, 0


@dataclass
class ExponentEstimate:
    exponents: np.ndarray
    n: int
    trace: np.ndarray
    x0: np.ndarray

    @property
    def total(self) -> float:
        return float(self.exponents.sum())


def orbit(f: SmoothMap, x0, n: int) -> np.ndarray:
    """Points x0, f(x0), ..., f^(n-1)(x0) (also for a batch of initial points)."""
    x = np.asarray(x0, dtype=float)
    out = np.empty((n,) + x.shape)
    for k in range(n):
        out[k] = x
        x = f(x)
    return out


def _jacobians_along(f: SmoothMap, pts: np.ndarray, chunk: int = 20_000) -> np.ndarray:
    return np.concatenate([f.jacobian(pts[s:s + chunk]) for s in range(0, len(pts), chunk)])


def benettin_exponents(f: SmoothMap, x0, n: int, renorm_every: int = 1, transient: int = 100) -> ExponentEstimate:
    """Lyapunov exponents from n steps of the QR-renormalized differential cocycle.

    The frame is first aligned during ``transient`` discarded steps, which
    removes the O(1/n) bias from the initial frame orientation.
    """
    if n < 100:
        raise InvalidInput("need n >= 100")
    if renorm_every < 1 or transient < 0:
        raise InvalidInput("renorm_every must be at least 1 and transient nonnegative")
    x0 = np.asarray(x0, dtype=float)
    J = np.ascontiguousarray(_jacobians_along(f, orbit(f, x0, n + transient)))
    Q = np.eye(3)
    if transient:
        Q, status = _align(J[:transient], renorm_every)
        if status:
            raise Underflow("frame degenerated; renormalize more often")
    logs, trace, status = _qr_logs(J[transient:], Q, renorm_every)
    if status:
        raise Underflow("frame degenerated; renormalize more often")
    ex = np.sort(logs / n)[::-1]
    return ExponentEstimate(ex, n, trace, x0)


@dataclass
class SplittingEstimate:
    x: np.ndarray
    uu: np.ndarray
    cs_normal: np.ndarray
    n: int
    bound: float


def _angle(a, b) -> np.ndarray:
    c = np.abs(np.sum(a * b, axis=-1)) / (np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1))
    return np.arccos(np.clip(c, 0.0, 1.0))


def _push(f: SmoothMap, x, n: int, v0=None):
    """E^uu at x from a vector pushed along the backward orbit of length n."""
    back = [np.asarray(x, float)]
    for _ in range(n):
        back.append(f.inverse(back[-1]))
    v = np.array([0.5773, 0.5774, 0.5775]) if v0 is None else np.asarray(v0, float)
    for y in reversed(back[1:]):
        v = f.jacobian(y) @ v
        v /= np.linalg.norm(v)
    return v


def _pull(f: SmoothMap, x, n: int):
    """Normal of E^cs at x: adjoint cocycle applied along the forward orbit."""
    fw = orbit(f, np.asarray(x, float), n)
    J = _jacobians_along(f, fw)
    w = np.array([0.5775, 0.5774, 0.5773])
    for k in range(n - 1, -1, -1):
        w = J[k].T @ w
        w /= np.linalg.norm(w)
    return w


def oseledets_directions(f: SmoothMap, x, n: int = 40, tol: float = 1e-3) -> SplittingEstimate:
    """E^uu direction and E^cs normal at x; the bound compares horizons n and n/2."""
    if n < 20:
        raise InvalidInput("need n >= 20")
    x = np.asarray(x, dtype=float)
    uu, uu_half = _push(f, x, n), _push(f, x, n // 2)
    nn, nn_half = _pull(f, x, n), _pull(f, x, n // 2)
    bound = float(max(_angle(uu, uu_half), _angle(nn, nn_half)))
    if bound > tol:
        raise Inconclusive(f"direction estimates moved by {bound:.3g} rad between horizons", bound)
    return SplittingEstimate(x, uu, nn, n, bound)


@njit(cache=True)
def _pull_normals(J, w0):
    n = J.shape[0]
    out = np.empty((n, 3))
    w = w0.copy()
    for k in range(n - 1, -1, -1):
        w = J[k].T @ w
        w /= np.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
        out[k] = w
    return out


def restricted_norm(J: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """Largest singular value of each J restricted to the plane orthogonal to its normal."""
    nrm = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    # orthonormal basis of the plane from a helper axis not parallel to the normal
    helper = np.zeros_like(nrm)
    helper[np.arange(len(nrm)), np.argmin(np.abs(nrm), axis=1)] = 1.0
    b1 = np.cross(nrm, helper)
    b1 /= np.linalg.norm(b1, axis=1, keepdims=True)
    b2 = np.cross(nrm, b1)
    B = np.stack([b1, b2], axis=2)
    M = J @ B
    return np.linalg.svd(M, compute_uv=False)[:, 0]


def cs_birkhoff_average(f: SmoothMap, x0, n: int, extra: int = 40) -> float:
    """(1/n) sum_j log |Df(f^j x0) restricted to E^cs(f^j x0)|.

    E^cs normals come from one backward adjoint pass over an orbit extended by
    ``extra`` steps, so every normal has converged for at least that horizon.
    """
    if n < 1:
        raise InvalidInput("n must be positive")
    pts = orbit(f, np.asarray(x0, float), n + extra)
    J = _jacobians_along(f, pts)
    normals = _pull_normals(np.ascontiguousarray(J), np.array([0.5775, 0.5774, 0.5773]))
    r = restricted_norm(J[:n], normals[:n])
    return float(np.mean(np.log(r)))


def cs_birkhoff_ensemble(f: SmoothMap, X0: np.ndarray, n: int, extra: int = 40) -> np.ndarray:
    """Vectorized :func:`cs_birkhoff_average` over initial points ``X0``."""
    X0 = np.atleast_2d(np.asarray(X0, float))
    E = len(X0)
    x = X0.copy()
    Js = np.empty((n + extra, E, 3, 3))
    for k in range(n + extra):
        Js[k] = f.jacobian(x)
        x = f(x)
    w = np.broadcast_to(np.array([0.5775, 0.5774, 0.5773]), (E, 3)).copy()
    acc = np.zeros(E)
    for k in range(n + extra - 1, -1, -1):
        w = np.einsum("nji,nj->ni", Js[k], w)
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        if k < n:
            acc += np.log(restricted_norm(Js[k], w))
    return acc / n


@dataclass
class Survey:
    exponents: np.ndarray  # (ensemble, 3)
    histograms: list
    nuh_fraction: float
    delta: float
    n: int
    seed: int

    def summary(self) -> dict:
        e = self.exponents
        return {"n": self.n, "ensemble": len(e), "seed": self.seed, "delta_nuh": self.delta,
                "nuh_fraction": self.nuh_fraction, "mean": e.mean(axis=0).tolist(),
                "std": e.std(axis=0).tolist(), "min": e.min(axis=0).tolist(), "max": e.max(axis=0).tolist()}


@njit(cache=True)
def _qr_batch_step(J, Q, logs):
    """One Gram-Schmidt renormalization of a batch of frames after applying J."""
    E = J.shape[0]
    for e in range(E):
        M = J[e] @ Q[e]
        for j in range(3):
            r = 1.0
            for _pass in range(2):
                for i in range(j):
                    c = 0.0
                    for m in range(3):
                        c += M[m, i] * M[m, j]
                    for m in range(3):
                        M[m, j] -= c * M[m, i]
                s = np.sqrt(M[0, j] ** 2 + M[1, j] ** 2 + M[2, j] ** 2)
                r *= s
                for m in range(3):
                    M[m, j] /= s
            logs[e, j] += np.log(r)
        Q[e] = M


def ensemble_exponents(f: SmoothMap, X0: np.ndarray, n: int, transient: int = 100) -> np.ndarray:
    """QR exponents for a batch of initial points, advancing all orbits together."""
    X0 = np.atleast_2d(np.asarray(X0, float))
    E = len(X0)
    Q = np.broadcast_to(np.eye(3), (E, 3, 3)).copy()
    logs = np.zeros((E, 3))
    x = X0.copy()
    for k in range(n + transient):
        if k == transient:
            logs[:] = 0.0
        _qr_batch_step(np.ascontiguousarray(f.jacobian(x)), Q, logs)
        x = f(x)
    return np.sort(logs / n, axis=1)[:, ::-1]


def exponent_survey(f: SmoothMap, ensemble_size: int, n: int, seed: int = 0, delta: float = DELTA_NUH,
                    bins: int = 20) -> Survey:
    """Exponent distribution over Sobol initial points and the fraction with |lambda_2| > delta."""
    if ensemble_size < 10:
        raise InvalidInput("ensemble_size must be at least 10")
    X0 = sobol(ensemble_size, 3, seed)
    ex = ensemble_exponents(f, X0, n)
    hists = []
    for k in range(3):
        lo, hi = ex[:, k].min(), ex[:, k].max()
        pad = max(1e-9 * max(abs(lo), abs(hi)), 1e-12)
        hists.append(np.histogram(ex[:, k], bins=bins, range=(lo - pad, hi + pad)))
    nuh = float(np.mean(np.abs(ex[:, 1]) > delta))
    return Survey(ex, hists, nuh, delta, n, seed)


def in_cone(cone: ConeSpec, v) -> bool:
    w = cone.frame.T @ np.asarray(v, float)
    return bool(np.hypot(w[1], w[2]) <= cone.gamma * abs(w[0]))
