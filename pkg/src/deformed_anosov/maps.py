"""Volume-preserving self-maps of T^3: evaluation, exact differential, inverse.

Two families live here.  :class:`SmoothMap` objects act on torus points
(arrays of shape ``(N, 3)`` in [0, 1)).  :class:`LocalMap` objects act on
chart coordinates around a fixed point and agree with a linear map outside a
compact support; :func:`apply_surgery` glues one into a torus map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInput, NotHyperbolic, NotVolumePreserving, SurgeryMismatch
from .geometry import CHART_LIMIT, ball_points, displacement, symmetric_eigenframe, wrap_array


def _batch(points) -> tuple[np.ndarray, bool]:
    a = np.asarray(points, dtype=float)
    if a.ndim == 1:
        return a.reshape(1, 3), True
    if a.ndim != 2 or a.shape[1] != 3:
        raise InvalidInput(f"expected shape (3,) or (N, 3), got {a.shape}")
    return a, False


@dataclass(frozen=True)
class Support:
    """Where a map may differ from its base: everywhere linear, or inside a ball."""

    kind: str  # "global linear" | "linear outside ball"
    center: np.ndarray | None = None
    radius: float = 0.0


class SmoothMap:
    """A self-map of T^3 with exact differential and inverse.

    Subclasses implement ``_eval``, ``_jac`` and ``_inv`` on ``(N, 3)`` arrays.
    """

    label: str = "map"
    support: Support = Support("global linear")

    def __call__(self, points) -> np.ndarray:
        P, single = _batch(points)
        out = self._eval(P)
        return out[0] if single else out

    def jacobian(self, points) -> np.ndarray:
        P, single = _batch(points)
        out = self._jac(P)
        return out[0] if single else out

    def inverse(self, points) -> np.ndarray:
        P, single = _batch(points)
        out = self._inv(P)
        return out[0] if single else out

    def linear_radius(self, center) -> float:
        """Radius of a ball around ``center`` on which the map is exactly affine (0 if unknown)."""
        return 0.0

    def iterate(self, points, n: int) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        step = self if n >= 0 else self.inverse
        for _ in range(abs(n)):
            x = step(x)
        return x

    def _eval(self, P):
        raise NotImplementedError

    def _jac(self, P):
        raise NotImplementedError

    def _inv(self, P):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


class MatrixMap(SmoothMap):
    """x -> M x (mod 1) for an arbitrary invertible real matrix.

    Only integer matrices descend to the torus; other matrices serve as
    constant-cocycle models for the differential-based checks.
    """

    def __init__(self, matrix, label: str | None = None):
        M = np.asarray(matrix, dtype=float)
        if M.shape != (3, 3) or abs(np.linalg.det(M)) < 1e-300:
            raise InvalidInput("need an invertible 3x3 matrix")
        self.matrix = M
        self._Minv = np.linalg.inv(M)
        self.label = label or f"matrix {M.tolist()}"
        self.support = Support("global linear")

    def _eval(self, P):
        return wrap_array(P @ self.matrix.T)

    def _jac(self, P):
        return np.broadcast_to(self.matrix, (P.shape[0], 3, 3)).copy()

    def _inv(self, P):
        return wrap_array(P @ self._Minv.T)

    def linear_radius(self, center) -> float:
        return CHART_LIMIT


class TorusAutomorphism(SmoothMap):
    """x -> A x mod 1 for an integer matrix with determinant 1."""

    def __init__(self, matrix, label: str | None = None):
        A = np.asarray(matrix)
        if A.shape != (3, 3) or not np.all(np.equal(np.round(A), A)):
            raise InvalidInput("toral automorphism needs a 3x3 integer matrix")
        A = np.round(A).astype(np.int64)
        det = round(np.linalg.det(A))
        if det != 1:
            raise NotVolumePreserving(f"det = {det}, expected 1")
        self.matrix = A
        self._A = A.astype(float)
        self._Ainv = np.round(np.linalg.inv(self._A))
        if not np.array_equal(self._Ainv @ self._A, np.eye(3)):
            raise InvalidInput("integer inverse failed")
        self.label = label or f"linear {A.tolist()}"
        self.support = Support("global linear")

    def _eval(self, P):
        return wrap_array(P @ self._A.T)

    def _jac(self, P):
        return np.broadcast_to(self._A, (P.shape[0], 3, 3)).copy()

    def _inv(self, P):
        return wrap_array(P @ self._Ainv.T)

    def linear_radius(self, center) -> float:
        return CHART_LIMIT

    def power(self, n: int) -> "TorusAutomorphism":
        M = np.linalg.matrix_power(self.matrix, n) if n >= 0 else np.linalg.matrix_power(
            np.round(self._Ainv).astype(np.int64), -n)
        return TorusAutomorphism(M, label=f"({self.label})^{n}")


@dataclass(frozen=True)
class IntegerMatrixSpec:
    entries: tuple

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.entries, dtype=np.int64)


def _check_integer(spec, size: int) -> np.ndarray:
    M = np.asarray(spec.matrix if isinstance(spec, IntegerMatrixSpec) else spec)
    if M.shape != (size, size) or not np.all(np.equal(np.round(M), M)):
        raise InvalidInput(f"expected a {size}x{size} integer matrix")
    M = np.round(M).astype(np.int64)
    det = round(np.linalg.det(M))
    if det != 1:
        raise NotVolumePreserving(f"det = {det}, expected 1")
    return M


def linear_anosov(spec, validate_anosov: bool = True) -> TorusAutomorphism:
    M = _check_integer(spec, 3)
    if validate_anosov:
        mods = np.abs(np.linalg.eigvals(M.astype(float)))
        if np.any(np.abs(mods - 1.0) <= 1e-9):
            raise NotHyperbolic(f"eigenvalue moduli {sorted(mods)} include 1")
    return TorusAutomorphism(M)


def product_with_identity(spec2d) -> TorusAutomorphism:
    """h(x, y, z) = (g(x, y), z) for a hyperbolic 2x2 block g."""
    M = _check_integer(spec2d, 2)
    mods = np.abs(np.linalg.eigvals(M.astype(float)))
    if np.any(np.abs(mods - 1.0) <= 1e-9):
        raise NotHyperbolic("2x2 block is not hyperbolic")
    A = np.eye(3, dtype=np.int64)
    A[:2, :2] = M
    return TorusAutomorphism(A, label=f"{M.tolist()} x Id")


class ComposedMap(SmoothMap):
    """outer o inner."""

    def __init__(self, outer: SmoothMap, inner: SmoothMap):
        self.outer = outer
        self.inner = inner
        self.label = f"({outer.label}) o ({inner.label})"
        self.support = inner.support if outer.support.kind == "global linear" else outer.support

    def _eval(self, P):
        return self.outer._eval(self.inner._eval(P))

    def _jac(self, P):
        return self.outer._jac(self.inner._eval(P)) @ self.inner._jac(P)

    def _inv(self, P):
        return self.inner._inv(self.outer._inv(P))

    def linear_radius(self, center) -> float:
        r_in = self.inner.linear_radius(center)
        if r_in <= 0:
            return 0.0
        c2 = self.inner(center)
        stretch = np.linalg.norm(self.inner.jacobian(center), 2)
        return min(r_in, self.outer.linear_radius(c2) / stretch)


def compose(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """f o g; two automorphisms compose to an automorphism."""
    if isinstance(f, TorusAutomorphism) and isinstance(g, TorusAutomorphism):
        return TorusAutomorphism(f.matrix @ g.matrix, label=f"({f.label}) o ({g.label})")
    return ComposedMap(f, g)


# ----------------------------------------------------------------------------
# local maps in chart coordinates


class LocalMap:
    """A map of R^3 equal to the linear map ``linear`` outside ``support_radius``.

    ``core_radius``/``core_matrix`` describe a ball around 0 on which the map
    is exactly linear.  Inputs and outputs are ``(N, 3)`` arrays.
    """

    linear: np.ndarray
    support_radius: float
    core_radius: float = 0.0
    core_matrix: np.ndarray | None = None
    label: str = "local"

    def __call__(self, U) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, U) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, V) -> np.ndarray:
        return newton_inverse(self, V)


class LinearLocal(LocalMap):
    def __init__(self, M, label: str = "linear"):
        self.linear = np.asarray(M, dtype=float)
        self._inv = np.linalg.inv(self.linear)
        self.support_radius = 0.0
        self.core_radius = np.inf
        self.core_matrix = self.linear
        self.label = label

    def __call__(self, U):
        return np.asarray(U) @ self.linear.T

    def jacobian(self, U):
        return np.broadcast_to(self.linear, (len(U), 3, 3)).copy()

    def inverse(self, V):
        return np.asarray(V) @ self._inv.T


class LocalComposition(LocalMap):
    """outer o inner for local maps."""

    def __init__(self, outer: LocalMap, inner: LocalMap, label: str | None = None):
        self.outer, self.inner = outer, inner
        self.linear = outer.linear @ inner.linear
        inv_in = np.linalg.norm(np.linalg.inv(inner.linear), 2)
        self.support_radius = max(inner.support_radius, outer.support_radius * inv_in)
        C = inner.core_matrix if inner.core_matrix is not None else inner.linear
        stretch = np.linalg.norm(C, 2)
        self.core_radius = min(inner.core_radius, outer.core_radius / stretch)
        oc = outer.core_matrix if outer.core_matrix is not None else outer.linear
        self.core_matrix = oc @ C
        self.label = label or f"{outer.label} o {inner.label}"

    def __call__(self, U):
        return self.outer(self.inner(U))

    def jacobian(self, U):
        return self.outer.jacobian(self.inner(U)) @ self.inner.jacobian(U)

    def inverse(self, V):
        return self.inner.inverse(self.outer.inverse(V))


class CallableLocal(LocalMap):
    """Wrap user functions as a local map; inverse falls back to Newton iteration."""

    def __init__(self, fn: Callable, jac: Callable, linear, support_radius: float,
                 inverse: Callable | None = None, label: str = "callable"):
        self._fn, self._jac, self._invfn = fn, jac, inverse
        self.linear = np.asarray(linear, dtype=float)
        self.support_radius = float(support_radius)
        self.label = label

    def __call__(self, U):
        return self._fn(np.asarray(U, dtype=float))

    def jacobian(self, U):
        return self._jac(np.asarray(U, dtype=float))

    def inverse(self, V):
        if self._invfn is not None:
            return self._invfn(np.asarray(V, dtype=float))
        return newton_inverse(self, V)


def newton_inverse(local: LocalMap, V, tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Damped Newton solve of ``local(U) = V`` seeded by the linear inverse."""
    V = np.asarray(V, dtype=float)
    U = V @ np.linalg.inv(local.linear).T
    for _ in range(max_iter):
        R = local(U) - V
        err = np.abs(R).max(axis=1) if len(R) else np.zeros(0)
        if not np.any(err > tol):
            return U
        step = np.linalg.solve(local.jacobian(U), R[..., None])[..., 0]
        t = np.ones(len(U))
        for _ in range(20):
            trial = U - t[:, None] * step
            better = np.abs(local(trial) - V).max(axis=1) < err
            if better.all():
                break
            t = np.where(better, t, 0.5 * t)
        U = U - t[:, None] * step
    raise SurgeryMismatch("Newton inverse of the local map did not converge")


@dataclass
class LocalSurgerySpec:
    """Replace a map near its fixed point ``center`` by a local model.

    The chart is ``x = center + frame @ u`` with an orthonormal ``frame``; the
    local map must equal the chart linearization of the base map for
    ``|u| >= radius``.  ``post`` (integer matrix) is applied after the local
    map, used for periodic orbits.
    """

    center: np.ndarray
    radius: float
    local: LocalMap
    frame: np.ndarray
    post: np.ndarray | None = None
    agrees_outside: bool = True


class SurgeredMap(SmoothMap):
    """Base map with the local model glued in on the chart ball.

    Inside the ball the image is ``base(x) + post Q (F(u) - F0 u)``; outside it
    the base is evaluated untouched, so the two agree there bit for bit.
    """

    def __init__(self, base: SmoothMap, spec: LocalSurgerySpec, label: str | None = None):
        self.base = base
        self.center = np.asarray(spec.center, dtype=float)
        self.radius = float(spec.radius)
        self.frame = np.asarray(spec.frame, dtype=float)
        self.local = spec.local
        self.post = np.eye(3) if spec.post is None else np.asarray(spec.post, dtype=float)
        self._post_inv = np.round(np.linalg.inv(self.post))
        self._F0 = spec.local.linear
        # exact chart matrix of the base on the ball (pre-post)
        self._chart_base = self.frame.T @ self._post_inv @ base.jacobian(self.center) @ self.frame
        self._M = self.post @ self.frame  # chart correction -> ambient
        self.label = label or f"surgery[{spec.local.label}] on {base.label}"
        self.support = Support("linear outside ball", self.center.copy(), self.radius)

    def _inside(self, P):
        d = displacement(self.center, P)
        return d, np.einsum("ij,ij->i", d, d) < self.radius**2

    def _eval(self, P):
        out = self.base._eval(P)
        d, inside = self._inside(P)
        if inside.any():
            U = d[inside] @ self.frame
            corr = self.local(U) - U @ self._F0.T
            out[inside] = wrap_array(out[inside] + corr @ self._M.T)
        return out

    def _jac(self, P):
        J = self.base._jac(P)
        d, inside = self._inside(P)
        if inside.any():
            U = d[inside] @ self.frame
            DL = self.local.jacobian(U) - self._F0
            J[inside] = J[inside] + self._M @ DL @ self.frame.T
        return J

    def _inv(self, P):
        X0 = self.base._inv(P)
        d0, inside = self._inside(X0)
        if inside.any():
            U0 = d0[inside] @ self.frame
            U = self.local.inverse(U0 @ self._chart_base.T)
            X0[inside] = wrap_array(self.center + U @ self.frame.T)
        return X0

    def linear_radius(self, center) -> float:
        dist = float(np.linalg.norm(displacement(self.center, center)))
        if dist < 1e-14 and np.allclose(self.post, np.eye(3)):
            return min(self.local.core_radius, self.radius)
        if dist >= self.radius:
            return min(self.base.linear_radius(center), dist - self.radius)
        return 0.0

    def chart_matrix(self) -> np.ndarray:
        """Matrix of the map in chart coordinates on its linear core."""
        return self.local.core_matrix


def apply_surgery(base: SmoothMap, spec: LocalSurgerySpec, shell_samples: int = 512,
                  shell_width: float = 0.05, tol: float = 1e-9, seed: int = 0) -> SmoothMap:
    """Glue ``spec.local`` into ``base`` on the ball of radius ``spec.radius``.

    Raises :class:`SurgeryMismatch` when the base is not linear on the ball,
    when the local linear part is not the base's chart linearization, or when
    the local map differs from it on the outer shell of the ball.
    """
    p = np.asarray(spec.center, dtype=float)
    if spec.radius <= 0 or spec.radius >= CHART_LIMIT:
        raise InvalidInput("surgery radius must lie in (0, 1/2)")
    Q = np.asarray(spec.frame, dtype=float)
    if not np.allclose(Q.T @ Q, np.eye(3), atol=1e-12):
        raise InvalidInput("chart frame must be orthonormal")
    if base.linear_radius(p) < spec.radius - 1e-15:
        raise SurgeryMismatch(
            f"base map is not known to be linear on B({spec.radius}) around the chart center "
            f"(linear radius {base.linear_radius(p):.3g}); overlapping surgeries are rejected")
    post_inv = np.eye(3) if spec.post is None else np.linalg.inv(spec.post)
    chart = Q.T @ post_inv @ base.jacobian(p) @ Q
    if np.abs(chart - spec.local.linear).max() > tol:
        raise SurgeryMismatch("local linear part differs from the base chart linearization")
    if spec.local.support_radius > spec.radius:
        raise SurgeryMismatch(
            f"local support radius {spec.local.support_radius:.4g} exceeds the chart ball {spec.radius:.4g}")
    U = ball_points(shell_samples, np.zeros(3), spec.radius, seed=seed,
                    shell=(spec.radius * (1 - shell_width), spec.radius))
    # ball_points wraps into [0,1); undo the wrap for chart coordinates
    U = U - np.floor(U + 0.5)
    dev = np.abs(spec.local(U) - U @ spec.local.linear.T).max()
    if dev > tol:
        raise SurgeryMismatch(f"local map differs from its linearization on the shell by {dev:.3g}")
    return SurgeredMap(base, spec)


def eigenframe_of(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (decreasing) and orthonormal eigenframe of a symmetric matrix."""
    return symmetric_eigenframe(np.asarray(A, dtype=float))
