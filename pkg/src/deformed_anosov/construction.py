"""Local deformation of a linear hyperbolic fixed point into a map with a complex stable pair.

Pipeline, all in orthonormal chart coordinates (u, v, w) around a fixed point p
whose linearization is diag(mu, rho, lam):

1. two linear-core bump profiles and the Hamiltonian shear flow phi_t they
   generate, with time-1 core action diag(1/eta, eta);
2. F1(x, y, z) = (mu x, a g(x, y/a, z/a)) with g(x, y, z) = phi_{t(x)}(rho y, lam z)
   and a C2 time ramp t, so DF1(0) = diag(mu, mu^-1/2, mu^-1/2);
3. cone parameters (gamma, xi) certifying DF1 C_gamma inside C_xi;
4. F = F1 o Rot, where Rot twists the (v, w) plane by a localized angle;
5. gluing into the torus map, optionally along a periodic orbit.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (AdjustmentBreaksOrder, BallsNotDisjoint, ConeGapInfeasible, ConstructionInconsistent,
                     InvalidInput, NotPeriodic, RotationTooLarge, ScaleTooLarge)
from .geometry import CHART_LIMIT, ConeSpec, displacement, image_ratios, rotation_2d, sobol, symmetric_eigenframe
from .maps import (LinearLocal, LocalComposition, LocalMap, LocalSurgerySpec, SmoothMap,
                   TorusAutomorphism, apply_surgery)
from .profiles import BumpProfile, ShearFlow, TimeRamp, build_bump

SENTINEL_TOL = 1e-9


@dataclass(frozen=True)
class SpectrumTriple:
    """Eigenvalues mu > 1 > rho > lam > 0 of a volume-preserving linearization."""

    mu: float
    rho: float
    lam: float

    def __post_init__(self):
        if not (0.0 < self.lam < self.rho < 1.0 < self.mu):
            raise InvalidInput(f"need 0 < lam < rho < 1 < mu, got {self.mu}, {self.rho}, {self.lam}")
        if abs(self.mu * self.rho * self.lam - 1.0) > 1e-12:
            raise InvalidInput("mu * rho * lam must equal 1")

    @classmethod
    def from_values(cls, values) -> "SpectrumTriple":
        v = np.sort(np.asarray(values, dtype=float))[::-1]
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_tuple(self):
        return (self.mu, self.rho, self.lam)


def solve_eta(s: SpectrumTriple) -> float:
    """Shear rate eta with rho / eta = lam * eta = mu^(-1/2)."""
    return 1.0 / (s.lam * math.sqrt(s.mu))


# ----------------------------------------------------------------------------
# local maps


class PlaneShear(LocalMap):
    """Time-t(U_k) shear flow acting on two chart axes, rescaled by ``scale``.

    ``U[axes] -> scale * phi_{t(U[k])}(U[axes] / scale)``; the remaining
    coordinate ``k`` is unchanged, so the Jacobian determinant equals that of
    the flow map, i.e. 1.
    """

    def __init__(self, shear: ShearFlow, ramp: TimeRamp, axes=(1, 2), ramp_axis: int = 0,
                 scale: float = 1.0, label: str = "plane shear"):
        if sorted((*axes, ramp_axis)) != [0, 1, 2]:
            raise InvalidInput("axes and ramp axis must be a permutation of (0, 1, 2)")
        if scale <= 0:
            raise InvalidInput("scale must be positive")
        self.shear, self.ramp = shear, ramp
        self.axes, self.k, self.scale = tuple(axes), ramp_axis, float(scale)
        self.linear = np.eye(3)
        half = np.zeros(3)
        half[self.k] = ramp.support
        half[self.axes[0]] = scale * shear.psi1.support
        half[self.axes[1]] = scale * shear.psi2.support
        self.half_widths = half
        self.support_radius = 0.0 if shear.trivial else float(np.linalg.norm(half))
        c = shear.psi1.slope * shear.psi2.slope
        core = min(ramp.core,
                   scale * shear.psi1.core / max(1.0, math.exp(c)),
                   scale * shear.psi2.core / max(1.0, math.exp(-c)))
        self.core_radius = np.inf if shear.trivial else core
        M = np.eye(3)
        M[self.axes[0], self.axes[0]] = math.exp(c)
        M[self.axes[1], self.axes[1]] = math.exp(-c)
        self.core_matrix = M
        self.label = label

    def _active(self, U):
        if self.shear.trivial:
            return np.zeros(len(U), dtype=bool)
        return np.all(np.abs(U) < self.half_widths, axis=1)

    def _run(self, U, sign, jac):
        i, j = self.axes
        t = sign * self.ramp(U[:, self.k])
        y, z, M = self.shear.flow(t, U[:, i] / self.scale, U[:, j] / self.scale, jacobian=jac)
        return t, y, z, M

    def __call__(self, U):
        U = np.asarray(U, dtype=float)
        out = U.copy()
        act = self._active(U)
        if act.any():
            _, y, z, _ = self._run(U[act], 1.0, False)
            out[np.ix_(act, self.axes)] = self.scale * np.stack([y, z], axis=1)
        return out

    def jacobian(self, U):
        U = np.asarray(U, dtype=float)
        J = np.broadcast_to(np.eye(3), (len(U), 3, 3)).copy()
        act = self._active(U)
        if act.any():
            W = U[act]
            _, y, z, M = self._run(W, 1.0, True)
            X = self.shear.field(y, z)
            dt = self.ramp.derivative(W[:, self.k])
            i, j = self.axes
            Ja = np.broadcast_to(np.eye(3), (len(W), 3, 3)).copy()
            Ja[:, i, i], Ja[:, i, j] = M[:, 0, 0], M[:, 0, 1]
            Ja[:, j, i], Ja[:, j, j] = M[:, 1, 0], M[:, 1, 1]
            Ja[:, i, self.k] = self.scale * X[:, 0] * dt
            Ja[:, j, self.k] = self.scale * X[:, 1] * dt
            J[act] = Ja
        return J

    def inverse(self, V):
        V = np.asarray(V, dtype=float)
        out = V.copy()
        # the support square is invariant under the flow, so the active set is the same
        act = self._active(V)
        if act.any():
            _, y, z, _ = self._run(V[act], -1.0, False)
            out[np.ix_(act, self.axes)] = self.scale * np.stack([y, z], axis=1)
        return out


class RampedShear(LocalMap):
    """F1(x, y, z) = (mu x, a g(x, y/a, z/a)), g(x, y, z) = phi_{t(x)}(rho y, lam z)."""

    def __init__(self, spectrum: SpectrumTriple, shear: ShearFlow, ramp: TimeRamp, a: float):
        self.spectrum, self.shear, self.ramp, self.a = spectrum, shear, ramp, float(a)
        mu, rho, lam = spectrum.as_tuple()
        self._pre = np.diag([1.0, rho, lam])
        self._post = np.diag([mu, 1.0, 1.0])
        self._ps = PlaneShear(shear, ramp, axes=(1, 2), ramp_axis=0, scale=a, label="g")
        self.linear = np.diag([mu, rho, lam])
        hw = self._ps.half_widths / np.array([1.0, rho, lam])
        self.half_widths = hw
        self.support_radius = 0.0 if shear.trivial else float(np.linalg.norm(hw))
        c = self._ps.core_matrix
        self.core_matrix = self._post @ c @ self._pre
        ey, ez = c[1, 1], c[2, 2]
        self.core_radius = np.inf if shear.trivial else min(
            ramp.core, a * shear.psi1.core / (rho * max(1.0, ey)), a * shear.psi2.core / (lam * max(1.0, ez)))
        self.K = float("nan")
        self.label = "F1"

    def __call__(self, U):
        return self._ps(np.asarray(U, dtype=float) @ self._pre) @ self._post

    def jacobian(self, U):
        return self._post @ self._ps.jacobian(np.asarray(U, dtype=float) @ self._pre) @ self._pre

    def inverse(self, V):
        W = self._ps.inverse(np.asarray(V, dtype=float) / np.diag(self._post))
        return W / np.diag(self._pre)

    def g(self, X):
        """g(x, y, z) in unscaled coordinates; returns the (y, z) part."""
        X = np.asarray(X, dtype=float)
        t = self.ramp(X[:, 0])
        mu, rho, lam = self.spectrum.as_tuple()
        y, z, _ = self.shear.flow(t, rho * X[:, 1], lam * X[:, 2], jacobian=False)
        return np.stack([y, z], axis=1)

    def g_x(self, X) -> np.ndarray:
        """x-derivative (g1_x, g2_x) = X(phi_t(q)) t'(x)."""
        X = np.asarray(X, dtype=float)
        t = self.ramp(X[:, 0])
        dt = self.ramp.derivative(X[:, 0])
        mu, rho, lam = self.spectrum.as_tuple()
        y, z, _ = self.shear.flow(t, rho * X[:, 1], lam * X[:, 2], jacobian=False)
        return self.shear.field(y, z) * dt[:, None]


class TwistRotation(LocalMap):
    """Rot(x, y, z) = (x, R_{Theta(r)}(y, z)) with r = |(x, y, z)|.

    Theta equals ``theta`` on r <= plateau and 0 for r >= support.  For fixed x
    the map rotates each circle of the (y, z) plane rigidly, so it preserves
    area and r; the inverse rotates back by the same angle.
    """

    def __init__(self, theta: float, plateau: float, support: float):
        self.theta = float(theta)
        self.profile = TimeRamp(support, plateau)
        self.linear = np.eye(3)
        self.support_radius = 0.0 if theta == 0 else float(support)
        self.core_radius = np.inf if theta == 0 else float(plateau)
        M = np.eye(3)
        M[1:, 1:] = rotation_2d(self.theta)
        self.core_matrix = M
        self.label = f"Rot({self.theta:g})"

    def angle(self, U):
        r = np.linalg.norm(U, axis=1)
        e = self.profile.evaluate(r)
        return self.theta * e[:, 0], self.theta * e[:, 1], r

    def _rotate(self, U, sign):
        U = np.asarray(U, dtype=float)
        if self.theta == 0:
            return U.copy()
        th, _, _ = self.angle(U)
        c, s = np.cos(sign * th), np.sin(sign * th)
        out = U.copy()
        out[:, 1] = c * U[:, 1] - s * U[:, 2]
        out[:, 2] = s * U[:, 1] + c * U[:, 2]
        return out

    def __call__(self, U):
        return self._rotate(U, 1.0)

    def inverse(self, V):
        return self._rotate(V, -1.0)

    def jacobian(self, U):
        U = np.asarray(U, dtype=float)
        n = len(U)
        J = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
        if self.theta == 0:
            return J
        th, dth, r = self.angle(U)
        c, s = np.cos(th), np.sin(th)
        with np.errstate(invalid="ignore", divide="ignore"):
            grad = np.where(r[:, None] > 0, dth[:, None] * U / r[:, None], 0.0)
        y, z = U[:, 1], U[:, 2]
        # d/dTheta of R(y, z) = (-s y - c z, c y - s z)
        ry = -s * y - c * z
        rz = c * y - s * z
        J[:, 1, 1], J[:, 1, 2] = c, -s
        J[:, 2, 1], J[:, 2, 2] = s, c
        J[:, 1, :] += ry[:, None] * grad
        J[:, 2, :] += rz[:, None] * grad
        return J


# ----------------------------------------------------------------------------
# certificates


@dataclass
class ConeCertificate:
    gamma: float
    xi: float
    worst_ratio: float
    worst_point: list
    n_points: int
    n_boundary: int

    @property
    def margin(self) -> float:
        return (self.xi - self.worst_ratio) / self.xi

    @property
    def holds(self) -> bool:
        return self.worst_ratio <= self.xi


def _support_samples(local: LocalMap, n: int, seed: int, radius: float | None = None) -> np.ndarray:
    """Sobol points in the ball of the local support (plus its core)."""
    R = radius if radius is not None else max(local.support_radius, 1e-12)
    u = sobol(n, 3, seed)
    r = R * np.cbrt(u[:, 0])
    cz = 1 - 2 * u[:, 1]
    phi = 2 * np.pi * u[:, 2]
    sz = np.sqrt(np.clip(1 - cz**2, 0, None))
    return np.stack([sz * np.cos(phi), sz * np.sin(phi), cz], axis=1) * r[:, None]


def local_cone_certificate(local: LocalMap, gamma: float, xi: float, n_points: int, n_boundary: int,
                           seed: int = 0, chunk: int = 4096) -> ConeCertificate:
    """Worst sampled image ratio of C_gamma under the local differential."""
    U = _support_samples(local, n_points, seed)
    cone = ConeSpec(gamma)
    worst, where = -np.inf, None
    for s in range(0, len(U), chunk):
        r = image_ratios(local.jacobian(U[s:s + chunk]), cone, n_boundary)
        k = int(np.argmax(r))
        if r[k] > worst:
            worst, where = float(r[k]), U[s + k].tolist()
    # the linear part holds everywhere outside the support
    lin = float(image_ratios(local.linear[None], cone, n_boundary)[0])
    if lin > worst:
        worst, where = lin, None
    return ConeCertificate(gamma, xi, worst, where, n_points, n_boundary)


def cone_interval(mu: float, rho: float, gamma: float, aK: float) -> tuple[float, float]:
    """Admissible open interval ((aK + rho gamma) / mu, gamma) for the image aperture."""
    lo = (aK + rho * gamma) / mu
    if not lo < gamma:
        raise ConeGapInfeasible(
            f"(aK + rho gamma)/mu = {lo:.4g} >= gamma = {gamma:.4g}; shrink a or enlarge gamma")
    return lo, gamma


def derive_cone_parameters(F1: RampedShear, gamma: float, n_points: int = 4000, n_boundary: int = 64,
                           seed: int = 0) -> tuple[float, ConeCertificate]:
    """Midpoint xi of the admissible interval, certified by sampling DF1."""
    s = F1.spectrum
    lo, hi = cone_interval(s.mu, s.rho, gamma, F1.a * F1.K)
    xi = 0.5 * (lo + hi)
    cert = local_cone_certificate(F1, gamma, xi, n_points, n_boundary, seed)
    if not cert.holds:
        raise ConeGapInfeasible(f"sampled aperture {cert.worst_ratio:.4g} exceeds xi = {xi:.4g}")
    return xi, cert


# ----------------------------------------------------------------------------
# building blocks


def measure_K(F1: RampedShear, n_samples: int = 100_000, seed: int = 0) -> float:
    """max |g_x| over a dense sample of the region where t'(x) != 0."""
    if F1.shear.trivial:
        return 0.0
    mu, rho, lam = F1.spectrum.as_tuple()
    u = sobol(n_samples, 3, seed)
    r, sh = F1.ramp, F1.shear
    x = np.where(u[:, 0] < 0.5, -1, 1) * (r.core + (r.support - r.core) * (2 * u[:, 0] % 1.0))
    y = (2 * u[:, 1] - 1) * sh.psi1.support / rho
    z = (2 * u[:, 2] - 1) * sh.psi2.support / lam
    gx = F1.g_x(np.stack([x, y, z], axis=1))
    return float(np.max(np.linalg.norm(gx, axis=1)))


def build_F1(s: SpectrumTriple, shear: ShearFlow, ramp: TimeRamp, a: float, k_samples: int = 100_000,
             k_inflation: float = 1.1, check_samples: int = 2000, seed: int = 0) -> RampedShear:
    """Rescaled ramped shear with measured derivative bound ``K``.

    Raises :class:`ScaleTooLarge` when ``a K`` reaches the profile support and
    :class:`ConstructionInconsistent` when the (y, z) Jacobian of ``g`` is not
    ``1/mu`` at the sampled points.
    """
    if a <= 0:
        raise InvalidInput("scale a must be positive")
    F1 = RampedShear(s, shear, ramp, a)
    F1.K = k_inflation * measure_K(F1, k_samples, seed)
    eps = min(shear.psi1.support, shear.psi2.support)
    if a * F1.K >= eps:
        raise ScaleTooLarge(f"a K = {a * F1.K:.4g} >= support {eps:.4g}")
    if not shear.trivial:
        U = _support_samples(F1, check_samples, seed + 1)
        J = F1.jacobian(U)[:, 1:, 1:]
        dev = np.abs(np.linalg.det(J) - 1.0 / s.mu).max()
        if dev > 1e-8:
            raise ConstructionInconsistent(f"yz-Jacobian of g deviates from 1/mu by {dev:.3g}")
    return F1


def compose_rotation(F1: LocalMap, theta: float, r_plateau: float, r_support: float,
                     certificate: tuple[float, float] | None = None, n_points: int = 4000,
                     n_boundary: int = 64, seed: int = 0):
    """F = F1 o Rot; with ``certificate = (gamma, xi_prime)`` the cone inclusion is re-checked.

    Returns ``(F, cert)`` where ``cert`` is ``None`` when no check was requested.
    """
    if not (0 < r_plateau < r_support):
        raise InvalidInput("need 0 < r_plateau < r_support")
    if theta == 0:
        return F1, None
    rot = TwistRotation(theta, r_plateau, r_support)
    F = LocalComposition(F1, rot, label="F1 o Rot")
    cert = None
    if certificate is not None:
        gamma, xi_p = certificate
        cert = local_cone_certificate(F, gamma, xi_p, n_points, n_boundary, seed)
        if not cert.holds:
            raise RotationTooLarge(
                f"rotated map has sampled aperture {cert.worst_ratio:.4g} > {xi_p:.4g} at {cert.worst_point}")
    return F, cert


# ----------------------------------------------------------------------------
# full pipeline


@dataclass
class DeformationParams:
    """Radii are in chart units; the shear profiles live in the rescaled (y/a, z/a) variables."""

    psi_support: float = 0.4
    psi_core: float = 0.1
    scale: float = 0.1
    ramp_support: float = 0.08
    ramp_core: float = 0.02
    gamma: float = 1.0
    theta: float = 0.3
    rot_plateau: float = 0.02
    rot_support: float = 0.08
    chart_radius: float = 0.3
    nsteps: int = 200
    psi_bound: float = 2.0
    k_samples: int = 100_000
    k_inflation: float = 1.1
    cert_points: int = 4000
    cert_boundary: int = 64
    seed: int = 0

    def validate(self) -> list[tuple[str, str]]:
        out = []
        for name in ("psi_support", "psi_core", "scale", "ramp_support", "ramp_core", "gamma",
                     "rot_plateau", "rot_support", "chart_radius", "psi_bound"):
            if not getattr(self, name) > 0:
                out.append((name, "must be positive"))
        if self.psi_core >= self.psi_support:
            out.append(("psi_core", "must be smaller than psi_support"))
        if self.ramp_core >= self.ramp_support:
            out.append(("ramp_core", "must be smaller than ramp_support"))
        if self.rot_plateau >= self.rot_support:
            out.append(("rot_plateau", "must be smaller than rot_support"))
        if self.chart_radius >= CHART_LIMIT:
            out.append(("chart_radius", "must be below 1/2"))
        if self.nsteps < 1:
            out.append(("nsteps", "must be at least 1"))
        if self.theta < 0:
            out.append(("theta", "must be nonnegative"))
        return out


@dataclass
class LocalDeformation:
    spectrum: SpectrumTriple
    eta: float
    shear: ShearFlow
    ramp: TimeRamp
    F1: RampedShear
    F: LocalMap
    xi: float
    xi_rotated: float
    cert_F1: ConeCertificate
    cert_F: ConeCertificate | None
    params: DeformationParams

    @property
    def K(self) -> float:
        return self.F1.K

    def perturbation_box(self) -> np.ndarray:
        """Half-widths of a chart box containing every point where F differs from its linear part."""
        hw = self.F1.half_widths.copy() if not self.shear.trivial else np.zeros(3)
        if self.params.theta != 0:
            hw = np.maximum(hw, self.params.rot_support)
        return hw


def build_shear(s: SpectrumTriple, params: DeformationParams) -> tuple[ShearFlow, TimeRamp]:
    """Shear flow with core action diag(1/eta, eta) and its time ramp."""
    eta = solve_eta(s)
    slope = math.sqrt(max(math.log(eta), 0.0))
    if abs(eta - 1.0) < 1e-12:
        slope = 0.0
    p1 = build_bump(params.psi_support, params.psi_core, -slope, params.psi_bound)
    p2 = build_bump(params.psi_support, params.psi_core, slope, params.psi_bound)
    return ShearFlow(p1, p2, nsteps=params.nsteps), TimeRamp(params.ramp_support, params.ramp_core)


def build_local_deformation(s: SpectrumTriple, params: DeformationParams) -> LocalDeformation:
    """Steps 1 to 4 for the spectrum ``s``."""
    bad = params.validate()
    if bad:
        raise InvalidInput("; ".join(f"{k}: {v}" for k, v in bad))
    eta = solve_eta(s)
    shear, ramp = build_shear(s, params)
    F1 = build_F1(s, shear, ramp, params.scale, params.k_samples, params.k_inflation, seed=params.seed)
    xi, cert1 = derive_cone_parameters(F1, params.gamma, params.cert_points, params.cert_boundary, params.seed)
    xi_rot = 0.5 * (xi + params.gamma)
    F, certF = compose_rotation(F1, params.theta, params.rot_plateau, params.rot_support,
                                certificate=(params.gamma, xi_rot), n_points=params.cert_points,
                                n_boundary=params.cert_boundary, seed=params.seed + 7)
    return LocalDeformation(s, eta, shear, ramp, F1, F, xi, xi_rot, cert1, certF, params)


def orbit_linearization(f: SmoothMap, p, period: int) -> tuple[np.ndarray, np.ndarray]:
    """Orbit of ``p`` and the differential of ``f^period`` at ``p``; raises NotPeriodic."""
    if period < 1:
        raise InvalidInput("period must be at least 1")
    x = np.asarray(p, dtype=float)
    orbit = [x]
    D = np.eye(3)
    for _ in range(period):
        D = f.jacobian(x) @ D
        x = f(x)
        orbit.append(x)
    if np.linalg.norm(displacement(orbit[0], orbit[-1])) > 1e-10:
        raise NotPeriodic(f"f^{period}(p) != p (distance {np.linalg.norm(displacement(orbit[0], orbit[-1])):.3g})")
    return np.array(orbit[:-1]), D


def chart_frame(D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and orthonormal eigenframe of a (numerically) symmetric linearization."""
    if np.abs(D - D.T).max() > 1e-10 * max(1.0, np.abs(D).max()):
        raise InvalidInput("linearization at p is not symmetric; no orthonormal eigenframe chart exists")
    return symmetric_eigenframe(0.5 * (D + D.T))


def check_orbit_balls(f0: SmoothMap, p, n: int, radius: float, margin: float = 0.05) -> None:
    """Raise BallsNotDisjoint unless f0^i(B(p, radius)) are pairwise disjoint for i < n.

    Each image is enclosed in the ball of radius ``radius * |Df0^i|``.
    """
    orbit, _ = orbit_linearization(f0, p, n)
    D = np.eye(3)
    rad = []
    for i in range(n):
        rad.append(radius * np.linalg.norm(D, 2))
        D = f0.jacobian(orbit[i]) @ D
    for i in range(n):
        for j in range(i + 1, n):
            d = np.linalg.norm(displacement(orbit[i], orbit[j]))
            if d <= (rad[i] + rad[j]) * (1 + margin):
                raise BallsNotDisjoint(f"orbit balls {i} and {j} overlap (distance {d:.4g})", (i, j))


def periodic_adaptation(f0: SmoothMap, p, n: int, localF: LocalMap, radius: float,
                        frame: np.ndarray) -> SmoothMap:
    """Map equal to f0 off B(p, radius) whose n-th iterate near p is the local model.

    The result is ``f0^(1-n) o f_n`` with ``f_n`` the surgery of ``f0^n`` at p;
    for n = 1 this is :func:`apply_surgery` on ``f0``.
    """
    if n == 1:
        return apply_surgery(f0, LocalSurgerySpec(np.asarray(p, float), radius, localF, frame))
    if not isinstance(f0, TorusAutomorphism):
        raise InvalidInput("periodic adaptation needs a toral automorphism base")
    check_orbit_balls(f0, p, n, radius)
    post = np.linalg.matrix_power(np.round(np.linalg.inv(f0.matrix)).astype(np.int64), n - 1)
    spec = LocalSurgerySpec(np.asarray(p, float), radius, localF, frame, post=post.astype(float))
    return apply_surgery(f0, spec)


@dataclass
class AdjustRadii:
    """Support and core half-widths of the index adjustment in (u, c, s) chart axes."""

    u_support: float = 0.12
    u_core: float = 0.06
    c_support: float = 0.42
    c_core: float = 0.1
    s_support: float = 0.12
    s_core: float = 0.05
    ball: float = 0.48
    nsteps: int = 200


def index_adjust(h: SmoothMap, p, sigma: float, radii: AdjustRadii | None = None) -> SmoothMap:
    """Turn the neutral center eigenvalue of ``h`` at p into exp(-sigma).

    ``h`` must be linear near p with symmetric differential and eigenvalues
    lam_h < 1 < mu_h plus a center eigenvalue 1.  The result is ``h o Phi`` with
    Phi a shear flow in the (unstable, center) plane ramped in the stable
    coordinate; its differential at p is diag(mu_h e^sigma, e^-sigma, lam_h).
    """
    radii = radii or AdjustRadii()
    if sigma < 0:
        raise InvalidInput("sigma must be nonnegative")
    if sigma == 0:
        return h
    p = np.asarray(p, dtype=float)
    D = h.jacobian(p)
    w, Q = chart_frame(D)
    if abs(w[1] - 1.0) > 1e-9 or not (w[2] < 1.0 < w[0]):
        raise InvalidInput(f"expected eigenvalues lam < 1 = center < mu, got {w}")
    if math.exp(-sigma) <= w[2]:
        raise AdjustmentBreaksOrder(f"exp(-sigma) = {math.exp(-sigma):.4g} <= lam_h = {w[2]:.4g}")
    r = math.sqrt(sigma)
    shear = ShearFlow(BumpProfile(radii.u_support, radii.u_core, r),
                      BumpProfile(radii.c_support, radii.c_core, r), nsteps=radii.nsteps)
    ramp = TimeRamp(radii.s_support, radii.s_core)
    phi = PlaneShear(shear, ramp, axes=(0, 1), ramp_axis=2, scale=1.0, label=f"adjust({sigma:g})")
    local = LocalComposition(LinearLocal(np.diag(w), "Dh"), phi, label=phi.label)
    out = apply_surgery(h, LocalSurgerySpec(p, radii.ball, local, Q))
    out.label = f"index-adjusted {h.label}"
    out.adjust_shear = shear
    return out


@dataclass
class Construction:
    """A constructed torus map with its chart data and certificates."""

    base: SmoothMap
    map: SmoothMap
    p: np.ndarray
    period: int
    frame: np.ndarray
    radius: float
    deformation: LocalDeformation
    notes: list = field(default_factory=list)

    @property
    def spectrum(self) -> SpectrumTriple:
        return self.deformation.spectrum

    def shears(self) -> list[ShearFlow]:
        out = [self.deformation.shear]
        m = self.base
        while m is not None:
            if getattr(m, "adjust_shear", None) is not None:
                out.append(m.adjust_shear)
            m = getattr(m, "base", None)
        return out

    def hamiltonian_drift(self) -> float:
        return max(s.monitor.max_relative for s in self.shears())

    def designed_spectrum(self) -> np.ndarray:
        mu = self.spectrum.mu
        th = self.deformation.params.theta
        return np.array([mu, mu**-0.5 * np.exp(1j * th), mu**-0.5 * np.exp(-1j * th)])

    def report(self) -> dict:
        d = self.deformation
        s = d.spectrum
        drift = self.hamiltonian_drift()
        return {
            "map": self.map.label,
            "fixed_point": self.p.tolist(),
            "period": self.period,
            "chart_radius": self.radius,
            "spectrum": {"mu": s.mu, "rho": s.rho, "lam": s.lam},
            "eta": d.eta,
            "eta_printed_formula": math.sqrt(s.mu) / s.lam,
            "sigma": math.log(d.eta),
            "K": d.K,
            "aK": d.F1.a * d.K,
            "gamma": d.params.gamma,
            "xi": d.xi,
            "xi_rotated": d.xi_rotated,
            "cone_F1_worst": d.cert_F1.worst_ratio,
            "cone_F1_margin": d.cert_F1.margin,
            "cone_F_worst": None if d.cert_F is None else d.cert_F.worst_ratio,
            "cone_F_margin": None if d.cert_F is None else d.cert_F.margin,
            "sup_psi_psipp": d.shear.psi1.sup_psi_psipp(),
            "support_radius": d.F.support_radius,
            "core_radius": d.F.core_radius,
            "hamiltonian_drift": drift,
            "hamiltonian_sentinel_pass": bool(drift <= SENTINEL_TOL),
            "params": asdict(d.params),
            "notes": list(self.notes),
        }


def construct(base: SmoothMap, p, params: DeformationParams | None = None, period: int = 1) -> Construction:
    """Build the deformed map from a base that is linear near the periodic point ``p``."""
    params = params or DeformationParams()
    p = np.asarray(p, dtype=float)
    _, D = orbit_linearization(base, p, period)
    w, Q = chart_frame(D)
    s = SpectrumTriple.from_values(w)
    dfm = build_local_deformation(s, params)
    if dfm.F.support_radius >= params.chart_radius:
        raise ScaleTooLarge(
            f"local support radius {dfm.F.support_radius:.4g} does not fit in the chart ball {params.chart_radius}")
    f = periodic_adaptation(base, p, period, dfm.F, params.chart_radius, Q)
    f.label = f"deformed {base.label}"
    notes = []
    if dfm.eta != math.sqrt(s.mu) / s.lam:
        notes.append("shear rate uses eta = 1/(lam sqrt(mu)); the value sqrt(mu)/lam would not give "
                     "DF1(0) = diag(mu, mu^-1/2, mu^-1/2)")
    return Construction(base, f, p, period, Q, params.chart_radius, dfm, notes)
