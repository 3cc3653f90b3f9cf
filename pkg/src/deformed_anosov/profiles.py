"""C2 scalar profiles with linear/plateau cores and the Hamiltonian shear flow they generate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from . import _kernels as K
from .errors import BoundInfeasible, IntegrationFailure, InvalidInput

# quintic Hermite basis on [0, 1]: value 1 / slope 1 at 0, everything 0 at 1
_H0 = Polynomial([1, 0, 0, -10, 15, -6])
_H1 = Polynomial([0, 1, 0, -6, 8, -3])


def _sup_abs(poly: Polynomial) -> float:
    """Exact maximum of |poly| on [0, 1] from its critical points."""
    cands = [0.0, 1.0]
    for r in poly.deriv().roots():
        if abs(r.imag) < 1e-12 and 0.0 <= r.real <= 1.0:
            cands.append(r.real)
    return float(np.max(np.abs(poly(np.array(cands)))))


@dataclass(frozen=True)
class BumpProfile:
    """Odd C2 profile: ``slope * t`` for |t| <= core, zero for |t| >= support."""

    support: float
    core: float
    slope: float

    def __post_init__(self):
        if not (0.0 < self.core < self.support):
            raise InvalidInput("bump radii must satisfy 0 < core < support")
        if not np.isfinite(self.slope):
            raise InvalidInput("bump slope must be finite")

    @property
    def params(self) -> np.ndarray:
        return np.array([self.slope, self.core, self.support])

    def evaluate(self, t) -> np.ndarray:
        """Columns (psi, psi', psi'') at the points ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        return K.bump_batch(t, self.slope, self.core, self.support)

    def __call__(self, t):
        return self.evaluate(t)[:, 0]

    def _transition(self) -> tuple[Polynomial, Polynomial]:
        L = self.support - self.core
        psi = self.slope * (self.core * _H0 + L * _H1)
        return psi, psi.deriv(2) / L**2

    def sup_abs(self) -> float:
        """max |psi| (attained on the transition, the core value being smaller or equal)."""
        psi, _ = self._transition()
        return max(abs(self.slope) * self.core, _sup_abs(psi))

    def sup_psi_psipp(self) -> float:
        """max |psi psi''| computed exactly from the transition polynomials."""
        psi, pp = self._transition()
        return _sup_abs(psi * pp)

    def knot_jumps(self) -> np.ndarray:
        """Jumps of (psi, psi', psi'') between the one-sided limits at the knots core and support."""
        psi, _ = self._transition()
        L = self.support - self.core
        d1, d2 = psi.deriv(), psi.deriv(2)
        start = np.array([psi(0.0), d1(0.0) / L, d2(0.0) / L**2])
        end = np.array([psi(1.0), d1(1.0) / L, d2(1.0) / L**2])
        inner = np.array([self.slope * self.core, self.slope, 0.0])
        return np.abs(np.array([start - inner, end]))


def build_bump(support: float, core: float, slope: float, bound: float) -> BumpProfile:
    """Bump profile with the requested slope at 0 and sup|psi psi''| below ``bound``.

    The quintic transition has no free shape parameter once the radii are
    fixed, so an unmet bound is reported rather than repaired.
    """
    if bound <= 0:
        raise InvalidInput("bound must be positive")
    prof = BumpProfile(support, core, slope)
    achieved = prof.sup_psi_psipp()
    if achieved > bound:
        raise BoundInfeasible(
            f"sup|psi psi''| = {achieved:.4g} exceeds {bound:.4g}; enlarge the support or relax the bound")
    return prof


@dataclass(frozen=True)
class TimeRamp:
    """Even C2 ramp: 1 on |x| <= core, 0 for |x| >= support, monotone in between."""

    support: float
    core: float

    def __post_init__(self):
        if not (0.0 < self.core < self.support):
            raise InvalidInput("ramp radii must satisfy 0 < core < support")

    def evaluate(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        return K.ramp_batch(x, self.core, self.support)

    def __call__(self, x):
        return self.evaluate(x)[:, 0]

    def derivative(self, x):
        return self.evaluate(x)[:, 1]

    def sup_derivative(self) -> float:
        return 1.875 / (self.support - self.core)


@dataclass
class DriftMonitor:
    """Running maximum of the relative Hamiltonian drift over all integrations."""

    max_relative: float = 0.0
    trajectories: int = 0

    def update(self, drift: np.ndarray, scale: float):
        if drift.size:
            self.max_relative = max(self.max_relative, float(drift.max()) / scale)
        self.trajectories += int(np.count_nonzero(drift)) if drift.size else 0


@dataclass
class ShearFlow:
    """Flow of X = (psi1 psi2', -psi1' psi2), the Hamiltonian field of psi1(y) psi2(z).

    Integrated with the two-stage Gauss-Legendre scheme, ``nsteps`` fixed steps
    on [0, t]; the variational equation uses the same stages, so the returned
    matrix is the exact differential of the discrete flow map.
    """

    psi1: BumpProfile
    psi2: BumpProfile
    nsteps: int = 200
    tol: float = 1e-15
    max_iter: int = 60
    monitor: DriftMonitor = field(default_factory=DriftMonitor)

    @property
    def trivial(self) -> bool:
        return self.psi1.slope == 0.0 or self.psi2.slope == 0.0

    @property
    def h_scale(self) -> float:
        """sup |H| over the support square, the denominator of the drift sentinel."""
        return self.psi1.sup_abs() * self.psi2.sup_abs()

    def hamiltonian(self, y, z) -> np.ndarray:
        return self.psi1(y) * self.psi2(z)

    def field(self, y, z) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        return K.field_batch(y, z, self.psi1.params, self.psi2.params)[:, :2]

    def divergence(self, y, z) -> np.ndarray:
        """Trace of DX evaluated from the exact profile derivatives."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        z = np.atleast_1d(np.asarray(z, dtype=float))
        d = K.field_batch(y, z, self.psi1.params, self.psi2.params)
        return d[:, 2] + d[:, 5]

    def flow(self, t, y, z, jacobian: bool = True):
        """Time-``t`` images of the points ``(y, z)``; returns ``(y, z, M)``.

        ``t`` may be a scalar or an array matching ``y``.  Points off the
        support square and zero times are returned unchanged with identity
        differential.
        """
        y = np.ascontiguousarray(np.atleast_1d(y), dtype=float)
        z = np.ascontiguousarray(np.atleast_1d(z), dtype=float)
        ts = np.ascontiguousarray(np.broadcast_to(np.asarray(t, dtype=float), y.shape))
        if np.any(np.abs(ts) > 1.0 + 1e-12):
            raise InvalidInput("flow time must satisfy |t| <= 1")
        if self.trivial or y.size == 0:
            M = np.broadcast_to(np.eye(2), (y.size, 2, 2)).copy()
            return y.copy(), z.copy(), M
        oy, oz, M, drift, ok = K.flow_batch(y, z, ts, self.psi1.params, self.psi2.params,
                                            self.nsteps, jacobian, self.tol, self.max_iter)
        self.monitor.update(drift, self.h_scale)
        if not ok.all():
            raise IntegrationFailure("stage iteration did not reach the tolerance",
                                     achieved=float(np.max(drift[~ok]) / self.h_scale))
        return oy, oz, M


def shear_with_rate(sigma: float, support: tuple[float, float], core: tuple[float, float],
                    signs: tuple[int, int] = (-1, 1), **kw) -> ShearFlow:
    """Shear flow whose time-1 map is diag(exp(s1 s2), exp(-s1 s2)) on the linear core.

    The slopes are ``signs * sqrt(sigma)``; the default signs give
    diag(exp(-sigma), exp(sigma)).
    """
    if sigma < 0:
        raise InvalidInput("shear rate must be nonnegative")
    r = np.sqrt(sigma)
    p1 = BumpProfile(support[0], core[0], signs[0] * r)
    p2 = BumpProfile(support[1], core[1], signs[1] * r)
    return ShearFlow(p1, p2, **kw)
