"""Compiled scalar kernels: C2 profiles and the symplectic shear-flow integrator.

Profiles are odd piecewise polynomials ``s0 * shape(t)`` with an exactly linear
core ``|t| <= core`` and a quintic Hermite transition that vanishes, together with
its first two derivatives, at ``|t| = supp``.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

SQRT3_6 = math.sqrt(3.0) / 6.0
# two-stage Gauss-Legendre tableau (order 4, symplectic, symmetric)
GL_A11 = 0.25
GL_A12 = 0.25 - SQRT3_6
GL_A21 = 0.25 + SQRT3_6
GL_A22 = 0.25


@njit(cache=True)
def bump_eval(t, s0, core, supp):
    """Return (psi, psi', psi'') of the odd bump profile at ``t``."""
    at = abs(t)
    if at >= supp or s0 == 0.0:
        return 0.0, 0.0, 0.0
    if at <= core:
        return s0 * t, s0, 0.0
    L = supp - core
    u = (at - core) / L
    u2 = u * u
    u3 = u2 * u
    u4 = u3 * u
    u5 = u4 * u
    h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5
    h0p = -30.0 * u2 + 60.0 * u3 - 30.0 * u4
    h0pp = -60.0 * u + 180.0 * u2 - 120.0 * u3
    h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5
    h1p = 1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4
    h1pp = -36.0 * u + 96.0 * u2 - 60.0 * u3
    v = s0 * (core * h0 + L * h1)
    d = s0 * (core * h0p + L * h1p) / L
    dd = s0 * (core * h0pp + L * h1pp) / (L * L)
    if t < 0.0:
        return -v, d, -dd
    return v, d, dd


@njit(cache=True)
def ramp_eval(t, core, supp):
    """Return (r, r') of the even C2 ramp: 1 on the core, 0 beyond ``supp``."""
    at = abs(t)
    if at >= supp:
        return 0.0, 0.0
    if at <= core:
        return 1.0, 0.0
    L = supp - core
    u = (at - core) / L
    u2 = u * u
    s = u2 * u * (10.0 - 15.0 * u + 6.0 * u2)
    sp = 30.0 * u2 * (1.0 - 2.0 * u + u2) / L
    if t < 0.0:
        return 1.0 - s, sp
    return 1.0 - s, -sp


@njit(cache=True)
def _field(y, z, p1, p2):
    a, ap, app = bump_eval(y, p1[0], p1[1], p1[2])
    b, bp, bpp = bump_eval(z, p2[0], p2[1], p2[2])
    # X = (psi1 psi2', -psi1' psi2); DX rows (dXy/dy, dXy/dz), (dXz/dy, dXz/dz)
    return (a * bp, -ap * b,
            ap * bp, a * bpp, -app * b, -ap * bp)


@njit(cache=True)
def hamiltonian(y, z, p1, p2):
    return bump_eval(y, p1[0], p1[1], p1[2])[0] * bump_eval(z, p2[0], p2[1], p2[2])[0]


@njit(cache=True)
def _flow_one(y, z, t, p1, p2, nsteps, want_jac, tol, max_iter):
    """Integrate one trajectory; returns y, z, M (4 entries), drift, ok."""
    m00 = 1.0
    m01 = 0.0
    m10 = 0.0
    m11 = 1.0
    h = t / nsteps
    h0 = hamiltonian(y, z, p1, p2)
    drift = 0.0
    ok = True
    f = _field(y, z, p1, p2)
    k1y = f[0]
    k1z = f[1]
    k2y = f[0]
    k2z = f[1]
    for _ in range(nsteps):
        # warm start: previous stages, shifted by one step
        k1y, k2y = k1y + (k2y - k1y) * 1.7320508075688772, k2y + (k2y - k1y) * 1.7320508075688772
        k1z, k2z = k1z + (k2z - k1z) * 1.7320508075688772, k2z + (k2z - k1z) * 1.7320508075688772
        converged = False
        for _it in range(max_iter):
            q1y = y + h * (GL_A11 * k1y + GL_A12 * k2y)
            q1z = z + h * (GL_A11 * k1z + GL_A12 * k2z)
            q2y = y + h * (GL_A21 * k1y + GL_A22 * k2y)
            q2z = z + h * (GL_A21 * k1z + GL_A22 * k2z)
            f1 = _field(q1y, q1z, p1, p2)
            f2 = _field(q2y, q2z, p1, p2)
            err = max(abs(f1[0] - k1y), abs(f1[1] - k1z), abs(f2[0] - k2y), abs(f2[1] - k2z))
            k1y = f1[0]
            k1z = f1[1]
            k2y = f2[0]
            k2z = f2[1]
            if abs(h) * err <= tol:
                converged = True
                break
        if not converged:
            ok = False
        if want_jac:
            # stage derivatives L_i = DX(Q_i) (M + h sum_j a_ij L_j), solved by iteration
            q1y = y + h * (GL_A11 * k1y + GL_A12 * k2y)
            q1z = z + h * (GL_A11 * k1z + GL_A12 * k2z)
            q2y = y + h * (GL_A21 * k1y + GL_A22 * k2y)
            q2z = z + h * (GL_A21 * k1z + GL_A22 * k2z)
            d1 = _field(q1y, q1z, p1, p2)
            d2 = _field(q2y, q2z, p1, p2)
            a0 = a1 = a2 = a3 = 0.0  # stage 1 derivative entries
            b0 = b1 = b2 = b3 = 0.0  # stage 2
            for _it in range(max_iter):
                w00 = m00 + h * (GL_A11 * a0 + GL_A12 * b0)
                w01 = m01 + h * (GL_A11 * a1 + GL_A12 * b1)
                w10 = m10 + h * (GL_A11 * a2 + GL_A12 * b2)
                w11 = m11 + h * (GL_A11 * a3 + GL_A12 * b3)
                n0 = d1[2] * w00 + d1[3] * w10
                n1 = d1[2] * w01 + d1[3] * w11
                n2 = d1[4] * w00 + d1[5] * w10
                n3 = d1[4] * w01 + d1[5] * w11
                w00 = m00 + h * (GL_A21 * a0 + GL_A22 * b0)
                w01 = m01 + h * (GL_A21 * a1 + GL_A22 * b1)
                w10 = m10 + h * (GL_A21 * a2 + GL_A22 * b2)
                w11 = m11 + h * (GL_A21 * a3 + GL_A22 * b3)
                q0 = d2[2] * w00 + d2[3] * w10
                q1 = d2[2] * w01 + d2[3] * w11
                q2 = d2[4] * w00 + d2[5] * w10
                q3 = d2[4] * w01 + d2[5] * w11
                err = max(abs(n0 - a0), abs(n1 - a1), abs(n2 - a2), abs(n3 - a3),
                          abs(q0 - b0), abs(q1 - b1), abs(q2 - b2), abs(q3 - b3))
                a0, a1, a2, a3 = n0, n1, n2, n3
                b0, b1, b2, b3 = q0, q1, q2, q3
                if abs(h) * err <= tol:
                    break
            m00 += 0.5 * h * (a0 + b0)
            m01 += 0.5 * h * (a1 + b1)
            m10 += 0.5 * h * (a2 + b2)
            m11 += 0.5 * h * (a3 + b3)
        y += 0.5 * h * (k1y + k2y)
        z += 0.5 * h * (k1z + k2z)
        dh = abs(hamiltonian(y, z, p1, p2) - h0)
        if dh > drift:
            drift = dh
    return y, z, m00, m01, m10, m11, drift, ok


@njit(cache=True)
def flow_batch(ys, zs, ts, p1, p2, nsteps, want_jac, tol, max_iter):
    """Time-``ts[i]`` flow of every point; identity (no integration) off-support."""
    n = ys.shape[0]
    oy = ys.copy()
    oz = zs.copy()
    jac = np.zeros((n, 2, 2))
    drift = np.zeros(n)
    ok = np.ones(n, dtype=np.bool_)
    sy = p1[2]
    sz = p2[2]
    for i in range(n):
        jac[i, 0, 0] = 1.0
        jac[i, 1, 1] = 1.0
        if ts[i] == 0.0 or abs(ys[i]) >= sy or abs(zs[i]) >= sz:
            continue
        r = _flow_one(ys[i], zs[i], ts[i], p1, p2, nsteps, want_jac, tol, max_iter)
        oy[i] = r[0]
        oz[i] = r[1]
        jac[i, 0, 0] = r[2]
        jac[i, 0, 1] = r[3]
        jac[i, 1, 0] = r[4]
        jac[i, 1, 1] = r[5]
        drift[i] = r[6]
        ok[i] = r[7]
    return oy, oz, jac, drift, ok


@njit(cache=True)
def field_batch(ys, zs, p1, p2):
    """Columns (Xy, Xz, dXy/dy, dXy/dz, dXz/dy, dXz/dz)."""
    n = ys.shape[0]
    out = np.zeros((n, 6))
    for i in range(n):
        f = _field(ys[i], zs[i], p1, p2)
        for k in range(6):
            out[i, k] = f[k]
    return out


@njit(cache=True)
def bump_batch(ts, s0, core, supp):
    n = ts.shape[0]
    out = np.zeros((n, 3))
    for i in range(n):
        r = bump_eval(ts[i], s0, core, supp)
        out[i, 0] = r[0]
        out[i, 1] = r[1]
        out[i, 2] = r[2]
    return out


@njit(cache=True)
def ramp_batch(ts, core, supp):
    n = ts.shape[0]
    out = np.zeros((n, 2))
    for i in range(n):
        r = ramp_eval(ts[i], core, supp)
        out[i, 0] = r[0]
        out[i, 1] = r[1]
    return out
