import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformed_anosov.errors import BoundInfeasible, InvalidInput
from deformed_anosov.profiles import BumpProfile, ShearFlow, TimeRamp, build_bump

ETA = 1.1785113019775793  # 1 / (0.6 sqrt 2)


def test_zero_slope_gives_zero_profile_and_identity_flow():
    p = build_bump(0.1, 0.02, 0.0, 1.0)
    t = np.linspace(-0.2, 0.2, 101)
    np.testing.assert_array_equal(p.evaluate(t), 0.0)
    fl = ShearFlow(p, BumpProfile(0.1, 0.02, 1.0))
    y, z, M = fl.flow(1.0, t[:5], t[5:10])
    np.testing.assert_array_equal(y, t[:5])
    np.testing.assert_array_equal(M, np.broadcast_to(np.eye(2), (5, 2, 2)))


def test_plateau_and_support_exact():
    s0 = math.sqrt(math.log(ETA))
    p = build_bump(0.1, 0.02, s0, 1.0)
    assert np.all(p(np.array([-0.1, 0.1, 0.15, -3.0])) == 0.0)
    assert p(0.01)[0] == s0 * 0.01
    np.testing.assert_array_equal(p.evaluate(0.0)[0], [0.0, s0, 0.0])


def test_knots_are_c2():
    p = BumpProfile(0.1, 0.02, 0.7)
    assert p.knot_jumps().max() < 1e-12
    # the compiled evaluator agrees with the polynomial pieces on both sides of each knot
    for k in (0.02, 0.1):
        lo, hi = p.evaluate([k * (1 - 1e-9), k * (1 + 1e-9)])
        assert np.abs(hi - lo)[:2].max() < 1e-8
        assert abs(hi[2] - lo[2]) < 1e-4 * np.abs(p.evaluate(np.linspace(0, 0.1, 1001))[:, 2]).max()


def test_sup_psi_psipp_matches_dense_scan():
    s0 = math.sqrt(math.log(ETA))
    p = build_bump(0.1, 0.02, s0, 1.0)
    t = np.linspace(-0.1, 0.1, 100_001)
    v = p.evaluate(t)
    dense = np.abs(v[:, 0] * v[:, 2]).max()
    assert np.isfinite(p.sup_psi_psipp())
    assert dense <= p.sup_psi_psipp() * (1 + 1e-12)
    assert p.sup_psi_psipp() - dense < 1e-6 * p.sup_psi_psipp()
    assert np.abs(v[:, 0]).max() <= p.sup_abs() * (1 + 1e-12)


def test_sup_psi_psipp_is_scale_invariant():
    a = BumpProfile(0.4, 0.1, 1.0).sup_psi_psipp()
    b = BumpProfile(0.04, 0.01, 1.0).sup_psi_psipp()
    assert a == pytest.approx(b, rel=1e-12)


def test_bound_infeasible():
    with pytest.raises(BoundInfeasible):
        build_bump(0.1, 0.02, 1.0, 1e-3)
    with pytest.raises(InvalidInput):
        build_bump(0.1, 0.2, 1.0, 1.0)


@settings(max_examples=50)
@given(st.floats(-1, 1), st.floats(0.1, 0.9))
def test_ramp_properties(x, frac):
    r = TimeRamp(0.1, 0.1 * frac)
    v = r.evaluate(np.array([x, x * 0.5]))
    assert np.all((v[:, 0] >= 0) & (v[:, 0] <= 1))
    # monotone away from the core on each side
    assert v[1, 0] >= v[0, 0] - 1e-15
    assert abs(r.evaluate(x)[0, 1]) <= r.sup_derivative() + 1e-12
    assert r(0.0)[0] == 1.0 and r(0.1)[0] == 0.0


def _flow(sig=math.log(ETA), supp=0.1, core=0.02, nsteps=200):
    s = math.sqrt(sig)
    return ShearFlow(BumpProfile(supp, core, -s), BumpProfile(supp, core, s), nsteps=nsteps)


def test_linear_core_flow_matches_exponential():
    fl = _flow()
    y, z, M = fl.flow(1.0, np.array([0.0, 1e-3]), np.array([0.0, -2e-3]))
    np.testing.assert_allclose(M[0], np.diag([1 / ETA, ETA]), atol=1e-9)
    np.testing.assert_allclose([y[1], z[1]], [1e-3 / ETA, -2e-3 * ETA], rtol=1e-9)


def test_flow_time_zero_and_outside_support():
    fl = _flow()
    y, z, M = fl.flow(0.0, np.array([0.03]), np.array([0.04]))
    assert (y[0], z[0]) == (0.03, 0.04)
    np.testing.assert_array_equal(M[0], np.eye(2))
    y, z, M = fl.flow(1.0, np.array([0.2]), np.array([0.01]))
    assert (y[0], z[0]) == (0.2, 0.01)
    np.testing.assert_array_equal(M[0], np.eye(2))
    with pytest.raises(InvalidInput):
        fl.flow(1.5, np.array([0.0]), np.array([0.0]))


def test_divergence_free_and_hamiltonian_conserved():
    fl = _flow()
    rng = np.random.default_rng(0)
    y, z = rng.uniform(-0.1, 0.1, (2, 2000))
    assert np.abs(fl.divergence(y, z)).max() < 1e-12
    oy, oz, M = fl.flow(rng.uniform(-1, 1, 2000), y, z)
    drift = np.abs(fl.hamiltonian(oy, oz) - fl.hamiltonian(y, z)).max() / fl.h_scale
    assert drift <= 1e-9
    assert fl.monitor.max_relative <= 1e-9
    assert np.abs(np.linalg.det(M) - 1).max() <= 1e-9


def test_flow_jacobian_against_finite_differences():
    fl = _flow()
    rng = np.random.default_rng(1)
    y, z = rng.uniform(-0.08, 0.08, (2, 50))
    _, _, M = fl.flow(0.7, y, z)
    h = 1e-7
    cols = []
    for dy, dz in ((h, 0), (0, h)):
        a = np.stack(fl.flow(0.7, y + dy, z + dz, jacobian=False)[:2], axis=1)
        b = np.stack(fl.flow(0.7, y - dy, z - dz, jacobian=False)[:2], axis=1)
        cols.append((a - b) / (2 * h))
    assert np.abs(np.stack(cols, axis=2) - M).max() < 1e-6
