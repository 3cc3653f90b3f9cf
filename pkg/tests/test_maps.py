import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BV_MATRIX, fd_jacobian
from deformed_anosov.errors import InvalidInput, NotHyperbolic, NotVolumePreserving, SurgeryMismatch
from deformed_anosov.geometry import ball_points, displacement, distance, sobol, symmetric_eigenframe
from deformed_anosov.maps import (CallableLocal, LinearLocal, LocalSurgerySpec, MatrixMap, SurgeredMap,
                                  TorusAutomorphism, apply_surgery, compose, linear_anosov,
                                  product_with_identity)

GOLDEN = (3 + np.sqrt(5)) / 2


def test_identity_is_not_hyperbolic():
    with pytest.raises(NotHyperbolic):
        linear_anosov(np.eye(3, dtype=int))
    assert isinstance(linear_anosov(np.eye(3, dtype=int), validate_anosov=False), TorusAutomorphism)


def test_det_and_integrality_checked():
    with pytest.raises(NotVolumePreserving):
        linear_anosov([[2, 0, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(InvalidInput):
        linear_anosov([[1.5, 0, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(NotHyperbolic):
        product_with_identity([[1, 1], [0, 1]])


def test_cat_times_identity_spectrum():
    h = product_with_identity([[2, 1], [1, 1]])
    w = np.sort(np.linalg.eigvals(h.jacobian(np.zeros(3))).real)[::-1]
    np.testing.assert_allclose(w, [GOLDEN, 1.0, 1.0 / GOLDEN], rtol=1e-14)
    X = sobol(1000, 3, 4)
    np.testing.assert_array_equal(h(X)[:, 2], X[:, 2])
    np.testing.assert_allclose(np.linalg.det(h.jacobian(X)), 1.0, atol=1e-14)


def test_linear_differential_is_the_matrix(bv_base):
    X = sobol(100, 3, 1)
    np.testing.assert_array_equal(bv_base.jacobian(X), np.broadcast_to(np.array(BV_MATRIX, float), (100, 3, 3)))


def test_bv_char_polynomial_oracle(bv_base):
    # t^3 - 6 t^2 + 5 t - 1 (trace, principal minors, det)
    roots = np.sort(np.roots([1, -6, 5, -1]).real)[::-1]
    w = np.sort(np.linalg.eigvalsh(np.array(BV_MATRIX, float)))[::-1]
    np.testing.assert_allclose(w, roots, rtol=1e-12)
    np.testing.assert_allclose(roots, [5.048917339522305, 0.6431041321077905, 0.3079785283699041], rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_automorphism_round_trip(seed):
    A = linear_anosov(BV_MATRIX)
    X = sobol(64, 3, seed)
    assert distance(A.inverse(A(X)), X).max() < 1e-12


def test_compose_rules(bv_base):
    C = compose(bv_base, bv_base)
    assert isinstance(C, TorusAutomorphism)
    np.testing.assert_array_equal(C.matrix, np.array(BV_MATRIX) @ np.array(BV_MATRIX))
    M = MatrixMap(np.array(BV_MATRIX, float))
    X = sobol(1000, 3, 2)
    ident = compose(M, MatrixMap(np.linalg.inv(M.matrix)))
    assert distance(ident(X), X).max() < 1e-10
    K = compose(M, bv_base)
    np.testing.assert_allclose(K.jacobian(X[:5]), np.broadcast_to(M.matrix @ M.matrix, (5, 3, 3)))


def test_compose_chain_rule_against_fd(bv_t3, bv_base):
    f = compose(bv_t3.map, bv_base)
    X = ball_points(200, bv_base.inverse(np.zeros(3)), 0.05, seed=5)
    assert np.abs(fd_jacobian(f, X) - f.jacobian(X)).max() < 1e-5


def _bv_spec(local, radius=0.2):
    w, Q = symmetric_eigenframe(np.array(BV_MATRIX, float))
    return LocalSurgerySpec(np.zeros(3), radius, local, Q), w


def test_identity_surgery_equals_base(bv_base):
    spec, w = _bv_spec(None)
    spec.local = LinearLocal(np.diag(w))
    f = apply_surgery(bv_base, spec)
    X = np.concatenate([sobol(2000, 3, 0), ball_points(2000, np.zeros(3), 0.2, seed=1)])
    err = np.abs(displacement(bv_base(X), f(X))).max()
    assert err < 1e-15
    outside = distance(np.zeros(3), X) > 0.2
    np.testing.assert_array_equal(f(X[outside]), bv_base(X[outside]))


def test_surgery_rejects_shell_mismatch(bv_base):
    _, w = _bv_spec(None)
    D = np.diag(w)
    bad = CallableLocal(lambda U: U @ D.T + 1e-3 * np.sin(U), lambda U: D + 1e-3 * np.apply_along_axis(
        np.diag, 1, np.cos(U)), D, support_radius=0.1)
    spec, _ = _bv_spec(bad)
    with pytest.raises(SurgeryMismatch):
        apply_surgery(bv_base, spec)


def test_surgery_rejects_wrong_linear_part(bv_base):
    spec, w = _bv_spec(None)
    spec.local = LinearLocal(np.diag(w[::-1]))
    with pytest.raises(SurgeryMismatch):
        apply_surgery(bv_base, spec)


def test_surgery_rejects_overlap(bv_t3):
    f = bv_t3.map
    assert isinstance(f, SurgeredMap)
    spec, w = _bv_spec(LinearLocal(np.diag(np.linalg.eigvalsh(f.jacobian(np.zeros(3)))[::-1])), radius=0.31)
    with pytest.raises(SurgeryMismatch):
        apply_surgery(f, spec)


def test_deformed_map_contract(bv_t3):
    f = bv_t3.map
    X = np.concatenate([sobol(1000, 3, 9), ball_points(1000, np.zeros(3), 0.2, seed=9)])
    assert distance(f(f.inverse(X)), X).max() < 1e-10
    assert distance(f.inverse(f(X)), X).max() < 1e-10
    assert np.abs(fd_jacobian(f, X[1000:1300]) - f.jacobian(X[1000:1300])).max() < 1e-5
    assert np.abs(np.linalg.det(f.jacobian(X)) - 1).max() < 1e-8


def test_matrix_map_rejects_singular():
    with pytest.raises(InvalidInput):
        MatrixMap(np.diag([1.0, 0.0, 1.0]))
