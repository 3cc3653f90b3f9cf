import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deformed_anosov.errors import ApertureInfinite, InvalidInput
from deformed_anosov.geometry import (ConeSpec, TorusPoint, ball_points, cone_contains, cone_image_aperture,
                                      displacement, distance, eig_sorted, from_chart, grid_points,
                                      symmetric_eigenframe, to_chart, wrap, wrap_array)

finite = st.floats(-1e6, 1e6, allow_nan=False)
unit = st.floats(0.0, 1.0, exclude_max=True)


def test_wrap_examples():
    assert wrap([1.25, -0.5, 3.0]) == TorusPoint(0.25, 0.5, 0.0)
    assert wrap([0.0, 0.0, 0.0]) == TorusPoint(0.0, 0.0, 0.0)
    p = wrap([0.999999, 1.000001, -0.000001]).as_array()
    np.testing.assert_allclose(p, [0.999999, 0.000001, 0.999999], atol=1e-12)


def test_wrap_rejects_nonfinite():
    with pytest.raises(InvalidInput):
        wrap([np.nan, 0, 0])
    with pytest.raises(InvalidInput):
        wrap_array([[0, np.inf, 0]])


def test_wrap_tiny_negative_stays_below_one():
    assert wrap_array([-1e-20, 0.0, 0.0])[0] == 0.0


@given(st.tuples(finite, finite, finite))
def test_wrap_idempotent_and_reduced(v):
    a = wrap_array(v)
    assert np.all((a >= 0) & (a < 1))
    np.testing.assert_array_equal(wrap_array(a), a)


def test_displacement_examples():
    np.testing.assert_allclose(displacement([0.95, 0, 0], [0.05, 0, 0]), [0.1, 0, 0], atol=1e-12)
    np.testing.assert_array_equal(displacement([0.3, 0.2, 0.1], [0.3, 0.2, 0.1]), [0, 0, 0])
    np.testing.assert_array_equal(displacement([0, 0, 0], [0.5, 0.5, 0.5]), [-0.5, -0.5, -0.5])


@given(st.tuples(unit, unit, unit), st.tuples(unit, unit, unit))
def test_displacement_antisymmetric_and_bounded(a, b):
    d = displacement(a, b)
    assert np.all((d >= -0.5) & (d < 0.5))
    e = displacement(b, a)
    ties = np.isclose(np.abs(d), 0.5)
    np.testing.assert_allclose(d[~ties], -e[~ties], atol=1e-12)
    assert distance(a, b) <= np.sqrt(3) / 2 + 1e-12


def test_cone_contains_examples():
    assert cone_contains(ConeSpec(1.0), [1, 0.6, 0.8])
    assert not cone_contains(ConeSpec(0.5), [0, 1, 0])
    assert cone_contains(ConeSpec(0.5), [2, 0.3, 0.4])
    with pytest.raises(InvalidInput):
        cone_contains(ConeSpec(1.0), [0, 0, 0])
    with pytest.raises(InvalidInput):
        ConeSpec(-1.0)


@given(st.tuples(finite, finite, finite).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.floats(-6, 6), st.booleans())
def test_cone_contains_scale_invariant(v, logscale, flip):
    s = 10.0**logscale * (-1 if flip else 1)
    c = ConeSpec(0.8)
    assert cone_contains(c, v) == cone_contains(c, s * np.asarray(v))


def test_cone_image_aperture_examples():
    assert cone_image_aperture(np.diag([2, 0.5, 0.5]), ConeSpec(1.0), 64) == pytest.approx(0.25, abs=1e-14)
    assert cone_image_aperture(np.eye(3), ConeSpec(0.7), 64) == pytest.approx(0.7, abs=1e-14)
    with pytest.raises(InvalidInput):
        cone_image_aperture(np.eye(3), ConeSpec(1.0), 4)
    # the boundary vector (1, 1, 0)/sqrt 2 is sent onto the plane w1 = 0
    with pytest.raises(ApertureInfinite):
        cone_image_aperture(np.array([[1.0, -1.0, 0], [1, 1, 0], [0, 0, 1]]), ConeSpec(1.0), 8)


def _dense_aperture(A, gamma, n=100_000):
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    V = np.stack([np.ones(n), gamma * np.cos(phi), gamma * np.sin(phi)])
    W = A @ V
    return (np.hypot(W[1], W[2]) / np.abs(W[0])).max()


def test_cone_image_aperture_against_dense_oracle():
    A = np.array([[5.0, 0, 0], [0.2, 0.6, 0.1], [-0.3, 0.05, 0.35]])
    c = ConeSpec(1.0)
    oracle = _dense_aperture(A, 1.0)
    a10, a12 = cone_image_aperture(A, c, 2**10), cone_image_aperture(A, c, 2**12)
    assert a10 <= a12 <= oracle + 1e-15
    assert abs(a12 - a10) < 1e-6
    assert abs(a12 - oracle) < 1e-6


def test_chart_round_trip():
    w, Q = symmetric_eigenframe(np.array([[1.0, 1, 1], [1, 2, 2], [1, 2, 3]]))
    assert np.linalg.det(Q) == pytest.approx(1.0)
    p = np.array([0.9, 0.05, 0.5])
    X = ball_points(100, p, 0.3, seed=1)
    np.testing.assert_allclose(from_chart(to_chart(X, p, Q), p, Q), X, atol=1e-14)
    assert np.all(np.linalg.norm(to_chart(X, p, Q), axis=1) <= 0.3 + 1e-12)


def test_eig_sorted_orders_by_modulus():
    sp = eig_sorted(np.diag([0.5, 3.0, -1.0]))
    np.testing.assert_allclose(sp.moduli, [3.0, 1.0, 0.5])
    assert np.all(sp.condition >= 1 - 1e-12)


def test_grid_points_cell_centered():
    g = grid_points(4)
    assert g.shape == (64, 3)
    np.testing.assert_allclose(np.unique(g[:, 0]), [0.125, 0.375, 0.625, 0.875])


@settings(max_examples=25)
@given(st.floats(0.01, 0.45))
def test_ball_points_inside_radius(r):
    X = ball_points(200, [0.1, 0.2, 0.3], r, seed=2)
    assert np.all(distance([0.1, 0.2, 0.3], X) <= r + 1e-12)
