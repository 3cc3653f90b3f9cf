import warnings

import numpy as np
import pytest

from deformed_anosov.errors import InvalidInput, RefinementWarning
from deformed_anosov.geometry import from_chart, grid_points, symmetric_eigenframe
from deformed_anosov.manifolds import (StableDisk, UnstableCurve, bad_set_estimate, coverage_ladder,
                                       disk_invariance, grow_unstable_curve, largest_stable_disk,
                                       local_unstable_curves, phc_plus_coverage, transverse_hit,
                                       u_saturation_proxy, unstable_box_coverage, uu_directions)
from deformed_anosov.verification import RegionSpec

from conftest import BV_MATRIX

MU = 5.048917339522305


@pytest.fixture(scope="module")
def bv_disk(bv_t3):
    return largest_stable_disk(bv_t3.map, bv_t3.p, bv_t3.frame, 0.22)


@pytest.fixture(scope="module")
def bv_tube(bv_t3):
    box = bv_t3.deformation.perturbation_box()
    return RegionSpec(bv_t3.p, bv_t3.frame, 1.2 * box[0], 1.2 * np.hypot(box[1], box[2]), bv_t3.radius)


def _segment(disk, a, b, n=2):
    s = np.linspace(0, 1, n)[:, None]
    return UnstableCurve(from_chart(np.asarray(a) + s * (np.asarray(b) - np.asarray(a)), disk.center, disk.frame),
                         np.zeros(3), 0, 0)


def test_disk_radius_bounds():
    with pytest.raises(InvalidInput):
        StableDisk(np.zeros(3), np.eye(3), 0.6)
    with pytest.raises(InvalidInput):
        StableDisk(np.zeros(3), np.eye(3), 0.0)


def test_stable_disk_invariant(bv_t3, bv_disk):
    assert bv_disk.radius > 0.2
    du, ratio = disk_invariance(bv_t3.map, bv_disk)
    assert du <= 1e-12 and ratio <= 0.98
    core = StableDisk(bv_t3.p, bv_t3.frame, 0.5 * bv_t3.deformation.F.core_radius)
    du, ratio = disk_invariance(bv_t3.map, core)
    assert du <= 1e-15
    assert ratio == pytest.approx(MU**-0.5, rel=1e-10)


def test_no_disk_for_tilted_frame(bv_t3):
    tilt = np.array([[0, 1, 0], [1, 0, 0], [0, 0, -1.0]])
    with pytest.raises(InvalidInput):
        largest_stable_disk(bv_t3.map, bv_t3.p, tilt, 0.1, n=200)


def test_transverse_hit_examples():
    disk = StableDisk(np.full(3, 0.5), np.eye(3), 0.1)
    hit = transverse_hit(_segment(disk, [-0.01, 0, 0], [0.01, 0, 0]), disk)
    assert len(hit.points) == 1
    assert np.allclose(hit.points[0], 0.0, atol=1e-15)
    assert hit.angles[0] == pytest.approx(np.pi / 2)
    hit = transverse_hit(_segment(disk, [-0.01, -0.01, 0], [0.01, 0.01, 0]), disk)
    assert hit.angles[0] == pytest.approx(np.arctan(1.0))
    hit = transverse_hit(_segment(disk, [0.01, -0.05, 0], [0.01, 0.05, 0]), disk)
    assert len(hit.points) == 0 and len(hit.nontransverse) == 0
    hit = transverse_hit(_segment(disk, [-1e-5, -0.05, 0], [1e-5, 0.05, 0]), disk, angle_min=1e-3)
    assert len(hit.points) == 0 and len(hit.nontransverse) == 1
    # crossing outside the disk radius
    hit = transverse_hit(_segment(disk, [-0.01, 0.2, 0], [0.01, 0.2, 0]), disk)
    assert len(hit.points) == 0
    with pytest.raises(InvalidInput):
        transverse_hit(_segment(disk, [-0.01, 0, 0], [0.01, 0, 0]), disk, angle_min=0.0)


def test_transverse_hit_across_lattice():
    disk = StableDisk(np.zeros(3), np.eye(3), 0.1)
    c = _segment(disk, [-0.02, 0.01, 0.0], [0.02, 0.01, 0.0], n=5)
    assert c.points[:, 0].min() >= 0.0
    assert len(transverse_hit(c, disk).points) == 1


def test_linear_curve_is_straight(bv_base):
    _, Q = symmetric_eigenframe(np.array(BV_MATRIX, float))
    x = np.array([0.3, 0.6, 0.1])
    c = grow_unstable_curve(bv_base, x, L=0.4, N=8, h_max=0.01)
    t = c.tangents()
    assert np.all(np.abs(np.abs(t @ Q[:, 0]) - 1.0) < 1e-10)
    assert np.all(c.spacing() <= 0.01 + 1e-15)
    assert c.arc_length <= 0.4 + 1e-12
    assert c.arc_length > 0.3


def test_product_curve_stays_in_slice(catxid_base):
    x = np.array([0.3, 0.6, 0.27])
    c = grow_unstable_curve(catxid_base, x, L=5.0, N=15, h_max=0.05)
    assert np.abs(c.points[:, 2] - 0.27).max() < 1e-12


def test_deformed_curve_in_core_follows_axis(bv_t3):
    r = 0.2 * bv_t3.deformation.F.core_radius
    x = from_chart(np.array([[0.0, 0.3 * r, -0.2 * r]]), bv_t3.p, bv_t3.frame)[0]
    d = uu_directions(bv_t3.map, x[None])[0]
    assert abs(abs(d @ bv_t3.frame[:, 0]) - 1.0) < 1e-12
    c = grow_unstable_curve(bv_t3.map, x, L=0.5 * r, N=1, h_max=1e-3, direction=d)
    assert np.all(np.abs(np.abs(c.tangents() @ bv_t3.frame[:, 0]) - 1.0) < 1e-9)


def test_curve_tangents_enter_cone(bv_t3):
    from deformed_anosov.geometry import ConeSpec
    from deformed_anosov.lyapunov import in_cone

    cone = ConeSpec(bv_t3.deformation.xi_rotated, bv_t3.frame)
    c = grow_unstable_curve(bv_t3.map, np.array([0.12, 0.77, 0.41]), L=20.0, N=12, h_max=0.05)
    assert all(in_cone(cone, t) for t in c.tangents())


def test_local_curves_pass_through_points(bv_t3):
    X = np.random.default_rng(2).random((4, 3))
    curves = local_unstable_curves(bv_t3.map, X, 0.05, 6, 0.01)
    for x, c in zip(X, curves):
        assert np.min(np.linalg.norm(((c.points - x + 0.5) % 1.0) - 0.5, axis=1)) < 0.01


def test_product_base_coverage_is_slab(catxid_base):
    _, Q = symmetric_eigenframe(np.diag([1.0, 1.0, 1.0]))
    w, V = np.linalg.eigh(np.array([[2.0, 1], [1, 1]]))
    frame = np.zeros((3, 3))
    frame[:2, 0] = V[:, 1]
    frame[:2, 1] = V[:, 0]
    frame[2, 2] = 1.0
    if np.linalg.det(frame) < 0:
        frame[:, 1] *= -1
    disk = StableDisk(np.zeros(3), frame, 0.219)
    rep = phc_plus_coverage(catxid_base, disk, grid=16, N=20, L=50.0)
    slab = np.mean(np.abs(((grid_points(16)[:, 2] + 0.5) % 1.0) - 0.5) < 0.219)
    assert rep.fraction == pytest.approx(slab, abs=1e-12)
    assert rep.fraction == pytest.approx(2 * 0.219, abs=1 / 16)


def test_coverage_ladder_monotone(bv_t3, bv_disk, bv_tube):
    reps = coverage_ladder(bv_t3.map, bv_disk, 8, [3, 6, 12], [5, 20], bv_tube)
    table = {(r.N, r.L): r.fraction for r in reps}
    for N in (3, 6, 12):
        assert table[(N, 5.0)] <= table[(N, 20.0)]
    for L in (5.0, 20.0):
        assert table[(3, L)] <= table[(6, L)] <= table[(12, L)]
    assert table[(12, 20.0)] == 1.0
    assert all(0.0 <= f <= 1.0 for f in table.values())


def test_bad_set_nested(bv_t3, bv_disk, bv_tube):
    with warnings.catch_warnings():
        warnings.simplefilter("error", RefinementWarning)
        reps = bad_set_estimate(bv_t3.map, bv_disk, 8, [2, 4, 8], L=20.0, tube=bv_tube)
    clouds = [{tuple(x) for x in np.round(r.failures, 12)} for r in reps]
    assert clouds[2] <= clouds[1] <= clouds[0]
    with pytest.raises(InvalidInput):
        bad_set_estimate(bv_t3.map, bv_disk, 8, [4, 2])


def test_horizon_zero_is_tube(bv_t3, bv_disk, bv_tube):
    X = grid_points(64)
    rep = coverage_ladder(bv_t3.map, bv_disk, 64, [0], [50.0], bv_tube)[0]
    assert rep.fraction == pytest.approx(bv_tube.contains(X).mean(), abs=0)
    assert rep.fraction > 0


def test_u_saturation_proxy(bv_t3, bv_disk, bv_tube):
    rep = coverage_ladder(bv_t3.map, bv_disk, 8, [2], [5.0], bv_tube)[0]
    assert len(rep.failures) > 0
    frac = u_saturation_proxy(bv_t3.map, bv_disk, rep.failures, 2, 5.0, tube=bv_tube, max_points=16)
    assert 0.5 <= frac <= 1.0


def test_box_coverage_proxy_grows(bv_base):
    p = np.zeros(3)
    d = uu_directions(bv_base, p[None])[0]
    a = unstable_box_coverage(bv_base, p, d, L=5.0, boxes=8)
    b = unstable_box_coverage(bv_base, p, d, L=50.0, boxes=8)
    assert a["proxy"] == "unstable-curve box coverage"
    assert 0 < a["fraction"] < b["fraction"] <= 1.0
