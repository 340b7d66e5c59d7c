import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from passivetrack import geometry as g

LAM1 = g.wavelength(60.98e9)
LAM2 = g.wavelength(60.985e9)


def test_adoa_of_desk_geometry():
    a = g.adoa_from_positions([2.7, 0], [1.8, -1.4])
    assert a.phi_rx == pytest.approx(37.8749836510982, abs=1e-9)
    assert a.phi_tx1 == pytest.approx(57.26477372789239, abs=1e-9)
    assert a.half_plane == -1
    assert not a.collinear


def test_adoa_right_triangle():
    a = g.adoa_from_positions([1, 0], [1, 1])
    assert (a.phi_rx, a.phi_tx1, a.half_plane) == pytest.approx((45.0, 90.0, 1))


def test_adoa_collinear_is_flagged():
    a = g.adoa_from_positions([2, 0], [4, 0])
    assert a.collinear
    with pytest.raises(g.GeometryError):
        g.tx2_position(a, 2.0)


@pytest.mark.parametrize("adoa, d, expected", [
    (g.AdoaPair(37.8749836510982, 57.26477372789239, -1), 2.7, [1.8, -1.4]),
    (g.AdoaPair(45, 90, 1), 1.0, [1.0, 1.0]),
    (g.AdoaPair(60, 60, 1), 1.0, [0.5, np.sqrt(3) / 2]),
])
def test_tx2_position(adoa, d, expected):
    np.testing.assert_allclose(g.tx2_position(adoa, d), expected, atol=1e-9)


def test_adoa_rejects_infeasible_triangle():
    with pytest.raises(ValueError):
        g.AdoaPair(100, 90, 1)
    with pytest.raises(ValueError):
        g.AdoaPair(30, 40, 0)


@settings(max_examples=200, deadline=None)
@given(d=st.floats(0.2, 20), x=st.floats(-20, 20), y=st.floats(-20, 20))
def test_adoa_round_trip(d, x, y):
    tx2 = np.array([x, y])
    if np.hypot(x, y) < 1e-2 or abs(y) < 1e-2 or np.hypot(x - d, y) < 1e-2:
        return
    a = g.adoa_from_positions([d, 0], tx2)
    np.testing.assert_allclose(g.tx2_position(a, d), tx2, atol=1e-9, rtol=0)


def test_blocker_position_examples():
    mp = g.MotionParams(2.7, [1, 2], [[0.5, -0.5]])
    np.testing.assert_allclose(g.blocker_position(mp, 2, 0.2), [1.1, 1.9])
    np.testing.assert_allclose(g.blocker_position(mp, 1, 0.2), [1, 2])
    mp = g.MotionParams(2.7, [0, 1], [[1, 0], [0, 1]])
    np.testing.assert_allclose(g.blocker_position(mp, 3, 0.2), [0.2, 1.2])
    with pytest.raises(IndexError):
        g.blocker_position(mp, 4, 0.2)


def test_positions_telescope():
    rng = np.random.default_rng(3)
    mp = g.MotionParams(2.0, rng.normal(size=2), rng.normal(size=(7, 2)))
    P = mp.positions(0.2)
    np.testing.assert_allclose(np.diff(P, axis=0), mp.velocities[:-1] * 0.2, rtol=0, atol=1e-14)


@pytest.mark.parametrize("p, expected", [([1, 1], 45.0), ([2.28, 0], 0.0), ([0, 2], 90.0), ([1, -1], 45.0)])
def test_aoa(p, expected):
    assert g.aoa(p) == pytest.approx(expected)


def test_aoa_scale_invariant_and_rejects_origin():
    assert g.aoa([3.0, 1.2]) == pytest.approx(g.aoa([0.3, 0.12]), abs=1e-12)
    with pytest.raises(g.GeometryError):
        g.aoa([0, 0])


def test_doppler_examples():
    assert g.bistatic_doppler([1, 1], [0, -1], [2.7, 0], 4.9163e-3) == pytest.approx(-247.0, abs=0.05)
    assert g.bistatic_doppler([1, 1], [0, -1], [1.8, -1.4], 4.91585e-3) == pytest.approx(-336.8, abs=0.05)
    assert g.bistatic_doppler([1.35, 0], [0.3, 0.7], [2.7, 0], LAM1) == pytest.approx(0.0, abs=1e-12)


def test_doppler_is_path_length_rate():
    p = np.array([1.3, 0.9])
    v = np.array([-0.4, 0.7])
    tx = np.array([2.7, 0.0])

    def path(q):
        return np.linalg.norm(q - tx) + np.linalg.norm(q)

    h = 1e-6
    rate = (path(p + h * v) - path(p - h * v)) / (2 * h)
    assert g.bistatic_doppler(p, v, tx, LAM1) == pytest.approx(rate / LAM1, rel=1e-7)


def test_doppler_linear_in_velocity():
    rng = np.random.default_rng(0)
    p, v1, v2 = rng.normal(size=(3, 2)) + [2, 2]
    f = lambda v: g.bistatic_doppler(p, v, [2.7, 0], LAM1)  # noqa: E731
    assert f(2 * v1 - 3 * v2) == pytest.approx(2 * f(v1) - 3 * f(v2), rel=1e-12)


def test_true_features_first_sweep():
    a = g.adoa_from_positions([2.7, 0], [1.8, -1.4])
    mp = g.MotionParams(2.7, [1, 1], [[0, -1]])
    h = g.true_features(mp, a, (LAM1, LAM2), 0.2)
    np.testing.assert_allclose(h[0], [45.0, -247.0, -336.8], atol=0.05)


def test_true_features_match_per_sweep_evaluation():
    a = g.adoa_from_positions([2.7, 0], [1.8, -1.4])
    mp = g.MotionParams(2.7, [1.5, 1.2], [[0.2, -0.5], [-0.3, -0.4]])
    H = g.true_features(mp, a, (LAM1, LAM2), 0.2)
    tx2 = g.tx2_position(a, 2.7)
    for k in range(2):
        p = g.blocker_position(mp, k + 1, 0.2)
        v = mp.velocities[k]
        expected = [g.aoa(p), g.bistatic_doppler(p, v, [2.7, 0], LAM1), g.bistatic_doppler(p, v, tx2, LAM2)]
        np.testing.assert_allclose(H[k], expected, rtol=1e-12)


def test_zero_velocity_gives_zero_doppler():
    a = g.adoa_from_positions([2.7, 0], [1.8, -1.4])
    mp = g.MotionParams(2.7, [1.5, 1.2], np.zeros((4, 2)))
    H = g.true_features(mp, a, (LAM1, LAM2), 0.2)
    assert np.all(H[:, 1:] == 0)
    assert np.all(H[:, 0] == H[0, 0])


def test_motion_params_vector_round_trip():
    mp = g.MotionParams(2.7, [1, 1], [[0, -1], [0.5, 0.2]])
    back = g.MotionParams.from_vector(mp.to_vector())
    assert back.d == mp.d
    np.testing.assert_array_equal(back.velocities, mp.velocities)
    with pytest.raises(ValueError):
        g.MotionParams(-1, [0, 0], [[0, 0]])
