import warnings

import numpy as np
import pytest

from modhelm.errors import GeometryError
from modhelm.geometry import (Domain, apply_shift, curve_from_fourier, ellipse,
                              fourier_interpolate, shift_matrix, shift_multiplier,
                              spectral_derivative, winding_number)


def grid(n):
    return 2 * np.pi * np.arange(n) / n


def test_unit_circle_speed_and_curvature():
    c = ellipse((0, 0), (1, 1), 0, 64)
    np.testing.assert_allclose(c.speed, 1.0, atol=1e-14)
    np.testing.assert_allclose(c.curvature, 1.0, atol=1e-12)
    assert c.arc_length() == pytest.approx(2 * np.pi, rel=1e-14)


def test_ellipse_curvature_at_vertices():
    c = ellipse((0, 0), (2, 1), 0, 128)
    assert c.curvature[0] == pytest.approx(2.0, rel=1e-10)
    assert c.curvature[32] == pytest.approx(0.25, rel=1e-10)


def test_rotated_ellipse_is_swapped_ellipse():
    a = ellipse((0, 0), (2, 1), np.pi / 2, 64)
    b = ellipse((0, 0), (1, 2), 0, 64)
    # a(t) = b(t + pi/2)
    np.testing.assert_allclose(a.points, np.roll(b.points, -16, axis=0), atol=1e-14)


def test_normal_points_away_from_enclosed_region():
    c = ellipse((0.3, -0.2), (0.5, 0.2), 0.4, 64)
    center = np.array([0.3, -0.2])
    assert np.all(np.einsum("ij,ij->i", c.points - center, c.normal) > 0)


def test_fourier_circle_matches_ellipse():
    c = curve_from_fourier({0: 0.5 + 0.25j, 1: 0.7}, 64)
    e = ellipse((0.5, 0.25), (0.7, 0.7), 0, 64)
    np.testing.assert_allclose(c.points, e.points, atol=1e-15)


def test_fourier_clockwise_input_is_reoriented():
    c = curve_from_fourier({-1: 1.0}, 32)
    assert c.signed_area() > 0


def test_flower_derivative():
    n = 128
    t = grid(n)
    r = 1 + 0.2 * np.cos(5 * t)
    dr = -np.sin(5 * t)
    z = r * np.exp(1j * t)
    dz = (dr + 1j * r) * np.exp(1j * t)
    np.testing.assert_allclose(spectral_derivative(z), dz, atol=1e-12)


def test_figure_eight_rejected():
    with pytest.raises(GeometryError):
        curve_from_fourier({1: 1.0, 2: 1.5}, 64)


def test_too_high_mode_rejected():
    with pytest.raises(GeometryError):
        curve_from_fourier({0: 0, 1: 1, 16: 0.01}, 32)


def test_spectral_derivative_examples():
    t = grid(32)
    np.testing.assert_allclose(spectral_derivative(np.sin(3 * t)), 3 * np.cos(3 * t), atol=1e-13)
    np.testing.assert_allclose(spectral_derivative(np.full(32, 4.0)), 0.0, atol=1e-15)
    t = grid(64)
    np.testing.assert_allclose(spectral_derivative(np.exp(np.cos(t))),
                               -np.sin(t) * np.exp(np.cos(t)), atol=1e-10)


def test_fourier_interpolate():
    t = grid(32)
    v = np.sin(5 * t) + 0.3 * np.cos(2 * t)
    np.testing.assert_allclose(fourier_interpolate(v, t), v, atol=1e-14)
    assert fourier_interpolate(np.sin(5 * t), 0.123) == pytest.approx(np.sin(0.615), abs=1e-13)


def test_shift_operators_agree():
    n = 64
    rng = np.random.default_rng(0)
    v = rng.standard_normal(n)
    for s in (0.0113, -0.37, 1.9):
        direct = fourier_interpolate(v, grid(n) + s)
        np.testing.assert_allclose(shift_matrix(n, s) @ v, direct, atol=1e-14)
        np.testing.assert_allclose(apply_shift(v, shift_multiplier(n, s)), direct, atol=1e-14)


def test_odd_or_small_node_counts_rejected():
    with pytest.raises(GeometryError):
        ellipse((0, 0), (1, 1), 0, 63)
    with pytest.raises(GeometryError):
        ellipse((0, 0), (1, 1), 0, 8)
    with pytest.raises(GeometryError):
        ellipse((0, 0), (1, 0), 0, 64)


def test_winding_number():
    c = ellipse((0, 0), (1, 1), 0, 64)
    w = winding_number(c.points, [[0, 0], [2, 0], [0.9, 0.1]])
    np.testing.assert_array_equal(w, [1, 0, 1])


def holes(n=64):
    return [ellipse((-0.4, 0), (0.2, 0.1), 0.3, n), ellipse((0.4, 0.1), (0.15, 0.25), 1.0, n)]


def test_bounded_domain_normals_and_containment():
    outer = ellipse((0, 0), (1, 1), 0, 64)
    d = Domain([outer] + holes(), bounded=True)
    assert d.M == 2 and d.n_curves == 3 and d.size == 192
    np.testing.assert_array_equal(d.signs, [1, -1, -1])
    inside = d.contains([[0, 0.6], [-0.4, 0], [1.2, 0]])
    np.testing.assert_array_equal(inside, [True, False, False])
    # outer normals point away from the origin, hole normals into the hole
    assert np.all(np.einsum("ij,ij->i", d.normal(0), outer.points) > 0)
    assert np.all(np.einsum("ij,ij->i", d.normal(1), d.curves[1].points - [-0.4, 0]) < 0)
    np.testing.assert_allclose(d.curvature[:64], 1.0, atol=1e-12)


def test_unbounded_domain():
    d = Domain(holes(), bounded=False)
    assert d.M == 2
    assert d.contains([[5.0, 5.0]])[0]
    assert not d.contains([[0.4, 0.1]])[0]


def test_overlapping_curves_rejected():
    with pytest.raises(GeometryError):
        Domain([ellipse((0, 0), (0.3, 0.3), 0, 64), ellipse((0.2, 0), (0.3, 0.3), 0, 64)],
               bounded=False)


def test_hole_outside_outer_rejected():
    with pytest.raises(GeometryError):
        Domain([ellipse((0, 0), (1, 1), 0, 64), ellipse((3, 0), (0.2, 0.2), 0, 64)], bounded=True)


def test_close_curves_warn():
    a = ellipse((0, 0), (0.3, 0.3), 0, 64)
    b = ellipse((0.605, 0), (0.3, 0.3), 0, 64)
    with pytest.warns(UserWarning, match="apart"):
        Domain([a, b], bounded=False)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        Domain([a, ellipse((1.0, 0), (0.3, 0.3), 0, 64)], bounded=False)


def test_with_nodes_resamples():
    d = Domain(holes(32), bounded=False).with_nodes(64)
    ref = Domain(holes(64), bounded=False)
    np.testing.assert_allclose(d.points, ref.points, atol=1e-13)
