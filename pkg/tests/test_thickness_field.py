import numpy as np
import pytest

from isoplate.core.exceptions import FittingError, GeometryError, LaminaIndexError, ParameterError
from isoplate.services import thickness_field as tf
from isoplate.services.nurbs import ParamPoint, element_quadrature, rectangle_patch, surface_point

A = 10.0
H_BAR = 0.2


@pytest.fixture
def patch():
    return rectangle_patch(A, A, 4, 4)


def _at(field, xi, eta):
    (x, y), _ = surface_point(field.patch, ParamPoint(xi, eta))
    return x, y, tf.total_thickness(field, ParamPoint(xi, eta))


# --- analytic builders ---


def test_tapered_x_profile():
    h = tf.tapered_x(A, H_BAR, 0.01)
    assert h(-A / 2, 0.0) == pytest.approx(H_BAR + 0.01 * A)
    assert h(A / 2, 3.0) == pytest.approx(H_BAR - 0.01 * A)
    assert h(0.0, -2.0) == pytest.approx(H_BAR)


def test_tapered_diagonal_is_constant_along_the_diagonal():
    h = tf.tapered_diagonal(A, H_BAR, 0.01)
    for s in (-5.0, -1.0, 2.5, 5.0):
        assert h(s, s) == pytest.approx(H_BAR)
    assert h(A / 2, -A / 2) == pytest.approx(H_BAR - np.sqrt(2) * 0.01 * A)


@pytest.mark.parametrize("builder,alpha", [
    (tf.tapered_x, 0.02),
    (tf.tapered_x, -0.03),
    (tf.tapered_diagonal, 0.015),
])
def test_tapered_ratio_that_thins_the_plate_to_zero_is_rejected(builder, alpha):
    with pytest.raises(ParameterError):
        builder(A, H_BAR, alpha)


def test_sine_wave_origin_moves_the_crest():
    centred = tf.sine_wave(A, 0.5, 0.2, 1, origin="center")
    edged = tf.sine_wave(A, 0.5, 0.2, 1, origin="edge")
    assert centred(0.0, 0.0) == pytest.approx(0.5 * 1.4)
    assert centred(A / 2, 0.0) == pytest.approx(0.5 * 0.6)
    assert edged(-A / 2, 0.0) == pytest.approx(0.5 * 1.4)
    assert edged(0.0, 1.0) == pytest.approx(0.5 * 0.6)


@pytest.mark.parametrize("kwargs", [
    {"alpha": 0.5, "n": 1},
    {"alpha": -0.1, "n": 1},
    {"alpha": 0.1, "n": 0},
    {"alpha": 0.1, "n": 1.5},
    {"alpha": 0.1, "n": 1, "origin": "corner"},
])
def test_sine_wave_rejects_bad_parameters(kwargs):
    with pytest.raises(ParameterError):
        tf.sine_wave(A, 0.5, **kwargs)


def test_uniform_rejects_non_positive_thickness():
    with pytest.raises(ParameterError):
        tf.uniform(0.0)


# --- fitted fields ---


def test_uniform_field_splits_thickness_between_laminae(patch):
    field = tf.fit_field(patch, tf.uniform(H_BAR), 4)
    assert field.n_laminae == 4
    np.testing.assert_allclose(field.control, H_BAR / 4)
    assert tf.eval_lamina_thickness(field, ParamPoint(0.3, 0.9), 2) == pytest.approx(H_BAR / 4)


@pytest.mark.parametrize("xi,eta", [(0.0, 0.0), (0.13, 0.71), (0.5, 0.5), (1.0, 0.4)])
def test_tapered_field_is_reproduced_exactly(patch, xi, eta):
    field = tf.fit_field(patch, tf.tapered_x(A, H_BAR, 0.01), 1)
    x, _, h = _at(field, xi, eta)
    assert h == pytest.approx(H_BAR - 0.02 * x, rel=1e-12)


def test_diagonal_field_is_reproduced_exactly(patch):
    field = tf.fit_field(patch, tf.tapered_diagonal(A, H_BAR, 0.01), 2)
    x, y, h = _at(field, 0.27, 0.64)
    assert h == pytest.approx(H_BAR - np.sqrt(2) * 0.01 * (x - y), rel=1e-12)


def test_sine_field_interpolates_at_greville_points():
    patch = rectangle_patch(A, A, 12, 12)
    function = tf.sine_wave(A, 0.5, 0.2, 1, origin="edge")
    field = tf.fit_field(patch, function, 1)
    x, y, h = _at(field, 0.0, 0.5)
    assert h == pytest.approx(function(x, y), rel=1e-12)
    x, y, h = _at(field, 0.37, 0.2)
    assert h == pytest.approx(function(x, y), rel=1e-2)


def test_per_lamina_function(patch):
    def lamina_profile(x, y):
        return np.array([0.05, 0.1, 0.05]) * (1.0 + 0.01 * x)

    field = tf.fit_field(patch, lamina_profile, 3)
    pt = ParamPoint(0.25, 0.25)
    (x, _), _ = surface_point(patch, pt)
    assert tf.eval_lamina_thickness(field, pt, 1) == pytest.approx(0.1 * (1 + 0.01 * x))


def test_fit_rejects_wrong_number_of_lamina_values(patch):
    with pytest.raises(FittingError):
        tf.fit_field(patch, lambda x, y: np.array([0.1, 0.1]), 3)


def test_lamina_index_out_of_range(patch):
    field = tf.fit_field(patch, tf.uniform(H_BAR), 2)
    with pytest.raises(LaminaIndexError):
        tf.eval_lamina_thickness(field, ParamPoint(0.5, 0.5), 2)


def test_field_rejects_non_positive_controls(patch):
    control = np.full((1,) + patch.shape, 0.1)
    control[0, 2, 3] = -0.01
    with pytest.raises(GeometryError):
        tf.ThicknessField(patch, control)


def test_field_rejects_mismatched_grid(patch):
    with pytest.raises(GeometryError):
        tf.ThicknessField(patch, np.full((2, 3, 3), 0.1))


def test_two_dimensional_control_is_a_single_lamina(patch):
    field = tf.ThicknessField(patch, np.full(patch.shape, 0.1))
    assert field.n_laminae == 1
    assert field.flat_control.shape == (1, patch.n_control)


# --- interfaces ---


def test_stack_interfaces_is_symmetric_about_midplane():
    z = tf.stack_interfaces(np.array([0.05, 0.1, 0.05]))
    np.testing.assert_allclose(z, [-0.1, -0.05, 0.05, 0.1])


def test_stack_interfaces_batched():
    z = tf.stack_interfaces(np.array([[0.1, 0.1], [0.2, 0.1]]))
    np.testing.assert_allclose(z, [[-0.1, 0.0, 0.1], [-0.15, 0.05, 0.15]])


def test_stack_interfaces_rejects_non_positive_thickness():
    with pytest.raises(GeometryError):
        tf.stack_interfaces(np.array([0.1, 0.0]))


def test_interfaces_at_point(patch):
    field = tf.fit_field(patch, tf.tapered_x(A, H_BAR, 0.01), 4)
    coords = tf.interfaces_at(field, ParamPoint(0.0, 0.5))
    assert coords.thickness == pytest.approx(H_BAR + 0.01 * A)
    assert coords.z[0] == pytest.approx(-coords.z[-1])
    assert coords.z.size == 5


def test_thickness_table_matches_pointwise_evaluation(patch):
    field = tf.fit_field(patch, tf.tapered_diagonal(A, H_BAR, 0.01), 2)
    grid = element_quadrature(patch, 3, 3)
    table = tf.lamina_thickness_table(field, grid.indices, grid.values)
    assert table.shape == (16, 9, 2)
    pt = ParamPoint(*grid.params[5, 4])
    assert table[5, 4].sum() == pytest.approx(tf.total_thickness(field, pt))


# --- volume ---


def test_volume_of_uniform_plate(patch):
    assert tf.plate_volume(tf.fit_field(patch, tf.uniform(H_BAR), 1)) == pytest.approx(H_BAR * A * A)


@pytest.mark.parametrize("builder", [tf.tapered_x, tf.tapered_diagonal])
def test_tapering_preserves_volume(patch, builder):
    field = tf.fit_field(patch, builder(A, H_BAR, 0.01), 4)
    assert tf.plate_volume(field) == pytest.approx(H_BAR * A * A, rel=1e-12)


def test_sine_wave_over_whole_wavelengths_preserves_volume():
    patch = rectangle_patch(A, A, 12, 12)
    field = tf.fit_field(patch, tf.sine_wave(A, 0.5, 0.2, 2, origin="edge"), 1)
    assert tf.plate_volume(field) == pytest.approx(0.5 * A * A, rel=1e-2)


# --- smoothness and lamina sums ---


def test_field_is_c1_across_interior_knots(patch, random_state):
    field = tf.ThicknessField(patch, random_state.uniform(0.1, 0.3, patch.shape))
    delta = 1e-7
    for knot in patch.xi.breakpoints[1:-1]:
        for eta in (0.1, 0.55, 0.9):
            def h(xi):
                return tf.total_thickness(field, ParamPoint(xi, eta))

            left = (h(knot) - h(knot - delta)) / delta
            right = (h(knot + delta) - h(knot)) / delta
            assert h(knot - delta) == pytest.approx(h(knot + delta), abs=1e-6)
            assert left == pytest.approx(right, abs=1e-4)


def test_lamina_thicknesses_sum_to_total(patch, random_state):
    field = tf.ThicknessField(patch, random_state.uniform(0.05, 0.1, (3,) + patch.shape))
    for xi, eta in random_state.uniform(0.0, 1.0, (25, 2)):
        pt = ParamPoint(xi, eta)
        laminae = sum(tf.eval_lamina_thickness(field, pt, k) for k in range(3))
        assert tf.total_thickness(field, pt) == pytest.approx(laminae, rel=1e-13)
        assert tf.interfaces_at(field, pt).thickness == pytest.approx(laminae, rel=1e-13)
