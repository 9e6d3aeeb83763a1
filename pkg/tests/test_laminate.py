from fractions import Fraction

import numpy as np
import pytest

from isoplate.core.exceptions import GeometryError, MaterialError
from isoplate.services.laminate import (
    DEFAULT_SHEAR_CORRECTION,
    LaminaMaterial,
    Layup,
    reduced_stiffness,
    resultants,
    section_stiffness,
    transform_stiffness,
)

COMPOSITE = LaminaMaterial.from_ratios(E2=1.0, E1_E2=25.0, G12_E2=0.5, G23_E2=0.2, nu12=0.25)


def _exact_q(E1, E2, G12, nu12):
    """Plane-stress reduced stiffness in exact arithmetic."""
    E1, E2, G12, nu12 = (Fraction(v) for v in (E1, E2, G12, nu12))
    denom = 1 - nu12 * nu12 * E2 / E1
    return [
        [E1 / denom, nu12 * E2 / denom, 0],
        [nu12 * E2 / denom, E2 / denom, 0],
        [0, 0, G12],
    ]


def _as_float(rows):
    return np.array([[float(v) for v in row] for row in rows])


# --- materials ---


def test_isotropic_material_shear_modulus():
    mat = LaminaMaterial.isotropic(3.0e6, 0.25)
    assert mat.G12 == pytest.approx(1.2e6)
    assert mat.is_isotropic


def test_from_ratios_defaults_g13_to_g12():
    assert COMPOSITE.G13 == pytest.approx(0.5)
    assert COMPOSITE.G23 == pytest.approx(0.2)
    assert COMPOSITE.E1 == pytest.approx(25.0)
    assert COMPOSITE.nu21 == pytest.approx(0.01)
    assert not COMPOSITE.is_isotropic


@pytest.mark.parametrize("kwargs", [
    {"E1": -1.0, "E2": 1.0, "G12": 1.0, "G23": 1.0, "G13": 1.0, "nu12": 0.3},
    {"E1": 1.0, "E2": 1.0, "G12": 0.0, "G23": 1.0, "G13": 1.0, "nu12": 0.3},
    {"E1": 1.0, "E2": 1.0, "G12": 1.0, "G23": 1.0, "G13": 1.0, "nu12": 0.5},
    {"E1": 1.0, "E2": 1.0, "G12": 1.0, "G23": 1.0, "G13": 1.0, "nu12": -0.1},
])
def test_invalid_material_rejected(kwargs):
    with pytest.raises(MaterialError):
        LaminaMaterial(**kwargs)


# --- reduced and transformed stiffness ---


def test_reduced_stiffness_matches_exact_isotropic():
    Q, Qs = reduced_stiffness(LaminaMaterial.isotropic(3.0, 0.25))
    np.testing.assert_allclose(Q, _as_float(_exact_q(3, 3, Fraction(6, 5), Fraction(1, 4))), rtol=1e-15)
    np.testing.assert_allclose(Qs, np.diag([1.2, 1.2]))


def test_reduced_stiffness_matches_exact_orthotropic():
    Q, _ = reduced_stiffness(COMPOSITE)
    np.testing.assert_allclose(Q, _as_float(_exact_q(25, 1, Fraction(1, 2), Fraction(1, 4))), rtol=1e-14)


def test_zero_rotation_is_identity():
    Q, Qs = reduced_stiffness(COMPOSITE)
    qbar, qsbar = transform_stiffness(Q, Qs, 0.0)
    np.testing.assert_allclose(qbar, Q)
    np.testing.assert_allclose(qsbar, Qs)


def test_ninety_degree_rotation_swaps_axes():
    Q, Qs = reduced_stiffness(COMPOSITE)
    qbar, qsbar = transform_stiffness(Q, Qs, 90.0)
    assert qbar[0, 0] == pytest.approx(Q[1, 1])
    assert qbar[1, 1] == pytest.approx(Q[0, 0])
    assert qbar[0, 1] == pytest.approx(Q[0, 1])
    assert qbar[2, 2] == pytest.approx(Q[2, 2])
    np.testing.assert_allclose(qsbar, np.diag([Qs[1, 1], Qs[0, 0]]), atol=1e-15)


@pytest.mark.parametrize("theta", [15.0, 30.0, 45.0, -45.0, 72.5])
def test_rotation_preserves_invariants(theta):
    Q, Qs = reduced_stiffness(COMPOSITE)
    qbar, qsbar = transform_stiffness(Q, Qs, theta)
    np.testing.assert_allclose(qbar, qbar.T, atol=1e-12)
    assert qbar[0, 0] + qbar[1, 1] + 2 * qbar[0, 1] == pytest.approx(Q[0, 0] + Q[1, 1] + 2 * Q[0, 1])
    assert qbar[2, 2] - qbar[0, 1] == pytest.approx(Q[2, 2] - Q[0, 1])
    assert np.trace(qsbar) == pytest.approx(np.trace(Qs))


def test_plus_minus_45_coupling_terms_change_sign():
    Q, Qs = reduced_stiffness(COMPOSITE)
    plus, _ = transform_stiffness(Q, Qs, 45.0)
    minus, _ = transform_stiffness(Q, Qs, -45.0)
    assert plus[0, 2] == pytest.approx(-minus[0, 2])
    assert plus[0, 2] != pytest.approx(0.0)


# --- layups ---


def test_layup_symmetry_and_lookup():
    layup = Layup.from_angles([0, 90, 90, 0], COMPOSITE)
    assert layup.n_laminae == 4
    assert layup.is_symmetric
    assert layup.plies[1].angle == 90.0
    assert not Layup.from_angles([0, 90], COMPOSITE).is_symmetric


def test_empty_layup_rejected():
    with pytest.raises(MaterialError):
        Layup(())


# --- section stiffness ---


def test_single_lamina_section_matches_closed_form():
    h = 0.2
    layup = Layup.from_angles([0.0], LaminaMaterial.isotropic(3.0, 0.25))
    section = section_stiffness(layup, np.array([-h / 2, h / 2]))
    Q = _as_float(_exact_q(3, 3, Fraction(6, 5), Fraction(1, 4)))
    np.testing.assert_allclose(section.A, Q * h)
    np.testing.assert_allclose(section.B, 0.0, atol=1e-15)
    np.testing.assert_allclose(section.D, Q * h ** 3 / 12)
    np.testing.assert_allclose(section.As, DEFAULT_SHEAR_CORRECTION * h * np.diag([1.2, 1.2]))


def test_symmetric_layup_has_no_coupling():
    layup = Layup.from_angles([0, 90, 90, 0], COMPOSITE)
    section = section_stiffness(layup, np.array([-0.1, -0.05, 0.0, 0.05, 0.1]))
    np.testing.assert_allclose(section.B, 0.0, atol=1e-15)


def test_unsymmetric_crossply_coupling_matches_exact():
    h = Fraction(1, 5)
    layup = Layup.from_angles([0, 90], COMPOSITE)
    section = section_stiffness(layup, np.array([-0.1, 0.0, 0.1]))
    Q = _exact_q(25, 1, Fraction(1, 2), Fraction(1, 4))
    expected_b11 = h * h / 8 * (Q[1][1] - Q[0][0])
    assert section.B[0, 0] == pytest.approx(float(expected_b11), rel=1e-13)
    assert section.B[1, 1] == pytest.approx(-float(expected_b11), rel=1e-13)


def test_batched_interfaces_match_pointwise():
    layup = Layup.from_angles([45, -45, -45, 45], COMPOSITE)
    z = np.array([
        [-0.1, -0.05, 0.0, 0.05, 0.1],
        [-0.12, -0.07, -0.01, 0.04, 0.12],
    ])
    batch = section_stiffness(layup, z)
    for row in range(2):
        single = section_stiffness(layup, z[row])
        np.testing.assert_allclose(batch.A[row], single.A)
        np.testing.assert_allclose(batch.D[row], single.D)
        np.testing.assert_allclose(batch.As[row], single.As)
    assert batch.abd.shape == (2, 6, 6)


def test_interface_count_must_match_layup():
    with pytest.raises(GeometryError):
        section_stiffness(Layup.from_angles([0, 90], COMPOSITE), np.array([-0.1, 0.1]))


def test_interfaces_must_increase():
    with pytest.raises(GeometryError):
        section_stiffness(Layup.from_angles([0, 90], COMPOSITE), np.array([-0.1, 0.05, 0.0]))


def test_resultants_follow_constitutive_law():
    layup = Layup.from_angles([0, 90], COMPOSITE)
    section = section_stiffness(layup, np.array([-0.1, 0.0, 0.1]))
    eps, kappa, gamma = np.array([1e-3, -2e-4, 5e-4]), np.array([0.01, 0.02, -0.005]), np.array([1e-4, 2e-4])
    N, M, Q = resultants(section, eps, kappa, gamma)
    np.testing.assert_allclose(np.concatenate((N, M)), section.abd @ np.concatenate((eps, kappa)))
    np.testing.assert_allclose(Q, section.As @ gamma)


def test_crossply_section_matches_per_ply_summation():
    z = [Fraction(v, 20) for v in (-2, -1, 0, 1, 2)]
    q0 = _exact_q(25, 1, Fraction(1, 2), Fraction(1, 4))
    q90 = [[q0[1][1], q0[0][1], 0], [q0[1][0], q0[0][0], 0], [0, 0, q0[2][2]]]
    plies = [q0, q90, q90, q0]
    A = [[sum(q[i][j] * (z[k + 1] - z[k]) for k, q in enumerate(plies)) for j in range(3)] for i in range(3)]
    D = [[sum(q[i][j] * (z[k + 1] ** 3 - z[k] ** 3) / 3 for k, q in enumerate(plies)) for j in range(3)]
         for i in range(3)]

    section = section_stiffness(Layup.from_angles([0, 90, 90, 0], COMPOSITE), np.array([float(v) for v in z]))
    np.testing.assert_allclose(section.A, _as_float(A), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(section.D, _as_float(D), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("angles", [[0, 90], [30, -60, 15]])
def test_section_scales_with_interface_coordinates(angles):
    layup = Layup.from_angles(angles, COMPOSITE)
    z = np.linspace(-0.1, 0.13, len(angles) + 1)
    s = 1.7
    base, scaled = section_stiffness(layup, z), section_stiffness(layup, s * z)
    np.testing.assert_allclose(scaled.A, s * base.A, rtol=1e-12)
    np.testing.assert_allclose(scaled.B, s ** 2 * base.B, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(scaled.D, s ** 3 * base.D, rtol=1e-12)
    np.testing.assert_allclose(scaled.As, s * base.As, rtol=1e-12)


@pytest.mark.parametrize("theta", [12.0, 45.0, -67.5, 90.0])
def test_rotation_is_undone_by_opposite_rotation(theta):
    Q, Qs = reduced_stiffness(COMPOSITE)
    forward, forward_s = transform_stiffness(Q, Qs, theta)
    back, back_s = transform_stiffness(forward, forward_s, -theta)
    np.testing.assert_allclose(back, Q, rtol=1e-12, atol=1e-12 * np.abs(Q).max())
    np.testing.assert_allclose(back_s, Qs, rtol=1e-12, atol=1e-14)


def test_random_sections_are_positive_definite(random_state):
    for _ in range(50):
        n = int(random_state.integers(1, 6))
        layup = Layup.from_angles(random_state.uniform(-90.0, 90.0, n), COMPOSITE)
        z = np.cumsum(random_state.uniform(0.01, 0.1, n + 1))
        section = section_stiffness(layup, z - z.mean())
        for block in (section.A, section.D, section.As):
            assert np.linalg.eigvalsh(block).min() > 0
