"""
Classical lamination theory: lamina stiffness, rotation to plate axes and
position-dependent section stiffness.

Strain ordering is (eps_xx, eps_yy, gamma_xy) in-plane and (gamma_yz, gamma_xz)
for transverse shear. Angles are in degrees, measured from the x axis to the
fibre direction.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from isoplate.core.exceptions import GeometryError, MaterialError

DEFAULT_SHEAR_CORRECTION = 5.0 / 6.0


@dataclass(frozen=True)
class LaminaMaterial:
    E1: float
    E2: float
    G12: float
    G23: float
    G13: float
    nu12: float

    def __post_init__(self):
        for name in ("E1", "E2", "G12", "G23", "G13"):
            if not getattr(self, name) > 0:
                raise MaterialError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.nu12 < 0.5:
            raise MaterialError(f"nu12 must lie in (0, 0.5), got {self.nu12}")
        if self.nu12 ** 2 * self.E2 / self.E1 >= 1:
            raise MaterialError("plane-stress stiffness is not positive definite (nu12^2 E2/E1 >= 1)")

    @property
    def nu21(self) -> float:
        return self.nu12 * self.E2 / self.E1

    @property
    def is_isotropic(self) -> bool:
        return self.E1 == self.E2 and self.G12 == self.G13 == self.G23

    @classmethod
    def isotropic(cls, E: float, nu: float) -> "LaminaMaterial":
        G = E / (2.0 * (1.0 + nu))
        return cls(E1=E, E2=E, G12=G, G23=G, G13=G, nu12=nu)

    @classmethod
    def from_ratios(
        cls,
        E2: float = 1.0,
        E1_E2: float = 25.0,
        G12_E2: float = 0.5,
        G23_E2: float = 0.2,
        G13_E2: float | None = None,
        nu12: float = 0.25,
    ) -> "LaminaMaterial":
        """Orthotropic lamina from modulus ratios; G13 defaults to G12."""
        G13_E2 = G12_E2 if G13_E2 is None else G13_E2
        return cls(E1=E1_E2 * E2, E2=E2, G12=G12_E2 * E2, G23=G23_E2 * E2, G13=G13_E2 * E2, nu12=nu12)


@dataclass(frozen=True)
class Ply:
    angle: float
    material: LaminaMaterial


@dataclass(frozen=True)
class Layup:
    """Plies listed bottom lamina first."""

    plies: tuple[Ply, ...]

    def __post_init__(self):
        if not self.plies:
            raise MaterialError("a layup needs at least one lamina")
        object.__setattr__(self, "plies", tuple(self.plies))

    @classmethod
    def from_angles(cls, angles: Iterable[float], material: LaminaMaterial) -> "Layup":
        return cls(tuple(Ply(float(angle), material) for angle in angles))

    @property
    def n_laminae(self) -> int:
        return len(self.plies)

    @property
    def angles(self) -> tuple[float, ...]:
        return tuple(ply.angle for ply in self.plies)

    @property
    def is_symmetric(self) -> bool:
        return self.angles == self.angles[::-1] and all(
            a.material == b.material for a, b in zip(self.plies, self.plies[::-1])
        )

    @cached_property
    def transformed(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (Qbar, Qsbar) of shapes (n, 3, 3) and (n, 2, 2)."""
        pairs = [transform_stiffness(*reduced_stiffness(ply.material), ply.angle) for ply in self.plies]
        return np.array([q for q, _ in pairs]), np.array([qs for _, qs in pairs])


@dataclass(frozen=True)
class SectionStiffness:
    """A, B, D (..., 3, 3) and As (..., 2, 2); leading axes index evaluation points."""

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    As: np.ndarray

    @property
    def abd(self) -> np.ndarray:
        """The (..., 6, 6) block [[A, B], [B, D]] of the membrane-bending law."""
        top = np.concatenate((self.A, self.B), axis=-1)
        bottom = np.concatenate((self.B, self.D), axis=-1)
        return np.concatenate((top, bottom), axis=-2)


def reduced_stiffness(mat: LaminaMaterial) -> tuple[np.ndarray, np.ndarray]:
    denom = 1.0 - mat.nu12 * mat.nu21
    Q = np.array([
        [mat.E1 / denom, mat.nu12 * mat.E2 / denom, 0.0],
        [mat.nu12 * mat.E2 / denom, mat.E2 / denom, 0.0],
        [0.0, 0.0, mat.G12],
    ])
    Qs = np.diag([mat.G23, mat.G13])
    return Q, Qs


def _strain_rotation(theta: float) -> tuple[np.ndarray, np.ndarray]:
    rad = np.deg2rad(theta)
    c, s = np.cos(rad), np.sin(rad)
    T = np.array([
        [c * c, s * s, c * s],
        [s * s, c * c, -c * s],
        [-2 * c * s, 2 * c * s, c * c - s * s],
    ])
    Ts = np.array([[c, -s], [s, c]])
    return T, Ts


def transform_stiffness(Q: np.ndarray, Qs: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate lamina stiffness into plate axes: Qbar = T^T Q T with T the engineering-strain rotation."""
    T, Ts = _strain_rotation(theta)
    return T.T @ Q @ T, Ts.T @ Qs @ Ts


def section_stiffness(layup: Layup, interfaces: np.ndarray, Ks: float = DEFAULT_SHEAR_CORRECTION) -> SectionStiffness:
    """Integrate lamina stiffness through the thickness.

    `interfaces` has shape (n_laminae + 1,) or (..., n_laminae + 1) for a batch
    of points.
    """
    z = np.asarray(interfaces, dtype=float)
    if z.shape[-1] != layup.n_laminae + 1:
        raise GeometryError(f"expected {layup.n_laminae + 1} interface coordinates, got {z.shape[-1]}")
    if np.any(np.diff(z, axis=-1) <= 0):
        raise GeometryError("interface coordinates must be strictly increasing")

    qbar, qsbar = layup.transformed
    dz1 = z[..., 1:] - z[..., :-1]
    dz2 = z[..., 1:] ** 2 - z[..., :-1] ** 2
    dz3 = z[..., 1:] ** 3 - z[..., :-1] ** 3
    return SectionStiffness(
        A=np.einsum("...k,kij->...ij", dz1, qbar),
        B=0.5 * np.einsum("...k,kij->...ij", dz2, qbar),
        D=np.einsum("...k,kij->...ij", dz3, qbar) / 3.0,
        As=Ks * np.einsum("...k,kij->...ij", dz1, qsbar),
    )


def resultants(
    section: SectionStiffness, eps: np.ndarray, kappa: np.ndarray, gamma: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(N, M, Q) from generalized strains; batched over leading axes."""
    N = np.einsum("...ij,...j->...i", section.A, eps) + np.einsum("...ij,...j->...i", section.B, kappa)
    M = np.einsum("...ij,...j->...i", section.B, eps) + np.einsum("...ij,...j->...i", section.D, kappa)
    Q = np.einsum("...ij,...j->...i", section.As, gamma)
    return N, M, Q
