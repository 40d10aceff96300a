"""
Spin Hamiltonians of the NV ground and excited triplets and their spin mixing.

Frequencies are in Hz, fields in tesla and angles in radians. Matrices are written in
the S_z eigenbasis ordered m_s = (+1, 0, -1).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import constants, linalg

from nvkinetics.config import settings
from nvkinetics.exceptions import NonHermitianError

logger = logging.getLogger(__name__)

BOHR_MAGNETON_HZ_PER_T = constants.physical_constants["Bohr magneton in Hz/T"][0]

# Rows of the S_z eigenbasis holding the zero-field states |1^0>, |2^0>, |3^0>
# (m_s = 0, -1, +1).
ZERO_FIELD_ORDER = (1, 2, 0)


class Manifold(str, Enum):
    """Electronic triplet manifold."""

    GROUND = "ground"
    EXCITED = "excited"


@dataclass(frozen=True)
class SpinSystemParams:
    """Physical constants of the NV spin system."""

    d_gs: float = settings.D_GS
    d_es: float = settings.D_ES
    g_factor: float = settings.G_FACTOR
    hyperfine_par: float = settings.HYPERFINE_PAR
    hyperfine_perp: float = settings.HYPERFINE_PERP
    temperature: float = settings.TEMPERATURE

    def __post_init__(self):
        if not self.d_gs > self.d_es > 0:
            raise ValueError(f"Zero-field splittings must satisfy d_gs > d_es > 0, "
                             f"got d_gs={self.d_gs}, d_es={self.d_es}")
        if self.temperature <= 0:
            raise ValueError(f"Temperature must be positive, got {self.temperature}")
        if self.g_factor <= 0:
            raise ValueError(f"g-factor must be positive, got {self.g_factor}")

    @property
    def gyromagnetic_ratio(self) -> float:
        """Electron gyromagnetic ratio g*mu_B/h in Hz/T."""
        return self.g_factor * BOHR_MAGNETON_HZ_PER_T

    def zero_field_splitting(self, manifold: Manifold) -> float:
        return self.d_gs if Manifold(manifold) is Manifold.GROUND else self.d_es


@dataclass(frozen=True)
class FieldVector:
    """Static magnetic field in the NV frame (z along the NV axis)."""

    magnitude: float
    polar_angle: float
    azimuth: float = 0.0

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError(f"Field magnitude must be non-negative, got {self.magnitude}")
        if not -1e-12 <= self.polar_angle <= np.pi / 2 + 1e-12:
            raise ValueError(f"Polar angle must lie in [0, pi/2], got {self.polar_angle}")

    @classmethod
    def from_degrees(cls, magnitude: float, theta_deg: float) -> "FieldVector":
        return cls(magnitude, float(np.deg2rad(theta_deg)))

    def cartesian(self) -> np.ndarray:
        sin_t = np.sin(self.polar_angle)
        return self.magnitude * np.array([
            sin_t * np.cos(self.azimuth),
            sin_t * np.sin(self.azimuth),
            np.cos(self.polar_angle),
        ])


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Hermitian Hamiltonian in frequency units (Hz)."""

    matrix: np.ndarray
    manifold: Manifold = Manifold.GROUND

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (3, 9):
            raise ValueError(f"Hamiltonian must be 3x3 or 9x9, got shape {m.shape}")
        check_hermitian(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenfrequencies with eigenvectors as columns."""

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.energies)


@dataclass(frozen=True)
class MixingMatrix:
    """|alpha_ij|^2: eigenstate i (rows) against zero-field state j (columns)."""

    alpha_sq: np.ndarray
    manifold: Manifold = Manifold.GROUND

    def row(self, state: int) -> np.ndarray:
        """Zero-field character of eigenstate ``state`` (1-based within the manifold)."""
        return self.alpha_sq[state - 1]


def check_hermitian(matrix: np.ndarray, rtol: float = settings.HERMITIAN_RTOL) -> None:
    """Raise NonHermitianError unless ``matrix`` equals its conjugate transpose."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonHermitianError(f"Matrix must be square, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), 1.0)
    deviation = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if deviation > rtol * scale:
        raise NonHermitianError(f"Matrix is not Hermitian (max deviation {deviation:.3e})")


def spin_operators(spin_quantum_number: float = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Spin-1 angular momentum matrices.

    Args:
        spin_quantum_number: Only S = 1 is supported

    Returns:
        Tuple (Sx, Sy, Sz) of 3x3 complex matrices in the m_s = (+1, 0, -1) basis
    """
    if spin_quantum_number != 1:
        raise ValueError(f"Unsupported spin value {spin_quantum_number}; only S = 1 is modeled")
    r = 1 / np.sqrt(2)
    sx = r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1, 0, -1]).astype(complex)
    return sx, sy, sz


def build_hamiltonian(params: SpinSystemParams, field: FieldVector,
                      manifold: Manifold = Manifold.GROUND,
                      include_nucleus: bool = False) -> HamiltonianMatrix:
    """
    Build the NV triplet Hamiltonian divided by h.

    H = D (Sz^2 + 2/3) + g mu_B B.S [+ S.A.I], with the hyperfine term added as a tensor
    product with the 14N (I = 1) nuclear space.

    Args:
        params: Spin system constants
        field: Static field in the NV frame
        manifold: Ground or excited triplet
        include_nucleus: Add the 14N hyperfine coupling (ground manifold only)

    Returns:
        HamiltonianMatrix of dimension 3 or 9
    """
    manifold = Manifold(manifold)
    if include_nucleus and manifold is not Manifold.GROUND:
        raise ValueError("Hyperfine coupling is only modeled for the ground manifold")

    sx, sy, sz = spin_operators(1)
    identity = np.eye(3)
    bx, by, bz = field.cartesian()
    d = params.zero_field_splitting(manifold)

    h = d * (sz @ sz + 2.0 / 3.0 * identity)
    h = h + params.gyromagnetic_ratio * (bx * sx + by * sy + bz * sz)

    if include_nucleus:
        # Nuclear spin operators share the spin-1 matrices.
        ix, iy, iz = sx, sy, sz
        h = np.kron(h, identity)
        h = h + params.hyperfine_par * np.kron(sz, iz)
        h = h + params.hyperfine_perp * (np.kron(sx, ix) + np.kron(sy, iy))

    return HamiltonianMatrix(h, manifold)


def eigensolve(h: Union[HamiltonianMatrix, np.ndarray]) -> EigenSystem:
    """
    Diagonalize a Hermitian matrix.

    Eigenvalues ascend; each eigenvector is rephased so its largest-magnitude component
    is real and positive.
    """
    matrix = h.matrix if isinstance(h, HamiltonianMatrix) else np.asarray(h, dtype=complex)
    check_hermitian(matrix)

    energies, vectors = linalg.eigh(matrix)
    deviation = np.max(np.abs(vectors.conj().T @ vectors - np.eye(vectors.shape[1])))
    if deviation > settings.UNITARITY_TOL:
        raise linalg.LinAlgError(f"Eigenvectors are not orthonormal (max deviation {deviation:.3e})")
    pivots = np.argmax(np.abs(vectors), axis=0)
    pivot_values = vectors[pivots, np.arange(vectors.shape[1])]
    vectors = vectors * (np.abs(pivot_values) / pivot_values)

    energies.setflags(write=False)
    vectors.setflags(write=False)
    return EigenSystem(energies, vectors)


def mixing_coefficients(eig: EigenSystem, manifold: Manifold = Manifold.GROUND) -> MixingMatrix:
    """
    Overlap of each eigenstate with the zero-field basis.

    Eigenstates are labeled by ascending energy; zero-field columns are ordered
    m_s = (0, -1, +1).
    """
    if eig.dim != 3:
        raise ValueError(f"Mixing coefficients need an electron-only 3x3 eigensystem, "
                         f"got dimension {eig.dim}")
    overlaps = np.abs(eig.vectors[list(ZERO_FIELD_ORDER), :]) ** 2
    alpha_sq = np.ascontiguousarray(overlaps.T)
    alpha_sq.setflags(write=False)
    return MixingMatrix(alpha_sq, Manifold(manifold))


def manifold_mixing(params: SpinSystemParams, field: FieldVector,
                    manifold: Manifold = Manifold.GROUND) -> Tuple[EigenSystem, MixingMatrix]:
    """Diagonalize one electron-only manifold and return its eigensystem and mixing."""
    eig = eigensolve(build_hamiltonian(params, field, manifold))
    return eig, mixing_coefficients(eig, manifold)


def mixing_map(params: SpinSystemParams, fields: Sequence[float], thetas: Sequence[float],
               manifold: Manifold = Manifold.GROUND) -> np.ndarray:
    """
    Spin-mixing table over a (theta, B) grid.

    Args:
        params: Spin system constants
        fields: Field magnitudes in T
        thetas: Polar angles in radians
        manifold: Ground or excited triplet

    Returns:
        Array of shape (len(thetas), len(fields), 3, 3) holding |alpha_ij|^2
    """
    table = np.empty((len(thetas), len(fields), 3, 3))
    for a, theta in enumerate(thetas):
        for b, magnitude in enumerate(fields):
            _, mix = manifold_mixing(params, FieldVector(float(magnitude), float(theta)), manifold)
            table[a, b] = mix.alpha_sq
    logger.debug(f"Computed {manifold} mixing map on {len(thetas)}x{len(fields)} grid")
    return table
