"""
Resonant fields, microwave coupling and crystal mounting geometry.

Transitions are between ground eigenstates labeled 1..3 by ascending energy. Fields are
in tesla, frequencies in Hz and angles in radians unless a name says otherwise.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from nvkinetics.config import settings
from nvkinetics.physics.spin_model import (
    EigenSystem,
    FieldVector,
    Manifold,
    SpinSystemParams,
    build_hamiltonian,
    eigensolve,
    spin_operators,
)

logger = logging.getLogger(__name__)

# |<1^0|Sx|2^0>|^2 for the zero-field m_s = 0 and m_s = -1 states.
REFERENCE_MATRIX_ELEMENT = 0.5

DEFAULT_DRIVE_AXIS = np.array([0.0, 1.0, 0.0])
DEFAULT_MOUNT_TILT = math.pi / 4

CRYSTAL_Z = np.array([0.0, 0.0, 1.0])
NV_AXES = np.array([
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
]) / math.sqrt(3.0)


@dataclass(frozen=True)
class TransitionSpec:
    """Ground-manifold transition between eigenstates ``lower`` < ``upper``."""

    lower: int
    upper: int

    def __post_init__(self):
        if not 1 <= self.lower < self.upper <= 3:
            raise ValueError(f"Transition needs 1 <= lower < upper <= 3, "
                             f"got ({self.lower}, {self.upper})")

    @property
    def kind(self) -> str:
        return 'DQT' if (self.lower, self.upper) == (1, 3) else 'SQT'

    @property
    def label(self) -> str:
        return f"{self.lower}-{self.upper}"

    @classmethod
    def parse(cls, text: str) -> 'TransitionSpec':
        """Parse labels such as ``"1-2"`` or ``"13"``."""
        digits = [c for c in str(text) if c.isdigit()]
        if len(digits) != 2:
            raise ValueError(f"Cannot parse transition label {text!r}")
        return cls(int(digits[0]), int(digits[1]))


TRANSITIONS = (TransitionSpec(1, 2), TransitionSpec(2, 3), TransitionSpec(1, 3))


@dataclass(frozen=True)
class ResonanceResult:
    field: float
    theta: float
    transition: TransitionSpec
    coupling: float
    frequency: float
    multiplicity: int = 1


@dataclass(frozen=True)
class CrystalMount:
    """
    (100) plate mounted with a <110> edge along the sample tube.

    The tube (and microwave field) axis is fixed; rotating the tube by ``rotation_angle``
    turns the static field within the plane perpendicular to it.
    """

    rotation_angle: float
    mount_tilt: float = DEFAULT_MOUNT_TILT


def transition_frequency(params: SpinSystemParams, field: FieldVector, t: TransitionSpec) -> float:
    """E_upper - E_lower of the electron-only ground Hamiltonian, in Hz."""
    eig = eigensolve(build_hamiltonian(params, field, Manifold.GROUND))
    return float(eig.energies[t.upper - 1] - eig.energies[t.lower - 1])


def transition_frequencies(params: SpinSystemParams, fields: Sequence[float], theta: float,
                           t: TransitionSpec) -> np.ndarray:
    """transition_frequency over a whole field grid with one stacked eigenvalue call."""
    b = np.asarray(fields, dtype=float)
    sx, _, sz = spin_operators(1)
    zero_field = params.d_gs * (sz @ sz + 2.0 / 3.0 * np.eye(3))
    zeeman = params.gyromagnetic_ratio * (math.sin(theta) * sx + math.cos(theta) * sz)
    stack = zero_field[None, :, :] + b[:, None, None] * zeeman[None, :, :]
    energies = np.linalg.eigvalsh(stack)
    return energies[:, t.upper - 1] - energies[:, t.lower - 1]


def _validate_search(f_mw: float, window: Tuple[float, float]) -> Tuple[float, float]:
    lo, hi = float(window[0]), float(window[1])
    if f_mw <= 0:
        raise ValueError(f"Microwave frequency must be positive, got {f_mw}")
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"Field window must be ordered within [0, 1] T, got ({lo}, {hi})")
    return lo, hi


def _roots_with_multiplicity(params: SpinSystemParams, f_mw: float, theta: float,
                             t: TransitionSpec, window: Tuple[float, float],
                             step: float) -> List[Tuple[float, int]]:
    lo, hi = _validate_search(f_mw, window)
    n_points = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n_points)
    detuning = transition_frequencies(params, grid, theta, t) - f_mw

    def residual(b: float) -> float:
        return transition_frequency(params, FieldVector(b, theta), t) - f_mw

    roots = []
    for idx in range(n_points - 1):
        left, right = detuning[idx], detuning[idx + 1]
        if left == 0.0:
            roots.append(float(grid[idx]))
        elif left * right < 0:
            roots.append(optimize.brentq(residual, grid[idx], grid[idx + 1],
                                         xtol=settings.ROOT_XTOL))
    if detuning[-1] == 0.0:
        roots.append(float(grid[-1]))

    merged: List[Tuple[float, int]] = []
    for root in roots:
        if merged and root - merged[-1][0] < settings.ROOT_MERGE_DISTANCE:
            first, count = merged[-1]
            merged[-1] = (first, count + 1)
        else:
            merged.append((root, 1))
    return merged


def resonant_fields(params: SpinSystemParams, f_mw: float, theta: float, t: TransitionSpec,
                    window: Tuple[float, float] = settings.FIELD_WINDOW,
                    step: float = settings.FIELD_GRID_STEP) -> List[float]:
    """
    All fields in ``window`` where the transition frequency equals ``f_mw``.

    Sign changes of the detuning on a ``step`` grid are refined with Brent's method; roots
    closer than the merge distance are reported once. An empty list means no crossing.
    """
    return [root for root, _ in _roots_with_multiplicity(params, f_mw, theta, t, window, step)]


def mw_coupling(eig: EigenSystem, t: TransitionSpec,
                drive_axis: Optional[Sequence[float]] = None) -> float:
    """
    Relative microwave coupling C = |<i|S.b|j>|^2 / |<1^0|Sx|2^0>|^2.

    Args:
        eig: Electron-only ground eigensystem
        t: Transition
        drive_axis: Drive direction in the NV frame; defaults to y, normal to the plane of
            the static field and the NV axis

    Returns:
        Coupling normalized to 1 for the aligned-field 1-2 transition
    """
    if eig.dim != 3:
        raise ValueError(f"Coupling needs an electron-only eigensystem, got dimension {eig.dim}")
    axis = DEFAULT_DRIVE_AXIS if drive_axis is None else np.asarray(drive_axis, dtype=float)
    norm = np.linalg.norm(axis)
    if axis.shape != (3,) or norm == 0:
        raise ValueError(f"Drive axis must be a non-zero 3-vector, got {drive_axis}")
    bx, by, bz = axis / norm

    sx, sy, sz = spin_operators(1)
    drive = bx * sx + by * sy + bz * sz
    bra = eig.vectors[:, t.lower - 1]
    ket = eig.vectors[:, t.upper - 1]
    element = np.vdot(bra, drive @ ket)
    return float(abs(element) ** 2 / REFERENCE_MATRIX_ELEMENT)


def find_resonances(params: SpinSystemParams, f_mw: float, theta: float,
                    transitions: Sequence[TransitionSpec] = TRANSITIONS,
                    window: Tuple[float, float] = settings.FIELD_WINDOW,
                    drive_axis: Optional[Sequence[float]] = None,
                    coupling_floor: float = settings.COUPLING_FLOOR) -> List[ResonanceResult]:
    """Resonances of every transition at one angle, dropping those with negligible coupling."""
    results = []
    for t in transitions:
        for root, multiplicity in _roots_with_multiplicity(params, f_mw, theta, t, window,
                                                           settings.FIELD_GRID_STEP):
            field = FieldVector(root, theta)
            eig = eigensolve(build_hamiltonian(params, field, Manifold.GROUND))
            coupling = mw_coupling(eig, t, drive_axis)
            if coupling < coupling_floor:
                logger.debug(f"Skipping {t.label} at {root * 1e3:.2f} mT: coupling {coupling:.1e}")
                continue
            frequency = float(eig.energies[t.upper - 1] - eig.energies[t.lower - 1])
            results.append(ResonanceResult(root, theta, t, coupling, frequency, multiplicity))
    return results


def microwave_axis(mount: CrystalMount) -> np.ndarray:
    """Tube axis in crystal coordinates; the microwave field points along it."""
    tilt = mount.mount_tilt
    return np.array([math.cos(tilt), -math.sin(tilt), 0.0])


def _in_plane_axis(mount_tilt: float) -> np.ndarray:
    return np.array([math.sin(mount_tilt), math.cos(mount_tilt), 0.0])


def field_direction(mount: CrystalMount) -> np.ndarray:
    """Unit static-field direction in crystal coordinates; rotation 0 puts it along [001]."""
    phi = mount.rotation_angle
    return math.cos(phi) * CRYSTAL_Z + math.sin(phi) * _in_plane_axis(mount.mount_tilt)


def rotation_for_direction(direction: Sequence[float],
                           mount_tilt: float = DEFAULT_MOUNT_TILT) -> float:
    """Rotation angle that brings the static field closest to ``direction``."""
    d = np.asarray(direction, dtype=float)
    z_part = float(d @ CRYSTAL_Z)
    plane_part = float(d @ _in_plane_axis(mount_tilt))
    if math.hypot(z_part, plane_part) < 1e-12:
        raise ValueError(f"Direction {direction} is parallel to the rotation axis")
    return math.atan2(plane_part, z_part)


def nv_orientation_angles(mount: CrystalMount) -> np.ndarray:
    """Angles between the static field and the four NV axes, folded into [0, pi/2]."""
    b = field_direction(mount)
    cosines = np.clip(np.abs(NV_AXES @ b), 0.0, 1.0)
    return np.arccos(cosines)


def drive_axis_in_nv_frame(mount: CrystalMount, nv_axis: Sequence[float]) -> np.ndarray:
    """
    Microwave axis expressed in the frame of one NV orientation.

    The frame has z along the NV axis (sign chosen so the field has a non-negative z
    component) and x along the transverse field component; for an aligned field the drive
    defines y instead.
    """
    z = np.asarray(nv_axis, dtype=float)
    z = z / np.linalg.norm(z)
    b = field_direction(mount)
    if b @ z < 0:
        z = -z
    mw = microwave_axis(mount)

    transverse = b - (b @ z) * z
    if np.linalg.norm(transverse) > 1e-9:
        x = transverse / np.linalg.norm(transverse)
        y = np.cross(z, x)
    else:
        y = mw - (mw @ z) * z
        y = y / np.linalg.norm(y)
        x = np.cross(y, z)
    return np.array([mw @ x, mw @ y, mw @ z])
