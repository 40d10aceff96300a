"""
ESR spectrum model: Lorentzian synthesis with hyperfine structure, integration,
baseline removal and polarization extraction from line areas.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_trapezoid

from nvkinetics.config import settings
from nvkinetics.exceptions import BaselineError, SpectrumFormatError
from nvkinetics.physics.spin_model import SpinSystemParams

logger = logging.getLogger(__name__)


class SpectrumKind(str, Enum):
    DIFFERENTIAL = "differential"
    ABSORPTION = "absorption"


@dataclass(frozen=True)
class Spectrum:
    """Signal sampled on a strictly increasing field axis (T)."""

    field_axis: np.ndarray
    signal: np.ndarray
    kind: SpectrumKind = SpectrumKind.ABSORPTION

    def __post_init__(self):
        axis = np.array(self.field_axis, dtype=float)
        signal = np.array(self.signal, dtype=float)
        if axis.ndim != 1 or signal.shape != axis.shape:
            raise SpectrumFormatError(f"Field axis and signal must be 1-D of equal length, "
                                      f"got {axis.shape} and {signal.shape}")
        if len(axis) < 2:
            raise SpectrumFormatError("Spectrum needs at least two samples")
        if not (np.all(np.isfinite(axis)) and np.all(np.isfinite(signal))):
            raise SpectrumFormatError("Spectrum contains non-finite samples")
        if np.any(np.diff(axis) <= 0):
            raise SpectrumFormatError("Field axis must be strictly increasing")
        axis.setflags(write=False)
        signal.setflags(write=False)
        object.__setattr__(self, 'field_axis', axis)
        object.__setattr__(self, 'signal', signal)
        object.__setattr__(self, 'kind', SpectrumKind(self.kind))

    def __len__(self) -> int:
        return len(self.field_axis)


@dataclass(frozen=True)
class PeakModel:
    """
    One electronic transition: a group of ``n_hyperfine`` Lorentzians spaced by
    ``hyperfine_splitting`` and sharing width.

    ``amplitude`` is the peak height of each component; ``component_amplitudes`` replaces it
    per component when the hyperfine lines are allowed to differ.
    """

    center: float
    fwhm: float
    amplitude: float
    hyperfine_splitting: float = 0.0
    n_hyperfine: int = 1
    component_amplitudes: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be positive, got {self.fwhm}")
        if self.n_hyperfine < 1:
            raise ValueError(f"n_hyperfine must be at least 1, got {self.n_hyperfine}")
        if self.hyperfine_splitting < 0:
            raise ValueError(f"Hyperfine splitting must be non-negative, "
                             f"got {self.hyperfine_splitting}")
        if self.component_amplitudes is not None:
            amps = tuple(float(a) for a in self.component_amplitudes)
            if len(amps) != self.n_hyperfine:
                raise ValueError(f"Expected {self.n_hyperfine} component amplitudes, "
                                 f"got {len(amps)}")
            object.__setattr__(self, 'component_amplitudes', amps)

    @property
    def component_centers(self) -> np.ndarray:
        offsets = np.arange(self.n_hyperfine) - (self.n_hyperfine - 1) / 2.0
        return self.center + offsets * self.hyperfine_splitting

    @property
    def amplitudes(self) -> np.ndarray:
        if self.component_amplitudes is not None:
            return np.array(self.component_amplitudes)
        return np.full(self.n_hyperfine, self.amplitude)

    @property
    def area(self) -> float:
        """Integrated absorption area summed over components."""
        return float(np.sum(lorentzian_area(self.amplitudes, self.fwhm)))


@dataclass(frozen=True)
class PolarizationEstimate:
    value: float
    area: float
    coupling: float
    reference_area: float
    reference_polarization: float


def lorentzian(axis: np.ndarray, center: float, fwhm: float, amplitude: float) -> np.ndarray:
    """a (w/2)^2 / ((B - c)^2 + (w/2)^2)"""
    half = fwhm / 2.0
    return amplitude * half ** 2 / ((axis - center) ** 2 + half ** 2)


def lorentzian_derivative(axis: np.ndarray, center: float, fwhm: float,
                          amplitude: float) -> np.ndarray:
    half = fwhm / 2.0
    offset = axis - center
    return -2.0 * amplitude * half ** 2 * offset / (offset ** 2 + half ** 2) ** 2


def lorentzian_area(amplitude, fwhm: float):
    return math.pi / 2.0 * amplitude * fwhm


def hyperfine_field_splitting(params: SpinSystemParams) -> float:
    """|A_par| converted to a field spacing with the aligned-field slope g mu_B / h."""
    return abs(params.hyperfine_par) / params.gyromagnetic_ratio


def synthesize(peaks: Iterable[PeakModel], axis: Sequence[float],
               kind: SpectrumKind = SpectrumKind.ABSORPTION) -> Spectrum:
    """
    Sum of Lorentzian components of every peak on ``axis``.

    The differential kind is the analytic field derivative of the absorption curve.
    """
    axis = np.asarray(axis, dtype=float)
    kind = SpectrumKind(kind)
    line = lorentzian if kind is SpectrumKind.ABSORPTION else lorentzian_derivative
    signal = np.zeros_like(axis)
    for peak in peaks:
        for center, amplitude in zip(peak.component_centers, peak.amplitudes):
            signal += line(axis, center, peak.fwhm, amplitude)
    return Spectrum(axis, signal, kind)


def integrate(s: Spectrum) -> Spectrum:
    """Cumulative trapezoidal integral of a differential spectrum, zero at the first sample."""
    if s.kind is not SpectrumKind.DIFFERENTIAL:
        raise SpectrumFormatError(f"Only differential spectra can be integrated, got {s.kind.value}")
    signal = cumulative_trapezoid(s.signal, s.field_axis, initial=0.0)
    return Spectrum(s.field_axis, signal, SpectrumKind.ABSORPTION)


def window_mask(axis: np.ndarray, peak_windows: Iterable[Tuple[float, float]]) -> np.ndarray:
    """True for samples inside any of the closed intervals."""
    inside = np.zeros(len(axis), dtype=bool)
    for lo, hi in peak_windows:
        inside |= (axis >= min(lo, hi)) & (axis <= max(lo, hi))
    return inside


def baseline_correct(s: Spectrum, peak_windows: Iterable[Tuple[float, float]],
                     degree: int = 1) -> Spectrum:
    """
    Subtract a least-squares polynomial fitted to the samples outside ``peak_windows``.

    Args:
        s: Spectrum of any kind
        peak_windows: Field intervals (T) that contain lines
        degree: Polynomial degree, 0 to 3

    Returns:
        Corrected spectrum of the same kind
    """
    if not 0 <= degree <= 3:
        raise ValueError(f"Baseline degree must be between 0 and 3, got {degree}")
    support = ~window_mask(s.field_axis, peak_windows)
    n_support = int(support.sum())
    if n_support < settings.BASELINE_MIN_SAMPLES:
        raise BaselineError(f"Only {n_support} off-peak samples for the baseline, "
                            f"need at least {settings.BASELINE_MIN_SAMPLES}")

    baseline = Polynomial.fit(s.field_axis[support], s.signal[support], degree)
    logger.debug(f"Baseline of degree {degree} fitted to {n_support} samples")
    return Spectrum(s.field_axis, s.signal - baseline(s.field_axis), s.kind)


def extract_polarization(area: float, coupling: float, ref_area: float,
                         ref_pol: float) -> PolarizationEstimate:
    """
    Spin polarization from a line area.

    S_z = (A / C) * (S_ref / A_ref), where the reference is the 1-2 line measured in the
    dark with thermal polarization S_ref.
    """
    if not coupling > 0:
        raise ValueError(f"Coupling must be positive, got {coupling}")
    if ref_area == 0:
        raise ValueError("Reference area is zero")
    value = (area / coupling) * (ref_pol / ref_area)
    return PolarizationEstimate(value=value, area=area, coupling=coupling,
                                reference_area=ref_area, reference_polarization=ref_pol)
