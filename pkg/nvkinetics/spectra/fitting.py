"""
Multipeak Lorentzian fitting and the initial-guess heuristic used by the CLI.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import optimize, signal

from nvkinetics.config import settings
from nvkinetics.physics.spin_model import BOHR_MAGNETON_HZ_PER_T
from nvkinetics.spectra.processing import (
    PeakModel,
    Spectrum,
    SpectrumKind,
    integrate,
    synthesize,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitResult:
    peaks: List[PeakModel]
    residual_norm: float
    converged: bool
    iterations: int
    message: str = ""

    @property
    def total_area(self) -> float:
        return float(sum(p.area for p in self.peaks))


class _ParameterLayout:
    """Maps peak models to a scaled parameter vector and back."""

    def __init__(self, initial: Sequence[PeakModel], equal_amplitude: bool, data_scale: float):
        self.initial = list(initial)
        self.equal_amplitude = equal_amplitude
        self.data_scale = data_scale

    def _amp_count(self, peak: PeakModel) -> int:
        return 1 if self.equal_amplitude else peak.n_hyperfine

    @staticmethod
    def _fits_splitting(peak: PeakModel) -> bool:
        return peak.n_hyperfine > 1

    def _amp_scale(self, peak: PeakModel) -> float:
        return abs(peak.amplitude) if peak.amplitude != 0 else self.data_scale

    @staticmethod
    def _split_scale(peak: PeakModel) -> float:
        return peak.hyperfine_splitting if peak.hyperfine_splitting > 0 else peak.fwhm

    def pack(self) -> np.ndarray:
        x = []
        for peak in self.initial:
            x.extend([0.0, 1.0])
            x.extend(peak.amplitudes[:self._amp_count(peak)] / self._amp_scale(peak))
            if self._fits_splitting(peak):
                x.append(peak.hyperfine_splitting / self._split_scale(peak))
        return np.array(x)

    def bounds(self):
        lower, upper = [], []
        for peak in self.initial:
            lower.extend([-np.inf, 1e-6])
            upper.extend([np.inf, np.inf])
            lower.extend([-np.inf] * self._amp_count(peak))
            upper.extend([np.inf] * self._amp_count(peak))
            if self._fits_splitting(peak):
                lower.append(0.0)
                upper.append(np.inf)
        return np.array(lower), np.array(upper)

    def unpack(self, x: np.ndarray) -> List[PeakModel]:
        peaks = []
        pos = 0
        for peak in self.initial:
            w0 = peak.fwhm
            center = peak.center + x[pos] * w0
            fwhm = x[pos + 1] * w0
            pos += 2
            count = self._amp_count(peak)
            amps = x[pos:pos + count] * self._amp_scale(peak)
            pos += count
            splitting = peak.hyperfine_splitting
            if self._fits_splitting(peak):
                splitting = x[pos] * self._split_scale(peak)
                pos += 1
            peaks.append(PeakModel(
                center=float(center),
                fwhm=float(fwhm),
                amplitude=float(amps[0]) if count == 1 else float(np.mean(amps)),
                hyperfine_splitting=float(splitting),
                n_hyperfine=peak.n_hyperfine,
                component_amplitudes=None if count == 1 else tuple(float(a) for a in amps),
            ))
        return peaks


def fit_multipeak(s: Spectrum, initial: Sequence[PeakModel], equal_amplitude: bool = True,
                  max_iterations: int = settings.FIT_MAX_ITERATIONS,
                  gtol: float = settings.FIT_GTOL) -> FitResult:
    """
    Least-squares fit of Lorentzian peak groups to a spectrum.

    Centers are fitted relative to their initial guess in units of the initial fwhm, and
    widths, splittings and amplitudes relative to their initial values. Non-convergence is
    reported through ``FitResult.converged`` with the best parameters found.

    Args:
        s: Spectrum to fit; differential spectra are fitted with derivative line shapes
        initial: Starting peak models, one per electronic transition
        equal_amplitude: Share one amplitude across the hyperfine components of a peak
        max_iterations: Budget of function evaluations
        gtol: Gradient tolerance

    Returns:
        FitResult
    """
    if not initial:
        raise ValueError("At least one initial peak is required")
    lo, hi = s.field_axis[0], s.field_axis[-1]
    for peak in initial:
        if not lo <= peak.center <= hi:
            raise ValueError(f"Initial center {peak.center} outside the axis span [{lo}, {hi}]")

    data_scale = float(np.max(np.abs(s.signal))) or 1.0
    layout = _ParameterLayout(initial, equal_amplitude, data_scale)

    def residuals(x: np.ndarray) -> np.ndarray:
        model = synthesize(layout.unpack(x), s.field_axis, s.kind)
        return model.signal - s.signal

    result = optimize.least_squares(
        residuals,
        layout.pack(),
        bounds=layout.bounds(),
        method='trf',
        max_nfev=max_iterations,
        gtol=gtol,
    )

    peaks = layout.unpack(result.x)
    converged = bool(result.status > 0)
    iterations = int(result.njev) if result.njev is not None else int(result.nfev)
    residual_norm = float(np.linalg.norm(result.fun))
    if converged:
        logger.info(f"Fit converged after {iterations} iterations, residual {residual_norm:.3e}")
    else:
        logger.warning(f"Fit did not converge after {result.nfev} evaluations: {result.message}")
    return FitResult(peaks=peaks, residual_norm=residual_norm, converged=converged,
                     iterations=iterations, message=str(result.message))


def _cluster(positions: np.ndarray, max_gap: float) -> List[List[int]]:
    clusters: List[List[int]] = []
    for idx in range(len(positions)):
        if clusters and positions[idx] - positions[clusters[-1][-1]] <= max_gap:
            clusters[-1].append(idx)
        else:
            clusters.append([idx])
    return clusters


def initial_peaks(s: Spectrum, n_hyperfine: int = settings.N_HYPERFINE,
                  hyperfine_splitting: float = 0.0, window: int = 5,
                  rel_height: float = 0.1, max_peaks: Optional[int] = None) -> List[PeakModel]:
    """
    Starting guesses from local extrema of the smoothed absorption curve.

    Extrema closer than twice the hyperfine splitting are grouped into one transition;
    widths are seeded at the half-maximum width of the strongest extremum.
    """
    absorption = integrate(s) if s.kind is SpectrumKind.DIFFERENTIAL else s
    smooth = pd.Series(absorption.signal).rolling(window, center=True, min_periods=1).mean()
    smooth = smooth.to_numpy()
    magnitude = np.abs(smooth)
    if magnitude.max() == 0:
        return []

    indices, _ = signal.find_peaks(magnitude, height=rel_height * magnitude.max())
    if len(indices) == 0:
        return []
    axis = absorption.field_axis
    positions = axis[indices]
    _, _, left_ips, right_ips = signal.peak_widths(magnitude, indices, rel_height=0.5)
    samples = np.arange(len(axis))
    widths = np.interp(right_ips, samples, axis) - np.interp(left_ips, samples, axis)

    if n_hyperfine > 1 and hyperfine_splitting > 0:
        groups = _cluster(positions, 2.0 * hyperfine_splitting)
    else:
        groups = [[i] for i in range(len(indices))]

    peaks = []
    for group in groups:
        members = indices[group]
        pick = group[int(np.argmax(magnitude[members]))]
        strongest = indices[pick]
        if len(members) == n_hyperfine:
            center = float(np.mean(axis[members]))
        else:
            center = float(axis[strongest])
        spacing = float(np.diff(axis)[min(strongest, len(axis) - 2)])
        fwhm = float(widths[pick]) if widths[pick] > 0 else 3.0 * spacing
        peaks.append(PeakModel(
            center=center,
            fwhm=fwhm,
            amplitude=float(smooth[strongest]),
            hyperfine_splitting=hyperfine_splitting if n_hyperfine > 1 else 0.0,
            n_hyperfine=n_hyperfine if hyperfine_splitting > 0 else 1,
        ))

    peaks.sort(key=lambda p: abs(p.amplitude), reverse=True)
    if max_peaks is not None:
        peaks = peaks[:max_peaks]
    peaks.sort(key=lambda p: p.center)
    logger.debug(f"Initial guess: {len(peaks)} peaks from {len(indices)} extrema")
    return peaks


def t2_star_from_fwhm(fwhm: float, g_factor: float = settings.G_FACTOR) -> float:
    """T2* = 1 / (pi * df), df the field linewidth converted with g mu_B / h."""
    if not fwhm > 0:
        raise ValueError(f"fwhm must be positive, got {fwhm}")
    return 1.0 / (math.pi * fwhm * g_factor * BOHR_MAGNETON_HZ_PER_T)


def fwhm_from_t2_star(t2_star: float, g_factor: float = settings.G_FACTOR) -> float:
    if not t2_star > 0:
        raise ValueError(f"T2* must be positive, got {t2_star}")
    return 1.0 / (math.pi * t2_star * g_factor * BOHR_MAGNETON_HZ_PER_T)
