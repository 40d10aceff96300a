"""
Report writer module for deterministic CSV and JSON output.
"""
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from nvkinetics.spectra.fitting import FitResult, t2_star_from_fwhm
from nvkinetics.spectra.processing import PolarizationEstimate, Spectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.9g'


def round_floats(value: Any) -> Any:
    """Recursively round floats to 9 significant digits; NaN and infinities become None."""
    if isinstance(value, dict):
        return {str(k): round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float(f"{float(value):.9g}")
    return value


class ReportWriter:
    """Writes result tables and fit reports to a file or standard output."""

    def __init__(self, output_path: Optional[Union[str, Path]] = None):
        """
        Initialize the report writer.

        Args:
            output_path: Destination file; standard output when omitted
        """
        self.output_path = Path(output_path) if output_path else None
        logger.info(f"Initialized ReportWriter with output: {self.output_path or 'stdout'}")

    def _emit(self, text: str) -> str:
        if self.output_path is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return '<stdout>'
        self.output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.output_path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
        logger.info(f"Report saved to {self.output_path}")
        return str(self.output_path)

    @staticmethod
    def format_csv(df: pd.DataFrame) -> str:
        return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')

    def write_csv(self, df: pd.DataFrame) -> str:
        """Write ``df`` as CSV; returns where it went."""
        logger.info(f"Writing CSV with {len(df)} rows")
        return self._emit(self.format_csv(df))

    def write_spectrum(self, spectrum: Spectrum) -> str:
        df = pd.DataFrame({'field_T': spectrum.field_axis, 'signal': spectrum.signal})
        return self.write_csv(df)

    @staticmethod
    def format_json(data: Dict[str, Any]) -> str:
        return json.dumps(round_floats(data), sort_keys=True, indent=2) + '\n'

    def write_json(self, data: Dict[str, Any]) -> str:
        return self._emit(self.format_json(data))

    @staticmethod
    def build_fit_report(result: FitResult,
                         polarizations: Sequence[PolarizationEstimate] = (),
                         g_factor: Optional[float] = None) -> Dict[str, Any]:
        """
        Fit report document.

        Args:
            result: Fit outcome
            polarizations: Estimates in peak order; may be shorter than the peak list
            g_factor: g-factor for the T2* conversion (default from settings)

        Returns:
            Dictionary ready for write_json
        """
        kwargs = {} if g_factor is None else {'g_factor': g_factor}
        peaks: List[Dict[str, Any]] = []
        for peak in result.peaks:
            peaks.append({
                'center_T': peak.center,
                'fwhm_T': peak.fwhm,
                'amplitude': peak.amplitude,
                'area': peak.area,
                'hyperfine_splitting_T': peak.hyperfine_splitting,
                'n_hyperfine': peak.n_hyperfine,
                't2_star_s': t2_star_from_fwhm(peak.fwhm, **kwargs),
            })

        estimates = []
        for index, estimate in enumerate(polarizations):
            estimates.append({
                'peak': index,
                'value': estimate.value,
                'area': estimate.area,
                'coupling': estimate.coupling,
                'reference_area': estimate.reference_area,
                'reference_polarization': estimate.reference_polarization,
            })

        return {
            'converged': result.converged,
            'iterations': result.iterations,
            'residual_norm': result.residual_norm,
            'message': result.message,
            'peaks': peaks,
            'polarizations': estimates,
        }
