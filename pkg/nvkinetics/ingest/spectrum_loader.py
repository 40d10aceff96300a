"""
Spectrum loader module for reading two-column ESR spectra from CSV files.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from nvkinetics.exceptions import SpectrumFormatError
from nvkinetics.spectra.processing import Spectrum, SpectrumKind

logger = logging.getLogger(__name__)


class SpectrumLoader:
    """Loads spectra from CSV files with an optional header line."""

    # Header spellings of the field column and their scale to tesla
    FIELD_COLUMN_UNITS = {
        'field_t': 1.0,
        'field_tesla': 1.0,
        'field (t)': 1.0,
        'field': 1.0,
        'b': 1.0,
        'b_t': 1.0,
        'field_mt': 1e-3,
        'field (mt)': 1e-3,
        'b_mt': 1e-3,
        'field_g': 1e-4,
        'field (g)': 1e-4,
        'field_gauss': 1e-4,
    }

    # Header words that tell which kind of signal a file holds
    KIND_INDICATORS = {
        SpectrumKind.DIFFERENTIAL: ['derivative', 'differential', 'di/db', 'dchi', 'first_derivative'],
        SpectrumKind.ABSORPTION: ['absorption', 'integrated', 'intensity'],
    }

    def __init__(self, input_dir: Optional[Path] = None):
        """
        Initialize the spectrum loader.

        Args:
            input_dir: Directory searched by list_spectrum_files (defaults to the working directory)
        """
        self.input_dir = Path(input_dir) if input_dir is not None else Path.cwd()
        logger.info(f"Initialized SpectrumLoader with input directory: {self.input_dir}")

    def list_spectrum_files(self, pattern: str = "*.csv") -> List[Path]:
        files = sorted(self.input_dir.glob(pattern))
        logger.info(f"Found {len(files)} spectrum files in {self.input_dir}")
        return files

    @staticmethod
    def _is_numeric_row(row: pd.Series) -> bool:
        return bool(pd.to_numeric(row, errors='coerce').notna().all())

    def detect_header(self, file_path: Path) -> bool:
        """True when the first line of the file is a header rather than data."""
        try:
            first = pd.read_csv(file_path, header=None, nrows=1, encoding='utf-8')
        except pd.errors.EmptyDataError as e:
            raise SpectrumFormatError(f"Spectrum file {file_path} is empty") from e
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise SpectrumFormatError(f"Could not parse {file_path}: {e}") from e
        return not self._is_numeric_row(first.iloc[0])

    def detect_kind(self, headers: List[str], default: SpectrumKind) -> SpectrumKind:
        """Spectrum kind from header words, ``default`` when nothing matches."""
        joined = " ".join(h.lower() for h in headers)
        for kind, indicators in self.KIND_INDICATORS.items():
            if any(indicator in joined for indicator in indicators):
                return kind
        return default

    def field_scale(self, header: str) -> float:
        """Factor converting the field column to tesla."""
        key = header.strip().lower()
        if key in self.FIELD_COLUMN_UNITS:
            return self.FIELD_COLUMN_UNITS[key]
        logger.warning(f"Unrecognized field column '{header}', assuming tesla")
        return 1.0

    def load_spectrum(self, file_path: Union[str, Path],
                      kind: Optional[SpectrumKind] = None) -> Spectrum:
        """
        Load a spectrum CSV file.

        Args:
            file_path: Path to a two-column (field, signal) CSV file
            kind: Spectrum kind; detected from the header when omitted, absorption otherwise

        Returns:
            Spectrum with an increasing field axis in tesla
        """
        file_path = Path(file_path)
        logger.info(f"Loading spectrum file: {file_path}")
        if not file_path.exists():
            raise SpectrumFormatError(f"Spectrum file not found: {file_path}")

        has_header = self.detect_header(file_path)
        try:
            df = pd.read_csv(file_path, header=0 if has_header else None, encoding='utf-8')
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise SpectrumFormatError(f"Could not parse {file_path}: {e}") from e

        if df.shape[1] != 2:
            raise SpectrumFormatError(f"Expected 2 columns in {file_path}, found {df.shape[1]}")
        if df.empty:
            raise SpectrumFormatError(f"No data rows in {file_path}")

        headers = [str(c) for c in df.columns] if has_header else []
        scale = self.field_scale(headers[0]) if has_header else 1.0
        detected = self.detect_kind(headers, SpectrumKind.ABSORPTION)
        kind = SpectrumKind(kind) if kind is not None else detected

        values = df.apply(pd.to_numeric, errors='coerce')
        if values.isna().any().any():
            bad = int(values.isna().any(axis=1).sum())
            raise SpectrumFormatError(f"{bad} rows in {file_path} are not numeric")

        field_axis, signal = self._ordered(values.iloc[:, 0].to_numpy() * scale,
                                           values.iloc[:, 1].to_numpy())
        spectrum = Spectrum(field_axis, signal, kind)
        logger.info(f"Loaded {len(spectrum)} samples ({kind.value}) from {file_path.name}")
        return spectrum

    @staticmethod
    def _ordered(field_axis: np.ndarray, signal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Sort by field and drop repeated field values, keeping the first occurrence."""
        order = np.argsort(field_axis, kind='stable')
        field_axis, signal = field_axis[order], signal[order]
        unique, first = np.unique(field_axis, return_index=True)
        if len(unique) < len(field_axis):
            logger.warning(f"Dropped {len(field_axis) - len(unique)} repeated field samples")
        return unique, signal[first]

    def load_spectra(self, pattern: str = "*.csv",
                     kind: Optional[SpectrumKind] = None) -> Dict[str, Spectrum]:
        """Load every matching file in the input directory, skipping malformed ones."""
        spectra = {}
        for file_path in self.list_spectrum_files(pattern):
            try:
                spectra[file_path.stem] = self.load_spectrum(file_path, kind)
            except SpectrumFormatError as e:
                logger.error(f"Skipping {file_path.name}: {e}")
        return spectra
