"""
Unit tests for the Report Writer module.
"""
import os
import sys
import json
import math
import shutil
import tempfile
import pytest
import numpy as np
import pandas as pd

# Add the parent directory to the path so we can import the module
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from nvkinetics.reports.report_writer import ReportWriter, round_floats
from nvkinetics.spectra.fitting import FitResult
from nvkinetics.spectra.processing import PeakModel, Spectrum, extract_polarization


class TestRoundFloats:
    """Test cases for round_floats."""

    def test_significant_digits(self):
        assert round_floats(1.23456789012345) == 1.23456789
        assert round_floats(np.float64(2.5e-7)) == 2.5e-7

    def test_non_finite(self):
        assert round_floats({'a': float('nan'), 'b': [math.inf, 1.0]}) == {'a': None, 'b': [None, 1.0]}

    def test_numpy_scalars(self):
        result = round_floats({'n': np.int64(3), 'ok': np.bool_(True)})
        assert result == {'n': 3, 'ok': True}
        assert type(result['n']) is int
        assert type(result['ok']) is bool


class TestReportWriter:
    """Test cases for the ReportWriter class."""

    def setup_method(self):
        """Set up test fixtures."""
        self.test_dir = tempfile.mkdtemp()
        self.df = pd.DataFrame({'theta_deg': [0.0, 10.0], 'field_T': [0.439404123456, 0.2]})
        self.result = FitResult(
            peaks=[PeakModel(0.4394, 2e-6, -0.3, 7.72e-5, 3)],
            residual_norm=1e-3,
            converged=True,
            iterations=7,
            message='ok',
        )

    def teardown_method(self):
        """Tear down test fixtures."""
        shutil.rmtree(self.test_dir)

    def test_format_csv(self):
        text = ReportWriter.format_csv(self.df)
        assert text == "theta_deg,field_T\n0,0.439404123\n10,0.2\n"

    def test_write_csv_to_file(self):
        path = os.path.join(self.test_dir, 'nested', 'table.csv')
        writer = ReportWriter(path)
        assert writer.write_csv(self.df) == path
        with open(path) as f:
            assert f.read() == ReportWriter.format_csv(self.df)

    def test_write_csv_to_stdout(self, capsys):
        assert ReportWriter().write_csv(self.df) == '<stdout>'
        assert capsys.readouterr().out.startswith("theta_deg,field_T\n")

    def test_write_spectrum(self):
        path = os.path.join(self.test_dir, 'spectrum.csv')
        ReportWriter(path).write_spectrum(Spectrum([0.1, 0.2], [1.0, -1.0]))
        df = pd.read_csv(path)
        assert list(df.columns) == ['field_T', 'signal']
        assert list(df['signal']) == [1.0, -1.0]

    def test_format_json_is_deterministic(self):
        first = ReportWriter.format_json({'b': 1.0, 'a': [2.0, float('nan')]})
        second = ReportWriter.format_json({'a': [2.0, float('nan')], 'b': 1.0})
        assert first == second
        assert first.endswith('\n')
        assert json.loads(first) == {'a': [2.0, None], 'b': 1.0}

    def test_build_fit_report(self):
        estimate = extract_polarization(self.result.peaks[0].area, 1.0, 1e-9, 5e-4)
        report = ReportWriter.build_fit_report(self.result, [estimate])
        assert set(report) == {'converged', 'iterations', 'residual_norm', 'message', 'peaks',
                               'polarizations'}
        peak = report['peaks'][0]
        assert set(peak) == {'center_T', 'fwhm_T', 'amplitude', 'area', 'hyperfine_splitting_T',
                             'n_hyperfine', 't2_star_s'}
        assert peak['t2_star_s'] == pytest.approx(5.686e-6, rel=5e-3)
        assert peak['area'] == pytest.approx(self.result.peaks[0].area)
        assert report['polarizations'][0]['peak'] == 0
        assert report['polarizations'][0]['value'] == pytest.approx(estimate.value)

    def test_write_json(self):
        path = os.path.join(self.test_dir, 'fit.json')
        ReportWriter(path).write_json(ReportWriter.build_fit_report(self.result, g_factor=2.0))
        with open(path) as f:
            report = json.load(f)
        assert report['converged'] is True
        assert report['iterations'] == 7
        assert report['polarizations'] == []
