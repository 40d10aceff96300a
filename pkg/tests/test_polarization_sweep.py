"""
Unit tests for the Polarization Sweep module.
"""
import os
import sys
import pytest
import numpy as np
import pandas as pd
from unittest.mock import patch

# Add the parent directory to the path so we can import the module
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from nvkinetics.analytics.polarization_sweep import PolarizationSweep, RESONANCE_COLUMNS
from nvkinetics.config import settings
from nvkinetics.config.run_config import RunConfig
from nvkinetics.exceptions import SingularSystemError
from nvkinetics.physics.spin_model import Manifold
from nvkinetics.spectra.processing import SpectrumKind


class TestResonanceTable:
    """Test cases for resonance_table."""

    def setup_method(self):
        """Set up test fixtures."""
        self.config = RunConfig(jobs=1)
        self.gamma = self.config.spin.gyromagnetic_ratio
        self.sweep = PolarizationSweep(self.config)

    def test_aligned_field(self):
        df = self.sweep.resonance_table([0.0])
        assert list(df.columns) == RESONANCE_COLUMNS
        assert sorted(df['transition']) == ['1-2', '2-3']
        fields = dict(zip(df['transition'], df['field_T']))
        f, d = self.config.mw_frequency, self.config.spin.d_gs
        assert fields['1-2'] == pytest.approx((f + d) / self.gamma, abs=5e-4)
        assert fields['2-3'] == pytest.approx((f - d) / self.gamma, abs=5e-4)
        np.testing.assert_allclose(df['coupling'], 1.0, atol=1e-6)

    def test_rows_follow_angle_grid(self):
        df = self.sweep.resonance_table([0.0, 70.5])
        assert list(df['theta_deg'].drop_duplicates()) == [0.0, 70.5]
        off_axis = df[df['theta_deg'] == 70.5]
        assert len(off_axis) >= 2
        assert (off_axis['coupling'] > 0).all()

    def test_empty_window(self):
        sweep = PolarizationSweep(RunConfig(field_window=(0.8, 1.0), jobs=1))
        df = sweep.resonance_table([0.0])
        assert df.empty
        assert list(df.columns) == RESONANCE_COLUMNS


class TestSweeps:
    """Test cases for the polarization sweeps."""

    def setup_method(self):
        """Set up test fixtures."""
        self.config = RunConfig(jobs=1)
        self.sweep = PolarizationSweep(self.config)

    def test_power_sweep(self):
        df = self.sweep.sweep('power')
        assert list(df.columns) == ['intensity_W_per_m2', 'transition', 'S_z', 'amplification',
                                    'field_T', 'status']
        sqt = df[df['transition'] == '1-2'].set_index('intensity_W_per_m2')
        assert (sqt['status'] == 'ok').all()

        assert sqt.loc[0.0, 'amplification'] == pytest.approx(1.0, rel=1e-6)
        magnitude = sqt['S_z'].abs().to_numpy()
        assert np.all(np.diff(magnitude) > 0)
        assert sqt.loc[settings.MAX_INTENSITY, 'amplification'] > 100
        assert abs(sqt.loc[8.3e4, 'S_z']) > 1.05 * abs(sqt.loc[4e4, 'S_z'])
        # Optical pumping inverts the 1-2 populations relative to thermal equilibrium.
        assert sqt.loc[0.0, 'S_z'] > 0
        assert sqt.loc[8.3e4, 'S_z'] < 0

    def test_aligned_dqt_has_no_resonance(self):
        df = self.sweep.sweep('power')
        dqt = df[df['transition'] == '1-3']
        assert (dqt['status'] == 'no_resonance').all()
        assert dqt['S_z'].isna().all()

    def test_theta_sweep_dqt_peak(self):
        config = RunConfig(theta_grid_deg=[float(t) for t in range(0, 91)], jobs=1)
        df = PolarizationSweep(config).sweep('theta')
        dqt = df[df['transition'] == '1-3']
        magnitude = dqt['S_z'].abs().to_numpy()
        peak_theta = dqt['theta_deg'].to_numpy()[np.nanargmax(magnitude)]
        assert 5.0 <= peak_theta <= 40.0

    def test_t1_sweep(self):
        df = self.sweep.sweep('t1')
        sqt = df[df['transition'] == '1-2'].sort_values('t1_s')
        assert list(sqt['t1_s']) == sorted(settings.T1_GRID)
        assert np.all(np.diff(sqt['S_z'].abs().to_numpy()) > 0)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            self.sweep.sweep('frequency')

    def test_failed_point_is_recorded(self):
        with patch('nvkinetics.analytics.polarization_sweep.steady_state_at',
                   side_effect=SingularSystemError("singular rate matrix")):
            df = self.sweep.sweep('power')
        sqt = df[df['transition'] == '1-2']
        assert len(sqt) == len(settings.INTENSITY_GRID)
        assert sqt['status'].str.startswith('error').all()
        assert sqt['S_z'].isna().all()

    def test_parallel_matches_serial(self):
        config = RunConfig(intensity_grid=[0.0, 1e4, 8.3e4], jobs=1)
        serial = PolarizationSweep(config).sweep('power')
        parallel = PolarizationSweep(config, jobs=2).sweep('power')
        pd.testing.assert_frame_equal(serial, parallel)


class TestSpectrum:
    """Test cases for synthetic spectra."""

    def setup_method(self):
        """Set up test fixtures."""
        self.sweep = PolarizationSweep(RunConfig(jobs=1))

    def _line(self, peaks, near):
        return min(peaks, key=lambda p: abs(p.center - near))

    def test_dark_amplitudes(self):
        peaks = self.sweep.spectrum_lines(0.0, 0.0)
        assert len(peaks) == 2
        for peak in peaks:
            assert 1e-4 < peak.amplitude < 2e-3
            assert peak.n_hyperfine == settings.N_HYPERFINE

    def test_inversion_under_illumination(self):
        dark = self._line(self.sweep.spectrum_lines(0.0, 0.0), 0.44)
        bright = self._line(self.sweep.spectrum_lines(0.0, settings.MAX_INTENSITY), 0.44)
        assert dark.amplitude > 0
        assert bright.amplitude < 0
        assert abs(bright.amplitude) > 100 * dark.amplitude

    def test_dqt_line_off_axis(self):
        peaks = self.sweep.spectrum_lines(20.0, settings.MAX_INTENSITY)
        assert len(peaks) >= 3
        assert any(0.14 < p.center < 0.20 for p in peaks)

    def test_synthetic_spectrum(self):
        spectrum = self.sweep.synthetic_spectrum(0.0, settings.MAX_INTENSITY)
        lo, hi = settings.FIELD_WINDOW
        assert spectrum.field_axis[0] >= lo
        assert spectrum.field_axis[-1] <= hi
        strongest = spectrum.field_axis[np.argmax(np.abs(spectrum.signal))]
        centers = [p.center for p in self.sweep.spectrum_lines(0.0, settings.MAX_INTENSITY)]
        assert min(abs(strongest - c) for c in centers) < 2e-4

    def test_differential_kind(self):
        spectrum = self.sweep.synthetic_spectrum(0.0, 0.0, SpectrumKind.DIFFERENTIAL)
        assert spectrum.kind is SpectrumKind.DIFFERENTIAL

    def test_axis_resolves_lines(self):
        peaks = self.sweep.spectrum_lines(0.0, 0.0)
        axis = self.sweep.spectrum_axis(peaks)
        assert np.all(np.diff(axis) > 0)
        near = axis[np.abs(axis - peaks[0].center) < peaks[0].fwhm]
        assert len(near) >= 15


class TestTables:
    """Test cases for the mixing and geometry tables."""

    def test_mixing_table(self):
        config = RunConfig(theta_grid_deg=[0.0, 45.0], mixing_fields=[0.0, 0.1, 0.3], jobs=1)
        df = PolarizationSweep(config).mixing_table(Manifold.EXCITED)
        assert len(df) == 2 * 3 * 3
        total = df[['alpha_sq_1', 'alpha_sq_2', 'alpha_sq_3']].sum(axis=1)
        np.testing.assert_allclose(total, 1.0, atol=1e-10)

    def test_mixing_table_from_string(self):
        config = RunConfig(theta_grid_deg=[0.0], mixing_fields=[0.2], jobs=1)
        df = PolarizationSweep(config).mixing_table("ground")
        assert list(df['state']) == [1, 2, 3]

    def test_geometry_table(self):
        df = PolarizationSweep(RunConfig(jobs=1)).geometry_table()
        assert len(df) == len(settings.ROTATION_GRID_DEG)
        assert list(df.columns) == ['rotation_deg', 'theta_1_deg', 'theta_2_deg',
                                    'theta_3_deg', 'theta_4_deg']
        first = df.iloc[0]
        for k in range(1, 5):
            assert first[f"theta_{k}_deg"] == pytest.approx(54.7356, abs=1e-3)

    def test_geometry_table_with_drive(self):
        df = PolarizationSweep(RunConfig(rotation_grid_deg=[0.0, 30.0], jobs=1)).geometry_table(
            with_drive=True)
        assert len(df.columns) == 1 + 4 + 4 * 3
        for _, row in df.iterrows():
            for k in range(1, 5):
                drive = np.array([row[f"drive_{k}_{c}"] for c in 'xyz'])
                theta = np.radians(row[f"theta_{k}_deg"])
                assert np.linalg.norm(drive) == pytest.approx(1.0, abs=1e-12)
                # The drive is perpendicular to the static field (x sin theta + z cos theta).
                assert drive[0] * np.sin(theta) + drive[2] * np.cos(theta) == pytest.approx(
                    0.0, abs=1e-12)
