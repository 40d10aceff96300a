"""
Polarization sweep module composing the physics into figure-level tables.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from nvkinetics.config.run_config import RunConfig
from nvkinetics.exceptions import NVKineticsError
from nvkinetics.physics.kinetics import (
    amplification,
    pumping_beta,
    spin_polarization,
    steady_state_at,
)
from nvkinetics.physics.resonance import (
    NV_AXES,
    TRANSITIONS,
    CrystalMount,
    drive_axis_in_nv_frame,
    find_resonances,
    nv_orientation_angles,
)
from nvkinetics.physics.spin_model import FieldVector, Manifold, mixing_map
from nvkinetics.spectra.processing import (
    PeakModel,
    Spectrum,
    SpectrumKind,
    hyperfine_field_splitting,
    synthesize,
)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = {
    'theta': 'theta_deg',
    'power': 'intensity_W_per_m2',
    't1': 't1_s',
}

RESONANCE_COLUMNS = ['theta_deg', 'transition', 'field_T', 'coupling', 'frequency_Hz',
                     'multiplicity']


def _resonance_rows(task: Tuple[RunConfig, float]) -> List[Dict[str, Any]]:
    config, theta_deg = task
    rows = []
    for res in find_resonances(config.spin, config.mw_frequency, math.radians(theta_deg),
                               TRANSITIONS, config.field_window, config.drive_axis):
        rows.append({
            'theta_deg': theta_deg,
            'transition': res.transition.label,
            'field_T': res.field,
            'coupling': res.coupling,
            'frequency_Hz': res.frequency,
            'multiplicity': res.multiplicity,
        })
    return rows


def _sweep_rows(task: Tuple[RunConfig, str, float, float, float]) -> List[Dict[str, Any]]:
    """Rows of one sweep point: every transition at fixed (theta, intensity, T1)."""
    config, mode, theta_deg, intensity, t1 = task
    sweep_value = {'theta': theta_deg, 'power': intensity, 't1': t1}[mode]
    column = SWEEP_COLUMNS[mode]
    rates = replace(config.rates, t1=t1)
    theta = math.radians(theta_deg)

    rows = []
    for t in TRANSITIONS:
        row = {column: sweep_value, 'transition': t.label, 'S_z': math.nan,
               'amplification': math.nan, 'field_T': math.nan, 'status': 'ok'}
        try:
            resonances = find_resonances(config.spin, config.mw_frequency, theta, [t],
                                         config.field_window, config.drive_axis)
            if not resonances:
                row['status'] = 'no_resonance'
                rows.append(row)
                continue
            beta = pumping_beta(intensity, rates)
            for res in resonances:
                solution = steady_state_at(config.spin, rates, FieldVector(res.field, theta), beta)
                s_z = spin_polarization(solution.populations, t.lower, t.upper)
                thermal = spin_polarization(solution.dark_populations, t.lower, t.upper)
                rows.append({**row, 'S_z': s_z, 'field_T': res.field,
                             'amplification': amplification(s_z, thermal)})
        except (NVKineticsError, ValueError, ArithmeticError) as e:
            logger.warning(f"Sweep point {column}={sweep_value}, {t.label} failed: {e}")
            row['status'] = f"error: {e}"
            rows.append(row)
    return rows


class PolarizationSweep:
    """Runs resonance, polarization, spectrum, mixing and geometry computations over grids."""

    def __init__(self, config: RunConfig, jobs: Optional[int] = None):
        """
        Initialize the sweep runner.

        Args:
            config: Validated run configuration
            jobs: Worker processes (defaults to config.jobs, then the processor count)
        """
        self.config = config
        self.jobs = jobs if jobs is not None else config.jobs
        logger.info(f"Initialized PolarizationSweep with jobs={self.jobs or 'auto'}")

    def _map(self, worker: Callable, tasks: Sequence) -> List:
        """Apply ``worker`` to every task; results keep the task order."""
        if self.jobs == 1 or len(tasks) <= 1:
            return [worker(task) for task in tasks]
        with ProcessPoolExecutor(max_workers=self.jobs) as executor:
            return list(executor.map(worker, tasks))

    def resonance_table(self, thetas_deg: Optional[Sequence[float]] = None) -> pd.DataFrame:
        """
        Resonant fields and couplings of all transitions for each polar angle.

        Returns:
            DataFrame with RESONANCE_COLUMNS, ordered by the angle grid
        """
        thetas = list(thetas_deg if thetas_deg is not None else self.config.theta_grid_deg)
        logger.info(f"Finding resonances at {self.config.mw_frequency / 1e9:.3f} GHz "
                    f"for {len(thetas)} angles")
        results = self._map(_resonance_rows, [(self.config, t) for t in thetas])
        rows = [row for point in results for row in point]
        logger.info(f"Found {len(rows)} resonances")
        return pd.DataFrame(rows, columns=RESONANCE_COLUMNS)

    def sweep(self, mode: str) -> pd.DataFrame:
        """
        Steady-state polarization of every transition along one sweep axis.

        Args:
            mode: 'theta' (fixed intensity), 'power' (fixed theta) or 't1' (fixed both)

        Returns:
            DataFrame with the sweep value, transition, S_z, amplification, field and status
        """
        if mode not in SWEEP_COLUMNS:
            raise ValueError(f"Unknown sweep mode {mode!r}; expected one of {list(SWEEP_COLUMNS)}")
        c = self.config
        if mode == 'theta':
            tasks = [(c, mode, t, c.sweep_intensity, c.rates.t1) for t in c.theta_grid_deg]
        elif mode == 'power':
            tasks = [(c, mode, c.sweep_theta_deg, i, c.rates.t1) for i in c.intensity_grid]
        else:
            tasks = [(c, mode, c.sweep_theta_deg, c.sweep_intensity, t1) for t1 in c.t1_grid]

        logger.info(f"Running {mode} sweep over {len(tasks)} points")
        results = self._map(_sweep_rows, tasks)
        df = pd.DataFrame([row for point in results for row in point],
                          columns=[SWEEP_COLUMNS[mode], 'transition', 'S_z', 'amplification',
                                   'field_T', 'status'])
        failed = int((df['status'] != 'ok').sum())
        if failed:
            logger.warning(f"{failed} sweep rows without a polarization value")
        return df

    def spectrum_lines(self, theta_deg: float, intensity: float) -> List[PeakModel]:
        """Peak models of every coupled resonance with amplitude S_z x C."""
        c = self.config
        theta = math.radians(theta_deg)
        beta = pumping_beta(intensity, c.rates)
        splitting = hyperfine_field_splitting(c.spin)

        peaks = []
        for res in find_resonances(c.spin, c.mw_frequency, theta, TRANSITIONS, c.field_window,
                                   c.drive_axis):
            solution = steady_state_at(c.spin, c.rates, FieldVector(res.field, theta), beta)
            s_z = spin_polarization(solution.populations, res.transition.lower,
                                    res.transition.upper)
            peaks.append(PeakModel(
                center=res.field,
                fwhm=c.linewidth,
                amplitude=s_z * res.coupling,
                hyperfine_splitting=splitting if c.n_hyperfine > 1 else 0.0,
                n_hyperfine=c.n_hyperfine,
            ))
            logger.debug(f"Line {res.transition.label} at {res.field * 1e3:.3f} mT: "
                         f"S_z={s_z:.4g}, C={res.coupling:.4g}")
        return peaks

    def spectrum_axis(self, peaks: Sequence[PeakModel]) -> np.ndarray:
        """Coarse axis over the field window, refined to fwhm/10 around every line."""
        lo, hi = self.config.field_window
        step = self.config.spectrum_step
        pieces = [np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)]
        for peak in peaks:
            reach = peak.hyperfine_splitting * (peak.n_hyperfine - 1) / 2.0 + 10.0 * peak.fwhm
            fine_step = peak.fwhm / 10.0
            n_fine = int(math.ceil(2.0 * reach / fine_step)) + 1
            pieces.append(np.linspace(peak.center - reach, peak.center + reach, n_fine))
        axis = np.unique(np.concatenate(pieces))
        return axis[(axis >= lo) & (axis <= hi)]

    def synthetic_spectrum(self, theta_deg: float, intensity: float,
                           kind: SpectrumKind = SpectrumKind.ABSORPTION) -> Spectrum:
        peaks = self.spectrum_lines(theta_deg, intensity)
        logger.info(f"Synthesizing {kind.value} spectrum with {len(peaks)} lines "
                    f"at theta={theta_deg} deg, I={intensity} W/m^2")
        return synthesize(peaks, self.spectrum_axis(peaks), kind)

    def mixing_table(self, manifold: Manifold = Manifold.GROUND) -> pd.DataFrame:
        """|alpha_ij|^2 for every (theta, B) grid point and eigenstate."""
        c = self.config
        manifold = Manifold(manifold)
        thetas = [math.radians(t) for t in c.theta_grid_deg]
        table = mixing_map(c.spin, c.mixing_fields, thetas, manifold)
        rows = []
        for a, theta_deg in enumerate(c.theta_grid_deg):
            for b, field in enumerate(c.mixing_fields):
                for state in range(3):
                    alpha = table[a, b, state]
                    rows.append({
                        'theta_deg': theta_deg,
                        'field_T': field,
                        'state': state + 1,
                        'alpha_sq_1': alpha[0],
                        'alpha_sq_2': alpha[1],
                        'alpha_sq_3': alpha[2],
                    })
        logger.info(f"Computed {manifold.value} mixing for {len(rows)} states")
        return pd.DataFrame(rows)

    def geometry_table(self, with_drive: bool = False) -> pd.DataFrame:
        """
        The four NV polar angles for every sample rotation.

        With ``with_drive`` each orientation also gets the microwave axis in its own NV
        frame (columns ``drive_<k>_x`` .. ``drive_<k>_z``).
        """
        rows = []
        for rotation_deg in self.config.rotation_grid_deg:
            mount = CrystalMount(math.radians(rotation_deg))
            angles = np.degrees(nv_orientation_angles(mount))
            row = {'rotation_deg': rotation_deg}
            row.update({f"theta_{k + 1}_deg": float(a) for k, a in enumerate(angles)})
            if with_drive:
                for k, axis in enumerate(NV_AXES):
                    drive = drive_axis_in_nv_frame(mount, axis)
                    row.update({f"drive_{k + 1}_{c}": float(v) for c, v in zip('xyz', drive)})
            rows.append(row)
        return pd.DataFrame(rows)
