"""
Command-line entry point for the NV kinetics toolkit.

Subcommands:
1. resonances - resonant fields and couplings for a grid of polar angles
2. sweep      - steady-state polarizations along theta, laser power or T1
3. spectrum   - synthetic ESR spectrum at one angle and intensity
4. fit        - multipeak fit of a measured spectrum, with optional polarization extraction
5. geometry   - NV polar angles (and microwave drive axes) versus sample rotation
6. mixing     - spin-mixing coefficients over a (theta, B) grid

Usage:
    python -m nvkinetics.main resonances --theta 0 70.5
    python -m nvkinetics.main sweep --mode power --theta 0 --jobs 4
    python -m nvkinetics.main fit spectrum.csv --integrate --baseline
"""
import argparse
import logging
import math
import sys
import time
import traceback
from typing import Any, Dict, List, Optional, Sequence

from nvkinetics.analytics.polarization_sweep import PolarizationSweep
from nvkinetics.config import settings
from nvkinetics.config.run_config import RunConfig, load_run_config
from nvkinetics.exceptions import ConfigError, SpectrumFormatError
from nvkinetics.ingest.spectrum_loader import SpectrumLoader
from nvkinetics.physics.resonance import rotation_for_direction
from nvkinetics.physics.spin_model import Manifold
from nvkinetics.reports.report_writer import ReportWriter
from nvkinetics.spectra.fitting import FitResult, fit_multipeak, initial_peaks
from nvkinetics.spectra.processing import (
    SpectrumKind,
    baseline_correct,
    extract_polarization,
    hyperfine_field_splitting,
    integrate,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NO_ROOTS = 3
EXIT_NOT_CONVERGED = 4

# Half-width of the automatic baseline exclusion window, in initial fwhm units
BASELINE_WINDOW_FWHM = 30.0


def setup_logging(level: str = settings.LOG_LEVEL) -> None:
    """Log to standard error, plus NVKIN_LOG_FILE when set."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.LOG_FILE:
        handlers.append(logging.FileHandler(settings.LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=str, help='JSON run configuration (default: $NVKIN_CONFIG)')
    parser.add_argument('--output', type=str, help='Write data to this file instead of stdout')
    parser.add_argument('--jobs', type=int, help='Worker processes (default: processor count)')
    parser.add_argument('--log-level', type=str, default=settings.LOG_LEVEL,
                        help='Logging level (DEBUG, INFO, WARNING, ERROR)')
    parser.add_argument('--mw-frequency', type=float, help='Microwave frequency in Hz')
    parser.add_argument('--field-window', type=float, nargs=2, metavar=('LO', 'HI'),
                        help='Resonance search window in T')
    parser.add_argument('--temperature', type=float, help='Sample temperature in K')
    parser.add_argument('--t1', type=float, help='Ground-state T1 in s')


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(description='NV center spin kinetics toolkit')
    subparsers = parser.add_subparsers(dest='command', required=True)

    resonances = subparsers.add_parser('resonances', help='Resonant fields versus polar angle')
    resonances.add_argument('--theta', type=float, nargs='+', help='Polar angles in degrees')

    sweep = subparsers.add_parser('sweep', help='Steady-state polarization sweeps')
    sweep.add_argument('--mode', choices=['theta', 'power', 't1'], required=True)
    sweep.add_argument('--theta', type=float, nargs='+',
                       help='Angle grid (theta mode) or fixed angle in degrees')
    sweep.add_argument('--intensity', type=float, nargs='+',
                       help='Intensity grid (power mode) or fixed intensity in W/m^2')
    sweep.add_argument('--t1-grid', type=float, nargs='+', help='T1 values in s (t1 mode)')

    spectrum = subparsers.add_parser('spectrum', help='Synthetic ESR spectrum')
    spectrum.add_argument('--theta', type=float, default=0.0, help='Polar angle in degrees')
    spectrum.add_argument('--intensity', type=float, default=settings.MAX_INTENSITY,
                          help='Laser intensity in W/m^2')
    spectrum.add_argument('--kind', choices=[k.value for k in SpectrumKind],
                          default=SpectrumKind.ABSORPTION.value)
    spectrum.add_argument('--linewidth', type=float, help='Line fwhm in T')

    fit = subparsers.add_parser('fit', help='Fit a spectrum CSV file')
    fit.add_argument('input', type=str, help='Two-column CSV (field_T, signal)')
    fit.add_argument('--kind', choices=[k.value for k in SpectrumKind],
                     help='Spectrum kind (detected from the header when omitted)')
    fit.add_argument('--integrate', action='store_true', help='Integrate differential input first')
    fit.add_argument('--baseline', action='store_true', help='Subtract a polynomial baseline')
    fit.add_argument('--baseline-degree', type=int, default=1)
    fit.add_argument('--window', type=float, nargs=2, action='append', metavar=('LO', 'HI'),
                     help='Peak window in T excluded from the baseline (repeatable)')
    fit.add_argument('--n-peaks', type=int, help='Keep only the strongest N peak groups')
    fit.add_argument('--n-hyperfine', type=int, help='Hyperfine components per peak')
    fit.add_argument('--unequal-amplitudes', action='store_true',
                     help='Fit each hyperfine component amplitude separately')
    fit.add_argument('--coupling', type=float, nargs='+',
                     help='Microwave coupling per peak for polarization extraction')
    fit.add_argument('--ref-area', type=float, help='Dark-state area of the 1-2 line')
    fit.add_argument('--ref-pol', type=float, help='Thermal polarization of the 1-2 line')

    geometry = subparsers.add_parser('geometry', help='NV polar angles versus sample rotation')
    geometry.add_argument('--direction', type=float, nargs=3, metavar=('H', 'K', 'L'),
                          help='Only the rotation that brings the field closest to [HKL]')
    geometry.add_argument('--drive', action='store_true',
                          help='Add the microwave axis in each NV frame')

    mixing = subparsers.add_parser('mixing', help='Spin-mixing coefficients')
    mixing.add_argument('--manifold', choices=[m.value for m in Manifold],
                        default=Manifold.GROUND.value)
    mixing.add_argument('--theta', type=float, nargs='+', help='Polar angles in degrees')
    mixing.add_argument('--fields', type=float, nargs='+', help='Field magnitudes in T')

    for sub in subparsers.choices.values():
        _add_common_arguments(sub)
    return parser.parse_args(argv)


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Translate flags into RunConfig overrides; unset flags are None and ignored."""
    overrides: Dict[str, Any] = {
        'mw_frequency': args.mw_frequency,
        'field_window': args.field_window,
        'jobs': args.jobs,
        'output_path': args.output,
        'spin': {'temperature': args.temperature},
        'rates': {'t1': args.t1},
    }
    theta = getattr(args, 'theta', None)
    intensity = getattr(args, 'intensity', None)

    if args.command in ('resonances', 'mixing'):
        overrides['theta_grid_deg'] = theta
    if args.command == 'mixing':
        overrides['mixing_fields'] = args.fields
    if args.command == 'sweep':
        if args.mode == 'theta':
            overrides['theta_grid_deg'] = theta
            overrides['sweep_intensity'] = intensity[0] if intensity else None
        else:
            overrides['sweep_theta_deg'] = theta[0] if theta else None
        if args.mode == 'power':
            overrides['intensity_grid'] = intensity
        elif args.mode == 't1':
            overrides['sweep_intensity'] = intensity[0] if intensity else None
            overrides['t1_grid'] = args.t1_grid
    if args.command == 'spectrum':
        overrides['linewidth'] = args.linewidth
    if args.command == 'fit':
        overrides['n_hyperfine'] = args.n_hyperfine
    if args.command == 'geometry' and args.direction:
        try:
            rotation = rotation_for_direction(args.direction)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        overrides['rotation_grid_deg'] = [math.degrees(rotation)]
    return overrides


def run_resonances(config: RunConfig, writer: ReportWriter) -> int:
    df = PolarizationSweep(config).resonance_table()
    writer.write_csv(df)
    if df.empty:
        logger.warning("No resonances found in the field window for any angle")
        return EXIT_NO_ROOTS
    return EXIT_OK


def run_sweep(config: RunConfig, writer: ReportWriter, mode: str) -> int:
    writer.write_csv(PolarizationSweep(config).sweep(mode))
    return EXIT_OK


def run_spectrum(config: RunConfig, writer: ReportWriter, theta_deg: float, intensity: float,
                 kind: str) -> int:
    spectrum = PolarizationSweep(config).synthetic_spectrum(theta_deg, intensity, SpectrumKind(kind))
    writer.write_spectrum(spectrum)
    return EXIT_OK


def run_fit(config: RunConfig, writer: ReportWriter, args: argparse.Namespace) -> int:
    """Load, optionally integrate and baseline-correct, fit and report a spectrum."""
    kind = SpectrumKind(args.kind) if args.kind else None
    spectrum = SpectrumLoader().load_spectrum(args.input, kind)

    if args.integrate and spectrum.kind is SpectrumKind.DIFFERENTIAL:
        logger.info("Integrating differential spectrum")
        spectrum = integrate(spectrum)

    n_hyperfine = config.n_hyperfine
    splitting = hyperfine_field_splitting(config.spin) if n_hyperfine > 1 else 0.0

    if args.baseline:
        windows = args.window
        if not windows:
            windows = [(p.center - BASELINE_WINDOW_FWHM * p.fwhm - splitting,
                        p.center + BASELINE_WINDOW_FWHM * p.fwhm + splitting)
                       for p in initial_peaks(spectrum, n_hyperfine, splitting,
                                              max_peaks=args.n_peaks)]
        logger.info(f"Removing degree-{args.baseline_degree} baseline outside {len(windows)} windows")
        spectrum = baseline_correct(spectrum, windows, args.baseline_degree)

    initial = initial_peaks(spectrum, n_hyperfine, splitting, max_peaks=args.n_peaks)
    if not initial:
        logger.error("No peaks found in the spectrum")
        result = FitResult(peaks=[], residual_norm=float('nan'), converged=False, iterations=0,
                           message='no peaks found')
        writer.write_json(writer.build_fit_report(result, g_factor=config.spin.g_factor))
        return EXIT_NOT_CONVERGED

    result = fit_multipeak(spectrum, initial, equal_amplitude=not args.unequal_amplitudes)

    estimates = []
    if args.ref_area is not None and args.ref_pol is not None:
        couplings = args.coupling or [1.0] * len(result.peaks)
        if len(couplings) < len(result.peaks):
            logger.warning(f"{len(couplings)} couplings for {len(result.peaks)} peaks; "
                           f"extracting polarization for the first {len(couplings)} only")
        for peak, coupling in zip(result.peaks, couplings):
            estimates.append(extract_polarization(peak.area, coupling, args.ref_area, args.ref_pol))

    writer.write_json(writer.build_fit_report(result, estimates, g_factor=config.spin.g_factor))
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def run_geometry(config: RunConfig, writer: ReportWriter, with_drive: bool = False) -> int:
    writer.write_csv(PolarizationSweep(config).geometry_table(with_drive))
    return EXIT_OK


def run_mixing(config: RunConfig, writer: ReportWriter, manifold: str) -> int:
    writer.write_csv(PolarizationSweep(config).mixing_table(Manifold(manifold)))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    start_time = time.time()
    args = parse_arguments(argv)
    setup_logging(args.log_level)
    logger.info(f"Starting nvkinetics {args.command}")

    try:
        config = load_run_config(args.config, config_overrides(args))
        writer = ReportWriter(config.output_path)

        if args.command == 'resonances':
            code = run_resonances(config, writer)
        elif args.command == 'sweep':
            code = run_sweep(config, writer, args.mode)
        elif args.command == 'spectrum':
            code = run_spectrum(config, writer, args.theta, args.intensity, args.kind)
        elif args.command == 'fit':
            code = run_fit(config, writer, args)
        elif args.command == 'geometry':
            code = run_geometry(config, writer, args.drive)
        else:
            code = run_mixing(config, writer, args.manifold)

    except (ConfigError, SpectrumFormatError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Command {args.command} failed: {e}")
        logger.error(traceback.format_exc())
        return EXIT_FAILURE

    elapsed_time = time.time() - start_time
    logger.info(f"Finished {args.command} in {elapsed_time:.2f} seconds with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
