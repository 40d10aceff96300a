"""
NV center spin kinetics: resonances, optically induced polarization and ESR spectra.
"""

__version__ = "0.1.0"
