"""
Configuration settings for the NV kinetics toolkit.

Every default can be overridden through an ``NVKIN_*`` environment variable or a
``.env`` file in the working directory.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

CONFIG_PATH = os.getenv("NVKIN_CONFIG")
LOG_FILE = os.getenv("NVKIN_LOG_FILE")
LOG_LEVEL = os.getenv("NVKIN_LOG_LEVEL", "INFO")

# Spin Hamiltonian
D_GS = float(os.getenv("NVKIN_D_GS", "2.87e9"))  # Hz
D_ES = float(os.getenv("NVKIN_D_ES", "1.42e9"))  # Hz
G_FACTOR = float(os.getenv("NVKIN_G_FACTOR", "2.0"))
HYPERFINE_PAR = float(os.getenv("NVKIN_A_PAR", "-2.16e6"))  # Hz, 14N
HYPERFINE_PERP = float(os.getenv("NVKIN_A_PERP", "-2.70e6"))  # Hz, 14N
TEMPERATURE = float(os.getenv("NVKIN_TEMPERATURE", "298.0"))  # K

# Zero-field rates of the seven-level model
K_RADIATIVE = float(os.getenv("NVKIN_K_RADIATIVE", "62.7e6"))
K_ISC_PM = float(os.getenv("NVKIN_K_ISC_PM", "80e6"))
K_ISC_0 = float(os.getenv("NVKIN_K_ISC_0", "12.97e6"))
K_SINGLET_PM = float(os.getenv("NVKIN_K_SINGLET_PM", "1.08e6"))
K_SINGLET_0 = float(os.getenv("NVKIN_K_SINGLET_0", "3.45e6"))
T1 = float(os.getenv("NVKIN_T1", "5.5e-3"))  # s
SIGMA_CM2 = float(os.getenv("NVKIN_SIGMA_CM2", "9.3e-17"))
WAVELENGTH = float(os.getenv("NVKIN_WAVELENGTH", "532e-9"))  # m

# Experiment and sweep defaults
MW_FREQUENCY = float(os.getenv("NVKIN_MW_FREQUENCY", "9.43e9"))  # Hz, X-band
FIELD_WINDOW = (0.05, 0.70)  # T
FIELD_GRID_STEP = 0.5e-3  # T, bracketing grid for root search
ROOT_XTOL = 1e-9  # T
ROOT_MERGE_DISTANCE = 1e-3  # T
MAX_INTENSITY = 8.3e4  # W/m^2 (83 mW/mm^2)
INTENSITY_GRID = [0.0, 1e3, 5e3, 1e4, 2e4, 4e4, 8.3e4]  # W/m^2
T1_GRID = [0.5e-3, 1e-3, 2e-3, 5.5e-3, 10e-3]  # s
LINEWIDTH = float(os.getenv("NVKIN_LINEWIDTH", "2.0e-6"))  # T, fwhm
N_HYPERFINE = 3
SPECTRUM_STEP = 1e-4  # T, coarse axis spacing away from lines
COUPLING_FLOOR = 1e-10

# Numerical tolerances
HERMITIAN_RTOL = 1e-12
UNITARITY_TOL = 1e-10
POPULATION_TOL = 1e-9
STABLE_STEP_LIMIT = 0.1  # dt * max_rate
FINE_HORIZON = 10e-6  # s
FIT_MAX_ITERATIONS = 200
FIT_GTOL = 1e-10
BASELINE_MIN_SAMPLES = 10

# Worker pool
JOBS = int(os.getenv("NVKIN_JOBS", "0")) or None

# Default grids for the CLI
THETA_GRID_DEG = [float(t) for t in range(0, 91, 10)]
ROTATION_GRID_DEG = [float(r) for r in range(0, 181, 5)]
MIXING_FIELDS = [round(0.05 * i, 2) for i in range(15)]  # T
