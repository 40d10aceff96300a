"""
Seven-level kinetic model of the optically pumped NV center.

States are indexed 1..7 in the public API: |1>..|3> ground triplet eigenstates, |4>..|6>
excited triplet eigenstates, |7> the metastable singlet. Internally arrays are 0-based.
Rates are in Hz and k[i, j] is the rate of transfer from state i to state j.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy import constants, linalg

from nvkinetics.config import settings
from nvkinetics.exceptions import SingularSystemError, StepSizeError
from nvkinetics.physics.spin_model import (
    EigenSystem,
    FieldVector,
    Manifold,
    MixingMatrix,
    SpinSystemParams,
    manifold_mixing,
)

logger = logging.getLogger(__name__)

N_LEVELS = 7
NORMALIZATION_ROW = N_LEVELS - 1


@dataclass(frozen=True)
class ZeroFieldRates:
    """
    Zero-field transition rates, relaxation time and optical parameters.

    Zero-field states follow the m_s order (0, -1, +1) in each triplet, so k_isc_0 is the
    intersystem crossing out of the excited m_s = 0 state and k_singlet_0 the singlet decay
    into the ground m_s = 0 state.
    """

    k_radiative: float = settings.K_RADIATIVE
    k_isc_pm: float = settings.K_ISC_PM
    k_isc_0: float = settings.K_ISC_0
    k_singlet_pm: float = settings.K_SINGLET_PM
    k_singlet_0: float = settings.K_SINGLET_0
    t1: float = settings.T1
    sigma: float = settings.SIGMA_CM2  # cm^2
    wavelength: float = settings.WAVELENGTH
    t1_dq: Optional[float] = None

    def __post_init__(self):
        positive = {
            'k_radiative': self.k_radiative,
            'k_isc_pm': self.k_isc_pm,
            'k_isc_0': self.k_isc_0,
            'k_singlet_pm': self.k_singlet_pm,
            'k_singlet_0': self.k_singlet_0,
            't1': self.t1,
            'sigma': self.sigma,
            'wavelength': self.wavelength,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.t1_dq is not None and not self.t1_dq > 0:
            raise ValueError(f"t1_dq must be positive when set, got {self.t1_dq}")


@dataclass(frozen=True)
class Populations:
    """Fractional occupation of the seven levels; non-negative and summing to one."""

    n: np.ndarray

    def __post_init__(self):
        n = np.array(self.n, dtype=float)
        if n.shape != (N_LEVELS,):
            raise ValueError(f"Populations need {N_LEVELS} values, got shape {n.shape}")
        if not np.all(np.isfinite(n)):
            raise ValueError("Populations contain non-finite values")
        tol = settings.POPULATION_TOL
        if n.min() < -tol:
            raise ValueError(f"Populations must be non-negative, got minimum {n.min():.3e}")
        if abs(n.sum() - 1.0) > tol:
            raise ValueError(f"Populations must sum to 1, got {n.sum():.12g}")
        n.setflags(write=False)
        object.__setattr__(self, 'n', n)

    @property
    def total(self) -> float:
        return float(self.n.sum())

    def __getitem__(self, state: int) -> float:
        """Population of level ``state`` (1-based)."""
        return float(self.n[_index(state)])


@dataclass(frozen=True)
class RateMatrix:
    """
    Rates between mixed eigenstates at one field point.

    ``k_dark`` holds the same matrix assembled with beta = 0; it defines the thermal
    correction of the steady state.
    """

    k: np.ndarray
    beta: float = 0.0
    k_dark: Optional[np.ndarray] = None

    def __post_init__(self):
        k = _validated_rates(self.k)
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.k_dark is None:
            k_dark = k if self.beta == 0 else None
        else:
            k_dark = _validated_rates(self.k_dark)
        object.__setattr__(self, 'k', k)
        object.__setattr__(self, 'k_dark', k_dark)

    @property
    def generator(self) -> np.ndarray:
        return generator(self.k)

    @property
    def max_rate(self) -> float:
        """Largest total outflow rate of any level."""
        return float(self.k.sum(axis=1).max())


@dataclass(frozen=True)
class SteadyStateSolution:
    """Everything computed for a single field point and pumping strength."""

    populations: Populations
    dark_populations: Populations
    rate_matrix: RateMatrix
    ground: EigenSystem


def _index(state: int) -> int:
    if not 1 <= state <= N_LEVELS:
        raise ValueError(f"Level index must be in 1..{N_LEVELS}, got {state}")
    return state - 1


def _validated_rates(k: np.ndarray) -> np.ndarray:
    k = np.array(k, dtype=float)
    if k.shape != (N_LEVELS, N_LEVELS):
        raise ValueError(f"Rate matrix must be {N_LEVELS}x{N_LEVELS}, got shape {k.shape}")
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise ValueError("Rate matrix entries must be finite and non-negative")
    np.fill_diagonal(k, 0.0)
    k.setflags(write=False)
    return k


def _as_vector(n: Union[Populations, Sequence[float]]) -> np.ndarray:
    return n.n if isinstance(n, Populations) else Populations(n).n


def generator(k: np.ndarray) -> np.ndarray:
    """
    Generator G of dn/dt = G n for the rate table ``k``.

    dn_i/dt = sum_j (k[j, i] n_j - k[i, j] n_i); every column of G sums to zero.
    """
    k = np.asarray(k, dtype=float)
    return k.T - np.diag(k.sum(axis=1))


def pumping_beta(laser_intensity: float, rates: ZeroFieldRates) -> float:
    """
    Dimensionless optical pumping strength.

    Args:
        laser_intensity: Pump intensity in W/m^2
        rates: Zero-field rates (radiative rate, cross-section and wavelength are used)

    Returns:
        beta = sigma I / (4 k_r h nu); one of four NV orientations is excited
    """
    if laser_intensity < 0:
        raise ValueError(f"Laser intensity must be non-negative, got {laser_intensity}")
    photon_energy = constants.h * constants.c / rates.wavelength
    sigma_m2 = rates.sigma * 1e-4
    return sigma_m2 * laser_intensity / (4.0 * rates.k_radiative * photon_energy)


def zero_field_rate_matrix(rates: ZeroFieldRates, beta: float) -> np.ndarray:
    """
    Rates between the zero-field states.

    Zero-field order (0-based): ground m_s (0, -1, +1), excited m_s (0, -1, +1), singlet.
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    k0 = np.zeros((N_LEVELS, N_LEVELS))
    for g in range(3):
        k0[g + 3, g] = rates.k_radiative
        k0[g, g + 3] = beta * rates.k_radiative

    k0[3, 6] = rates.k_isc_0
    k0[4, 6] = k0[5, 6] = rates.k_isc_pm
    k0[6, 0] = rates.k_singlet_0
    k0[6, 1] = k0[6, 2] = rates.k_singlet_pm

    relax = 1.0 / (2.0 * rates.t1)
    k0[0, 1] = k0[1, 0] = k0[0, 2] = k0[2, 0] = relax
    if rates.t1_dq is not None:
        k0[1, 2] = k0[2, 1] = 1.0 / (2.0 * rates.t1_dq)
    return k0


def _mixed_rates(mixing: np.ndarray, rates: ZeroFieldRates, beta: float) -> np.ndarray:
    k = mixing @ zero_field_rate_matrix(rates, beta) @ mixing.T
    np.fill_diagonal(k, 0.0)
    # Round-off can leave -0.0 style negatives on entries that vanish exactly.
    return np.clip(k, 0.0, None)


def assemble_rate_matrix(mix_gs: MixingMatrix, mix_es: MixingMatrix, rates: ZeroFieldRates,
                         beta: float) -> RateMatrix:
    """
    Transition rates between the spin-mixed eigenstates.

    k_ij = sum_p sum_q |a_ip|^2 |a_jq|^2 k0_pq, with the mixing extended block-diagonally
    over ground, excited and singlet levels.

    Args:
        mix_gs: Ground manifold mixing at the field point
        mix_es: Excited manifold mixing at the same field point
        rates: Zero-field rates
        beta: Pumping strength (>= 0)

    Returns:
        RateMatrix carrying both the pumped and the dark rates
    """
    if Manifold(mix_gs.manifold) is not Manifold.GROUND or \
            Manifold(mix_es.manifold) is not Manifold.EXCITED:
        raise ValueError(f"Expected ground and excited mixing, got {mix_gs.manifold} "
                         f"and {mix_es.manifold}")
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")

    mixing = linalg.block_diag(mix_gs.alpha_sq, mix_es.alpha_sq, [[1.0]])
    k = _mixed_rates(mixing, rates, beta)
    k_dark = k if beta == 0 else _mixed_rates(mixing, rates, 0.0)
    return RateMatrix(k=k, beta=beta, k_dark=k_dark)


def thermal_populations(ground_energies: Sequence[float], temperature: float) -> Populations:
    """
    Boltzmann occupation of the ground triplet; excited and singlet levels are empty.

    Args:
        ground_energies: The three ground eigenfrequencies in Hz
        temperature: Temperature in K
    """
    energies = np.asarray(ground_energies, dtype=float)
    if energies.shape != (3,):
        raise ValueError(f"Expected three ground energies, got shape {energies.shape}")
    if temperature <= 0:
        raise ValueError(f"Temperature must be positive, got {temperature}")

    x = constants.h * (energies - energies.min()) / (constants.k * temperature)
    weights = np.exp(-x)
    n = np.zeros(N_LEVELS)
    n[:3] = weights / weights.sum()
    return Populations(n)


def thermal_source(rm: RateMatrix, n_dark: Union[Populations, Sequence[float]]) -> np.ndarray:
    """Thermal correction b = G(beta=0) n_dark; the pumped system obeys dn/dt = G n - b."""
    if rm.k_dark is None:
        raise ValueError("Rate matrix carries no dark rates; assemble it with assemble_rate_matrix")
    return generator(rm.k_dark) @ _as_vector(n_dark)


def steady_state(rm: RateMatrix, n_dark: Union[Populations, Sequence[float]],
                 replaced_row: int = NORMALIZATION_ROW) -> Populations:
    """
    Thermally corrected steady state G(beta) n = G(0) n_dark.

    One rate equation is redundant and is replaced by sum(n) = 1.

    Args:
        rm: Rate matrix with its dark counterpart
        n_dark: Boltzmann populations of the same field point
        replaced_row: 0-based index of the equation replaced by the normalization

    Returns:
        Normalized Populations
    """
    if not 0 <= replaced_row < N_LEVELS:
        raise ValueError(f"replaced_row must be in 0..{N_LEVELS - 1}, got {replaced_row}")
    a = rm.generator.copy()
    b = thermal_source(rm, n_dark)
    a[replaced_row, :] = 1.0
    b[replaced_row] = 1.0

    # Rates span six decades; equilibrate rows before solving.
    scale = np.abs(a).max(axis=1)
    scale[scale == 0] = 1.0
    try:
        n = linalg.solve(a / scale[:, None], b / scale)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(f"Steady-state system could not be solved: {e}") from e
    if not np.all(np.isfinite(n)):
        raise SingularSystemError("Steady-state solution is not finite")

    return Populations(n / n.sum())


def _check_step(rm: RateMatrix, dt: float) -> None:
    if dt <= 0:
        raise StepSizeError(f"Time step must be positive, got {dt}")
    stiffness = dt * rm.max_rate
    if stiffness >= settings.STABLE_STEP_LIMIT:
        raise StepSizeError(f"Time step {dt:.3e} s too coarse: dt*max_rate = {stiffness:.3g} "
                            f"(limit {settings.STABLE_STEP_LIMIT})")


def _rk4_step(g: np.ndarray, b: np.ndarray, n: np.ndarray, h: float) -> np.ndarray:
    k1 = g @ n - b
    k2 = g @ (n + 0.5 * h * k1) - b
    k3 = g @ (n + 0.5 * h * k2) - b
    k4 = g @ (n + h * k3) - b
    return n + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_grid(t_final: float, dt: float) -> Tuple[int, float]:
    """Number and length of equal steps of at most ``dt`` covering ``t_final``."""
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    return n_steps, t_final / n_steps


def time_evolution(rm: RateMatrix, n0: Union[Populations, Sequence[float]], t_final: float,
                   dt: float, source: Optional[np.ndarray] = None) -> Populations:
    """
    Integrate dn/dt = G n - source with fixed 4th-order Runge-Kutta steps.

    Args:
        rm: Rate matrix
        n0: Initial populations
        t_final: Integration time in s (>= 0)
        dt: Largest step in s; dt * max_rate must stay below the stability limit
        source: Optional constant source term (see thermal_source)

    Returns:
        Populations at t_final
    """
    start = _as_vector(n0)
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    _check_step(rm, dt)
    if t_final == 0:
        return Populations(start)

    b = np.zeros(N_LEVELS) if source is None else np.asarray(source, dtype=float)
    g = rm.generator
    n_steps, h = _rk4_grid(t_final, dt)
    n = start.copy()
    for _ in range(n_steps):
        n = _rk4_step(g, b, n, h)
    return Populations(n)


def trajectory(rm: RateMatrix, n0: Union[Populations, Sequence[float]], t_final: float,
               dt: float, source: Optional[np.ndarray] = None):
    """Same integration as time_evolution, returning (times, states) with the start included."""
    start = _as_vector(n0)
    _check_step(rm, dt)
    times, states = [0.0], [start]
    if t_final > 0:
        b = np.zeros(N_LEVELS) if source is None else np.asarray(source, dtype=float)
        g = rm.generator
        n_steps, h = _rk4_grid(t_final, dt)
        n = start
        for step in range(1, n_steps + 1):
            n = _rk4_step(g, b, n, h)
            times.append(step * h)
            states.append(n)
    return np.array(times), np.array(states)


def relax_populations(rm: RateMatrix, n0: Union[Populations, Sequence[float]], t_final: float,
                      source: Optional[np.ndarray] = None,
                      fine_horizon: float = settings.FINE_HORIZON,
                      coarse_steps: int = 1000) -> Populations:
    """
    Long-time relaxation in two stages.

    The fast optical cycle is integrated with Runge-Kutta steps up to ``fine_horizon``; the
    remaining time is covered with the exact propagator of the affine system, obtained from
    the matrix exponential of the augmented generator [[G, -b], [0, 0]].
    """
    start = _as_vector(n0)
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    b = np.zeros(N_LEVELS) if source is None else np.asarray(source, dtype=float)

    fine_time = min(fine_horizon, t_final)
    dt = 0.9 * settings.STABLE_STEP_LIMIT / rm.max_rate
    n = time_evolution(rm, start, fine_time, dt, source=b).n

    remaining = t_final - fine_time
    if remaining > 0:
        augmented = np.zeros((N_LEVELS + 1, N_LEVELS + 1))
        augmented[:N_LEVELS, :N_LEVELS] = rm.generator
        augmented[:N_LEVELS, N_LEVELS] = -b
        propagator = linalg.expm(augmented * (remaining / coarse_steps))
        y = np.append(n, 1.0)
        for _ in range(coarse_steps):
            y = propagator @ y
        # The propagator conserves the total only up to round-off.
        n = y[:N_LEVELS] / y[:N_LEVELS].sum()

    logger.debug(f"Relaxed populations over {t_final:.3e} s (fine stage {fine_time:.1e} s)")
    return Populations(n)


def spin_polarization(n: Union[Populations, Sequence[float]], i: int, j: int) -> float:
    """S_z^ij = (n_i - n_j) / sum(n) for 1-based level indices."""
    if i == j:
        raise ValueError(f"Polarization needs two distinct levels, got {i} twice")
    vec = n.n if isinstance(n, Populations) else np.asarray(n, dtype=float)
    a, b = _index(i), _index(j)
    if vec.shape != (N_LEVELS,):
        raise ValueError(f"Populations need {N_LEVELS} values, got shape {vec.shape}")
    return float((vec[a] - vec[b]) / vec.sum())


def amplification(optical_pol: float, thermal_pol: float) -> float:
    """|optical / thermal| polarization ratio."""
    if thermal_pol == 0:
        raise ValueError("Thermal polarization is zero; amplification undefined")
    return abs(optical_pol / thermal_pol)


def steady_state_at(params: SpinSystemParams, rates: ZeroFieldRates, field: FieldVector,
                    beta: float) -> SteadyStateSolution:
    """Mix both triplets at ``field``, assemble the rates and solve the steady state."""
    ground, mix_gs = manifold_mixing(params, field, Manifold.GROUND)
    _, mix_es = manifold_mixing(params, field, Manifold.EXCITED)
    rm = assemble_rate_matrix(mix_gs, mix_es, rates, beta)
    n_dark = thermal_populations(ground.energies, params.temperature)
    n = steady_state(rm, n_dark)
    return SteadyStateSolution(populations=n, dark_populations=n_dark, rate_matrix=rm,
                               ground=ground)
