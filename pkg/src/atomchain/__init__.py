"""Few-excitation eigenstates, decay and far-field light of interacting atom chains."""

from .dynamics import DensityState, emission_pattern, evolve_spontaneous
from .eigen import (
    BoundState,
    DegenerateParameterError,
    OffGridError,
    ScatteringState,
    WaveIndex,
    bound_state,
    phase_shift,
    scattering_state,
    single_dispersion,
)
from .model import STRONG_U_THRESHOLD, ChainParams, coupling_rate
from .momentum import branching, distribution, eta_closed, lattice_sum
from .pumped import PumpConfig, rate_steady_numeric, single_pump_steady, two_pump_steady

__version__ = "0.1.0"
